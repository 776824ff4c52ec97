// SPDX-License-Identifier: Apache-2.0
//
// File formats. Registries, run records and expert loads travel as
// line-delimited JSON ("fk-records/1", one object per line); manifests,
// capture bundles and scorecards are single JSON documents with their own
// version tags. Field names match the domain types.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fk/core.hpp"

#include "json.hpp"

namespace fk {

inline constexpr const char* kRecordsVersion = "fk-records/1";
inline constexpr const char* kManifestVersion = "fk-manifest/1";
inline constexpr const char* kCaptureVersion = "fk-capture/1";
inline constexpr const char* kScorecardVersion = "fk-scorecard/1";

struct CaptureScenario {
    std::string scenario_id;
    std::vector<OutputPayload> inputs;
};

enum class CaptureSource { EndToEndRun, Synthetic };
const char* to_string(CaptureSource s);
CaptureSource capture_source_from_string(const std::string& s);

struct CaptureBundle {
    std::string bundle_id;
    std::string item_id;
    std::vector<CaptureScenario> scenarios;
    CaptureSource source = CaptureSource::Synthetic;
    std::int64_t seed = 0;

    void validate() const;
};

// Non-finite reals are encoded as the strings "inf", "-inf", "nan" so that
// sentinel discrepancies and NaN payloads survive a round trip.
nlohmann::json real_to_json(double v);
double real_from_json(const nlohmann::json& j);

nlohmann::json to_json(const OutputPayload& p);
nlohmann::json to_json(const FamilySpec& f);
nlohmann::json to_json(const DtypeTolerance& t);
nlohmann::json to_json(const BenchmarkItem& i);
nlohmann::json to_json(const ScenarioResult& s);
nlohmann::json to_json(const RunRecord& r);
nlohmann::json to_json(const CaptureBundle& b);
nlohmann::json to_json(const ScoreCard& c);
nlohmann::json manifest_to_json(const ThresholdManifest& m);

OutputPayload payload_from_json(const nlohmann::json& j);
FamilySpec family_from_json(const nlohmann::json& j);
DtypeTolerance tolerance_from_json(const nlohmann::json& j);
BenchmarkItem item_from_json(const nlohmann::json& j);
ScenarioResult scenario_from_json(const nlohmann::json& j);
RunRecord run_record_from_json(const nlohmann::json& j);
CaptureBundle capture_from_json(const nlohmann::json& j);
ScoreCard scorecard_from_json(const nlohmann::json& j);
ThresholdManifest manifest_from_json(const nlohmann::json& j);

// fk-records/1 line encoding: {"version":..., "type":..., ...fields}.
std::string record_line(const std::string& type, nlohmann::json fields);
// Parses one line; returns (type, fields) after checking the version tag.
std::pair<std::string, nlohmann::json> parse_record_line(const std::string& line);

// Registry and run-record files.
std::string serialize_registry(const Registry& reg);
Registry parse_registry(std::istream& in);

std::string serialize_run_records(const std::vector<RunRecord>& records);
std::vector<RunRecord> parse_run_records(std::istream& in);

std::string serialize_manifest(const ThresholdManifest& m);
ThresholdManifest parse_manifest(std::istream& in);

std::string serialize_capture(const CaptureBundle& b);
CaptureBundle parse_capture(std::istream& in);

std::string serialize_scorecard(const ScoreCard& c);
ScoreCard parse_scorecard(std::istream& in);

// Small file helpers used by the CLI and the harness.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace fk
