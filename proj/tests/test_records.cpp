// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "fk/records.hpp"
#include "helpers.hpp"

using namespace fk;
using namespace fktest;

TEST_CASE("non-finite reals survive the json trip") {
    CHECK(std::isnan(real_from_json(real_to_json(std::numeric_limits<double>::quiet_NaN()))));
    CHECK(real_from_json(real_to_json(std::numeric_limits<double>::infinity())) ==
          std::numeric_limits<double>::infinity());
    CHECK(real_from_json(real_to_json(-std::numeric_limits<double>::infinity())) ==
          -std::numeric_limits<double>::infinity());
    CHECK(real_from_json(real_to_json(0.1)) == 0.1);
}

TEST_CASE("run record lines round-trip bitwise") {
    DetRng rng(1234);
    for (int i = 0; i < 300; ++i) {
        RunRecord r = gen_record(rng);
        std::string line = record_line("run_record", to_json(r));
        auto [type, j] = parse_record_line(line);
        REQUIRE(type == "run_record");
        RunRecord back = run_record_from_json(j);
        CHECK(record_equal(r, back));
    }
}

TEST_CASE("records files reject foreign versions and garbage") {
    CHECK_THROWS_WITH_AS(parse_record_line("{\"version\":\"fk-records/2\",\"type\":\"x\"}"),
                         doctest::Contains("parse-error"), Error);
    CHECK_THROWS_AS(parse_record_line("not json"), Error);
    std::istringstream in("{\"version\":\"fk-records/1\",\"type\":\"mystery\"}\n");
    CHECK_THROWS_AS(parse_registry(in), Error);
}

TEST_CASE("registry serializes and parses back") {
    Registry reg = toy_kernel_suite().registry;
    std::string text = serialize_registry(reg);
    std::istringstream in(text);
    Registry back = parse_registry(in);
    CHECK(back.families().size() == reg.families().size());
    CHECK(back.items().size() == reg.items().size());
    CHECK(serialize_registry(back) == text);
}

TEST_CASE("manifest documents round-trip") {
    DetRng rng(99);
    for (int i = 0; i < 300; ++i) {
        ThresholdManifest m = gen_manifest(rng);
        std::istringstream in(serialize_manifest(m));
        ThresholdManifest back = parse_manifest(in);
        CHECK(manifest_equal(m, back));
    }
}

TEST_CASE("capture bundles round-trip") {
    DetRng rng(4242);
    for (int i = 0; i < 300; ++i) {
        CaptureBundle b = gen_capture(rng);
        std::istringstream in(serialize_capture(b));
        CaptureBundle back = parse_capture(in);
        CHECK(capture_equal(b, back));
    }
}

TEST_CASE("scorecards round-trip") {
    DetRng rng(31337);
    for (int i = 0; i < 300; ++i) {
        ScoreCard c = gen_scorecard(rng);
        std::istringstream in(serialize_scorecard(c));
        ScoreCard back = parse_scorecard(in);
        CHECK(scorecard_equal(c, back));
    }
}

TEST_CASE("run records files concatenate and parse in order") {
    DetRng rng(5);
    std::vector<RunRecord> records;
    for (int i = 0; i < 10; ++i) records.push_back(gen_record(rng));
    std::istringstream in(serialize_run_records(records));
    auto back = parse_run_records(in);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) CHECK(record_equal(records[i], back[i]));
}
