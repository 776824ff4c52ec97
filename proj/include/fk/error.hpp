// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace fk {

// Every failure mode the engine can report. The CLI maps these onto exit
// codes; tests match on the code rather than the message text.
enum class Errc {
    duplicate_id,
    dangling_family_reference,
    empty_scenario_list,
    invalid_value,
    shape_mismatch,
    non_finite_reference,
    non_finite_input,
    empty_reference,
    k_exceeds_length,
    kind_mismatch,
    fewer_than_two_replicates,
    degenerate_curve,
    cliff_inside_band,
    band_violation,
    frozen_manifest,
    unfrozen_manifest,
    nonpositive_scale,
    missing_discrepancy,
    missing_threshold,
    empty_family,
    zero_or_negative_measurement,
    mixed_agent_records,
    empty_input,
    nonpositive_speedup,
    unknown_policy,
    level_violation,
    dangling_dependency,
    unknown_task,
    reference_failure,
    composition_failure,
    rank_spawn_failure,
    channel_timeout,
    k_exceeds_experts,
    expert_count_mismatch,
    parse_error,
    io_error,
    unknown_builtin,
    usage_error,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }

  private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
    if (!ok) fail(code, what);
}

}  // namespace fk
