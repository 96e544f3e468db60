#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pvsim/backends.hpp"
#include "pvsim/cost_model.hpp"
#include "pvsim/counters.hpp"
#include "pvsim/elasticity.hpp"
#include "pvsim/trace.hpp"

namespace pvsim {

inline constexpr const char* report_schema = "pvsim-report/1";
inline constexpr const char* tool_version = "0.1.0";

struct replay_options {
    backend_options backend;
    machine_config machine;
    latency_profile profile;
    uint64_t seed = 0;  // provenance echo; replay itself draws no randomness
};

// Everything one replay produced. Deterministic for fixed (trace, options):
// two runs must agree on every field including the digests.
struct report {
    std::string backend;
    std::string profile;
    uint64_t seed = 0;
    uint64_t ops_replayed = 0;
    counters totals;
    uint64_t latency_ns = 0;
    std::vector<elasticity_sample> samples;
    uint64_t final_state_hash = 0;
    uint64_t event_log_digest = 0;
    replay_options opts;  // full config echo
};

report replay(const trace& t, const replay_options& opt);

nlohmann::json report_to_json(const report& r);
void save_report(const report& r, const std::string& path);
void save_samples_csv(const std::vector<elasticity_sample>& samples, const std::string& path);

// The same trace through several backends plus the table-free reference
// model; `equivalent` holds iff every backend's final guest-visible state
// hashes identically to the reference's.
struct backend_comparison {
    std::vector<report> reports;
    uint64_t reference_hash = 0;
    bool equivalent = false;
};

backend_comparison compare_backends(const trace& t, const std::vector<backend_options>& backends,
                                    const machine_config& cfg, const latency_profile& profile,
                                    uint64_t seed = 0);

nlohmann::json comparison_to_json(const backend_comparison& c);

// The reference model only understands the memory ops; everything else is
// inert for it. Exposed so tests can drive it against hand-built traces.
uint64_t reference_final_hash(const trace& t);

}  // namespace pvsim
