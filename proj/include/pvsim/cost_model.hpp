#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pvsim/counters.hpp"

#include "json.hpp"

namespace pvsim {

// Per-primitive unit costs in integer nanoseconds. A replay produces counters;
// latency is the inner product of counters and one of these tables, so two
// runs differ in cost only through their event counts. Profiles model the
// runtimes compared throughout: the key-gate design with and without user
// deprivileging, the shadow-paging PV design, a hardware-virtualized runtime,
// and a plain host-kernel container baseline.
struct latency_profile {
    std::string name;

    // syscall pricing
    uint64_t syscall_base = 0;         // bare entry/exit + dispatch work
    uint64_t mitigation_overhead = 0;  // per-syscall hardening tax (host-kernel baseline)
    uint64_t gate_switch = 0;          // one key-write gate crossing
    uint64_t pt_switch = 0;            // one page-table swap

    // memory-path pricing
    uint64_t world_switch = 0;
    uint64_t shadow_fault = 0;
    uint64_t second_stage_fault = 0;
    uint64_t set_pte = 0;              // one mediated pte install (pager call)
    uint64_t hypercall = 0;
    uint64_t pt_write_emulation = 0;
    uint64_t tlb_flush = 0;
    uint64_t virq_delivery = 0;

    // anonymous-fault breakdown components (reporting; see fault_breakdown)
    uint64_t metadata_user_pte = 0;
    uint64_t metadata_dm_pte = 0;
    uint64_t amortized_bind = 0;
    uint64_t gk_gu_switch = 0;
    uint64_t fault_total = 0;

    // nested virtualization amplification
    bool nested = false;
    uint64_t nested_exit_extra = 2;          // extra world switches per exit
    uint64_t nested_second_stage_extra = 4;  // extra world switches per nested fault

    // dual (guest+shadow) vs single walked table: drops the metadata
    // components from the fault breakdown
    bool dual_table = true;

    // canonical counter shape of one no-op syscall under this design
    uint64_t syscall_gate_switches = 0;
    uint64_t syscall_pt_switches = 0;
};

// ns for a whole replay: strictly linear in the counters.
uint64_t path_latency(const latency_profile& p, const counters& c);

// Counters of a single no-op syscall round trip under a profile.
counters canonical_syscall_counters(const latency_profile& p);

// One-syscall latency for every built-in profile, cheapest machinery check.
std::map<std::string, uint64_t> syscall_latency_table();

struct breakdown_part {
    std::string name;
    uint64_t ns = 0;
    int share_pct = 0;  // rounded share of the total
};

struct fault_cost_breakdown {
    std::vector<breakdown_part> parts;
    uint64_t other_ns = 0;  // total minus the named parts
    uint64_t total_ns = 0;
};

// Cost structure of one fresh anonymous user fault under a profile.
fault_cost_breakdown fault_breakdown(const latency_profile& p);

const latency_profile& builtin_profile(const std::string& name);  // unknown_profile on miss
std::vector<std::string> builtin_profile_names();

// Calibration files: one profile per file, integer ns values, versioned.
latency_profile profile_from_json(const nlohmann::json& j);
nlohmann::json profile_to_json(const latency_profile& p);
latency_profile load_calibration(const std::string& path);

inline constexpr int calibration_schema_version = 1;

}  // namespace pvsim
