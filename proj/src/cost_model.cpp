#include "pvsim/cost_model.hpp"

#include <cmath>
#include <fstream>

#include "pvsim/errors.hpp"

namespace pvsim {

uint64_t path_latency(const latency_profile& p, const counters& c) {
    uint64_t ns = 0;
    ns += c.syscalls * (p.syscall_base + p.mitigation_overhead);
    ns += c.gate_switches * p.gate_switch;
    ns += c.pt_switches * p.pt_switch;
    // Under nesting every exit bounces through one more hypervisor level.
    uint64_t world = p.world_switch * (p.nested ? 1 + p.nested_exit_extra : 1);
    ns += c.world_switches * world;
    ns += c.shadow_faults * p.shadow_fault;
    ns += c.second_stage_faults *
          (p.second_stage_fault +
           (p.nested ? p.nested_second_stage_extra * p.world_switch : 0));
    ns += c.pager_calls * p.set_pte;
    ns += c.hypercalls * p.hypercall;
    ns += c.pt_write_emulations * p.pt_write_emulation;
    ns += c.tlb_flushes * p.tlb_flush;
    ns += c.virq_delivered * p.virq_delivery;
    // deferred virqs and policy violations are bookkeeping, not time
    return ns;
}

counters canonical_syscall_counters(const latency_profile& p) {
    counters c;
    c.syscalls = 1;
    c.gate_switches = p.syscall_gate_switches;
    c.pt_switches = p.syscall_pt_switches;
    return c;
}

fault_cost_breakdown fault_breakdown(const latency_profile& p) {
    fault_cost_breakdown b;
    uint64_t named = 0;
    auto add = [&](const char* name, uint64_t ns) {
        if (ns == 0) return;
        b.parts.push_back({name, ns, 0});
        named += ns;
    };
    // In single-table mode the walked table is the only table, so there is no
    // mirrored metadata to maintain on either the user or direct-map side.
    if (p.dual_table) {
        add("metadata_user_pte", p.metadata_user_pte);
        add("metadata_dm_pte", p.metadata_dm_pte);
    }
    add("set_pte", p.set_pte);
    add("amortized_bind", p.amortized_bind);
    add("gk_gu_switch", p.gk_gu_switch);
    uint64_t total = p.fault_total;
    if (total != 0 && !p.dual_table)
        total -= p.metadata_user_pte + p.metadata_dm_pte;
    if (total == 0) total = named;
    if (total < named)
        fail(errc::invalid_params, "fault components exceed the configured total");
    b.total_ns = total;
    b.other_ns = total - named;
    for (auto& part : b.parts)
        part.share_pct = int(std::lround(100.0 * double(part.ns) / double(total)));
    return b;
}

namespace {

// Built-in calibration. Syscall figures decompose published round-trip
// latencies; memory-path unit costs are order-of-magnitude placeholders that
// only the relative comparisons rely on, every one overridable from a
// calibration file.
std::vector<latency_profile> make_builtin_profiles() {
    std::vector<latency_profile> v;

    latency_profile pc;
    pc.name = "paracell";
    pc.syscall_base = 97;
    pc.gate_switch = 5;  // wrpkru-based crossing
    pc.syscall_gate_switches = 2;
    pc.pt_switch = 112;
    pc.world_switch = 1500;
    pc.shadow_fault = 2000;
    pc.second_stage_fault = 2500;
    pc.set_pte = 275;
    pc.hypercall = 1000;
    pc.pt_write_emulation = 800;
    pc.tlb_flush = 100;
    pc.virq_delivery = 0;
    pc.metadata_user_pte = 771;
    pc.metadata_dm_pte = 466;
    pc.amortized_bind = 175;
    pc.gk_gu_switch = 1622;
    pc.fault_total = 3991;
    v.push_back(pc);

    latency_profile nd = pc;
    nd.name = "paracell_no_depriv";
    nd.syscall_base = 96;
    nd.gate_switch = 80;  // without user deprivileging the crossing pays a
                          // privilege-level switch pair instead of a key write
    v.push_back(nd);

    latency_profile pvm = pc;
    pvm.name = "pvm";
    pvm.syscall_base = 96;
    pvm.gate_switch = 0;
    pvm.syscall_gate_switches = 0;
    pvm.syscall_pt_switches = 2;  // kernel behind its own table: swap in, swap out
    pvm.set_pte = 0;
    pvm.metadata_user_pte = 0;
    pvm.metadata_dm_pte = 0;
    pvm.amortized_bind = 0;
    pvm.gk_gu_switch = 0;
    pvm.fault_total = 0;
    v.push_back(pvm);

    latency_profile runv;
    runv.name = "runv";
    runv.syscall_base = 96;  // in-guest syscall, no transition machinery
    runv.world_switch = 1500;
    runv.shadow_fault = 2000;
    runv.second_stage_fault = 2500;
    runv.hypercall = 1000;
    runv.tlb_flush = 100;
    runv.gk_gu_switch = 1028;  // guest kernel entry/exit around its own fault path
    v.push_back(runv);

    latency_profile runc;
    runc.name = "runc";
    runc.syscall_base = 96;
    runc.mitigation_overhead = 308;  // host-kernel hardening on every syscall
    v.push_back(runc);

    return v;
}

const std::vector<latency_profile>& builtin_profiles() {
    static const std::vector<latency_profile> v = make_builtin_profiles();
    return v;
}

}  // namespace

const latency_profile& builtin_profile(const std::string& name) {
    for (const auto& p : builtin_profiles())
        if (p.name == name) return p;
    fail(errc::unknown_profile, "no profile named '" + name + "'");
}

std::vector<std::string> builtin_profile_names() {
    std::vector<std::string> names;
    for (const auto& p : builtin_profiles()) names.push_back(p.name);
    return names;
}

std::map<std::string, uint64_t> syscall_latency_table() {
    std::map<std::string, uint64_t> t;
    for (const auto& p : builtin_profiles())
        t[p.name] = path_latency(p, canonical_syscall_counters(p));
    return t;
}

namespace {

struct field {
    const char* key;
    uint64_t latency_profile::* member;
};

constexpr field u64_fields[] = {
    {"syscall_base", &latency_profile::syscall_base},
    {"mitigation_overhead", &latency_profile::mitigation_overhead},
    {"gate_switch", &latency_profile::gate_switch},
    {"pt_switch", &latency_profile::pt_switch},
    {"world_switch", &latency_profile::world_switch},
    {"shadow_fault", &latency_profile::shadow_fault},
    {"second_stage_fault", &latency_profile::second_stage_fault},
    {"set_pte", &latency_profile::set_pte},
    {"hypercall", &latency_profile::hypercall},
    {"pt_write_emulation", &latency_profile::pt_write_emulation},
    {"tlb_flush", &latency_profile::tlb_flush},
    {"virq_delivery", &latency_profile::virq_delivery},
    {"metadata_user_pte", &latency_profile::metadata_user_pte},
    {"metadata_dm_pte", &latency_profile::metadata_dm_pte},
    {"amortized_bind", &latency_profile::amortized_bind},
    {"gk_gu_switch", &latency_profile::gk_gu_switch},
    {"fault_total", &latency_profile::fault_total},
    {"nested_exit_extra", &latency_profile::nested_exit_extra},
    {"nested_second_stage_extra", &latency_profile::nested_second_stage_extra},
    {"syscall_gate_switches", &latency_profile::syscall_gate_switches},
    {"syscall_pt_switches", &latency_profile::syscall_pt_switches},
};

}  // namespace

latency_profile profile_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(errc::invalid_params, "calibration must be a JSON object");
    int version = j.value("schema_version", 0);
    if (version != calibration_schema_version)
        fail(errc::invalid_params,
             "calibration schema_version " + std::to_string(version) + " unsupported");
    latency_profile p;
    // Start from a named base profile when given, so files can override a
    // handful of constants instead of restating all of them.
    if (j.contains("base")) p = builtin_profile(j.at("base").get<std::string>());
    p.name = j.value("name", p.name.empty() ? std::string("custom") : p.name);
    for (const auto& f : u64_fields) {
        if (!j.contains(f.key)) continue;
        const auto& val = j.at(f.key);
        if (!val.is_number_unsigned())
            fail(errc::invalid_params,
                 std::string("calibration value '") + f.key + "' must be a non-negative integer");
        p.*(f.member) = val.get<uint64_t>();
    }
    if (j.contains("dual_table")) p.dual_table = j.at("dual_table").get<bool>();
    if (j.contains("nested")) p.nested = j.at("nested").get<bool>();
    return p;
}

nlohmann::json profile_to_json(const latency_profile& p) {
    nlohmann::json j;
    j["schema_version"] = calibration_schema_version;
    j["name"] = p.name;
    for (const auto& f : u64_fields) j[f.key] = p.*(f.member);
    j["dual_table"] = p.dual_table;
    j["nested"] = p.nested;
    return j;
}

latency_profile load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io, "cannot open calibration file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(errc::io, "calibration parse error in " + path + ": " + e.what());
    }
    return profile_from_json(j);
}

}  // namespace pvsim
