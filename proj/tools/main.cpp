// Command-line front end: generate traces, replay them on one or more
// backends, or run the side-by-side comparison. Exit codes: 0 ok, 2 config
// problem, 3 trace/invariant failure (stderr carries the failing op index).

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pvsim/backends.hpp"
#include "pvsim/cost_model.hpp"
#include "pvsim/errors.hpp"
#include "pvsim/generators.hpp"
#include "pvsim/replay.hpp"
#include "pvsim/trace.hpp"

namespace {

using namespace pvsim;

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_trace = 3;

struct scenario_flags {
    std::string trace_path;
    std::string gen_text;
    uint64_t seed = 0;
    std::vector<std::string> backends{"pager"};
    std::string profile = "paracell";
    std::string calibration;
    bool nested = false;
    std::string granularity = "4k";
    bool single_table = false;
    bool ad_sync_faults = false;
    bool no_pt_write_emulation = false;
    uint64_t guest_pages = 1 << 16;
    uint64_t host_pages = 1 << 17;
    int cpus = 1;
    uint64_t pcp_capacity = 128;
    uint64_t pcp_batch = 32;
    double pcp_bound = 0.01;
    bool no_pcp_bound = false;
    bool test_mode = false;
    std::string report_path;
    std::string csv_path;
    std::string config_path;
};

void add_scenario_flags(CLI::App* cmd, scenario_flags& f) {
    cmd->add_option("--trace", f.trace_path, "replay this trace file (JSONL)");
    cmd->add_option("--gen", f.gen_text,
                    "generate the workload instead: kind:key=val,... "
                    "(bursty | fault-intensive | syscall-intensive | unmap-heavy | mixed)");
    cmd->add_option("--seed", f.seed, "generator seed, echoed into the report");
    cmd->add_option("--backend", f.backends, "backends to run: pager, shadow, ept")
        ->delimiter(',');
    cmd->add_option("--profile", f.profile,
                    "cost profile: paracell, paracell_no_depriv, pvm, runv, runc");
    cmd->add_option("--calibration", f.calibration, "JSON calibration file (overrides --profile)");
    cmd->add_flag("--nested", f.nested, "price world switches at nested-virtualization rates");
    cmd->add_option("--granularity", f.granularity, "ept backing granularity: 4k or 2m")
        ->check(CLI::IsMember({"4k", "2m"}));
    cmd->add_flag("--single-table", f.single_table,
                  "pager: one walked table instead of guest+shadow pair");
    cmd->add_flag("--ad-sync-faults", f.ad_sync_faults,
                  "shadow: extra fault on first write for dirty tracking");
    cmd->add_flag("--no-pt-write-emulation", f.no_pt_write_emulation,
                  "shadow: skip trap-and-emulate charges for guest table writes");
    cmd->add_option("--guest-pages", f.guest_pages, "guest physical memory, 4KB pages");
    cmd->add_option("--host-pages", f.host_pages, "host physical memory, 4KB pages");
    cmd->add_option("--cpus", f.cpus, "vcpus / per-cpu cache count");
    cmd->add_option("--pcp-capacity", f.pcp_capacity, "per-cpu page cache capacity");
    cmd->add_option("--pcp-batch", f.pcp_batch, "per-cpu cache refill/drain batch");
    cmd->add_option("--pcp-bound", f.pcp_bound, "max Σ cache capacity as fraction of guest RAM");
    cmd->add_flag("--no-pcp-bound", f.no_pcp_bound, "drop the cache-capacity bound check");
    cmd->add_flag("--test-mode", f.test_mode, "sweep every invariant after every op (slow)");
    cmd->add_option("--report", f.report_path, "write the JSON report here");
    cmd->add_option("--csv", f.csv_path, "write the elasticity sample series here (CSV)");
    cmd->add_option("--config", f.config_path,
                    "JSON config file; explicit flags win over file values");
}

// Fill in config-file values for everything the command line left untouched.
void apply_config_file(CLI::App* cmd, scenario_flags& f) {
    if (f.config_path.empty()) return;
    std::ifstream in(f.config_path);
    if (!in) fail(errc::io, "cannot read config file " + f.config_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(errc::io, "config file " + f.config_path + ": " + e.what());
    }
    if (!j.is_object()) fail(errc::io, "config file root must be an object");

    auto untouched = [&](const char* flag) { return cmd->get_option(flag)->count() == 0; };
    auto take = [&](const char* key, const char* flag, auto& dst) {
        if (j.contains(key) && untouched(flag)) {
            try {
                dst = j.at(key).get<std::decay_t<decltype(dst)>>();
            } catch (const nlohmann::json::exception&) {
                fail(errc::io, std::string("config key '") + key + "' has the wrong type");
            }
        }
    };

    take("trace", "--trace", f.trace_path);
    take("gen", "--gen", f.gen_text);
    take("seed", "--seed", f.seed);
    take("backend", "--backend", f.backends);
    take("profile", "--profile", f.profile);
    take("calibration", "--calibration", f.calibration);
    take("nested", "--nested", f.nested);
    take("granularity", "--granularity", f.granularity);
    take("single_table", "--single-table", f.single_table);
    take("ad_sync_faults", "--ad-sync-faults", f.ad_sync_faults);
    take("no_pt_write_emulation", "--no-pt-write-emulation", f.no_pt_write_emulation);
    take("guest_pages", "--guest-pages", f.guest_pages);
    take("host_pages", "--host-pages", f.host_pages);
    take("cpus", "--cpus", f.cpus);
    take("pcp_capacity", "--pcp-capacity", f.pcp_capacity);
    take("pcp_batch", "--pcp-batch", f.pcp_batch);
    take("pcp_bound", "--pcp-bound", f.pcp_bound);
    take("no_pcp_bound", "--no-pcp-bound", f.no_pcp_bound);
    take("test_mode", "--test-mode", f.test_mode);
    take("report", "--report", f.report_path);
    take("csv", "--csv", f.csv_path);
    if (f.granularity != "4k" && f.granularity != "2m")
        fail(errc::invalid_params, "granularity must be 4k or 2m");
}

trace acquire_trace(const scenario_flags& f) {
    if (!f.trace_path.empty() && !f.gen_text.empty())
        fail(errc::invalid_params, "--trace and --gen are mutually exclusive");
    if (!f.trace_path.empty()) return load_trace(f.trace_path);
    if (!f.gen_text.empty()) return generate(parse_gen_spec(f.gen_text), f.seed);
    fail(errc::invalid_params, "need a workload: pass --trace FILE or --gen SPEC");
}

replay_options build_options(const scenario_flags& f, backend_kind kind) {
    backend_options b;
    b.kind = kind;
    b.huge_backing = f.granularity == "2m";
    b.pt_write_emulation = !f.no_pt_write_emulation;
    b.ad_sync_faults = f.ad_sync_faults;
    b.dual_table = !f.single_table;

    machine_config m;
    m.guest_pages = f.guest_pages;
    m.host_pages = f.host_pages;
    m.cpus = f.cpus;
    m.pcp_capacity = f.pcp_capacity;
    m.pcp_batch = f.pcp_batch;
    m.pcp_bound_fraction = f.pcp_bound;
    m.enforce_pcp_bound = !f.no_pcp_bound;
    m.test_mode = f.test_mode;

    latency_profile p =
        f.calibration.empty() ? builtin_profile(f.profile) : load_calibration(f.calibration);
    if (f.nested) p.nested = true;
    return {b, m, p, f.seed};
}

std::vector<backend_kind> parse_backends(const std::vector<std::string>& names) {
    std::vector<backend_kind> out;
    for (const auto& n : names) {
        backend_kind k = backend_kind_from_name(n);
        if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    }
    return out;
}

std::string csv_path_for(const std::string& base, const std::string& backend, bool multi) {
    if (!multi) return base;
    auto dot = base.rfind('.');
    if (dot == std::string::npos) return base + "." + backend;
    return base.substr(0, dot) + "." + backend + base.substr(dot);
}

void print_report_line(const report& r) {
    std::cout << "backend=" << r.backend << " profile=" << r.profile << " ops=" << r.ops_replayed
              << " latency_ns=" << r.latency_ns << "\n  ";
    bool first = true;
    counters::visit(r.totals, [&](const char* name, uint64_t v) {
        if (!v) return;
        if (!first) std::cout << ' ';
        std::cout << name << '=' << v;
        first = false;
    });
    if (first) std::cout << "(all counters zero)";
    std::cout << "\n  samples=" << r.samples.size() << std::hex << " final_state=0x"
              << r.final_state_hash << " events=0x" << r.event_log_digest << std::dec << '\n';
}

int cmd_gen(const std::string& spec_text, uint64_t seed, const std::string& out_path) {
    trace t = generate(parse_gen_spec(spec_text), seed);
    if (out_path.empty() || out_path == "-") {
        std::cout << trace_to_string(t);
    } else {
        save_trace(t, out_path);
        std::cout << "wrote " << t.ops.size() << " ops to " << out_path << '\n';
    }
    return exit_ok;
}

int cmd_run(const scenario_flags& f) {
    std::vector<backend_kind> kinds = parse_backends(f.backends);
    trace t = acquire_trace(f);

    std::vector<report> reports;
    for (backend_kind k : kinds) reports.push_back(replay(t, build_options(f, k)));

    for (const auto& r : reports) print_report_line(r);

    if (!f.report_path.empty()) {
        if (reports.size() == 1) {
            save_report(reports[0], f.report_path);
        } else {
            nlohmann::json j{{"schema", report_schema}, {"tool_version", tool_version}};
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& r : reports) arr.push_back(report_to_json(r));
            j["reports"] = std::move(arr);
            std::ofstream out(f.report_path);
            if (!out) fail(errc::io, "cannot write " + f.report_path);
            out << j.dump(2) << '\n';
        }
    }
    if (!f.csv_path.empty())
        for (const auto& r : reports)
            save_samples_csv(r.samples, csv_path_for(f.csv_path, r.backend, reports.size() > 1));
    return exit_ok;
}

int cmd_compare(const scenario_flags& f) {
    std::vector<backend_kind> kinds = parse_backends(f.backends);
    if (kinds.size() < 2)
        fail(errc::invalid_params, "compare needs at least two distinct backends");
    trace t = acquire_trace(f);

    replay_options base = build_options(f, kinds[0]);
    std::vector<backend_options> bks;
    for (backend_kind k : kinds) {
        backend_options b = base.backend;
        b.kind = k;
        bks.push_back(b);
    }
    backend_comparison cmp =
        compare_backends(t, bks, base.machine, base.profile, f.seed);

    for (const auto& r : cmp.reports) print_report_line(r);
    std::cout << std::hex << "reference final_state=0x" << cmp.reference_hash << std::dec
              << "\nequivalence: " << (cmp.equivalent ? "ok" : "MISMATCH") << '\n';

    // Cheapest cross-check of the calibrated tables: one no-op syscall per
    // built-in design must keep its published order.
    auto tbl = syscall_latency_table();
    bool ordered = tbl.at("runv") < tbl.at("paracell") &&
                   tbl.at("paracell") < tbl.at("paracell_no_depriv") &&
                   tbl.at("paracell_no_depriv") < tbl.at("pvm") && tbl.at("pvm") < tbl.at("runc");
    std::cout << "syscall ordering runv < paracell < no_depriv < pvm < runc: "
              << (ordered ? "ok" : "violated") << '\n';

    // Nested amplification must be exactly linear in (exits, nested faults).
    bool nested_ok = true;
    for (const auto& r : cmp.reports) {
        latency_profile bare = base.profile;
        bare.nested = false;
        latency_profile nested = bare;
        nested.nested = true;
        uint64_t lo = path_latency(bare, r.totals);
        uint64_t hi = path_latency(nested, r.totals);
        uint64_t want = (bare.nested_exit_extra * r.totals.world_switches +
                         bare.nested_second_stage_extra * r.totals.second_stage_faults) *
                        bare.world_switch;
        nested_ok &= hi - lo == want;
        std::cout << "nested delta [" << r.backend << "]: " << hi - lo << " ns (expected " << want
                  << ")\n";
    }

    if (!f.report_path.empty()) {
        nlohmann::json j = comparison_to_json(cmp);
        j["syscall_latency_ns"] = tbl;
        j["syscall_ordering_ok"] = ordered;
        std::ofstream out(f.report_path);
        if (!out) fail(errc::io, "cannot write " + f.report_path);
        out << j.dump(2) << '\n';
    }
    return cmp.equivalent && nested_ok ? exit_ok : exit_trace;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trace-driven simulator of secure-container memory backends and domain gates"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "generate a workload trace");
    std::string gen_spec_text, gen_out;
    uint64_t gen_seed = 0;
    gen->add_option("--spec", gen_spec_text, "kind:key=val,... (see run --help for kinds)")
        ->required();
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output path ('-' or empty = stdout)");

    scenario_flags run_flags;
    auto* run = app.add_subcommand("run", "replay a trace on one or more backends");
    add_scenario_flags(run, run_flags);

    scenario_flags cmp_flags;
    auto* cmp = app.add_subcommand("compare",
                                   "replay on several backends and check state equivalence");
    add_scenario_flags(cmp, cmp_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    try {
        if (*gen) return cmd_gen(gen_spec_text, gen_seed, gen_out);
        if (*run) {
            apply_config_file(run, run_flags);
            return cmd_run(run_flags);
        }
        apply_config_file(cmp, cmp_flags);
        return cmd_compare(cmp_flags);
    } catch (const trace_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_trace;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    }
}
