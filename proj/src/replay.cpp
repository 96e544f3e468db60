#include "pvsim/replay.hpp"

#include <fstream>
#include <set>

#include "pvsim/errors.hpp"
#include "pvsim/gates.hpp"
#include "pvsim/hash.hpp"

namespace pvsim {

namespace {

uint64_t event_digest(const std::vector<event_record>& log) {
    fnv1a h;
    for (const auto& e : log)
        h.add_byte(uint8_t(e.kind)).add_i64(e.thread).add_i64(e.vcpu).add_i64(e.arg)
            .add_u64(e.ctx_tag);
    return h.value();
}

// Drives one machine (and its gate machinery) through a trace. Threads and
// vcpus have no creation ops; a thread springs into existence on first
// reference, pinned round-robin by id.
struct replay_driver {
    machine& m;
    gate_machine& gm;
    bool use_gates;
    int cpus;
    std::vector<elasticity_sample>& samples;
    std::set<int> known_threads;

    void ensure_thread(int t) {
        if (known_threads.insert(t).second) gm.add_thread(t, t % cpus);
    }

    void operator()(const touch_op& op) {
        m.touch(op.space, gva_t(op.gva), op.write, op.tag);
    }
    void operator()(const mmap_op& op) { m.do_mmap(op.space, op.start, op.len); }
    void operator()(const munmap_op& op) { m.do_munmap(op.space, op.start, op.len); }
    void operator()(const fork_op& op) { m.fork_clone(op.space); }
    void operator()(const syscall_op& op) {
        if (use_gates) {
            ensure_thread(op.thread);
            gm.syscall_round_trip(op.thread, op.nr);
        } else {
            // Hardware-virtualized / bare designs: entry costs live entirely
            // in the per-syscall base price.
            m.tally().syscalls += 1;
        }
    }
    void operator()(const alloc_burst_op& op) { m.alloc_burst(op.pages); }
    void operator()(const free_burst_op& op) { m.free_burst(op.pages); }
    void operator()(const inject_virq_op& op) { gm.inject_virq(op.vcpu, op.vector); }
    void operator()(const migrate_thread_op& op) {
        ensure_thread(op.thread);
        gm.migrate_thread(op.thread, op.vcpu);
    }
    void operator()(const sample_point_op& op) {
        samples.push_back({op.t, m.guest_in_use(), m.host_allocated()});
    }
};

void reference_apply(flat_reference& ref, const trace_op& op) {
    if (const auto* t = std::get_if<touch_op>(&op))
        ref.touch(t->space, t->gva, t->write, t->tag);
    else if (const auto* mm = std::get_if<mmap_op>(&op))
        ref.do_mmap(mm->space, mm->start, mm->len);
    else if (const auto* um = std::get_if<munmap_op>(&op))
        ref.do_munmap(um->space, um->start, um->len);
    else if (const auto* f = std::get_if<fork_op>(&op))
        ref.fork_clone(f->space);
}

}  // namespace

report replay(const trace& t, const replay_options& opt) {
    std::unique_ptr<machine> m = make_machine(opt.backend, opt.machine);
    bool use_gates =
        opt.profile.syscall_gate_switches > 0 || opt.profile.syscall_pt_switches > 0;
    switch_profile sw = opt.profile.syscall_pt_switches > 0 ? switch_profile::table_swap
                                                            : switch_profile::key_gates;
    gate_machine gm(sw, m->tally(), opt.machine.cpus, 0);

    report r;
    r.backend = std::string(backend_kind_name(opt.backend.kind));
    r.profile = opt.profile.name;
    r.seed = opt.seed;
    r.opts = opt;

    replay_driver drv{*m, gm, use_gates, opt.machine.cpus, r.samples, {}};
    for (size_t i = 0; i < t.ops.size(); i++) {
        try {
            std::visit(drv, t.ops[i]);
        } catch (const sim_error& e) {
            throw trace_error(i, e.code(), e.what());
        }
    }

    r.ops_replayed = t.ops.size();
    r.totals = m->tally();
    r.latency_ns = path_latency(opt.profile, r.totals);
    r.final_state_hash = m->final_state_hash();
    r.event_log_digest = event_digest(gm.log());
    return r;
}

uint64_t reference_final_hash(const trace& t) {
    flat_reference ref;
    for (size_t i = 0; i < t.ops.size(); i++) {
        try {
            reference_apply(ref, t.ops[i]);
        } catch (const sim_error& e) {
            throw trace_error(i, e.code(), e.what());
        }
    }
    return ref.final_state_hash();
}

nlohmann::json report_to_json(const report& r) {
    nlohmann::json counts = nlohmann::json::object();
    counters::visit(r.totals, [&](const char* name, uint64_t v) { counts[name] = v; });

    nlohmann::json cfg{
        {"backend", r.backend},
        {"guest_pages", r.opts.machine.guest_pages},
        {"host_pages", r.opts.machine.host_pages},
        {"cpus", r.opts.machine.cpus},
        {"pcp_capacity", r.opts.machine.pcp_capacity},
        {"pcp_batch", r.opts.machine.pcp_batch},
        {"pcp_bound_fraction", r.opts.machine.pcp_bound_fraction},
        {"test_mode", r.opts.machine.test_mode},
        {"huge_backing", r.opts.backend.huge_backing},
        {"pt_write_emulation", r.opts.backend.pt_write_emulation},
        {"ad_sync_faults", r.opts.backend.ad_sync_faults},
        {"dual_table", r.opts.backend.dual_table},
        {"nested", r.opts.profile.nested},
        {"seed", r.seed},
    };

    nlohmann::json j{
        {"schema", report_schema},
        {"tool_version", tool_version},
        {"backend", r.backend},
        {"profile", r.profile},
        {"ops_replayed", r.ops_replayed},
        {"counters", counts},
        {"latency_ns", r.latency_ns},
        {"final_state_hash", r.final_state_hash},
        {"event_log_digest", r.event_log_digest},
        {"config", cfg},
    };
    if (r.opts.backend.kind == backend_kind::shadow)
        j["shadow_fault_steps"] = shadow_machine::fault_step_model();

    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : r.samples)
        samples.push_back({{"t", s.t},
                           {"guest_in_use_4k", s.guest_in_use_4k},
                           {"host_allocated", s.host_allocated}});
    j["samples"] = std::move(samples);
    if (!r.samples.empty()) {
        bool usable = false;
        for (const auto& s : r.samples) usable |= s.guest_in_use_4k > 0;
        if (usable) j["overhead"] = summary_to_json(overhead_stats(r.samples));
    }
    return j;
}

void save_report(const report& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(errc::io, "cannot write " + path);
    out << report_to_json(r).dump(2) << '\n';
}

void save_samples_csv(const std::vector<elasticity_sample>& samples, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(errc::io, "cannot write " + path);
    out << samples_to_csv(samples);
}

backend_comparison compare_backends(const trace& t, const std::vector<backend_options>& backends,
                                    const machine_config& cfg, const latency_profile& profile,
                                    uint64_t seed) {
    if (backends.empty()) fail(errc::invalid_params, "no backends to compare");
    backend_comparison cmp;
    cmp.reference_hash = reference_final_hash(t);
    cmp.equivalent = true;
    for (const auto& b : backends) {
        replay_options opt{b, cfg, profile, seed};
        cmp.reports.push_back(replay(t, opt));
        cmp.equivalent &= cmp.reports.back().final_state_hash == cmp.reference_hash;
    }
    return cmp;
}

nlohmann::json comparison_to_json(const backend_comparison& c) {
    nlohmann::json j{
        {"schema", report_schema},
        {"tool_version", tool_version},
        {"reference_final_state_hash", c.reference_hash},
        {"equivalent", c.equivalent},
    };
    nlohmann::json reports = nlohmann::json::array();
    for (const auto& r : c.reports) reports.push_back(report_to_json(r));
    j["reports"] = std::move(reports);
    return j;
}

}  // namespace pvsim
