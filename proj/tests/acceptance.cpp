// Acceptance gate: one line per criterion, nonzero exit if any fails.
// Everything here goes through the public library surface only.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pvsim/cost_model.hpp"
#include "pvsim/elasticity.hpp"
#include "pvsim/errors.hpp"
#include "pvsim/gates.hpp"
#include "pvsim/generators.hpp"
#include "pvsim/guest_alloc.hpp"
#include "pvsim/replay.hpp"

using namespace pvsim;

namespace {

int failures = 0;

void report_line(int n, const std::string& name, bool ok, const std::string& detail) {
    std::printf("criterion %d %-28s %s%s%s\n", n, name.c_str(), ok ? "PASS" : "FAIL",
                detail.empty() ? "" : " — ", detail.c_str());
    if (!ok) failures++;
}

template <typename F>
void run(int n, const std::string& name, F&& body) {
    try {
        auto [ok, detail] = body();
        report_line(n, name, ok, detail);
    } catch (const std::exception& e) {
        report_line(n, name, false, std::string("exception: ") + e.what());
    }
}

machine_config small_cfg() {
    machine_config cfg;
    cfg.guest_pages = 4096;
    cfg.host_pages = 16384;
    cfg.pcp_bound_fraction = 0.25;
    return cfg;
}

machine_config default_cfg(int cpus = 1) {
    machine_config cfg;
    cfg.guest_pages = uint64_t(1) << 16;
    cfg.host_pages = uint64_t(1) << 17;
    cfg.cpus = cpus;
    return cfg;
}

replay_options mk_opts(backend_kind k, const machine_config& cfg,
                       const std::string& profile = "paracell") {
    replay_options o;
    o.backend.kind = k;
    o.machine = cfg;
    o.profile = builtin_profile(profile);
    return o;
}

// ---- 1. secondary-fault counts per backend --------------------------------

std::pair<bool, std::string> c1() {
    for (uint64_t f : {uint64_t(1), uint64_t(100), uint64_t(10000)}) {
        trace t = generate(parse_gen_spec("fault-intensive:n=" + std::to_string(f) +
                                          ",aliases=1"),
                           f);
        counters sh = replay(t, mk_opts(backend_kind::shadow, default_cfg())).totals;
        if (sh.shadow_faults != 2 * f || sh.second_stage_faults != 0)
            return {false, "shadow got " + std::to_string(sh.shadow_faults) +
                               " shadow faults for F=" + std::to_string(f)};
        counters pg = replay(t, mk_opts(backend_kind::pager, default_cfg())).totals;
        if (pg.shadow_faults + pg.second_stage_faults != 0)
            return {false, "pager took reactive faults for F=" + std::to_string(f)};
        counters ss = replay(t, mk_opts(backend_kind::second_stage, default_cfg())).totals;
        if (ss.second_stage_faults != f || ss.shadow_faults != 0)
            return {false, "second-stage got " + std::to_string(ss.second_stage_faults) +
                               " faults for F=" + std::to_string(f)};
    }
    return {true, "2F / 0 / F exact for F in {1, 100, 10000}"};
}

// ---- 2. calibrated syscall table -------------------------------------------

std::pair<bool, std::string> c2() {
    std::map<std::string, uint64_t> want = {{"paracell", 107},
                                            {"paracell_no_depriv", 256},
                                            {"pvm", 320},
                                            {"runv", 96},
                                            {"runc", 404}};
    auto got = syscall_latency_table();
    if (got != want) {
        std::string d = "got";
        for (const auto& [k, v] : got) d += " " + k + "=" + std::to_string(v);
        return {false, d};
    }
    bool ordered = got["runv"] < got["paracell"] &&
                   got["paracell"] < got["paracell_no_depriv"] &&
                   got["paracell_no_depriv"] < got["pvm"] && got["pvm"] < got["runc"];
    if (!ordered) return {false, "ordering runv < paracell < no_depriv < pvm < runc broken"};
    return {true, "107/256/320/96/404 ns, ordering holds"};
}

// ---- 3. fault breakdown ----------------------------------------------------

std::pair<bool, std::string> c3() {
    auto bd = fault_breakdown(builtin_profile("paracell"));
    if (bd.total_ns != 3991) return {false, "total " + std::to_string(bd.total_ns)};
    if (bd.other_ns != 682) return {false, "other " + std::to_string(bd.other_ns)};
    std::map<std::string, std::pair<uint64_t, int>> want = {
        {"metadata_user_pte", {771, 19}},
        {"metadata_dm_pte", {466, 12}},
        {"set_pte", {275, 7}},
        {"amortized_bind", {175, 4}},
    };
    for (const auto& [name, v] : want) {
        bool found = false;
        for (const auto& p : bd.parts) {
            if (p.name != name) continue;
            found = true;
            if (p.ns != v.first)
                return {false, name + " ns " + std::to_string(p.ns)};
            if (p.share_pct < v.second - 1 || p.share_pct > v.second + 1)
                return {false, name + " share " + std::to_string(p.share_pct) + "%"};
        }
        if (!found) return {false, "missing part " + name};
    }
    latency_profile standalone = builtin_profile("paracell");
    standalone.dual_table = false;
    auto sbd = fault_breakdown(standalone);
    if (sbd.total_ns != 3991 - 771 - 466)
        return {false, "standalone total " + std::to_string(sbd.total_ns)};
    if (sbd.other_ns != 682)
        return {false, "standalone other " + std::to_string(sbd.other_ns)};
    return {true, "3991 ns, shares 19/12/7/4, other 682; standalone drops 1237"};
}

// ---- 4. nested amplification ------------------------------------------------

std::pair<bool, std::string> c4() {
    latency_profile bare = builtin_profile("paracell");
    latency_profile nested = bare;
    nested.nested = true;

    std::mt19937_64 rng(4);
    std::uniform_int_distribution<uint64_t> v(0, 5000);
    for (int i = 0; i < 500; i++) {
        counters c;
        counters::visit(c, [&](const char*, uint64_t& field) { field = v(rng); });
        uint64_t want = (2 * c.world_switches + 4 * c.second_stage_faults) * bare.world_switch;
        if (path_latency(nested, c) - path_latency(bare, c) != want)
            return {false, "random-counter delta mismatch at round " + std::to_string(i)};
    }

    for (uint64_t seed : {0, 1, 2}) {
        trace t = generate(parse_gen_spec("mixed:ops=400,va_span=96,spaces_max=3"), seed);
        for (auto k : {backend_kind::pager, backend_kind::shadow, backend_kind::second_stage}) {
            auto ob = mk_opts(k, small_cfg());
            auto on = ob;
            on.profile.nested = true;
            report rb = replay(t, ob);
            report rn = replay(t, on);
            uint64_t want = (2 * rb.totals.world_switches + 4 * rb.totals.second_stage_faults) *
                            ob.profile.world_switch;
            if (rn.latency_ns - rb.latency_ns != want)
                return {false, std::string("replay delta mismatch on ") +
                                   std::string(backend_kind_name(k))};
        }
    }
    return {true, "delta = (2W + 4F) x world_switch, exact"};
}

// ---- 5. functional equivalence ----------------------------------------------

std::pair<bool, std::string> c5() {
    std::vector<backend_options> all = {{.kind = backend_kind::pager},
                                        {.kind = backend_kind::shadow},
                                        {.kind = backend_kind::second_stage}};
    for (uint64_t seed = 0; seed < 1000; seed++) {
        std::string spec = "mixed:ops=" + std::to_string(200 + (seed % 9) * 100) +
                           ",va_span=" + std::to_string(64 << (seed % 3)) +
                           ",spaces_max=" + std::to_string(1 + seed % 4);
        trace t = generate(parse_gen_spec(spec), seed);
        auto cmp = compare_backends(t, all, small_cfg(), builtin_profile("paracell"), seed);
        if (!cmp.equivalent) {
            std::string d = "seed " + std::to_string(seed) + ":";
            for (const auto& r : cmp.reports)
                d += " " + r.backend + "=" + std::to_string(r.final_state_hash);
            return {false, d + " vs reference " + std::to_string(cmp.reference_hash)};
        }
    }
    return {true, "1000 seeded traces, 3 backends + reference, identical state"};
}

// ---- 6. per-cpu cache batching ----------------------------------------------

std::pair<bool, std::string> c6() {
    const uint64_t n = 1024, batch = 32;
    trace t;
    for (uint64_t i = 0; i < n; i++) t.ops.push_back(alloc_burst_op{1});
    for (uint64_t i = 0; i < n; i++) t.ops.push_back(free_burst_op{1});
    report r = replay(t, mk_opts(backend_kind::pager, default_cfg()));
    uint64_t bound = 2 * ((n + batch - 1) / batch) + 2;
    if (r.totals.hypercalls > bound)
        return {false, std::to_string(r.totals.hypercalls) + " hypercalls > bound " +
                           std::to_string(bound)};

    // steady state inside the cache: no hypercalls at all
    auto m = make_machine({.kind = backend_kind::pager}, default_cfg());
    m->alloc_burst(1);
    m->free_burst(1);  // cache now warm
    uint64_t before = m->tally().hypercalls;
    for (int i = 0; i < 400; i++) {
        m->alloc_burst(1);
        m->free_burst(1);
    }
    if (m->tally().hypercalls != before)
        return {false, "cache-local alloc/free pairs still issued hypercalls"};

    // bursty replays: pager overhead never exceeds the summed cache capacity
    for (int cpus : {1, 4}) {
        for (uint64_t seed : {1, 2, 3}) {
            trace b = generate(parse_gen_spec("bursty"), seed);
            report rb = replay(b, mk_opts(backend_kind::pager, default_cfg(cpus)));
            if (rb.samples.empty()) return {false, "bursty replay produced no samples"};
            for (const auto& s : rb.samples) {
                if (s.host_allocated < s.guest_in_use_4k)
                    return {false, "host below in-use?"};
                uint64_t over = s.host_allocated - s.guest_in_use_4k;
                if (over > uint64_t(cpus) * 128)
                    return {false, "sample overhead " + std::to_string(over) + " pages > " +
                                       std::to_string(cpus * 128)};
            }
        }
    }
    return {true, "<= 2 ceil(N/B)+2 hypercalls; zero inside cache; overhead <= caches"};
}

// ---- 7. reclamation counts ---------------------------------------------------

struct counting_hooks final : allocator_hooks {
    uint64_t binds = 0, unbinds = 0;
    void bind_batch(std::span<const gpa_t>) override { binds++; }
    void unbind_batch(std::span<const gpa_t>) override { unbinds++; }
    void on_alloc(gpa_t) override {}
};

std::pair<bool, std::string> c7() {
    const uint64_t pages = uint64_t(8) * 1024 * 1024 * 1024 / 4096;  // 8 GiB of 4 KiB pages
    std::vector<uint64_t> freed_all(pages);
    for (uint64_t i = 0; i < pages; i++) freed_all[i] = i;

    auto balloon4k = reclamation_ops({.kind = reclamation_kind::balloon, .block_pages = 1},
                                     freed_all);
    if (balloon4k.ops != 2097152 || balloon4k.host_pages_released != pages)
        return {false, "balloon 4k ops " + std::to_string(balloon4k.ops)};

    std::vector<uint64_t> sparse;  // one page per 2MB chunk stays in use
    sparse.reserve(pages - pages / 512);
    for (uint64_t i = 0; i < pages; i++)
        if (i % 512 != 0) sparse.push_back(i);
    auto balloon2m = reclamation_ops({.kind = reclamation_kind::balloon, .block_pages = 512},
                                     sparse);
    if (balloon2m.host_pages_released != 0)
        return {false, "partially-used chunks released " +
                           std::to_string(balloon2m.host_pages_released) + " pages"};

    auto pager_path = reclamation_ops({.kind = reclamation_kind::pager_free_path}, freed_all);
    if (pager_path.host_pages_released != pages)
        return {false, "pager path released " + std::to_string(pager_path.host_pages_released)};

    // the pager's real free path: drain hypercalls measured on the allocator
    counting_hooks hooks;
    guest_allocator ga(alloc_config{pages, 1, 128, 32, 0.01, true}, &hooks);
    std::vector<gpa_t> held;
    held.reserve(pages);
    for (uint64_t i = 0; i < pages; i++) held.push_back(ga.get_free_pages(0, 0));
    uint64_t unbinds_before = hooks.unbinds;
    for (gpa_t g : held) ga.free_pages(0, g, 0);
    ga.drain_all();
    uint64_t free_path_ops = hooks.unbinds - unbinds_before;
    if (free_path_ops == 0 || balloon4k.ops < 32 * free_path_ops)
        return {false, "free-path op ratio " +
                           std::to_string(double(balloon4k.ops) / double(free_path_ops)) +
                           " below batch factor"};
    return {true, "2097152 balloon ops; stranded chunks release 0; free-path ratio >= 32"};
}

// ---- 8. gate properties -------------------------------------------------------

std::pair<bool, std::string> c8() {
    counters c;
    gate_machine gm(switch_profile::key_gates, c, 2, 3);
    std::mt19937_64 rng(8);
    auto roll = [&](int n) { return int(rng() % uint64_t(n)); };

    uint64_t injected = 0;
    uint64_t probes = 0;
    for (int step = 0; step < 10000; step++) {
        int t = roll(3);
        int what = roll(100);
        if (what < 45) {
            counters d = gm.syscall_round_trip(t, roll(64));
            // plain trip: never a world switch, never a table swap
            if (d.world_switches != 0 || d.pt_switches != 0)
                return {false, "plain key-gate trip switched worlds or tables"};
        } else if (what < 70) {
            // handler-body injections land in the masked window of t's vcpu
            gm.syscall_round_trip(t, roll(64), [&](gate_machine& g) {
                int shots = 1 + roll(3);
                for (int s = 0; s < shots; s++) {
                    g.inject_virq(roll(2), 32 + roll(16));
                    injected++;
                }
                if (roll(2) == 0) {
                    g.set_virtual_if(t, true);  // handler re-enables early: drains
                    g.set_virtual_if(t, false);
                }
            });
        } else if (what < 85) {
            gm.inject_virq(roll(2), 32 + roll(16));
            injected++;
        } else if (what < 92) {
            if (!gm.in_gate(t)) gm.migrate_thread(t, roll(2));
        } else {
            probes++;
            if (gm.in_gate(t)) continue;
            if (gm.active_key(t) != domain_key::gu) return {false, "user thread not GU"};
            if (gm.access_check(t, domain_key::gk, roll(2)) != access_result::protection_fault)
                return {false, "GU reached a GK page"};
            if (gm.access_check(t, domain_key::host, false) != access_result::protection_fault)
                return {false, "guest reached a host page"};
            if (gm.access_check(t, domain_key::gu, true) != access_result::allowed)
                return {false, "GU denied its own pages"};
        }
    }

    // park a few undelivered virqs so the conservation check sees both terms
    gm.vcpu_state_mut(0).virtual_if = false;
    for (int s = 0; s < 5; s++) {
        gm.inject_virq(0, 40 + s);
        injected++;
    }

    // injected = delivered + still pending
    uint64_t pending = gm.vcpu_state(0).pending_virqs.size() +
                       gm.vcpu_state(1).pending_virqs.size();
    if (injected != c.virq_delivered + pending)
        return {false, "injected " + std::to_string(injected) + " != delivered " +
                           std::to_string(c.virq_delivered) + " + pending " +
                           std::to_string(pending)};

    // no delivery inside any cli/sti window, per vcpu
    std::map<int, bool> masked;
    for (const auto& e : gm.log()) {
        if (e.kind == ev::para_cli) masked[e.vcpu] = true;
        if (e.kind == ev::para_sti) masked[e.vcpu] = false;
        if (e.kind == ev::virq_deliver && masked[e.vcpu])
            return {false, "virq delivered inside a masked window"};
    }

    if (c.policy_violations != 0)
        return {false, "benign run logged " + std::to_string(c.policy_violations) +
                           " violations"};
    gm.checked_wrpkru(0, domain_key::gk, 77);  // key write outside any gate site
    if (c.policy_violations < 1) return {false, "rogue key write went unlogged"};
    if (probes == 0) return {false, "no access probes exercised"};

    // canonical trip shape under both switching designs
    counters ck;
    gate_machine kg(switch_profile::key_gates, ck, 1, 1);
    for (int i = 0; i < 1000; i++) {
        counters d = kg.syscall_round_trip(0, i % 64);
        if (d.world_switches != 0 || d.pt_switches != 0 || d.gate_switches != 2)
            return {false, "key-gate trip shape broke at " + std::to_string(i)};
    }
    counters ct;
    gate_machine ts(switch_profile::table_swap, ct, 1, 1);
    for (int i = 0; i < 1000; i++) {
        counters d = ts.syscall_round_trip(0, i % 64);
        if (d.pt_switches != 2 || d.world_switches != 0 || d.gate_switches != 0)
            return {false, "table-swap trip shape broke at " + std::to_string(i)};
    }
    return {true, "10k interleavings: masking, accounting, key policy, trip shapes"};
}

// ---- 9. elasticity oracle -----------------------------------------------------

std::pair<bool, std::string> c9() {
    std::mt19937_64 rng(9);
    for (int round = 0; round < 500; round++) {
        std::vector<uint64_t> touched;
        int n = 1 + int(rng() % 600);
        for (int i = 0; i < n; i++) touched.push_back(rng() % (uint64_t(1) << 14));

        std::map<uint64_t, std::set<uint64_t>> chunks;  // exhaustive cover oracle
        for (uint64_t p : touched) chunks[p / 512].insert(p);
        uint64_t want = 0;
        for (const auto& [chunk, pages] : chunks) want += 512 - pages.size();

        if (waste_at_granularity(touched, chunk_granularity::g2m) != want)
            return {false, "2MB waste mismatch at round " + std::to_string(round)};
        if (waste_at_granularity(touched, chunk_granularity::g4k) != 0)
            return {false, "4KB backing claimed waste"};
    }

    for (uint64_t seed : {3, 4, 5}) {
        trace t = generate(parse_gen_spec("bursty"), seed);  // 15.4x target
        report r = replay(t, mk_opts(backend_kind::pager, default_cfg()));
        uint64_t peak = 0, sum = 0, counted = 0;
        for (const auto& s : r.samples) {
            peak = std::max(peak, s.guest_in_use_4k);
            sum += s.guest_in_use_4k;
            counted++;
        }
        if (counted == 0 || sum == 0) return {false, "bursty replay sampled nothing"};
        double ratio = double(peak) / (double(sum) / double(counted));
        if (ratio < 15.4 * 0.95 || ratio > 15.4 * 1.05)
            return {false, "peak-to-average " + std::to_string(ratio) + " off target"};
    }
    return {true, "500 waste sets exact; 4KB waste 0; burst ratio within 5%"};
}

}  // namespace

int main() {
    run(1, "secondary-fault counts", c1);
    run(2, "syscall latency table", c2);
    run(3, "fault cost breakdown", c3);
    run(4, "nested amplification", c4);
    run(5, "backend equivalence", c5);
    run(6, "cache batching bounds", c6);
    run(7, "reclamation counts", c7);
    run(8, "gate properties", c8);
    run(9, "elasticity oracle", c9);
    if (failures) {
        std::printf("%d criterion(s) failing\n", failures);
        return 1;
    }
    std::printf("all 9 criteria pass\n");
    return 0;
}
