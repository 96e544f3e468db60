#pragma once

#include <cstdint>

namespace pvsim {

// Event tallies accumulated by a replay. Latency is derived from these by the
// cost model; the simulator itself never keeps time. Deltas are ordinary
// componentwise differences of before/after snapshots.
struct counters {
    uint64_t syscalls = 0;
    uint64_t shadow_faults = 0;
    uint64_t second_stage_faults = 0;
    uint64_t world_switches = 0;
    uint64_t pt_switches = 0;
    uint64_t gate_switches = 0;
    uint64_t pager_calls = 0;
    uint64_t hypercalls = 0;
    uint64_t pt_write_emulations = 0;
    uint64_t tlb_flushes = 0;
    uint64_t virq_deferred = 0;
    uint64_t virq_delivered = 0;
    uint64_t policy_violations = 0;

    bool operator==(const counters&) const = default;

    counters& operator+=(const counters& o) {
        visit_pair(*this, o, [](uint64_t& a, uint64_t b) { a += b; });
        return *this;
    }
    counters& operator-=(const counters& o) {
        visit_pair(*this, o, [](uint64_t& a, uint64_t b) { a -= b; });
        return *this;
    }
    friend counters operator+(counters a, const counters& b) { return a += b; }
    friend counters operator-(counters a, const counters& b) { return a -= b; }

    // Stable field iteration for serialization and generic math.
    template <typename F>
    static void visit(counters& c, F&& f) {
        f("syscalls", c.syscalls);
        f("shadow_faults", c.shadow_faults);
        f("second_stage_faults", c.second_stage_faults);
        f("world_switches", c.world_switches);
        f("pt_switches", c.pt_switches);
        f("gate_switches", c.gate_switches);
        f("pager_calls", c.pager_calls);
        f("hypercalls", c.hypercalls);
        f("pt_write_emulations", c.pt_write_emulations);
        f("tlb_flushes", c.tlb_flushes);
        f("virq_deferred", c.virq_deferred);
        f("virq_delivered", c.virq_delivered);
        f("policy_violations", c.policy_violations);
    }
    template <typename F>
    static void visit(const counters& c, F&& f) {
        visit(const_cast<counters&>(c), [&](const char* n, uint64_t& v) { f(n, uint64_t(v)); });
    }

  private:
    template <typename F>
    static void visit_pair(counters& a, const counters& b, F&& f) {
        uint64_t* pa[] = {&a.syscalls, &a.shadow_faults, &a.second_stage_faults,
                          &a.world_switches, &a.pt_switches, &a.gate_switches,
                          &a.pager_calls, &a.hypercalls, &a.pt_write_emulations,
                          &a.tlb_flushes, &a.virq_deferred, &a.virq_delivered,
                          &a.policy_violations};
        const uint64_t* pb[] = {&b.syscalls, &b.shadow_faults, &b.second_stage_faults,
                                &b.world_switches, &b.pt_switches, &b.gate_switches,
                                &b.pager_calls, &b.hypercalls, &b.pt_write_emulations,
                                &b.tlb_flushes, &b.virq_deferred, &b.virq_delivered,
                                &b.policy_violations};
        for (size_t i = 0; i < sizeof(pa) / sizeof(pa[0]); i++) f(*pa[i], *pb[i]);
    }
};

}  // namespace pvsim
