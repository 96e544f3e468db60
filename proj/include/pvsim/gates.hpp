#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "pvsim/counters.hpp"
#include "pvsim/errors.hpp"

namespace pvsim {

// Protection-key domains. Guest user and guest kernel live in the same ring
// and the same address space; what separates them is the active key. Host
// pages are never reachable from either guest key.
enum class domain_key : uint8_t { gu, gk, host };

std::string_view domain_key_name(domain_key k);

// Which switching machinery the syscall path exercises: key-based gates, or
// the comparison design that swaps page tables on every kernel crossing.
enum class switch_profile : uint8_t { key_gates, table_swap };

// Per-vcpu communication block shared between guest kernel and hypervisor.
struct pvcs {
    int vcpu = 0;
    bool virtual_if = true;       // virtual interrupt flag; true = accepting
    bool interrupt_shadow = false;  // one-instruction delivery blackout
    std::deque<int> pending_virqs;  // FIFO of deferred vectors
    uint64_t kernel_ctx_tag = 0;    // identity of the kernel context this vcpu loads

    bool masked() const { return !virtual_if || interrupt_shadow; }
};

struct gate_event {
    int vector = 0;
    enum class source : uint8_t { self_exception, external_interrupt } src =
        source::self_exception;
};

enum class delivery : uint8_t { delivered, deferred };
enum class dispatch_path : uint8_t { fast, host };
enum class access_result : uint8_t { allowed, protection_fault };

// Event log entry kinds, in emission order for a syscall round trip:
// save_user_ctx, key_write(GK), para_cli, load_kernel_ctx, dispatch,
// restore_user_ctx, para_sti, key_write(GU), resume.
enum class ev : uint8_t {
    save_user_ctx,
    key_write,
    para_cli,
    para_sti,
    load_kernel_ctx,
    dispatch,
    restore_user_ctx,
    resume,
    virq_inject,
    virq_defer,
    virq_deliver,
    fast_path,
    host_path,
    migrate,
    policy_violation,
};

std::string_view ev_name(ev e);

struct event_record {
    ev kind;
    int thread = -1;
    int vcpu = -1;
    int64_t arg = 0;      // vector, site id, target vcpu, or key ordinal
    uint64_t ctx_tag = 0;

    bool operator==(const event_record&) const = default;
};

// Registered code sites allowed to rewrite the domain key. Anything else
// executing the key-write instruction is logged as a policy violation (the
// depriv. machinery guarantees such sites cannot exist in vetted binaries;
// the simulator records rather than refuses so traces can probe it).
inline constexpr int site_syscall_gate_entry = 1;
inline constexpr int site_syscall_gate_exit = 2;
inline constexpr int site_interrupt_gate_entry = 3;
inline constexpr int site_interrupt_gate_exit = 4;

class gate_machine {
  public:
    gate_machine(switch_profile profile, counters& c, int vcpus = 1, int threads = 1);

    void add_vcpu(int vcpu);
    void add_thread(int thread, int vcpu);

    // Full user->kernel->user crossing for one syscall. `in_handler` runs with
    // interrupts virtually disabled, standing in for the handler body; tests
    // use it to inject interrupts inside the masked window.
    counters syscall_round_trip(int thread, int nr,
                                const std::function<void(gate_machine&)>& in_handler = {});

    // Guest-kernel-only control of the virtual interrupt flag. Enabling it
    // drains whatever arrived while masked, in arrival order, exactly once.
    void set_virtual_if(int thread, bool enabled);

    delivery inject_virq(int vcpu, int vector);
    dispatch_path dispatch_event(int vcpu, const gate_event& e);

    // Key-write instruction: retags the thread, then checks the site.
    void checked_wrpkru(int thread, domain_key key, int site);

    access_result access_check(int thread, domain_key page_key, bool write) const;

    // Reschedule a thread onto another vcpu; illegal mid-gate.
    void migrate_thread(int thread, int new_vcpu);

    domain_key active_key(int thread) const;
    bool in_gate(int thread) const;
    const pvcs& vcpu_state(int vcpu) const;
    pvcs& vcpu_state_mut(int vcpu);  // direct PVCS pokes (shadow bit, tags) for tests
    const std::vector<event_record>& log() const { return log_; }
    void register_gate_site(int site) { gate_sites_.insert(site); }

  private:
    struct thread_state {
        int vcpu = 0;
        domain_key key = domain_key::gu;
        bool in_gate = false;
    };

    thread_state& thread(int id);
    const thread_state& thread(int id) const;
    pvcs& vcpu_mut(int vcpu);
    void para_cli(int thread, pvcs& p);
    void para_sti(int thread, pvcs& p);
    void drain_pending(pvcs& p);
    void emit(ev kind, int thread, int vcpu, int64_t arg = 0, uint64_t tag = 0);

    switch_profile profile_;
    counters& c_;
    std::map<int, thread_state> threads_;
    std::map<int, pvcs> vcpus_;
    std::set<int> gate_sites_;
    std::vector<event_record> log_;
};

}  // namespace pvsim
