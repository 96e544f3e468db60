#include "pvsim/gates.hpp"

#include <string>

namespace pvsim {

std::string_view domain_key_name(domain_key k) {
    switch (k) {
        case domain_key::gu: return "GU";
        case domain_key::gk: return "GK";
        case domain_key::host: return "HOST";
    }
    return "?";
}

std::string_view ev_name(ev e) {
    switch (e) {
        case ev::save_user_ctx: return "save_user_ctx";
        case ev::key_write: return "key_write";
        case ev::para_cli: return "para_cli";
        case ev::para_sti: return "para_sti";
        case ev::load_kernel_ctx: return "load_kernel_ctx";
        case ev::dispatch: return "dispatch";
        case ev::restore_user_ctx: return "restore_user_ctx";
        case ev::resume: return "resume";
        case ev::virq_inject: return "virq_inject";
        case ev::virq_defer: return "virq_defer";
        case ev::virq_deliver: return "virq_deliver";
        case ev::fast_path: return "fast_path";
        case ev::host_path: return "host_path";
        case ev::migrate: return "migrate";
        case ev::policy_violation: return "policy_violation";
    }
    return "?";
}

gate_machine::gate_machine(switch_profile profile, counters& c, int vcpus, int threads)
    : profile_(profile), c_(c) {
    if (vcpus < 1 || threads < 0) fail(errc::invalid_params, "bad vcpu/thread count");
    for (int v = 0; v < vcpus; v++) add_vcpu(v);
    for (int t = 0; t < threads; t++) add_thread(t, t % vcpus);
    gate_sites_ = {site_syscall_gate_entry, site_syscall_gate_exit,
                   site_interrupt_gate_entry, site_interrupt_gate_exit};
}

void gate_machine::add_vcpu(int vcpu) {
    pvcs p;
    p.vcpu = vcpu;
    p.kernel_ctx_tag = 0x4b00 + uint64_t(vcpu);  // stable per-vcpu kernel identity
    vcpus_.emplace(vcpu, p);
}

void gate_machine::add_thread(int thread, int vcpu) {
    if (!vcpus_.count(vcpu)) fail(errc::invalid_params, "unknown vcpu " + std::to_string(vcpu));
    threads_[thread] = thread_state{vcpu, domain_key::gu, false};
}

gate_machine::thread_state& gate_machine::thread(int id) {
    auto it = threads_.find(id);
    if (it == threads_.end())
        fail(errc::context_missing, "thread " + std::to_string(id) + " has no vcpu slot");
    return it->second;
}

const gate_machine::thread_state& gate_machine::thread(int id) const {
    return const_cast<gate_machine*>(this)->thread(id);
}

pvcs& gate_machine::vcpu_mut(int vcpu) {
    auto it = vcpus_.find(vcpu);
    if (it == vcpus_.end()) fail(errc::invalid_params, "unknown vcpu " + std::to_string(vcpu));
    return it->second;
}

const pvcs& gate_machine::vcpu_state(int vcpu) const {
    return const_cast<gate_machine*>(this)->vcpu_mut(vcpu);
}

pvcs& gate_machine::vcpu_state_mut(int vcpu) { return vcpu_mut(vcpu); }

domain_key gate_machine::active_key(int thread_id) const { return thread(thread_id).key; }
bool gate_machine::in_gate(int thread_id) const { return thread(thread_id).in_gate; }

void gate_machine::emit(ev kind, int t, int v, int64_t arg, uint64_t tag) {
    log_.push_back({kind, t, v, arg, tag});
}

void gate_machine::para_cli(int t, pvcs& p) {
    // The shadow bit covers the instruction that clears the flag, so an
    // interrupt can never slip in halfway through disabling. Serial execution
    // makes the set/clear pair atomic here; the bit still exists (and is
    // honored by inject_virq) for tests that set it explicitly.
    p.interrupt_shadow = true;
    emit(ev::para_cli, t, p.vcpu);
    p.virtual_if = false;
    p.interrupt_shadow = false;
}

void gate_machine::para_sti(int t, pvcs& p) {
    emit(ev::para_sti, t, p.vcpu);
    p.virtual_if = true;
    drain_pending(p);
}

void gate_machine::drain_pending(pvcs& p) {
    // Everything that arrived while masked is delivered now, in arrival
    // order, exactly once; each delivery is an external event dispatch.
    while (!p.masked() && !p.pending_virqs.empty()) {
        int vec = p.pending_virqs.front();
        p.pending_virqs.pop_front();
        c_.virq_delivered += 1;
        emit(ev::virq_deliver, -1, p.vcpu, vec);
        dispatch_event(p.vcpu, {vec, gate_event::source::external_interrupt});
    }
}

counters gate_machine::syscall_round_trip(int t, int nr,
                                          const std::function<void(gate_machine&)>& in_handler) {
    thread_state& ts = thread(t);
    if (ts.key != domain_key::gu)
        fail(errc::wrong_domain, "syscall gate entered with key " +
                                     std::string(domain_key_name(ts.key)));
    counters before = c_;
    pvcs& p = vcpu_mut(ts.vcpu);
    ts.in_gate = true;
    emit(ev::save_user_ctx, t, p.vcpu);
    if (profile_ == switch_profile::key_gates) {
        checked_wrpkru(t, domain_key::gk, site_syscall_gate_entry);
        c_.gate_switches += 1;
    } else {
        // Comparison design: same crossing, but the kernel lives behind its
        // own page table, so entry swaps tables instead of retagging.
        c_.pt_switches += 1;
    }
    para_cli(t, p);
    emit(ev::load_kernel_ctx, t, p.vcpu, 0, p.kernel_ctx_tag);
    c_.syscalls += 1;
    emit(ev::dispatch, t, p.vcpu, nr);
    if (in_handler) in_handler(*this);
    emit(ev::restore_user_ctx, t, p.vcpu);
    para_sti(t, p);
    if (profile_ == switch_profile::key_gates) {
        checked_wrpkru(t, domain_key::gu, site_syscall_gate_exit);
        c_.gate_switches += 1;
    } else {
        c_.pt_switches += 1;
    }
    emit(ev::resume, t, p.vcpu);
    ts.in_gate = false;
    return c_ - before;
}

void gate_machine::set_virtual_if(int t, bool enabled) {
    thread_state& ts = thread(t);
    if (ts.key != domain_key::gk && !ts.in_gate)
        fail(errc::wrong_domain, "virtual-IF control from user domain outside a gate");
    pvcs& p = vcpu_mut(ts.vcpu);
    if (enabled)
        para_sti(t, p);
    else
        para_cli(t, p);
}

delivery gate_machine::inject_virq(int vcpu, int vector) {
    pvcs& p = vcpu_mut(vcpu);
    emit(ev::virq_inject, -1, vcpu, vector);
    if (p.masked()) {
        p.pending_virqs.push_back(vector);
        c_.virq_deferred += 1;
        emit(ev::virq_defer, -1, vcpu, vector);
        return delivery::deferred;
    }
    c_.virq_delivered += 1;
    emit(ev::virq_deliver, -1, vcpu, vector);
    dispatch_event(vcpu, {vector, gate_event::source::external_interrupt});
    return delivery::delivered;
}

dispatch_path gate_machine::dispatch_event(int vcpu, const gate_event& e) {
    pvcs& p = vcpu_mut(vcpu);
    if (e.src == gate_event::source::self_exception) {
        // Guest-private exception: interrupt gate in, handle, interrupt gate
        // out. Never leaves the guest, delivered regardless of masking.
        c_.gate_switches += 2;
        emit(ev::fast_path, -1, p.vcpu, e.vector);
        return dispatch_path::fast;
    }
    c_.world_switches += 1;
    emit(ev::host_path, -1, p.vcpu, e.vector);
    return dispatch_path::host;
}

void gate_machine::checked_wrpkru(int t, domain_key key, int site) {
    thread_state& ts = thread(t);
    ts.key = key;
    emit(ev::key_write, t, ts.vcpu, site, uint64_t(key));
    if (!gate_sites_.count(site)) {
        // The write went through (hardware has no notion of sites); what the
        // machinery guarantees is that vetted user code contains no such
        // instruction. Record the escape for the audit log.
        c_.policy_violations += 1;
        emit(ev::policy_violation, t, ts.vcpu, site);
    }
}

access_result gate_machine::access_check(int t, domain_key page_key, bool) const {
    domain_key k = thread(t).key;
    if (page_key == domain_key::host) return access_result::protection_fault;
    if (k == domain_key::gk) return access_result::allowed;  // kernel sees both guest keys
    return page_key == domain_key::gu ? access_result::allowed
                                      : access_result::protection_fault;
}

void gate_machine::migrate_thread(int t, int new_vcpu) {
    thread_state& ts = thread(t);
    if (ts.in_gate)
        fail(errc::migration_in_gate, "thread " + std::to_string(t) + " migrated mid-gate");
    if (!vcpus_.count(new_vcpu))
        fail(errc::invalid_params, "unknown vcpu " + std::to_string(new_vcpu));
    ts.vcpu = new_vcpu;
    emit(ev::migrate, t, new_vcpu);
}

}  // namespace pvsim
