#include "pvsim/pager.hpp"

#include <string>

#include "pvsim/errors.hpp"

namespace pvsim {

std::string_view bind_state_name(bind_state s) {
    switch (s) {
        case bind_state::unbound: return "unbound";
        case bind_state::pre_bound: return "pre_bound";
        case bind_state::bound: return "bound";
    }
    return "?";
}

pager::pager(host_frame_allocator& host, counters& c, bool dual_table)
    : host_(host), c_(c), dual_table_(dual_table),
      dm_pt_(table_role::direct_map_pt), dm_spt_(table_role::direct_map_spt) {}

void pager::register_direct_mapping(gva_t base, uint64_t len_pages) {
    if (dm_len_ != 0) fail(errc::double_registration, "direct mapping already registered");
    if (len_pages == 0) fail(errc::invalid_params, "empty direct mapping");
    dm_base_ = base.n;
    dm_len_ = len_pages;
}

gva_t pager::direct_map_gva(gpa_t g) const {
    if (dm_len_ == 0) fail(errc::bad_state, "direct mapping not registered");
    if (g.n >= dm_len_) fail(errc::invalid_params, "gpa outside the direct-mapped range");
    return gva_t(dm_base_ + g.n);
}

void pager::bind_batch(std::span<const gpa_t> gpas) {
    // Validate everything before mutating anything: one failing page must not
    // leave a half-bound batch behind.
    for (gpa_t g : gpas)
        if (bindings_.state(g) != bind_state::unbound)
            fail(errc::bad_state, "bind of already-backed gpa " + std::to_string(g.n));
    if (!host_.can_alloc(gpas.size()))
        fail(errc::out_of_host_memory, "bind batch of " + std::to_string(gpas.size()) +
                                           " exceeds free host pages");
    for (gpa_t g : gpas) bindings_.set_pre_bound(g, host_.alloc());
    // One guest->host crossing per batch, however large.
    c_.hypercalls += 1;
    c_.world_switches += 1;
}

void pager::unbind_batch(std::span<const gpa_t> gpas) {
    for (gpa_t g : gpas)
        if (bindings_.state(g) == bind_state::unbound)
            fail(errc::bad_state, "unbind of unbound gpa " + std::to_string(g.n));
    for (gpa_t g : gpas) {
        host_.free(bindings_.clear(g));
        // Revocation point: the direct mapping to the released frame dies here.
        gva_t dv = direct_map_gva(g);
        dm_pt_.remove(dv);
        dm_spt_.remove(dv);
    }
    c_.hypercalls += 1;
    c_.world_switches += 1;
    // The batch invalidates direct-map translations; one flush per batch
    // whether or not any entry was still installed.
    c_.tlb_flushes += 1;
}

void pager::on_alloc(gpa_t gpa) {
    switch (bindings_.state(gpa)) {
        case bind_state::unbound:
            fail(errc::bad_state, "allocation of unbound gpa " + std::to_string(gpa.n));
        case bind_state::bound:
            // Reallocation out of the cache: backing and direct mapping are
            // already live. Idempotent by design.
            return;
        case bind_state::pre_bound: {
            // Kernel-mode promotion: no guest->host crossing, no modeled call
            // cost. The per-fault price of binding shows up as the amortized
            // component in the fault breakdown instead.
            bindings_.promote(gpa);
            gva_t dv = direct_map_gva(gpa);
            hpa_t h = bindings_.hpa(gpa);
            dm_pt_.install_mediated(dv, {.frame = gpa.n, .user = false});
            dm_spt_.install_mediated(dv, {.frame = h.n, .user = false});
            return;
        }
    }
}

void pager::set_pte(address_space& sp, gva_t va, gpa_t gpa, pte_flags flags) {
    if (bindings_.state(gpa) != bind_state::bound)
        fail(errc::unbound_gpa, "pte install against gpa " + std::to_string(gpa.n) +
                                    " (" + std::string(bind_state_name(bindings_.state(gpa))) + ")");
    hpa_t h = bindings_.hpa(gpa);
    entry_delta d{};
    if (dual_table_) {
        // Guest-visible intent first, then the table hardware actually walks.
        // A/D bits are deliberately left clear in the guest view.
        sp.guest_pt.install_mediated(va, {.frame = gpa.n, .writable = flags.writable,
                                          .user = flags.user});
        d = sp.shadow_pt.install_mediated(va, {.frame = h.n, .writable = flags.writable,
                                               .user = flags.user});
    } else {
        d = sp.shadow_pt.install_mediated(va, {.frame = h.n, .writable = flags.writable,
                                               .user = flags.user});
        // Bookkeeping only in single-table mode: keeps forks and final-state
        // resolution uniform across modes at no modeled cost.
        sp.guest_pt.install_mediated(va, {.frame = gpa.n, .writable = flags.writable,
                                          .user = flags.user});
    }
    if (d.tlb_flush_required) c_.tlb_flushes += 1;
    c_.pager_calls += 1;
}

void pager::clear_pte(address_space& sp, gva_t va) {
    entry_delta dg = sp.guest_pt.remove(va);
    entry_delta ds = sp.shadow_pt.remove(va);
    if (dg.tlb_flush_required || ds.tlb_flush_required) c_.tlb_flushes += 1;
    // The frame stays bound: only a cache drain or an explicit unbind revokes
    // host backing.
    c_.pager_calls += 1;
}

std::pair<bool, bool> pager::read_pte_ad(const address_space& sp, gva_t va) const {
    auto t = sp.shadow_pt.translate(va);
    if (!t) fail(errc::absent_entry, "A/D read through missing mapping at gva " +
                                         std::to_string(va.n));
    return {t->entry.accessed, t->entry.dirty};
}

void pager::mark_access(address_space& sp, gva_t va, bool write) {
    sp.shadow_pt.set_accessed(va);
    if (write) sp.shadow_pt.set_dirty(va);
}

void pager::mark_dm_access(gpa_t gpa, bool write) {
    gva_t dv = direct_map_gva(gpa);
    dm_spt_.set_accessed(dv);
    if (write) dm_spt_.set_dirty(dv);
}

void pager::check_coherence(const std::map<int, address_space>& spaces) const {
    for (const auto& [id, sp] : spaces) {
        if (sp.guest_pt.size() != sp.shadow_pt.size())
            fail(errc::internal, "guest/shadow table size mismatch in space " + std::to_string(id));
        for (const auto& [va, ge] : sp.guest_pt.entries()) {
            auto st = sp.shadow_pt.translate(gva_t(va));
            if (!st) fail(errc::internal, "shadow hole at gva " + std::to_string(va));
            gpa_t g(ge.frame);
            if (bindings_.state(g) != bind_state::bound)
                fail(errc::internal, "mapped gpa " + std::to_string(g.n) + " not bound");
            if (bindings_.hpa(g).n != st->frame)
                fail(errc::internal, "shadow frame disagrees with binding at gva " +
                                         std::to_string(va));
            if (ge.writable != st->entry.writable)
                fail(errc::internal, "guest/shadow permission skew at gva " + std::to_string(va));
        }
    }
    // Direct mapping covers exactly the bound frames.
    uint64_t dm_entries = dm_spt_.size();
    if (dm_entries != bindings_.bound_count())
        fail(errc::internal, "direct mapping covers " + std::to_string(dm_entries) +
                                 " frames, " + std::to_string(bindings_.bound_count()) +
                                 " are bound");
    for (const auto& [dv, se] : dm_spt_.entries()) {
        auto ge = dm_pt_.translate(gva_t(dv));
        if (!ge) fail(errc::internal, "direct-map guest view missing page " + std::to_string(dv));
        gpa_t g(ge->frame);
        if (bindings_.state(g) != bind_state::bound || bindings_.hpa(g).n != se.frame)
            fail(errc::internal, "direct-map entry stale for gpa " + std::to_string(g.n));
    }
}

}  // namespace pvsim
