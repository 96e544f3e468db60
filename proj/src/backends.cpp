#include "pvsim/backends.hpp"

#include <algorithm>
#include <string>

#include "pvsim/errors.hpp"
#include "pvsim/hash.hpp"

namespace pvsim {

std::string_view backend_kind_name(backend_kind k) {
    switch (k) {
        case backend_kind::pager: return "pager";
        case backend_kind::shadow: return "shadow";
        case backend_kind::second_stage: return "ept";
    }
    return "?";
}

backend_kind backend_kind_from_name(const std::string& name) {
    if (name == "pager") return backend_kind::pager;
    if (name == "shadow") return backend_kind::shadow;
    if (name == "ept" || name == "second-stage") return backend_kind::second_stage;
    fail(errc::invalid_params, "unknown backend '" + name + "' (pager|shadow|ept)");
}

uint64_t final_state_digest(const std::vector<final_page>& v) {
    fnv1a h;
    for (const auto& p : v) h.add_i64(p.space).add_u64(p.gva).add_u64(p.tag);
    return h.value();
}

// ---------------------------------------------------------------------------
// common machinery

machine::machine(const backend_options& opt, const machine_config& cfg, allocator_hooks* hooks)
    : opt_(opt), cfg_(cfg), host_(cfg.host_pages),
      alloc_(alloc_config{cfg.guest_pages, cfg.cpus, cfg.pcp_capacity, cfg.pcp_batch,
                          cfg.pcp_bound_fraction, cfg.enforce_pcp_bound},
             hooks) {
    if (cfg.dm_base < cfg.guest_pages)
        fail(errc::invalid_params, "direct-map window overlaps user address range");
    spaces_.emplace(0, address_space(0, opt.kind == backend_kind::shadow));
}

bool machine::guest_pt_write_protected() const { return opt_.kind == backend_kind::shadow; }

address_space& machine::space(int id) {
    auto it = spaces_.find(id);
    if (it == spaces_.end())
        fail(errc::invalid_params, "no address space " + std::to_string(id));
    return it->second;
}

gpa_t machine::alloc_page() { return alloc_.get_free_pages(0, 0); }

void machine::free_page(gpa_t g) { alloc_.free_pages(0, g, 0); }

void machine::gpa_ref(gpa_t g) { gpa_refs_[g.n] += 1; }

void machine::gpa_unref(gpa_t g) {
    auto it = gpa_refs_.find(g.n);
    if (it == gpa_refs_.end() || it->second <= 0)
        fail(errc::internal, "refcount underflow on gpa " + std::to_string(g.n));
    if (--it->second == 0) {
        gpa_refs_.erase(it);
        free_page(g);
    }
}

void machine::content_set(hpa_t h, uint64_t tag) {
    if (tag == 0)
        content_.erase(h.n);
    else
        content_[h.n] = tag;
}

uint64_t machine::read_tag(hpa_t h) const {
    auto it = content_.find(h.n);
    return it == content_.end() ? 0 : it->second;
}

void machine::do_mmap(int space_id, uint64_t start, uint64_t len) {
    address_space& sp = space(space_id);
    if (len == 0) fail(errc::invalid_params, "mmap of zero pages");
    if (start + len > cfg_.guest_pages)
        fail(errc::invalid_params, "mmap range beyond the user address span");
    if (sp.overlaps_region(start, len))
        fail(errc::invalid_params, "mmap overlaps an existing region");
    sp.add_region(start, len);
    if (cfg_.test_mode) check_invariants();
}

void machine::do_munmap(int space_id, uint64_t start, uint64_t len) {
    address_space& sp = space(space_id);
    // Collect first: clearing mutates the table we would be iterating.
    std::vector<std::pair<uint64_t, uint64_t>> present;  // va, gpa
    for (auto it = sp.guest_pt.entries().lower_bound(start);
         it != sp.guest_pt.entries().end() && it->first < start + len; ++it)
        present.emplace_back(it->first, it->second.frame);
    for (auto [va, g] : present) {
        pte_clear(sp, gva_t(va));
        gpa_unref(gpa_t(g));
    }
    sp.remove_region(start, len);
    if (cfg_.test_mode) check_invariants();
}

void machine::handle_anon_fault(address_space& sp, gva_t va) {
    charge_fault_entry();
    gpa_t g = alloc_page();
    gpa_refs_[g.n] = 1;
    // The guest kernel zeroes every page it hands out, through the direct
    // mapping. Under reactive backends this touch is what forces backing.
    hpa_t h = dm_write_page(g);
    content_set(h, 0);
    pte_install(sp, va, g, {.writable = true, .user = true});
}

void machine::handle_cow_fault(address_space& sp, gva_t va) {
    charge_fault_entry();
    auto t = sp.guest_pt.translate(va);
    if (!t) fail(errc::internal, "cow fault without a mapping");
    gpa_t old_g(t->frame);
    auto it = gpa_refs_.find(old_g.n);
    if (it == gpa_refs_.end()) fail(errc::internal, "cow fault on untracked frame");
    if (it->second == 1) {
        // Sharing already collapsed: retake write access in place.
        pte_install(sp, va, old_g, {.writable = true, .user = true});
        return;
    }
    gpa_t g = alloc_page();
    gpa_refs_[g.n] = 1;
    it->second -= 1;
    hpa_t dst = dm_write_page(g);
    hpa_t src = dm_read_page(old_g);
    content_set(dst, read_tag(src));  // kernel-side copy via the direct map
    pte_install(sp, va, g, {.writable = true, .user = true});
}

fault_outcome machine::touch(int space_id, gva_t va, bool write, uint64_t tag) {
    address_space& sp = space(space_id);
    if (!sp.in_region(va))
        fail(errc::bad_access, "touch of unmapped gva " + std::to_string(va.n) +
                                   " in space " + std::to_string(space_id));
    counters before = c_;
    auto t = sp.guest_pt.translate(va);
    if (!t)
        handle_anon_fault(sp, va);
    else if (write && !t->entry.writable)
        handle_cow_fault(sp, va);
    hpa_t h = resolve_access(sp, va, write);
    if (write) content_set(h, tag);
    if (cfg_.test_mode) check_invariants();
    return {c_ - before};
}

int machine::fork_clone(int parent_id) {
    address_space& parent = space(parent_id);
    int child_id = next_space_id_++;
    auto [cit, ok] = spaces_.emplace(child_id,
                                     address_space(child_id, guest_pt_write_protected()));
    if (!ok) fail(errc::internal, "space id collision");
    address_space& child = cit->second;
    child.regions = parent.regions;
    // Snapshot: the copy loop rewrites parent entries (write protection for
    // copy-on-write) while we walk them.
    std::vector<std::pair<uint64_t, page_entry>> entries(parent.guest_pt.entries().begin(),
                                                         parent.guest_pt.entries().end());
    for (const auto& [va, pe] : entries) {
        gpa_ref(gpa_t(pe.frame));
        fork_pte_copy(parent, child, gva_t(va), pe);
    }
    if (cfg_.test_mode) check_invariants();
    return child_id;
}

void machine::alloc_burst(uint64_t pages) {
    for (uint64_t i = 0; i < pages; i++) {
        int cpu = cfg_.cpus > 1 ? (burst_cpu_rr_++ % cfg_.cpus) : 0;
        gpa_t g = alloc_.get_free_pages(cpu, 0);
        hpa_t h = dm_write_page(g);  // kernel zeroes what it allocates
        content_set(h, 0);
        burst_.push_back(g.n);
    }
    if (cfg_.test_mode) check_invariants();
}

void machine::free_burst(uint64_t pages) {
    if (pages > burst_.size())
        fail(errc::bad_state, "freeing " + std::to_string(pages) + " burst pages, only " +
                                  std::to_string(burst_.size()) + " outstanding");
    for (uint64_t i = 0; i < pages; i++) {
        gpa_t g(burst_.front());
        burst_.pop_front();
        int cpu = cfg_.cpus > 1 ? (burst_cpu_rr_++ % cfg_.cpus) : 0;
        alloc_.free_pages(cpu, g, 0);
    }
    if (cfg_.test_mode) check_invariants();
}

void machine::drain_caches() {
    alloc_.drain_all();
    if (cfg_.test_mode) check_invariants();
}

std::vector<final_page> machine::final_state() const {
    std::vector<final_page> out;
    for (const auto& [id, sp] : spaces_) {
        for (const auto& [va, pe] : sp.guest_pt.entries()) {
            hpa_t h = resolve_quiet(sp, gva_t(va));
            out.push_back({id, va, read_tag(h)});
        }
    }
    return out;  // spaces_ and entries() are both sorted already
}

void machine::check_invariants() const {
    // Mapping refcounts must agree with the union of the guest tables.
    std::unordered_map<uint64_t, int> want;
    for (const auto& [id, sp] : spaces_)
        for (const auto& [va, pe] : sp.guest_pt.entries()) want[pe.frame] += 1;
    if (want.size() != gpa_refs_.size())
        fail(errc::internal, "frame refcount table out of sync");
    for (const auto& [g, n] : want) {
        auto it = gpa_refs_.find(g);
        if (it == gpa_refs_.end() || it->second != n)
            fail(errc::internal, "bad refcount for gpa " + std::to_string(g));
        if (alloc_.state(gpa_t(g)) != page_state::allocated)
            fail(errc::internal, "mapped gpa " + std::to_string(g) + " not allocated");
    }
    for (uint64_t g : burst_)
        if (alloc_.state(gpa_t(g)) != page_state::allocated)
            fail(errc::internal, "burst page " + std::to_string(g) + " not allocated");
}

// ---------------------------------------------------------------------------
// pager backend

pager_machine::pager_machine(const backend_options& opt, const machine_config& cfg)
    : machine(opt, cfg, &pager_), pager_(host_, c_, opt.dual_table) {
    pager_.register_direct_mapping(gva_t(cfg.dm_base), cfg.guest_pages);
}

void pager_machine::charge_fault_entry() {
    // The fault never leaves the guest: interrupt gate in, interrupt gate out.
    c_.gate_switches += 2;
}

void pager_machine::pte_install(address_space& sp, gva_t va, gpa_t g, pte_flags f) {
    pager_.set_pte(sp, va, g, f);
}

void pager_machine::pte_clear(address_space& sp, gva_t va) { pager_.clear_pte(sp, va); }

hpa_t pager_machine::dm_write_page(gpa_t g) {
    hpa_t h = pager_.bindings().hpa(g);  // bound at allocation, before any touch
    pager_.mark_dm_access(g, true);
    return h;
}

hpa_t pager_machine::dm_read_page(gpa_t g) {
    hpa_t h = pager_.bindings().hpa(g);
    pager_.mark_dm_access(g, false);
    return h;
}

hpa_t pager_machine::resolve_access(address_space& sp, gva_t va, bool write) {
    auto t = sp.shadow_pt.translate(va);
    if (!t) fail(errc::internal, "walked table missing an installed mapping");
    pager_.mark_access(sp, va, write);  // A/D lives in the walked table only
    return hpa_t(t->frame);
}

hpa_t pager_machine::resolve_quiet(const address_space& sp, gva_t va) const {
    auto t = sp.shadow_pt.translate(va);
    if (!t) fail(errc::internal, "walked table missing an installed mapping");
    return hpa_t(t->frame);
}

void pager_machine::fork_pte_copy(address_space& parent, address_space& child, gva_t va,
                                  const page_entry& pe) {
    gpa_t g(pe.frame);
    // Write-protect both sides; each PTE update is one mediated call.
    if (pe.writable) pager_.set_pte(parent, va, g, {.writable = false, .user = pe.user});
    pager_.set_pte(child, va, g, {.writable = false, .user = pe.user});
}

void pager_machine::check_invariants() const {
    machine::check_invariants();
    alloc_.check_invariants(&pager_.bindings());
    pager_.check_coherence(spaces_);
    if (host_.allocated_pages() != pager_.host_pages_held())
        fail(errc::internal, "host pool and binding table disagree");
    if (c_.shadow_faults != 0 || c_.second_stage_faults != 0)
        fail(errc::internal, "intent-driven backend reported reactive faults");
}

// ---------------------------------------------------------------------------
// shadow-paging backend

shadow_machine::shadow_machine(const backend_options& opt, const machine_config& cfg)
    : machine(opt, cfg, nullptr), dm_spt_(table_role::direct_map_spt) {}

std::vector<std::string> shadow_machine::fault_step_model() {
    return {
        "1 fault forwarded to guest kernel: +1 world_switch, +3 pt_switches",
        "2 guest allocates a fresh frame (no charge)",
        "3 guest zeroes it via direct map, direct-map shadow misses: +1 shadow_fault, +1 world_switch",
        "4 host backs the frame and fills the direct-map shadow entry (inside step 3)",
        "5 zeroing completes (no charge)",
        "6 return to the guest fault handler (no charge)",
        "7 guest installs the user PTE, write-protected table traps: +1 pt_write_emulation, +1 world_switch",
        "8 return to user (no charge)",
        "9 user retouch, user shadow misses: +1 shadow_fault, +1 world_switch",
    };
}

void shadow_machine::charge_fault_entry() {
    // Guest faults bounce through the host before the guest kernel sees them;
    // the forward costs a world switch and three table swaps along the way.
    c_.world_switches += 1;
    c_.pt_switches += 3;
}

hpa_t shadow_machine::ensure_backing(gpa_t g) {
    auto it = backing_.find(g.n);
    if (it != backing_.end()) return hpa_t(it->second);
    hpa_t h = host_.alloc();
    backing_[g.n] = h.n;
    return h;
}

hpa_t shadow_machine::dm_touch(gpa_t g, bool write) {
    gva_t dv(cfg_.dm_base + g.n);
    auto se = dm_spt_.translate(dv);
    hpa_t h;
    if (!se) {
        // Direct-map shadow miss: the host backs the frame (if it never has)
        // and fills in the kernel-side shadow entry.
        c_.shadow_faults += 1;
        c_.world_switches += 1;
        h = ensure_backing(g);
        dm_spt_.install_mediated(dv, {.frame = h.n, .user = false});
    } else {
        h = hpa_t(se->frame);
    }
    dm_spt_.set_accessed(dv);
    if (write) dm_spt_.set_dirty(dv);
    return h;
}

hpa_t shadow_machine::dm_write_page(gpa_t g) { return dm_touch(g, true); }
hpa_t shadow_machine::dm_read_page(gpa_t g) { return dm_touch(g, false); }

void shadow_machine::pte_install(address_space& sp, gva_t va, gpa_t g, pte_flags f) {
    // The guest's table is write-protected; the write traps and the host
    // applies it on the guest's behalf.
    if (opt_.pt_write_emulation) {
        c_.pt_write_emulations += 1;
        c_.world_switches += 1;
    }
    auto d = sp.guest_pt.install_mediated(va, {.frame = g.n, .writable = f.writable,
                                               .user = f.user});
    if (d.tlb_flush_required) {
        // Replacing a live translation: flush, which is itself an exit here.
        c_.tlb_flushes += 1;
        c_.world_switches += 1;
        sp.shadow_pt.remove(va);  // stale shadow entry dies with the old PTE
    }
    // Sync into the shadow is deferred: the next access takes a shadow fault.
}

void shadow_machine::pte_clear(address_space& sp, gva_t va) {
    if (opt_.pt_write_emulation) {
        c_.pt_write_emulations += 1;
        c_.world_switches += 1;
    }
    auto d = sp.guest_pt.remove(va);
    if (d.tlb_flush_required) {
        c_.tlb_flushes += 1;
        c_.world_switches += 1;  // unmap-triggered flushes exit as well
    }
    sp.shadow_pt.remove(va);
}

hpa_t shadow_machine::resolve_access(address_space& sp, gva_t va, bool write) {
    auto ge = sp.guest_pt.translate(va);
    if (!ge) fail(errc::internal, "resolve without a guest mapping");
    gpa_t g(ge->frame);
    auto want = backing_.find(g.n);
    if (want == backing_.end())
        fail(errc::internal, "guest-mapped frame was never backed");
    hpa_t h(want->second);
    auto se = sp.shadow_pt.translate(va);
    bool stale = !se || se->frame != h.n;
    bool upgrade = !stale && write && !se->entry.writable && ge->entry.writable;
    if (stale || upgrade) {
        // Shadow fault: sync this alias from the guest table. With A/D-sync
        // tracking on, fresh entries start read-only so the first write takes
        // one more fault here to set writable+dirty.
        c_.shadow_faults += 1;
        c_.world_switches += 1;
        bool writable = ge->entry.writable && (!opt_.ad_sync_faults || write);
        sp.shadow_pt.install_mediated(va, {.frame = h.n, .writable = writable,
                                           .user = ge->entry.user});
    }
    sp.shadow_pt.set_accessed(va);
    if (write) sp.shadow_pt.set_dirty(va);
    return h;
}

hpa_t shadow_machine::resolve_quiet(const address_space& sp, gva_t va) const {
    auto ge = sp.guest_pt.translate(va);
    if (!ge) fail(errc::internal, "resolve without a guest mapping");
    auto it = backing_.find(ge->frame);
    if (it == backing_.end()) fail(errc::internal, "guest-mapped frame was never backed");
    return hpa_t(it->second);
}

void shadow_machine::fork_pte_copy(address_space& parent, address_space& child, gva_t va,
                                   const page_entry& pe) {
    // Fork is the optimized path: guest table writes go through directly and
    // shadow sync is deferred, so the child's shadow starts empty and each
    // later touch pays one shadow fault.
    page_entry ro = pe;
    ro.writable = false;
    ro.accessed = ro.dirty = false;
    parent.guest_pt.install_mediated(va, ro);
    child.guest_pt.install_mediated(va, ro);
    // The parent's live shadow entry must lose write access now, or a parent
    // write would bypass copy-on-write entirely.
    if (auto se = parent.shadow_pt.translate(va)) {
        page_entry spe = se->entry;
        spe.writable = false;
        parent.shadow_pt.install_mediated(va, spe);
    }
}

void shadow_machine::check_invariants() const {
    machine::check_invariants();
    alloc_.check_invariants(nullptr);
    if (host_.allocated_pages() != backing_.size())
        fail(errc::internal, "host pool and backing map disagree");
    if (c_.second_stage_faults != 0)
        fail(errc::internal, "shadow backend reported second-stage faults");
    // Every live shadow entry must agree with guest-table ∘ backing.
    for (const auto& [id, sp] : spaces_) {
        for (const auto& [va, se] : sp.shadow_pt.entries()) {
            auto ge = sp.guest_pt.translate(gva_t(va));
            if (!ge) fail(errc::internal, "shadow entry without guest entry");
            auto b = backing_.find(ge->frame);
            if (b == backing_.end() || b->second != se.frame)
                fail(errc::internal, "shadow entry points at the wrong frame");
            if (se.writable && !ge->entry.writable)
                fail(errc::internal, "shadow grants write the guest entry denies");
        }
    }
}

// ---------------------------------------------------------------------------
// second-stage backend

second_stage_machine::second_stage_machine(const backend_options& opt,
                                           const machine_config& cfg)
    : machine(opt, cfg, nullptr), ss_(table_role::second_stage) {}

void second_stage_machine::charge_fault_entry() {
    // Guest-private exception, handled behind the interrupt gate pair.
    c_.gate_switches += 2;
}

hpa_t second_stage_machine::ss_backing(gpa_t g) {
    if (auto t = ss_.translate(g)) return hpa_t(t->frame);
    c_.second_stage_faults += 1;
    if (opt_.huge_backing) {
        // Back the whole 2MB chunk around the faulting page.
        uint64_t head = align_down_huge(g.n);
        hpa_t block = host_.alloc_block(huge_order);
        ss_.install_mediated(gpa_t(head), {.frame = block.n, .user = false, .huge = true});
        return hpa_t(block.n + (g.n - head));
    }
    hpa_t h = host_.alloc();
    ss_.install_mediated(g, {.frame = h.n, .user = false});
    return h;
}

hpa_t second_stage_machine::dm_write_page(gpa_t g) { return ss_backing(g); }
hpa_t second_stage_machine::dm_read_page(gpa_t g) { return ss_backing(g); }

void second_stage_machine::pte_install(address_space& sp, gva_t va, gpa_t g, pte_flags f) {
    // Guest tables are the guest's own business here; nothing traps.
    auto d = sp.guest_pt.install(va, {.frame = g.n, .writable = f.writable, .user = f.user});
    if (d.tlb_flush_required) c_.tlb_flushes += 1;  // in-guest invlpg
}

void second_stage_machine::pte_clear(address_space& sp, gva_t va) {
    auto d = sp.guest_pt.remove(va);
    if (d.tlb_flush_required) c_.tlb_flushes += 1;
}

hpa_t second_stage_machine::resolve_access(address_space& sp, gva_t va, bool write) {
    auto ge = sp.guest_pt.translate(va);
    if (!ge) fail(errc::internal, "resolve without a guest mapping");
    sp.guest_pt.set_accessed(va);
    if (write) sp.guest_pt.set_dirty(va);
    return ss_backing(gpa_t(ge->frame));
}

hpa_t second_stage_machine::resolve_quiet(const address_space& sp, gva_t va) const {
    auto ge = sp.guest_pt.translate(va);
    if (!ge) fail(errc::internal, "resolve without a guest mapping");
    auto t = ss_.translate(gpa_t(ge->frame));
    if (!t) fail(errc::internal, "guest-mapped frame has no second-stage entry");
    return hpa_t(t->frame);
}

void second_stage_machine::fork_pte_copy(address_space& parent, address_space& child,
                                         gva_t va, const page_entry& pe) {
    page_entry ro = pe;
    ro.writable = false;
    ro.accessed = ro.dirty = false;
    parent.guest_pt.install(va, ro);
    child.guest_pt.install(va, ro);
    // Second-stage state is per-frame, not per-space: nothing to copy.
}

void second_stage_machine::check_invariants() const {
    machine::check_invariants();
    alloc_.check_invariants(nullptr);
    if (host_.allocated_pages() != ss_.mapped_pages())
        fail(errc::internal, "host pool and second-stage table disagree");
    if (c_.shadow_faults != 0)
        fail(errc::internal, "second-stage backend reported shadow faults");
}

std::unique_ptr<machine> make_machine(const backend_options& opt, const machine_config& cfg) {
    switch (opt.kind) {
        case backend_kind::pager: return std::make_unique<pager_machine>(opt, cfg);
        case backend_kind::shadow: return std::make_unique<shadow_machine>(opt, cfg);
        case backend_kind::second_stage:
            return std::make_unique<second_stage_machine>(opt, cfg);
    }
    fail(errc::invalid_params, "bad backend kind");
}

// ---------------------------------------------------------------------------
// flat reference

bool flat_reference::space_model::in_region(uint64_t va) const {
    for (const auto& r : regions)
        if (va >= r.start && va < r.end()) return true;
    return false;
}

flat_reference::space_model& flat_reference::space(int id) {
    auto it = spaces_.find(id);
    if (it == spaces_.end())
        fail(errc::invalid_params, "no address space " + std::to_string(id));
    return it->second;
}

size_t flat_reference::new_page() {
    if (!free_pages_.empty()) {
        size_t idx = free_pages_.back();
        free_pages_.pop_back();
        pages_[idx] = {0, 1};
        return idx;
    }
    pages_.push_back({0, 1});
    return pages_.size() - 1;
}

void flat_reference::unref(size_t idx) {
    if (--pages_[idx].refs == 0) free_pages_.push_back(idx);
}

void flat_reference::do_mmap(int space_id, uint64_t start, uint64_t len) {
    space_model& sp = space(space_id);
    if (len == 0) fail(errc::invalid_params, "mmap of zero pages");
    for (const auto& r : sp.regions)
        if (start < r.end() && r.start < start + len)
            fail(errc::invalid_params, "mmap overlaps an existing region");
    sp.regions.push_back({start, len});
}

void flat_reference::do_munmap(int space_id, uint64_t start, uint64_t len) {
    space_model& sp = space(space_id);
    for (auto it = sp.map.begin(); it != sp.map.end();) {
        if (it->first >= start && it->first < start + len) {
            unref(it->second);
            it = sp.map.erase(it);
        } else {
            ++it;
        }
    }
    std::vector<region> out;
    for (const auto& r : sp.regions) {
        if (r.end() <= start || start + len <= r.start) {
            out.push_back(r);
            continue;
        }
        if (r.start < start) out.push_back({r.start, start - r.start});
        if (r.end() > start + len) out.push_back({start + len, r.end() - (start + len)});
    }
    sp.regions = std::move(out);
}

void flat_reference::touch(int space_id, uint64_t gva, bool write, uint64_t tag) {
    space_model& sp = space(space_id);
    if (!sp.in_region(gva))
        fail(errc::bad_access, "touch of unmapped gva " + std::to_string(gva));
    auto it = sp.map.find(gva);
    if (it == sp.map.end()) it = sp.map.emplace(gva, new_page()).first;
    if (!write) return;
    if (pages_[it->second].refs > 1) {
        // new_page() may grow pages_, so drop the old ref before taking any
        // reference into the vector.
        pages_[it->second].refs -= 1;
        it->second = new_page();
    }
    pages_[it->second].tag = tag;
}

int flat_reference::fork_clone(int parent_id) {
    space_model parent = space(parent_id);  // copy
    for (auto& [va, idx] : parent.map) pages_[idx].refs += 1;
    int id = next_space_id_++;
    spaces_.emplace(id, std::move(parent));
    return id;
}

std::vector<final_page> flat_reference::final_state() const {
    std::vector<final_page> out;
    for (const auto& [id, sp] : spaces_) {
        std::vector<std::pair<uint64_t, size_t>> sorted(sp.map.begin(), sp.map.end());
        std::sort(sorted.begin(), sorted.end());
        for (auto [va, idx] : sorted) out.push_back({id, va, pages_[idx].tag});
    }
    return out;
}

}  // namespace pvsim
