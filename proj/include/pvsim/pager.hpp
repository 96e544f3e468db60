#pragma once

#include <cstdint>
#include <map>
#include <span>

#include "pvsim/addr.hpp"
#include "pvsim/address_space.hpp"
#include "pvsim/alloc_hooks.hpp"
#include "pvsim/binding.hpp"
#include "pvsim/counters.hpp"
#include "pvsim/host_frames.hpp"
#include "pvsim/page_table.hpp"

namespace pvsim {

struct pte_flags {
    bool writable = true;
    bool user = true;
};

// Kernel-mode mediator that binds guest frames to host frames at allocator
// events instead of reacting to faults. Host pages are reserved in batches
// when the per-CPU cache refills (pre-bound), promoted to live bindings the
// moment a page is handed out, and released in batches when the cache drains.
// On the translation side it maintains the direct mapping and, in dual-table
// mode, writes the guest's own table and the hardware-walked shadow together;
// accessed/dirty state lives only in the shadow.
class pager final : public allocator_hooks {
  public:
    pager(host_frame_allocator& host, counters& c, bool dual_table = true);

    // --- direct mapping -----------------------------------------------------
    // Must be registered once, before any binding activity.
    void register_direct_mapping(gva_t base, uint64_t len_pages);
    bool direct_mapping_registered() const { return dm_len_ != 0; }
    gva_t direct_map_gva(gpa_t g) const;

    // --- binding lifecycle (allocator hooks) --------------------------------
    void bind_batch(std::span<const gpa_t> gpas) override;
    void unbind_batch(std::span<const gpa_t> gpas) override;
    void on_alloc(gpa_t gpa) override;

    // --- pte intents --------------------------------------------------------
    void set_pte(address_space& sp, gva_t va, gpa_t gpa, pte_flags flags);
    void clear_pte(address_space& sp, gva_t va);
    // accessed/dirty as seen by hardware (the walked table is authoritative).
    std::pair<bool, bool> read_pte_ad(const address_space& sp, gva_t va) const;

    // access-time A/D updates, applied to the walked table only
    void mark_access(address_space& sp, gva_t va, bool write);
    void mark_dm_access(gpa_t gpa, bool write);

    bool dual_table() const { return dual_table_; }
    const binding_table& bindings() const { return bindings_; }
    uint64_t host_pages_held() const { return bindings_.host_pages_held(); }
    gva_table& dm_pt() { return dm_pt_; }
    gva_table& dm_spt() { return dm_spt_; }
    const gva_table& dm_pt() const { return dm_pt_; }
    const gva_table& dm_spt() const { return dm_spt_; }

    // Test-mode sweep: shadow == guest ∘ binding for every space, and the
    // direct mapping covers exactly the bound frames.
    void check_coherence(const std::map<int, address_space>& spaces) const;

  private:
    host_frame_allocator& host_;
    counters& c_;
    bool dual_table_;
    binding_table bindings_;
    gva_table dm_pt_;
    gva_table dm_spt_;
    uint64_t dm_base_ = 0;
    uint64_t dm_len_ = 0;
};

}  // namespace pvsim
