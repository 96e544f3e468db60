#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "pvsim/addr.hpp"
#include "pvsim/address_space.hpp"
#include "pvsim/counters.hpp"
#include "pvsim/guest_alloc.hpp"
#include "pvsim/host_frames.hpp"
#include "pvsim/pager.hpp"

namespace pvsim {

// The three ways a guest page becomes host-backed:
//   pager         intent-driven: binding happens at allocator events, faults
//                 stay entirely inside the guest
//   shadow        host-maintained shadow tables, synced lazily on shadow
//                 faults, guest tables write-protected
//   second_stage  hardware nested paging, backed reactively per fault at 4KB
//                 or 2MB granularity
enum class backend_kind : uint8_t { pager, shadow, second_stage };

std::string_view backend_kind_name(backend_kind k);
backend_kind backend_kind_from_name(const std::string& name);  // pager|shadow|ept

struct backend_options {
    backend_kind kind = backend_kind::pager;
    bool huge_backing = false;       // second_stage only: back 2MB chunks
    bool pt_write_emulation = true;  // shadow only: trap+emulate guest PT writes
    bool ad_sync_faults = false;     // shadow only: extra fault on first write, for dirty tracking
    bool dual_table = true;          // pager only: guest table + walked shadow
};

struct machine_config {
    uint64_t guest_pages = default_space_pages;
    uint64_t host_pages = default_space_pages;
    int cpus = 1;
    uint64_t pcp_capacity = 128;
    uint64_t pcp_batch = 32;
    double pcp_bound_fraction = 0.01;
    bool enforce_pcp_bound = true;
    // Direct-map window: kernel GVA = dm_base + gpa. Sits above user ranges.
    uint64_t dm_base = uint64_t(1) << 21;
    bool test_mode = false;  // invariant sweep after every op
};

struct fault_outcome {
    counters delta;
};

struct final_page {
    int space = 0;
    uint64_t gva = 0;
    uint64_t tag = 0;

    bool operator==(const final_page&) const = default;
    auto operator<=>(const final_page&) const = default;
};

uint64_t final_state_digest(const std::vector<final_page>& v);

// One simulated guest+host pair under a chosen backing design. Traces drive
// the public surface; everything observable funnels into the counters, the
// elasticity numbers and the final guest-visible state.
class machine {
  public:
    machine(const backend_options& opt, const machine_config& cfg, allocator_hooks* hooks);
    virtual ~machine() = default;

    machine(const machine&) = delete;
    machine& operator=(const machine&) = delete;

    // trace surface
    void do_mmap(int space, uint64_t start, uint64_t len);
    void do_munmap(int space, uint64_t start, uint64_t len);
    fault_outcome touch(int space, gva_t va, bool write, uint64_t tag);
    int fork_clone(int parent);
    void alloc_burst(uint64_t pages);
    void free_burst(uint64_t pages);
    void drain_caches();  // flush per-cpu caches (memory-pressure path)

    const backend_options& options() const { return opt_; }
    const machine_config& config() const { return cfg_; }
    counters& tally() { return c_; }
    const counters& tally() const { return c_; }
    guest_allocator& allocator() { return alloc_; }
    host_frame_allocator& host_frames() { return host_; }
    address_space& space(int id);
    const std::map<int, address_space>& spaces() const { return spaces_; }
    uint64_t burst_outstanding() const { return burst_.size(); }

    // elasticity inputs
    uint64_t guest_in_use() const { return alloc_.allocated_pages(); }
    virtual uint64_t host_allocated() const = 0;

    // guest-visible memory, resolved through this backend's own translation
    std::vector<final_page> final_state() const;
    uint64_t final_state_hash() const { return final_state_digest(final_state()); }
    uint64_t read_tag(hpa_t h) const;

    virtual void check_invariants() const;

  protected:
    // backend-specific charge for entering/leaving the user fault path
    virtual void charge_fault_entry() = 0;
    // mediated user PTE install/replace (gva -> gpa plus whatever the backend
    // mirrors); charges whatever the write costs under this design
    virtual void pte_install(address_space& sp, gva_t va, gpa_t g, pte_flags f) = 0;
    virtual void pte_clear(address_space& sp, gva_t va) = 0;
    // kernel touches of a frame through the direct mapping
    virtual hpa_t dm_write_page(gpa_t g) = 0;
    virtual hpa_t dm_read_page(gpa_t g) = 0;
    // user access with guest tables already correct; counts secondary faults
    virtual hpa_t resolve_access(address_space& sp, gva_t va, bool write) = 0;
    // side-effect-free translation for final-state reads
    virtual hpa_t resolve_quiet(const address_space& sp, gva_t va) const = 0;
    virtual void fork_pte_copy(address_space& parent, address_space& child, gva_t va,
                               const page_entry& pe) = 0;

    gpa_t alloc_page();
    void free_page(gpa_t g);
    void handle_anon_fault(address_space& sp, gva_t va);
    void handle_cow_fault(address_space& sp, gva_t va);
    void gpa_ref(gpa_t g);
    void gpa_unref(gpa_t g);
    bool guest_pt_write_protected() const;
    void content_set(hpa_t h, uint64_t tag);

    backend_options opt_;
    machine_config cfg_;
    counters c_;
    host_frame_allocator host_;
    guest_allocator alloc_;
    std::map<int, address_space> spaces_;
    std::unordered_map<uint64_t, int> gpa_refs_;       // gpa -> mapping count
    std::unordered_map<uint64_t, uint64_t> content_;   // hpa -> last tag (0 = absent)
    std::deque<uint64_t> burst_;                       // kernel burst pages, FIFO
    int next_space_id_ = 1;
    int burst_cpu_rr_ = 0;
};

class pager_machine final : public machine {
  public:
    pager_machine(const backend_options& opt, const machine_config& cfg);

    uint64_t host_allocated() const override { return pager_.host_pages_held(); }
    void check_invariants() const override;
    pager& pager_ref() { return pager_; }
    const pager& pager_ref() const { return pager_; }

  protected:
    void charge_fault_entry() override;
    void pte_install(address_space& sp, gva_t va, gpa_t g, pte_flags f) override;
    void pte_clear(address_space& sp, gva_t va) override;
    hpa_t dm_write_page(gpa_t g) override;
    hpa_t dm_read_page(gpa_t g) override;
    hpa_t resolve_access(address_space& sp, gva_t va, bool write) override;
    hpa_t resolve_quiet(const address_space& sp, gva_t va) const override;
    void fork_pte_copy(address_space& parent, address_space& child, gva_t va,
                       const page_entry& pe) override;

  private:
    pager pager_;
};

class shadow_machine final : public machine {
  public:
    shadow_machine(const backend_options& opt, const machine_config& cfg);

    uint64_t host_allocated() const override { return backing_.size(); }
    void check_invariants() const override;
    const gva_table& dm_spt() const { return dm_spt_; }

    // What each numbered step of the fresh-anonymous-fault path charges;
    // embedded in reports so the accounting is auditable.
    static std::vector<std::string> fault_step_model();

  protected:
    void charge_fault_entry() override;
    void pte_install(address_space& sp, gva_t va, gpa_t g, pte_flags f) override;
    void pte_clear(address_space& sp, gva_t va) override;
    hpa_t dm_write_page(gpa_t g) override;
    hpa_t dm_read_page(gpa_t g) override;
    hpa_t resolve_access(address_space& sp, gva_t va, bool write) override;
    hpa_t resolve_quiet(const address_space& sp, gva_t va) const override;
    void fork_pte_copy(address_space& parent, address_space& child, gva_t va,
                       const page_entry& pe) override;

  private:
    hpa_t dm_touch(gpa_t g, bool write);
    hpa_t ensure_backing(gpa_t g);

    std::unordered_map<uint64_t, uint64_t> backing_;  // gpa -> hpa, never revoked
    gva_table dm_spt_;
};

class second_stage_machine final : public machine {
  public:
    second_stage_machine(const backend_options& opt, const machine_config& cfg);

    uint64_t host_allocated() const override { return ss_.mapped_pages(); }
    void check_invariants() const override;
    const gpa_table& second_stage_table() const { return ss_; }

    // Bypass for unit tests: back an arbitrary gpa the way a fault would.
    hpa_t back_gpa(gpa_t g) { return ss_backing(g); }

  protected:
    void charge_fault_entry() override;
    void pte_install(address_space& sp, gva_t va, gpa_t g, pte_flags f) override;
    void pte_clear(address_space& sp, gva_t va) override;
    hpa_t dm_write_page(gpa_t g) override;
    hpa_t dm_read_page(gpa_t g) override;
    hpa_t resolve_access(address_space& sp, gva_t va, bool write) override;
    hpa_t resolve_quiet(const address_space& sp, gva_t va) const override;
    void fork_pte_copy(address_space& parent, address_space& child, gva_t va,
                       const page_entry& pe) override;

  private:
    hpa_t ss_backing(gpa_t g);

    gpa_table ss_;
};

std::unique_ptr<machine> make_machine(const backend_options& opt, const machine_config& cfg);

// Backend-free model of the same trace surface: flat per-space pages with
// copy-on-write sharing, no tables, no host. The equivalence oracle every
// backend's final state is compared against.
class flat_reference {
  public:
    void do_mmap(int space, uint64_t start, uint64_t len);
    void do_munmap(int space, uint64_t start, uint64_t len);
    void touch(int space, uint64_t gva, bool write, uint64_t tag);
    int fork_clone(int parent);

    std::vector<final_page> final_state() const;
    uint64_t final_state_hash() const { return final_state_digest(final_state()); }

  private:
    struct logical_page {
        uint64_t tag = 0;
        int refs = 0;
    };
    struct space_model {
        std::unordered_map<uint64_t, size_t> map;  // gva -> page index
        std::vector<region> regions;
        bool in_region(uint64_t va) const;
    };

    space_model& space(int id);
    size_t new_page();
    void unref(size_t idx);

    std::vector<logical_page> pages_;
    std::vector<size_t> free_pages_;
    std::map<int, space_model> spaces_ = {{0, {}}};
    int next_space_id_ = 1;
};

}  // namespace pvsim
