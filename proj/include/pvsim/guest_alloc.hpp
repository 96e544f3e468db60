#pragma once

#include <cstdint>
#include <deque>
#include <unordered_map>
#include <vector>

#include "pvsim/addr.hpp"
#include "pvsim/alloc_hooks.hpp"
#include "pvsim/buddy.hpp"

namespace pvsim {

class binding_table;

struct alloc_config {
    uint64_t total_pages = default_space_pages;
    int cpus = 1;
    uint64_t pcp_capacity = 128;
    uint64_t pcp_batch = 32;
    // Σ per-cpu capacities may not exceed this fraction of guest RAM.
    double pcp_bound_fraction = 0.01;
    bool enforce_pcp_bound = true;
    unsigned max_order = 10;
};

// Where a guest page currently lives. Every page is in exactly one bucket;
// the shadow map is what turns a stray free into a reported double_free
// instead of silent corruption.
enum class page_state : uint8_t { buddy_free, pcp, allocated };

struct pcp_list {
    std::deque<uint64_t> pages;  // front = next to hand out
    uint64_t capacity = 0;
    uint64_t batch = 0;
};

// Guest physical allocator: buddy core fronted by per-CPU order-0 caches.
// With hooks attached, host binding intent travels on cache boundaries only:
// a refill pre-binds a batch in one hypercall, a drain unbinds one batch in
// one hypercall, and everything between is hypercall-free.
class guest_allocator {
  public:
    guest_allocator(const alloc_config& cfg, allocator_hooks* hooks = nullptr);

    gpa_t get_free_pages(int cpu, unsigned order);
    void free_pages(int cpu, gpa_t start, unsigned order);

    // Explicit cache maintenance. refill demands `count` pages up front;
    // drain demands the cache actually holds `count`.
    void pcp_refill(int cpu, uint64_t count);
    void pcp_drain(int cpu, uint64_t count);
    // Flush every cache (memory-pressure path), in batch-sized hypercalls.
    void drain_all();

    uint64_t total_pages() const { return buddy_.total_pages(); }
    uint64_t allocated_pages() const { return allocated_; }
    uint64_t pcp_pages() const { return pcp_total_; }
    uint64_t buddy_free_pages() const { return buddy_.free_pages(); }
    uint64_t pcp_capacity_total() const;
    const pcp_list& pcp(int cpu) const;
    page_state state(gpa_t g) const;
    const buddy_allocator& buddy() const { return buddy_; }

    // Test-mode sweep: the three buckets partition the range, caches respect
    // capacity, and (when a binding table is supplied) binding states line up
    // with buckets: buddy-free ⇒ unbound, cached ⇒ backed, allocated ⇒ bound.
    void check_invariants(const binding_table* bindings = nullptr) const;

  private:
    void refill(int cpu, uint64_t want);
    void drain(int cpu, uint64_t count);
    pcp_list& pcp_mut(int cpu);

    buddy_allocator buddy_;
    std::vector<pcp_list> pcps_;
    std::vector<page_state> state_;
    std::unordered_map<uint64_t, unsigned> live_blocks_;  // start -> order
    allocator_hooks* hooks_;
    uint64_t allocated_ = 0;
    uint64_t pcp_total_ = 0;
};

}  // namespace pvsim
