#pragma once

#include <cstdint>
#include <vector>

#include "pvsim/addr.hpp"
#include "pvsim/buddy.hpp"

namespace pvsim {

// Host physical frame pool. Single pages back bindings and 4KB second-stage
// entries; aligned 512-page blocks back 2MB second-stage entries. A frame is
// never handed out twice, which is what makes "no two GPAs share an HPA" hold
// by construction everywhere above this.
class host_frame_allocator {
  public:
    explicit host_frame_allocator(uint64_t capacity_pages);

    hpa_t alloc();                        // throws out_of_host_memory
    hpa_t alloc_block(unsigned order);    // aligned 2^order pages
    void free(hpa_t p);
    void free_block(hpa_t p, unsigned order);

    uint64_t capacity() const { return buddy_.total_pages(); }
    uint64_t free_pages() const { return buddy_.free_pages(); }
    uint64_t allocated_pages() const { return capacity() - free_pages(); }
    bool can_alloc(uint64_t pages) const { return free_pages() >= pages; }

  private:
    buddy_allocator buddy_;
    std::vector<bool> in_use_;  // page-granular double-free/alloc guard
};

}  // namespace pvsim
