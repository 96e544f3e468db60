#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

namespace pvsim {

// Binary buddy over a flat page range. Free blocks are kept per order in
// address-sorted sets; allocation takes the lowest-addressed block of any
// sufficient order and splits low-half first, which makes the allocator
// address-for-address identical to a brute-force "lowest aligned free run"
// search (the test oracle relies on this).
class buddy_allocator {
  public:
    explicit buddy_allocator(uint64_t total_pages, unsigned max_order = 10);

    // Lowest free 2^order-aligned block, or nullopt when fragmented/empty.
    std::optional<uint64_t> alloc(unsigned order);
    void free(uint64_t start, unsigned order);

    bool can_alloc(unsigned order) const;
    uint64_t free_pages() const { return free_count_; }
    uint64_t total_pages() const { return total_; }
    unsigned max_order() const { return max_order_; }
    const std::set<uint64_t>& free_list(unsigned order) const;

    // Structural self-check: alignment, bounds, no overlap, fully coalesced.
    void check() const;

  private:
    unsigned max_order_;
    uint64_t total_;
    uint64_t free_count_;
    std::vector<std::set<uint64_t>> lists_;
};

}  // namespace pvsim
