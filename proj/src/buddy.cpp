#include "pvsim/buddy.hpp"

#include <algorithm>
#include <string>

#include "pvsim/errors.hpp"

namespace pvsim {

buddy_allocator::buddy_allocator(uint64_t total_pages, unsigned max_order)
    : max_order_(max_order), total_(total_pages), free_count_(total_pages),
      lists_(max_order + 1) {
    if (max_order > 20) fail(errc::invalid_params, "buddy max_order too large");
    // Seed with maximal naturally-aligned blocks; handles non-power-of-two
    // totals the same way a boot-time memblock release would.
    uint64_t addr = 0;
    while (addr < total_pages) {
        unsigned order = max_order_;
        while (order > 0 &&
               ((addr & ((uint64_t(1) << order) - 1)) != 0 ||
                addr + (uint64_t(1) << order) > total_pages))
            order--;
        lists_[order].insert(addr);
        addr += uint64_t(1) << order;
    }
}

std::optional<uint64_t> buddy_allocator::alloc(unsigned order) {
    if (order > max_order_) fail(errc::invalid_params, "order above max_order");
    // Candidate = lowest start among all orders that can satisfy the request.
    unsigned best_order = 0;
    uint64_t best = UINT64_MAX;
    for (unsigned o = order; o <= max_order_; o++) {
        if (!lists_[o].empty() && *lists_[o].begin() < best) {
            best = *lists_[o].begin();
            best_order = o;
        }
    }
    if (best == UINT64_MAX) return std::nullopt;
    lists_[best_order].erase(lists_[best_order].begin());
    // Split down, keeping the low half and freeing the high half.
    while (best_order > order) {
        best_order--;
        lists_[best_order].insert(best + (uint64_t(1) << best_order));
    }
    free_count_ -= uint64_t(1) << order;
    return best;
}

void buddy_allocator::free(uint64_t start, unsigned order) {
    if (order > max_order_) fail(errc::invalid_params, "order above max_order");
    if (start & ((uint64_t(1) << order) - 1))
        fail(errc::invalid_params, "freeing misaligned block " + std::to_string(start));
    uint64_t len = uint64_t(1) << order;
    if (start + len > total_)
        fail(errc::invalid_params, "freeing block past end of range");
    // A range overlapping any free block is a double free. The duplicate-insert
    // check below cannot see ranges swallowed by an already-coalesced parent,
    // so scan every order for an intersecting block before touching state.
    for (unsigned o = 0; o <= max_order_; o++) {
        auto it = lists_[o].upper_bound(start + len - 1);
        if (it != lists_[o].begin() && *std::prev(it) + (uint64_t(1) << o) > start)
            fail(errc::double_free, "block " + std::to_string(start) + " already free");
    }
    // Only the incoming pages are new to the free pool; absorbed buddies were
    // already counted.
    free_count_ += len;
    uint64_t block = start;
    while (order < max_order_) {
        uint64_t buddy = block ^ (uint64_t(1) << order);
        auto it = lists_[order].find(buddy);
        if (it == lists_[order].end()) break;
        if (buddy + (uint64_t(1) << order) > total_) break;
        lists_[order].erase(it);
        block = std::min(block, buddy);
        order++;
    }
    if (!lists_[order].insert(block).second)
        fail(errc::double_free, "block " + std::to_string(block) + " already free");
}

bool buddy_allocator::can_alloc(unsigned order) const {
    for (unsigned o = order; o <= max_order_; o++)
        if (!lists_[o].empty()) return true;
    return false;
}

const std::set<uint64_t>& buddy_allocator::free_list(unsigned order) const {
    if (order > max_order_) fail(errc::invalid_params, "order above max_order");
    return lists_[order];
}

void buddy_allocator::check() const {
    uint64_t counted = 0;
    uint64_t prev_end = 0;
    bool first = true;
    // Walk blocks in address order across all orders.
    std::vector<std::pair<uint64_t, unsigned>> blocks;
    for (unsigned o = 0; o <= max_order_; o++)
        for (uint64_t s : lists_[o]) blocks.emplace_back(s, o);
    std::sort(blocks.begin(), blocks.end());
    for (auto [s, o] : blocks) {
        uint64_t len = uint64_t(1) << o;
        if (s & (len - 1)) fail(errc::internal, "buddy list holds misaligned block");
        if (s + len > total_) fail(errc::internal, "buddy list block out of range");
        if (!first && s < prev_end) fail(errc::internal, "buddy free blocks overlap");
        prev_end = s + len;
        first = false;
        counted += len;
        // Fully coalesced: a block's buddy of the same order must not be free.
        if (o < max_order_) {
            uint64_t buddy = s ^ len;
            if (buddy + len <= total_ && lists_[o].count(buddy))
                fail(errc::internal, "uncoalesced buddy pair");
        }
    }
    if (counted != free_count_) fail(errc::internal, "buddy free-page count drifted");
}

}  // namespace pvsim
