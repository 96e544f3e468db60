#pragma once

#include <cstdint>
#include <vector>

#include "pvsim/addr.hpp"
#include "pvsim/page_table.hpp"

namespace pvsim {

struct region {
    uint64_t start = 0;  // gva page number
    uint64_t len = 0;    // pages
    uint64_t end() const { return start + len; }
};

// One guest user address space: the guest's own table plus the host-side
// shadow of it. Which of the two a backend actually walks (and charges for)
// is the backend's business; the pair exists for all of them so forks and
// final-state resolution share one shape.
struct address_space {
    int id = 0;
    gva_table guest_pt;
    gva_table shadow_pt;
    std::vector<region> regions;

    explicit address_space(int id_, bool guest_pt_write_protected = false)
        : id(id_),
          guest_pt(table_role::guest_user_pt, guest_pt_write_protected),
          shadow_pt(table_role::user_spt) {}

    bool in_region(gva_t va) const {
        for (const auto& r : regions)
            if (va.n >= r.start && va.n < r.end()) return true;
        return false;
    }

    bool overlaps_region(uint64_t start, uint64_t len) const {
        for (const auto& r : regions)
            if (start < r.end() && r.start < start + len) return true;
        return false;
    }

    void add_region(uint64_t start, uint64_t len) { regions.push_back({start, len}); }

    // Drops any region pages inside [start, start+len), splitting as needed.
    void remove_region(uint64_t start, uint64_t len) {
        std::vector<region> out;
        uint64_t end = start + len;
        for (const auto& r : regions) {
            if (r.end() <= start || end <= r.start) {
                out.push_back(r);
                continue;
            }
            if (r.start < start) out.push_back({r.start, start - r.start});
            if (r.end() > end) out.push_back({end, r.end() - end});
        }
        regions = std::move(out);
    }
};

}  // namespace pvsim
