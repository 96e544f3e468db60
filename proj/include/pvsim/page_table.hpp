#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "pvsim/addr.hpp"
#include "pvsim/errors.hpp"

namespace pvsim {

// One level-agnostic table entry. `frame` is a page number whose kind depends
// on the table's role (guest tables map to GPA, shadow/second-stage tables map
// to HPA). A huge entry stands for 512 consecutive base pages: both its
// virtual page and its frame are 512-aligned and translation fans the offset
// out across the span.
struct page_entry {
    uint64_t frame = 0;
    bool present = true;
    bool writable = true;
    bool user = true;
    bool accessed = false;
    bool dirty = false;
    bool huge = false;

    bool operator==(const page_entry&) const = default;
};

enum class table_role {
    guest_user_pt,   // GVA -> GPA, guest-owned
    direct_map_pt,   // GVA -> GPA, kernel direct mapping
    user_spt,        // GVA -> HPA, host-maintained shadow of guest_user_pt
    direct_map_spt,  // GVA -> HPA, host-maintained shadow of direct_map_pt
    second_stage,    // GPA -> HPA, hardware-walked nested table
};

std::string_view table_role_name(table_role r);

constexpr addr_kind table_key_kind(table_role r) {
    return r == table_role::second_stage ? addr_kind::gpa : addr_kind::gva;
}

struct entry_delta {
    bool changed = false;
    bool tlb_flush_required = false;
};

// Result of a lookup: the stored entry plus the effective frame for the
// queried page (differs from entry.frame inside a huge span).
struct translation {
    uint64_t frame = 0;
    page_entry entry;
};

// Sparse single-level page table. Keys are page numbers of the role's key
// kind; the template tag makes cross-kind lookups a compile error. Entries
// are stored in page-number order so iteration is deterministic.
template <addr_kind K>
class page_table {
  public:
    explicit page_table(table_role role, bool write_protected = false)
        : role_(role), write_protected_(write_protected) {
        if (table_key_kind(role) != K)
            fail(errc::internal, "table role keyed by the wrong address kind");
    }

    table_role role() const { return role_; }
    bool write_protected() const { return write_protected_; }
    void set_write_protected(bool wp) { write_protected_ = wp; }

    std::optional<translation> translate(page_num<K> vp) const {
        auto it = entries_.find(vp.n);
        if (it != entries_.end())
            return translation{it->second.frame, it->second};
        uint64_t head = align_down_huge(vp.n);
        if (head != vp.n) {
            it = entries_.find(head);
            if (it != entries_.end() && it->second.huge)
                return translation{it->second.frame + (vp.n - head), it->second};
        }
        return std::nullopt;
    }

    // Guest-visible install; refuses to touch a write-protected table. The
    // shadow-paging backend intercepts such writes and re-issues them through
    // install_mediated() after charging emulation cost.
    entry_delta install(page_num<K> vp, const page_entry& e) {
        if (write_protected_)
            fail(errc::invalid_entry, "direct write to a write-protected table");
        return do_install(vp, e);
    }

    entry_delta install_mediated(page_num<K> vp, const page_entry& e) {
        return do_install(vp, e);
    }

    // Removing an absent entry is a no-op; removing a present one requires a
    // TLB shootdown. Only exact keys are removed (a huge entry is keyed by
    // its head page).
    entry_delta remove(page_num<K> vp) {
        auto it = entries_.find(vp.n);
        if (it == entries_.end()) return {};
        entries_.erase(it);
        return {true, true};
    }

    entry_delta set_accessed(page_num<K> vp) { return set_ad(vp, true, false); }
    entry_delta set_dirty(page_num<K> vp) { return set_ad(vp, false, true); }

    const std::map<uint64_t, page_entry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }

    // Present base-page count, huge entries expanded.
    uint64_t mapped_pages() const {
        uint64_t n = 0;
        for (auto& [vp, e] : entries_) n += e.huge ? huge_span : 1;
        return n;
    }

    void clear() { entries_.clear(); }

  private:
    entry_delta do_install(page_num<K> vp, const page_entry& e) {
        if (!e.present)
            fail(errc::invalid_entry, "installing a non-present entry (use remove)");
        if ((e.accessed || e.dirty) && !e.present)
            fail(errc::invalid_entry, "A/D bits on a non-present entry");
        if (e.huge) {
            if (!huge_aligned(e.frame))
                fail(errc::unaligned_huge, "huge frame " + std::to_string(e.frame));
            if (!huge_aligned(vp.n))
                fail(errc::unaligned_huge, "huge mapping at page " + std::to_string(vp.n));
            // No base entry may sit inside the span (an existing huge entry at
            // the same head is a plain replacement).
            auto it = entries_.lower_bound(vp.n);
            while (it != entries_.end() && it->first < vp.n + huge_span) {
                if (!(it->first == vp.n && it->second.huge))
                    fail(errc::overlapping_huge,
                         "huge span collides with entry at page " + std::to_string(it->first));
                ++it;
            }
        } else {
            uint64_t head = align_down_huge(vp.n);
            auto it = entries_.find(head);
            if (it != entries_.end() && it->second.huge)
                fail(errc::overlapping_huge,
                     "base page " + std::to_string(vp.n) + " covered by huge entry");
        }
        auto [it, inserted] = entries_.insert_or_assign(vp.n, e);
        (void)it;
        // Replacing a live translation needs a flush; filling a hole does not.
        return {true, !inserted};
    }

    entry_delta set_ad(page_num<K> vp, bool a, bool d) {
        page_entry* e = find_covering(vp);
        if (!e) fail(errc::invalid_entry, "A/D update on absent entry " + std::to_string(vp.n));
        bool ch = (a && !e->accessed) || (d && !e->dirty);
        if (a) e->accessed = true;
        if (d) e->dirty = true;
        return {ch, false};
    }

    page_entry* find_covering(page_num<K> vp) {
        auto it = entries_.find(vp.n);
        if (it != entries_.end()) return &it->second;
        uint64_t head = align_down_huge(vp.n);
        if (head != vp.n) {
            it = entries_.find(head);
            if (it != entries_.end() && it->second.huge) return &it->second;
        }
        return nullptr;
    }

    table_role role_;
    bool write_protected_;
    std::map<uint64_t, page_entry> entries_;
};

using gva_table = page_table<addr_kind::gva>;
using gpa_table = page_table<addr_kind::gpa>;

}  // namespace pvsim
