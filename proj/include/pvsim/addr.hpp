#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>

namespace pvsim {

// Everything in the simulator is page-granular: an address is a page number
// within one of three spaces. Wrapping the number in a kind-tagged type keeps
// guest-virtual, guest-physical and host-physical numbers from ever mixing in
// arithmetic or map lookups.
enum class addr_kind { gva, gpa, hpa };

template <addr_kind K>
struct page_num {
    uint64_t n = 0;

    page_num() = default;
    constexpr explicit page_num(uint64_t v) : n(v) {}

    constexpr auto operator<=>(const page_num&) const = default;

    constexpr page_num operator+(uint64_t d) const { return page_num(n + d); }
    constexpr uint64_t operator-(page_num o) const { return n - o.n; }
};

using gva_t = page_num<addr_kind::gva>;
using gpa_t = page_num<addr_kind::gpa>;
using hpa_t = page_num<addr_kind::hpa>;

// 2MB backing granularity expressed in 4KB pages.
inline constexpr uint64_t huge_span = 512;
inline constexpr unsigned huge_order = 9;  // log2(huge_span)

constexpr uint64_t align_down_huge(uint64_t page) { return page & ~(huge_span - 1); }
constexpr bool huge_aligned(uint64_t page) { return (page & (huge_span - 1)) == 0; }

// Default space size: 2^20 pages (4 GiB) per address kind.
inline constexpr uint64_t default_space_pages = uint64_t(1) << 20;

}  // namespace pvsim

template <pvsim::addr_kind K>
struct std::hash<pvsim::page_num<K>> {
    size_t operator()(pvsim::page_num<K> p) const noexcept {
        return std::hash<uint64_t>{}(p.n);
    }
};
