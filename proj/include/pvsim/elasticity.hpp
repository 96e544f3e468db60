#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pvsim/addr.hpp"

namespace pvsim {

// One point on the memory-elasticity curve: how much the host has actually
// committed against what the guest truly uses, at 4KB resolution.
struct elasticity_sample {
    uint64_t t = 0;
    uint64_t guest_in_use_4k = 0;
    uint64_t host_allocated = 0;

    bool operator==(const elasticity_sample&) const = default;
};

// Relative overhead = (host_allocated - guest_in_use) / guest_in_use.
// Samples with nothing in use have no meaningful ratio; they are dropped from
// the aggregates and reported as a count instead.
struct overhead_summary {
    double mean = 0.0;
    double median = 0.0;
    double max = 0.0;
    double threshold = 0.0;
    double fraction_above = 0.0;  // of the counted samples
    uint64_t counted = 0;
    uint64_t zero_in_use_excluded = 0;
};

overhead_summary overhead_stats(const std::vector<elasticity_sample>& samples,
                                double threshold = 0.01);

std::string samples_to_csv(const std::vector<elasticity_sample>& samples);
nlohmann::json summary_to_json(const overhead_summary& s);

// Backing granularity for the waste metric. A 2MB chunk spans 512 base pages;
// backing at 4KB wastes nothing by definition.
enum class chunk_granularity : uint8_t { g4k, g2m };

constexpr uint64_t chunk_pages(chunk_granularity g) {
    return g == chunk_granularity::g4k ? 1 : huge_span;
}

// Number of distinct chunk-aligned blocks needed to cover the touched pages.
uint64_t chunk_cover(const std::vector<uint64_t>& touched_pages, uint64_t pages_per_chunk);

// Extra pages committed when backing `touched_pages` at granularity g instead
// of page-by-page: |cover| * chunk - |touched|.
uint64_t waste_at_granularity(const std::vector<uint64_t>& touched_pages, chunk_granularity g);

// How freed guest memory makes it back to the host.
//   balloon         guest hands pages back one block at a time; at 4KB blocks
//                   every page goes, at 2MB blocks only fully-free chunks do
//   block_unplug    memory hot-unplug: whole blocks or nothing
//   metadata_scan   host sweeps tracking metadata over a region, then
//                   invalidates the fully-free blocks it found
//   pager_free_path frees ride the allocator's existing drain hypercalls; no
//                   operations beyond what the replay already counted
enum class reclamation_kind : uint8_t { balloon, block_unplug, metadata_scan, pager_free_path };

std::string_view reclamation_kind_name(reclamation_kind k);

struct reclamation_model {
    reclamation_kind kind = reclamation_kind::balloon;
    uint64_t block_pages = 1;   // balloon granularity / unplug or scan block size
    uint64_t region_pages = 0;  // metadata_scan sweep span; 0 = just the freed cover
};

struct reclamation_result {
    uint64_t ops = 0;
    uint64_t host_pages_released = 0;
};

// `freed` lists guest page numbers that are free at invocation time. Pages the
// guest still uses are simply absent, which is what strands partially-free
// blocks under the huge-granularity models.
reclamation_result reclamation_ops(const reclamation_model& m,
                                   const std::vector<uint64_t>& freed);

}  // namespace pvsim
