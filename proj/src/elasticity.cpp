#include "pvsim/elasticity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "pvsim/errors.hpp"

namespace pvsim {

overhead_summary overhead_stats(const std::vector<elasticity_sample>& samples,
                                double threshold) {
    if (samples.empty()) fail(errc::empty_series, "no elasticity samples");
    overhead_summary s;
    s.threshold = threshold;
    std::vector<double> ratios;
    ratios.reserve(samples.size());
    for (const auto& p : samples) {
        if (p.guest_in_use_4k == 0) {
            s.zero_in_use_excluded += 1;
            continue;
        }
        double over = (double(p.host_allocated) - double(p.guest_in_use_4k)) /
                      double(p.guest_in_use_4k);
        ratios.push_back(over);
    }
    if (ratios.empty())
        fail(errc::empty_series, "every sample had zero in-use memory");
    s.counted = ratios.size();
    double sum = 0.0;
    uint64_t above = 0;
    for (double r : ratios) {
        sum += r;
        if (r > threshold) above++;
    }
    s.mean = sum / double(ratios.size());
    s.fraction_above = double(above) / double(ratios.size());
    s.max = *std::max_element(ratios.begin(), ratios.end());
    std::sort(ratios.begin(), ratios.end());
    size_t n = ratios.size();
    s.median = n % 2 ? ratios[n / 2] : (ratios[n / 2 - 1] + ratios[n / 2]) / 2.0;
    return s;
}

std::string samples_to_csv(const std::vector<elasticity_sample>& samples) {
    std::ostringstream out;
    out << "t,guest_in_use_4k,host_allocated,overhead\n";
    for (const auto& p : samples) {
        out << p.t << ',' << p.guest_in_use_4k << ',' << p.host_allocated << ',';
        if (p.guest_in_use_4k == 0) {
            out << "nan";
        } else {
            double over = (double(p.host_allocated) - double(p.guest_in_use_4k)) /
                          double(p.guest_in_use_4k);
            out << over;
        }
        out << '\n';
    }
    return out.str();
}

nlohmann::json summary_to_json(const overhead_summary& s) {
    return nlohmann::json{
        {"mean", s.mean},
        {"median", s.median},
        {"max", s.max},
        {"threshold", s.threshold},
        {"fraction_above", s.fraction_above},
        {"counted", s.counted},
        {"zero_in_use_excluded", s.zero_in_use_excluded},
    };
}

uint64_t chunk_cover(const std::vector<uint64_t>& touched_pages, uint64_t pages_per_chunk) {
    if (pages_per_chunk == 0) fail(errc::invalid_params, "zero-page chunks");
    std::unordered_set<uint64_t> chunks;
    for (uint64_t p : touched_pages) chunks.insert(p / pages_per_chunk);
    return chunks.size();
}

uint64_t waste_at_granularity(const std::vector<uint64_t>& touched_pages,
                              chunk_granularity g) {
    uint64_t span = chunk_pages(g);
    std::unordered_set<uint64_t> pages(touched_pages.begin(), touched_pages.end());
    std::unordered_set<uint64_t> chunks;
    for (uint64_t p : pages) chunks.insert(p / span);
    return chunks.size() * span - pages.size();
}

std::string_view reclamation_kind_name(reclamation_kind k) {
    switch (k) {
        case reclamation_kind::balloon: return "balloon";
        case reclamation_kind::block_unplug: return "block_unplug";
        case reclamation_kind::metadata_scan: return "metadata_scan";
        case reclamation_kind::pager_free_path: return "pager_free_path";
    }
    return "?";
}

reclamation_result reclamation_ops(const reclamation_model& m,
                                   const std::vector<uint64_t>& freed) {
    if (m.block_pages == 0) fail(errc::invalid_params, "zero-page reclamation blocks");
    std::unordered_set<uint64_t> pages(freed.begin(), freed.end());
    reclamation_result r;

    if (m.kind == reclamation_kind::pager_free_path) {
        // Already paid for: the drain hypercalls these frees rode on are in
        // the replay counters. Everything goes back at base granularity.
        r.host_pages_released = pages.size();
        return r;
    }

    if (m.kind == reclamation_kind::balloon && m.block_pages == 1) {
        r.ops = pages.size();  // one guest-host transition per page
        r.host_pages_released = pages.size();
        return r;
    }

    // Block-granular paths: tally free pages per block, full blocks release.
    std::unordered_map<uint64_t, uint64_t> per_block;
    for (uint64_t p : pages) per_block[p / m.block_pages] += 1;
    uint64_t full_blocks = 0;
    for (const auto& [blk, n] : per_block)
        if (n == m.block_pages) full_blocks++;

    switch (m.kind) {
        case reclamation_kind::balloon:
        case reclamation_kind::block_unplug:
            r.ops = full_blocks;
            break;
        case reclamation_kind::metadata_scan: {
            // Sweep cost covers the whole region whether or not anything in it
            // is reclaimable; each full block found costs one invalidation.
            uint64_t scanned = m.region_pages
                                   ? (m.region_pages + m.block_pages - 1) / m.block_pages
                                   : per_block.size();
            r.ops = scanned + full_blocks;
            break;
        }
        default:
            fail(errc::internal, "unhandled reclamation kind");
    }
    r.host_pages_released = full_blocks * m.block_pages;
    return r;
}

}  // namespace pvsim
