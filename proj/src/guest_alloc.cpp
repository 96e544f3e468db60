#include "pvsim/guest_alloc.hpp"

#include <algorithm>
#include <string>

#include "pvsim/binding.hpp"
#include "pvsim/errors.hpp"

namespace pvsim {

guest_allocator::guest_allocator(const alloc_config& cfg, allocator_hooks* hooks)
    : buddy_(cfg.total_pages, cfg.max_order),
      state_(cfg.total_pages, page_state::buddy_free),
      hooks_(hooks) {
    if (cfg.cpus < 1) fail(errc::invalid_params, "need at least one cpu");
    if (cfg.pcp_batch == 0 || cfg.pcp_capacity == 0)
        fail(errc::invalid_params, "pcp capacity/batch must be positive");
    if (cfg.pcp_batch > cfg.pcp_capacity)
        fail(errc::invalid_params, "pcp batch larger than capacity");
    uint64_t cap_total = cfg.pcp_capacity * uint64_t(cfg.cpus);
    if (cfg.enforce_pcp_bound &&
        double(cap_total) > cfg.pcp_bound_fraction * double(cfg.total_pages))
        fail(errc::invalid_params,
             "per-cpu caches (" + std::to_string(cap_total) + " pages) exceed " +
                 std::to_string(cfg.pcp_bound_fraction * 100) + "% of guest memory");
    pcps_.resize(cfg.cpus);
    for (auto& p : pcps_) {
        p.capacity = cfg.pcp_capacity;
        p.batch = cfg.pcp_batch;
    }
}

pcp_list& guest_allocator::pcp_mut(int cpu) {
    if (cpu < 0 || size_t(cpu) >= pcps_.size())
        fail(errc::invalid_params, "cpu " + std::to_string(cpu) + " out of range");
    return pcps_[cpu];
}

const pcp_list& guest_allocator::pcp(int cpu) const {
    return const_cast<guest_allocator*>(this)->pcp_mut(cpu);
}

page_state guest_allocator::state(gpa_t g) const {
    if (g.n >= state_.size()) fail(errc::invalid_params, "gpa out of range");
    return state_[g.n];
}

uint64_t guest_allocator::pcp_capacity_total() const {
    uint64_t n = 0;
    for (const auto& p : pcps_) n += p.capacity;
    return n;
}

void guest_allocator::refill(int cpu, uint64_t want) {
    // Internal refill is opportunistic: take what the buddy can give, up to
    // the batch, so allocation keeps working right down to exhaustion.
    pcp_list& p = pcp_mut(cpu);
    uint64_t take = std::min(want, buddy_.free_pages());
    take = std::min(take, p.capacity - p.pages.size());
    if (take == 0) fail(errc::out_of_guest_memory, "buddy exhausted on pcp refill");
    std::vector<gpa_t> got;
    got.reserve(take);
    for (uint64_t i = 0; i < take; i++) got.push_back(gpa_t(*buddy_.alloc(0)));
    if (hooks_) {
        try {
            hooks_->bind_batch(got);  // one hypercall for the whole batch
        } catch (...) {
            for (gpa_t g : got) buddy_.free(g.n, 0);
            throw;
        }
    }
    for (gpa_t g : got) {
        p.pages.push_back(g.n);
        state_[g.n] = page_state::pcp;
    }
    pcp_total_ += take;
}

void guest_allocator::drain(int cpu, uint64_t count) {
    pcp_list& p = pcp_mut(cpu);
    if (p.pages.size() < count) fail(errc::bad_state, "pcp drain below fill level");
    // Coldest first: the drain takes from the back, the hot end stays.
    std::vector<gpa_t> out;
    out.reserve(count);
    for (uint64_t i = 0; i < count; i++) {
        out.push_back(gpa_t(p.pages.back()));
        p.pages.pop_back();
    }
    if (hooks_) hooks_->unbind_batch(out);  // one hypercall for the whole batch
    for (gpa_t g : out) {
        buddy_.free(g.n, 0);
        state_[g.n] = page_state::buddy_free;
    }
    pcp_total_ -= count;
}

gpa_t guest_allocator::get_free_pages(int cpu, unsigned order) {
    pcp_list& p = pcp_mut(cpu);
    if (order == 0) {
        if (p.pages.empty()) refill(cpu, p.batch);
        gpa_t g(p.pages.front());
        p.pages.pop_front();
        pcp_total_--;
        state_[g.n] = page_state::allocated;
        allocated_++;
        live_blocks_[g.n] = 0;
        if (hooks_) hooks_->on_alloc(g);
        return g;
    }
    // Multi-page blocks bypass the cache; the binding intent is immediate.
    auto s = buddy_.alloc(order);
    if (!s) fail(errc::out_of_guest_memory,
                 "no free block of order " + std::to_string(order));
    uint64_t len = uint64_t(1) << order;
    if (hooks_) {
        std::vector<gpa_t> pages;
        pages.reserve(len);
        for (uint64_t i = 0; i < len; i++) pages.push_back(gpa_t(*s + i));
        try {
            hooks_->bind_batch(pages);
        } catch (...) {
            buddy_.free(*s, order);
            throw;
        }
        for (gpa_t g : pages) hooks_->on_alloc(g);
    }
    for (uint64_t i = 0; i < len; i++) state_[*s + i] = page_state::allocated;
    allocated_ += len;
    live_blocks_[*s] = order;
    return gpa_t(*s);
}

void guest_allocator::free_pages(int cpu, gpa_t start, unsigned order) {
    auto it = live_blocks_.find(start.n);
    if (it == live_blocks_.end() || it->second != order)
        fail(errc::double_free, "free of gpa " + std::to_string(start.n) + " order " +
                                    std::to_string(order) + " which is not live at that order");
    live_blocks_.erase(it);
    uint64_t len = uint64_t(1) << order;
    allocated_ -= len;
    if (order == 0) {
        pcp_list& p = pcp_mut(cpu);
        // Keep len ≤ capacity at every boundary: make room first.
        if (p.pages.size() == p.capacity) drain(cpu, p.batch);
        p.pages.push_back(start.n);
        pcp_total_++;
        state_[start.n] = page_state::pcp;
        return;
    }
    if (hooks_) {
        std::vector<gpa_t> pages;
        pages.reserve(len);
        for (uint64_t i = 0; i < len; i++) pages.push_back(gpa_t(start.n + i));
        hooks_->unbind_batch(pages);
    }
    buddy_.free(start.n, order);
    for (uint64_t i = 0; i < len; i++) state_[start.n + i] = page_state::buddy_free;
}

void guest_allocator::pcp_refill(int cpu, uint64_t count) {
    pcp_list& p = pcp_mut(cpu);
    if (count == 0) return;
    if (p.pages.size() + count > p.capacity)
        fail(errc::invalid_params, "refill would overflow pcp capacity");
    if (buddy_.free_pages() < count)
        fail(errc::out_of_guest_memory, "refill of " + std::to_string(count) +
                                            " exceeds free buddy pages");
    refill(cpu, count);
}

void guest_allocator::pcp_drain(int cpu, uint64_t count) {
    if (count == 0) return;
    drain(cpu, count);
}

void guest_allocator::drain_all() {
    for (size_t cpu = 0; cpu < pcps_.size(); cpu++) {
        while (!pcps_[cpu].pages.empty())
            drain(int(cpu), std::min<uint64_t>(pcps_[cpu].batch, pcps_[cpu].pages.size()));
    }
}

void guest_allocator::check_invariants(const binding_table* bindings) const {
    buddy_.check();
    // Reconstruct the partition from the authoritative structures and compare
    // against the shadow map.
    std::vector<page_state> rebuilt(state_.size(), page_state::allocated);
    uint64_t free_n = 0, pcp_n = 0, alloc_n = 0;
    for (unsigned o = 0; o <= buddy_.max_order(); o++)
        for (uint64_t s : buddy_.free_list(o))
            for (uint64_t i = 0; i < (uint64_t(1) << o); i++) {
                rebuilt[s + i] = page_state::buddy_free;
                free_n++;
            }
    for (const auto& p : pcps_) {
        if (p.pages.size() > p.capacity) fail(errc::internal, "pcp above capacity");
        for (uint64_t g : p.pages) {
            if (rebuilt[g] != page_state::allocated)
                fail(errc::internal, "page " + std::to_string(g) + " in two buckets");
            rebuilt[g] = page_state::pcp;
            pcp_n++;
        }
    }
    for (const auto& [s, o] : live_blocks_) {
        for (uint64_t i = 0; i < (uint64_t(1) << o); i++) {
            if (rebuilt[s + i] != page_state::allocated)
                fail(errc::internal, "live block overlaps a free or cached page");
            alloc_n++;
        }
    }
    if (free_n + pcp_n + alloc_n != state_.size())
        fail(errc::internal, "page buckets do not partition the range");
    for (uint64_t i = 0; i < state_.size(); i++)
        if (rebuilt[i] != state_[i])
            fail(errc::internal, "state shadow map drifted at page " + std::to_string(i));
    if (pcp_n != pcp_total_ || alloc_n != allocated_)
        fail(errc::internal, "page accounting counters drifted");
    if (bindings) {
        for (uint64_t i = 0; i < state_.size(); i++) {
            bind_state b = bindings->state(gpa_t(i));
            switch (state_[i]) {
                case page_state::buddy_free:
                    if (b != bind_state::unbound)
                        fail(errc::internal, "free page " + std::to_string(i) + " still backed");
                    break;
                case page_state::pcp:
                    if (b == bind_state::unbound)
                        fail(errc::internal, "cached page " + std::to_string(i) + " unbacked");
                    break;
                case page_state::allocated:
                    if (b != bind_state::bound)
                        fail(errc::internal, "allocated page " + std::to_string(i) + " not bound");
                    break;
            }
        }
    }
}

}  // namespace pvsim
