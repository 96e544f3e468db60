#include <random>
#include <vector>

#include "doctest.h"
#include "pvsim/errors.hpp"
#include "pvsim/guest_alloc.hpp"

using namespace pvsim;

namespace {

// Counts batch hypercalls without any host machinery behind them.
struct recording_hooks final : allocator_hooks {
    std::vector<size_t> bind_sizes;
    std::vector<size_t> unbind_sizes;
    uint64_t allocs = 0;

    void bind_batch(std::span<const gpa_t> g) override { bind_sizes.push_back(g.size()); }
    void unbind_batch(std::span<const gpa_t> g) override { unbind_sizes.push_back(g.size()); }
    void on_alloc(gpa_t) override { allocs++; }

    size_t binds() const { return bind_sizes.size(); }
    size_t unbinds() const { return unbind_sizes.size(); }
};

alloc_config small_cfg() {
    alloc_config cfg;
    cfg.total_pages = 4096;
    cfg.pcp_capacity = 128;
    cfg.pcp_batch = 32;
    cfg.pcp_bound_fraction = 0.25;
    return cfg;
}

}  // namespace

TEST_CASE("refill and drain ride batch hypercalls only") {
    recording_hooks h;
    guest_allocator a(small_cfg(), &h);

    std::vector<gpa_t> pages;
    for (int i = 0; i < 1024; i++) pages.push_back(a.get_free_pages(0, 0));
    CHECK(h.binds() == 1024 / 32);  // one batched call per refill
    CHECK(h.allocs == 1024);
    CHECK(h.unbinds() == 0);

    for (auto g : pages) a.free_pages(0, g, 0);
    // Frees fill the cache to capacity first, then drain one batch per batch.
    CHECK(h.unbinds() == (1024 - 128) / 32);
    CHECK(a.pcp_pages() == 128);

    a.drain_all();
    CHECK(h.unbinds() == 1024 / 32);
    CHECK(a.pcp_pages() == 0);
    size_t total_bound = 0, total_unbound = 0;
    for (auto s : h.bind_sizes) total_bound += s;
    for (auto s : h.unbind_sizes) total_unbound += s;
    CHECK(total_bound == total_unbound);
    a.check_invariants();
}

TEST_CASE("no hypercall when the cache absorbs the op") {
    recording_hooks h;
    guest_allocator a(small_cfg(), &h);

    gpa_t g = a.get_free_pages(0, 0);  // one refill
    size_t binds_after_warmup = h.binds();
    CHECK(binds_after_warmup == 1);

    // alloc/free pairs that never empty or fill the cache
    for (int i = 0; i < 200; i++) {
        gpa_t p = a.get_free_pages(0, 0);
        a.free_pages(0, p, 0);
    }
    CHECK(h.binds() == binds_after_warmup);
    CHECK(h.unbinds() == 0);
    a.free_pages(0, g, 0);
    a.check_invariants();
}

TEST_CASE("large orders bypass the cache; whole block binds at once") {
    recording_hooks h;
    guest_allocator a(small_cfg(), &h);

    gpa_t blk = a.get_free_pages(0, 3);
    REQUIRE(h.bind_sizes.size() == 1);
    CHECK(h.bind_sizes[0] == 8);
    CHECK(h.allocs == 8);  // every page of the block went live

    a.free_pages(0, blk, 3);
    REQUIRE(h.unbind_sizes.size() == 1);
    CHECK(h.unbind_sizes[0] == 8);
    CHECK(a.pcp_pages() == 0);
    a.check_invariants();
}

TEST_CASE("double free is caught in every bucket") {
    guest_allocator a(small_cfg());
    gpa_t g = a.get_free_pages(0, 0);
    a.free_pages(0, g, 0);
    CHECK_THROWS_AS(a.free_pages(0, g, 0), sim_error);  // sits in the cache

    gpa_t blk = a.get_free_pages(0, 2);
    a.free_pages(0, blk, 2);
    CHECK_THROWS_AS(a.free_pages(0, blk, 2), sim_error);  // back in the buddy

    // Freeing a block at the wrong order never matches the live record.
    gpa_t blk2 = a.get_free_pages(0, 2);
    CHECK_THROWS_AS(a.free_pages(0, blk2, 1), sim_error);
}

TEST_CASE("guest exhaustion reports out of memory") {
    alloc_config cfg;
    cfg.total_pages = 64;
    cfg.pcp_capacity = 8;
    cfg.pcp_batch = 4;
    cfg.pcp_bound_fraction = 0.2;
    guest_allocator a(cfg);
    std::vector<gpa_t> got;
    for (int i = 0; i < 64; i++) got.push_back(a.get_free_pages(0, 0));
    CHECK_THROWS_AS(a.get_free_pages(0, 0), sim_error);
    for (auto g : got) a.free_pages(0, g, 0);
    a.check_invariants();
}

TEST_CASE("cache capacity bound is enforced at construction") {
    alloc_config cfg;
    cfg.total_pages = 1024;
    cfg.cpus = 4;
    cfg.pcp_capacity = 128;  // 4*128 = 512 > 1% of 1024
    cfg.pcp_batch = 32;
    CHECK_THROWS_AS(guest_allocator{cfg}, sim_error);
    cfg.enforce_pcp_bound = false;
    CHECK_NOTHROW(guest_allocator{cfg});  // explicit opt-out
    cfg.enforce_pcp_bound = true;
    cfg.pcp_bound_fraction = 0.5;
    CHECK_NOTHROW(guest_allocator{cfg});
}

TEST_CASE("per-cpu caches are independent") {
    alloc_config cfg = small_cfg();
    cfg.cpus = 2;
    recording_hooks h;
    guest_allocator a(cfg, &h);

    gpa_t a0 = a.get_free_pages(0, 0);
    gpa_t a1 = a.get_free_pages(1, 0);
    CHECK(h.binds() == 2);  // one refill per cpu
    CHECK(a.pcp(0).pages.size() == 31);
    CHECK(a.pcp(1).pages.size() == 31);
    a.free_pages(1, a0, 0);  // cross-cpu free lands in cpu 1's cache
    CHECK(a.pcp(1).pages.size() == 32);
    a.free_pages(0, a1, 0);
    a.check_invariants();
}

TEST_CASE("randomized ops preserve the three-bucket partition") {
    recording_hooks h;
    alloc_config cfg = small_cfg();
    cfg.cpus = 2;
    guest_allocator a(cfg, &h);
    std::mt19937_64 rng(0xa110cu);
    std::vector<std::pair<gpa_t, unsigned>> live;

    for (int step = 0; step < 3000; step++) {
        int cpu = int(rng() % 2);
        if (live.empty() || rng() % 100 < 55) {
            unsigned order = rng() % 8 == 0 ? 1 + unsigned(rng() % 3) : 0;
            try {
                live.push_back({a.get_free_pages(cpu, order), order});
            } catch (const sim_error&) {
                // exhaustion under fragmentation is legal here
            }
        } else {
            size_t i = rng() % live.size();
            a.free_pages(cpu, live[i].first, live[i].second);
            live.erase(live.begin() + i);
        }
        if (step % 256 == 0) a.check_invariants();
    }
    a.check_invariants();
    uint64_t held = 0;
    for (auto s : h.bind_sizes) held += s;
    for (auto s : h.unbind_sizes) held -= s;
    CHECK(held == a.allocated_pages() + a.pcp_pages());
}
