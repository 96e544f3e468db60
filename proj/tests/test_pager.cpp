#include <map>
#include <vector>

#include "doctest.h"
#include "pvsim/address_space.hpp"
#include "pvsim/errors.hpp"
#include "pvsim/counters.hpp"
#include "pvsim/host_frames.hpp"
#include "pvsim/pager.hpp"

using namespace pvsim;

namespace {

struct rig {
    host_frame_allocator host{4096};
    counters c;
    pager p;
    std::map<int, address_space> spaces;

    explicit rig(bool dual = true) : p(host, c, dual) {
        p.register_direct_mapping(gva_t(1 << 20), 4096);
        spaces.emplace(0, address_space(0));
    }

    address_space& sp() { return spaces.at(0); }

    std::vector<gpa_t> bind(std::initializer_list<uint64_t> gs) {
        std::vector<gpa_t> v;
        for (auto g : gs) v.push_back(gpa_t(g));
        p.bind_batch(v);
        return v;
    }
};

}  // namespace

TEST_CASE("direct mapping registers once") {
    host_frame_allocator host(64);
    counters c;
    pager p(host, c);
    CHECK_THROWS_AS(p.direct_map_gva(gpa_t(0)), sim_error);  // not registered yet
    p.register_direct_mapping(gva_t(1 << 20), 64);
    CHECK(p.direct_map_gva(gpa_t(5)).n == (1 << 20) + 5);
    CHECK_THROWS_AS(p.direct_map_gva(gpa_t(64)), sim_error);  // past the window
    CHECK_THROWS_AS(p.register_direct_mapping(gva_t(0), 64), sim_error);
}

TEST_CASE("bind batch is one hypercall and pre-binds everything") {
    rig r;
    auto gs = r.bind({10, 11, 12});
    CHECK(r.c.hypercalls == 1);
    CHECK(r.c.world_switches == 1);
    for (auto g : gs) CHECK(r.p.bindings().state(g) == bind_state::pre_bound);
    CHECK(r.host.allocated_pages() == 3);
    CHECK(r.p.host_pages_held() == 3);

    // Binding something already backed must fail before any side effects.
    std::vector<gpa_t> bad{gpa_t(11)};
    CHECK_THROWS_AS(r.p.bind_batch(bad), sim_error);
    CHECK(r.c.hypercalls == 1);
    CHECK(r.host.allocated_pages() == 3);
}

TEST_CASE("on_alloc promotes and fills the direct mapping, hypercall-free") {
    rig r;
    r.bind({7});
    r.p.on_alloc(gpa_t(7));
    CHECK(r.c.hypercalls == 1);  // unchanged
    CHECK(r.p.bindings().state(gpa_t(7)) == bind_state::bound);

    gva_t dv = r.p.direct_map_gva(gpa_t(7));
    auto ge = r.p.dm_pt().translate(dv);
    REQUIRE(ge);
    CHECK(ge->frame == 7);  // guest-side mapping carries the gpa
    CHECK(!ge->entry.user);
    auto se = r.p.dm_spt().translate(dv);
    REQUIRE(se);
    CHECK(se->frame == r.p.bindings().hpa(gpa_t(7)).n);

    CHECK_NOTHROW(r.p.on_alloc(gpa_t(7)));  // re-alloc of a bound page: no-op
    CHECK_THROWS_AS(r.p.on_alloc(gpa_t(8)), sim_error);  // never bound
}

TEST_CASE("set_pte keeps guest and shadow tables coherent") {
    rig r;
    r.bind({3});
    r.p.on_alloc(gpa_t(3));

    CHECK_THROWS_AS(r.p.set_pte(r.sp(), gva_t(100), gpa_t(99), {}), sim_error);  // unbound

    r.p.set_pte(r.sp(), gva_t(100), gpa_t(3), {.writable = true, .user = true});
    CHECK(r.c.pager_calls == 1);
    auto ge = r.sp().guest_pt.translate(gva_t(100));
    REQUIRE(ge);
    CHECK(ge->frame == 3);
    auto se = r.sp().shadow_pt.translate(gva_t(100));
    REQUIRE(se);
    CHECK(se->frame == r.p.bindings().hpa(gpa_t(3)).n);
    CHECK(se->entry.writable);
    r.p.check_coherence(r.spaces);

    // Replacing a live translation forces a flush; fresh installs do not.
    uint64_t flushes = r.c.tlb_flushes;
    r.bind({4});
    r.p.on_alloc(gpa_t(4));
    r.p.set_pte(r.sp(), gva_t(100), gpa_t(4), {.writable = false, .user = true});
    CHECK(r.c.tlb_flushes == flushes + 1);
    CHECK(r.c.pager_calls == 2);
    r.p.check_coherence(r.spaces);
}

TEST_CASE("accessed and dirty live only in the walked table") {
    rig r;
    r.bind({3});
    r.p.on_alloc(gpa_t(3));
    r.p.set_pte(r.sp(), gva_t(5), gpa_t(3), {});

    auto [a0, d0] = r.p.read_pte_ad(r.sp(), gva_t(5));
    CHECK(!a0);
    CHECK(!d0);

    r.p.mark_access(r.sp(), gva_t(5), false);
    auto [a1, d1] = r.p.read_pte_ad(r.sp(), gva_t(5));
    CHECK(a1);
    CHECK(!d1);

    r.p.mark_access(r.sp(), gva_t(5), true);
    auto [a2, d2] = r.p.read_pte_ad(r.sp(), gva_t(5));
    CHECK(a2);
    CHECK(d2);

    // The guest's own entry never accumulates A/D; hardware walks the shadow.
    auto ge = r.sp().guest_pt.translate(gva_t(5));
    CHECK(!ge->entry.accessed);
    CHECK(!ge->entry.dirty);

    CHECK_THROWS_AS(r.p.read_pte_ad(r.sp(), gva_t(6)), sim_error);  // absent
}

TEST_CASE("clear_pte unmaps both tables but keeps the binding") {
    rig r;
    r.bind({3});
    r.p.on_alloc(gpa_t(3));
    r.p.set_pte(r.sp(), gva_t(5), gpa_t(3), {});
    uint64_t flushes = r.c.tlb_flushes;

    r.p.clear_pte(r.sp(), gva_t(5));
    CHECK(!r.sp().guest_pt.translate(gva_t(5)));
    CHECK(!r.sp().shadow_pt.translate(gva_t(5)));
    CHECK(r.c.tlb_flushes == flushes + 1);
    CHECK(r.p.bindings().state(gpa_t(3)) == bind_state::bound);
    r.p.check_coherence(r.spaces);
}

TEST_CASE("unbind releases host pages and the direct mapping") {
    rig r;
    auto gs = r.bind({20, 21});
    for (auto g : gs) r.p.on_alloc(g);
    CHECK(r.host.allocated_pages() == 2);

    r.p.unbind_batch(gs);
    CHECK(r.c.hypercalls == 2);
    CHECK(r.host.allocated_pages() == 0);
    CHECK(r.p.host_pages_held() == 0);
    for (auto g : gs) {
        CHECK(r.p.bindings().state(g) == bind_state::unbound);
        CHECK(!r.p.dm_pt().translate(r.p.direct_map_gva(g)));
    }
    r.p.check_coherence(r.spaces);
}

TEST_CASE("host exhaustion fails the whole batch up front") {
    host_frame_allocator host(2);
    counters c;
    pager p(host, c);
    p.register_direct_mapping(gva_t(1 << 20), 16);
    std::vector<gpa_t> gs{gpa_t(0), gpa_t(1), gpa_t(2)};
    CHECK_THROWS_AS(p.bind_batch(gs), sim_error);
    CHECK(host.allocated_pages() == 0);  // nothing leaked
    CHECK(c.hypercalls == 0);
}

TEST_CASE("coherence sweep catches a desynced shadow") {
    rig r;
    r.bind({3});
    r.p.on_alloc(gpa_t(3));
    r.p.set_pte(r.sp(), gva_t(9), gpa_t(3), {});
    r.p.check_coherence(r.spaces);

    // Corrupt the shadow behind the pager's back.
    r.sp().shadow_pt.install_mediated(gva_t(9), {.frame = 4040});
    CHECK_THROWS_AS(r.p.check_coherence(r.spaces), sim_error);
}

TEST_CASE("single-table mode stays coherent too") {
    rig r(false);
    CHECK(!r.p.dual_table());
    r.bind({3});
    r.p.on_alloc(gpa_t(3));
    r.p.set_pte(r.sp(), gva_t(7), gpa_t(3), {});
    CHECK(r.c.pager_calls == 1);
    REQUIRE(r.sp().shadow_pt.translate(gva_t(7)));
    r.p.check_coherence(r.spaces);
    r.p.clear_pte(r.sp(), gva_t(7));
    r.p.check_coherence(r.spaces);
}
