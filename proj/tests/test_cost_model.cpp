#include <cstdio>
#include <random>

#include "doctest.h"
#include "pvsim/cost_model.hpp"
#include "pvsim/errors.hpp"

using namespace pvsim;

namespace {

counters random_counters(std::mt19937_64& rng) {
    counters c;
    counters::visit(c, [&](const char*, uint64_t& v) { v = rng() % 1000; });
    return c;
}

}  // namespace

TEST_CASE("published one-syscall latencies, exactly") {
    auto t = syscall_latency_table();
    CHECK(t.at("paracell") == 107);
    CHECK(t.at("paracell_no_depriv") == 256);
    CHECK(t.at("pvm") == 320);
    CHECK(t.at("runv") == 96);
    CHECK(t.at("runc") == 404);
}

TEST_CASE("syscall latency ordering") {
    auto t = syscall_latency_table();
    CHECK(t.at("runv") < t.at("paracell"));
    CHECK(t.at("paracell") < t.at("paracell_no_depriv"));
    CHECK(t.at("paracell_no_depriv") < t.at("pvm"));
    CHECK(t.at("pvm") < t.at("runc"));
}

TEST_CASE("latency is strictly linear in the counters") {
    std::mt19937_64 rng(0xc057u);
    for (const auto& name : builtin_profile_names()) {
        const auto& p = builtin_profile(name);
        for (int i = 0; i < 50; i++) {
            counters a = random_counters(rng);
            counters b = random_counters(rng);
            CHECK(path_latency(p, a) + path_latency(p, b) == path_latency(p, a + b));
        }
        CHECK(path_latency(p, counters{}) == 0);
    }
}

TEST_CASE("nested pricing adds exactly the world-switch extras") {
    std::mt19937_64 rng(0x9e57u);
    latency_profile p = builtin_profile("paracell");
    for (int i = 0; i < 200; i++) {
        counters c = random_counters(rng);
        p.nested = false;
        uint64_t bare = path_latency(p, c);
        p.nested = true;
        uint64_t nested = path_latency(p, c);
        uint64_t want = (p.nested_exit_extra * c.world_switches +
                         p.nested_second_stage_extra * c.second_stage_faults) *
                        p.world_switch;
        CHECK(nested - bare == want);
    }
}

TEST_CASE("anonymous-fault breakdown: totals, shares, other bucket") {
    auto b = fault_breakdown(builtin_profile("paracell"));
    CHECK(b.total_ns == 3991);
    CHECK(b.other_ns == 682);
    REQUIRE(b.parts.size() == 5);

    CHECK(b.parts[0].name == "metadata_user_pte");
    CHECK(b.parts[0].ns == 771);
    CHECK(b.parts[0].share_pct == 19);
    CHECK(b.parts[1].name == "metadata_dm_pte");
    CHECK(b.parts[1].ns == 466);
    CHECK(b.parts[1].share_pct == 12);
    CHECK(b.parts[2].name == "set_pte");
    CHECK(b.parts[2].ns == 275);
    CHECK(b.parts[2].share_pct == 7);
    CHECK(b.parts[3].name == "amortized_bind");
    CHECK(b.parts[3].ns == 175);
    CHECK(b.parts[3].share_pct == 4);
    CHECK(b.parts[4].name == "gk_gu_switch");
    CHECK(b.parts[4].ns == 1622);

    uint64_t named = 0;
    for (const auto& part : b.parts) named += part.ns;
    CHECK(named + b.other_ns == b.total_ns);
}

TEST_CASE("single-table mode drops exactly the table-mirroring work") {
    latency_profile p = builtin_profile("paracell");
    p.dual_table = false;
    auto b = fault_breakdown(p);
    CHECK(b.total_ns == 3991 - 771 - 466);
    CHECK(b.other_ns == 682);  // the unexplained remainder is untouched
    for (const auto& part : b.parts) {
        CHECK(part.name != "metadata_user_pte");
        CHECK(part.name != "metadata_dm_pte");
    }
}

TEST_CASE("breakdown skips zero components") {
    auto b = fault_breakdown(builtin_profile("runv"));
    REQUIRE(b.parts.size() == 1);
    CHECK(b.parts[0].name == "gk_gu_switch");
    CHECK(b.parts[0].ns == 1028);
    CHECK(b.total_ns == 1028);  // no configured total: named parts stand alone
    CHECK(b.other_ns == 0);
}

TEST_CASE("unknown profile is a clean error") {
    CHECK_THROWS_AS(builtin_profile("qemu"), sim_error);
}

TEST_CASE("calibration json round trip") {
    const auto& p = builtin_profile("paracell");
    latency_profile q = profile_from_json(profile_to_json(p));
    CHECK(q.name == p.name);
    CHECK(q.syscall_base == p.syscall_base);
    CHECK(q.gate_switch == p.gate_switch);
    CHECK(q.fault_total == p.fault_total);
    CHECK(q.dual_table == p.dual_table);
    CHECK(path_latency(q, canonical_syscall_counters(q)) == 107);
}

TEST_CASE("calibration files inherit from a named base") {
    nlohmann::json j{{"schema_version", 1},
                     {"base", "paracell"},
                     {"name", "tuned"},
                     {"world_switch", 2000u}};
    latency_profile p = profile_from_json(j);
    CHECK(p.name == "tuned");
    CHECK(p.world_switch == 2000);
    CHECK(p.syscall_base == 97);  // untouched base values carry over
}

TEST_CASE("calibration validation") {
    CHECK_THROWS_AS(profile_from_json(nlohmann::json{{"name", "x"}}), sim_error);  // no version
    CHECK_THROWS_AS(profile_from_json(nlohmann::json{{"schema_version", 2}}), sim_error);
    nlohmann::json bad{{"schema_version", 1}, {"world_switch", -5}};
    CHECK_THROWS_AS(profile_from_json(bad), sim_error);
    nlohmann::json frac{{"schema_version", 1}, {"world_switch", 1.5}};
    CHECK_THROWS_AS(profile_from_json(frac), sim_error);
    CHECK_THROWS_AS(load_calibration("/nonexistent/file.json"), sim_error);
}

TEST_CASE("shipped default calibration matches the builtin") {
    latency_profile file = load_calibration(std::string(PVSIM_DATA_DIR) +
                                            "/paracell_default.json");
    const auto& builtin = builtin_profile("paracell");
    CHECK(profile_to_json(file) == profile_to_json(builtin));
}
