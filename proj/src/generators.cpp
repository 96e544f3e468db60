#include "pvsim/generators.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "pvsim/address_space.hpp"
#include "pvsim/errors.hpp"

namespace pvsim {

gen_spec parse_gen_spec(const std::string& text) {
    gen_spec s;
    auto colon = text.find(':');
    s.kind = text.substr(0, colon);
    if (s.kind.empty()) fail(errc::invalid_params, "empty generator kind");
    if (colon == std::string::npos) return s;
    std::string rest = text.substr(colon + 1);
    size_t pos = 0;
    while (pos < rest.size()) {
        size_t comma = rest.find(',', pos);
        std::string item = rest.substr(pos, comma == std::string::npos ? std::string::npos
                                                                       : comma - pos);
        auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            fail(errc::invalid_params, "generator param '" + item + "' is not key=value");
        try {
            s.params[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
            fail(errc::invalid_params, "generator param '" + item + "' has a non-numeric value");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return s;
}

std::string gen_spec_to_string(const gen_spec& s) {
    std::string out = s.kind;
    char sep = ':';
    for (const auto& [k, v] : s.params) {
        out += sep;
        sep = ',';
        out += k + "=";
        // trim trailing zeros for readability
        std::string num = std::to_string(v);
        num.erase(num.find_last_not_of('0') + 1);
        if (!num.empty() && num.back() == '.') num.pop_back();
        out += num;
    }
    return out;
}

namespace {

class params_view {
  public:
    params_view(const gen_spec& s, std::initializer_list<const char*> known) : spec_(s) {
        for (const auto& [k, v] : s.params) {
            bool ok = false;
            for (const char* name : known)
                if (k == name) ok = true;
            if (!ok)
                fail(errc::invalid_params,
                     "generator '" + s.kind + "' has no parameter '" + k + "'");
        }
    }

    double get(const char* key, double dflt) const {
        auto it = spec_.params.find(key);
        return it == spec_.params.end() ? dflt : it->second;
    }

    uint64_t get_u64(const char* key, uint64_t dflt) const {
        double v = get(key, double(dflt));
        if (v < 0 || v != std::floor(v))
            fail(errc::invalid_params, std::string("parameter '") + key +
                                           "' must be a non-negative integer");
        return uint64_t(v);
    }

  private:
    const gen_spec& spec_;
};

trace gen_bursty(const gen_spec& spec, uint64_t seed) {
    params_view p(spec, {"ratio", "mean", "steps", "spikes"});
    double ratio = p.get("ratio", 15.4);
    uint64_t mean = p.get_u64("mean", 1000);
    uint64_t steps = p.get_u64("steps", 64);
    uint64_t spikes = p.get_u64("spikes", 2);
    if (ratio < 1.0 || mean == 0 || steps < 2 || spikes == 0 || spikes >= steps)
        fail(errc::invalid_params, "bursty: need ratio>=1, mean>0, 0<spikes<steps");
    // Square wave: `spikes` steps at the peak, the rest at a base level
    // chosen so the series mean stays on target.
    uint64_t peak = uint64_t(std::llround(ratio * double(mean)));
    double base_f = (double(mean) * double(steps) - double(spikes) * double(peak)) /
                    double(steps - spikes);
    if (base_f < 0)
        fail(errc::invalid_params, "bursty: ratio*spikes exceeds steps, base level negative");
    uint64_t base = uint64_t(std::llround(base_f));

    std::mt19937_64 rng(seed);
    std::set<uint64_t> spike_at;
    std::uniform_int_distribution<uint64_t> pos(1, steps - 1);
    while (spike_at.size() < spikes) spike_at.insert(pos(rng));

    trace t;
    uint64_t level = 0;
    for (uint64_t step = 0; step < steps; step++) {
        uint64_t want = spike_at.count(step) ? peak : base;
        if (want > level)
            t.ops.push_back(alloc_burst_op{want - level});
        else if (want < level)
            t.ops.push_back(free_burst_op{level - want});
        level = want;
        t.ops.push_back(sample_point_op{step});
    }
    return t;
}

trace gen_fault_intensive(const gen_spec& spec, uint64_t seed) {
    params_view p(spec, {"n", "aliases", "cow"});
    uint64_t n = p.get_u64("n", 100);
    uint64_t aliases = p.get_u64("aliases", 1);
    double cow = p.get("cow", 0.0);
    if (n == 0 || aliases == 0) fail(errc::invalid_params, "fault-intensive: n, aliases >= 1");
    if (cow < 0.0 || cow > 1.0) fail(errc::invalid_params, "fault-intensive: cow in [0,1]");
    if (cow > 0.0 && aliases < 2)
        fail(errc::invalid_params, "fault-intensive: cow rewrites need a forked alias");

    std::mt19937_64 rng(seed);
    std::vector<uint64_t> order(n);
    for (uint64_t i = 0; i < n; i++) order[i] = i;

    trace t;
    t.ops.push_back(mmap_op{0, 0, n});
    std::shuffle(order.begin(), order.end(), rng);
    for (uint64_t va : order) t.ops.push_back(touch_op{0, va, true, va + 1});
    // Each alias beyond the first is a fork re-touching the same pages:
    // fresh virtual first-touches of already-backed frames.
    for (uint64_t a = 1; a < aliases; a++) {
        t.ops.push_back(fork_op{0});
        int child = int(a);  // forks hand out sequential space ids
        std::shuffle(order.begin(), order.end(), rng);
        for (uint64_t va : order) t.ops.push_back(touch_op{child, va, false, 0});
    }
    uint64_t rewrites = uint64_t(std::llround(cow * double(n)));
    if (rewrites > 0) {
        int child = int(aliases - 1);
        std::shuffle(order.begin(), order.end(), rng);
        for (uint64_t i = 0; i < rewrites; i++)
            t.ops.push_back(touch_op{child, order[i], true, 100000 + order[i]});
    }
    return t;
}

trace gen_syscall_intensive(const gen_spec& spec, uint64_t seed) {
    params_view p(spec, {"n", "threads", "virqs"});
    uint64_t n = p.get_u64("n", 1000);
    uint64_t threads = p.get_u64("threads", 1);
    uint64_t virqs = p.get_u64("virqs", 0);
    if (n == 0 || threads == 0) fail(errc::invalid_params, "syscall-intensive: n, threads >= 1");
    (void)seed;  // stream is deterministic without randomness
    trace t;
    uint64_t virq_every = virqs > 0 ? std::max<uint64_t>(1, n / virqs) : 0;
    for (uint64_t i = 0; i < n; i++) {
        t.ops.push_back(syscall_op{int(i % threads), 39});
        if (virq_every && (i + 1) % virq_every == 0)
            t.ops.push_back(inject_virq_op{0, 32 + int(i % 16)});
    }
    return t;
}

trace gen_unmap_heavy(const gen_spec& spec, uint64_t seed) {
    params_view p(spec, {"cycles", "pages"});
    uint64_t cycles = p.get_u64("cycles", 8);
    uint64_t pages = p.get_u64("pages", 64);
    if (cycles == 0 || pages == 0) fail(errc::invalid_params, "unmap-heavy: cycles, pages >= 1");
    (void)seed;
    trace t;
    for (uint64_t c = 0; c < cycles; c++) {
        t.ops.push_back(mmap_op{0, 0, pages});
        for (uint64_t i = 0; i < pages; i++)
            t.ops.push_back(touch_op{0, i, true, c * pages + i + 1});
        t.ops.push_back(munmap_op{0, 0, pages});
        t.ops.push_back(sample_point_op{c});
    }
    return t;
}

// Seeded mix of every memory-side op, with enough tracking to only emit
// valid streams (touches inside live regions, frees within the burst
// balance, bounded fork fan-out).
trace gen_mixed(const gen_spec& spec, uint64_t seed) {
    params_view p(spec, {"ops", "spaces_max", "va_span"});
    uint64_t ops = p.get_u64("ops", 500);
    uint64_t spaces_max = p.get_u64("spaces_max", 4);
    uint64_t va_span = p.get_u64("va_span", 256);
    if (ops == 0 || spaces_max == 0 || va_span < 32)
        fail(errc::invalid_params, "mixed: need ops>=1, spaces_max>=1, va_span>=32");

    std::mt19937_64 rng(seed);
    auto rnd = [&](uint64_t lo, uint64_t hi) {  // inclusive
        return std::uniform_int_distribution<uint64_t>(lo, hi)(rng);
    };

    struct space_model {
        std::vector<region> regions;
    };
    std::vector<space_model> spaces(1);
    uint64_t burst_balance = 0;
    uint64_t next_tag = 1;
    uint64_t sample_t = 0;

    trace t;
    for (uint64_t i = 0; i < ops; i++) {
        uint64_t roll = rnd(0, 99);
        if (roll < 55) {  // touch
            // collect spaces that have mappable pages
            std::vector<size_t> cands;
            for (size_t s = 0; s < spaces.size(); s++)
                if (!spaces[s].regions.empty()) cands.push_back(s);
            if (cands.empty()) {
                roll = 100;  // nothing mapped yet; fall through to mmap
            } else {
                size_t s = cands[rnd(0, cands.size() - 1)];
                const auto& regs = spaces[s].regions;
                const region& r = regs[rnd(0, regs.size() - 1)];
                uint64_t va = r.start + rnd(0, r.len - 1);
                bool write = rnd(0, 9) < 7;
                t.ops.push_back(touch_op{int(s), va, write, write ? next_tag++ : 0});
                continue;
            }
        }
        if (roll < 65 || roll >= 100) {  // mmap
            size_t s = rnd(0, spaces.size() - 1);
            bool placed = false;
            for (int attempt = 0; attempt < 8 && !placed; attempt++) {
                uint64_t len = rnd(1, 24);
                uint64_t start = rnd(0, va_span - len);
                bool clash = false;
                for (const auto& r : spaces[s].regions)
                    if (start < r.end() && r.start < start + len) clash = true;
                if (clash) continue;
                spaces[s].regions.push_back({start, len});
                t.ops.push_back(mmap_op{int(s), start, len});
                placed = true;
            }
            if (!placed) t.ops.push_back(sample_point_op{sample_t++});
            continue;
        }
        if (roll < 73) {  // munmap a slice of an existing region
            std::vector<size_t> cands;
            for (size_t s = 0; s < spaces.size(); s++)
                if (!spaces[s].regions.empty()) cands.push_back(s);
            if (cands.empty()) {
                t.ops.push_back(sample_point_op{sample_t++});
                continue;
            }
            size_t s = cands[rnd(0, cands.size() - 1)];
            auto& regs = spaces[s].regions;
            size_t ri = rnd(0, regs.size() - 1);
            region r = regs[ri];
            uint64_t off = rnd(0, r.len - 1);
            uint64_t len = rnd(1, r.len - off);
            t.ops.push_back(munmap_op{int(s), r.start + off, len});
            // mirror the split in the tracking model
            regs.erase(regs.begin() + ri);
            if (off > 0) regs.push_back({r.start, off});
            if (off + len < r.len) regs.push_back({r.start + off + len, r.len - off - len});
            continue;
        }
        if (roll < 78) {  // fork
            if (spaces.size() >= spaces_max) {
                t.ops.push_back(sample_point_op{sample_t++});
                continue;
            }
            size_t parent = rnd(0, spaces.size() - 1);
            t.ops.push_back(fork_op{int(parent)});
            spaces.push_back(spaces[parent]);  // child id == index by construction
            continue;
        }
        if (roll < 86) {  // alloc burst
            uint64_t pages = rnd(1, 48);
            burst_balance += pages;
            t.ops.push_back(alloc_burst_op{pages});
            continue;
        }
        if (roll < 92) {  // free burst
            if (burst_balance == 0) {
                t.ops.push_back(sample_point_op{sample_t++});
                continue;
            }
            uint64_t pages = rnd(1, std::min<uint64_t>(48, burst_balance));
            burst_balance -= pages;
            t.ops.push_back(free_burst_op{pages});
            continue;
        }
        if (roll < 96) {  // syscall
            t.ops.push_back(syscall_op{0, int(rnd(0, 63))});
            continue;
        }
        t.ops.push_back(sample_point_op{sample_t++});
    }
    return t;
}

}  // namespace

trace generate(const gen_spec& spec, uint64_t seed) {
    if (spec.kind == "bursty") return gen_bursty(spec, seed);
    if (spec.kind == "fault-intensive") return gen_fault_intensive(spec, seed);
    if (spec.kind == "syscall-intensive") return gen_syscall_intensive(spec, seed);
    if (spec.kind == "unmap-heavy") return gen_unmap_heavy(spec, seed);
    if (spec.kind == "mixed") return gen_mixed(spec, seed);
    fail(errc::invalid_params, "unknown generator kind '" + spec.kind + "'");
}

}  // namespace pvsim
