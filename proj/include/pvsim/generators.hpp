#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "pvsim/trace.hpp"

namespace pvsim {

// Synthetic workload generators. A spec is a kind plus numeric parameters;
// the CLI micro-syntax is "kind:key=val,key=val" (e.g.
// "fault-intensive:n=100,aliases=2"). Generation is a pure function of
// (spec, seed).
struct gen_spec {
    std::string kind;
    std::map<std::string, double> params;
};

gen_spec parse_gen_spec(const std::string& text);
std::string gen_spec_to_string(const gen_spec& s);

// Kinds:
//   bursty            ratio, mean, steps, spikes — square-wave kernel
//                     allocation with peak/mean = ratio, sampled every step
//   fault-intensive   n, aliases, cow — n fresh first-touch pages; each extra
//                     alias forks and re-touches the same pages; cow is the
//                     fraction the last child rewrites
//   syscall-intensive n, threads, virqs — no-op syscall storm
//   unmap-heavy       cycles, pages — map/touch/unmap churn over one range
//   mixed             ops, spaces_max, va_span — seeded mix of all memory ops
//                     (the cross-backend equivalence workhorse)
trace generate(const gen_spec& spec, uint64_t seed);

}  // namespace pvsim
