#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pvsim {

// Simulated machine faults and API misuse share one exception type so the
// replay loop can wrap any of them into a trace error with an op index.
enum class errc {
    invalid_entry,        // A/D update or malformed install on an absent/bad entry
    unaligned_huge,       // huge install with unaligned frame or virtual page
    overlapping_huge,     // huge/base entries would cover the same virtual page
    double_registration,  // direct-map region registered twice
    out_of_guest_memory,
    out_of_host_memory,
    double_free,          // free of a page not currently allocated at that order
    bad_state,            // binding-state precondition violated (bind/unbind/alloc)
    unbound_gpa,          // pte install against an unbound guest frame
    absent_entry,         // A/D read through a missing mapping
    wrong_domain,         // gate entered from the wrong protection-key domain
    context_missing,      // thread has no vcpu slot
    migration_in_gate,    // thread migration while inside a gate
    empty_series,         // analytics over an empty sample series
    unknown_profile,
    invalid_params,
    bad_access,           // touch outside any mapped region
    io,                   // file/parse problems
    internal,             // invariant broken inside the simulator itself
};

std::string_view errc_name(errc c);

class sim_error : public std::runtime_error {
  public:
    sim_error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    errc code() const { return code_; }

  private:
    errc code_;
};

// Raised by replay: remembers which trace op blew up.
class trace_error : public std::runtime_error {
  public:
    trace_error(size_t op_index, errc code, const std::string& what)
        : std::runtime_error("op " + std::to_string(op_index) + ": " +
                             std::string(errc_name(code)) + ": " + what),
          op_index_(op_index), code_(code) {}

    size_t op_index() const { return op_index_; }
    errc code() const { return code_; }

  private:
    size_t op_index_;
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) {
    throw sim_error(code, what);
}

}  // namespace pvsim
