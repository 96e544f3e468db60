#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace pvsim {

// Workload traces are flat op streams; page numbers, not byte addresses.
// Serialized as JSON Lines: a {"v":1} header, then one op object per line
// with an "op" discriminator.

struct touch_op {
    int space = 0;
    uint64_t gva = 0;
    bool write = false;
    uint64_t tag = 0;  // value written; ignored for reads
};

struct mmap_op {
    int space = 0;
    uint64_t start = 0;
    uint64_t len = 0;
};

struct munmap_op {
    int space = 0;
    uint64_t start = 0;
    uint64_t len = 0;
};

struct fork_op {
    int space = 0;  // parent; the child gets the next sequential space id
};

struct syscall_op {
    int thread = 0;
    int nr = 0;
};

struct alloc_burst_op {
    uint64_t pages = 0;  // order-0 kernel allocations
};

struct free_burst_op {
    uint64_t pages = 0;  // returns the oldest burst pages
};

struct inject_virq_op {
    int vcpu = 0;
    int vector = 0;
};

struct migrate_thread_op {
    int thread = 0;
    int vcpu = 0;
};

struct sample_point_op {
    uint64_t t = 0;  // logical timestamp carried into the elasticity series
};

using trace_op = std::variant<touch_op, mmap_op, munmap_op, fork_op, syscall_op,
                              alloc_burst_op, free_burst_op, inject_virq_op,
                              migrate_thread_op, sample_point_op>;

struct trace {
    std::vector<trace_op> ops;
};

inline constexpr int trace_format_version = 1;

std::string op_kind(const trace_op& op);
nlohmann::json op_to_json(const trace_op& op);
trace_op op_from_json(const nlohmann::json& j);

void write_trace(const trace& t, std::ostream& out);
std::string trace_to_string(const trace& t);
trace parse_trace(std::istream& in);
trace parse_trace_string(const std::string& text);
trace load_trace(const std::string& path);
void save_trace(const trace& t, const std::string& path);

}  // namespace pvsim
