#include "pvsim/trace.hpp"

#include <fstream>
#include <sstream>

#include "pvsim/errors.hpp"

namespace pvsim {

using nlohmann::json;

std::string op_kind(const trace_op& op) {
    return std::visit(
        [](const auto& o) -> std::string {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, touch_op>) return "touch";
            else if constexpr (std::is_same_v<T, mmap_op>) return "mmap";
            else if constexpr (std::is_same_v<T, munmap_op>) return "munmap";
            else if constexpr (std::is_same_v<T, fork_op>) return "fork";
            else if constexpr (std::is_same_v<T, syscall_op>) return "syscall";
            else if constexpr (std::is_same_v<T, alloc_burst_op>) return "alloc_burst";
            else if constexpr (std::is_same_v<T, free_burst_op>) return "free_burst";
            else if constexpr (std::is_same_v<T, inject_virq_op>) return "inject_virq";
            else if constexpr (std::is_same_v<T, migrate_thread_op>) return "migrate_thread";
            else return "sample";
        },
        op);
}

json op_to_json(const trace_op& op) {
    json j;
    j["op"] = op_kind(op);
    std::visit(
        [&](const auto& o) {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, touch_op>) {
                j["space"] = o.space;
                j["gva"] = o.gva;
                j["access"] = o.write ? "w" : "r";
                if (o.write) j["tag"] = o.tag;
            } else if constexpr (std::is_same_v<T, mmap_op> || std::is_same_v<T, munmap_op>) {
                j["space"] = o.space;
                j["start"] = o.start;
                j["len"] = o.len;
            } else if constexpr (std::is_same_v<T, fork_op>) {
                j["space"] = o.space;
            } else if constexpr (std::is_same_v<T, syscall_op>) {
                j["thread"] = o.thread;
                j["nr"] = o.nr;
            } else if constexpr (std::is_same_v<T, alloc_burst_op> ||
                                 std::is_same_v<T, free_burst_op>) {
                j["pages"] = o.pages;
            } else if constexpr (std::is_same_v<T, inject_virq_op>) {
                j["vcpu"] = o.vcpu;
                j["vector"] = o.vector;
            } else if constexpr (std::is_same_v<T, migrate_thread_op>) {
                j["thread"] = o.thread;
                j["vcpu"] = o.vcpu;
            } else {
                j["t"] = o.t;
            }
        },
        op);
    return j;
}

namespace {

template <typename T>
T get_field(const json& j, const char* key) {
    if (!j.contains(key))
        fail(errc::io, "trace op '" + j.value("op", std::string("?")) +
                           "' missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        fail(errc::io, std::string("trace field '") + key + "' has the wrong type");
    }
}

}  // namespace

trace_op op_from_json(const json& j) {
    std::string kind = get_field<std::string>(j, "op");
    if (kind == "touch") {
        touch_op o;
        o.space = get_field<int>(j, "space");
        o.gva = get_field<uint64_t>(j, "gva");
        std::string a = get_field<std::string>(j, "access");
        if (a != "r" && a != "w") fail(errc::io, "touch access must be 'r' or 'w'");
        o.write = a == "w";
        o.tag = j.value("tag", uint64_t(0));
        return o;
    }
    if (kind == "mmap")
        return mmap_op{get_field<int>(j, "space"), get_field<uint64_t>(j, "start"),
                       get_field<uint64_t>(j, "len")};
    if (kind == "munmap")
        return munmap_op{get_field<int>(j, "space"), get_field<uint64_t>(j, "start"),
                         get_field<uint64_t>(j, "len")};
    if (kind == "fork") return fork_op{get_field<int>(j, "space")};
    if (kind == "syscall")
        return syscall_op{get_field<int>(j, "thread"), get_field<int>(j, "nr")};
    if (kind == "alloc_burst") return alloc_burst_op{get_field<uint64_t>(j, "pages")};
    if (kind == "free_burst") return free_burst_op{get_field<uint64_t>(j, "pages")};
    if (kind == "inject_virq")
        return inject_virq_op{get_field<int>(j, "vcpu"), get_field<int>(j, "vector")};
    if (kind == "migrate_thread")
        return migrate_thread_op{get_field<int>(j, "thread"), get_field<int>(j, "vcpu")};
    if (kind == "sample") return sample_point_op{get_field<uint64_t>(j, "t")};
    fail(errc::io, "unknown trace op '" + kind + "'");
}

void write_trace(const trace& t, std::ostream& out) {
    out << json{{"v", trace_format_version}}.dump() << "\n";
    for (const auto& op : t.ops) out << op_to_json(op).dump() << "\n";
}

std::string trace_to_string(const trace& t) {
    std::ostringstream os;
    write_trace(t, os);
    return os.str();
}

trace parse_trace(std::istream& in) {
    trace t;
    std::string line;
    size_t lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        lineno++;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(errc::io, "trace line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!saw_header) {
            if (!j.is_object() || !j.contains("v"))
                fail(errc::io, "trace missing {\"v\":1} header line");
            if (j.at("v").get<int>() != trace_format_version)
                fail(errc::io, "unsupported trace version " + j.at("v").dump());
            saw_header = true;
            continue;
        }
        t.ops.push_back(op_from_json(j));
    }
    if (!saw_header) fail(errc::io, "empty trace stream");
    return t;
}

trace parse_trace_string(const std::string& text) {
    std::istringstream is(text);
    return parse_trace(is);
}

trace load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io, "cannot open trace file " + path);
    return parse_trace(in);
}

void save_trace(const trace& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(errc::io, "cannot write trace file " + path);
    write_trace(t, out);
}

}  // namespace pvsim
