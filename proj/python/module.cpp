// Python bindings. Structured results cross the boundary as JSON strings;
// the package wrapper turns them into dicts so the C++ surface stays the
// single source of truth for report shapes.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "pvsim/backends.hpp"
#include "pvsim/cost_model.hpp"
#include "pvsim/elasticity.hpp"
#include "pvsim/errors.hpp"
#include "pvsim/generators.hpp"
#include "pvsim/replay.hpp"
#include "pvsim/trace.hpp"

namespace py = pybind11;
using namespace pvsim;

namespace {

replay_options make_options(const std::string& backend, const std::string& profile,
                            const std::string& calibration, bool nested,
                            const std::string& granularity, uint64_t guest_pages,
                            uint64_t host_pages, int cpus, uint64_t pcp_capacity,
                            uint64_t pcp_batch, bool test_mode, uint64_t seed) {
    if (granularity != "4k" && granularity != "2m")
        fail(errc::invalid_params, "granularity must be 4k or 2m");
    backend_options b;
    b.kind = backend_kind_from_name(backend);
    b.huge_backing = granularity == "2m";
    machine_config m;
    m.guest_pages = guest_pages;
    m.host_pages = host_pages;
    m.cpus = cpus;
    m.pcp_capacity = pcp_capacity;
    m.pcp_batch = pcp_batch;
    m.test_mode = test_mode;
    latency_profile p =
        calibration.empty() ? builtin_profile(profile) : load_calibration(calibration);
    if (nested) p.nested = true;
    return {b, m, p, seed};
}

reclamation_model make_model(const std::string& kind, uint64_t block_pages,
                             uint64_t region_pages) {
    reclamation_model m;
    if (kind == "balloon")
        m.kind = reclamation_kind::balloon;
    else if (kind == "block_unplug")
        m.kind = reclamation_kind::block_unplug;
    else if (kind == "metadata_scan")
        m.kind = reclamation_kind::metadata_scan;
    else if (kind == "pager_free_path")
        m.kind = reclamation_kind::pager_free_path;
    else
        fail(errc::invalid_params, "unknown reclamation model '" + kind + "'");
    m.block_pages = block_pages;
    m.region_pages = region_pages;
    return m;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "trace-driven simulator of secure-container memory backends and domain gates";
    mod.attr("__version__") = tool_version;
    mod.attr("report_schema") = report_schema;

    py::register_exception<trace_error>(mod, "TraceError");
    py::register_exception<sim_error>(mod, "SimError");

    mod.def("generate_trace",
            [](const std::string& spec, uint64_t seed) {
                return trace_to_string(generate(parse_gen_spec(spec), seed));
            },
            py::arg("spec"), py::arg("seed") = 0,
            "Generate a workload trace (JSONL text) from a kind:key=val,... spec.");

    mod.def("replay_json",
            [](const std::string& trace_text, const std::string& backend,
               const std::string& profile, const std::string& calibration, bool nested,
               const std::string& granularity, uint64_t guest_pages, uint64_t host_pages,
               int cpus, uint64_t pcp_capacity, uint64_t pcp_batch, bool test_mode,
               uint64_t seed) {
                trace t = parse_trace_string(trace_text);
                replay_options opt =
                    make_options(backend, profile, calibration, nested, granularity,
                                 guest_pages, host_pages, cpus, pcp_capacity, pcp_batch,
                                 test_mode, seed);
                return report_to_json(replay(t, opt)).dump();
            },
            py::arg("trace"), py::arg("backend") = "pager", py::arg("profile") = "paracell",
            py::arg("calibration") = "", py::arg("nested") = false,
            py::arg("granularity") = "4k", py::arg("guest_pages") = uint64_t(1) << 16,
            py::arg("host_pages") = uint64_t(1) << 17, py::arg("cpus") = 1,
            py::arg("pcp_capacity") = 128, py::arg("pcp_batch") = 32,
            py::arg("test_mode") = false, py::arg("seed") = 0,
            "Replay a JSONL trace on one backend; returns the report as a JSON string.");

    mod.def("compare_json",
            [](const std::string& trace_text, const std::vector<std::string>& backends,
               const std::string& profile, const std::string& calibration, bool nested,
               const std::string& granularity, uint64_t guest_pages, uint64_t host_pages,
               int cpus, uint64_t pcp_capacity, uint64_t pcp_batch, bool test_mode,
               uint64_t seed) {
                trace t = parse_trace_string(trace_text);
                if (backends.empty()) fail(errc::invalid_params, "no backends given");
                replay_options base =
                    make_options(backends[0], profile, calibration, nested, granularity,
                                 guest_pages, host_pages, cpus, pcp_capacity, pcp_batch,
                                 test_mode, seed);
                std::vector<backend_options> bks;
                for (const auto& name : backends) {
                    backend_options b = base.backend;
                    b.kind = backend_kind_from_name(name);
                    bks.push_back(b);
                }
                return comparison_to_json(
                           compare_backends(t, bks, base.machine, base.profile, seed))
                    .dump();
            },
            py::arg("trace"), py::arg("backends") = std::vector<std::string>{"pager", "shadow", "ept"},
            py::arg("profile") = "paracell", py::arg("calibration") = "",
            py::arg("nested") = false, py::arg("granularity") = "4k",
            py::arg("guest_pages") = uint64_t(1) << 16, py::arg("host_pages") = uint64_t(1) << 17,
            py::arg("cpus") = 1, py::arg("pcp_capacity") = 128, py::arg("pcp_batch") = 32,
            py::arg("test_mode") = false, py::arg("seed") = 0,
            "Replay a trace on several backends plus the flat reference; JSON string result.");

    mod.def("syscall_latency_table", &syscall_latency_table,
            "ns for one no-op syscall under every built-in profile.");

    mod.def("builtin_profiles", &builtin_profile_names);

    mod.def("fault_breakdown_json",
            [](const std::string& profile) {
                fault_cost_breakdown b = fault_breakdown(builtin_profile(profile));
                nlohmann::json parts = nlohmann::json::array();
                for (const auto& p : b.parts)
                    parts.push_back(
                        {{"name", p.name}, {"ns", p.ns}, {"share_pct", p.share_pct}});
                return nlohmann::json{{"parts", parts},
                                      {"other_ns", b.other_ns},
                                      {"total_ns", b.total_ns}}
                    .dump();
            },
            py::arg("profile") = "paracell",
            "Cost structure of one fresh anonymous fault; JSON string result.");

    mod.def("waste_at_granularity",
            [](const std::vector<uint64_t>& touched, const std::string& granularity) {
                if (granularity != "4k" && granularity != "2m")
                    fail(errc::invalid_params, "granularity must be 4k or 2m");
                return waste_at_granularity(touched, granularity == "2m"
                                                         ? chunk_granularity::g2m
                                                         : chunk_granularity::g4k);
            },
            py::arg("touched"), py::arg("granularity"),
            "Extra pages committed when backing the touched set at this granularity.");

    mod.def("reclamation_ops",
            [](const std::string& kind, const std::vector<uint64_t>& freed,
               uint64_t block_pages, uint64_t region_pages) {
                reclamation_result r =
                    reclamation_ops(make_model(kind, block_pages, region_pages), freed);
                return py::make_tuple(r.ops, r.host_pages_released);
            },
            py::arg("kind"), py::arg("freed"), py::arg("block_pages") = 1,
            py::arg("region_pages") = 0,
            "(ops, host_pages_released) for a reclamation model over freed pages.");

    mod.def("overhead_stats_json",
            [](const std::vector<std::tuple<uint64_t, uint64_t, uint64_t>>& samples,
               double threshold) {
                std::vector<elasticity_sample> s;
                for (const auto& [t, in_use, host] : samples) s.push_back({t, in_use, host});
                return summary_to_json(overhead_stats(s, threshold)).dump();
            },
            py::arg("samples"), py::arg("threshold") = 0.01,
            "Aggregate relative-overhead stats over (t, in_use, host) samples; JSON string.");
}
