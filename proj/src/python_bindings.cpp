#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lptsim/cli.hpp"
#include "lptsim/config.hpp"
#include "lptsim/promptbank.hpp"
#include "lptsim/report.hpp"
#include "lptsim/scheduler.hpp"
#include "lptsim/sim.hpp"
#include "lptsim/trace.hpp"

namespace py = pybind11;

namespace lptsim {
namespace {

SimConfig resolve(const std::optional<std::string>& config, std::optional<std::uint64_t> seed) {
  SimConfig cfg = config ? config_from_json(*config) : SimConfig::defaults();
  if (seed) cfg.rng_seed = *seed;
  cfg.validate();
  return cfg;
}

Trace parse_trace(const std::string& text) {
  std::istringstream in(text);
  return read_trace(in, "<python>");
}

Job make_job(std::int64_t id, const std::string& model, int gpus_per_replica, std::int64_t iters, double iter_time,
             double slo, double arrival, double bank_time) {
  Job j;
  j.id = id;
  j.model = ModelId{model, gpus_per_replica};
  j.remaining_iters = iters;
  j.total_iters_by_prompt[1.0] = iters;
  j.iter_time_1gpu = iter_time;
  j.slo = slo;
  j.arrival_time = arrival;
  j.bank_time = bank_time;
  return j;
}

std::vector<PromptCandidate> as_candidates(const std::vector<std::vector<double>>& features) {
  std::vector<PromptCandidate> c;
  c.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    c.push_back({static_cast<std::int64_t>(i), "", normalized(features[i])});
  }
  return c;
}

}  // namespace
}  // namespace lptsim

PYBIND11_MODULE(_lptsim, m) {
  using namespace lptsim;
  m.doc() = "SLO-aware elastic GPU scheduling simulator";

  py::register_exception<Error>(m, "LptsimError", PyExc_ValueError);

  py::class_<Job>(m, "Job")
      .def(py::init(&make_job), py::arg("id"), py::arg("model") = "gpt2-base", py::arg("gpus_per_replica") = 1,
           py::arg("iters") = 1, py::arg("iter_time") = 1.0, py::arg("slo") = 1.0, py::arg("arrival") = 0.0,
           py::arg("bank_time") = 0.0)
      .def_readwrite("id", &Job::id)
      .def_readwrite("remaining_iters", &Job::remaining_iters)
      .def_readwrite("iter_time_1gpu", &Job::iter_time_1gpu)
      .def_readwrite("slo", &Job::slo)
      .def_readwrite("arrival_time", &Job::arrival_time)
      .def_readwrite("bank_time", &Job::bank_time)
      .def("deadline", &Job::deadline);

  py::class_<JobOutcome>(m, "JobOutcome")
      .def_readonly("id", &JobOutcome::id)
      .def_readonly("model", &JobOutcome::model)
      .def_readonly("task_id", &JobOutcome::task_id)
      .def_readonly("arrival", &JobOutcome::arrival)
      .def_readonly("deadline", &JobOutcome::deadline)
      .def_readonly("admitted", &JobOutcome::admitted)
      .def_readonly("start", &JobOutcome::start)
      .def_readonly("finish", &JobOutcome::finish)
      .def_readonly("gpus", &JobOutcome::gpus)
      .def_readonly("bank_used", &JobOutcome::bank_used)
      .def_readonly("violated", &JobOutcome::violated);

  py::class_<GpuInterval>(m, "GpuInterval")
      .def_readonly("gpu", &GpuInterval::gpu)
      .def_readonly("model", &GpuInterval::model)
      .def_readonly("start", &GpuInterval::start)
      .def_readonly("end", &GpuInterval::end);

  py::class_<RunReport>(m, "RunReport")
      .def_property_readonly("policy", [](const RunReport& r) { return std::string(to_string(r.policy)); })
      .def_readonly("jobs", &RunReport::jobs)
      .def_readonly("gpu_intervals", &RunReport::gpu_intervals)
      .def_readonly("end_time", &RunReport::end_time)
      .def_readonly("gpu_cost", &RunReport::gpu_cost)
      .def_readonly("storage_cost", &RunReport::storage_cost)
      .def_readonly("cost", &RunReport::cost)
      .def_readonly("slo_violation_pct", &RunReport::slo_violation_pct)
      .def_readonly("violated", &RunReport::violated)
      .def_readonly("events", &RunReport::events);

  m.def("default_config", [] { return config_to_json(SimConfig::defaults()); },
        "Fully resolved default configuration as JSON.");
  m.def(
      "config_hash",
      [](const std::optional<std::string>& config) { return hash_hex(config_hash(resolve(config, {}))); },
      py::arg("config") = py::none());

  m.def(
      "preset_trace",
      [](const std::string& load, std::uint64_t seed, double S, const std::optional<std::string>& config) {
        const SimConfig cfg = resolve(config, seed);
        Trace t = preset_trace(parse_load(load), cfg, S, seed);
        t.header.config_hash = hash_hex(config_hash(cfg));
        std::ostringstream out;
        write_trace(t, out);
        return out.str();
      },
      py::arg("load") = "medium", py::arg("seed") = 1, py::arg("S") = 1.0, py::arg("config") = py::none(),
      "Preset workload trace in the CSV trace format.");

  m.def(
      "simulate",
      [](const std::string& trace, const std::string& policy, const std::optional<std::string>& config,
         std::optional<std::uint64_t> seed, const std::vector<std::string>& knobs) {
        SimConfig cfg = resolve(config, seed);
        for (const auto& k : knobs) apply_knob(cfg, k);
        const Trace t = parse_trace(trace);
        py::gil_scoped_release release;
        return run(t, cfg, parse_policy(policy));
      },
      py::arg("trace"), py::arg("policy") = "prompttuner", py::arg("config") = py::none(), py::arg("seed") = py::none(),
      py::arg("knobs") = std::vector<std::string>{}, "Runs one policy on trace text.");

  m.def(
      "report_json",
      [](const std::string& trace, const std::string& policy, const std::optional<std::string>& config,
         std::optional<std::uint64_t> seed) {
        const SimConfig cfg = resolve(config, seed);
        const Trace t = parse_trace(trace);
        return report_json(run(t, cfg, parse_policy(policy)), cfg, t.header);
      },
      py::arg("trace"), py::arg("policy") = "prompttuner", py::arg("config") = py::none(), py::arg("seed") = py::none());

  m.def(
      "kmedoid",
      [](const std::vector<std::vector<double>>& features, std::size_t k, std::uint64_t seed) {
        const Clustering c = kmedoid(as_candidates(features), k, seed);
        py::dict d;
        d["medoids"] = c.medoids;
        d["assignment"] = c.assignment;
        d["cost_history"] = c.cost_history;
        return d;
      },
      py::arg("features"), py::arg("k"), py::arg("seed") = 1, "Cosine k-medoid clustering; rows are normalised.");

  m.def(
      "bank_lookup_evals",
      [](const std::vector<std::vector<double>>& features, std::size_t k, const std::vector<double>& task,
         double sigma, std::uint64_t seed) {
        const PromptIndex index = PromptIndex::build(as_candidates(features), k, features.size(), seed);
        const SyntheticScorer scorer(normalized(task), sigma, seed);
        const LookupResult r = index.lookup(EvalSet::synthetic(4, seed), scorer);
        return py::make_tuple(r.best.id, r.evals_performed);
      },
      py::arg("features"), py::arg("k"), py::arg("task"), py::arg("sigma") = 0.0, py::arg("seed") = 1,
      "Two-layer lookup; returns the winning row and the number of score evaluations.");

  m.def(
      "predict_time",
      [](const Job& job, int gpus, bool include_cold, const std::optional<std::string>& config) {
        return predict_time(job, gpus, include_cold, resolve(config, {}));
      },
      py::arg("job"), py::arg("gpus"), py::arg("include_cold") = false, py::arg("config") = py::none());

  m.def(
      "allocate_warm",
      [](int free_gpus, const std::vector<Job>& jobs, double now, const std::optional<std::string>& config) {
        if (jobs.empty()) return std::map<std::int64_t, int>{};
        WarmPool pool;
        pool.model = jobs.front().model;
        pool.free_gpus = free_gpus;
        const AllocationPlan plan = allocate_warm(pool, jobs, now, resolve(config, {}));
        std::map<std::int64_t, int> out;
        for (const auto& a : plan.jobs) out[a.job_id] = a.gpus;
        return out;
      },
      py::arg("free_gpus"), py::arg("jobs"), py::arg("now") = 0.0, py::arg("config") = py::none(),
      "GPUs granted to each job from a warm pool of its model.");

  m.def(
      "delay_schedulable",
      [](std::vector<double> earliest_avail, const Job& job, double now, const std::optional<std::string>& config) {
        const bool ok = delay_schedulable(earliest_avail, job, now, resolve(config, {}));
        return py::make_tuple(ok, earliest_avail);
      },
      py::arg("earliest_avail"), py::arg("job"), py::arg("now") = 0.0, py::arg("config") = py::none());

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> argv{"lptsim"};
        argv.insert(argv.end(), args.begin(), args.end());
        std::ostringstream out, err;
        const int code = run_cli(argv, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line in-process; returns (exit code, stdout, stderr).");
}
