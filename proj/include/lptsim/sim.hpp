#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lptsim/core.hpp"
#include "lptsim/trace.hpp"

namespace lptsim {

enum class Policy { kPromptTuner, kInflessLike, kElasticflowLike };

Policy parse_policy(std::string_view name);
const char* to_string(Policy policy);

// Pool series name used for the fixed cluster of the elasticflow-like policy.
inline constexpr const char* kClusterSeries = "cluster";

struct JobOutcome {
  std::int64_t id = 0;
  std::string model;
  int task_id = 0;
  double arrival = 0.0;
  double deadline = 0.0;
  bool admitted = false;
  // Time the job's GPUs start working for it; -1 when never admitted.
  double start = -1.0;
  double finish = -1.0;
  int gpus = 0;
  bool bank_used = false;
  double bank_time = 0.0;
  double ita_multiplier = 1.0;
  std::int64_t iterations = 0;
  bool violated = false;
};

// Pool size of one model after the events at `time_s`.
struct PoolSample {
  double time_s = 0.0;
  std::string model;
  int provisioned = 0;
  int busy = 0;
};

// Span during which one GPU was out of the cold pool.
struct GpuInterval {
  int gpu = 0;
  std::string model;
  double start = 0.0;
  double end = 0.0;
};

struct RunReport {
  Policy policy = Policy::kPromptTuner;
  std::vector<JobOutcome> jobs;
  std::vector<PoolSample> pool_series;
  std::vector<GpuInterval> gpu_intervals;
  double end_time = 0.0;
  double gpu_cost = 0.0;
  double storage_cost = 0.0;
  double cost = 0.0;
  double slo_violation_pct = 0.0;
  std::size_t violated = 0;
  std::size_t events = 0;
  double storage_gb_hours = 0.0;
};

// State visible to observers after each event.
struct EngineSnapshot {
  double now = 0.0;
  std::size_t event_index = 0;
  int cold = 0;
  std::map<std::string, int> provisioned;
  int total = 0;
};

struct RunOptions {
  std::function<void(const EngineSnapshot&)> observer;
};

// Runs one trace under one policy. Throws kInvalidConfig for an invalid
// configuration, kInvalidArgument for trace records naming unknown models
// or tasks, and kInvariantBreach if GPU conservation ever fails.
RunReport run(const Trace& trace, const SimConfig& cfg, Policy policy, const RunOptions& options = {});

// Integrates each model's provisioned step series up to `end` and adds
// storage. Samples must be sorted by time; a model's count holds until its
// next sample.
double account_cost(const std::vector<PoolSample>& series, double end, double storage_gb_hours, const CostModel& cost);

// Turns trace records into jobs (ideal-prompt iterations, SLO from S).
std::vector<Job> jobs_from_trace(const Trace& trace, const SimConfig& cfg);

}  // namespace lptsim
