#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lptsim/error.hpp"

namespace lptsim {

// Absolute slack used when comparing virtual timestamps against deadlines.
inline constexpr double kTimeEps = 1e-9;

struct ModelId {
  std::string name;
  int gpus_per_replica = 1;

  bool operator==(const ModelId&) const = default;
};

enum class JobState { kPending, kInBank, kRunning, kDone, kViolated };

const char* to_string(JobState state);

// One prompt-tuning request.
struct Job {
  std::int64_t id = 0;
  ModelId model;
  int task_id = 0;
  double arrival_time = 0.0;
  // ITA multiplier of an initial prompt -> iterations to reach the target.
  std::map<double, std::int64_t> total_iters_by_prompt;
  std::int64_t remaining_iters = 0;
  double iter_time_1gpu = 1.0;
  double slo = 1.0;
  // Duration of the prompt-bank phase that still has to run on the job's
  // GPUs before tuning starts; zero when the job skips the bank.
  double bank_time = 0.0;
  JobState state = JobState::kPending;

  double deadline() const { return arrival_time + slo; }
  double remaining_slo(double now) const { return deadline() - now; }

  // Applies a state transition, throwing kInvariantBreach on an illegal one.
  void transition(JobState next);
};

struct ExecTimeModel {
  double comm_fraction = 0.005;
  // Share of end-to-end time spent on GPU allocation when nothing is reused.
  // Descriptive only; the simulator charges explicit transition times.
  double alloc_overhead_fraction = 0.39;
};

struct CostModel {
  // p4de.24xlarge on-demand ($40.96/h) split over its 8 GPUs.
  double gpu_price_per_hour = 40.96 / 8.0;
  double storage_price_per_gb_hour = 0.02;
  // Cross-GPU exchange buffer held by each running job.
  double storage_gb_per_job = 0.1;
};

struct ModelSpec {
  ModelId id;
  double iter_time_s = 0.5;
  double cold_transition_s = 30.0;
  // Seconds per prompt score evaluation in the bank.
  double bank_eval_cost_s = 0.053;
};

struct BankSettings {
  int clusters = 50;
  int capacity = 3000;
  // Number of candidates loaded into each bank (<= capacity).
  int size = 2500;
  int universe = 3000;
  int eval_samples = 16;
  int dim = 64;
  int topics = 60;
  int tasks = 120;
  double noise_sigma = 0.05;
};

struct ItaSettings {
  double median_multiplier = 1.7;
  double max_multiplier = 4.5;
};

struct InflessSettings {
  double init_min_s = 5.0;
  double init_max_s = 40.0;
  double keepalive_s = 120.0;
};

struct ElasticflowSettings {
  // 0 means "same as total_gpus".
  int cluster_gpus = 0;
};

// Task catalog used when generating preset traces.
struct WorkloadSettings {
  double min_duration_s = 5.0;
  double max_duration_s = 45.0;
  // Relative weight of 1, 2, 4, and 8 GPU jobs in the source trace.
  std::vector<double> gpu_weights = {0.7, 0.2, 0.08, 0.02};
};

struct AblationSettings {
  bool warm_allocator = true;
  bool delay_schedulable = true;
  bool latency_budget = true;
};

struct SimConfig {
  std::vector<ModelSpec> models;
  CostModel cost;
  ExecTimeModel exec;
  double tick_interval = 0.05;
  double reclaim_window = 60.0;
  double latency_budget_fraction = 0.20;
  // Allocation overhead added to duration * S when a trace is turned into
  // deadlines: a fixed part plus a part proportional to the duration such
  // that it makes up `slo_overhead_share` of duration plus overhead.
  double slo_alloc_overhead = 30.0;
  double slo_overhead_share = 0.0;
  int total_gpus = 32;
  std::uint64_t rng_seed = 1;
  BankSettings bank;
  ItaSettings ita;
  InflessSettings infless;
  ElasticflowSettings elasticflow;
  WorkloadSettings workload;
  AblationSettings ablation;

  // Three-model setup used throughout the evaluation.
  static SimConfig defaults();

  const ModelSpec& model(std::string_view name) const;
  int model_index(std::string_view name) const;
  double cold_time(const ModelId& model) const { return model_spec(model).cold_transition_s; }
  int elasticflow_gpus() const { return elasticflow.cluster_gpus > 0 ? elasticflow.cluster_gpus : total_gpus; }

  // Throws Error(kInvalidConfig) when any field is out of range.
  void validate() const;

 private:
  const ModelSpec& model_spec(const ModelId& id) const { return model(id.name); }
};

// Replica count for `gpus` GPUs of `model`; throws kInvalidGpuCount when
// fewer GPUs than one replica needs.
int replicas(const ModelId& model, int gpus);

// Upper bound on the time `job` needs on `gpus` GPUs: its pending bank phase
// plus the remaining iterations at the per-iteration cost, optionally
// preceded by the model's cold transition.
double predict_time(const Job& job, int gpus, bool include_cold, const SimConfig& cfg);

double job_slo_from_trace(double duration, double S, double alloc_overhead);

// Allocation overhead of a job of the given duration under `cfg`.
double slo_overhead_for(double duration, const SimConfig& cfg);

}  // namespace lptsim
