#include "lptsim/core.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace lptsim {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kInvalidGpuCount: return "invalid-gpu-count";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kEmptyInput: return "empty-input";
    case ErrorKind::kKTooLarge: return "k-too-large";
    case ErrorKind::kEmptyEvalSet: return "empty-eval-set";
    case ErrorKind::kEmptyIndex: return "empty-index";
    case ErrorKind::kClusterTooSmall: return "cluster-too-small";
    case ErrorKind::kInvalidConfig: return "invalid-config";
    case ErrorKind::kMalformedTrace: return "malformed-trace";
    case ErrorKind::kMissingFile: return "missing-file";
    case ErrorKind::kUnknownKnob: return "unknown-knob";
    case ErrorKind::kInvariantBreach: return "invariant-breach";
  }
  return "unknown";
}

const char* to_string(JobState state) {
  switch (state) {
    case JobState::kPending: return "pending";
    case JobState::kInBank: return "in_bank";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kViolated: return "violated";
  }
  return "unknown";
}

void Job::transition(JobState next) {
  bool ok = false;
  switch (next) {
    case JobState::kViolated: ok = state != JobState::kViolated; break;
    case JobState::kInBank: ok = state == JobState::kPending; break;
    case JobState::kRunning: ok = state == JobState::kPending || state == JobState::kInBank; break;
    case JobState::kDone: ok = state == JobState::kRunning; break;
    case JobState::kPending: ok = false; break;
  }
  if (!ok) {
    std::ostringstream os;
    os << "job " << id << ": illegal transition " << to_string(state) << " -> " << to_string(next);
    throw Error(ErrorKind::kInvariantBreach, os.str());
  }
  state = next;
}

SimConfig SimConfig::defaults() {
  SimConfig cfg;
  cfg.models = {
      ModelSpec{ModelId{"gpt2-base", 1}, 0.25, 30.0, 0.053},
      ModelSpec{ModelId{"gpt2-large", 1}, 0.5, 30.0, 0.061},
      ModelSpec{ModelId{"vicuna-7b", 1}, 1.0, 30.0, 0.092},
  };
  return cfg;
}

int SimConfig::model_index(std::string_view name) const {
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].id.name == name) return static_cast<int>(i);
  }
  return -1;
}

const ModelSpec& SimConfig::model(std::string_view name) const {
  const int i = model_index(name);
  if (i < 0) throw Error(ErrorKind::kInvalidConfig, "unknown model '" + std::string(name) + "'");
  return models[static_cast<std::size_t>(i)];
}

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::kInvalidConfig, what);
}

}  // namespace

void SimConfig::validate() const {
  require(!models.empty(), "at least one model is required");
  std::set<std::string> names;
  for (const auto& m : models) {
    require(!m.id.name.empty(), "model name must be nonempty");
    require(names.insert(m.id.name).second, "duplicate model name '" + m.id.name + "'");
    require(m.id.gpus_per_replica >= 1, m.id.name + ": gpus_per_replica must be >= 1");
    require(m.iter_time_s > 0.0, m.id.name + ": iter_time_s must be > 0");
    require(m.cold_transition_s >= 0.0, m.id.name + ": cold_transition_s must be >= 0");
    require(m.bank_eval_cost_s > 0.0, m.id.name + ": bank_eval_cost_s must be > 0");
  }
  require(cost.gpu_price_per_hour >= 0.0, "gpu_price_per_hour must be >= 0");
  require(cost.storage_price_per_gb_hour >= 0.0, "storage_price_per_gb_hour must be >= 0");
  require(cost.storage_gb_per_job >= 0.0, "storage_gb_per_job must be >= 0");
  require(exec.comm_fraction >= 0.0 && exec.comm_fraction <= 0.01, "comm_fraction must be in [0, 0.01]");
  require(tick_interval > 0.0, "tick_interval must be > 0");
  require(reclaim_window > 0.0, "reclaim_window must be > 0");
  require(latency_budget_fraction > 0.0 && latency_budget_fraction < 1.0,
          "latency_budget_fraction must be in (0, 1)");
  require(slo_alloc_overhead >= 0.0, "slo_alloc_overhead must be >= 0");
  require(slo_overhead_share >= 0.0 && slo_overhead_share < 1.0, "slo_overhead_share must be in [0, 1)");
  require(workload.min_duration_s > 0.0 && workload.max_duration_s >= workload.min_duration_s,
          "workload durations must satisfy 0 < min <= max");
  require(workload.gpu_weights.size() == 4, "workload.gpu_weights needs weights for 1, 2, 4 and 8 GPUs");
  double weight_sum = 0.0;
  for (double w : workload.gpu_weights) {
    require(w >= 0.0, "workload.gpu_weights must be >= 0");
    weight_sum += w;
  }
  require(weight_sum > 0.0, "workload.gpu_weights must not all be zero");
  require(total_gpus >= 0, "total_gpus must be >= 0");
  require(bank.clusters >= 1, "bank.clusters must be >= 1");
  require(bank.size >= bank.clusters, "bank.size must be >= bank.clusters");
  require(bank.capacity >= bank.size, "bank.capacity must be >= bank.size");
  require(bank.universe >= bank.size, "bank.universe must be >= bank.size");
  require(bank.eval_samples >= 1, "bank.eval_samples must be >= 1");
  require(bank.dim >= 2, "bank.dim must be >= 2");
  require(bank.topics >= 1, "bank.topics must be >= 1");
  require(bank.tasks >= 1, "bank.tasks must be >= 1");
  require(bank.noise_sigma >= 0.0, "bank.noise_sigma must be >= 0");
  require(ita.median_multiplier > 1.0 && ita.max_multiplier > ita.median_multiplier,
          "ita multipliers must satisfy 1 < median < max");
  require(infless.init_min_s >= 0.0 && infless.init_max_s >= infless.init_min_s,
          "infless init range must satisfy 0 <= min <= max");
  require(infless.keepalive_s > 0.0, "infless.keepalive_s must be > 0");
  require(elasticflow.cluster_gpus >= 0, "elasticflow.cluster_gpus must be >= 0");
}

int replicas(const ModelId& model, int gpus) {
  const int g = model.gpus_per_replica;
  if (g < 1 || gpus < g) {
    std::ostringstream os;
    os << model.name << ": " << gpus << " GPUs cannot host a replica of " << g;
    throw Error(ErrorKind::kInvalidGpuCount, os.str());
  }
  return gpus / g;
}

double predict_time(const Job& job, int gpus, bool include_cold, const SimConfig& cfg) {
  const int r = replicas(job.model, gpus);
  double t = job.bank_time;
  if (job.remaining_iters > 0) {
    t += static_cast<double>(job.remaining_iters) * job.iter_time_1gpu * (1.0 + cfg.exec.comm_fraction) / r;
  }
  if (include_cold) t += cfg.cold_time(job.model);
  return t;
}

double job_slo_from_trace(double duration, double S, double alloc_overhead) {
  if (!(duration > 0.0) || !(S > 0.0) || !(alloc_overhead >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "job_slo_from_trace: need duration > 0, S > 0, overhead >= 0");
  }
  return duration * S + alloc_overhead;
}

double slo_overhead_for(double duration, const SimConfig& cfg) {
  return cfg.slo_alloc_overhead + duration * cfg.slo_overhead_share / (1.0 - cfg.slo_overhead_share);
}

}  // namespace lptsim
