#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lptsim/core.hpp"

namespace lptsim {

// Snapshot of one model's warm pool as seen by the allocators.
struct WarmPool {
  ModelId model;
  int free_gpus = 0;
  int busy_gpus = 0;
  int promised_gpus = 0;
  // Timestamps at which GPUs of this pool become available, one per GPU
  // (free GPUs are listed at the current time).
  std::vector<double> earliest_avail;
  // One entry per free GPU.
  std::vector<double> idle_since;

  int provisioned() const { return free_gpus + busy_gpus + promised_gpus; }
};

struct ColdPool {
  int size = 0;
  std::map<std::string, double> transition_time;

  double transition_for(const ModelId& model) const;
  static ColdPool from_config(const SimConfig& cfg, int size);
};

struct Allocation {
  std::int64_t job_id = 0;
  std::string model;
  // Zero means the job stays pending.
  int gpus = 0;
  int from_warm = 0;
  int from_cold = 0;
  double start_time = 0.0;
  // Left pending because it can wait for GPUs that running jobs release.
  bool delayed = false;
};

struct AllocationPlan {
  std::vector<Allocation> jobs;
  // GPUs moved from the cold pool into each model's warm pool.
  std::map<std::string, int> cold_additions;
  // Free warm GPUs left after a warm allocation round.
  int remaining_free = 0;

  const Allocation* find(std::int64_t job_id) const;
  int total_cold_additions() const;
};

// Jobs ordered by remaining SLO (deadline - now), ties by id.
std::vector<const Job*> order_by_remaining_slo(std::span<const Job> jobs, double now);

// Smallest replica multiple a <= cap with predict_time(job, a) + extra <=
// budget, or 0 when none exists.
int smallest_feasible_gpus(const Job& job, int cap, double budget, double extra, const SimConfig& cfg);

// Warm-pool allocation: deadline-ordered, each job receives the fewest GPUs
// that meet its remaining SLO, starting immediately; jobs that cannot be met
// with what is left get 0 and stay pending.
AllocationPlan allocate_warm(const WarmPool& pool, std::span<const Job> pending, double now, const SimConfig& cfg);

// Tests whether `job` meets its deadline by waiting for the first k GPUs in
// `earliest_avail`. On success those k entries are overwritten with the
// job's projected finish time and the list is re-sorted; on failure the list
// is left untouched.
bool delay_schedulable(std::vector<double>& earliest_avail, const Job& job, double now, const SimConfig& cfg);

struct ColdOptions {
  bool use_delay = true;
  // Let a cold allocation include free warm GPUs before adding cold ones.
  bool warm_top_up = true;
};

// Cold-pool allocation over all pending jobs. Updates `cold.size`, each
// pool's `earliest_avail` and (for warm top-ups) `free_gpus`.
AllocationPlan allocate_cold(ColdPool& cold, std::vector<WarmPool>& pools, std::span<const Job> pending, double now,
                             const SimConfig& cfg, const ColdOptions& options = {});

// Returns free GPUs idle for at least `window` seconds to the cold pool.
std::map<std::string, int> reclaim_idle(std::vector<WarmPool>& pools, ColdPool& cold, double now, double window);

// True when the bank lookup fits the job's latency budget.
bool route_to_bank(const Job& job, double bank_latency_estimate, const SimConfig& cfg);

}  // namespace lptsim
