#include "lptsim/scheduler.hpp"

#include <algorithm>

namespace lptsim {

double ColdPool::transition_for(const ModelId& model) const {
  auto it = transition_time.find(model.name);
  if (it == transition_time.end()) throw Error(ErrorKind::kInvalidConfig, "no cold transition time for " + model.name);
  return it->second;
}

ColdPool ColdPool::from_config(const SimConfig& cfg, int size) {
  ColdPool cold;
  cold.size = size;
  for (const auto& m : cfg.models) cold.transition_time[m.id.name] = m.cold_transition_s;
  return cold;
}

const Allocation* AllocationPlan::find(std::int64_t job_id) const {
  for (const auto& a : jobs) {
    if (a.job_id == job_id) return &a;
  }
  return nullptr;
}

int AllocationPlan::total_cold_additions() const {
  int total = 0;
  for (const auto& [model, n] : cold_additions) total += n;
  return total;
}

std::vector<const Job*> order_by_remaining_slo(std::span<const Job> jobs, double now) {
  std::vector<const Job*> order;
  order.reserve(jobs.size());
  for (const auto& j : jobs) order.push_back(&j);
  std::sort(order.begin(), order.end(), [now](const Job* a, const Job* b) {
    const double ra = a->remaining_slo(now);
    const double rb = b->remaining_slo(now);
    if (ra != rb) return ra < rb;
    return a->id < b->id;
  });
  return order;
}

int smallest_feasible_gpus(const Job& job, int cap, double budget, double extra, const SimConfig& cfg) {
  const int g = job.model.gpus_per_replica;
  for (int a = g; a <= cap; a += g) {
    if (predict_time(job, a, false, cfg) + extra <= budget) return a;
  }
  return 0;
}

AllocationPlan allocate_warm(const WarmPool& pool, std::span<const Job> pending, double now, const SimConfig& cfg) {
  AllocationPlan plan;
  int free = pool.free_gpus;
  for (const Job* job : order_by_remaining_slo(pending, now)) {
    Allocation a{job->id, job->model.name};
    a.start_time = now;
    const int gpus = smallest_feasible_gpus(*job, free, job->remaining_slo(now), 0.0, cfg);
    if (gpus > 0) {
      a.gpus = a.from_warm = gpus;
      free -= gpus;
    }
    plan.jobs.push_back(a);
  }
  plan.remaining_free = free;
  return plan;
}

bool delay_schedulable(std::vector<double>& earliest_avail, const Job& job, double now, const SimConfig& cfg) {
  std::vector<double> sorted = earliest_avail;
  std::sort(sorted.begin(), sorted.end());
  const int g = job.model.gpus_per_replica;
  const double budget = job.remaining_slo(now);
  for (int k = g; k <= static_cast<int>(sorted.size()); k += g) {
    const double at = sorted[static_cast<std::size_t>(k - 1)];
    const double t = predict_time(job, k, false, cfg);
    if (t - now + at <= budget) {
      const double finish = at + t;
      std::fill(sorted.begin(), sorted.begin() + k, finish);
      std::sort(sorted.begin(), sorted.end());
      earliest_avail = std::move(sorted);
      return true;
    }
  }
  return false;
}

AllocationPlan allocate_cold(ColdPool& cold, std::vector<WarmPool>& pools, std::span<const Job> pending, double now,
                             const SimConfig& cfg, const ColdOptions& options) {
  AllocationPlan plan;
  for (const auto& p : pools) plan.cold_additions[p.model.name] = 0;

  for (const Job* job : order_by_remaining_slo(pending, now)) {
    Allocation a{job->id, job->model.name};
    auto pool = std::find_if(pools.begin(), pools.end(), [&](const WarmPool& p) { return p.model.name == job->model.name; });
    if (pool == pools.end()) {
      plan.jobs.push_back(a);
      continue;
    }
    if (options.use_delay && delay_schedulable(pool->earliest_avail, *job, now, cfg)) {
      a.delayed = true;
      plan.jobs.push_back(a);
      continue;
    }

    const double t_cold = cold.transition_for(job->model);
    const int warm = options.warm_top_up ? pool->free_gpus : 0;
    const int gpus = smallest_feasible_gpus(*job, warm + cold.size, job->remaining_slo(now), t_cold, cfg);
    if (gpus > 0) {
      a.gpus = gpus;
      a.from_warm = std::min(gpus, warm);
      a.from_cold = gpus - a.from_warm;
      a.start_time = now + t_cold;
      pool->free_gpus -= a.from_warm;
      // The promised GPUs leave the free set; drop their "available now"
      // entries before recording the job's projected finish.
      for (int i = 0; i < a.from_warm; ++i) {
        auto it = std::find(pool->earliest_avail.begin(), pool->earliest_avail.end(), now);
        if (it != pool->earliest_avail.end()) pool->earliest_avail.erase(it);
      }
      cold.size -= a.from_cold;
      plan.cold_additions[job->model.name] += a.from_cold;
      const double finish = now + t_cold + predict_time(*job, gpus, false, cfg);
      pool->earliest_avail.insert(pool->earliest_avail.end(), static_cast<std::size_t>(gpus), finish);
      std::sort(pool->earliest_avail.begin(), pool->earliest_avail.end());
    }
    plan.jobs.push_back(a);
  }
  return plan;
}

std::map<std::string, int> reclaim_idle(std::vector<WarmPool>& pools, ColdPool& cold, double now, double window) {
  if (!(window > 0.0)) throw Error(ErrorKind::kInvalidArgument, "reclaim window must be > 0");
  std::map<std::string, int> removed;
  for (auto& pool : pools) {
    int n = 0;
    std::vector<double> kept;
    for (double since : pool.idle_since) {
      if (now - since >= window - kTimeEps) {
        ++n;
      } else {
        kept.push_back(since);
      }
    }
    pool.idle_since = std::move(kept);
    pool.free_gpus -= n;
    cold.size += n;
    removed[pool.model.name] = n;
  }
  return removed;
}

bool route_to_bank(const Job& job, double bank_latency_estimate, const SimConfig& cfg) {
  if (bank_latency_estimate < 0.0) throw Error(ErrorKind::kInvalidArgument, "bank latency estimate must be >= 0");
  return bank_latency_estimate <= cfg.latency_budget_fraction * job.slo;
}

}  // namespace lptsim
