#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <queue>

#include "lptsim/ita.hpp"
#include "lptsim/rng.hpp"
#include "lptsim/scheduler.hpp"
#include "lptsim/sim.hpp"

namespace lptsim {

Policy parse_policy(std::string_view name) {
  if (name == "prompttuner") return Policy::kPromptTuner;
  if (name == "infless_like") return Policy::kInflessLike;
  if (name == "elasticflow_like") return Policy::kElasticflowLike;
  throw Error(ErrorKind::kInvalidArgument,
              "unknown policy '" + std::string(name) + "' (prompttuner|infless_like|elasticflow_like)");
}

const char* to_string(Policy policy) {
  switch (policy) {
    case Policy::kPromptTuner: return "prompttuner";
    case Policy::kInflessLike: return "infless_like";
    case Policy::kElasticflowLike: return "elasticflow_like";
  }
  return "prompttuner";
}

std::vector<Job> jobs_from_trace(const Trace& trace, const SimConfig& cfg) {
  std::vector<Job> jobs;
  jobs.reserve(trace.records.size());
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const TraceRecord& r = trace.records[i];
    if (cfg.model_index(r.model) < 0) {
      throw Error(ErrorKind::kInvalidArgument, "trace record " + std::to_string(i + 1) + " names unknown model '" +
                                                   r.model + "'");
    }
    const ModelSpec& spec = cfg.model(r.model);
    Job j;
    j.id = static_cast<std::int64_t>(i);
    j.model = spec.id;
    j.task_id = r.task_id;
    j.arrival_time = r.submit_time_s;
    const auto ideal = std::max<std::int64_t>(1, std::llround(r.gpu_time_s / spec.iter_time_s));
    j.total_iters_by_prompt[1.0] = ideal;
    j.remaining_iters = ideal;
    j.iter_time_1gpu = spec.iter_time_s;
    j.slo = job_slo_from_trace(r.duration_s(), trace.header.S, slo_overhead_for(r.duration_s(), cfg));
    jobs.push_back(std::move(j));
  }
  return jobs;
}

double account_cost(const std::vector<PoolSample>& series, double end, double storage_gb_hours, const CostModel& cost) {
  struct Level {
    double since = 0.0;
    int count = 0;
  };
  std::map<std::string, Level> current;
  double gpu_seconds = 0.0;
  for (const auto& s : series) {
    auto& lvl = current[s.model];
    const double until = std::min(s.time_s, end);
    if (until > lvl.since) gpu_seconds += lvl.count * (until - lvl.since);
    lvl.since = std::max(lvl.since, until);
    lvl.count = s.provisioned;
  }
  for (const auto& [model, lvl] : current) {
    if (end > lvl.since) gpu_seconds += lvl.count * (end - lvl.since);
  }
  return gpu_seconds / 3600.0 * cost.gpu_price_per_hour + storage_gb_hours * cost.storage_price_per_gb_hour;
}

namespace {

enum class EventKind { kArrival, kTick, kGpuReady, kJobStart, kBankDone, kCompletion };

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::kTick;
  std::int64_t subject = 0;  // job index, or GPU index for kGpuReady
};

struct LaterEvent {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

enum class GpuState { kCold, kWarming, kFree, kHeld, kBusy };

struct Gpu {
  GpuState state = GpuState::kCold;
  int model = -1;
  std::int64_t job = -1;
  // A warming GPU that will be held for `job` once ready.
  bool promised = false;
  double idle_since = 0.0;
  double out_since = 0.0;
};

struct SimJob {
  Job job;
  JobOutcome out;
  int model = 0;
  bool allocated = false;
  // Instance-level policies: GPU target and cold GPUs still warming for it.
  int target = 0;
  int outstanding = 0;
  // Iterations the job really needs with its selected prompt.
  std::int64_t actual_iters = 0;
  // Predicted (upper bound) and real completion times once admitted.
  double planned_finish = 0.0;
  double actual_finish = 0.0;
  // Offset from start to the end of the bank phase.
  double bank_done_offset = 0.0;
  std::vector<int> gpus;
};

class Engine {
 public:
  Engine(const Trace& trace, const SimConfig& cfg, Policy policy, const RunOptions& options)
      : trace_(trace), cfg_(cfg), policy_(policy), options_(options) {
    cfg_.validate();
    const int n = policy_ == Policy::kElasticflowLike ? cfg_.elasticflow_gpus() : cfg_.total_gpus;
    gpus_.resize(static_cast<std::size_t>(n));
    if (policy_ == Policy::kElasticflowLike) {
      series_names_.push_back(kClusterSeries);
      for (auto& g : gpus_) g.state = GpuState::kFree;
      provisioned_.assign(1, n);
      cold_ = 0;
    } else {
      for (const auto& m : cfg_.models) series_names_.push_back(m.id.name);
      provisioned_.assign(cfg_.models.size(), 0);
      cold_ = n;
    }
    busy_.assign(series_names_.size(), 0);
    report_.policy = policy_;
  }

  RunReport run() {
    auto jobs = jobs_from_trace(trace_, cfg_);
    for (const auto& m : cfg_.models) {
      worlds_.push_back(trace_.records.empty() ? nullptr : shared_prompt_world(cfg_, m));
    }
    jobs_.reserve(jobs.size());
    for (auto& j : jobs) {
      SimJob sj;
      sj.model = cfg_.model_index(j.model.name);
      sj.job = std::move(j);
      jobs_.push_back(std::move(sj));
    }
    for (std::size_t i = 0; i < jobs_.size(); ++i) {
      push(jobs_[i].job.arrival_time, EventKind::kArrival, static_cast<std::int64_t>(i));
    }
    for (std::size_t s = 0; s < series_names_.size(); ++s) record_sample(0.0, s);

    while (!events_.empty()) {
      const Event ev = events_.top();
      events_.pop();
      now_ = ev.time;
      dispatch(ev);
      ++report_.events;
      check_conservation();
      for (std::size_t s = 0; s < series_names_.size(); ++s) record_sample(now_, s);
      maybe_schedule_tick();
    }
    return finish();
  }

 private:
  void push(double time, EventKind kind, std::int64_t subject) { events_.push(Event{time, seq_++, kind, subject}); }

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case EventKind::kArrival: on_arrival(static_cast<std::size_t>(ev.subject)); break;
      case EventKind::kTick:
        tick_pending_ = false;
        on_tick();
        break;
      case EventKind::kGpuReady: on_gpu_ready(static_cast<std::size_t>(ev.subject)); break;
      case EventKind::kJobStart: on_job_start(static_cast<std::size_t>(ev.subject)); break;
      case EventKind::kBankDone: jobs_[static_cast<std::size_t>(ev.subject)].job.transition(JobState::kRunning); break;
      case EventKind::kCompletion: on_completion(static_cast<std::size_t>(ev.subject)); break;
    }
  }

  // ---- arrivals and prompt choice

  void on_arrival(std::size_t idx) {
    SimJob& sj = jobs_[idx];
    Job& job = sj.job;
    const PromptWorld& world = *worlds_[static_cast<std::size_t>(sj.model)];
    const ItaProfile& profile = world.profile(job.task_id);
    const SyntheticScorer truth(world.task_ideal(job.task_id), 0.0, 0);
    const std::int64_t ideal = job.total_iters_by_prompt.at(1.0);
    auto iters_for = [ideal](double m) { return static_cast<std::int64_t>(std::ceil(ideal * m - 1e-9)); };

    Rng pick(mix_seed(cfg_.rng_seed, 0xdef0, job.id));
    const auto& own = world.universe.prompts[pick.below(world.universe.prompts.size())];
    const double m_own = profile.multiplier(truth.quality(own));
    job.total_iters_by_prompt.clear();
    job.total_iters_by_prompt[m_own] = iters_for(m_own);

    bool use_bank = true;
    if (policy_ == Policy::kPromptTuner && cfg_.ablation.latency_budget) {
      use_bank = route_to_bank(job, world.latency_estimate(), cfg_);
    }
    double m = m_own;
    if (use_bank) {
      const EvalSet eval = EvalSet::synthetic(static_cast<std::size_t>(cfg_.bank.eval_samples),
                                              mix_seed(cfg_.rng_seed, 0xe7a1, job.id));
      const SyntheticScorer scorer(world.task_ideal(job.task_id), cfg_.bank.noise_sigma,
                                   mix_seed(cfg_.rng_seed, 0x5c0e, job.id));
      const LookupResult found = world.bank.lookup(eval, scorer);
      m = profile.multiplier(truth.quality(found.best));
      job.total_iters_by_prompt[m] = iters_for(m);
      job.bank_time = static_cast<double>(found.evals_performed) * world.per_eval_cost;
    }
    // The scheduler only knows the worst case over the prompts the job may
    // run with; the job itself stops after its selected prompt's count.
    sj.actual_iters = job.total_iters_by_prompt.at(m);
    job.remaining_iters = 0;
    for (const auto& [mult, iters] : job.total_iters_by_prompt) job.remaining_iters = std::max(job.remaining_iters, iters);

    sj.out.id = job.id;
    sj.out.model = job.model.name;
    sj.out.task_id = job.task_id;
    sj.out.arrival = job.arrival_time;
    sj.out.deadline = job.deadline();
    sj.out.bank_used = use_bank;
    sj.out.bank_time = job.bank_time;
    sj.out.ita_multiplier = m;
    sj.out.iterations = sj.actual_iters;
    pending_.push_back(idx);
  }

  // ---- GPU bookkeeping

  int series_of(int model) const { return policy_ == Policy::kElasticflowLike ? 0 : model; }

  void leave_cold(Gpu& g, int model) {
    g.model = model;
    g.out_since = now_;
    --cold_;
    ++provisioned_[static_cast<std::size_t>(model)];
  }

  void enter_cold(std::size_t gi) {
    Gpu& g = gpus_[gi];
    report_.gpu_intervals.push_back(
        GpuInterval{static_cast<int>(gi), series_names_[static_cast<std::size_t>(g.model)], g.out_since, now_});
    --provisioned_[static_cast<std::size_t>(g.model)];
    ++cold_;
    g = Gpu{};
  }

  void set_busy(Gpu& g, bool busy) {
    const auto s = static_cast<std::size_t>(series_of(g.model));
    if (busy && g.state != GpuState::kBusy) ++busy_[s];
    if (!busy && g.state == GpuState::kBusy) --busy_[s];
  }

  // Free GPUs of `model`, most recently idled first so that long-idle GPUs
  // stay idle and get reclaimed.
  std::vector<std::size_t> free_gpus(int model) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < gpus_.size(); ++i) {
      if (gpus_[i].state == GpuState::kFree && (model < 0 || gpus_[i].model == model)) out.push_back(i);
    }
    std::stable_sort(out.begin(), out.end(),
                     [this](std::size_t a, std::size_t b) { return gpus_[a].idle_since > gpus_[b].idle_since; });
    return out;
  }

  std::size_t any_cold_gpu() const {
    for (std::size_t i = 0; i < gpus_.size(); ++i) {
      if (gpus_[i].state == GpuState::kCold) return i;
    }
    throw Error(ErrorKind::kInvariantBreach, "cold pool unexpectedly empty");
  }

  void hold(std::size_t gi, std::size_t job) {
    Gpu& g = gpus_[gi];
    g.state = GpuState::kHeld;
    g.job = static_cast<std::int64_t>(job);
    jobs_[job].gpus.push_back(static_cast<int>(gi));
  }

  // Moves one cold GPU towards `model` on behalf of `job`. Unless
  // `promised`, it joins the free pool when ready.
  std::size_t warm_up(int model, std::int64_t job, double ready_at, bool promised) {
    const std::size_t gi = any_cold_gpu();
    Gpu& g = gpus_[gi];
    leave_cold(g, model);
    g.state = GpuState::kWarming;
    g.job = job;
    g.promised = promised;
    if (promised) jobs_[static_cast<std::size_t>(job)].gpus.push_back(static_cast<int>(gi));
    push(ready_at, EventKind::kGpuReady, static_cast<std::int64_t>(gi));
    return gi;
  }

  void on_gpu_ready(std::size_t gi) {
    Gpu& g = gpus_[gi];
    if (g.state != GpuState::kWarming) return;
    if (g.promised) {
      g.state = GpuState::kHeld;
      g.promised = false;
      return;
    }
    if (g.job >= 0) {
      auto& sj = jobs_[static_cast<std::size_t>(g.job)];
      sj.outstanding = std::max(0, sj.outstanding - 1);
      g.job = -1;
    }
    g.state = GpuState::kFree;
    g.idle_since = now_;
  }

  // ---- job lifecycle

  void admit(std::size_t idx, double start, bool include_cold) {
    SimJob& sj = jobs_[idx];
    sj.allocated = true;
    sj.out.admitted = true;
    sj.out.gpus = static_cast<int>(sj.gpus.size());
    const double load = include_cold ? cfg_.cold_time(sj.job.model) : 0.0;
    sj.planned_finish = start + predict_time(sj.job, sj.out.gpus, include_cold, cfg_);
    Job real = sj.job;
    real.remaining_iters = sj.actual_iters;
    sj.actual_finish = start + predict_time(real, sj.out.gpus, include_cold, cfg_);
    sj.bank_done_offset = load + sj.job.bank_time;
    std::erase(pending_, idx);
    if (start <= now_) {
      on_job_start(idx);
    } else {
      push(start, EventKind::kJobStart, static_cast<std::int64_t>(idx));
    }
  }

  void on_job_start(std::size_t idx) {
    SimJob& sj = jobs_[idx];
    for (int gi : sj.gpus) {
      Gpu& g = gpus_[static_cast<std::size_t>(gi)];
      set_busy(g, true);
      g.state = GpuState::kBusy;
      g.job = static_cast<std::int64_t>(idx);
    }
    sj.out.start = now_;
    if (sj.job.bank_time > 0.0) {
      sj.job.transition(JobState::kInBank);
      push(now_ + sj.bank_done_offset, EventKind::kBankDone, static_cast<std::int64_t>(idx));
    } else {
      sj.job.transition(JobState::kRunning);
    }
    const double finish = std::max(sj.actual_finish, now_);
    push(finish, EventKind::kCompletion, static_cast<std::int64_t>(idx));
  }

  void on_completion(std::size_t idx) {
    SimJob& sj = jobs_[idx];
    for (int gi : sj.gpus) {
      Gpu& g = gpus_[static_cast<std::size_t>(gi)];
      set_busy(g, false);
      g.state = GpuState::kFree;
      g.job = -1;
      g.idle_since = now_;
    }
    sj.out.finish = now_;
    sj.job.remaining_iters = 0;
    if (sj.out.gpus > 1) {
      report_.storage_gb_hours += cfg_.cost.storage_gb_per_job * (sj.out.finish - sj.out.start) / 3600.0;
    }
    if (now_ > sj.job.deadline() + kTimeEps) {
      sj.out.violated = true;
      sj.job.transition(JobState::kViolated);
    } else {
      sj.job.transition(JobState::kDone);
    }
  }

  void violate_pending(std::size_t idx) {
    SimJob& sj = jobs_[idx];
    sj.out.violated = true;
    sj.job.transition(JobState::kViolated);
    // Release anything held or requested for it.
    for (int gi : sj.gpus) {
      Gpu& g = gpus_[static_cast<std::size_t>(gi)];
      if (g.state == GpuState::kHeld) {
        g.state = GpuState::kFree;
        g.idle_since = now_;
      }
      g.job = -1;
    }
    sj.gpus.clear();
    for (auto& g : gpus_) {
      if (g.state == GpuState::kWarming && g.job == static_cast<std::int64_t>(idx)) {
        g.job = -1;
        g.promised = false;
      }
    }
    std::erase(pending_, idx);
  }

  // ---- ticks

  void maybe_schedule_tick() {
    if (tick_pending_) return;
    bool needed = !pending_.empty();
    if (!needed && policy_ != Policy::kElasticflowLike) {
      needed = std::any_of(gpus_.begin(), gpus_.end(), [](const Gpu& g) { return g.state == GpuState::kFree; });
    }
    if (!needed) return;
    auto k = static_cast<std::int64_t>(std::ceil(now_ / cfg_.tick_interval));
    if (static_cast<double>(k) * cfg_.tick_interval < now_) ++k;
    k = std::max(k, last_tick_ + 1);
    last_tick_ = k;
    tick_pending_ = true;
    push(static_cast<double>(k) * cfg_.tick_interval, EventKind::kTick, 0);
  }

  int gpu_cap(const Job& job, int total) const {
    const int g = job.model.gpus_per_replica;
    return total / g * g;
  }

  std::vector<Job> pending_jobs(int model) const {
    std::vector<Job> out;
    for (std::size_t idx : pending_) {
      if (model < 0 || jobs_[idx].model == model) out.push_back(jobs_[idx].job);
    }
    return out;
  }

  void expire_pending(bool include_cold) {
    const int total = static_cast<int>(gpus_.size());
    for (std::size_t idx : std::vector<std::size_t>(pending_)) {
      const Job& job = jobs_[idx].job;
      const int cap = gpu_cap(job, total);
      const bool expired = now_ > job.deadline() + kTimeEps;
      const bool hopeless = cap < job.model.gpus_per_replica ||
                            predict_time(job, cap, include_cold, cfg_) > job.remaining_slo(now_) + kTimeEps;
      if (expired || hopeless) violate_pending(idx);
    }
  }

  void on_tick() {
    switch (policy_) {
      case Policy::kPromptTuner:
        expire_pending(false);
        if (cfg_.ablation.warm_allocator) {
          tick_gang();
        } else {
          tick_instances(false);
        }
        reclaim(cfg_.reclaim_window);
        break;
      case Policy::kInflessLike:
        expire_pending(false);
        tick_instances(true);
        reclaim(cfg_.infless.keepalive_s);
        break;
      case Policy::kElasticflowLike:
        expire_pending(true);
        tick_fixed_cluster();
        break;
    }
  }

  // Warm allocation per model, then deadline-aware cold allocation.
  void tick_gang() {
    for (std::size_t m = 0; m < cfg_.models.size(); ++m) {
      const auto pending = pending_jobs(static_cast<int>(m));
      if (pending.empty()) continue;
      auto free = free_gpus(static_cast<int>(m));
      if (free.empty()) continue;
      WarmPool pool;
      pool.model = cfg_.models[m].id;
      pool.free_gpus = static_cast<int>(free.size());
      const AllocationPlan plan = allocate_warm(pool, pending, now_, cfg_);
      std::size_t next = 0;
      for (const auto& a : plan.jobs) {
        if (a.gpus == 0) continue;
        const auto idx = static_cast<std::size_t>(a.job_id);
        for (int i = 0; i < a.gpus; ++i) hold(free[next++], idx);
        admit(idx, now_, false);
      }
    }

    const auto pending = pending_jobs(-1);
    if (pending.empty()) return;
    std::vector<WarmPool> pools;
    for (std::size_t m = 0; m < cfg_.models.size(); ++m) {
      WarmPool p;
      p.model = cfg_.models[m].id;
      pools.push_back(std::move(p));
    }
    for (const auto& g : gpus_) {
      if (g.state == GpuState::kCold) continue;
      WarmPool& p = pools[static_cast<std::size_t>(g.model)];
      if (g.state == GpuState::kFree) {
        ++p.free_gpus;
        p.earliest_avail.push_back(now_);
        p.idle_since.push_back(g.idle_since);
      } else {
        (g.state == GpuState::kBusy ? p.busy_gpus : p.promised_gpus) += 1;
        const double at = g.job >= 0 ? jobs_[static_cast<std::size_t>(g.job)].planned_finish : now_;
        p.earliest_avail.push_back(std::max(at, now_));
      }
    }
    for (auto& p : pools) std::sort(p.earliest_avail.begin(), p.earliest_avail.end());

    ColdPool cold = ColdPool::from_config(cfg_, cold_);
    ColdOptions opts;
    opts.use_delay = cfg_.ablation.delay_schedulable;
    const AllocationPlan plan = allocate_cold(cold, pools, pending, now_, cfg_, opts);
    for (const auto& a : plan.jobs) {
      if (a.gpus == 0) continue;
      const auto idx = static_cast<std::size_t>(a.job_id);
      const int model = jobs_[idx].model;
      auto free = free_gpus(model);
      for (int i = 0; i < a.from_warm; ++i) hold(free[static_cast<std::size_t>(i)], idx);
      for (int i = 0; i < a.from_cold; ++i) warm_up(model, static_cast<std::int64_t>(idx), a.start_time, true);
      admit(idx, a.start_time, false);
    }
  }

  // Each job picks a GPU target assuming warm GPUs and assembles it one GPU
  // at a time. With `promise_cold` the cold GPUs it requests are its own and
  // each pays a seeded init delay; otherwise they join the free pool after
  // the model's transition time and the job keeps holding what it has.
  void tick_instances(bool promise_cold) {
    const int total = static_cast<int>(gpus_.size());
    const auto pending = pending_jobs(-1);
    for (const Job* jp : order_by_remaining_slo(pending, now_)) {
      const auto idx = static_cast<std::size_t>(jp->id);
      SimJob& sj = jobs_[idx];
      if (sj.target == 0) {
        sj.target = smallest_feasible_gpus(sj.job, gpu_cap(sj.job, total), sj.job.remaining_slo(now_), 0.0, cfg_);
        if (sj.target == 0) continue;
      }
      const int held = static_cast<int>(sj.gpus.size());
      if (promise_cold) {
        const auto free = free_gpus(sj.model);
        const int need = sj.target - held;
        if (static_cast<int>(free.size()) + cold_ < need) continue;
        const int warm = std::min(need, static_cast<int>(free.size()));
        for (int i = 0; i < warm; ++i) hold(free[static_cast<std::size_t>(i)], idx);
        double start = now_;
        for (int i = warm; i < need; ++i) {
          Rng init(mix_seed(cfg_.rng_seed, 0x1f1e55, sj.job.id, i));
          const double ready = now_ + init.uniform(cfg_.infless.init_min_s, cfg_.infless.init_max_s);
          warm_up(sj.model, static_cast<std::int64_t>(idx), ready, true);
          start = std::max(start, ready);
        }
        admit(idx, start, false);
        continue;
      }
      int have = held;
      for (std::size_t gi : free_gpus(sj.model)) {
        if (have >= sj.target) break;
        hold(gi, idx);
        ++have;
      }
      if (have >= sj.target) {
        admit(idx, now_, false);
        continue;
      }
      const int shortfall = std::min(sj.target - have - sj.outstanding, cold_);
      for (int i = 0; i < shortfall; ++i) {
        warm_up(sj.model, static_cast<std::int64_t>(idx), now_ + cfg_.cold_time(sj.job.model), false);
        ++sj.outstanding;
      }
    }
  }

  // Deadline-ordered elastic allocation on a fixed cluster; every job loads
  // its runtime and weights first.
  void tick_fixed_cluster() {
    const auto pending = pending_jobs(-1);
    for (const Job* jp : order_by_remaining_slo(pending, now_)) {
      const auto idx = static_cast<std::size_t>(jp->id);
      const auto free = free_gpus(-1);
      const double load = cfg_.cold_time(jp->model);
      const int a = smallest_feasible_gpus(*jp, static_cast<int>(free.size()), jp->remaining_slo(now_), load, cfg_);
      if (a == 0) continue;
      for (int i = 0; i < a; ++i) hold(free[static_cast<std::size_t>(i)], idx);
      admit(idx, now_, true);
    }
  }

  void reclaim(double window) {
    std::vector<WarmPool> pools(cfg_.models.size());
    for (std::size_t m = 0; m < pools.size(); ++m) pools[m].model = cfg_.models[m].id;
    for (const auto& g : gpus_) {
      if (g.state != GpuState::kFree) continue;
      ++pools[static_cast<std::size_t>(g.model)].free_gpus;
      pools[static_cast<std::size_t>(g.model)].idle_since.push_back(g.idle_since);
    }
    ColdPool cold = ColdPool::from_config(cfg_, cold_);
    const auto removed = reclaim_idle(pools, cold, now_, window);
    for (std::size_t m = 0; m < pools.size(); ++m) {
      int n = removed.at(cfg_.models[m].id.name);
      if (n == 0) continue;
      // The n longest-idle free GPUs are exactly those past the window.
      auto free = free_gpus(static_cast<int>(m));
      for (auto it = free.rbegin(); it != free.rend() && n > 0; ++it, --n) enter_cold(*it);
    }
  }

  // ---- accounting

  void check_conservation() {
    int total = cold_;
    for (int p : provisioned_) total += p;
    if (total != static_cast<int>(gpus_.size()) || cold_ < 0) {
      throw Error(ErrorKind::kInvariantBreach, "GPU conservation broken at t=" + std::to_string(now_));
    }
    if (options_.observer) {
      EngineSnapshot snap;
      snap.now = now_;
      snap.event_index = report_.events;
      snap.cold = cold_;
      for (std::size_t s = 0; s < series_names_.size(); ++s) snap.provisioned[series_names_[s]] = provisioned_[s];
      snap.total = static_cast<int>(gpus_.size());
      options_.observer(snap);
    }
  }

  void record_sample(double t, std::size_t s) {
    auto& last = last_sample_[s];
    if (last.has_value() && last->provisioned == provisioned_[s] && last->busy == busy_[s]) return;
    PoolSample sample{t, series_names_[s], provisioned_[s], busy_[s]};
    if (last.has_value() && last->time_s == t) {
      report_.pool_series[last_index_[s]] = sample;
    } else {
      last_index_[s] = report_.pool_series.size();
      report_.pool_series.push_back(sample);
    }
    last = sample;
  }

  RunReport finish() {
    const double end = std::max(trace_.header.horizon_s, now_);
    report_.end_time = end;
    for (std::size_t gi = 0; gi < gpus_.size(); ++gi) {
      const Gpu& g = gpus_[gi];
      if (g.state == GpuState::kCold) continue;
      report_.gpu_intervals.push_back(GpuInterval{
          static_cast<int>(gi), series_names_[static_cast<std::size_t>(series_of(g.model))], g.out_since, end});
    }
    std::stable_sort(report_.gpu_intervals.begin(), report_.gpu_intervals.end(),
                     [](const GpuInterval& a, const GpuInterval& b) {
                       return a.start != b.start ? a.start < b.start : a.gpu < b.gpu;
                     });
    report_.gpu_cost = account_cost(report_.pool_series, end, 0.0, cfg_.cost);
    report_.storage_cost = report_.storage_gb_hours * cfg_.cost.storage_price_per_gb_hour;
    report_.cost = report_.gpu_cost + report_.storage_cost;
    for (auto& sj : jobs_) {
      if (sj.out.violated) ++report_.violated;
      report_.jobs.push_back(sj.out);
    }
    report_.slo_violation_pct =
        jobs_.empty() ? 0.0 : 100.0 * static_cast<double>(report_.violated) / static_cast<double>(jobs_.size());
    return std::move(report_);
  }

  const Trace& trace_;
  SimConfig cfg_;
  Policy policy_;
  const RunOptions& options_;

  std::vector<std::shared_ptr<const PromptWorld>> worlds_;
  std::vector<SimJob> jobs_;
  std::vector<std::size_t> pending_;
  std::vector<Gpu> gpus_;
  std::vector<std::string> series_names_;
  std::vector<int> provisioned_;
  std::vector<int> busy_;
  int cold_ = 0;

  std::priority_queue<Event, std::vector<Event>, LaterEvent> events_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;
  bool tick_pending_ = false;
  std::int64_t last_tick_ = -1;

  std::map<std::size_t, std::optional<PoolSample>> last_sample_;
  std::map<std::size_t, std::size_t> last_index_;
  RunReport report_;
};

}  // namespace

RunReport run(const Trace& trace, const SimConfig& cfg, Policy policy, const RunOptions& options) {
  Engine engine(trace, cfg, policy, options);
  return engine.run();
}

}  // namespace lptsim
