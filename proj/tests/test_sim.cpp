#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "lptsim/config.hpp"
#include "lptsim/report.hpp"
#include "lptsim/rng.hpp"
#include "lptsim/sim.hpp"
#include "lptsim/trace.hpp"

using namespace lptsim;

namespace {

Trace one_job_trace(double gpu_time, int gpus, double S, double horizon = 0.0) {
  Trace t;
  t.header = {1, S, "unit", horizon};
  t.records = {{0.0, "gpt2-base", gpu_time, 3, gpus}};
  return t;
}

double price(const SimConfig& cfg) { return cfg.cost.gpu_price_per_hour / 3600.0; }

double interval_cost(const RunReport& r, const SimConfig& cfg) {
  double s = 0.0;
  for (const auto& iv : r.gpu_intervals) s += iv.end - iv.start;
  return s * price(cfg);
}

}  // namespace

TEST_CASE("account_cost worked examples") {
  CostModel five;
  five.gpu_price_per_hour = 5.0;
  five.storage_price_per_gb_hour = 0.5;
  CHECK(account_cost({{0.0, "m", 2, 0}}, 3600.0, 0.0, five) == doctest::Approx(10.0));
  // 0 -> 4 in unit steps every 900 s: 0 + 1 + 2 + 3 quarter hours, then 4.
  std::vector<PoolSample> steps;
  for (int k = 0; k <= 4; ++k) steps.push_back({900.0 * k, "m", k, 0});
  CHECK(account_cost(steps, 3600.0 + 900.0, 0.0, five) == doctest::Approx(5.0 * (0 + 1 + 2 + 3 + 4) * 0.25));
  CHECK(account_cost({}, 1000.0, 2.0, five) == doctest::Approx(1.0));
  CHECK(account_cost({{0.0, "m", 0, 0}}, 1000.0, 0.0, five) == 0.0);
  // Models integrate independently and samples past the end are ignored.
  const std::vector<PoolSample> two{{0.0, "a", 1, 0}, {0.0, "b", 2, 0}, {1800.0, "a", 3, 0}, {7200.0, "b", 9, 0}};
  CHECK(account_cost(two, 3600.0, 0.0, five) == doctest::Approx(5.0 * (0.5 + 1.5 + 2.0)));
}

TEST_CASE("empty trace costs nothing except the fixed cluster") {
  const SimConfig cfg = SimConfig::defaults();
  Trace empty;
  empty.header.horizon_s = 600.0;
  for (Policy p : {Policy::kPromptTuner, Policy::kInflessLike}) {
    const RunReport r = run(empty, cfg, p);
    CHECK(r.slo_violation_pct == 0.0);
    CHECK(r.cost == 0.0);
    CHECK(r.jobs.empty());
  }
  const RunReport ef = run(empty, cfg, Policy::kElasticflowLike);
  CHECK(ef.slo_violation_pct == 0.0);
  CHECK(ef.cost == doctest::Approx(32 * 600.0 * price(cfg)));
}

TEST_CASE("one job with a generous SLO: cost is its GPUs until reclamation") {
  const SimConfig cfg = SimConfig::defaults();
  const RunReport r = run(one_job_trace(120.0, 1, 10.0), cfg, Policy::kPromptTuner);
  REQUIRE(r.jobs.size() == 1);
  const JobOutcome& j = r.jobs[0];
  CHECK_FALSE(j.violated);
  CHECK(j.admitted);
  CHECK(j.start == doctest::Approx(30.0));
  CHECK(j.finish <= j.deadline);
  REQUIRE(r.gpu_intervals.size() == static_cast<std::size_t>(j.gpus));
  for (const auto& iv : r.gpu_intervals) {
    CHECK(iv.start == 0.0);
    CHECK(iv.end >= j.finish + cfg.reclaim_window - 1e-9);
    CHECK(iv.end <= j.finish + cfg.reclaim_window + cfg.tick_interval + 1e-9);
  }
  CHECK(r.gpu_cost == doctest::Approx(interval_cost(r, cfg)));
  CHECK(r.slo_violation_pct == 0.0);
}

TEST_CASE("jobs that cannot meet their SLO are violated without running") {
  SimConfig cfg = SimConfig::defaults();
  cfg.total_gpus = 1;
  const RunReport r = run(one_job_trace(2000.0, 8, 0.5), cfg, Policy::kPromptTuner);
  CHECK(r.jobs[0].violated);
  CHECK_FALSE(r.jobs[0].admitted);
  CHECK(r.cost == 0.0);
}

TEST_CASE("unknown models in the trace are rejected") {
  Trace t = one_job_trace(10, 1, 1);
  t.records[0].model = "gpt5";
  CHECK_THROWS_AS(run(t, SimConfig::defaults(), Policy::kPromptTuner), Error);
  Trace bad_task = one_job_trace(10, 1, 1);
  bad_task.records[0].task_id = 100000;
  CHECK_THROWS_AS(run(bad_task, SimConfig::defaults(), Policy::kPromptTuner), Error);
}

TEST_CASE("runs are deterministic and reports carry seed and hash") {
  const SimConfig cfg = SimConfig::defaults();
  const Trace t = preset_trace(LoadLevel::kLow, cfg, 1.0, 5);
  for (Policy p : {Policy::kPromptTuner, Policy::kInflessLike, Policy::kElasticflowLike}) {
    const RunReport a = run(t, cfg, p);
    const RunReport b = run(t, cfg, p);
    CHECK(report_json(a, cfg, t.header) == report_json(b, cfg, t.header));
    CHECK(jobs_csv(a, cfg) == jobs_csv(b, cfg));
    CHECK(pool_series_csv(a, cfg) == pool_series_csv(b, cfg));
    const std::string head = jobs_csv(a, cfg).substr(0, jobs_csv(a, cfg).find('\n'));
    CHECK(head.find("seed=1") != std::string::npos);
    CHECK(head.find(hash_hex(config_hash(cfg))) != std::string::npos);
  }
}

TEST_CASE("run invariants on a low-load trace") {
  const SimConfig cfg = SimConfig::defaults();
  const Trace t = preset_trace(LoadLevel::kLow, cfg, 1.0, 2);
  for (Policy p : {Policy::kPromptTuner, Policy::kInflessLike, Policy::kElasticflowLike}) {
    const RunReport r = run(t, cfg, p);
    std::size_t violated = 0;
    for (const auto& j : r.jobs) {
      if (j.violated) ++violated;
      if (j.admitted) {
        CHECK(j.start >= j.arrival - 1e-9);
        CHECK(j.finish >= j.start);
        CHECK(j.violated == (j.finish > j.deadline + 1e-9));
        CHECK(j.gpus >= 1);
      } else {
        CHECK(j.violated);
      }
      CHECK(j.ita_multiplier >= 1.0);
      CHECK(j.iterations >= 1);
    }
    CHECK(violated == r.violated);
    CHECK(r.slo_violation_pct == doctest::Approx(100.0 * violated / r.jobs.size()));
    CHECK(r.gpu_cost == doctest::Approx(interval_cost(r, cfg)).epsilon(1e-9));
    CHECK(r.cost == doctest::Approx(r.gpu_cost + r.storage_cost));
    for (std::size_t i = 1; i < r.pool_series.size(); ++i) {
      CHECK(r.pool_series[i].time_s >= r.pool_series[i - 1].time_s);
    }
    if (p == Policy::kPromptTuner) {
      for (const auto& j : r.jobs) {
        if (j.admitted) CHECK_FALSE(j.violated);
      }
    }
  }
}

TEST_CASE("bank use follows the latency budget") {
  const SimConfig cfg = SimConfig::defaults();
  const Trace t = preset_trace(LoadLevel::kLow, cfg, 1.0, 3);
  const RunReport r = run(t, cfg, Policy::kPromptTuner);
  const auto jobs = jobs_from_trace(t, cfg);
  for (std::size_t i = 0; i < r.jobs.size(); ++i) {
    const double estimate = (cfg.bank.clusters + cfg.bank.size / double(cfg.bank.clusters)) *
                            cfg.model(r.jobs[i].model).bank_eval_cost_s;
    CHECK(r.jobs[i].bank_used == (estimate <= cfg.latency_budget_fraction * jobs[i].slo + 1e-9));
    if (r.jobs[i].bank_used) CHECK(r.jobs[i].bank_time > 0.0);
  }
  SimConfig no_budget = cfg;
  no_budget.ablation.latency_budget = false;
  for (const auto& j : run(t, no_budget, Policy::kPromptTuner).jobs) CHECK(j.bank_used);
}

TEST_CASE("elasticflow-like bills the whole cluster") {
  const SimConfig cfg = SimConfig::defaults();
  const Trace t = preset_trace(LoadLevel::kLow, cfg, 1.0, 4);
  const RunReport r = run(t, cfg, Policy::kElasticflowLike);
  CHECK(r.gpu_cost == doctest::Approx(32 * r.end_time * price(cfg)));
  for (const auto& s : r.pool_series) CHECK(s.model == kClusterSeries);

  // Matched to prompttuner's peak, the fixed cluster still costs more.
  const RunReport pt = run(t, cfg, Policy::kPromptTuner);
  std::map<double, int> level;
  std::map<std::string, int> current;
  int peak = 0;
  for (const auto& s : pt.pool_series) {
    current[s.model] = s.provisioned;
    int total = 0;
    for (const auto& [m, n] : current) total += n;
    peak = std::max(peak, total);
  }
  SimConfig matched = cfg;
  matched.elasticflow.cluster_gpus = peak;
  CHECK(pt.cost <= run(t, matched, Policy::kElasticflowLike).cost);
}

TEST_CASE("infless-like multi-GPU jobs wait for their slowest instance") {
  SimConfig cfg = SimConfig::defaults();
  const RunReport r = run(one_job_trace(400.0, 4, 3.0), cfg, Policy::kInflessLike);
  const JobOutcome& j = r.jobs[0];
  REQUIRE(j.admitted);
  CHECK(j.gpus >= 2);
  CHECK(j.start >= cfg.infless.init_min_s);
  CHECK(j.start <= cfg.infless.init_max_s);
  double last_ready = 0.0;
  for (int i = 0; i < j.gpus; ++i) {
    Rng init(mix_seed(cfg.rng_seed, 0x1f1e55, j.id, i));
    last_ready = std::max(last_ready, init.uniform(cfg.infless.init_min_s, cfg.infless.init_max_s));
  }
  CHECK(j.start == doctest::Approx(last_ready));
}

TEST_CASE("a job arriving while its model's pool is warm starts at the next tick") {
  const SimConfig cfg = SimConfig::defaults();
  for (Policy p : {Policy::kPromptTuner, Policy::kInflessLike}) {
    Trace t = one_job_trace(30.0, 1, 3.0);
    const double first_finish = run(t, cfg, p).jobs[0].finish;
    const double second = first_finish + 10.0;
    t.records.push_back({second, "gpt2-base", 30.0, 2, 1});
    const RunReport r = run(t, cfg, p);
    REQUIRE(r.jobs[1].admitted);
    CHECK(r.jobs[1].start >= second);
    CHECK(r.jobs[1].start <= second + cfg.tick_interval + 1e-9);
  }
}

TEST_CASE("observer sees conservation after every event") {
  const SimConfig cfg = SimConfig::defaults();
  const Trace t = preset_trace(LoadLevel::kLow, cfg, 1.0, 6);
  std::size_t seen = 0;
  RunOptions opts;
  opts.observer = [&](const EngineSnapshot& s) {
    int total = s.cold;
    for (const auto& [m, n] : s.provisioned) total += n;
    CHECK(total == s.total);
    ++seen;
  };
  const RunReport r = run(t, cfg, Policy::kPromptTuner, opts);
  CHECK(seen == r.events);
}

TEST_CASE("report JSON echoes the resolved config") {
  const SimConfig cfg = SimConfig::defaults();
  const Trace t = one_job_trace(60.0, 1, 2.0);
  const RunReport r = run(t, cfg, Policy::kPromptTuner);
  const std::string js = report_json(r, cfg, t.header);
  for (const char* key : {"\"config_hash\"", "\"reclaim_window\"", "\"slo_violation_pct\"", "\"cost_dollars\"",
                          "\"seed\""}) {
    CHECK(js.find(key) != std::string::npos);
  }
}
