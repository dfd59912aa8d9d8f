#include <cmath>

#include "doctest.h"
#include "lptsim/config.hpp"
#include "lptsim/core.hpp"
#include "test_util.hpp"

using namespace lptsim;
using lptsim::testing::exact_config;
using lptsim::testing::make_job;

TEST_CASE("predict_time worked examples") {
  const SimConfig cfg = exact_config();
  Job j = make_job(1, 120, 1000);
  CHECK(predict_time(j, 3, false, cfg) == doctest::Approx(40.0));
  CHECK(predict_time(j, 2, true, cfg) == doctest::Approx(90.0));
  j.remaining_iters = 0;
  for (int a = 1; a <= 8; ++a) CHECK(predict_time(j, a, false, cfg) == 0.0);
}

TEST_CASE("predict_time properties") {
  SimConfig cfg = SimConfig::defaults();
  Job j = make_job(1, 977, 1000);
  j.iter_time_1gpu = 0.37;
  for (int a = 1; a < 16; ++a) {
    CHECK(predict_time(j, a + 1, false, cfg) < predict_time(j, a, false, cfg));
    CHECK(predict_time(j, a, true, cfg) - predict_time(j, a, false, cfg) == doctest::Approx(30.0));
  }
  Job big = make_job(2, 400, 1000, 0.0, "gpt2-base", 4);
  for (int a = 4; a < 20; ++a) {
    CHECK(predict_time(big, a, false, cfg) == predict_time(big, 4 * (a / 4), false, cfg));
  }
  CHECK_THROWS_AS(predict_time(big, 3, false, cfg), Error);
  try {
    predict_time(big, 3, false, cfg);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidGpuCount);
  }
}

TEST_CASE("predict_time charges the pending bank phase") {
  const SimConfig cfg = exact_config();
  Job j = make_job(1, 100, 1000);
  j.bank_time = 5.3;
  CHECK(predict_time(j, 4, false, cfg) == doctest::Approx(30.3));
}

TEST_CASE("job_slo_from_trace worked examples") {
  CHECK(job_slo_from_trace(100, 1.0, 30) == 130.0);
  CHECK(job_slo_from_trace(100, 0.5, 0) == 50.0);
  CHECK(job_slo_from_trace(60, 1.5, 30) == 120.0);
  CHECK_THROWS_AS(job_slo_from_trace(0, 1.0, 0), Error);
  CHECK_THROWS_AS(job_slo_from_trace(10, -1.0, 0), Error);
  // Linear in S with intercept equal to the overhead.
  const double a = job_slo_from_trace(40, 1.0, 12), b = job_slo_from_trace(40, 2.0, 12);
  CHECK(2 * a - b == doctest::Approx(12.0));
}

TEST_CASE("slo_overhead_for combines fixed and proportional parts") {
  SimConfig cfg = SimConfig::defaults();
  cfg.slo_alloc_overhead = 10.0;
  cfg.slo_overhead_share = 0.0;
  CHECK(slo_overhead_for(100, cfg) == 10.0);
  cfg.slo_alloc_overhead = 0.0;
  cfg.slo_overhead_share = 0.5;
  CHECK(slo_overhead_for(100, cfg) == doctest::Approx(100.0));
}

TEST_CASE("job state machine") {
  Job j = make_job(1, 10, 10);
  j.transition(JobState::kInBank);
  j.transition(JobState::kRunning);
  j.transition(JobState::kDone);
  CHECK_THROWS_AS(j.transition(JobState::kRunning), Error);

  Job k = make_job(2, 10, 10);
  k.transition(JobState::kRunning);
  CHECK_THROWS_AS(k.transition(JobState::kInBank), Error);
  k.transition(JobState::kViolated);
  CHECK_THROWS_AS(k.transition(JobState::kViolated), Error);
  CHECK_THROWS_AS(make_job(3, 1, 1).transition(JobState::kDone), Error);
}

TEST_CASE("config defaults validate and round-trip through JSON") {
  const SimConfig d = SimConfig::defaults();
  d.validate();
  CHECK(d.tick_interval == 0.05);
  CHECK(d.reclaim_window == 60.0);
  CHECK(d.latency_budget_fraction == 0.20);
  for (const auto& m : d.models) CHECK(m.cold_transition_s == 30.0);
  const SimConfig back = config_from_json(config_to_json(d));
  CHECK(config_to_json(back) == config_to_json(d));
  CHECK(config_hash(back) == config_hash(d));
}

TEST_CASE("config parsing rejects bad input") {
  auto kind_of = [](const std::string& text) {
    try {
      config_from_json(text);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kInvariantBreach;
  };
  CHECK(kind_of("{") == ErrorKind::kInvalidConfig);
  CHECK(kind_of(R"({"nope": 1})") == ErrorKind::kInvalidConfig);
  CHECK(kind_of(R"({"tick_interval": 0})") == ErrorKind::kInvalidConfig);
  CHECK(kind_of(R"({"latency_budget_fraction": 1.5})") == ErrorKind::kInvalidConfig);
  CHECK(kind_of(R"({"tick_interval": "fast"})") == ErrorKind::kInvalidConfig);
  CHECK(kind_of(R"({"models": [{"name": "m", "gpus_per_replica": 0}]})") == ErrorKind::kInvalidConfig);
  CHECK(kind_of(R"({"bank": {"clusters": 2.5}})") == ErrorKind::kInvalidConfig);
}

TEST_CASE("config overrides and the shared cold transition time") {
  const SimConfig c = config_from_json(R"({"cold_transition_time": 12, "reclaim_window": 90, "seed": 7})");
  for (const auto& m : c.models) CHECK(m.cold_transition_s == 12.0);
  CHECK(c.reclaim_window == 90.0);
  CHECK(c.rng_seed == 7u);
  CHECK(config_hash(c) != config_hash(SimConfig::defaults()));
}

TEST_CASE("knobs") {
  SimConfig c = SimConfig::defaults();
  apply_knob(c, "no-warm-allocator");
  apply_knob(c, "no-delay");
  apply_knob(c, "no-budget");
  CHECK_FALSE(c.ablation.warm_allocator);
  CHECK_FALSE(c.ablation.delay_schedulable);
  CHECK_FALSE(c.ablation.latency_budget);
  apply_knob(c, "window=5");
  CHECK(c.reclaim_window == 5.0);
  apply_knob(c, "clusters=1");
  CHECK(c.bank.clusters == 1);
  apply_knob(c, "bank-size=3500");
  CHECK(c.bank.size == 3500);
  CHECK(c.bank.capacity >= 3500);
  for (const char* bad : {"fast", "window=", "window=-3", "clusters=2.5", "foo=3", "window=abc"}) {
    SimConfig x = SimConfig::defaults();
    CHECK_THROWS_AS(apply_knob(x, bad), Error);
    try {
      apply_knob(x, bad);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kUnknownKnob);
    }
  }
}
