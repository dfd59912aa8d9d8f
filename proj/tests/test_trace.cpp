#include <algorithm>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "lptsim/ita.hpp"
#include "lptsim/trace.hpp"

using namespace lptsim;

namespace {

ErrorKind read_error(const std::string& text, std::string* message = nullptr) {
  std::istringstream in(text);
  try {
    read_trace(in, "t.csv");
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  return ErrorKind::kInvariantBreach;
}

}  // namespace

TEST_CASE("trace text round-trip") {
  Trace t;
  t.header = {42, 1.5, "unit", 1200.0, "00ff"};
  t.records = {{0.1, "gpt2-base", 33.3, 4, 2}, {59.99, "vicuna-7b", 1e-3, 0, 1}, {60.0, "gpt2-base", 1.0 / 3.0, 7, 8}};
  std::ostringstream out;
  write_trace(t, out);
  std::istringstream in(out.str());
  const Trace back = read_trace(in);
  CHECK(back.header.seed == 42u);
  CHECK(back.header.S == 1.5);
  CHECK(back.header.label == "unit");
  CHECK(back.header.horizon_s == 1200.0);
  CHECK(back.header.config_hash == "00ff");
  REQUIRE(back.records.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.records[i].submit_time_s == t.records[i].submit_time_s);
    CHECK(back.records[i].gpu_time_s == t.records[i].gpu_time_s);
    CHECK(back.records[i].model == t.records[i].model);
    CHECK(back.records[i].task_id == t.records[i].task_id);
    CHECK(back.records[i].gpus == t.records[i].gpus);
  }
  std::ostringstream again;
  write_trace(back, again);
  CHECK(again.str() == out.str());
}

TEST_CASE("malformed trace lines name the line") {
  const std::string head = "# lptsim-trace seed=1 S=1 label=x horizon_s=60\n";
  std::string msg;
  CHECK(read_error(head + "0,gpt2-base,10,1,1\n1,gpt2-base,abc,1,1\n", &msg) == ErrorKind::kMalformedTrace);
  CHECK(msg.find("t.csv:3") != std::string::npos);
  CHECK(read_error(head + "0,gpt2-base,10,1\n") == ErrorKind::kMalformedTrace);
  CHECK(read_error(head + "0,gpt2-base,0,1,1\n") == ErrorKind::kMalformedTrace);
  CHECK(read_error(head + "0,gpt2-base,10,1,0\n") == ErrorKind::kMalformedTrace);
  CHECK(read_error(head + "5,gpt2-base,10,1,1\n4,gpt2-base,10,1,1\n", &msg) == ErrorKind::kMalformedTrace);
  CHECK(msg.find("sorted") != std::string::npos);
  CHECK(read_error("0,gpt2-base,10,1,1\n") == ErrorKind::kMalformedTrace);
  CHECK(read_error("# lptsim-trace speed=3\n") == ErrorKind::kMalformedTrace);
  CHECK(read_error("# lptsim-trace S=-1\n") == ErrorKind::kMalformedTrace);
  CHECK_THROWS_AS(load_trace("/nonexistent/trace.csv"), Error);
}

TEST_CASE("spiky rates hit the requested peak-to-mean ratio") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (int total : {65, 71, 77, 200}) {
      const auto rates = spiky_rates(total, 20, 5.0, seed);
      CHECK(rates.size() == 20);
      CHECK(std::accumulate(rates.begin(), rates.end(), 0) == total);
      const double mean = total / 20.0;
      const int peak = *std::max_element(rates.begin(), rates.end());
      CHECK(std::abs(peak - 5.0 * mean) <= 0.5 + 1e-9);
      for (int r : rates) CHECK(r >= 0);
    }
  }
  CHECK(spiky_rates(0, 20, 5.0, 1) == std::vector<int>(20, 0));
}

TEST_CASE("generated traces are deterministic and shaped by the rates") {
  const SimConfig cfg = SimConfig::defaults();
  const TaskCatalog tasks = make_task_catalog(cfg, 3);
  CHECK(tasks.at("gpt2-base").size() == static_cast<std::size_t>(cfg.bank.tasks));
  for (const auto& [model, list] : tasks) {
    for (const auto& t : list) {
      CHECK(t.duration_s >= cfg.workload.min_duration_s - 1e-9);
      CHECK(t.duration_s <= cfg.workload.max_duration_s + 1e-9);
      CHECK((t.gpus == 1 || t.gpus == 2 || t.gpus == 4 || t.gpus == 8));
    }
  }

  RateTable zero{{"gpt2-base", std::vector<int>(5, 0)}};
  CHECK(generate_trace(zero, tasks, 1.0, 1).records.empty());

  RateTable rates{{"gpt2-base", {3, 0, 5}}, {"vicuna-7b", {1, 1, 1}}};
  const Trace a = generate_trace(rates, tasks, 1.0, 9);
  const Trace b = generate_trace(rates, tasks, 1.0, 9);
  std::ostringstream sa, sb;
  write_trace(a, sa);
  write_trace(b, sb);
  CHECK(sa.str() == sb.str());
  CHECK(a.records.size() == 11);
  CHECK(a.header.horizon_s == 180.0);
  std::vector<int> per_minute(3, 0);
  for (const auto& r : a.records) {
    if (r.model == "gpt2-base") ++per_minute[static_cast<std::size_t>(r.submit_time_s / 60.0)];
  }
  CHECK(per_minute == std::vector<int>{3, 0, 5});
  CHECK(std::is_sorted(a.records.begin(), a.records.end(),
                       [](const TraceRecord& x, const TraceRecord& y) { return x.submit_time_s < y.submit_time_s; }));
  const Trace c = generate_trace(rates, tasks, 1.0, 10);
  std::ostringstream sc;
  write_trace(c, sc);
  CHECK(sc.str() != sa.str());
}

TEST_CASE("preset traces follow the load table and the 5x spike") {
  const SimConfig cfg = SimConfig::defaults();
  CHECK(preset_request_counts(LoadLevel::kMedium, cfg) == std::vector<int>{77, 71, 65});
  CHECK(preset_request_counts(LoadLevel::kLow, cfg) == std::vector<int>{41, 55, 42});
  CHECK(preset_request_counts(LoadLevel::kHigh, cfg) == std::vector<int>{99, 85, 76});
  SimConfig half = cfg;
  half.total_gpus = 16;
  CHECK(preset_request_counts(LoadLevel::kHigh, half) == std::vector<int>{50, 43, 38});

  const Trace t = preset_trace(LoadLevel::kMedium, cfg, 1.0, 1);
  CHECK(t.records.size() == 213);
  CHECK(t.header.label == "medium");
  CHECK(t.header.horizon_s == 1200.0);
  for (const auto& name : {"gpt2-base", "gpt2-large", "vicuna-7b"}) {
    std::vector<int> per_minute(20, 0);
    int total = 0;
    for (const auto& r : t.records) {
      if (r.model == name) ++per_minute[static_cast<std::size_t>(r.submit_time_s / 60.0)], ++total;
    }
    const int peak = *std::max_element(per_minute.begin(), per_minute.end());
    CHECK(std::abs(peak - 5.0 * total / 20.0) <= 0.5 + 1e-9);
  }
  CHECK(parse_load("high") == LoadLevel::kHigh);
  CHECK_THROWS_AS(parse_load("extreme"), Error);
}

TEST_CASE("ITA calibration pins the median and the maximum") {
  std::vector<double> q;
  for (int i = 0; i <= 100; ++i) q.push_back(0.2 + 0.006 * i * i / 100.0 + 0.001 * i);
  const ItaProfile p = calibrate_ita(q, ItaSettings{1.7, 4.5});
  CHECK(p.multiplier(p.best_quality) == doctest::Approx(1.0));
  CHECK(p.multiplier(p.worst_quality) == doctest::Approx(4.5));
  std::vector<double> m;
  for (double x : q) m.push_back(p.multiplier(x));
  std::nth_element(m.begin(), m.begin() + 50, m.end());
  CHECK(m[50] == doctest::Approx(1.7));
  for (double x : q) CHECK(p.multiplier(x) >= 1.0);
  CHECK(p.multiplier(p.best_quality + 1) == doctest::Approx(1.0));

  CHECK_THROWS_AS(calibrate_ita(std::vector<double>{0.5}, ItaSettings{}), Error);
  CHECK_THROWS_AS(calibrate_ita(std::vector<double>{0.5, 0.5}, ItaSettings{}), Error);
  CHECK_THROWS_AS(calibrate_ita(q, ItaSettings{4.5, 1.7}), Error);
}

TEST_CASE("prompt world: best prompt of each task has multiplier one") {
  SimConfig cfg = SimConfig::defaults();
  cfg.bank.universe = 400;
  cfg.bank.size = 300;
  cfg.bank.capacity = 400;
  cfg.bank.clusters = 10;
  cfg.bank.tasks = 12;
  const PromptWorld w = build_prompt_world(cfg, cfg.models[0]);
  CHECK(w.bank.size() == 300);
  CHECK(w.bank.k() == 10);
  CHECK(w.latency_estimate() == doctest::Approx((10 + 30) * cfg.models[0].bank_eval_cost_s));
  for (int t = 0; t < 12; ++t) {
    const SyntheticScorer truth(w.task_ideal(t), 0.0, 0);
    double best = 10.0;
    for (const auto& p : w.universe.prompts) best = std::min(best, w.profile(t).multiplier(truth.quality(p)));
    CHECK(best == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(w.task_ideal(12), Error);
  CHECK(shared_prompt_world(cfg, cfg.models[0]) == shared_prompt_world(cfg, cfg.models[0]));
}
