#include "lptsim/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace lptsim {

using nlohmann::json;

namespace {

json model_to_json(const ModelSpec& m) {
  return json{{"name", m.id.name},
              {"gpus_per_replica", m.id.gpus_per_replica},
              {"iter_time_s", m.iter_time_s},
              {"cold_transition_s", m.cold_transition_s},
              {"bank_eval_cost_s", m.bank_eval_cost_s}};
}

json to_json_obj(const SimConfig& c) {
  json models = json::array();
  for (const auto& m : c.models) models.push_back(model_to_json(m));
  return json{
      {"models", models},
      {"gpu_price_per_hour", c.cost.gpu_price_per_hour},
      {"storage_price_per_gb_hour", c.cost.storage_price_per_gb_hour},
      {"storage_gb_per_job", c.cost.storage_gb_per_job},
      {"comm_fraction", c.exec.comm_fraction},
      {"tick_interval", c.tick_interval},
      {"reclaim_window", c.reclaim_window},
      {"latency_budget_fraction", c.latency_budget_fraction},
      {"slo_alloc_overhead", c.slo_alloc_overhead},
      {"slo_overhead_share", c.slo_overhead_share},
      {"total_gpus", c.total_gpus},
      {"seed", c.rng_seed},
      {"bank",
       {{"clusters", c.bank.clusters},
        {"capacity", c.bank.capacity},
        {"size", c.bank.size},
        {"universe", c.bank.universe},
        {"eval_samples", c.bank.eval_samples},
        {"dim", c.bank.dim},
        {"topics", c.bank.topics},
        {"tasks", c.bank.tasks},
        {"noise_sigma", c.bank.noise_sigma}}},
      {"ita", {{"median_multiplier", c.ita.median_multiplier}, {"max_multiplier", c.ita.max_multiplier}}},
      {"infless",
       {{"init_min_s", c.infless.init_min_s},
        {"init_max_s", c.infless.init_max_s},
        {"keepalive_s", c.infless.keepalive_s}}},
      {"elasticflow", {{"cluster_gpus", c.elasticflow.cluster_gpus}}},
      {"workload",
       {{"min_duration_s", c.workload.min_duration_s},
        {"max_duration_s", c.workload.max_duration_s},
        {"gpu_weights", c.workload.gpu_weights}}},
      {"ablation",
       {{"warm_allocator", c.ablation.warm_allocator},
        {"delay_schedulable", c.ablation.delay_schedulable},
        {"latency_budget", c.ablation.latency_budget}}},
  };
}

// Reads keys of `obj` into targets, rejecting anything not listed.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) fail("expected an object");
  }

  template <typename T>
  ObjectReader& get(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return *this;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) fail(std::string(key) + ": expected a boolean");
      } else if constexpr (std::is_arithmetic_v<T>) {
        if (!it->is_number()) fail(std::string(key) + ": expected a number");
        if constexpr (std::is_integral_v<T>) {
          if (!it->is_number_integer()) fail(std::string(key) + ": expected an integer");
        }
      } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        if (!it->is_array()) fail(std::string(key) + ": expected an array of numbers");
        for (const auto& v : *it) {
          if (!v.is_number()) fail(std::string(key) + ": expected an array of numbers");
        }
      } else {
        if (!it->is_string()) fail(std::string(key) + ": expected a string");
      }
      out = it->get<T>();
    } catch (const json::exception& e) {
      fail(std::string(key) + ": " + e.what());
    }
    return *this;
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) fail("unknown key '" + k + "'");
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::kInvalidConfig, where_ + ": " + what);
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

std::string config_to_json(const SimConfig& cfg) { return to_json_obj(cfg).dump(2); }

SimConfig config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kInvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  SimConfig cfg = SimConfig::defaults();
  ObjectReader r(root, "config");
  r.get("gpu_price_per_hour", cfg.cost.gpu_price_per_hour)
      .get("storage_price_per_gb_hour", cfg.cost.storage_price_per_gb_hour)
      .get("storage_gb_per_job", cfg.cost.storage_gb_per_job)
      .get("comm_fraction", cfg.exec.comm_fraction)
      .get("tick_interval", cfg.tick_interval)
      .get("reclaim_window", cfg.reclaim_window)
      .get("latency_budget_fraction", cfg.latency_budget_fraction)
      .get("slo_alloc_overhead", cfg.slo_alloc_overhead)
      .get("slo_overhead_share", cfg.slo_overhead_share)
      .get("total_gpus", cfg.total_gpus)
      .get("seed", cfg.rng_seed);

  // A top-level cold_transition_time applies to every model that does not
  // override it.
  double cold_default = -1.0;
  r.get("cold_transition_time", cold_default);

  if (const json* models = r.sub("models")) {
    if (!models->is_array()) r.fail("models: expected an array");
    cfg.models.clear();
    for (std::size_t i = 0; i < models->size(); ++i) {
      ModelSpec m;
      if (cold_default >= 0.0) m.cold_transition_s = cold_default;
      ObjectReader mr((*models)[i], "models[" + std::to_string(i) + "]");
      mr.get("name", m.id.name)
          .get("gpus_per_replica", m.id.gpus_per_replica)
          .get("iter_time_s", m.iter_time_s)
          .get("cold_transition_s", m.cold_transition_s)
          .get("bank_eval_cost_s", m.bank_eval_cost_s);
      mr.finish();
      cfg.models.push_back(std::move(m));
    }
  } else if (cold_default >= 0.0) {
    for (auto& m : cfg.models) m.cold_transition_s = cold_default;
  }

  if (const json* b = r.sub("bank")) {
    ObjectReader br(*b, "bank");
    br.get("clusters", cfg.bank.clusters)
        .get("capacity", cfg.bank.capacity)
        .get("size", cfg.bank.size)
        .get("universe", cfg.bank.universe)
        .get("eval_samples", cfg.bank.eval_samples)
        .get("dim", cfg.bank.dim)
        .get("topics", cfg.bank.topics)
        .get("tasks", cfg.bank.tasks)
        .get("noise_sigma", cfg.bank.noise_sigma);
    br.finish();
  }
  if (const json* it = r.sub("ita")) {
    ObjectReader ir(*it, "ita");
    ir.get("median_multiplier", cfg.ita.median_multiplier).get("max_multiplier", cfg.ita.max_multiplier);
    ir.finish();
  }
  if (const json* inf = r.sub("infless")) {
    ObjectReader ir(*inf, "infless");
    ir.get("init_min_s", cfg.infless.init_min_s)
        .get("init_max_s", cfg.infless.init_max_s)
        .get("keepalive_s", cfg.infless.keepalive_s);
    ir.finish();
  }
  if (const json* ef = r.sub("elasticflow")) {
    ObjectReader er(*ef, "elasticflow");
    er.get("cluster_gpus", cfg.elasticflow.cluster_gpus);
    er.finish();
  }
  if (const json* w = r.sub("workload")) {
    ObjectReader wr(*w, "workload");
    wr.get("min_duration_s", cfg.workload.min_duration_s)
        .get("max_duration_s", cfg.workload.max_duration_s)
        .get("gpu_weights", cfg.workload.gpu_weights);
    wr.finish();
  }
  if (const json* ab = r.sub("ablation")) {
    ObjectReader ar(*ab, "ablation");
    ar.get("warm_allocator", cfg.ablation.warm_allocator)
        .get("delay_schedulable", cfg.ablation.delay_schedulable)
        .get("latency_budget", cfg.ablation.latency_budget);
    ar.finish();
  }
  r.finish();
  cfg.validate();
  return cfg;
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kMissingFile, "cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::uint64_t config_hash(const SimConfig& cfg) {
  const std::string s = to_json_obj(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void apply_knob(SimConfig& cfg, std::string_view knob) {
  auto bad = [&](const std::string& why) {
    throw Error(ErrorKind::kUnknownKnob, "knob '" + std::string(knob) + "': " + why);
  };
  const auto eq = knob.find('=');
  const std::string_view name = knob.substr(0, eq);
  if (eq == std::string_view::npos) {
    if (name == "no-warm-allocator") {
      cfg.ablation.warm_allocator = false;
    } else if (name == "no-delay") {
      cfg.ablation.delay_schedulable = false;
    } else if (name == "no-budget") {
      cfg.ablation.latency_budget = false;
    } else {
      bad("expected no-warm-allocator, no-delay, no-budget, window=N, bank-size=N or clusters=K");
    }
    return;
  }
  const std::string value(knob.substr(eq + 1));
  double number = 0.0;
  std::size_t used = 0;
  try {
    number = std::stod(value, &used);
  } catch (const std::exception&) {
    bad("value is not a number");
  }
  if (used != value.size() || !(number > 0.0)) bad("value must be a positive number");
  const bool integral = number == static_cast<double>(static_cast<long long>(number));
  if (name == "window") {
    cfg.reclaim_window = number;
  } else if (name == "bank-size" || name == "clusters") {
    if (!integral || number > 1e7) bad("value must be a positive integer");
    const int n = static_cast<int>(number);
    if (name == "clusters") {
      cfg.bank.clusters = n;
    } else {
      cfg.bank.size = n;
      cfg.bank.capacity = std::max(cfg.bank.capacity, n);
      cfg.bank.universe = std::max(cfg.bank.universe, n);
      cfg.bank.clusters = std::min(cfg.bank.clusters, n);
    }
  } else {
    bad("unknown knob name");
  }
  cfg.validate();
}

}  // namespace lptsim
