#include "lptsim/ita.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <tuple>

#include "lptsim/rng.hpp"

namespace lptsim {

namespace {

std::uint64_t name_key(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double hi = v[mid];
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace

double ItaProfile::multiplier(double quality) const {
  const double span = best_quality - worst_quality;
  const double gap = std::clamp((best_quality - quality) / span, 0.0, 1.0);
  return 1.0 + (max_multiplier - 1.0) * std::pow(gap, gamma);
}

ItaProfile calibrate_ita(std::span<const double> qualities, const ItaSettings& settings) {
  if (!(settings.median_multiplier > 1.0) || !(settings.max_multiplier > settings.median_multiplier)) {
    throw Error(ErrorKind::kInvalidArgument, "ITA settings need 1 < median < max");
  }
  if (qualities.size() < 2) throw Error(ErrorKind::kInvalidArgument, "ITA calibration needs >= 2 prompts");
  const auto [lo, hi] = std::minmax_element(qualities.begin(), qualities.end());
  ItaProfile p;
  p.best_quality = *hi;
  p.worst_quality = *lo;
  p.max_multiplier = settings.max_multiplier;
  const double span = p.best_quality - p.worst_quality;
  if (!(span > 0.0)) throw Error(ErrorKind::kInvalidArgument, "ITA calibration needs distinct qualities");

  std::vector<double> gaps;
  gaps.reserve(qualities.size());
  for (double q : qualities) gaps.push_back((p.best_quality - q) / span);
  const double median_gap = std::clamp(median_of(std::move(gaps)), 1e-9, 1.0 - 1e-9);
  p.gamma = std::log((settings.median_multiplier - 1.0) / (settings.max_multiplier - 1.0)) / std::log(median_gap);
  return p;
}

const FeatureVector& PromptWorld::task_ideal(int task_id) const {
  if (task_id < 0 || static_cast<std::size_t>(task_id) >= universe.task_ideals.size()) {
    throw Error(ErrorKind::kInvalidArgument, "task id " + std::to_string(task_id) + " outside the task catalog");
  }
  return universe.task_ideals[static_cast<std::size_t>(task_id)];
}

const ItaProfile& PromptWorld::profile(int task_id) const {
  task_ideal(task_id);
  return ita[static_cast<std::size_t>(task_id)];
}

PromptWorld build_prompt_world(const SimConfig& cfg, const ModelSpec& model) {
  const BankSettings& b = cfg.bank;
  const std::uint64_t seed = mix_seed(cfg.rng_seed, name_key(model.id.name));
  PromptWorld w;
  w.universe = make_synthetic_universe(static_cast<std::size_t>(b.universe), static_cast<std::size_t>(b.tasks),
                                       static_cast<std::size_t>(b.dim), static_cast<std::size_t>(b.topics), seed);
  w.per_eval_cost = model.bank_eval_cost_s;

  std::vector<double> qualities(w.universe.prompts.size());
  for (const auto& ideal : w.universe.task_ideals) {
    const SyntheticScorer truth(ideal, 0.0, 0);
    for (std::size_t i = 0; i < qualities.size(); ++i) qualities[i] = truth.quality(w.universe.prompts[i]);
    w.ita.push_back(calibrate_ita(qualities, cfg.ita));
  }

  const auto size = static_cast<std::size_t>(std::min(b.size, b.universe));
  std::vector<PromptCandidate> members(w.universe.prompts.begin(),
                                       w.universe.prompts.begin() + static_cast<std::ptrdiff_t>(size));
  const auto k = std::min(static_cast<std::size_t>(b.clusters), size);
  w.bank = PromptIndex::build(std::move(members), k, std::max(static_cast<std::size_t>(b.capacity), size),
                              mix_seed(seed, 0xba4c));
  return w;
}

std::shared_ptr<const PromptWorld> shared_prompt_world(const SimConfig& cfg, const ModelSpec& model) {
  using Key = std::tuple<std::uint64_t, std::string, double, int, int, int, int, int, int, int, double, double>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const PromptWorld>> cache;
  const BankSettings& b = cfg.bank;
  const Key key{cfg.rng_seed,         model.id.name, model.bank_eval_cost_s, b.clusters, b.capacity, b.size,
                b.universe,           b.dim,         b.topics,               b.tasks,    cfg.ita.median_multiplier,
                cfg.ita.max_multiplier};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto world = std::make_shared<const PromptWorld>(build_prompt_world(cfg, model));
  cache.emplace(key, world);
  return world;
}

}  // namespace lptsim
