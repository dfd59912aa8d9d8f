#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "lptsim/core.hpp"
#include "lptsim/promptbank.hpp"

namespace lptsim {

// Maps a prompt's true quality for one task to its ITA multiplier. The best
// prompt of the universe gets 1, the worst gets `max_multiplier`, and the
// curve m = 1 + (max - 1) * gap^gamma is bent so that the median prompt
// lands on `median_multiplier`; gap is the normalised quality shortfall.
struct ItaProfile {
  double best_quality = 1.0;
  double worst_quality = 0.0;
  double gamma = 1.0;
  double max_multiplier = 4.5;

  double multiplier(double quality) const;
};

// Throws kInvalidArgument on fewer than two distinct qualities or settings
// outside 1 < median < max.
ItaProfile calibrate_ita(std::span<const double> qualities, const ItaSettings& settings);

// Everything the simulator needs to know about prompts for one model: the
// candidate universe, the bank built from a prefix of it, and an ITA
// profile per task.
struct PromptWorld {
  SyntheticUniverse universe;
  PromptIndex bank;
  std::vector<ItaProfile> ita;
  double per_eval_cost = 0.0;

  double latency_estimate() const { return bank_latency(bank, per_eval_cost); }
  const FeatureVector& task_ideal(int task_id) const;
  const ItaProfile& profile(int task_id) const;
};

PromptWorld build_prompt_world(const SimConfig& cfg, const ModelSpec& model);

// Memoised build_prompt_world keyed by the fields it reads.
std::shared_ptr<const PromptWorld> shared_prompt_world(const SimConfig& cfg, const ModelSpec& model);

}  // namespace lptsim
