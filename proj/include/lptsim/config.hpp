#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "lptsim/core.hpp"

namespace lptsim {

// JSON with the fully resolved configuration, defaults included.
std::string config_to_json(const SimConfig& cfg);

// Parses a JSON configuration. Missing keys keep their defaults; unknown keys
// and out-of-range values throw Error(kInvalidConfig).
SimConfig config_from_json(const std::string& text);

SimConfig load_config(const std::filesystem::path& path);

// Applies one ablation knob: no-warm-allocator, no-delay, no-budget,
// window=N, bank-size=N or clusters=K. Throws Error(kUnknownKnob).
void apply_knob(SimConfig& cfg, std::string_view knob);

// FNV-1a over the resolved JSON; identical configs hash identically.
std::uint64_t config_hash(const SimConfig& cfg);
std::string hash_hex(std::uint64_t h);

}  // namespace lptsim
