#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lptsim/core.hpp"

namespace lptsim {

struct TraceRecord {
  double submit_time_s = 0.0;
  std::string model;
  double gpu_time_s = 0.0;
  int task_id = 0;
  // GPUs the job held in the original trace; duration = gpu_time / gpus.
  int gpus = 1;

  double duration_s() const { return gpu_time_s / gpus; }
};

struct TraceHeader {
  std::uint64_t seed = 0;
  double S = 1.0;
  std::string label = "custom";
  // Length of the arrival window; cost accounting runs at least this long.
  double horizon_s = 0.0;
  // Hash of the configuration that generated the trace; empty when unknown.
  std::string config_hash;
};

struct Trace {
  TraceHeader header;
  std::vector<TraceRecord> records;
};

// Line format:
//   # lptsim-trace seed=<u64> S=<real> label=<word> horizon_s=<real> [config_hash=<hex>]
//   submit_time_s,model,gpu_time_s,task_id,gpus
void write_trace(const Trace& trace, std::ostream& out);

// Throws Error(kMalformedTrace) naming `source` and the offending line.
Trace read_trace(std::istream& in, std::string_view source = "<trace>");

// Throws kMissingFile when `path` cannot be opened.
Trace load_trace(const std::filesystem::path& path);

struct TaskProfile {
  double duration_s = 60.0;
  int gpus = 1;

  double gpu_time_s() const { return duration_s * gpus; }
};

// Tasks per model, each with its own nominal duration and GPU count.
using TaskCatalog = std::map<std::string, std::vector<TaskProfile>>;

// Durations are log-uniform over the configured range; GPU counts follow
// the configured weights, rounded to whole replicas.
TaskCatalog make_task_catalog(const SimConfig& cfg, std::uint64_t seed);

// Per-minute counts summing to `total` whose busiest minute is
// `peak_to_mean` times the mean (up to integer rounding).
std::vector<int> spiky_rates(int total, int minutes, double peak_to_mean, std::uint64_t seed);

// Per model, per-minute request counts.
using RateTable = std::map<std::string, std::vector<int>>;

// Arrivals inside each minute follow seeded exponential gaps normalised to
// that minute's count; each request draws a task uniformly.
Trace generate_trace(const RateTable& rates, const TaskCatalog& tasks, double S, std::uint64_t seed,
                     std::string label = "custom");

enum class LoadLevel { kLow, kMedium, kHigh };

LoadLevel parse_load(std::string_view name);
const char* to_string(LoadLevel load);

// Requests per model over the 20-minute window, scaled by total_gpus / 32.
std::vector<int> preset_request_counts(LoadLevel load, const SimConfig& cfg);

// Bundled workload: spiky (5x peak/mean) 20-minute trace at the given load.
Trace preset_trace(LoadLevel load, const SimConfig& cfg, double S, std::uint64_t seed);

}  // namespace lptsim
