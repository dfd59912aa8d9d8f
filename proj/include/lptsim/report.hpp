#pragma once

#include <filesystem>
#include <string>

#include "lptsim/core.hpp"
#include "lptsim/sim.hpp"
#include "lptsim/trace.hpp"

namespace lptsim {

// Aggregates plus the resolved configuration, its hash and the trace header.
std::string report_json(const RunReport& report, const SimConfig& cfg, const TraceHeader& trace);

// Both CSVs start with a "# seed=... config_hash=..." comment line.
std::string jobs_csv(const RunReport& report, const SimConfig& cfg);
std::string pool_series_csv(const RunReport& report, const SimConfig& cfg);

// Writes report.json, jobs.csv and pool_series.csv into `dir`.
void write_report(const std::filesystem::path& dir, const RunReport& report, const SimConfig& cfg,
                  const TraceHeader& trace);

// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace lptsim
