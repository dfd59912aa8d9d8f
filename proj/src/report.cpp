#include "lptsim/report.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lptsim/config.hpp"
#include "lptsim/format.hpp"

namespace lptsim {

using nlohmann::ordered_json;

namespace {

std::string provenance_line(const SimConfig& cfg) {
  return "# seed=" + std::to_string(cfg.rng_seed) + " config_hash=" + hash_hex(config_hash(cfg)) + "\n";
}

}  // namespace

std::string report_json(const RunReport& report, const SimConfig& cfg, const TraceHeader& trace) {
  std::size_t admitted = 0;
  std::size_t bank_used = 0;
  for (const auto& j : report.jobs) {
    admitted += j.admitted ? 1 : 0;
    bank_used += j.bank_used ? 1 : 0;
  }
  ordered_json doc;
  doc["policy"] = to_string(report.policy);
  doc["seed"] = cfg.rng_seed;
  doc["config_hash"] = hash_hex(config_hash(cfg));
  doc["config"] = ordered_json::parse(config_to_json(cfg));
  doc["trace"] = {{"seed", trace.seed}, {"S", trace.S}, {"label", trace.label}, {"horizon_s", trace.horizon_s}};
  doc["aggregates"] = {
      {"jobs", report.jobs.size()},
      {"admitted", admitted},
      {"violated", report.violated},
      {"slo_violation_pct", report.slo_violation_pct},
      {"bank_used", bank_used},
      {"cost_dollars", report.cost},
      {"gpu_cost_dollars", report.gpu_cost},
      {"storage_cost_dollars", report.storage_cost},
      {"storage_gb_hours", report.storage_gb_hours},
      {"end_time_s", report.end_time},
      {"events", report.events},
  };
  return doc.dump(2) + "\n";
}

std::string jobs_csv(const RunReport& report, const SimConfig& cfg) {
  std::ostringstream out;
  out << provenance_line(cfg);
  out << "id,model,task_id,arrival_s,deadline_s,admitted,start_s,finish_s,gpus,bank_used,bank_time_s,"
         "ita_multiplier,iterations,violated\n";
  for (const auto& j : report.jobs) {
    out << j.id << ',' << j.model << ',' << j.task_id << ',' << format_double(j.arrival) << ','
        << format_double(j.deadline) << ',' << (j.admitted ? 1 : 0) << ',' << format_double(j.start) << ','
        << format_double(j.finish) << ',' << j.gpus << ',' << (j.bank_used ? 1 : 0) << ','
        << format_double(j.bank_time) << ',' << format_double(j.ita_multiplier) << ',' << j.iterations << ','
        << (j.violated ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string pool_series_csv(const RunReport& report, const SimConfig& cfg) {
  std::ostringstream out;
  out << provenance_line(cfg);
  out << "time_s,model,provisioned,busy\n";
  for (const auto& s : report.pool_series) {
    out << format_double(s.time_s) << ',' << s.model << ',' << s.provisioned << ',' << s.busy << '\n';
  }
  return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kMissingFile, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kMissingFile, "failed writing " + path.string());
}

void write_report(const std::filesystem::path& dir, const RunReport& report, const SimConfig& cfg,
                  const TraceHeader& trace) {
  write_text_file(dir / "report.json", report_json(report, cfg, trace));
  write_text_file(dir / "jobs.csv", jobs_csv(report, cfg));
  write_text_file(dir / "pool_series.csv", pool_series_csv(report, cfg));
}

}  // namespace lptsim
