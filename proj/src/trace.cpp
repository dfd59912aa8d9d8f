#include "lptsim/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "lptsim/format.hpp"
#include "lptsim/rng.hpp"

namespace lptsim {

namespace {

[[noreturn]] void malformed(std::string_view source, std::size_t line, const std::string& what) {
  std::ostringstream os;
  os << source << ":" << line << ": " << what;
  throw Error(ErrorKind::kMalformedTrace, os.str());
}

template <typename T>
bool parse_num(std::string_view s, T& out) {
  auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc{} && r.ptr == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

void write_trace(const Trace& trace, std::ostream& out) {
  out << "# lptsim-trace seed=" << trace.header.seed << " S=" << format_double(trace.header.S) << " label=" << trace.header.label
      << " horizon_s=" << format_double(trace.header.horizon_s);
  if (!trace.header.config_hash.empty()) out << " config_hash=" << trace.header.config_hash;
  out << '\n';
  for (const auto& r : trace.records) {
    out << format_double(r.submit_time_s) << ',' << r.model << ',' << format_double(r.gpu_time_s) << ',' << r.task_id << ',' << r.gpus
        << '\n';
  }
}

Trace read_trace(std::istream& in, std::string_view source) {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  double last_submit = -1.0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (header_seen || line_no != 1) malformed(source, line_no, "unexpected comment line");
      std::istringstream hs(line.substr(1));
      std::string tag, kv;
      hs >> tag;
      if (tag != "lptsim-trace") malformed(source, line_no, "header must start with '# lptsim-trace'");
      while (hs >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) malformed(source, line_no, "header field '" + kv + "' lacks '='");
        const std::string key = kv.substr(0, eq);
        const std::string_view val = std::string_view(kv).substr(eq + 1);
        bool ok = true;
        if (key == "seed") {
          ok = parse_num(val, trace.header.seed);
        } else if (key == "S") {
          ok = parse_num(val, trace.header.S) && trace.header.S > 0.0;
        } else if (key == "label") {
          trace.header.label = std::string(val);
        } else if (key == "config_hash") {
          trace.header.config_hash = std::string(val);
        } else if (key == "horizon_s") {
          ok = parse_num(val, trace.header.horizon_s) && trace.header.horizon_s >= 0.0;
        } else {
          malformed(source, line_no, "unknown header field '" + key + "'");
        }
        if (!ok) malformed(source, line_no, "bad value for header field '" + key + "'");
      }
      header_seen = true;
      continue;
    }
    const auto parts = split(line, ',');
    if (parts.size() != 5) malformed(source, line_no, "expected 5 comma-separated fields");
    TraceRecord r;
    if (!parse_num(parts[0], r.submit_time_s) || r.submit_time_s < 0.0) {
      malformed(source, line_no, "bad submit_time_s");
    }
    r.model = std::string(parts[1]);
    if (r.model.empty()) malformed(source, line_no, "empty model name");
    if (!parse_num(parts[2], r.gpu_time_s) || !(r.gpu_time_s > 0.0)) malformed(source, line_no, "gpu_time_s must be > 0");
    if (!parse_num(parts[3], r.task_id) || r.task_id < 0) malformed(source, line_no, "bad task_id");
    if (!parse_num(parts[4], r.gpus) || r.gpus < 1) malformed(source, line_no, "gpus must be >= 1");
    if (r.submit_time_s < last_submit) malformed(source, line_no, "records must be sorted by submit time");
    last_submit = r.submit_time_s;
    trace.records.push_back(std::move(r));
  }
  if (!header_seen && !trace.records.empty()) malformed(source, 1, "missing '# lptsim-trace' header");
  return trace;
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kMissingFile, "cannot open trace " + path.string());
  return read_trace(in, path.string());
}

TaskCatalog make_task_catalog(const SimConfig& cfg, std::uint64_t seed) {
  const WorkloadSettings& shape = cfg.workload;
  static constexpr int kGpuChoices[] = {1, 2, 4, 8};
  const double weight_sum = std::accumulate(shape.gpu_weights.begin(), shape.gpu_weights.end(), 0.0);
  TaskCatalog catalog;
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    Rng rng(mix_seed(seed, 0x7a5c, m));
    auto& tasks = catalog[cfg.models[m].id.name];
    for (int t = 0; t < cfg.bank.tasks; ++t) {
      TaskProfile p;
      p.duration_s = std::exp(rng.uniform(std::log(shape.min_duration_s), std::log(shape.max_duration_s)));
      double pick = rng.uniform() * weight_sum;
      std::size_t g = 0;
      while (g + 1 < shape.gpu_weights.size() && pick >= shape.gpu_weights[g]) pick -= shape.gpu_weights[g++];
      p.gpus = kGpuChoices[std::min<std::size_t>(g, 3)];
      const int replica = cfg.models[m].id.gpus_per_replica;
      p.gpus = std::max(replica, p.gpus / replica * replica);
      tasks.push_back(p);
    }
  }
  return catalog;
}

std::vector<int> spiky_rates(int total, int minutes, double peak_to_mean, std::uint64_t seed) {
  if (minutes <= 0 || total < 0 || !(peak_to_mean >= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "spiky_rates: need minutes > 0, total >= 0, peak_to_mean >= 1");
  }
  std::vector<int> rates(static_cast<std::size_t>(minutes), 0);
  if (total == 0) return rates;
  Rng rng(seed);
  const auto spike = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(minutes)));
  const double mean = static_cast<double>(total) / minutes;
  const int peak = std::min(total, static_cast<int>(std::lround(peak_to_mean * mean)));
  rates[spike] = peak;

  // Spread the rest over the other minutes by largest remainder.
  const int rest = total - peak;
  std::vector<double> w(rates.size(), 0.0);
  double wsum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i == spike) continue;
    w[i] = rng.uniform(0.3, 1.7);
    wsum += w[i];
  }
  if (wsum > 0.0 && rest > 0) {
    std::vector<std::pair<double, std::size_t>> frac;
    int assigned = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (i == spike) continue;
      const double exact = rest * w[i] / wsum;
      const int base = static_cast<int>(std::floor(exact));
      rates[i] = base;
      assigned += base;
      frac.emplace_back(exact - base, i);
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t j = 0; assigned < rest; ++j, ++assigned) rates[frac[j % frac.size()].second] += 1;
  } else if (rest > 0) {
    rates[spike] += rest;
  }
  return rates;
}

Trace generate_trace(const RateTable& rates, const TaskCatalog& tasks, double S, std::uint64_t seed,
                     std::string label) {
  if (!(S > 0.0)) throw Error(ErrorKind::kInvalidArgument, "generate_trace: S must be > 0");
  Trace trace;
  trace.header = TraceHeader{seed, S, std::move(label), 0.0, {}};
  std::size_t model_no = 0;
  for (const auto& [model, per_minute] : rates) {
    auto cat = tasks.find(model);
    const bool any = std::any_of(per_minute.begin(), per_minute.end(), [](int n) { return n > 0; });
    if (any && (cat == tasks.end() || cat->second.empty())) {
      throw Error(ErrorKind::kInvalidArgument, "generate_trace: no tasks for model '" + model + "'");
    }
    Rng rng(mix_seed(seed, 0xa11, model_no++));
    trace.header.horizon_s = std::max(trace.header.horizon_s, 60.0 * static_cast<double>(per_minute.size()));
    for (std::size_t minute = 0; minute < per_minute.size(); ++minute) {
      const int n = per_minute[minute];
      if (n < 0) throw Error(ErrorKind::kInvalidArgument, "generate_trace: negative rate");
      if (n == 0) continue;
      std::vector<double> cum(static_cast<std::size_t>(n) + 1);
      double acc = 0.0;
      for (auto& c : cum) c = (acc += rng.exponential(1.0));
      for (int j = 0; j < n; ++j) {
        const auto& task_list = cat->second;
        const auto task = static_cast<int>(rng.below(task_list.size()));
        const TaskProfile& p = task_list[static_cast<std::size_t>(task)];
        TraceRecord r;
        r.submit_time_s = 60.0 * (static_cast<double>(minute) + cum[static_cast<std::size_t>(j)] / cum.back());
        r.model = model;
        r.gpu_time_s = p.gpu_time_s();
        r.task_id = task;
        r.gpus = p.gpus;
        trace.records.push_back(std::move(r));
      }
    }
  }
  std::stable_sort(trace.records.begin(), trace.records.end(),
                   [](const TraceRecord& a, const TraceRecord& b) { return a.submit_time_s < b.submit_time_s; });
  return trace;
}

LoadLevel parse_load(std::string_view name) {
  if (name == "low") return LoadLevel::kLow;
  if (name == "medium") return LoadLevel::kMedium;
  if (name == "high") return LoadLevel::kHigh;
  throw Error(ErrorKind::kInvalidArgument, "unknown load '" + std::string(name) + "' (low|medium|high)");
}

const char* to_string(LoadLevel load) {
  switch (load) {
    case LoadLevel::kLow: return "low";
    case LoadLevel::kMedium: return "medium";
    case LoadLevel::kHigh: return "high";
  }
  return "medium";
}

std::vector<int> preset_request_counts(LoadLevel load, const SimConfig& cfg) {
  static constexpr int kCounts[3][3] = {{41, 55, 42}, {77, 71, 65}, {99, 85, 76}};
  const auto& row = kCounts[static_cast<int>(load)];
  const double scale = cfg.total_gpus / 32.0;
  std::vector<int> counts;
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    const int base = m < 3 ? row[m] : (row[0] + row[1] + row[2]) / 3;
    counts.push_back(static_cast<int>(std::lround(base * scale)));
  }
  return counts;
}

Trace preset_trace(LoadLevel load, const SimConfig& cfg, double S, std::uint64_t seed) {
  constexpr int kMinutes = 20;
  constexpr double kPeakToMean = 5.0;
  const auto counts = preset_request_counts(load, cfg);
  RateTable rates;
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    rates[cfg.models[m].id.name] = spiky_rates(counts[m], kMinutes, kPeakToMean, mix_seed(seed, 0x5b1e, m));
  }
  return generate_trace(rates, make_task_catalog(cfg, seed), S, seed, to_string(load));
}

}  // namespace lptsim
