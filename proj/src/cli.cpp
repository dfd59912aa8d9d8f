#include "lptsim/cli.hpp"

#include <cstdlib>
#include <deque>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lptsim/config.hpp"
#include "lptsim/format.hpp"
#include "lptsim/ita.hpp"
#include "lptsim/report.hpp"
#include "lptsim/rng.hpp"
#include "lptsim/sim.hpp"
#include "lptsim/trace.hpp"

namespace lptsim {

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> knobs;
};

std::string default_out_dir() {
  const char* env = std::getenv("LPTSIM_OUT_DIR");
  return env != nullptr && *env != '\0' ? env : "lptsim_out";
}

SimConfig resolve_config(const CommonFlags& f) {
  SimConfig cfg = f.config_path.empty() ? SimConfig::defaults() : load_config(f.config_path);
  if (f.seed) cfg.rng_seed = *f.seed;
  for (const auto& k : f.knobs) apply_knob(cfg, k);
  cfg.validate();
  return cfg;
}

// Most recent engine snapshots, written to breach.log when a run aborts.
class EventLog {
 public:
  static constexpr std::size_t kKeep = 2000;

  RunOptions options(Policy policy) {
    RunOptions o;
    o.observer = [this, policy](const EngineSnapshot& s) {
      std::ostringstream line;
      line << to_string(policy) << " event=" << s.event_index << " t=" << format_double(s.now) << " cold=" << s.cold
           << " total=" << s.total;
      for (const auto& [model, n] : s.provisioned) line << ' ' << model << '=' << n;
      lines_.push_back(line.str());
      if (lines_.size() > kKeep) lines_.pop_front();
    };
    return o;
  }

  std::string dump() const {
    std::string text;
    for (const auto& l : lines_) text += l + '\n';
    return text;
  }

 private:
  std::deque<std::string> lines_;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_knobs) {
  cmd->add_option("--config", f.config_path, "JSON configuration (defaults when omitted)");
  cmd->add_option("--seed", f.seed, "Seed overriding the configuration");
  cmd->add_option("--out", f.out_dir, "Output directory (default $LPTSIM_OUT_DIR or ./lptsim_out)");
  if (with_knobs) cmd->add_option("--knob", f.knobs, "Configuration knob, repeatable");
}

const ModelSpec& pick_model(const SimConfig& cfg, const std::string& name) {
  if (name.empty()) return cfg.models.front();
  if (cfg.model_index(name) < 0) throw Error(ErrorKind::kInvalidArgument, "unknown model '" + name + "'");
  return cfg.model(name);
}

std::string summary(const RunReport& r) {
  std::ostringstream os;
  os << to_string(r.policy) << ": jobs=" << r.jobs.size() << " violation_pct=" << format_double(r.slo_violation_pct)
     << " cost=" << format_double(r.cost);
  return os.str();
}

int cmd_gen_trace(const CommonFlags& f, const std::string& load, double S, const std::string& name,
                  std::ostream& out) {
  const SimConfig cfg = resolve_config(f);
  Trace trace = preset_trace(parse_load(load), cfg, S, cfg.rng_seed);
  trace.header.config_hash = hash_hex(config_hash(cfg));
  std::ostringstream text;
  write_trace(trace, text);
  const fs::path path = fs::path(f.out_dir) / name;
  write_text_file(path, text.str());
  out << "wrote " << trace.records.size() << " records to " << path.string() << '\n';
  return kExitOk;
}

int cmd_bank_build(const CommonFlags& f, const std::string& model, std::ostream& out) {
  const SimConfig cfg = resolve_config(f);
  const auto world = shared_prompt_world(cfg, pick_model(cfg, model));
  std::ostringstream text;
  save_snapshot(world->bank, text, hash_hex(config_hash(cfg)));
  const fs::path path = fs::path(f.out_dir) / "bank.jsonl";
  write_text_file(path, text.str());
  out << "wrote bank (K=" << world->bank.k() << ", C=" << world->bank.size() << ") to " << path.string() << '\n';
  return kExitOk;
}

int cmd_bank_query(const CommonFlags& f, const std::string& bank_path, const std::string& model, int task,
                   std::ostream& out) {
  const SimConfig cfg = resolve_config(f);
  std::ifstream in(bank_path);
  if (!in) throw Error(ErrorKind::kMissingFile, "cannot open bank " + bank_path);
  const PromptIndex bank = load_snapshot(in);
  const ModelSpec& spec = pick_model(cfg, model);
  const auto world = shared_prompt_world(cfg, spec);
  const FeatureVector& ideal = world->task_ideal(task);
  if (ideal.size() != bank.dim()) throw Error(ErrorKind::kDimensionMismatch, "bank dimension differs from tasks");

  const SyntheticScorer scorer(ideal, cfg.bank.noise_sigma, mix_seed(cfg.rng_seed, 0x5c0e, task));
  const EvalSet eval = EvalSet::synthetic(static_cast<std::size_t>(cfg.bank.eval_samples), mix_seed(cfg.rng_seed, task));
  const LookupResult hit = bank.lookup(eval, scorer);

  const SyntheticScorer truth(ideal, 0.0, 0);
  const auto all = bank.candidates();
  const PromptCandidate* scan_best = nullptr;
  double scan_score = 0.0;
  for (const auto& p : all) {
    const double s = score(p, eval, scorer);
    if (scan_best == nullptr || s < scan_score || (s == scan_score && p.id < scan_best->id)) {
      scan_best = &p;
      scan_score = s;
    }
  }
  const ItaProfile& profile = world->profile(task);
  nlohmann::ordered_json doc;
  doc["seed"] = cfg.rng_seed;
  doc["config_hash"] = hash_hex(config_hash(cfg));
  doc["model"] = spec.id.name;
  doc["task"] = task;
  doc["K"] = bank.k();
  doc["size"] = bank.size();
  doc["best_id"] = hit.best.id;
  doc["best_text"] = hit.best.text;
  doc["cluster"] = hit.cluster;
  doc["evals_performed"] = hit.evals_performed;
  doc["best_score"] = hit.best_score;
  doc["ita_multiplier"] = profile.multiplier(truth.quality(hit.best));
  doc["full_scan_id"] = scan_best->id;
  doc["full_scan_evals"] = all.size();
  doc["full_scan_ita_multiplier"] = profile.multiplier(truth.quality(*scan_best));
  doc["latency_estimate_s"] = bank_latency(bank, spec.bank_eval_cost_s);
  const fs::path path = fs::path(f.out_dir) / "query.json";
  write_text_file(path, doc.dump(2) + "\n");
  out << "best prompt " << hit.best.id << " after " << hit.evals_performed << " evaluations -> " << path.string()
      << '\n';
  return kExitOk;
}

int cmd_simulate(const CommonFlags& f, const std::string& trace_path, const std::string& policy, EventLog& log,
                 std::ostream& out) {
  const SimConfig cfg = resolve_config(f);
  const Policy p = parse_policy(policy);
  const Trace trace = load_trace(trace_path);
  const RunReport report = run(trace, cfg, p, log.options(p));
  write_report(f.out_dir, report, cfg, trace.header);
  out << summary(report) << '\n';
  return kExitOk;
}

int cmd_compare(const CommonFlags& f, const std::string& trace_path, EventLog& log, std::ostream& out) {
  const SimConfig cfg = resolve_config(f);
  const Trace trace = load_trace(trace_path);
  std::ostringstream csv;
  csv << "# seed=" << cfg.rng_seed << " config_hash=" << hash_hex(config_hash(cfg)) << '\n';
  csv << "policy,violation_pct,cost\n";
  for (Policy p : {Policy::kPromptTuner, Policy::kInflessLike, Policy::kElasticflowLike}) {
    const RunReport report = run(trace, cfg, p, log.options(p));
    write_report(fs::path(f.out_dir) / to_string(p), report, cfg, trace.header);
    csv << to_string(p) << ',' << format_double(report.slo_violation_pct) << ',' << format_double(report.cost) << '\n';
    out << summary(report) << '\n';
  }
  write_text_file(fs::path(f.out_dir) / "compare.csv", csv.str());
  return kExitOk;
}

int cmd_ablate(const CommonFlags& f, const std::string& trace_path, const std::string& knob, EventLog& log,
               std::ostream& out) {
  const SimConfig full = resolve_config(f);
  SimConfig ablated = full;
  apply_knob(ablated, knob);
  const Trace trace = load_trace(trace_path);
  const RunReport base = run(trace, full, Policy::kPromptTuner, log.options(Policy::kPromptTuner));
  const RunReport variant = run(trace, ablated, Policy::kPromptTuner, log.options(Policy::kPromptTuner));
  write_report(fs::path(f.out_dir) / "full", base, full, trace.header);
  write_report(fs::path(f.out_dir) / "ablated", variant, ablated, trace.header);
  std::ostringstream csv;
  csv << "# seed=" << full.rng_seed << " config_hash=" << hash_hex(config_hash(full))
      << " ablated_config_hash=" << hash_hex(config_hash(ablated)) << '\n';
  csv << "variant,knob,violation_pct,cost\n";
  csv << "full,," << format_double(base.slo_violation_pct) << ',' << format_double(base.cost) << '\n';
  csv << "ablated," << knob << ',' << format_double(variant.slo_violation_pct) << ',' << format_double(variant.cost)
      << '\n';
  write_text_file(fs::path(f.out_dir) / "ablation.csv", csv.str());
  out << "full " << summary(base) << '\n' << knob << ' ' << summary(variant) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trace-driven simulator for SLO-aware prompt-tuning GPU scheduling", "lptsim"};
  app.require_subcommand(1);

  CommonFlags f;
  f.out_dir = default_out_dir();
  std::string load = "medium";
  double S = 1.0;
  std::string name = "trace.csv";
  std::string model;
  std::string bank_path;
  int task = 0;
  std::string trace_path;
  std::string policy = "prompttuner";
  std::string knob;

  auto* gen = app.add_subcommand("gen-trace", "Generate a preset workload trace");
  add_common(gen, f, true);
  gen->add_option("--load", load, "low, medium or high")->check(CLI::IsMember({"low", "medium", "high"}));
  gen->add_option("--S", S, "SLO emergence factor")->check(CLI::PositiveNumber);
  gen->add_option("--name", name, "File name inside the output directory");

  auto* build = app.add_subcommand("bank-build", "Build a prompt bank snapshot for one model");
  add_common(build, f, true);
  build->add_option("--model", model, "Model name (default: first configured)");

  auto* query = app.add_subcommand("bank-query", "Query a prompt bank snapshot for one task");
  add_common(query, f, true);
  query->add_option("--bank", bank_path, "Bank snapshot file")->required();
  query->add_option("--model", model, "Model whose tasks are queried");
  query->add_option("--task", task, "Task id")->required()->check(CLI::NonNegativeNumber);

  auto* sim = app.add_subcommand("simulate", "Simulate one policy on a trace");
  add_common(sim, f, true);
  sim->add_option("--trace", trace_path, "Trace file")->required();
  sim->add_option("--policy", policy, "prompttuner, infless_like or elasticflow_like")
      ->check(CLI::IsMember({"prompttuner", "infless_like", "elasticflow_like"}));

  auto* cmp = app.add_subcommand("compare", "Simulate all policies on a trace");
  add_common(cmp, f, true);
  cmp->add_option("--trace", trace_path, "Trace file")->required();

  auto* abl = app.add_subcommand("ablate", "Run the full system and one ablated variant");
  add_common(abl, f, false);
  abl->add_option("--trace", trace_path, "Trace file")->required();
  abl->add_option("--knob", knob, "no-warm-allocator, no-delay, no-budget, window=N, bank-size=N or clusters=K")
      ->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  EventLog log;
  try {
    if (*gen) return cmd_gen_trace(f, load, S, name, out);
    if (*build) return cmd_bank_build(f, model, out);
    if (*query) return cmd_bank_query(f, bank_path, model, task, out);
    if (*sim) return cmd_simulate(f, trace_path, policy, log, out);
    if (*cmp) return cmd_compare(f, trace_path, log, out);
    if (*abl) return cmd_ablate(f, trace_path, knob, log, out);
  } catch (const Error& e) {
    err << "lptsim: " << to_string(e.kind()) << ": " << e.what() << '\n';
    if (e.kind() == ErrorKind::kInvariantBreach) {
      try {
        write_text_file(fs::path(f.out_dir) / "breach.log", std::string(e.what()) + "\n" + log.dump());
      } catch (const Error&) {
      }
      return kExitInvariant;
    }
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "lptsim: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitUsage;
}

}  // namespace lptsim
