#include "lptsim/promptbank.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "lptsim/rng.hpp"

namespace lptsim {

namespace {

constexpr double kUnitTolerance = 1e-6;

void check_same_dim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "feature dimensions differ: " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
}

double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

}  // namespace

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  check_same_dim(u, v);
  return 1.0 - dot(u, v);
}

double distance(DistanceMetric metric, std::span<const double> u, std::span<const double> v) {
  check_same_dim(u, v);
  switch (metric) {
    case DistanceMetric::kCosine:
      return 1.0 - dot(u, v);
    case DistanceMetric::kEuclidean: {
      double s = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - v[i]) * (u[i] - v[i]);
      return std::sqrt(s);
    }
    case DistanceMetric::kManhattan: {
      double s = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) s += std::abs(u[i] - v[i]);
      return s;
    }
  }
  return 0.0;
}

FeatureVector normalized(FeatureVector v) {
  const double n = norm(v);
  if (!(n > 0.0)) throw Error(ErrorKind::kInvalidArgument, "cannot normalize a zero vector");
  for (double& x : v) x /= n;
  return v;
}

FeatureVector HashingFeatureProvider::extract(std::string_view text) const {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));

  FeatureVector v(dim_, 0.0);
  auto add = [&](std::string_view token, double weight) {
    const std::uint64_t h = fnv1a(token, seed_);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v[h % dim_] += sign * weight;
  };
  // Bias term keeps empty or fully cancelling text representable.
  v[splitmix64(seed_) % dim_] += 1e-3;
  for (std::size_t i = 0; i < words.size(); ++i) {
    add(words[i], 1.0);
    if (i + 1 < words.size()) add(words[i] + ' ' + words[i + 1], 0.5);
  }
  return normalized(std::move(v));
}

// ---------------------------------------------------------------------------

namespace {

struct Assignment {
  std::vector<std::size_t> cluster;
  double cost = 0.0;
};

class KMedoidSolver {
 public:
  KMedoidSolver(std::span<const PromptCandidate> c, const KMedoidOptions& o) : c_(c), opt_(o) {}

  double d(std::size_t i, std::size_t j) const { return distance(opt_.metric, c_[i].features, c_[j].features); }
  std::int64_t id(std::size_t i) const { return c_[i].id; }

  std::vector<std::size_t> seed_medoids(std::size_t k, std::uint64_t seed) const {
    const std::size_t n = c_.size();
    Rng rng(seed);
    std::vector<std::size_t> medoids{static_cast<std::size_t>(rng.below(n))};
    std::vector<bool> chosen(n, false);
    chosen[medoids[0]] = true;
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = d(i, medoids[0]);
    while (medoids.size() < k) {
      std::size_t best = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        if (best == n || nearest[i] > nearest[best] || (nearest[i] == nearest[best] && id(i) < id(best))) best = i;
      }
      chosen[best] = true;
      medoids.push_back(best);
      for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], d(i, best));
    }
    return medoids;
  }

  Assignment assign(const std::vector<std::size_t>& medoids) const {
    const std::size_t n = c_.size();
    Assignment a;
    a.cluster.assign(n, 0);
    std::vector<std::size_t> own(n, medoids.size());
    for (std::size_t m = 0; m < medoids.size(); ++m) own[medoids[m]] = m;
    for (std::size_t i = 0; i < n; ++i) {
      if (own[i] < medoids.size()) {
        a.cluster[i] = own[i];
        continue;
      }
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < medoids.size(); ++m) {
        const double dm = d(i, medoids[m]);
        if (dm < best_d || (dm == best_d && id(medoids[m]) < id(medoids[best]))) {
          best = m;
          best_d = dm;
        }
      }
      a.cluster[i] = best;
      a.cost += best_d;
    }
    return a;
  }

  // Member minimizing the summed distance to the rest of its cluster.
  std::vector<std::size_t> update(const std::vector<std::size_t>& medoids, const Assignment& a) const {
    std::vector<std::vector<std::size_t>> members(medoids.size());
    for (std::size_t i = 0; i < a.cluster.size(); ++i) members[a.cluster[i]].push_back(i);
    std::vector<std::size_t> next = medoids;
    for (std::size_t m = 0; m < medoids.size(); ++m) {
      const auto& mem = members[m];
      double best_sum = std::numeric_limits<double>::infinity();
      for (std::size_t cand : mem) {
        double s = 0.0;
        for (std::size_t other : mem) {
          if (other != cand) s += d(cand, other);
          if (s > best_sum) break;
        }
        if (s < best_sum || (s == best_sum && id(cand) < id(next[m]))) {
          best_sum = s;
          next[m] = cand;
        }
      }
    }
    return next;
  }

 private:
  std::span<const PromptCandidate> c_;
  KMedoidOptions opt_;
};

}  // namespace

Clustering kmedoid(std::span<const PromptCandidate> candidates, std::size_t k, std::uint64_t seed,
                   const KMedoidOptions& options) {
  if (candidates.empty()) throw Error(ErrorKind::kEmptyInput, "kmedoid: no candidates");
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "kmedoid: K must be >= 1");
  if (k > candidates.size()) {
    throw Error(ErrorKind::kKTooLarge, "kmedoid: K=" + std::to_string(k) + " exceeds " +
                                           std::to_string(candidates.size()) + " candidates");
  }
  const std::size_t dim = candidates.front().features.size();
  for (const auto& c : candidates) check_same_dim(c.features, candidates.front().features);
  (void)dim;

  KMedoidSolver solver(candidates, options);
  Clustering out;
  out.medoids = solver.seed_medoids(k, seed);
  Assignment a = solver.assign(out.medoids);
  out.cost_history.push_back(a.cost);

  for (int it = 0; it < options.max_iters; ++it) {
    std::vector<std::size_t> next = solver.update(out.medoids, a);
    if (next == out.medoids) break;
    Assignment na = solver.assign(next);
    // Stop as soon as a round fails to lower the cost; the previous
    // solution is kept so the recorded history never increases.
    if (!(na.cost < a.cost)) break;
    out.medoids = std::move(next);
    a = std::move(na);
    out.cost_history.push_back(a.cost);
    out.iterations = it + 1;
  }
  out.assignment = std::move(a.cluster);
  return out;
}

// ---------------------------------------------------------------------------

EvalSet EvalSet::synthetic(std::size_t n, std::uint64_t seed) {
  EvalSet set;
  set.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t key = mix_seed(seed, i);
    set.samples.push_back(EvalSample{key, "input-" + std::to_string(i), "target-" + std::to_string(i)});
  }
  return set;
}

SyntheticScorer::SyntheticScorer(FeatureVector task_ideal, double sigma, std::uint64_t seed)
    : task_ideal_(std::move(task_ideal)), sigma_(sigma), seed_(seed) {
  if (sigma_ < 0.0) throw Error(ErrorKind::kInvalidArgument, "SyntheticScorer: sigma must be >= 0");
}

double SyntheticScorer::quality(const PromptCandidate& prompt) const {
  check_same_dim(prompt.features, task_ideal_);
  return 0.5 * (1.0 + dot(prompt.features, task_ideal_));
}

double SyntheticScorer::loss(const PromptCandidate& prompt, const EvalSample& sample) const {
  double l = 1.0 - quality(prompt);
  if (sigma_ > 0.0) {
    Rng rng(mix_seed(seed_, static_cast<std::uint64_t>(prompt.id), sample.key));
    l += sigma_ * rng.normal();
  }
  return std::max(0.0, l);
}

double score(const PromptCandidate& prompt, const EvalSet& eval, const Scorer& scorer) {
  if (eval.samples.empty()) throw Error(ErrorKind::kEmptyEvalSet, "score: evaluation set is empty");
  double s = 0.0;
  for (const auto& sample : eval.samples) s += scorer.loss(prompt, sample);
  return s / static_cast<double>(eval.samples.size());
}

// ---------------------------------------------------------------------------

void PromptIndex::check_candidate(const PromptCandidate& p) const {
  if (dim_ != 0 && p.features.size() != dim_) {
    throw Error(ErrorKind::kDimensionMismatch, "candidate " + std::to_string(p.id) + " has dimension " +
                                                   std::to_string(p.features.size()) + ", index expects " +
                                                   std::to_string(dim_));
  }
  if (std::abs(norm(p.features) - 1.0) > kUnitTolerance) {
    throw Error(ErrorKind::kInvalidArgument, "candidate " + std::to_string(p.id) + " is not unit-normalized");
  }
}

PromptIndex PromptIndex::build(std::vector<PromptCandidate> candidates, std::size_t k, std::size_t capacity,
                               std::uint64_t seed, const KMedoidOptions& options) {
  if (candidates.empty()) throw Error(ErrorKind::kEmptyInput, "PromptIndex::build: no candidates");
  if (candidates.size() > capacity) {
    throw Error(ErrorKind::kInvalidArgument, "PromptIndex::build: " + std::to_string(candidates.size()) +
                                                 " candidates exceed capacity " + std::to_string(capacity));
  }
  PromptIndex index;
  index.capacity_ = capacity;
  index.seed_ = seed;
  index.dim_ = candidates.front().features.size();
  for (const auto& c : candidates) {
    index.check_candidate(c);
    if (!index.ids_.insert(c.id).second) {
      throw Error(ErrorKind::kInvalidArgument, "duplicate candidate id " + std::to_string(c.id));
    }
  }

  const Clustering cl = kmedoid(candidates, k, seed, options);
  index.clusters_.resize(k);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto& cluster = index.clusters_[cl.assignment[i]];
    if (cl.medoids[cl.assignment[i]] == i) cluster.medoid = cluster.members.size();
    cluster.members.push_back(std::move(candidates[i]));
  }
  index.size_ = cl.assignment.size();
  return index;
}

PromptIndex PromptIndex::from_clusters(std::vector<PromptCluster> clusters, std::size_t capacity, std::size_t dim,
                                       std::uint64_t seed) {
  PromptIndex index;
  index.capacity_ = capacity;
  index.dim_ = dim;
  index.seed_ = seed;
  for (const auto& cluster : clusters) {
    if (cluster.members.empty() || cluster.medoid >= cluster.members.size()) {
      throw Error(ErrorKind::kInvalidArgument, "cluster without a valid medoid");
    }
    for (const auto& m : cluster.members) {
      index.check_candidate(m);
      if (!index.ids_.insert(m.id).second) {
        throw Error(ErrorKind::kInvalidArgument, "duplicate candidate id " + std::to_string(m.id));
      }
    }
    index.size_ += cluster.members.size();
  }
  if (index.size_ > capacity) throw Error(ErrorKind::kInvalidArgument, "snapshot exceeds its capacity");
  index.clusters_ = std::move(clusters);
  return index;
}

LookupResult PromptIndex::lookup(const EvalSet& eval, const Scorer& scorer) const {
  if (empty()) throw Error(ErrorKind::kEmptyIndex, "lookup on an empty prompt index");
  if (eval.samples.empty()) throw Error(ErrorKind::kEmptyEvalSet, "lookup: evaluation set is empty");

  LookupResult r;
  double best_cluster_score = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < clusters_.size(); ++c) {
    const double s = score(clusters_[c].representative(), eval, scorer);
    ++r.evals_performed;
    if (s < best_cluster_score ||
        (s == best_cluster_score && clusters_[c].representative().id < clusters_[r.cluster].representative().id)) {
      best_cluster_score = s;
      r.cluster = c;
    }
  }

  const auto& members = clusters_[r.cluster].members;
  const PromptCandidate* best = nullptr;
  r.best_score = std::numeric_limits<double>::infinity();
  for (const auto& m : members) {
    const double s = score(m, eval, scorer);
    ++r.evals_performed;
    if (s < r.best_score || (s == r.best_score && m.id < best->id)) {
      r.best_score = s;
      best = &m;
    }
  }
  r.best = *best;
  return r;
}

std::size_t PromptIndex::nearest_cluster(std::span<const double> features) const {
  if (clusters_.empty()) throw Error(ErrorKind::kEmptyIndex, "prompt index has no clusters");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < clusters_.size(); ++c) {
    const auto& rep = clusters_[c].representative();
    const double dc = cosine_distance(features, rep.features);
    if (dc < best_d || (dc == best_d && rep.id < clusters_[best].representative().id)) {
      best_d = dc;
      best = c;
    }
  }
  return best;
}

std::optional<PromptCandidate> PromptIndex::insert(PromptCandidate p) {
  check_candidate(p);
  if (ids_.count(p.id)) throw Error(ErrorKind::kInvalidArgument, "duplicate candidate id " + std::to_string(p.id));
  const std::size_t c = nearest_cluster(p.features);
  ids_.insert(p.id);
  clusters_[c].members.push_back(std::move(p));
  ++size_;
  if (size_ <= capacity_) return std::nullopt;
  PromptCandidate removed = replace_within(clusters_[c]);
  ids_.erase(removed.id);
  --size_;
  return removed;
}

void PromptIndex::rebuild(std::uint64_t seed, const KMedoidOptions& options) {
  const std::size_t k = clusters_.size();
  *this = build(candidates(), k, capacity_, seed, options);
}

std::vector<PromptCandidate> PromptIndex::candidates() const {
  std::vector<PromptCandidate> all;
  all.reserve(size_);
  for (const auto& c : clusters_) all.insert(all.end(), c.members.begin(), c.members.end());
  return all;
}

PromptCandidate replace_within(PromptCluster& cluster) {
  if (cluster.members.size() < 2) {
    throw Error(ErrorKind::kClusterTooSmall, "replacement needs a non-medoid member");
  }
  const auto& rep = cluster.representative();
  std::size_t victim = cluster.members.size();
  double victim_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cluster.members.size(); ++i) {
    if (i == cluster.medoid) continue;
    const double di = cosine_distance(cluster.members[i].features, rep.features);
    if (di < victim_d || (di == victim_d && cluster.members[i].id < cluster.members[victim].id)) {
      victim_d = di;
      victim = i;
    }
  }
  PromptCandidate removed = std::move(cluster.members[victim]);
  cluster.members.erase(cluster.members.begin() + static_cast<std::ptrdiff_t>(victim));
  if (victim < cluster.medoid) --cluster.medoid;
  return removed;
}

double bank_latency(const PromptIndex& index, double per_eval_cost) {
  if (!(per_eval_cost > 0.0)) throw Error(ErrorKind::kInvalidArgument, "bank_latency: per_eval_cost must be > 0");
  return (static_cast<double>(index.k()) + index.mean_cluster_size()) * per_eval_cost;
}

// ---------------------------------------------------------------------------

SyntheticUniverse make_synthetic_universe(std::size_t prompts, std::size_t tasks, std::size_t dim,
                                          std::size_t topics, std::uint64_t seed) {
  if (dim < 2 || topics == 0) throw Error(ErrorKind::kInvalidArgument, "synthetic universe needs dim >= 2, topics >= 1");
  Rng rng(seed);
  auto gaussian = [&](double scale) {
    FeatureVector v(dim);
    for (double& x : v) x = scale * rng.normal();
    return v;
  };
  std::vector<FeatureVector> centres;
  for (std::size_t t = 0; t < topics; ++t) centres.push_back(normalized(gaussian(1.0)));

  // Per-coordinate spread such that a member sits at cosine ~0.85 from its
  // topic centre.
  const double spread = 0.6 / std::sqrt(static_cast<double>(dim));
  auto around = [&](const FeatureVector& c) {
    FeatureVector v = gaussian(spread);
    for (std::size_t i = 0; i < dim; ++i) v[i] += c[i];
    return normalized(std::move(v));
  };

  SyntheticUniverse u;
  u.prompts.reserve(prompts);
  for (std::size_t i = 0; i < prompts; ++i) {
    const std::size_t t = rng.below(topics);
    u.prompts.push_back(PromptCandidate{static_cast<std::int64_t>(i),
                                        "prompt " + std::to_string(i) + " (topic " + std::to_string(t) + ")",
                                        around(centres[t])});
  }
  for (std::size_t i = 0; i < tasks; ++i) {
    const std::size_t t = rng.below(topics);
    u.task_ideals.push_back(around(centres[t]));
  }
  return u;
}

}  // namespace lptsim
