#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "lptsim/error.hpp"

namespace lptsim {

using FeatureVector = std::vector<double>;

struct PromptCandidate {
  std::int64_t id = 0;
  std::string text;
  // Unit L2 norm; every candidate of one index has the same dimension.
  FeatureVector features;
};

// 1 - <u, v> for unit vectors, in [0, 2].
double cosine_distance(std::span<const double> u, std::span<const double> v);

enum class DistanceMetric { kCosine, kEuclidean, kManhattan };

double distance(DistanceMetric metric, std::span<const double> u, std::span<const double> v);

// Returns `v` scaled to unit norm; throws kInvalidArgument on a zero vector.
FeatureVector normalized(FeatureVector v);

// Maps prompt text to activation-like features.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual FeatureVector extract(std::string_view text) const = 0;
};

// Signed feature hashing of lower-cased word unigrams and bigrams.
class HashingFeatureProvider final : public FeatureProvider {
 public:
  HashingFeatureProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}
  std::size_t dim() const override { return dim_; }
  FeatureVector extract(std::string_view text) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// K-medoid clustering

struct KMedoidOptions {
  int max_iters = 100;
  DistanceMetric metric = DistanceMetric::kCosine;
};

struct Clustering {
  // Positions (into the input span) of the medoids, one per cluster.
  std::vector<std::size_t> medoids;
  // Cluster index of every input candidate.
  std::vector<std::size_t> assignment;
  // Total assignment cost after seeding and after every iteration.
  std::vector<double> cost_history;
  int iterations = 0;

  double cost() const { return cost_history.empty() ? 0.0 : cost_history.back(); }
};

// PAM-style alternating clustering: farthest-point seeding from a seeded
// first pick, then assignment / medoid-update rounds until the cost stops
// decreasing or `max_iters` is reached. Ties go to the lowest candidate id.
Clustering kmedoid(std::span<const PromptCandidate> candidates, std::size_t k, std::uint64_t seed,
                   const KMedoidOptions& options = {});

// ---------------------------------------------------------------------------
// Scoring

struct EvalSample {
  std::uint64_t key = 0;
  std::string input;
  std::string target;
};

struct EvalSet {
  std::vector<EvalSample> samples;

  // `n` abstract samples with keys derived from `seed`.
  static EvalSet synthetic(std::size_t n, std::uint64_t seed);
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  // Loss of the prompt prepended to the sample input, against its target.
  virtual double loss(const PromptCandidate& prompt, const EvalSample& sample) const = 0;
};

// Ground truth for simulations: quality q = (1 + cos(p, task)) / 2 and
// loss = (1 - q) + N(0, sigma), clamped at zero. The noise is a pure
// function of (seed, prompt id, sample key).
class SyntheticScorer final : public Scorer {
 public:
  SyntheticScorer(FeatureVector task_ideal, double sigma, std::uint64_t seed);

  double quality(const PromptCandidate& prompt) const;
  double loss(const PromptCandidate& prompt, const EvalSample& sample) const override;

  const FeatureVector& task_ideal() const { return task_ideal_; }

 private:
  FeatureVector task_ideal_;
  double sigma_;
  std::uint64_t seed_;
};

// Wraps another scorer and counts loss calls.
class CountingScorer final : public Scorer {
 public:
  explicit CountingScorer(const Scorer& inner) : inner_(inner) {}

  double loss(const PromptCandidate& prompt, const EvalSample& sample) const override {
    ++calls_;
    return inner_.loss(prompt, sample);
  }

  std::size_t calls() const { return calls_; }
  void reset() { calls_ = 0; }

 private:
  const Scorer& inner_;
  mutable std::size_t calls_ = 0;
};

// Mean loss over the evaluation set; smaller is better.
double score(const PromptCandidate& prompt, const EvalSet& eval, const Scorer& scorer);

// ---------------------------------------------------------------------------
// Two-layer index

struct PromptCluster {
  std::size_t medoid = 0;  // position of the medoid within `members`
  std::vector<PromptCandidate> members;

  const PromptCandidate& representative() const { return members[medoid]; }
};

struct LookupResult {
  PromptCandidate best;
  std::size_t cluster = 0;
  std::size_t evals_performed = 0;
  double best_score = 0.0;
};

class PromptIndex {
 public:
  PromptIndex() = default;

  // Clusters `candidates` into `k` groups. Throws kEmptyInput, kKTooLarge,
  // kDimensionMismatch, or kInvalidArgument (capacity below the candidate
  // count, duplicate ids, non-unit features).
  static PromptIndex build(std::vector<PromptCandidate> candidates, std::size_t k, std::size_t capacity,
                           std::uint64_t seed, const KMedoidOptions& options = {});

  // Restores an index from explicit clusters (snapshot loading).
  static PromptIndex from_clusters(std::vector<PromptCluster> clusters, std::size_t capacity, std::size_t dim,
                                   std::uint64_t seed);

  // Layer 1 scores every medoid, layer 2 every member of the best cluster.
  LookupResult lookup(const EvalSet& eval, const Scorer& scorer) const;

  // Appends `p` to the cluster whose medoid is nearest; evicts within that
  // cluster when the index exceeds capacity. Returns the evicted candidate.
  std::optional<PromptCandidate> insert(PromptCandidate p);

  // Re-clusters every candidate from scratch.
  void rebuild(std::uint64_t seed, const KMedoidOptions& options = {});

  // Index of the cluster whose medoid is nearest to `features`.
  std::size_t nearest_cluster(std::span<const double> features) const;

  std::size_t size() const { return size_; }
  std::size_t k() const { return clusters_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  bool empty() const { return size_ == 0; }
  const std::vector<PromptCluster>& clusters() const { return clusters_; }
  double mean_cluster_size() const { return clusters_.empty() ? 0.0 : double(size_) / double(clusters_.size()); }

  // Every candidate, cluster by cluster.
  std::vector<PromptCandidate> candidates() const;

 private:
  void check_candidate(const PromptCandidate& p) const;

  std::vector<PromptCluster> clusters_;
  std::unordered_set<std::int64_t> ids_;
  std::size_t size_ = 0;
  std::size_t capacity_ = 0;
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
};

// Removes the non-medoid member closest to the medoid (ties: lowest id).
// Throws kClusterTooSmall when the cluster has no non-medoid member.
PromptCandidate replace_within(PromptCluster& cluster);

// Expected lookup cost before running it: (K + mean cluster size) evals.
double bank_latency(const PromptIndex& index, double per_eval_cost);

// Snapshot: a header line followed by one JSON record per candidate.
// Doubles are written in shortest round-trip form. A non-empty `config_hash`
// is recorded in the header for provenance.
void save_snapshot(const PromptIndex& index, std::ostream& out, std::string_view config_hash = {});
PromptIndex load_snapshot(std::istream& in);

// ---------------------------------------------------------------------------
// Synthetic prompt universe

struct SyntheticUniverse {
  std::vector<PromptCandidate> prompts;
  std::vector<FeatureVector> task_ideals;
};

// Prompts and task-ideal vectors scattered around shared topic centres, so
// that similar prompts suit similar tasks.
SyntheticUniverse make_synthetic_universe(std::size_t prompts, std::size_t tasks, std::size_t dim,
                                          std::size_t topics, std::uint64_t seed);

}  // namespace lptsim
