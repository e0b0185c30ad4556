#pragma once

// Behavioural similarity between two point sets via a shortest-path graph
// kernel, and held-out linear probes.

#include "infoprio/common.hpp"

#include <string>
#include <vector>

namespace infoprio::metrics {

/// Complete graph over n labelled vertices. Edge e = (i, j), i < j, stored in
/// lexicographic order; weights are Euclidean distances divided by the
/// smallest one.
class SimilarityGraph {
 public:
  /// Throws DomainError for n < 2 or duplicate points.
  static SimilarityGraph build(const std::vector<Vec>& points);
  /// Graph from already-scaled edge weights in lexicographic (i, j) order.
  /// Labels default to 1..n.
  static SimilarityGraph from_weights(int n, std::vector<double> weights,
                                      std::vector<int> labels = {});

  int vertices() const { return n_; }
  std::size_t edges() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<int>& labels() const { return labels_; }
  /// Endpoint indices of edge e.
  std::pair<int, int> endpoints(std::size_t e) const { return ends_[e]; }
  double weight(int i, int j) const;

 private:
  int n_ = 0;
  std::vector<double> weights_;
  std::vector<int> labels_;
  std::vector<std::pair<int, int>> ends_;
};

enum class VertexKernel { kMatching, kPaperLiteral };

struct KernelConfig {
  double ridge_width = 0.0;  // <= 0 selects the default (max edge weight of both graphs)
  VertexKernel vertex_kernel = VertexKernel::kMatching;
};

/// (1/c) max(0, c - |x - y|).
double brownian_ridge(double x, double y, double c);

/// Resolved ridge width for a graph pair.
double ridge_width(const SimilarityGraph& g1, const SimilarityGraph& g2, const KernelConfig& cfg);

/// (1/|E1|) Σ_{e∈E1} Σ_{f∈E2} k_v(endpoints) · k_e(w_e, w_f). Matching mode
/// evaluates only label-matched edge pairs.
double shortest_path_kernel(const SimilarityGraph& g1, const SimilarityGraph& g2,
                            const KernelConfig& cfg = {});

/// Reference double loop over all edge pairs with the vertex kernel applied
/// to both endpoint pairs.
double shortest_path_kernel_naive(const SimilarityGraph& g1, const SimilarityGraph& g2,
                                  const KernelConfig& cfg = {});

/// Both graphs built from paired samples, then the kernel.
double behavioral_similarity(const std::vector<Vec>& latents, const std::vector<Vec>& gt_states,
                             const KernelConfig& cfg = {});

/// Keeps the first sample of each distinct ground-truth vector (in order).
std::vector<std::size_t> distinct_indices(const std::vector<Vec>& gt_states);

struct ProbeResult {
  double r2 = 0.0;  // mean over target columns with non-zero held-out variance
  Vec r2_per_target;
  bool rank_deficient = false;
  int train_count = 0;
  int test_count = 0;
};

/// OLS with intercept fitted on a seeded 80% split, R² on the held-out 20%.
/// Samples are columns. Rank deficiency is solved by pseudoinverse and flagged.
ProbeResult linear_probe(const Mat& latents, const Mat& targets, std::uint64_t seed = 0,
                         double test_fraction = 0.2);

}  // namespace infoprio::metrics
