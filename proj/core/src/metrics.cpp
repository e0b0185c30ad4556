#include "infoprio/metrics.hpp"

#include "infoprio/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace infoprio::metrics {

SimilarityGraph SimilarityGraph::build(const std::vector<Vec>& points) {
  const int n = static_cast<int>(points.size());
  if (n < 2) throw DomainError("similarity graph needs at least 2 points");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  double min_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (points[i].size() != points[j].size()) throw ShapeError("points differ in dimension");
      const double dist = (points[i] - points[j]).norm();
      if (dist == 0.0) {
        throw DomainError("duplicate points " + std::to_string(i) + " and " + std::to_string(j));
      }
      d.push_back(dist);
      min_d = std::min(min_d, dist);
    }
  }
  for (double& w : d) w /= min_d;
  return from_weights(n, std::move(d));
}

SimilarityGraph SimilarityGraph::from_weights(int n, std::vector<double> weights,
                                              std::vector<int> labels) {
  if (n < 2) throw DomainError("similarity graph needs at least 2 vertices");
  if (weights.size() != static_cast<std::size_t>(n * (n - 1) / 2)) {
    throw ShapeError("expected " + std::to_string(n * (n - 1) / 2) + " edge weights");
  }
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("edge weights must be positive");
  if (labels.empty()) {
    labels.resize(static_cast<std::size_t>(n));
    std::iota(labels.begin(), labels.end(), 1);
  }
  if (labels.size() != static_cast<std::size_t>(n)) throw ShapeError("one label per vertex");
  auto sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw DomainError("vertex labels must be distinct");
  }
  SimilarityGraph g;
  g.n_ = n;
  g.weights_ = std::move(weights);
  g.labels_ = std::move(labels);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.ends_.emplace_back(i, j);
  return g;
}

double SimilarityGraph::weight(int i, int j) const {
  if (i == j) return 0.0;
  if (i > j) std::swap(i, j);
  // Offset of row i in the packed upper triangle.
  const std::size_t base = static_cast<std::size_t>(i) * static_cast<std::size_t>(2 * n_ - i - 1) / 2;
  return weights_[base + static_cast<std::size_t>(j - i - 1)];
}

double brownian_ridge(double x, double y, double c) {
  return std::max(0.0, c - std::abs(x - y)) / c;
}

double ridge_width(const SimilarityGraph& g1, const SimilarityGraph& g2, const KernelConfig& cfg) {
  if (cfg.ridge_width > 0.0) return cfg.ridge_width;
  double c = 0.0;
  for (double w : g1.weights()) c = std::max(c, w);
  for (double w : g2.weights()) c = std::max(c, w);
  return c;
}

namespace {

void check_pair(const SimilarityGraph& g1, const SimilarityGraph& g2) {
  if (g1.vertices() != g2.vertices()) {
    throw ShapeError("graphs have " + std::to_string(g1.vertices()) + " and " +
                     std::to_string(g2.vertices()) + " vertices");
  }
}

std::pair<int, int> label_pair(const SimilarityGraph& g, std::size_t e) {
  const auto [i, j] = g.endpoints(e);
  const int a = g.labels()[static_cast<std::size_t>(i)];
  const int b = g.labels()[static_cast<std::size_t>(j)];
  return {std::min(a, b), std::max(a, b)};
}

double vertex_kernel(int x, int y, VertexKernel mode) {
  const double delta = x == y ? 1.0 : 0.0;
  return mode == VertexKernel::kMatching ? delta : 1.0 - delta;
}

}  // namespace

double shortest_path_kernel_naive(const SimilarityGraph& g1, const SimilarityGraph& g2,
                                  const KernelConfig& cfg) {
  check_pair(g1, g2);
  const double c = ridge_width(g1, g2, cfg);
  double total = 0.0;
  for (std::size_t e = 0; e < g1.edges(); ++e) {
    const auto [a1, b1] = label_pair(g1, e);
    for (std::size_t f = 0; f < g2.edges(); ++f) {
      const auto [a2, b2] = label_pair(g2, f);
      const double kv = vertex_kernel(a1, a2, cfg.vertex_kernel) * vertex_kernel(b1, b2, cfg.vertex_kernel);
      total += kv * brownian_ridge(g1.weights()[e], g2.weights()[f], c);
    }
  }
  return total / static_cast<double>(g1.edges());
}

double shortest_path_kernel(const SimilarityGraph& g1, const SimilarityGraph& g2,
                            const KernelConfig& cfg) {
  if (cfg.vertex_kernel == VertexKernel::kPaperLiteral) return shortest_path_kernel_naive(g1, g2, cfg);
  check_pair(g1, g2);
  const double c = ridge_width(g1, g2, cfg);
  std::map<std::pair<int, int>, std::size_t> index;
  for (std::size_t f = 0; f < g2.edges(); ++f) index.emplace(label_pair(g2, f), f);
  double total = 0.0;
  for (std::size_t e = 0; e < g1.edges(); ++e) {
    const auto it = index.find(label_pair(g1, e));
    if (it == index.end()) continue;
    total += brownian_ridge(g1.weights()[e], g2.weights()[it->second], c);
  }
  return total / static_cast<double>(g1.edges());
}

double behavioral_similarity(const std::vector<Vec>& latents, const std::vector<Vec>& gt_states,
                             const KernelConfig& cfg) {
  if (latents.size() != gt_states.size()) {
    throw ShapeError("latent and ground-truth sample counts differ");
  }
  return shortest_path_kernel(SimilarityGraph::build(latents), SimilarityGraph::build(gt_states), cfg);
}

std::vector<std::size_t> distinct_indices(const std::vector<Vec>& gt_states) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < gt_states.size(); ++i) {
    bool seen = false;
    for (std::size_t k : keep) {
      if (gt_states[k].size() == gt_states[i].size() && gt_states[k] == gt_states[i]) {
        seen = true;
        break;
      }
    }
    if (!seen) keep.push_back(i);
  }
  return keep;
}

ProbeResult linear_probe(const Mat& latents, const Mat& targets, std::uint64_t seed,
                         double test_fraction) {
  const Eigen::Index n = latents.cols();
  if (targets.cols() != n) throw ShapeError("probe: latent and target counts differ");
  if (n <= latents.rows() + 1) {
    throw DomainError("probe: need more than latent_dim + 1 samples");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::stream(seed, "probe-split");
  for (Eigen::Index i = n - 1; i > 0; --i) {
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i) + 1))]);
  }
  const Eigen::Index n_test =
      std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(test_fraction * n)));
  const Eigen::Index n_train = n - n_test;
  const Eigen::Index p = latents.rows() + 1;

  Mat X_train(n_train, p), Y_train(n_train, targets.rows());
  Mat X_test(n_test, p), Y_test(n_test, targets.rows());
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index s = order[static_cast<std::size_t>(k)];
    if (k < n_test) {
      X_test(k, 0) = 1.0;
      X_test.row(k).tail(p - 1) = latents.col(s).transpose();
      Y_test.row(k) = targets.col(s).transpose();
    } else {
      X_train(k - n_test, 0) = 1.0;
      X_train.row(k - n_test).tail(p - 1) = latents.col(s).transpose();
      Y_train.row(k - n_test) = targets.col(s).transpose();
    }
  }
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(X_train);
  ProbeResult r;
  r.train_count = static_cast<int>(n_train);
  r.test_count = static_cast<int>(n_test);
  r.rank_deficient = cod.rank() < p;
  const Mat beta = cod.solve(Y_train);
  const Mat pred = X_test * beta;
  r.r2_per_target = Vec::Constant(targets.rows(), std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  int used = 0;
  for (Eigen::Index t = 0; t < targets.rows(); ++t) {
    const double mean = Y_test.col(t).mean();
    const double ss_tot = (Y_test.col(t).array() - mean).square().sum();
    if (ss_tot <= 0.0) continue;
    const double ss_res = (Y_test.col(t) - pred.col(t)).squaredNorm();
    r.r2_per_target[t] = 1.0 - ss_res / ss_tot;
    sum += r.r2_per_target[t];
    ++used;
  }
  r.r2 = used > 0 ? sum / used : 0.0;
  return r;
}

}  // namespace infoprio::metrics
