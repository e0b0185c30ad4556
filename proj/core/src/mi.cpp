#include "infoprio/mi.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace infoprio::mi {

double exact_mi_discrete(const Mat& joint) {
  if (joint.size() == 0) throw DomainError("empty joint");
  if ((joint.array() < 0.0).any() || !joint.allFinite()) {
    throw DomainError("joint has negative or non-finite entries");
  }
  const double total = joint.sum();
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError("joint sums to " + std::to_string(total) + ", not 1");
  }
  const Vec px = joint.rowwise().sum();
  const Vec py = joint.colwise().sum().transpose();
  double mi = 0.0;
  for (Eigen::Index y = 0; y < joint.cols(); ++y) {
    for (Eigen::Index x = 0; x < joint.rows(); ++x) {
      const double p = joint(x, y);
      if (p > 0.0) mi += p * std::log(p / (px[x] * py[y]));
    }
  }
  return std::max(0.0, mi);
}

double exact_mi_gaussian(double rho, int dims) {
  if (!(std::abs(rho) < 1.0)) throw DomainError("|rho| must be < 1");
  if (dims < 1) throw DomainError("dims must be >= 1");
  return dims * (-0.5 * std::log1p(-rho * rho));
}

double entropy(const Vec& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

std::string to_string(NegativeScheme s) {
  switch (s) {
    case NegativeScheme::kTime: return "time";
    case NegativeScheme::kBatch: return "batch";
    case NegativeScheme::kBoth: return "both";
  }
  return "?";
}

NegativeScheme negative_scheme_from_string(const std::string& s) {
  if (s == "time") return NegativeScheme::kTime;
  if (s == "batch") return NegativeScheme::kBatch;
  if (s == "both") return NegativeScheme::kBoth;
  throw ConfigError("negative_scheme", "unknown value '" + s + "'");
}

nlohmann::json to_json(const MIBoundEstimate& e) {
  return {{"name", e.name},
          {"value", e.value},
          {"count", e.count},
          {"standard_error", e.standard_error},
          {"scheme", e.scheme}};
}

MIBoundEstimate summarize(std::string name, const Vec& terms, std::string scheme) {
  MIBoundEstimate e;
  e.name = std::move(name);
  e.scheme = std::move(scheme);
  e.count = static_cast<std::size_t>(terms.size());
  if (terms.size() == 0) return e;
  e.value = terms.mean();
  if (terms.size() > 1) {
    const double var = (terms.array() - e.value).square().sum() / static_cast<double>(terms.size() - 1);
    e.standard_error = std::sqrt(var / static_cast<double>(terms.size()));
  }
  return e;
}

Mat negative_mask(int windows, int steps, NegativeScheme scheme) {
  const int n = windows * steps;
  Mat neg = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      const bool same_window = i / steps == j / steps;
      const bool same_step = i % steps == j % steps;
      switch (scheme) {
        case NegativeScheme::kTime: neg(i, j) = same_window ? 1.0 : 0.0; break;
        case NegativeScheme::kBatch: neg(i, j) = same_step ? 1.0 : 0.0; break;
        case NegativeScheme::kBoth: neg(i, j) = 1.0; break;
      }
    }
  }
  return neg;
}

Mat all_pairs_mask(int n) { return Mat::Ones(n, n) - Mat::Identity(n, n); }

ScoreBound nce_from_scores(const Mat& scores, const Mat& neg, NceMode mode) {
  if (scores.rows() != scores.cols() || neg.rows() != scores.rows() || neg.cols() != scores.cols()) {
    throw ShapeError("nce: scores and mask must be square and equal in shape");
  }
  const Eigen::Index n = scores.cols();
  const bool inclusive = mode == NceMode::kInclusive;
  ScoreBound out;
  out.terms.resize(n);
  out.grad = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    // Differences to the positive score keep the constant-critic cases exact.
    double m = inclusive ? 0.0 : -std::numeric_limits<double>::infinity();
    int k = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (neg(i, j) != 0.0 && i != j) {
        m = std::max(m, scores(i, j) - scores(j, j));
        ++k;
      }
    }
    if (k == 0) throw DomainError("nce: latent " + std::to_string(j) + " has no negatives");
    double z = inclusive ? std::exp(-m) : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (neg(i, j) != 0.0 && i != j) z += std::exp(scores(i, j) - scores(j, j) - m);
    }
    const double lse = m + std::log(z);
    out.terms[j] = -lse + (inclusive ? std::log(static_cast<double>(k) + 1.0) : 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    double pos_grad = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (neg(i, j) != 0.0 && i != j) {
        const double p = std::exp(scores(i, j) - scores(j, j) - lse);
        out.grad(i, j) = -p * inv_n;
      }
    }
    if (inclusive) pos_grad -= std::exp(-lse);
    out.grad(j, j) = pos_grad * inv_n;
  }
  out.estimate = summarize(inclusive ? "nce-inclusive" : "nce-exclusive", out.terms);
  return out;
}

ScoreBound nwj_from_scores(const Mat& scores, const std::vector<int>& marginal) {
  const Eigen::Index n = scores.cols();
  if (scores.rows() != n || static_cast<Eigen::Index>(marginal.size()) != n) {
    throw ShapeError("nwj: scores must be square with one marginal partner per latent");
  }
  if (n == 0) throw DomainError("nwj: empty batch");
  ScoreBound out;
  out.terms.resize(n);
  out.grad = Mat::Zero(n, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int m = marginal[static_cast<std::size_t>(j)];
    const double e = std::exp(scores(m, j) - 1.0);
    if (!std::isfinite(e)) {
      throw NumericError("nwj: exp overflow at score " + std::to_string(scores(m, j)));
    }
    out.terms[j] = scores(j, j) - e;
    out.grad(j, j) += inv_n;
    out.grad(m, j) -= e * inv_n;
  }
  out.estimate = summarize("nwj", out.terms);
  return out;
}

std::vector<int> shuffled_pairing(int n, Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(p[i], p[rng.uniform_int(i + 1)]);
  return p;
}

// ---------------------------------------------------------------------------

BilinearCritic BilinearCritic::random(int obs_dim, int latent_dim, int embed_dim,
                                      const std::vector<int>& hidden, bool latent_side, Rng& rng) {
  BilinearCritic c;
  std::vector<int> w{obs_dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(embed_dim);
  c.obs_embed = nn::DenseNet::random(w, rng);
  int h_dim = latent_dim;
  if (latent_side) {
    std::vector<int> wl{latent_dim};
    wl.insert(wl.end(), hidden.begin(), hidden.end());
    wl.push_back(embed_dim);
    c.latent_embed = nn::DenseNet::random(wl, rng);
    h_dim = embed_dim;
  }
  c.W = Mat::Identity(embed_dim, h_dim) * 0.5;
  return c;
}

std::vector<ParamBlock> BilinearCritic::parameter_blocks(const std::string& prefix) {
  auto blocks = obs_embed.parameter_blocks(prefix + ".obs");
  if (!latent_embed.empty()) {
    auto l = latent_embed.parameter_blocks(prefix + ".latent");
    blocks.insert(blocks.end(), l.begin(), l.end());
  }
  blocks.push_back({prefix + ".W", as_span(W)});
  return blocks;
}

CriticGradients CriticGradients::zeros_like(const BilinearCritic& c) {
  CriticGradients g;
  g.obs_embed = nn::NetGradients::zeros_like(c.obs_embed);
  if (!c.latent_embed.empty()) g.latent_embed = nn::NetGradients::zeros_like(c.latent_embed);
  g.W = Mat::Zero(c.W.rows(), c.W.cols());
  return g;
}

std::vector<GradBlock> CriticGradients::blocks() const {
  auto b = obs_embed.blocks();
  auto l = latent_embed.blocks();
  b.insert(b.end(), l.begin(), l.end());
  b.push_back(as_span(W));
  return b;
}

CriticCache critic_forward(const BilinearCritic& c, const Mat& observations, const Mat& latents) {
  CriticCache cache;
  cache.obs = nn::forward_cached(c.obs_embed, observations);
  cache.E = cache.obs.output;
  if (c.latent_embed.empty()) {
    if (latents.rows() != c.W.cols()) throw ShapeError("critic: latent dimension mismatch");
    cache.H = latents;
  } else {
    cache.latent = nn::forward_cached(c.latent_embed, latents);
    cache.H = cache.latent.output;
  }
  cache.raw = cache.E.transpose() * (c.W * cache.H);
  cache.scores = cache.raw.cwiseMax(-kScoreClamp).cwiseMin(kScoreClamp);
  return cache;
}

Mat critic_scores(const BilinearCritic& c, const Mat& observations, const Mat& latents) {
  return critic_forward(c, observations, latents).scores;
}

CriticGradients critic_backward(const BilinearCritic& c, const CriticCache& cache,
                                const Mat& score_grad, Mat* latent_grad) {
  const Mat dS = (cache.raw.array().abs() <= kScoreClamp).select(score_grad, 0.0);
  CriticGradients g;
  g.W = cache.E * dS * cache.H.transpose();
  const Mat dE = c.W * cache.H * dS.transpose();
  const Mat dH = c.W.transpose() * cache.E * dS;
  g.obs_embed = nn::backward(c.obs_embed, cache.obs, dE);
  if (c.latent_embed.empty()) {
    if (latent_grad) *latent_grad = dH;
  } else {
    g.latent_embed = nn::backward(c.latent_embed, cache.latent, dH, latent_grad);
  }
  return g;
}

MIBoundEstimate nce_bound(const BilinearCritic& c, const Mat& observations, const Mat& latents,
                          const Mat& neg, NceMode mode) {
  return nce_from_scores(critic_scores(c, observations, latents), neg, mode).estimate;
}

MIBoundEstimate nwj_bound(const BilinearCritic& c, const Mat& observations, const Mat& latents,
                          const std::vector<int>& marginal) {
  return nwj_from_scores(critic_scores(c, observations, latents), marginal).estimate;
}

MIBoundEstimate ba_reconstruction_bound(const nn::DenseNet& decoder, const Mat& latents,
                                        const Mat& observations) {
  if (decoder.output_dim() != observations.rows()) {
    throw ShapeError("ba: decoder output dim " + std::to_string(decoder.output_dim()) +
                     " != observation dim " + std::to_string(observations.rows()));
  }
  const Mat mean = nn::forward_batch(decoder, latents);
  const double c = 0.5 * static_cast<double>(observations.rows()) * std::log(2.0 * std::numbers::pi);
  const Vec terms = (-0.5 * (observations - mean).colwise().squaredNorm().array() - c).transpose();
  return summarize("ba", terms);
}

MIBoundEstimate ba_categorical_bound(const nn::DenseNet& decoder, const Mat& latents,
                                     const std::vector<int>& labels) {
  const Mat lp = nn::log_softmax(nn::forward_batch(decoder, latents));
  Vec terms(lp.cols());
  for (Eigen::Index j = 0; j < lp.cols(); ++j) terms[j] = lp(labels[static_cast<std::size_t>(j)], j);
  return summarize("ba", terms);
}

// ---------------------------------------------------------------------------

namespace {

struct Sample {
  Mat obs;
  Mat lat;
  std::vector<int> obs_labels;
};

Sample draw(const MIBenchConfig& cfg, int n, Rng& rng) {
  Sample s;
  if (cfg.family == BenchFamily::kGaussian) {
    s.obs.resize(cfg.dims, n);
    s.lat.resize(cfg.dims, n);
    const double c = std::sqrt(1.0 - cfg.rho * cfg.rho);
    for (int j = 0; j < n; ++j) {
      for (int d = 0; d < cfg.dims; ++d) {
        const double x = rng.normal();
        s.obs(d, j) = x;
        s.lat(d, j) = cfg.rho * x + c * rng.normal();
      }
    }
    return s;
  }
  s.obs = Mat::Zero(cfg.symbols, n);
  s.lat = Mat::Zero(cfg.symbols, n);
  for (int j = 0; j < n; ++j) {
    const int x = rng.uniform_int(cfg.symbols);
    const int y = rng.uniform() < cfg.noise ? rng.uniform_int(cfg.symbols) : x;
    s.obs(x, j) = 1.0;
    s.lat(y, j) = 1.0;
    s.obs_labels.push_back(x);
  }
  return s;
}

double oracle(const MIBenchConfig& cfg) {
  if (cfg.family == BenchFamily::kGaussian) return exact_mi_gaussian(cfg.rho, cfg.dims);
  const int n = cfg.symbols;
  Mat joint = Mat::Constant(n, n, cfg.noise / (n * n));
  joint.diagonal().array() += (1.0 - cfg.noise) / n;
  return exact_mi_discrete(joint);
}

enum class Kind { kNce, kNwj };

BilinearCritic train_critic(const MIBenchConfig& cfg, Kind kind, Rng& rng) {
  const int dim = cfg.family == BenchFamily::kGaussian ? cfg.dims : cfg.symbols;
  BilinearCritic critic =
      BilinearCritic::random(dim, dim, cfg.embed_dim, {cfg.hidden, cfg.hidden}, true, rng);
  auto params = critic.parameter_blocks();
  nn::AdamState adam(nn::AdamConfig{cfg.learning_rate}, params);
  const Mat neg = all_pairs_mask(cfg.batch);
  for (int step = 0; step < cfg.train_steps; ++step) {
    const Sample s = draw(cfg, cfg.batch, rng);
    const CriticCache cache = critic_forward(critic, s.obs, s.lat);
    ScoreBound b = kind == Kind::kNce
                       ? nce_from_scores(cache.scores, neg, NceMode::kInclusive)
                       : nwj_from_scores(cache.scores, shuffled_pairing(cfg.batch, rng));
    CriticGradients g = critic_backward(critic, cache, -b.grad);
    adam.apply(params, g.blocks());
  }
  return critic;
}

nn::DenseNet train_decoder(const MIBenchConfig& cfg, Rng& rng) {
  const bool gaussian = cfg.family == BenchFamily::kGaussian;
  const int dim = gaussian ? cfg.dims : cfg.symbols;
  nn::DenseNet dec = nn::DenseNet::random({dim, cfg.hidden, cfg.hidden, dim}, rng);
  auto params = dec.parameter_blocks("decoder");
  nn::AdamState adam(nn::AdamConfig{cfg.learning_rate}, params);
  for (int step = 0; step < cfg.train_steps; ++step) {
    const Sample s = draw(cfg, cfg.batch, rng);
    const nn::ForwardCache cache = nn::forward_cached(dec, s.lat);
    Mat up;
    if (gaussian) {
      up = (cache.output - s.obs) / cfg.batch;  // d(½ mean residual²)
    } else {
      up = (nn::softmax(cache.output) - s.obs) / cfg.batch;
    }
    nn::NetGradients g = nn::backward(dec, cache, up);
    adam.apply(params, g.blocks());
  }
  return dec;
}

Vec concat(const std::vector<Vec>& parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  Vec out(n);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

}  // namespace

MIBenchReport run_mi_bench(const MIBenchConfig& cfg) {
  if (cfg.batch < 2) throw ConfigError("batch", "must be >= 2");
  if (cfg.family == BenchFamily::kGaussian && !(std::abs(cfg.rho) < 1.0)) {
    throw ConfigError("rho", "must satisfy |rho| < 1");
  }
  if (cfg.family == BenchFamily::kGaussian && cfg.dims < 1) throw ConfigError("dims", "must be >= 1");
  if (cfg.family == BenchFamily::kDiscrete && cfg.symbols < 2) {
    throw ConfigError("symbols", "must be >= 2");
  }
  if (!(cfg.noise >= 0.0 && cfg.noise <= 1.0)) throw ConfigError("noise", "must lie in [0, 1]");

  MIBenchReport r;
  r.oracle = oracle(cfg);
  Rng nce_rng = Rng::stream(cfg.seed, "bench-nce");
  Rng nwj_rng = Rng::stream(cfg.seed, "bench-nwj");
  Rng ba_rng = Rng::stream(cfg.seed, "bench-ba");
  const BilinearCritic nce_critic = train_critic(cfg, Kind::kNce, nce_rng);
  const BilinearCritic nwj_critic = train_critic(cfg, Kind::kNwj, nwj_rng);
  const nn::DenseNet decoder = train_decoder(cfg, ba_rng);

  const bool gaussian = cfg.family == BenchFamily::kGaussian;
  const double h_obs = gaussian ? 0.5 * cfg.dims * std::log(2.0 * std::numbers::pi * std::numbers::e)
                                : std::log(static_cast<double>(cfg.symbols));
  Rng eval = Rng::stream(cfg.seed, "bench-eval");
  const Mat neg = all_pairs_mask(cfg.batch);
  std::vector<Vec> inc, exc, nwj, ba;
  for (int b = 0; b < cfg.eval_batches; ++b) {
    const Sample s = draw(cfg, cfg.batch, eval);
    const Mat sn = critic_scores(nce_critic, s.obs, s.lat);
    inc.push_back(nce_from_scores(sn, neg, NceMode::kInclusive).terms);
    exc.push_back(nce_from_scores(sn, neg, NceMode::kExclusive).terms);
    const Mat sw = critic_scores(nwj_critic, s.obs, s.lat);
    nwj.push_back(nwj_from_scores(sw, shuffled_pairing(cfg.batch, eval)).terms);
    if (gaussian) {
      const Mat mean = nn::forward_batch(decoder, s.lat);
      const double c = 0.5 * cfg.dims * std::log(2.0 * std::numbers::pi);
      ba.push_back((-0.5 * (s.obs - mean).colwise().squaredNorm().array() - c + h_obs).transpose());
    } else {
      const Mat lp = nn::log_softmax(nn::forward_batch(decoder, s.lat));
      Vec t(cfg.batch);
      for (int j = 0; j < cfg.batch; ++j) t[j] = lp(s.obs_labels[static_cast<std::size_t>(j)], j) + h_obs;
      ba.push_back(t);
    }
  }
  r.nce_inclusive = summarize("nce-inclusive", concat(inc));
  r.nce_exclusive = summarize("nce-exclusive", concat(exc));
  r.nwj = summarize("nwj", concat(nwj));
  r.ba = summarize("ba", concat(ba));
  return r;
}

nlohmann::json to_json(const MIBenchReport& r) {
  return {{"oracle", r.oracle},
          {"nce_inclusive", to_json(r.nce_inclusive)},
          {"nce_exclusive", to_json(r.nce_exclusive)},
          {"nwj", to_json(r.nwj)},
          {"ba", to_json(r.ba)}};
}

}  // namespace infoprio::mi
