#pragma once

// Exact mutual-information oracles and the NCE / NWJ / BA lower bounds.
//
// Score matrices are indexed S(i, j) = score of observation i against latent
// j, so column j holds every candidate observation for latent j and the
// diagonal holds the positive pairs.

#include "infoprio/common.hpp"
#include "infoprio/nn.hpp"
#include "infoprio/rng.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

namespace infoprio::mi {

inline constexpr double kScoreClamp = 30.0;

/// Σ p ln(p / (p_x p_y)). Throws DomainError unless entries are >= 0 and sum
/// to 1 within 1e-12.
double exact_mi_discrete(const Mat& joint);
/// dims · (-½ ln(1 - rho²)). Throws DomainError when |rho| >= 1.
double exact_mi_gaussian(double rho, int dims);
/// Shannon entropy in nats of a probability vector.
double entropy(const Vec& p);

enum class NegativeScheme { kTime, kBatch, kBoth };
enum class NceMode { kExclusive, kInclusive };

std::string to_string(NegativeScheme s);
NegativeScheme negative_scheme_from_string(const std::string& s);

struct MIBoundEstimate {
  std::string name;
  double value = 0.0;
  std::size_t count = 0;
  double standard_error = 0.0;
  std::string scheme = "both";
};

nlohmann::json to_json(const MIBoundEstimate& e);

/// Mean and standard error of the mean of per-sample terms.
MIBoundEstimate summarize(std::string name, const Vec& terms, std::string scheme = "both");

/// neg(i, j) = 1 when observation i is a negative for latent j. Samples are
/// laid out window-major: index = window * steps + step.
Mat negative_mask(int windows, int steps, NegativeScheme scheme);
/// Every off-diagonal entry is a negative.
Mat all_pairs_mask(int n);

/// Value of a score-level bound plus its gradient with respect to the scores.
struct ScoreBound {
  MIBoundEstimate estimate;
  Vec terms;      // per-latent terms
  Mat grad;       // d(mean of terms) / dS
};

/// Exclusive: S_jj - log Σ_neg exp(S_ij). Inclusive: S_jj - log(exp S_jj +
/// Σ_neg exp S_ij) + ln(K_j + 1). Throws DomainError when a column has no
/// negatives.
ScoreBound nce_from_scores(const Mat& scores, const Mat& neg, NceMode mode);

/// mean_j S_jj - e^{-1} mean_j exp(S_{m(j), j}) where m is the marginal pairing
/// (observation m(j) presented with latent j).
ScoreBound nwj_from_scores(const Mat& scores, const std::vector<int>& marginal);

/// Seeded shuffle used to form the NWJ marginal batch.
std::vector<int> shuffled_pairing(int n, Rng& rng);

/// Bilinear critic f(z, o) = exp(ê(o)ᵀ W h(z)), ê the observation embedding and
/// h the latent-side embedding (identity when `latent_embed` is empty).
struct BilinearCritic {
  nn::DenseNet obs_embed;
  nn::DenseNet latent_embed;
  Mat W;

  static BilinearCritic random(int obs_dim, int latent_dim, int embed_dim,
                               const std::vector<int>& hidden, bool latent_side, Rng& rng);
  int embed_dim() const { return static_cast<int>(W.rows()); }
  std::vector<ParamBlock> parameter_blocks(const std::string& prefix = "critic");
};

struct CriticGradients {
  nn::NetGradients obs_embed;
  nn::NetGradients latent_embed;
  Mat W;

  static CriticGradients zeros_like(const BilinearCritic& c);
  std::vector<GradBlock> blocks() const;
};

struct CriticCache {
  nn::ForwardCache obs;
  nn::ForwardCache latent;
  Mat E;      // embed_dim x n_obs
  Mat H;      // latent features, latent_dim x n_latent
  Mat raw;    // unclamped scores
  Mat scores; // clamped to [-30, 30]
};

/// Scores of every observation column against every latent column.
CriticCache critic_forward(const BilinearCritic& c, const Mat& observations, const Mat& latents);
Mat critic_scores(const BilinearCritic& c, const Mat& observations, const Mat& latents);

/// Backpropagates dL/dS (zeroed where the clamp is active). Writes dL/dlatents
/// into `latent_grad` when non-null.
CriticGradients critic_backward(const BilinearCritic& c, const CriticCache& cache,
                                const Mat& score_grad, Mat* latent_grad = nullptr);

MIBoundEstimate nce_bound(const BilinearCritic& c, const Mat& observations, const Mat& latents,
                          const Mat& neg, NceMode mode);
MIBoundEstimate nwj_bound(const BilinearCritic& c, const Mat& observations, const Mat& latents,
                          const std::vector<int>& marginal);

/// Mean unit-variance Gaussian log-likelihood of each observation column under
/// decoder(z). The H(o) constant is not included.
MIBoundEstimate ba_reconstruction_bound(const nn::DenseNet& decoder, const Mat& latents,
                                        const Mat& observations);
/// Categorical decoder variant for discrete observations (labels per column).
MIBoundEstimate ba_categorical_bound(const nn::DenseNet& decoder, const Mat& latents,
                                     const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// Synthetic benchmark: train one critic per bound and compare with the oracle.

enum class BenchFamily { kGaussian, kDiscrete };

struct MIBenchConfig {
  BenchFamily family = BenchFamily::kGaussian;
  double rho = 0.5;
  int dims = 1;
  int symbols = 4;     // discrete family
  double noise = 0.0;  // discrete: probability the partner symbol is uniform
  int batch = 512;
  int train_steps = 1500;
  int eval_batches = 20;
  int embed_dim = 8;
  int hidden = 32;
  double learning_rate = 2e-3;
  std::uint64_t seed = 0;
};

struct MIBenchReport {
  double oracle = 0.0;
  MIBoundEstimate nce_inclusive;
  MIBoundEstimate nce_exclusive;
  MIBoundEstimate nwj;
  MIBoundEstimate ba;  // includes the analytic entropy constant
};

MIBenchReport run_mi_bench(const MIBenchConfig& cfg);
nlohmann::json to_json(const MIBenchReport& r);

}  // namespace infoprio::mi
