#pragma once

// Latent state-space model: filtering encoder, forward prior, inverse
// dynamics, reward head and contrastive critic, trained on a constrained
// objective with a projected dual step on the multiplier.

#include "infoprio/common.hpp"
#include "infoprio/mi.hpp"
#include "infoprio/nn.hpp"
#include "infoprio/policy.hpp"
#include "infoprio/replay.hpp"
#include "infoprio/rng.hpp"

#include <nlohmann/json_fwd.hpp>

#include <limits>
#include <vector>

namespace infoprio::world {

struct WorldModelConfig {
  int obs_dim = 0;
  int num_actions = 0;
  int latent_dim = 8;
  std::vector<int> hidden = {64, 64};
  int critic_dim = 16;
  /// When false the encoder sees (z_prev, o_t) only, so the inverse model
  /// cannot read the action back out of the posterior.
  bool encoder_uses_action = false;
  double logvar_min = -6.0;
  double logvar_max = 4.0;

  void validate() const;
  int encoder_input_dim() const;
};

nlohmann::json to_json(const WorldModelConfig& cfg);
WorldModelConfig world_model_config_from_json(const nlohmann::json& doc);

struct WorldModel {
  WorldModelConfig cfg;
  nn::DenseNet encoder;  // [z_prev; a_prev?; o] -> [mean; logvar]
  nn::DenseNet prior;    // [z_prev; a_prev]     -> [mean; logvar]
  nn::DenseNet inverse;  // [z_t; z_prev]        -> action logits
  nn::DenseNet reward;   // z_t                  -> reward mean
  mi::BilinearCritic critic;
  nn::DenseNet decoder;  // z_t -> observation mean (reconstruction variant)

  static WorldModel random(const WorldModelConfig& cfg, Rng& rng);
  std::vector<ParamBlock> parameter_blocks();
  bool all_finite() const;
};

struct WorldModelGradients {
  nn::NetGradients encoder, prior, inverse, reward, decoder;
  mi::CriticGradients critic;

  static WorldModelGradients zeros_like(const WorldModel& m);
  std::vector<GradBlock> blocks() const;
};

nlohmann::json to_json(const WorldModel& m);
WorldModel world_model_from_json(const nlohmann::json& doc);

/// Gaussian belief over z with a drawn sample.
struct LatentState {
  Vec mean;
  Vec logvar;
  Vec sample;
};

/// Posterior parameters for a batch of (z_prev, a_prev, o) columns. a_prev < 0
/// is the null action used at t = 0.
void posterior_params(const WorldModel& m, const Mat& z_prev, const std::vector<int>& a_prev,
                      const Mat& obs, Mat& mean, Mat& logvar);
void prior_params(const WorldModel& m, const Mat& z_prev, const std::vector<int>& a_prev,
                  Mat& mean, Mat& logvar);

LatentState encode(const WorldModel& m, const Vec& z_prev, int a_prev, const Vec& o, Rng& rng);

/// Posterior means along an episode, starting from the zero latent:
/// column 0 encodes records[0].o_prev, column t+1 encodes records[t].o.
Mat filter_means(const WorldModel& m, const std::vector<TransitionRecord>& records);

/// KL(N(mu, e^lv) || N(m, e^plv)) per column, summed over dimensions.
Vec gaussian_kl(const Mat& mu, const Mat& lv, const Mat& m, const Mat& plv);
double gaussian_kl(const Vec& mu, const Vec& lv, const Vec& m, const Vec& plv);

/// Unit-variance Gaussian log density of r under the reward head at z.
double reward_loglik(const WorldModel& m, const Vec& z, double r);

/// Inverse model log q(a | z_t, z_prev), actions x batch.
Mat inverse_log_probs(const WorldModel& m, const Mat& z_t, const Mat& z_prev);

/// Per-step averages over a batch of records.
struct ConstraintBound {
  double forward = 0.0;      // -KL
  double empowerment = 0.0;  // log q(a|z_t, z_prev) + H(π(·|z_prev))
  double reward = 0.0;       // reward log-likelihood
  double total = 0.0;        // sum of the active terms
};

enum class MIMode { kNce, kNwj };
enum class Representation { kContrastive, kReconstruction };

std::string to_string(MIMode m);
std::string to_string(Representation r);

struct LossConfig {
  MIMode mi_mode = MIMode::kNce;
  mi::NegativeScheme negatives = mi::NegativeScheme::kBoth;
  Representation representation = Representation::kContrastive;
  bool use_mi = true;
  bool use_forward = true;
  bool use_empowerment = true;
  bool use_reward = true;
  // Forward KL shaping. Gradients reach the prior side with weight kl_balance and the
  // posterior with 1 - kl_balance; <= 0 disables balancing (full gradient to both).
  // The batch-mean KL is floored at free_nats, below which it carries no gradient.
  double kl_balance = 0.0;
  double free_nats = 0.0;
};

struct LossResult {
  double loss = 0.0;
  mi::MIBoundEstimate mi;       // training form (exclusive NCE, NWJ, or reconstruction)
  double reconstruction = 0.0;  // mean Gaussian log-likelihood of o (reconstruction variant)
  ConstraintBound constraint;
  double forward_kl = 0.0;
  WorldModelGradients grads;    // dLoss/dParams when requested
  Mat latents;                  // posterior samples, window-major, d x B(L+1)
  Mat observations;             // matching observations
};

/// loss = -[I + λ (C - c0)] over a batch of windows. Noise for the
/// reparameterised samples and the NWJ pairing comes from `rng`. `policy` may
/// be null, meaning a uniform behaviour policy.
LossResult lagrangian_loss(const WorldModel& m, const agent::Policy* policy,
                           const std::vector<Window>& windows, double lambda, double c0,
                           const LossConfig& cfg, Rng& rng, bool with_gradients = true);

struct LagrangianState {
  double lambda = 1.0;
  double c0 = 0.0;
  double dual_lr = 1e-3;
  /// Running estimate of the constraint the dual step reads.
  double running = std::numeric_limits<double>::quiet_NaN();
  double running_rate = 0.05;
};

nlohmann::json to_json(const LagrangianState& s);

/// running <- (1-α) running + α c (initialised to c on the first call),
/// λ <- max(0, λ - η (running - c0)).
void dual_update(LagrangianState& lag, double c_bound);

}  // namespace infoprio::world
