#pragma once

// Exact tabular checks: policy evaluation, state abstractions with their
// reward/transition losses, the value-difference bound, and the
// controllability probe experiment.

#include "infoprio/common.hpp"
#include "infoprio/envs.hpp"
#include "infoprio/tabular.hpp"

#include <nlohmann/json_fwd.hpp>

#include <vector>

namespace infoprio::theory {

/// Direct solve of the Bellman system. Throws DomainError when gamma >= 1.
Mat exact_q(const TabularMDP& mdp, const TabularPolicy& policy);
/// max |Q - (R + γ P V_π)| over (s, a).
double bellman_residual(const TabularMDP& mdp, const TabularPolicy& policy, const Mat& q);

/// Stationary distribution of a row-stochastic matrix.
Vec stationary_distribution(const Mat& p);
/// (1-γ) ρ0ᵀ (I - γ P_π)^{-1}.
Vec discounted_occupancy(const TabularMDP& mdp, const TabularPolicy& policy, const Vec& initial);

/// Deterministic map from states to latent cells.
struct LatentAbstraction {
  int cells = 0;
  std::vector<int> phi;

  static LatentAbstraction identity(int states);
  /// Surjective random map.
  static LatentAbstraction random(int states, int cells, Rng& rng);
  void validate(int states) const;
};

/// π(a|s) = π̂(a|φ(s)).
TabularPolicy lift_policy(const LatentAbstraction& abs, const TabularPolicy& latent_policy);

/// Latent MDP with transitions and rewards averaged inside each cell under
/// the state weights `weights` (uniform inside cells of zero total weight).
TabularMDP induced_latent_mdp(const TabularMDP& mdp, const LatentAbstraction& abs,
                              const Vec& weights);

double kl_bernoulli(double p, double q);

struct AbstractionLosses {
  double reward_loss = 0.0;      // L_R: occupancy-weighted Bernoulli reward KL
  double transition_loss = 0.0;  // L_T: occupancy-weighted KL of cell-level successors
  double value_span = 0.0;       // K = max V̂ - min V̂
  int excluded_states = 0;       // zero-occupancy states
  Vec occupancy;                 // state occupancy used as the weighting
  TabularMDP latent;
};

/// Rewards are read as Bernoulli means; the occupancy is the stationary
/// distribution of the lifted policy (its discounted occupancy from that same
/// start distribution).
AbstractionLosses measure_losses(const TabularMDP& mdp, const LatentAbstraction& abs,
                                 const TabularPolicy& latent_policy);

struct BoundReport {
  double lhs = 0.0;         // E_d |Q - Q̂|
  double lhs_signed = 0.0;  // E_d (Q - Q̂)
  double rhs = 0.0;         // (√L_R + γ K √L_T) / (1 - γ)
  bool holds = false;
  double worst_gap = 0.0;
  int worst_state = 0;
  int worst_action = 0;
  double reward_loss = 0.0;
  double transition_loss = 0.0;
  double value_span = 0.0;
};

nlohmann::json to_json(const BoundReport& r);

/// `fault` is added to the lhs (negative-control hook).
BoundReport value_difference_check(const TabularMDP& mdp, const LatentAbstraction& abs,
                                   const TabularPolicy& latent_policy, double fault = 0.0);

struct T3SuiteConfig {
  int mdps = 5;
  int abstractions = 3;
  int states = 16;
  int actions = 3;
  double gamma = 0.9;
  std::uint64_t seed = 20240611;
  double fault = 0.0;
};

std::vector<BoundReport> run_t3_suite(const T3SuiteConfig& cfg);

// ---------------------------------------------------------------------------
// Controllability probes

struct Theorem1Config {
  envs::EnvConfig env = envs::preset("ring");
  int latent_dim = 8;
  int hidden = 64;
  int episodes = 40;        // random-policy episodes used for training
  int probe_episodes = 20;  // held-out episodes for the probes
  int train_steps = 1500;   // 0 = untrained encoder (negative control)
  int window = 8;
  int batch = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct Theorem1Report {
  double r2_s_plus = 0.0;
  double r2_s_tilde = 0.0;
  double r2_ds = 0.0;
  double final_inverse_loglik = 0.0;
};

nlohmann::json to_json(const Theorem1Report& r);

/// Trains encoder and inverse model on the inverse-dynamics term alone
/// (rewards ignored), then fits linear probes from posterior means.
Theorem1Report theorem1_probe_experiment(const Theorem1Config& cfg);

}  // namespace infoprio::theory
