#pragma once

// Empowerment as channel capacity. A channel is a matrix p(z'|a) with one row
// per action and one column per successor.

#include "infoprio/common.hpp"
#include "infoprio/tabular.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <vector>

namespace infoprio::empowerment {

using DiscreteChannel = Mat;

/// Throws DomainError unless every row is a distribution within `tol`.
void validate_channel(const DiscreteChannel& channel, double tol = 1e-12);

/// Binary symmetric channel with crossover p.
DiscreteChannel bsc(double p);
/// H_b(p) in nats.
double binary_entropy(double p);
/// (1 - H_b(p) / ln 2) · ln 2, the BSC capacity in nats.
double bsc_capacity(double p);

/// q(a|z') with one column per successor. Columns of successors that carry no
/// mass under pi are undefined and excluded from every objective.
struct Posterior {
  Mat q;                      // actions x successors
  std::vector<bool> defined;  // per successor
};

/// q(a|z') ∝ p(z'|a) π(a).
Posterior ba_update_posterior(const Vec& pi, const DiscreteChannel& channel);
/// π(a) ∝ exp(Σ_z' p(z'|a) ln q(a|z')), q floored at 1e-300 inside the log.
Vec ba_update_policy(const Posterior& q, const DiscreteChannel& channel);

/// Exact I(A;Z') under input distribution pi.
double mutual_information(const Vec& pi, const DiscreteChannel& channel);
/// Variational surrogate Σ_a π(a) Σ_z' p(z'|a) [ln q(a|z') - ln π(a)].
double ba_surrogate(const Vec& pi, const Posterior& q, const DiscreteChannel& channel);

struct BAState {
  Vec pi;
  Posterior posterior;
  double objective = 0.0;
  int iterations = 0;
};

struct CapacityResult {
  double capacity = 0.0;  // nats
  BAState state;
  bool converged = false;
  std::vector<double> history;  // objective after each iteration, history[0] = initial
};

/// Alternates the two closed-form updates until the objective changes by less
/// than `tol` or `max_iter` iterations ran (then converged = false).
CapacityResult channel_capacity(const DiscreteChannel& channel, double tol = 1e-12,
                                int max_iter = 500,
                                const std::optional<Vec>& initial_pi = std::nullopt);

nlohmann::json to_json(const CapacityResult& r);

/// Empowerment of every state of a tabular MDP: the capacity of its
/// action -> successor channel.
Vec per_state_capacity(const TabularMDP& mdp, double tol = 1e-10, int max_iter = 2000);

/// Mean over samples of log q(a_i | ...) + H(π(·|z_i)), the variational
/// empowerment term. `inverse_log_probs` and `policy_probs` are
/// actions x samples.
struct EmpowermentBound {
  double value = 0.0;
  double standard_error = 0.0;
  Vec terms;
};

EmpowermentBound empowerment_lower_bound(const Mat& inverse_log_probs,
                                         const std::vector<int>& actions,
                                         const Mat& policy_probs);

}  // namespace infoprio::empowerment
