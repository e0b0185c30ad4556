#pragma once

#include "infoprio/common.hpp"
#include "infoprio/rng.hpp"

#include <vector>

namespace infoprio {

/// Finite discounted MDP with exact transition and reward tables.
struct TabularMDP {
  int states = 0;
  int actions = 0;
  std::vector<Mat> transition;  // transition[a](s, s') = P(s' | s, a)
  Mat reward;                   // states x actions, expected reward
  double gamma = 0.9;

  /// Rows of every transition matrix sum to 1 within `tol`, entries >= 0,
  /// gamma in (0, 1). Throws DomainError naming the first violation.
  void validate(double tol = 1e-12) const;

  /// Dirichlet(1) transition rows, uniform[0, 1] rewards.
  static TabularMDP random(int states, int actions, double gamma, Rng& rng);
};

/// Tabular stochastic policy: probs(s, a).
using TabularPolicy = Mat;

/// P_pi(s, s') = sum_a pi(a|s) P(s'|s,a).
Mat policy_transition(const TabularMDP& mdp, const TabularPolicy& policy);
/// r_pi(s) = sum_a pi(a|s) R(s,a).
Vec policy_reward(const TabularMDP& mdp, const TabularPolicy& policy);

}  // namespace infoprio
