#include "infoprio/tabular.hpp"

#include <cmath>
#include <string>

namespace infoprio {

void TabularMDP::validate(double tol) const {
  if (states <= 0 || actions <= 0) throw DomainError("tabular MDP must have states and actions");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError("discount gamma must lie in (0, 1), got " + std::to_string(gamma));
  }
  if (static_cast<int>(transition.size()) != actions) {
    throw DomainError("expected one transition matrix per action");
  }
  if (reward.rows() != states || reward.cols() != actions) {
    throw DomainError("reward table must be states x actions");
  }
  for (int a = 0; a < actions; ++a) {
    const Mat& p = transition[static_cast<std::size_t>(a)];
    if (p.rows() != states || p.cols() != states) {
      throw DomainError("transition matrix for action " + std::to_string(a) + " is not S x S");
    }
    if ((p.array() < 0.0).any()) {
      throw DomainError("negative transition probability under action " + std::to_string(a));
    }
    for (int s = 0; s < states; ++s) {
      const double sum = p.row(s).sum();
      if (std::abs(sum - 1.0) > tol) {
        throw DomainError("transition row (s=" + std::to_string(s) + ", a=" + std::to_string(a) +
                          ") sums to " + std::to_string(sum));
      }
    }
  }
  if (!reward.allFinite()) throw DomainError("non-finite reward entry");
}

TabularMDP TabularMDP::random(int states, int actions, double gamma, Rng& rng) {
  TabularMDP mdp;
  mdp.states = states;
  mdp.actions = actions;
  mdp.gamma = gamma;
  mdp.transition.assign(static_cast<std::size_t>(actions), Mat::Zero(states, states));
  for (int a = 0; a < actions; ++a) {
    for (int s = 0; s < states; ++s) {
      double total = 0.0;
      for (int t = 0; t < states; ++t) {
        const double g = rng.gamma(1.0);
        mdp.transition[static_cast<std::size_t>(a)](s, t) = g;
        total += g;
      }
      mdp.transition[static_cast<std::size_t>(a)].row(s) /= total;
    }
  }
  mdp.reward.resize(states, actions);
  for (int s = 0; s < states; ++s)
    for (int a = 0; a < actions; ++a) mdp.reward(s, a) = rng.uniform();
  return mdp;
}

Mat policy_transition(const TabularMDP& mdp, const TabularPolicy& policy) {
  Mat p = Mat::Zero(mdp.states, mdp.states);
  for (int a = 0; a < mdp.actions; ++a) {
    p += policy.col(a).asDiagonal() * mdp.transition[static_cast<std::size_t>(a)];
  }
  return p;
}

Vec policy_reward(const TabularMDP& mdp, const TabularPolicy& policy) {
  return mdp.reward.cwiseProduct(policy).rowwise().sum();
}

}  // namespace infoprio
