#include "infoprio/empowerment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace infoprio::empowerment {
namespace {

constexpr double kLogFloor = 1e-300;

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

void check_pi(const Vec& pi, const DiscreteChannel& channel) {
  if (pi.size() != channel.rows()) throw ShapeError("input distribution size != action count");
  if ((pi.array() < 0.0).any() || std::abs(pi.sum() - 1.0) > 1e-12) {
    throw DomainError("input distribution is not on the simplex");
  }
}

}  // namespace

void validate_channel(const DiscreteChannel& channel, double tol) {
  if (channel.rows() == 0 || channel.cols() == 0) throw DomainError("empty channel");
  for (Eigen::Index a = 0; a < channel.rows(); ++a) {
    if ((channel.row(a).array() < 0.0).any() || !channel.row(a).allFinite()) {
      throw DomainError("channel row " + std::to_string(a) + " has invalid entries");
    }
    if (std::abs(channel.row(a).sum() - 1.0) > tol) {
      throw DomainError("channel row " + std::to_string(a) + " sums to " +
                        std::to_string(channel.row(a).sum()));
    }
  }
}

DiscreteChannel bsc(double p) {
  DiscreteChannel c(2, 2);
  c << 1.0 - p, p, p, 1.0 - p;
  return c;
}

double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

double bsc_capacity(double p) { return std::log(2.0) - binary_entropy(p); }

Posterior ba_update_posterior(const Vec& pi, const DiscreteChannel& channel) {
  check_pi(pi, channel);
  Posterior out;
  out.q = Mat::Zero(channel.rows(), channel.cols());
  out.defined.assign(static_cast<std::size_t>(channel.cols()), false);
  for (Eigen::Index z = 0; z < channel.cols(); ++z) {
    const Vec joint = channel.col(z).cwiseProduct(pi);
    const double mass = joint.sum();
    if (mass <= 0.0) continue;
    out.q.col(z) = joint / mass;
    out.defined[static_cast<std::size_t>(z)] = true;
  }
  return out;
}

Vec ba_update_policy(const Posterior& q, const DiscreteChannel& channel) {
  const Eigen::Index A = channel.rows();
  Vec logits = Vec::Zero(A);
  for (Eigen::Index a = 0; a < A; ++a) {
    for (Eigen::Index z = 0; z < channel.cols(); ++z) {
      if (!q.defined[static_cast<std::size_t>(z)] || channel(a, z) == 0.0) continue;
      logits[a] += channel(a, z) * safe_log(q.q(a, z));
    }
  }
  const double m = logits.maxCoeff();
  Vec pi = (logits.array() - m).exp();
  return pi / pi.sum();
}

double mutual_information(const Vec& pi, const DiscreteChannel& channel) {
  const Vec pz = channel.transpose() * pi;
  double mi = 0.0;
  for (Eigen::Index a = 0; a < channel.rows(); ++a) {
    if (pi[a] <= 0.0) continue;
    for (Eigen::Index z = 0; z < channel.cols(); ++z) {
      const double p = channel(a, z);
      if (p > 0.0) mi += pi[a] * p * std::log(p / pz[z]);
    }
  }
  return mi;
}

double ba_surrogate(const Vec& pi, const Posterior& q, const DiscreteChannel& channel) {
  double v = 0.0;
  for (Eigen::Index a = 0; a < channel.rows(); ++a) {
    if (pi[a] <= 0.0) continue;
    for (Eigen::Index z = 0; z < channel.cols(); ++z) {
      const double p = channel(a, z);
      if (p > 0.0 && q.defined[static_cast<std::size_t>(z)]) {
        v += pi[a] * p * (safe_log(q.q(a, z)) - std::log(pi[a]));
      }
    }
  }
  return v;
}

CapacityResult channel_capacity(const DiscreteChannel& channel, double tol, int max_iter,
                                const std::optional<Vec>& initial_pi) {
  validate_channel(channel);
  if (!(tol > 0.0)) throw DomainError("tol must be > 0");
  const Eigen::Index A = channel.rows();
  CapacityResult r;
  r.state.pi = initial_pi ? *initial_pi : Vec::Constant(A, 1.0 / static_cast<double>(A));
  check_pi(r.state.pi, channel);
  r.state.posterior = ba_update_posterior(r.state.pi, channel);
  r.state.objective = mutual_information(r.state.pi, channel);
  r.history.push_back(r.state.objective);
  for (int it = 1; it <= max_iter; ++it) {
    r.state.pi = ba_update_policy(r.state.posterior, channel);
    r.state.posterior = ba_update_posterior(r.state.pi, channel);
    const double obj = mutual_information(r.state.pi, channel);
    const double change = obj - r.state.objective;
    r.state.objective = obj;
    r.state.iterations = it;
    r.history.push_back(obj);
    if (std::abs(change) < tol) {
      r.converged = true;
      break;
    }
  }
  r.capacity = r.state.objective;
  return r;
}

nlohmann::json to_json(const CapacityResult& r) {
  return {{"capacity_nats", r.capacity},
          {"capacity_bits", r.capacity / std::log(2.0)},
          {"iterations", r.state.iterations},
          {"converged", r.converged},
          {"input_distribution", std::vector<double>(r.state.pi.data(),
                                                     r.state.pi.data() + r.state.pi.size())}};
}

Vec per_state_capacity(const TabularMDP& mdp, double tol, int max_iter) {
  Vec out(mdp.states);
  DiscreteChannel ch(mdp.actions, mdp.states);
  for (int s = 0; s < mdp.states; ++s) {
    for (int a = 0; a < mdp.actions; ++a) ch.row(a) = mdp.transition[static_cast<std::size_t>(a)].row(s);
    // Renormalise rounding drift so validation at 1e-12 passes on exports.
    for (int a = 0; a < mdp.actions; ++a) ch.row(a) /= ch.row(a).sum();
    out[s] = channel_capacity(ch, tol, max_iter).capacity;
  }
  return out;
}

EmpowermentBound empowerment_lower_bound(const Mat& inverse_log_probs,
                                         const std::vector<int>& actions,
                                         const Mat& policy_probs) {
  const Eigen::Index n = inverse_log_probs.cols();
  if (n == 0) throw DomainError("empowerment bound: empty batch");
  if (static_cast<Eigen::Index>(actions.size()) != n || policy_probs.cols() != n ||
      policy_probs.rows() != inverse_log_probs.rows()) {
    throw ShapeError("empowerment bound: batch shapes disagree");
  }
  EmpowermentBound b;
  b.terms.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = actions[static_cast<std::size_t>(i)];
    if (a < 0 || a >= inverse_log_probs.rows()) throw DomainError("action out of range");
    double h = 0.0;
    for (Eigen::Index k = 0; k < policy_probs.rows(); ++k) {
      const double p = policy_probs(k, i);
      if (p > 0.0) h -= p * std::log(p);
    }
    b.terms[i] = inverse_log_probs(a, i) + h;
  }
  b.value = b.terms.mean();
  if (n > 1) {
    const double var = (b.terms.array() - b.value).square().sum() / static_cast<double>(n - 1);
    b.standard_error = std::sqrt(var / static_cast<double>(n));
  }
  return b;
}

}  // namespace infoprio::empowerment
