#include "infoprio/theory.hpp"

#include "infoprio/metrics.hpp"
#include "infoprio/replay.hpp"
#include "infoprio/world_model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace infoprio::theory {

Mat exact_q(const TabularMDP& mdp, const TabularPolicy& policy) {
  if (!(mdp.gamma < 1.0)) throw DomainError("exact_q requires gamma < 1");
  if (policy.rows() != mdp.states || policy.cols() != mdp.actions) {
    throw ShapeError("policy must be states x actions");
  }
  const Mat p = policy_transition(mdp, policy);
  const Vec r = policy_reward(mdp, policy);
  const Mat sys = Mat::Identity(mdp.states, mdp.states) - mdp.gamma * p;
  const Vec v = sys.partialPivLu().solve(r);
  Mat q(mdp.states, mdp.actions);
  for (int a = 0; a < mdp.actions; ++a) {
    q.col(a) = mdp.reward.col(a) + mdp.gamma * mdp.transition[static_cast<std::size_t>(a)] * v;
  }
  return q;
}

double bellman_residual(const TabularMDP& mdp, const TabularPolicy& policy, const Mat& q) {
  const Vec v = (policy.array() * q.array()).rowwise().sum();
  double worst = 0.0;
  for (int a = 0; a < mdp.actions; ++a) {
    const Vec rhs = mdp.reward.col(a) + mdp.gamma * mdp.transition[static_cast<std::size_t>(a)] * v;
    worst = std::max(worst, (q.col(a) - rhs).cwiseAbs().maxCoeff());
  }
  return worst;
}

Vec stationary_distribution(const Mat& p) {
  const Eigen::Index n = p.rows();
  Mat sys = Mat::Identity(n, n) - p.transpose();
  sys.row(n - 1).setOnes();
  Vec rhs = Vec::Zero(n);
  rhs[n - 1] = 1.0;
  Vec mu = sys.fullPivLu().solve(rhs);
  mu = mu.cwiseMax(0.0);
  return mu / mu.sum();
}

Vec discounted_occupancy(const TabularMDP& mdp, const TabularPolicy& policy, const Vec& initial) {
  const Mat p = policy_transition(mdp, policy);
  const Mat sys = Mat::Identity(mdp.states, mdp.states) - mdp.gamma * p.transpose();
  return (1.0 - mdp.gamma) * sys.partialPivLu().solve(initial);
}

LatentAbstraction LatentAbstraction::identity(int states) {
  LatentAbstraction a;
  a.cells = states;
  for (int s = 0; s < states; ++s) a.phi.push_back(s);
  return a;
}

LatentAbstraction LatentAbstraction::random(int states, int cells, Rng& rng) {
  if (cells < 1 || cells > states) throw DomainError("cells must lie in [1, states]");
  LatentAbstraction a;
  a.cells = cells;
  a.phi.resize(static_cast<std::size_t>(states));
  // First `cells` states of a random order cover every cell once.
  std::vector<int> order(static_cast<std::size_t>(states));
  for (int s = 0; s < states; ++s) order[static_cast<std::size_t>(s)] = s;
  for (int i = states - 1; i > 0; --i) std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
  for (int i = 0; i < states; ++i) {
    a.phi[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i < cells ? i : rng.uniform_int(cells);
  }
  return a;
}

void LatentAbstraction::validate(int states) const {
  if (static_cast<int>(phi.size()) != states) throw ShapeError("abstraction covers the wrong state count");
  for (int c : phi)
    if (c < 0 || c >= cells) throw DomainError("abstraction maps outside its cells");
}

TabularPolicy lift_policy(const LatentAbstraction& abs, const TabularPolicy& latent_policy) {
  if (latent_policy.rows() != abs.cells) throw ShapeError("latent policy must have one row per cell");
  TabularPolicy p(static_cast<Eigen::Index>(abs.phi.size()), latent_policy.cols());
  for (std::size_t s = 0; s < abs.phi.size(); ++s) p.row(static_cast<Eigen::Index>(s)) = latent_policy.row(abs.phi[s]);
  return p;
}

TabularMDP induced_latent_mdp(const TabularMDP& mdp, const LatentAbstraction& abs,
                              const Vec& weights) {
  abs.validate(mdp.states);
  Vec cell_mass = Vec::Zero(abs.cells);
  for (int s = 0; s < mdp.states; ++s) cell_mass[abs.phi[static_cast<std::size_t>(s)]] += weights[s];
  Vec cell_count = Vec::Zero(abs.cells);
  for (int c : abs.phi) cell_count[c] += 1.0;
  auto w = [&](int s) {
    const int c = abs.phi[static_cast<std::size_t>(s)];
    return cell_mass[c] > 0.0 ? weights[s] / cell_mass[c] : 1.0 / cell_count[c];
  };
  TabularMDP out;
  out.states = abs.cells;
  out.actions = mdp.actions;
  out.gamma = mdp.gamma;
  out.reward = Mat::Zero(abs.cells, mdp.actions);
  out.transition.assign(static_cast<std::size_t>(mdp.actions), Mat::Zero(abs.cells, abs.cells));
  for (int s = 0; s < mdp.states; ++s) {
    const int c = abs.phi[static_cast<std::size_t>(s)];
    const double ws = w(s);
    for (int a = 0; a < mdp.actions; ++a) {
      out.reward(c, a) += ws * mdp.reward(s, a);
      for (int sp = 0; sp < mdp.states; ++sp) {
        out.transition[static_cast<std::size_t>(a)](c, abs.phi[static_cast<std::size_t>(sp)]) +=
            ws * mdp.transition[static_cast<std::size_t>(a)](s, sp);
      }
    }
  }
  return out;
}

double kl_bernoulli(double p, double q) {
  auto term = [](double x, double y) {
    if (x == 0.0) return 0.0;
    if (y == 0.0) return std::numeric_limits<double>::infinity();
    return x * std::log(x / y);
  };
  return term(p, q) + term(1.0 - p, 1.0 - q);
}

AbstractionLosses measure_losses(const TabularMDP& mdp, const LatentAbstraction& abs,
                                 const TabularPolicy& latent_policy) {
  mdp.validate(1e-9);
  abs.validate(mdp.states);
  const TabularPolicy pi = lift_policy(abs, latent_policy);
  AbstractionLosses out;
  out.occupancy = stationary_distribution(policy_transition(mdp, pi));
  out.latent = induced_latent_mdp(mdp, abs, out.occupancy);
  for (int s = 0; s < mdp.states; ++s) {
    const double mu = out.occupancy[s];
    if (mu <= 0.0) {
      ++out.excluded_states;
      continue;
    }
    const int c = abs.phi[static_cast<std::size_t>(s)];
    for (int a = 0; a < mdp.actions; ++a) {
      const double w = mu * pi(s, a);
      if (w <= 0.0) continue;
      out.reward_loss += w * kl_bernoulli(mdp.reward(s, a), out.latent.reward(c, a));
      Vec lifted = Vec::Zero(abs.cells);
      for (int sp = 0; sp < mdp.states; ++sp) {
        lifted[abs.phi[static_cast<std::size_t>(sp)]] += mdp.transition[static_cast<std::size_t>(a)](s, sp);
      }
      double kl = 0.0;
      for (int cp = 0; cp < abs.cells; ++cp) {
        const double p = lifted[cp];
        if (p <= 0.0) continue;
        kl += p * std::log(p / out.latent.transition[static_cast<std::size_t>(a)](c, cp));
      }
      out.transition_loss += w * std::max(0.0, kl);
    }
  }
  const Mat qhat = exact_q(out.latent, latent_policy);
  const Vec vhat = (latent_policy.array() * qhat.array()).rowwise().sum();
  out.value_span = vhat.maxCoeff() - vhat.minCoeff();
  return out;
}

nlohmann::json to_json(const BoundReport& r) {
  return {{"lhs", r.lhs},
          {"lhs_signed", r.lhs_signed},
          {"rhs", r.rhs},
          {"holds", r.holds},
          {"worst_gap", r.worst_gap},
          {"worst_state", r.worst_state},
          {"worst_action", r.worst_action},
          {"reward_loss", r.reward_loss},
          {"transition_loss", r.transition_loss},
          {"value_span", r.value_span}};
}

BoundReport value_difference_check(const TabularMDP& mdp, const LatentAbstraction& abs,
                                   const TabularPolicy& latent_policy, double fault) {
  const AbstractionLosses l = measure_losses(mdp, abs, latent_policy);
  const TabularPolicy pi = lift_policy(abs, latent_policy);
  const Mat q = exact_q(mdp, pi);
  const Mat qhat = exact_q(l.latent, latent_policy);
  BoundReport r;
  for (int s = 0; s < mdp.states; ++s) {
    const int c = abs.phi[static_cast<std::size_t>(s)];
    for (int a = 0; a < mdp.actions; ++a) {
      const double gap = q(s, a) - qhat(c, a);
      const double w = l.occupancy[s] * pi(s, a);
      r.lhs += w * std::abs(gap);
      r.lhs_signed += w * gap;
      if (std::abs(gap) > r.worst_gap) {
        r.worst_gap = std::abs(gap);
        r.worst_state = s;
        r.worst_action = a;
      }
    }
  }
  r.lhs += fault;
  r.reward_loss = l.reward_loss;
  r.transition_loss = l.transition_loss;
  r.value_span = l.value_span;
  r.rhs = (std::sqrt(l.reward_loss) + mdp.gamma * l.value_span * std::sqrt(l.transition_loss)) /
          (1.0 - mdp.gamma);
  r.holds = r.lhs <= r.rhs + 1e-9;
  return r;
}

std::vector<BoundReport> run_t3_suite(const T3SuiteConfig& cfg) {
  std::vector<BoundReport> out;
  for (int i = 0; i < cfg.mdps; ++i) {
    Rng rng(Rng::derive_seed(cfg.seed, "t3-mdp", static_cast<std::uint64_t>(i)));
    const TabularMDP mdp = TabularMDP::random(cfg.states, cfg.actions, cfg.gamma, rng);
    for (int k = 0; k < cfg.abstractions; ++k) {
      Rng arng(Rng::derive_seed(cfg.seed, "t3-abstraction", static_cast<std::uint64_t>(i * cfg.abstractions + k)));
      const int cells = 2 + arng.uniform_int(cfg.states / 2 - 1);
      const LatentAbstraction abs = LatentAbstraction::random(cfg.states, cells, arng);
      Mat pi(cells, cfg.actions);
      for (int c = 0; c < cells; ++c) {
        for (int a = 0; a < cfg.actions; ++a) pi(c, a) = arng.gamma(1.0);
        pi.row(c) /= pi.row(c).sum();
      }
      out.push_back(value_difference_check(mdp, abs, pi, cfg.fault));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const Theorem1Report& r) {
  return {{"r2_s_plus", r.r2_s_plus},
          {"r2_s_tilde", r.r2_s_tilde},
          {"r2_ds", r.r2_ds},
          {"final_inverse_loglik", r.final_inverse_loglik}};
}

namespace {

std::vector<TransitionRecord> random_episode(const envs::EnvConfig& env_cfg, int episode,
                                             std::uint64_t seed, Rng& act) {
  envs::FactoredEnv env(env_cfg);
  auto first = env.reset(Rng::derive_seed(seed, "t1-env", static_cast<std::uint64_t>(episode)));
  Vec o = first.observation;
  std::vector<TransitionRecord> recs;
  for (int t = 0; t < env_cfg.horizon; ++t) {
    const int a = act.uniform_int(env_cfg.num_actions);
    const auto step = env.step(a);
    TransitionRecord r;
    r.o_prev = o;
    r.a_prev = a;
    r.reward = 0.0;
    r.o = step.observation;
    r.episode = episode;
    r.step = t + 1;
    r.state = step.state;
    recs.push_back(r);
    o = step.observation;
  }
  return recs;
}

double probe_r2(const Mat& z, const std::vector<Vec>& targets, std::uint64_t seed) {
  if (targets.empty() || targets.front().size() == 0) return 0.0;
  Mat t(targets.front().size(), static_cast<Eigen::Index>(targets.size()));
  for (std::size_t i = 0; i < targets.size(); ++i) t.col(static_cast<Eigen::Index>(i)) = targets[i];
  return metrics::linear_probe(z, t, seed).r2;
}

}  // namespace

Theorem1Report theorem1_probe_experiment(const Theorem1Config& cfg) {
  cfg.env.validate();
  Rng act = Rng::stream(cfg.seed, "t1-act");
  ReplayBuffer train_buf(cfg.env);
  for (int e = 0; e < cfg.episodes; ++e) train_buf.add_episode(random_episode(cfg.env, e, cfg.seed, act));

  world::WorldModelConfig wcfg;
  wcfg.obs_dim = cfg.env.observation_dim();
  wcfg.num_actions = cfg.env.num_actions;
  wcfg.latent_dim = cfg.latent_dim;
  wcfg.hidden = {cfg.hidden, cfg.hidden};
  Rng init = Rng::stream(cfg.seed, "t1-init");
  world::WorldModel model = world::WorldModel::random(wcfg, init);

  world::LossConfig loss;
  loss.use_mi = false;
  loss.use_forward = false;
  loss.use_reward = false;
  loss.use_empowerment = true;

  auto params = model.parameter_blocks();
  nn::AdamState adam(nn::AdamConfig{cfg.learning_rate}, params);
  Rng batch = Rng::stream(cfg.seed, "t1-batch");
  Rng noise = Rng::stream(cfg.seed, "t1-noise");
  Theorem1Report rep;
  for (int step = 0; step < cfg.train_steps; ++step) {
    const auto windows = train_buf.sample_windows(cfg.batch, cfg.window, batch);
    world::LossResult r = world::lagrangian_loss(model, nullptr, windows, 1.0, 0.0, loss, noise);
    adam.apply(params, r.grads.blocks());
    rep.final_inverse_loglik = r.constraint.empowerment - std::log(static_cast<double>(wcfg.num_actions));
  }

  std::vector<Vec> lat, sp, st, ds;
  for (int e = 0; e < cfg.probe_episodes; ++e) {
    const auto recs = random_episode(cfg.env, cfg.episodes + e, cfg.seed, act);
    const Mat means = world::filter_means(model, recs);
    for (std::size_t t = 0; t < recs.size(); ++t) {
      lat.push_back(means.col(static_cast<Eigen::Index>(t) + 1));
      sp.push_back(envs::one_hot_s_plus(cfg.env, recs[t].state));
      st.push_back(envs::one_hot_s_tilde(cfg.env, recs[t].state));
      ds.push_back(envs::one_hot_ds(cfg.env, recs[t].state));
    }
  }
  Mat z(cfg.latent_dim, static_cast<Eigen::Index>(lat.size()));
  for (std::size_t i = 0; i < lat.size(); ++i) z.col(static_cast<Eigen::Index>(i)) = lat[i];
  rep.r2_s_plus = probe_r2(z, sp, cfg.seed);
  rep.r2_s_tilde = probe_r2(z, st, cfg.seed);
  rep.r2_ds = probe_r2(z, ds, cfg.seed);
  return rep;
}

}  // namespace infoprio::theory
