#include "infoprio/agent.hpp"

#include "infoprio/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

namespace infoprio::agent {

ImaginedTrajectory imagine(const world::WorldModel& model, const Policy& policy, const Mat& z0,
                           int horizon, Rng& rng) {
  if (horizon < 1) throw DomainError("imagination horizon must be >= 1");
  const int d = model.cfg.latent_dim;
  const Eigen::Index M = z0.cols();
  ImaginedTrajectory t;
  t.z.push_back(z0);
  t.reward.resize(horizon, M);
  t.log_q.resize(horizon, M);
  t.log_pi.resize(horizon, M);
  t.entropy.resize(horizon, M);
  for (int k = 0; k < horizon; ++k) {
    const Mat& zk = t.z.back();
    const Mat logits = policy.logits(zk);
    const Mat lp = nn::log_softmax(logits);
    const Mat p = lp.array().exp();
    std::vector<int> a(static_cast<std::size_t>(M));
    for (Eigen::Index i = 0; i < M; ++i) {
      a[static_cast<std::size_t>(i)] =
          rng.categorical(std::span<const double>(p.col(i).data(), static_cast<std::size_t>(p.rows())));
      t.log_pi(k, i) = lp(a[static_cast<std::size_t>(i)], i);
    }
    t.entropy.row(k) = nn::softmax_entropy(logits).transpose();
    Mat mean, lv;
    world::prior_params(model, zk, a, mean, lv);
    Mat next(d, M);
    for (Eigen::Index i = 0; i < M; ++i)
      for (int r = 0; r < d; ++r) next(r, i) = mean(r, i) + std::exp(0.5 * lv(r, i)) * rng.normal();
    if (!next.allFinite()) throw NumericError("imagine: non-finite latent at step " + std::to_string(k));
    t.reward.row(k) = nn::forward_batch(model.reward, next).row(0);
    const Mat lq = world::inverse_log_probs(model, next, zk);
    for (Eigen::Index i = 0; i < M; ++i) t.log_q(k, i) = lq(a[static_cast<std::size_t>(i)], i);
    t.actions.push_back(std::move(a));
    t.z.push_back(std::move(next));
  }
  return t;
}

Mat trajectory_values(const ValueNet& value, const ImaginedTrajectory& traj) {
  Mat v(traj.horizon() + 1, traj.z.front().cols());
  for (int k = 0; k <= traj.horizon(); ++k) {
    v.row(k) = nn::forward_batch(value, traj.z[static_cast<std::size_t>(k)]).row(0);
  }
  return v;
}

Mat lambda_returns(const Mat& rewards, const Mat& values, double gamma, double lambda) {
  const Eigen::Index H = rewards.rows();
  if (values.rows() != H + 1 || values.cols() != rewards.cols()) {
    throw ShapeError("lambda_returns: values must be (horizon + 1) x batch");
  }
  Mat g(H, rewards.cols());
  Eigen::RowVectorXd next = values.row(H);
  for (Eigen::Index k = H - 1; k >= 0; --k) {
    g.row(k) = rewards.row(k) + gamma * ((1.0 - lambda) * values.row(k + 1) + lambda * next);
    next = g.row(k);
  }
  return g;
}

Mat augmented_returns(const ImaginedTrajectory& traj, const Mat& values, double gamma,
                      double lambda, double beta) {
  const Mat r = traj.reward + beta * (traj.log_q + traj.entropy);
  return lambda_returns(r, values, gamma, lambda);
}

std::pair<double, nn::NetGradients> policy_surrogate(const Policy& policy, const Mat& z,
                                                     const std::vector<int>& actions,
                                                     const Vec& advantages, double entropy_weight) {
  const Eigen::Index n = z.cols();
  if (static_cast<Eigen::Index>(actions.size()) != n || advantages.size() != n) {
    throw ShapeError("policy surrogate: batch shapes disagree");
  }
  const nn::ForwardCache cache = nn::forward_cached(policy.net, z);
  const Mat logits = cache.output / policy.temperature;
  const Mat lp = nn::log_softmax(logits);
  const Vec ent = nn::softmax_entropy(logits);
  const Mat dent = nn::softmax_entropy_grad(logits);
  double loss = 0.0;
  Mat up(logits.rows(), n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = actions[static_cast<std::size_t>(i)];
    loss -= advantages[i] * lp(a, i) * inv_n;
    Mat::ColXpr col = up.col(i);
    col = advantages[i] * lp.col(i).array().exp();
    col(a) -= advantages[i];
    col -= entropy_weight * dent.col(i);
  }
  loss -= entropy_weight * ent.mean();
  up *= inv_n / policy.temperature;
  return {loss, nn::backward(policy.net, cache, up)};
}

std::pair<double, nn::NetGradients> value_regression(const ValueNet& value, const Mat& z,
                                                     const Vec& targets) {
  const nn::ForwardCache cache = nn::forward_cached(value, z);
  const Eigen::RowVectorXd diff = cache.output.row(0) - targets.transpose();
  const double n = static_cast<double>(z.cols());
  const double loss = diff.squaredNorm() / n;
  const Mat up = 2.0 * diff / n;
  return {loss, nn::backward(value, cache, up)};
}

namespace {

void clip(nn::NetGradients& g, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = nn::global_norm(g.blocks());
  if (norm > max_norm) g *= max_norm / norm;
}

void clip(world::WorldModelGradients& g, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = nn::global_norm(g.blocks());
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  g.encoder *= s;
  g.prior *= s;
  g.inverse *= s;
  g.reward *= s;
  g.decoder *= s;
  g.critic.obs_embed *= s;
  g.critic.W *= s;
}

Mat flatten(const std::vector<Mat>& zs, std::size_t count) {
  const Eigen::Index d = zs.front().rows();
  const Eigen::Index m = zs.front().cols();
  Mat out(d, m * static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) out.middleCols(static_cast<Eigen::Index>(k) * m, m) = zs[k];
  return out;
}

}  // namespace

UpdateStats policy_value_update(Policy& policy, ValueNet& value, nn::AdamState& policy_adam,
                                nn::AdamState& value_adam, const ImaginedTrajectory& traj,
                                const Mat& targets, const BehaviourConfig& cfg) {
  const int H = traj.horizon();
  const Eigen::Index M = traj.z.front().cols();
  if (targets.rows() != H || targets.cols() != M) throw ShapeError("targets shape mismatch");
  const Mat states = flatten(traj.z, static_cast<std::size_t>(H));
  Vec flat_targets(H * M);
  std::vector<int> actions(static_cast<std::size_t>(H * M));
  for (int k = 0; k < H; ++k) {
    for (Eigen::Index i = 0; i < M; ++i) {
      flat_targets[k * M + i] = targets(k, i);
      actions[static_cast<std::size_t>(k * M + i)] = traj.actions[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
    }
  }
  const Vec baseline = nn::forward_batch(value, states).row(0).transpose();
  const Vec adv = flat_targets - baseline;

  UpdateStats s;
  auto [ploss, pgrad] = policy_surrogate(policy, states, actions, adv, cfg.entropy_weight);
  s.policy_loss = ploss;
  s.entropy = policy.entropy(states).mean();
  auto [vloss, vgrad] = value_regression(value, states, flat_targets);
  s.value_loss = vloss;
  vgrad *= cfg.value_weight;
  clip(pgrad, cfg.grad_clip);
  clip(vgrad, cfg.grad_clip);
  policy_adam.apply(policy.net.parameter_blocks("policy"), pgrad.blocks());
  value_adam.apply(value.parameter_blocks("value"), vgrad.blocks());
  return s;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  env.validate();
  if (total_steps < 0) throw ConfigError("total_steps", "must be >= 0");
  if (seed_episodes < 1) throw ConfigError("seed_episodes", "must be >= 1");
  if (updates_per_episode < 0) throw ConfigError("updates_per_episode", "must be >= 0");
  if (batch_windows < 1) throw ConfigError("batch_windows", "must be >= 1");
  if (window_length < 2) throw ConfigError("window_length", "must be >= 2");
  if (!(loss.kl_balance >= 0.0 && loss.kl_balance <= 1.0)) {
    throw ConfigError("loss.kl_balance", "must lie in [0, 1]");
  }
  if (!(loss.free_nats >= 0.0)) throw ConfigError("loss.free_nats", "must be >= 0");
  if (window_length > env.horizon) throw ConfigError("window_length", "must not exceed env.horizon");
  if (imagination_horizon < 1) throw ConfigError("imagination_horizon", "must be >= 1");
  if (imagination_starts < 1) throw ConfigError("imagination_starts", "must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma", "must lie in (0, 1)");
  if (!(lambda_return >= 0.0 && lambda_return <= 1.0)) {
    throw ConfigError("lambda_return", "must lie in [0, 1]");
  }
  if (!(lr_model > 0.0)) throw ConfigError("lr_model", "must be > 0");
  if (!(lr_actor > 0.0)) throw ConfigError("lr_actor", "must be > 0");
  if (!(lr_value > 0.0)) throw ConfigError("lr_value", "must be > 0");
  if (!(policy_temperature > 0.0)) throw ConfigError("policy_temperature", "must be > 0");
  if (lambda_init < 0.0) throw ConfigError("lambda_init", "must be >= 0");
  if (!(dual_lr > 0.0)) throw ConfigError("dual_lr", "must be > 0");
  if (!(dual_running_rate > 0.0 && dual_running_rate <= 1.0)) {
    throw ConfigError("dual_running_rate", "must lie in (0, 1]");
  }
  if (sim_samples < 3) throw ConfigError("sim_samples", "must be >= 3");
  if (eval_episodes < 1) throw ConfigError("eval_episodes", "must be >= 1");
  if (model.latent_dim < 1) throw ConfigError("model.latent_dim", "must be >= 1");
  if (model.critic_dim < 1) throw ConfigError("model.critic_dim", "must be >= 1");
}

const std::vector<std::string> kMetricsColumns = {
    "step",          "episode",         "return",         "mi_bound",       "forward_kl",
    "empowerment_bound", "reward_loglik", "constraint_total", "lambda",       "policy_entropy",
    "value_loss",    "policy_loss",     "wallclock_s",    "sim_kernel",     "probe_r2_splus",
    "probe_r2_stilde", "probe_r2_ds",   "constraint_running"};

namespace {

void put(std::ostream& out, double v) {
  out << ',';
  if (std::isnan(v)) return;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

double field(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

}  // namespace

void write_metrics_header(std::ostream& out) {
  for (std::size_t i = 0; i < kMetricsColumns.size(); ++i) out << (i ? "," : "") << kMetricsColumns[i];
  out << '\n';
}

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
  out << r.step << ',' << r.episode;
  for (double v : {r.episode_return, r.mi_bound, r.forward_kl, r.empowerment_bound, r.reward_loglik,
                   r.constraint_total, r.lambda, r.policy_entropy, r.value_loss, r.policy_loss,
                   r.wallclock_s, r.sim_kernel, r.probe_r2_splus, r.probe_r2_stilde, r.probe_r2_ds,
                   r.constraint_running}) {
    put(out, v);
  }
  out << '\n';
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("metrics: empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header != kMetricsColumns) throw DomainError("metrics: header does not match " + std::string(kMetricsFormat));
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> c;
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(',', start);
      c.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (c.size() != kMetricsColumns.size()) throw DomainError("metrics: wrong field count");
    MetricsRow r;
    r.step = std::stol(c[0]);
    r.episode = std::stoi(c[1]);
    double* targets[] = {&r.episode_return, &r.mi_bound, &r.forward_kl, &r.empowerment_bound,
                         &r.reward_loglik, &r.constraint_total, &r.lambda, &r.policy_entropy,
                         &r.value_loss, &r.policy_loss, &r.wallclock_s, &r.sim_kernel,
                         &r.probe_r2_splus, &r.probe_r2_stilde, &r.probe_r2_ds,
                         &r.constraint_running};
    for (std::size_t i = 0; i < std::size(targets); ++i) *targets[i] = field(c[i + 2]);
    rows.push_back(r);
  }
  return rows;
}

Evaluation evaluate_representation(const world::WorldModel& model, const ReplayBuffer& replay,
                                   int first_episode, int sim_samples, std::uint64_t seed) {
  const envs::FactoredEnv env(replay.env_config());
  const auto& ecfg = replay.env_config();
  std::vector<Vec> latents, gts;
  std::vector<Vec> t_plus, t_tilde, t_ds;
  for (int e = std::max(0, first_episode); e < replay.episodes(); ++e) {
    const auto& recs = replay.episode(e);
    const Mat means = world::filter_means(model, recs);
    for (std::size_t t = 0; t < recs.size(); ++t) {
      latents.push_back(means.col(static_cast<Eigen::Index>(t) + 1));
      gts.push_back(envs::task_state_vector(env, recs[t].state));
      t_plus.push_back(envs::one_hot_s_plus(ecfg, recs[t].state));
      t_tilde.push_back(envs::one_hot_s_tilde(ecfg, recs[t].state));
      t_ds.push_back(envs::one_hot_ds(ecfg, recs[t].state));
    }
  }
  Evaluation ev;
  if (latents.empty()) return ev;

  // Similarity on distinct ground-truth states in a seeded order.
  std::vector<std::size_t> order(latents.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng::stream(seed, "eval-sim");
  for (std::size_t i = order.size(); i-- > 1;) {
    std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i) + 1))]);
  }
  std::vector<Vec> shuffled_gt;
  for (std::size_t i : order) shuffled_gt.push_back(gts[i]);
  std::vector<Vec> sim_lat, sim_gt;
  for (std::size_t k : metrics::distinct_indices(shuffled_gt)) {
    if (static_cast<int>(sim_lat.size()) >= sim_samples) break;
    sim_lat.push_back(latents[order[k]]);
    sim_gt.push_back(gts[order[k]]);
  }
  if (sim_lat.size() >= 3) {
    try {
      ev.sim_kernel = metrics::behavioral_similarity(sim_lat, sim_gt);
    } catch (const DomainError&) {
      // Coincident latents leave the metric undefined.
    }
  }

  const auto n = static_cast<Eigen::Index>(latents.size());
  if (n > latents.front().size() + 1) {
    Mat Z(latents.front().size(), n);
    for (Eigen::Index i = 0; i < n; ++i) Z.col(i) = latents[static_cast<std::size_t>(i)];
    auto probe = [&](const std::vector<Vec>& t) {
      if (t.front().size() == 0) return MetricsRow::kNone;
      Mat T(t.front().size(), n);
      for (Eigen::Index i = 0; i < n; ++i) T.col(i) = t[static_cast<std::size_t>(i)];
      return metrics::linear_probe(Z, T, seed).r2;
    };
    ev.probe_r2_splus = probe(t_plus);
    ev.probe_r2_stilde = probe(t_tilde);
    ev.probe_r2_ds = probe(t_ds);
  }
  return ev;
}

// ---------------------------------------------------------------------------

namespace {

struct EpisodeOutcome {
  std::vector<TransitionRecord> records;
  double ret = 0.0;
};

EpisodeOutcome run_episode(const TrainConfig& cfg, envs::FactoredEnv& env, int episode,
                           const world::WorldModel* model, const Policy* policy, Rng& act_rng,
                           std::string_view reset_stream = "env") {
  EpisodeOutcome out;
  auto first = env.reset(Rng::derive_seed(cfg.seed, reset_stream, static_cast<std::uint64_t>(episode)));
  Vec o = first.observation;
  const int d = model ? model->cfg.latent_dim : 0;
  Vec z = Vec::Zero(d);
  int a_prev = -1;
  Mat mean, lv;
  for (int t = 0; t < cfg.env.horizon; ++t) {
    int a = 0;
    if (model && policy) {
      world::posterior_params(*model, z, {a_prev}, o, mean, lv);
      z = mean.col(0);
      const Vec p = policy->probs(z).col(0);
      a = act_rng.categorical(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
    } else {
      a = act_rng.uniform_int(cfg.env.num_actions);
    }
    const auto step = env.step(a);
    TransitionRecord r;
    r.o_prev = o;
    r.a_prev = a;
    r.reward = cfg.zero_rewards ? 0.0 : step.reward;
    r.o = step.observation;
    r.episode = episode;
    r.step = t + 1;
    r.state = step.state;
    out.ret += step.reward;
    out.records.push_back(std::move(r));
    o = step.observation;
    a_prev = a;
  }
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& cfg_in, const RowSink& sink) {
  TrainConfig cfg = cfg_in;
  cfg.model.obs_dim = cfg.env.observation_dim();
  cfg.model.num_actions = cfg.env.num_actions;
  cfg.validate();
  cfg.model.validate();

  const auto t0 = std::chrono::steady_clock::now();
  auto wall = [&]() {
    if (!cfg.record_wallclock) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  TrainResult res;
  Rng init = Rng::stream(cfg.seed, "model-init");
  res.model = world::WorldModel::random(cfg.model, init);
  const int d = cfg.model.latent_dim;
  std::vector<int> pw{d};
  pw.insert(pw.end(), cfg.model.hidden.begin(), cfg.model.hidden.end());
  std::vector<int> policy_widths = pw, value_widths = pw;
  policy_widths.push_back(cfg.env.num_actions);
  value_widths.push_back(1);
  res.policy.net = nn::DenseNet::random(policy_widths, init);
  res.policy.temperature = cfg.policy_temperature;
  // Start from a uniform policy.
  res.policy.net.layers().back().weight.setZero();
  res.value = nn::DenseNet::random(value_widths, init);
  res.value.layers().back().weight.setZero();
  res.lagrangian.lambda = cfg.lambda_init;
  res.lagrangian.c0 = cfg.c0;
  res.lagrangian.dual_lr = cfg.dual_lr;
  res.lagrangian.running_rate = cfg.dual_running_rate;
  res.replay = ReplayBuffer(cfg.env);

  auto model_params = res.model.parameter_blocks();
  nn::AdamState model_adam(nn::AdamConfig{cfg.lr_model}, model_params);
  nn::AdamState policy_adam(nn::AdamConfig{cfg.lr_actor}, res.policy.net.parameter_blocks("policy"));
  nn::AdamState value_adam(nn::AdamConfig{cfg.lr_value}, res.value.parameter_blocks("value"));

  Rng act_rng = Rng::stream(cfg.seed, "act");
  Rng batch_rng = Rng::stream(cfg.seed, "batch-sampling");
  Rng model_rng = Rng::stream(cfg.seed, "model-noise");
  Rng imag_rng = Rng::stream(cfg.seed, "imagination");
  envs::FactoredEnv env(cfg.env);

  auto emit = [&](const MetricsRow& row) {
    res.rows.push_back(row);
    if (sink) sink(row);
  };

  // Fixed random-policy episodes on which every evaluation is scored, so that
  // variants sharing a seed are compared on identical states.
  ReplayBuffer eval_set(cfg.env);
  {
    envs::FactoredEnv eval_env(cfg.env);
    Rng eval_act = Rng::stream(cfg.seed, "eval-act");
    for (int k = 0; k < cfg.eval_episodes; ++k) {
      eval_set.add_episode(run_episode(cfg, eval_env, k, nullptr, nullptr, eval_act, "eval-env").records);
    }
  }

  long env_steps = 0;
  int episode = 0;
  for (; episode < cfg.seed_episodes; ++episode) {
    auto out = run_episode(cfg, env, episode, nullptr, nullptr, act_rng);
    res.replay.add_episode(std::move(out.records));
    MetricsRow row;
    row.step = env_steps;
    row.episode = episode;
    row.episode_return = out.ret;
    row.wallclock_s = wall();
    emit(row);
  }

  const int M = cfg.imagination_starts;
  while (env_steps < cfg.total_steps) {
    for (int u = 0; u < cfg.updates_per_episode; ++u) {
      const auto windows = res.replay.sample_windows(cfg.batch_windows, cfg.window_length, batch_rng);
      world::LossResult lr = world::lagrangian_loss(res.model, &res.policy, windows,
                                                    res.lagrangian.lambda, res.lagrangian.c0,
                                                    cfg.loss, model_rng);
      clip(lr.grads, cfg.model_grad_clip);
      model_adam.apply(model_params, lr.grads.blocks());
      if (!res.model.all_finite()) throw NumericError("world model parameters became non-finite");
      if (cfg.dual_updates) world::dual_update(res.lagrangian, lr.constraint.total);

      const auto pick = mi::shuffled_pairing(static_cast<int>(lr.latents.cols()), batch_rng);
      const int m = std::min<int>(M, static_cast<int>(lr.latents.cols()));
      Mat z0(d, m);
      for (int i = 0; i < m; ++i) z0.col(i) = lr.latents.col(pick[static_cast<std::size_t>(i)]);
      const ImaginedTrajectory traj = imagine(res.model, res.policy, z0, cfg.imagination_horizon, imag_rng);
      const Mat values = trajectory_values(res.value, traj);
      const Mat targets = augmented_returns(traj, values, cfg.gamma, cfg.lambda_return,
                                            cfg.emp_in_policy ? cfg.beta_emp : 0.0);
      const UpdateStats us = policy_value_update(res.policy, res.value, policy_adam, value_adam,
                                                 traj, targets, cfg.behaviour);

      MetricsRow row;
      row.step = env_steps;
      row.episode = episode;
      row.mi_bound = lr.mi.value;
      row.forward_kl = lr.forward_kl;
      row.empowerment_bound = lr.constraint.empowerment;
      row.reward_loglik = lr.constraint.reward;
      row.constraint_total = lr.constraint.total;
      row.lambda = res.lagrangian.lambda;
      row.policy_entropy = us.entropy;
      row.value_loss = us.value_loss;
      row.policy_loss = us.policy_loss;
      row.wallclock_s = wall();
      row.constraint_running = res.lagrangian.running;
      emit(row);
    }

    auto out = run_episode(cfg, env, episode, &res.model, &res.policy, act_rng);
    env_steps += static_cast<long>(out.records.size());
    res.episode_returns.push_back(out.ret);
    res.replay.add_episode(std::move(out.records));
    MetricsRow row;
    row.step = env_steps;
    row.episode = episode;
    row.episode_return = out.ret;
    row.wallclock_s = wall();
    const bool last = env_steps >= cfg.total_steps;
    const int trained_episodes = episode - cfg.seed_episodes + 1;
    if (last || (cfg.eval_every > 0 && trained_episodes % cfg.eval_every == 0)) {
      const Evaluation ev = evaluate_representation(
          res.model, eval_set, 0, cfg.sim_samples,
          Rng::derive_seed(cfg.seed, "eval", static_cast<std::uint64_t>(episode)));
      row.sim_kernel = ev.sim_kernel;
      row.probe_r2_splus = ev.probe_r2_splus;
      row.probe_r2_stilde = ev.probe_r2_stilde;
      row.probe_r2_ds = ev.probe_r2_ds;
      if (last) res.final_eval = ev;
    }
    emit(row);
    ++episode;
  }
  return res;
}

double tail_mean(const std::vector<double>& values, std::size_t count) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = std::min(count, values.size());
  double sum = 0.0;
  for (std::size_t i = values.size() - n; i < values.size(); ++i) sum += values[i];
  return sum / static_cast<double>(n);
}

}  // namespace infoprio::agent
