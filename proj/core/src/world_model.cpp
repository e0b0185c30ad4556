#include "infoprio/world_model.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>

namespace infoprio::world {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

std::vector<int> widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

Mat one_hot(const std::vector<int>& actions, int n) {
  Mat m = Mat::Zero(n, static_cast<Eigen::Index>(actions.size()));
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] >= n) throw DomainError("action " + std::to_string(actions[i]) + " out of range");
    if (actions[i] >= 0) m(actions[i], static_cast<Eigen::Index>(i)) = 1.0;
  }
  return m;
}

Mat encoder_input(const WorldModel& m, const Mat& z_prev, const std::vector<int>& a_prev,
                  const Mat& obs) {
  const int d = m.cfg.latent_dim;
  const int A = m.cfg.encoder_uses_action ? m.cfg.num_actions : 0;
  Mat in(m.cfg.encoder_input_dim(), obs.cols());
  in.topRows(d) = z_prev;
  if (A > 0) in.middleRows(d, A) = one_hot(a_prev, A);
  in.bottomRows(m.cfg.obs_dim) = obs;
  return in;
}

Mat clamp(const Mat& x, double lo, double hi) { return x.cwiseMax(lo).cwiseMin(hi); }

Mat clamp_mask(const Mat& x, double lo, double hi) {
  return ((x.array() >= lo) && (x.array() <= hi)).cast<double>();
}

Mat stack(const Mat& a, const Mat& b) {
  Mat out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

}  // namespace

void WorldModelConfig::validate() const {
  if (obs_dim < 1) throw ConfigError("obs_dim", "must be >= 1");
  if (num_actions < 2) throw ConfigError("num_actions", "must be >= 2");
  if (latent_dim < 1) throw ConfigError("latent_dim", "must be >= 1");
  if (critic_dim < 1) throw ConfigError("critic_dim", "must be >= 1");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden", "widths must be >= 1");
  if (!(logvar_min < logvar_max)) throw ConfigError("logvar_min", "must be < logvar_max");
}

int WorldModelConfig::encoder_input_dim() const {
  return latent_dim + (encoder_uses_action ? num_actions : 0) + obs_dim;
}

nlohmann::json to_json(const WorldModelConfig& c) {
  return {{"obs_dim", c.obs_dim},
          {"num_actions", c.num_actions},
          {"latent_dim", c.latent_dim},
          {"hidden", c.hidden},
          {"critic_dim", c.critic_dim},
          {"encoder_uses_action", c.encoder_uses_action},
          {"logvar_min", c.logvar_min},
          {"logvar_max", c.logvar_max}};
}

WorldModelConfig world_model_config_from_json(const nlohmann::json& j) {
  WorldModelConfig c;
  c.obs_dim = j.at("obs_dim").get<int>();
  c.num_actions = j.at("num_actions").get<int>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.critic_dim = j.at("critic_dim").get<int>();
  c.encoder_uses_action = j.at("encoder_uses_action").get<bool>();
  c.logvar_min = j.at("logvar_min").get<double>();
  c.logvar_max = j.at("logvar_max").get<double>();
  c.validate();
  return c;
}

WorldModel WorldModel::random(const WorldModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const int d = cfg.latent_dim;
  const int A = cfg.num_actions;
  WorldModel m;
  m.cfg = cfg;
  m.encoder = nn::DenseNet::random(widths(cfg.encoder_input_dim(), cfg.hidden, 2 * d), rng);
  m.prior = nn::DenseNet::random(widths(d + A, cfg.hidden, 2 * d), rng);
  m.inverse = nn::DenseNet::random(widths(2 * d, cfg.hidden, A), rng);
  m.reward = nn::DenseNet::random(widths(d, cfg.hidden, 1), rng);
  m.critic = mi::BilinearCritic::random(cfg.obs_dim, d, cfg.critic_dim, cfg.hidden, false, rng);
  m.decoder = nn::DenseNet::random(widths(d, cfg.hidden, cfg.obs_dim), rng);
  return m;
}

std::vector<ParamBlock> WorldModel::parameter_blocks() {
  std::vector<ParamBlock> out;
  auto append = [&out](std::vector<ParamBlock> b) { out.insert(out.end(), b.begin(), b.end()); };
  append(encoder.parameter_blocks("encoder"));
  append(prior.parameter_blocks("prior"));
  append(inverse.parameter_blocks("inverse"));
  append(reward.parameter_blocks("reward"));
  append(decoder.parameter_blocks("decoder"));
  append(critic.parameter_blocks("critic"));
  return out;
}

bool WorldModel::all_finite() const {
  return encoder.all_finite() && prior.all_finite() && inverse.all_finite() &&
         reward.all_finite() && decoder.all_finite() && critic.obs_embed.all_finite() &&
         critic.W.allFinite();
}

WorldModelGradients WorldModelGradients::zeros_like(const WorldModel& m) {
  WorldModelGradients g;
  g.encoder = nn::NetGradients::zeros_like(m.encoder);
  g.prior = nn::NetGradients::zeros_like(m.prior);
  g.inverse = nn::NetGradients::zeros_like(m.inverse);
  g.reward = nn::NetGradients::zeros_like(m.reward);
  g.decoder = nn::NetGradients::zeros_like(m.decoder);
  g.critic = mi::CriticGradients::zeros_like(m.critic);
  return g;
}

std::vector<GradBlock> WorldModelGradients::blocks() const {
  std::vector<GradBlock> out;
  for (const auto* g : {&encoder, &prior, &inverse, &reward, &decoder}) {
    auto b = g->blocks();
    out.insert(out.end(), b.begin(), b.end());
  }
  auto c = critic.blocks();
  out.insert(out.end(), c.begin(), c.end());
  return out;
}

nlohmann::json to_json(const WorldModel& m) {
  std::vector<double> w(static_cast<std::size_t>(m.critic.W.size()));
  for (Eigen::Index r = 0; r < m.critic.W.rows(); ++r)
    for (Eigen::Index c = 0; c < m.critic.W.cols(); ++c)
      w[static_cast<std::size_t>(r * m.critic.W.cols() + c)] = m.critic.W(r, c);
  return {{"config", to_json(m.cfg)},
          {"encoder", nn::to_json(m.encoder)},
          {"prior", nn::to_json(m.prior)},
          {"inverse", nn::to_json(m.inverse)},
          {"reward", nn::to_json(m.reward)},
          {"decoder", nn::to_json(m.decoder)},
          {"critic_embed", nn::to_json(m.critic.obs_embed)},
          {"critic_W", {{"rows", m.critic.W.rows()}, {"cols", m.critic.W.cols()}, {"values", w}}}};
}

WorldModel world_model_from_json(const nlohmann::json& j) {
  WorldModel m;
  m.cfg = world_model_config_from_json(j.at("config"));
  m.encoder = nn::densenet_from_json(j.at("encoder"));
  m.prior = nn::densenet_from_json(j.at("prior"));
  m.inverse = nn::densenet_from_json(j.at("inverse"));
  m.reward = nn::densenet_from_json(j.at("reward"));
  m.decoder = nn::densenet_from_json(j.at("decoder"));
  m.critic.obs_embed = nn::densenet_from_json(j.at("critic_embed"));
  const auto& w = j.at("critic_W");
  const auto rows = w.at("rows").get<Eigen::Index>();
  const auto cols = w.at("cols").get<Eigen::Index>();
  const auto values = w.at("values").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != rows * cols) throw ShapeError("critic_W size");
  m.critic.W.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m.critic.W(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  return m;
}

// ---------------------------------------------------------------------------

void posterior_params(const WorldModel& m, const Mat& z_prev, const std::vector<int>& a_prev,
                      const Mat& obs, Mat& mean, Mat& logvar) {
  const int d = m.cfg.latent_dim;
  const Mat out = nn::forward_batch(m.encoder, encoder_input(m, z_prev, a_prev, obs));
  mean = out.topRows(d);
  logvar = clamp(out.bottomRows(d), m.cfg.logvar_min, m.cfg.logvar_max);
}

void prior_params(const WorldModel& m, const Mat& z_prev, const std::vector<int>& a_prev,
                  Mat& mean, Mat& logvar) {
  const int d = m.cfg.latent_dim;
  const Mat out = nn::forward_batch(m.prior, stack(z_prev, one_hot(a_prev, m.cfg.num_actions)));
  mean = out.topRows(d);
  logvar = clamp(out.bottomRows(d), m.cfg.logvar_min, m.cfg.logvar_max);
}

LatentState encode(const WorldModel& m, const Vec& z_prev, int a_prev, const Vec& o, Rng& rng) {
  if (o.size() != m.cfg.obs_dim) throw ShapeError("encode: observation dimension mismatch");
  if (z_prev.size() != m.cfg.latent_dim) throw ShapeError("encode: latent dimension mismatch");
  Mat mean, lv;
  posterior_params(m, z_prev, {a_prev}, o, mean, lv);
  LatentState s;
  s.mean = mean.col(0);
  s.logvar = lv.col(0);
  s.sample.resize(m.cfg.latent_dim);
  for (int i = 0; i < m.cfg.latent_dim; ++i) {
    s.sample[i] = s.mean[i] + std::exp(0.5 * s.logvar[i]) * rng.normal();
  }
  if (!s.sample.allFinite()) throw NumericError("encode: non-finite latent");
  return s;
}

Mat filter_means(const WorldModel& m, const std::vector<TransitionRecord>& records) {
  const int d = m.cfg.latent_dim;
  Mat out(d, static_cast<Eigen::Index>(records.size()) + 1);
  if (records.empty()) return out;
  Mat mean, lv;
  posterior_params(m, Mat::Zero(d, 1), {-1}, records.front().o_prev, mean, lv);
  out.col(0) = mean.col(0);
  for (std::size_t t = 0; t < records.size(); ++t) {
    posterior_params(m, out.col(static_cast<Eigen::Index>(t)), {records[t].a_prev}, records[t].o,
                     mean, lv);
    out.col(static_cast<Eigen::Index>(t) + 1) = mean.col(0);
  }
  return out;
}

Vec gaussian_kl(const Mat& mu, const Mat& lv, const Mat& m, const Mat& plv) {
  const auto term = plv.array() - lv.array() + (lv.array().exp() + (mu - m).array().square()) *
                                                   (-plv.array()).exp() - 1.0;
  return 0.5 * term.colwise().sum().transpose();
}

double gaussian_kl(const Vec& mu, const Vec& lv, const Vec& m, const Vec& plv) {
  return gaussian_kl(Mat(mu), Mat(lv), Mat(m), Mat(plv))[0];
}

double reward_loglik(const WorldModel& m, const Vec& z, double r) {
  const double pred = nn::forward(m.reward, z)[0];
  return -0.5 * (r - pred) * (r - pred) - kHalfLog2Pi;
}

Mat inverse_log_probs(const WorldModel& m, const Mat& z_t, const Mat& z_prev) {
  return nn::log_softmax(nn::forward_batch(m.inverse, stack(z_t, z_prev)));
}

std::string to_string(MIMode m) { return m == MIMode::kNce ? "nce" : "nwj"; }
std::string to_string(Representation r) {
  return r == Representation::kContrastive ? "contrastive" : "reconstruction";
}

// ---------------------------------------------------------------------------

LossResult lagrangian_loss(const WorldModel& m, const agent::Policy* policy,
                           const std::vector<Window>& windows, double lambda, double c0,
                           const LossConfig& cfg, Rng& rng, bool with_gradients) {
  if (windows.empty()) throw DomainError("loss: empty batch");
  const int B = static_cast<int>(windows.size());
  const int L = static_cast<int>(windows.front().size());
  if (L < 2) throw DomainError("loss: windows need length >= 2");
  for (const auto& w : windows) {
    if (static_cast<int>(w.size()) != L) throw ShapeError("loss: windows differ in length");
    check_window(w);
  }
  const int d = m.cfg.latent_dim;
  const int A = m.cfg.num_actions;
  const int K = L + 1;  // latents per window
  const int N = B * K;
  const double lo = m.cfg.logvar_min;
  const double hi = m.cfg.logvar_max;

  // Per time index, window-batched inputs.
  std::vector<Mat> obs(static_cast<std::size_t>(K), Mat(m.cfg.obs_dim, B));
  std::vector<std::vector<int>> act(static_cast<std::size_t>(L), std::vector<int>(B));
  Mat rew(L, B);
  for (int b = 0; b < B; ++b) {
    const auto& w = windows[static_cast<std::size_t>(b)];
    obs[0].col(b) = w[0].o_prev;
    for (int j = 0; j < L; ++j) {
      obs[static_cast<std::size_t>(j) + 1].col(b) = w[static_cast<std::size_t>(j)].o;
      act[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)] = w[static_cast<std::size_t>(j)].a_prev;
      rew(j, b) = w[static_cast<std::size_t>(j)].reward;
    }
  }

  // Posterior chain.
  std::vector<nn::ForwardCache> enc(static_cast<std::size_t>(K));
  std::vector<Mat> mu(K), lv_raw(K), lv(K), eps(K), z(K);
  const std::vector<int> null_actions(static_cast<std::size_t>(B), -1);
  for (int k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const Mat zp = k == 0 ? Mat::Zero(d, B) : z[ku - 1];
    const auto& ap = k == 0 ? null_actions : act[ku - 1];
    enc[ku] = nn::forward_cached(m.encoder, encoder_input(m, zp, ap, obs[ku]));
    mu[ku] = enc[ku].output.topRows(d);
    lv_raw[ku] = enc[ku].output.bottomRows(d);
    lv[ku] = clamp(lv_raw[ku], lo, hi);
    eps[ku].resize(d, B);
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < d; ++i) eps[ku](i, b) = rng.normal();
    z[ku] = mu[ku] + ((0.5 * lv[ku].array()).exp() * eps[ku].array()).matrix();
    if (!z[ku].allFinite()) throw NumericError("loss: non-finite latent at step " + std::to_string(k));
  }

  // Per-record heads.
  std::vector<nn::ForwardCache> pri(L), inv(L), rw(L);
  std::vector<nn::ForwardCache> pol(policy ? L : 0);
  std::vector<Mat> pm(L), plv_raw(L), plv(L), inv_lp(L);
  Mat kl(L, B), emp(L, B), rll(L, B);
  const double uniform_entropy = std::log(static_cast<double>(A));
  for (int j = 0; j < L; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    pri[ju] = nn::forward_cached(m.prior, stack(z[ju], one_hot(act[ju], A)));
    pm[ju] = pri[ju].output.topRows(d);
    plv_raw[ju] = pri[ju].output.bottomRows(d);
    plv[ju] = clamp(plv_raw[ju], lo, hi);
    kl.row(j) = gaussian_kl(mu[ju + 1], lv[ju + 1], pm[ju], plv[ju]).transpose();

    inv[ju] = nn::forward_cached(m.inverse, stack(z[ju + 1], z[ju]));
    inv_lp[ju] = nn::log_softmax(inv[ju].output);
    Vec ent = Vec::Constant(B, uniform_entropy);
    if (policy) {
      pol[ju] = nn::forward_cached(policy->net, z[ju]);
      ent = nn::softmax_entropy(pol[ju].output);
    }
    for (int b = 0; b < B; ++b) emp(j, b) = inv_lp[ju](act[ju][static_cast<std::size_t>(b)], b) + ent[b];

    rw[ju] = nn::forward_cached(m.reward, z[ju + 1]);
    rll.row(j) = (-0.5 * (rew.row(j) - rw[ju].output.row(0)).array().square() - kHalfLog2Pi).matrix();
  }

  LossResult res;
  const double records = static_cast<double>(B) * L;
  res.forward_kl = kl.sum() / records;
  const bool kl_floored = res.forward_kl < cfg.free_nats;
  res.constraint.forward = -std::max(res.forward_kl, cfg.free_nats);
  res.constraint.empowerment = emp.sum() / records;
  res.constraint.reward = rll.sum() / records;
  res.constraint.total = (cfg.use_forward ? res.constraint.forward : 0.0) +
                         (cfg.use_empowerment ? res.constraint.empowerment : 0.0) +
                         (cfg.use_reward ? res.constraint.reward : 0.0);

  // Window-major sample matrices.
  res.latents.resize(d, N);
  res.observations.resize(m.cfg.obs_dim, N);
  for (int b = 0; b < B; ++b) {
    for (int k = 0; k < K; ++k) {
      res.latents.col(b * K + k) = z[static_cast<std::size_t>(k)].col(b);
      res.observations.col(b * K + k) = obs[static_cast<std::size_t>(k)].col(b);
    }
  }

  double objective_mi = 0.0;
  Mat dZ_all = Mat::Zero(d, N);  // d objective / d latents from the representation term
  WorldModelGradients g;
  if (with_gradients) g = WorldModelGradients::zeros_like(m);

  if (cfg.use_mi) {
    if (cfg.representation == Representation::kContrastive) {
      const mi::CriticCache cc = mi::critic_forward(m.critic, res.observations, res.latents);
      mi::ScoreBound sb;
      if (cfg.mi_mode == MIMode::kNce) {
        sb = mi::nce_from_scores(cc.scores, mi::negative_mask(B, K, cfg.negatives),
                                 mi::NceMode::kExclusive);
        sb.estimate.scheme = mi::to_string(cfg.negatives);
      } else {
        sb = mi::nwj_from_scores(cc.scores, mi::shuffled_pairing(N, rng));
      }
      res.mi = sb.estimate;
      objective_mi = sb.estimate.value;
      if (with_gradients) g.critic = mi::critic_backward(m.critic, cc, sb.grad, &dZ_all);
    } else {
      const nn::ForwardCache dc = nn::forward_cached(m.decoder, res.latents);
      const Mat resid = res.observations - dc.output;
      const double c = static_cast<double>(m.cfg.obs_dim) * kHalfLog2Pi;
      const Vec terms = (-0.5 * resid.colwise().squaredNorm().array() - c).transpose();
      res.mi = mi::summarize("reconstruction", terms);
      res.reconstruction = res.mi.value;
      objective_mi = res.mi.value;
      if (with_gradients) {
        const Mat up = resid / static_cast<double>(N);
        Mat din;
        g.decoder = nn::backward(m.decoder, dc, up, &din);
        dZ_all = din;
      }
    }
  }

  const double objective = objective_mi + lambda * (res.constraint.total - c0);
  res.loss = -objective;
  if (!std::isfinite(res.loss)) throw NumericError("loss: non-finite value");
  if (!with_gradients) return res;

  // Backward pass over the chain, gradients of the objective.
  const double wc = lambda / records;
  std::vector<Mat> dz(K, Mat::Zero(d, B));
  for (int b = 0; b < B; ++b)
    for (int k = 0; k < K; ++k) dz[static_cast<std::size_t>(k)].col(b) = dZ_all.col(b * K + k);
  std::vector<Mat> dmu(K, Mat::Zero(d, B)), dlv(K, Mat::Zero(d, B));

  for (int j = 0; j < L; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (cfg.use_forward && !kl_floored) {
      // objective contains -wc * KL.
      const double w_post = cfg.kl_balance > 0.0 ? wc * (1.0 - cfg.kl_balance) : wc;
      const double w_prior = cfg.kl_balance > 0.0 ? wc * cfg.kl_balance : wc;
      const Mat inv_pv = (-plv[ju].array()).exp();
      const Mat diff = mu[ju + 1] - pm[ju];
      dmu[ju + 1] += -w_post * (diff.array() * inv_pv.array()).matrix();
      dlv[ju + 1] += -w_post * (0.5 * ((lv[ju + 1].array() - plv[ju].array()).exp() - 1.0)).matrix();
      Mat dprior(2 * d, B);
      dprior.topRows(d) = w_prior * (diff.array() * inv_pv.array()).matrix();
      dprior.bottomRows(d) =
          (-w_prior * 0.5 * (1.0 - (lv[ju + 1].array().exp() + diff.array().square()) * inv_pv.array()))
              .matrix()
              .cwiseProduct(clamp_mask(plv_raw[ju], lo, hi));
      Mat din;
      g.prior += nn::backward(m.prior, pri[ju], dprior, &din);
      dz[ju] += din.topRows(d);
    }
    if (cfg.use_empowerment) {
      Mat dlogits = -inv_lp[ju].array().exp();
      for (int b = 0; b < B; ++b) dlogits(act[ju][static_cast<std::size_t>(b)], b) += 1.0;
      dlogits *= wc;
      Mat din;
      g.inverse += nn::backward(m.inverse, inv[ju], dlogits, &din);
      dz[ju + 1] += din.topRows(d);
      dz[ju] += din.bottomRows(d);
      if (policy) {
        // dH/dlogit = -p (log p + H); the policy itself is held fixed.
        const Mat lp = nn::log_softmax(pol[ju].output);
        const Mat p = lp.array().exp();
        const Vec h = -(p.array() * lp.array()).colwise().sum().transpose();
        Mat dent = -(p.array() * (lp.rowwise() + h.transpose()).array()).matrix() * wc;
        Mat dpin;
        nn::backward(policy->net, pol[ju], dent, &dpin);
        dz[ju] += dpin;
      }
    }
    if (cfg.use_reward) {
      const Mat dr = wc * (rew.row(j) - rw[ju].output.row(0));
      Mat din;
      g.reward += nn::backward(m.reward, rw[ju], dr, &din);
      dz[ju + 1] += din;
    }
  }

  for (int k = K - 1; k >= 0; --k) {
    const auto ku = static_cast<std::size_t>(k);
    const Mat sd = (0.5 * lv[ku].array()).exp();
    Mat dout(2 * d, B);
    dout.topRows(d) = dmu[ku] + dz[ku];
    dout.bottomRows(d) = (dlv[ku].array() + dz[ku].array() * eps[ku].array() * 0.5 * sd.array())
                             .matrix()
                             .cwiseProduct(clamp_mask(lv_raw[ku], lo, hi));
    Mat din;
    g.encoder += nn::backward(m.encoder, enc[ku], dout, k > 0 ? &din : nullptr);
    if (k > 0) dz[ku - 1] += din.topRows(d);
  }

  // Objective gradients -> loss gradients.
  g.encoder *= -1.0;
  g.prior *= -1.0;
  g.inverse *= -1.0;
  g.reward *= -1.0;
  g.decoder *= -1.0;
  g.critic.obs_embed *= -1.0;
  g.critic.W *= -1.0;
  res.grads = std::move(g);
  return res;
}

nlohmann::json to_json(const LagrangianState& s) {
  return {{"lambda", s.lambda},
          {"c0", s.c0},
          {"dual_lr", s.dual_lr},
          {"running", std::isfinite(s.running) ? nlohmann::json(s.running) : nlohmann::json()},
          {"running_rate", s.running_rate}};
}

void dual_update(LagrangianState& lag, double c_bound) {
  lag.running = std::isfinite(lag.running)
                    ? (1.0 - lag.running_rate) * lag.running + lag.running_rate * c_bound
                    : c_bound;
  lag.lambda = std::max(0.0, lag.lambda - lag.dual_lr * (lag.running - lag.c0));
}

}  // namespace infoprio::world
