#pragma once

// Behaviour learning in imagination and the outer training loop: model
// updates, actor/critic updates on imagined rollouts, environment episodes.

#include "infoprio/common.hpp"
#include "infoprio/envs.hpp"
#include "infoprio/nn.hpp"
#include "infoprio/policy.hpp"
#include "infoprio/replay.hpp"
#include "infoprio/world_model.hpp"

#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace infoprio::agent {

using ValueNet = nn::DenseNet;

struct ImaginedTrajectory {
  std::vector<Mat> z;                     // horizon + 1 entries, d x M
  std::vector<std::vector<int>> actions;  // horizon x M
  Mat reward;                             // horizon x M, predicted reward mean at z_{k+1}
  Mat log_q;                              // log q(a_k | z_{k+1}, z_k)
  Mat log_pi;                             // log π(a_k | z_k)
  Mat entropy;                            // H(π(·|z_k))

  int horizon() const { return static_cast<int>(actions.size()); }
};

/// Rolls the forward prior from the columns of z0 for `horizon` steps.
ImaginedTrajectory imagine(const world::WorldModel& model, const Policy& policy, const Mat& z0,
                           int horizon, Rng& rng);

/// Value of every state along the trajectory, (horizon + 1) x M.
Mat trajectory_values(const ValueNet& value, const ImaginedTrajectory& traj);

/// G_k = r_k + γ [(1-λ) V_{k+1} + λ G_{k+1}], G_H = V_H.
Mat lambda_returns(const Mat& rewards, const Mat& values, double gamma, double lambda);

/// λ-returns over r̃_k = r̂_k + β (log q_k + H_k).
Mat augmented_returns(const ImaginedTrajectory& traj, const Mat& values, double gamma,
                      double lambda, double beta);

/// -mean[adv · log π(a|z)] - w · mean H(π(·|z)) and its gradient with respect
/// to the policy parameters. Columns of z are samples.
std::pair<double, nn::NetGradients> policy_surrogate(const Policy& policy, const Mat& z,
                                                     const std::vector<int>& actions,
                                                     const Vec& advantages, double entropy_weight);

/// mean (V(z) - target)² and its parameter gradient.
std::pair<double, nn::NetGradients> value_regression(const ValueNet& value, const Mat& z,
                                                     const Vec& targets);

struct BehaviourConfig {
  double entropy_weight = 0.01;
  double value_weight = 1.0;
  double grad_clip = 100.0;  // global-norm clip, <= 0 disables
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

/// One Adam step for the actor and one for the critic; targets are constants.
UpdateStats policy_value_update(Policy& policy, ValueNet& value, nn::AdamState& policy_adam,
                                nn::AdamState& value_adam, const ImaginedTrajectory& traj,
                                const Mat& targets, const BehaviourConfig& cfg);

// ---------------------------------------------------------------------------

struct TrainConfig {
  envs::EnvConfig env = envs::preset("ring");
  world::WorldModelConfig model;  // obs_dim / num_actions filled from env
  world::LossConfig loss{.free_nats = 3.0};

  long total_steps = 10000;  // environment steps after the seeding episodes
  int seed_episodes = 5;
  int updates_per_episode = 20;
  int batch_windows = 16;
  int window_length = 16;
  int imagination_horizon = 15;
  int imagination_starts = 32;
  double gamma = 0.99;
  double lambda_return = 0.95;
  double beta_emp = 0.1;
  BehaviourConfig behaviour;
  double lr_model = 1e-3;
  double lr_actor = 3e-4;
  double lr_value = 1e-3;
  double model_grad_clip = 100.0;
  double policy_temperature = 1.0;

  double lambda_init = 1.0;
  double c0 = -4.2;
  double dual_lr = 1e-3;
  double dual_running_rate = 0.05;
  bool dual_updates = true;

  bool emp_in_policy = true;
  bool zero_rewards = false;

  int eval_every = 0;  // episodes between similarity/probe evaluations; 0 = final only
  int eval_episodes = 10;
  int sim_samples = 64;
  bool record_wallclock = false;

  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr const char* kMetricsFormat = "infoprio.metrics.v1";
extern const std::vector<std::string> kMetricsColumns;

/// One CSV row. NaN fields are written empty.
struct MetricsRow {
  static constexpr double kNone = std::numeric_limits<double>::quiet_NaN();
  long step = 0;
  int episode = 0;
  double episode_return = kNone;
  double mi_bound = kNone;
  double forward_kl = kNone;
  double empowerment_bound = kNone;
  double reward_loglik = kNone;
  double constraint_total = kNone;
  double lambda = kNone;
  double policy_entropy = kNone;
  double value_loss = kNone;
  double policy_loss = kNone;
  double wallclock_s = 0.0;
  double sim_kernel = kNone;
  double probe_r2_splus = kNone;
  double probe_r2_stilde = kNone;
  double probe_r2_ds = kNone;
  double constraint_running = kNone;
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);
/// Throws DomainError on a header that does not match kMetricsColumns.
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

struct Evaluation {
  double sim_kernel = MetricsRow::kNone;
  double probe_r2_splus = MetricsRow::kNone;
  double probe_r2_stilde = MetricsRow::kNone;
  double probe_r2_ds = MetricsRow::kNone;
};

/// Similarity and probes from posterior means over the given episodes.
Evaluation evaluate_representation(const world::WorldModel& model, const ReplayBuffer& replay,
                                   int first_episode, int sim_samples, std::uint64_t seed);

struct TrainResult {
  std::vector<MetricsRow> rows;
  world::WorldModel model;
  Policy policy;
  ValueNet value;
  world::LagrangianState lagrangian;
  ReplayBuffer replay;
  std::vector<double> episode_returns;  // non-seeding episodes
  Evaluation final_eval;
};

/// Called after every row is produced (streaming output).
using RowSink = std::function<void(const MetricsRow&)>;

TrainResult train(const TrainConfig& cfg, const RowSink& sink = {});

/// Mean of the last `count` entries (all of them when fewer). NaN when empty.
double tail_mean(const std::vector<double>& values, std::size_t count);

}  // namespace infoprio::agent
