#include "fixtures.hpp"

#include "infoprio/agent.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace infoprio;
using namespace infoprio::agent;

namespace {

struct Parts {
  world::WorldModel model;
  Policy policy;
  ValueNet value;

  explicit Parts(std::uint64_t seed = 1) {
    Rng r(seed);
    model = world::WorldModel::random(fixtures::tiny_model(fixtures::tiny_env()), r);
    policy.net = nn::DenseNet::random({3, 6, 3}, r);
    value = nn::DenseNet::random({3, 6, 1}, r);
  }
};

}  // namespace

TEST(Imagine, HorizonOneAndDeterminism) {
  Parts p;
  const Mat z0 = Mat::Random(3, 4);
  Rng a(5), b(5);
  const auto t1 = imagine(p.model, p.policy, z0, 1, a);
  EXPECT_EQ(t1.horizon(), 1);
  EXPECT_EQ(t1.z.size(), 2u);
  const auto x = imagine(p.model, p.policy, z0, 6, a);
  Rng c(5);
  imagine(p.model, p.policy, z0, 1, c);
  const auto y = imagine(p.model, p.policy, z0, 6, c);
  EXPECT_EQ(x.z.back(), y.z.back());
  EXPECT_EQ(x.actions, y.actions);
  (void)b;
}

TEST(Imagine, ActionFrequenciesMatchPolicy) {
  Parts p;
  const Mat z0 = Mat::Random(3, 1);
  const Mat probs = p.policy.probs(z0);
  Rng r(7);
  const int n = 10000;
  Vec counts = Vec::Zero(3);
  const Mat many = z0.replicate(1, n);
  const auto t = imagine(p.model, p.policy, many, 1, r);
  for (int a : t.actions[0]) counts[a] += 1.0;
  for (int a = 0; a < 3; ++a) {
    const double f = counts[a] / n;
    const double se = std::sqrt(probs(a, 0) * (1 - probs(a, 0)) / n);
    EXPECT_NEAR(f, probs(a, 0), 2.5 * se);
  }
}

TEST(Returns, LambdaOneIsDiscountedMonteCarlo) {
  const Mat r{{1.0}, {0.5}, {-2.0}};
  const Mat v{{9.0}, {9.0}, {9.0}, {4.0}};
  const Mat g = lambda_returns(r, v, 0.9, 1.0);
  EXPECT_NEAR(g(0, 0), 1.0 + 0.9 * 0.5 + 0.81 * -2.0 + 0.729 * 4.0, 1e-14);
  EXPECT_NEAR(g(2, 0), -2.0 + 0.9 * 4.0, 1e-14);
}

TEST(Returns, LambdaZeroIsOneStepBootstrap) {
  const Mat r{{1.0}, {2.0}};
  const Mat v{{0.0}, {3.0}, {5.0}};
  const Mat g = lambda_returns(r, v, 0.5, 0.0);
  EXPECT_NEAR(g(0, 0), 1.0 + 0.5 * 3.0, 1e-15);
  EXPECT_NEAR(g(1, 0), 2.0 + 0.5 * 5.0, 1e-15);
}

TEST(Returns, AugmentationAddsEmpowermentReward) {
  ImaginedTrajectory t;
  t.reward = Mat{{1.0}};
  t.log_q = Mat{{-0.5}};
  t.entropy = Mat{{0.7}};
  const Mat v{{0.0}, {2.0}};
  EXPECT_NEAR(augmented_returns(t, v, 0.9, 0.95, 0.1)(0, 0), 1.0 + 0.1 * 0.2 + 0.9 * 2.0, 1e-15);
  EXPECT_NEAR(augmented_returns(t, v, 0.9, 0.95, 0.0)(0, 0), 1.0 + 0.9 * 2.0, 1e-15);
}

TEST(PolicySurrogate, GradientMatchesFiniteDifferences) {
  Parts p;
  p.policy.temperature = 1.5;
  const Mat z = Mat::Random(3, 7);
  const std::vector<int> a = {0, 2, 1, 1, 0, 2, 2};
  const Vec adv = Vec::Random(7);
  const auto [loss, g] = policy_surrogate(p.policy, z, a, adv, 0.05);
  const auto rep = nn::grad_check(p.policy.net.parameter_blocks(),
                                  [&] { return policy_surrogate(p.policy, z, a, adv, 0.05).first; }, g.blocks());
  EXPECT_LT(rep.max_rel_error, 1e-4);
  (void)loss;
}

TEST(PolicySurrogate, ZeroAdvantageIsPureEntropyGradient) {
  Parts p;
  const Mat z = Mat::Random(3, 5);
  const std::vector<int> a = {0, 1, 2, 1, 0};
  const auto [loss, g] = policy_surrogate(p.policy, z, a, Vec::Zero(5), 0.3);
  EXPECT_NEAR(loss, -0.3 * p.policy.entropy(z).mean(), 1e-15);
  const auto cache = nn::forward_cached(p.policy.net, z);
  const Mat up = -0.3 * nn::softmax_entropy_grad(cache.output) / 5.0;
  const auto ref = nn::backward(p.policy.net, cache, up);
  for (std::size_t l = 0; l < g.weight.size(); ++l) EXPECT_LT((g.weight[l] - ref.weight[l]).norm(), 1e-14);
}

TEST(ValueRegression, ExactFitHasZeroGradient) {
  Parts p;
  const Mat z = Mat::Random(3, 6);
  const Vec targets = nn::forward_batch(p.value, z).row(0).transpose();
  const auto [loss, g] = value_regression(p.value, z, targets);
  EXPECT_EQ(loss, 0.0);
  for (const auto& w : g.weight) EXPECT_EQ(w.norm(), 0.0);
  const Vec shifted = targets.array() + 0.3;
  const auto [l2, g2] = value_regression(p.value, z, shifted);
  const auto rep = nn::grad_check(p.value.parameter_blocks(), [&] { return value_regression(p.value, z, shifted).first; },
                                  g2.blocks());
  EXPECT_LT(rep.max_rel_error, 1e-4);
  (void)l2;
}

TEST(MetricsCsv, RoundTripAndHeaderCheck) {
  std::stringstream ss;
  write_metrics_header(ss);
  MetricsRow r;
  r.step = 12;
  r.episode = 3;
  r.episode_return = 0.1 + 0.2;
  r.lambda = 1.25;
  write_metrics_row(ss, r);
  const auto rows = read_metrics_csv(ss);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].episode_return, 0.1 + 0.2);
  EXPECT_TRUE(std::isnan(rows[0].mi_bound));
  std::string text = ss.str();
  std::stringstream bad("episode,step" + text.substr(text.find('\n')));
  EXPECT_THROW(read_metrics_csv(bad), DomainError);
}

TEST(Train, ZeroStepsRunsSeedEpisodesOnly) {
  TrainConfig cfg;
  cfg.env = fixtures::tiny_env();
  cfg.total_steps = 0;
  cfg.seed_episodes = 2;
  cfg.model.hidden = {8};
  cfg.model.latent_dim = 3;
  cfg.window_length = 4;
  const auto r = train(cfg);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.replay.episodes(), 2);
  EXPECT_TRUE(r.episode_returns.empty());
}

TEST(Train, ShortRunIsDeterministic) {
  TrainConfig cfg;
  cfg.env = fixtures::tiny_env();
  cfg.total_steps = 36;
  cfg.seed_episodes = 1;
  cfg.updates_per_episode = 2;
  cfg.batch_windows = 3;
  cfg.window_length = 4;
  cfg.imagination_horizon = 3;
  cfg.imagination_starts = 4;
  cfg.model.hidden = {8};
  cfg.model.latent_dim = 3;
  cfg.sim_samples = 12;
  cfg.seed = 4;
  auto run = [&] {
    std::stringstream ss;
    write_metrics_header(ss);
    train(cfg, [&](const MetricsRow& row) { write_metrics_row(ss, row); });
    return ss.str();
  };
  const std::string a = run();
  EXPECT_EQ(a, run());
  cfg.seed = 5;
  EXPECT_NE(a, run());
}

TEST(Train, LambdaStaysNonNegative) {
  TrainConfig cfg;
  cfg.env = fixtures::tiny_env();
  cfg.total_steps = 48;
  cfg.seed_episodes = 1;
  cfg.updates_per_episode = 4;
  cfg.batch_windows = 3;
  cfg.window_length = 4;
  cfg.model.hidden = {8};
  cfg.model.latent_dim = 3;
  cfg.dual_lr = 5.0;
  cfg.c0 = -100.0;
  const auto r = train(cfg);
  for (const auto& row : r.rows)
    if (!std::isnan(row.lambda)) EXPECT_GE(row.lambda, 0.0);
}

TEST(TrainConfig, ValidationNamesField) {
  TrainConfig cfg;
  cfg.gamma = 1.5;
  try {
    cfg.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "gamma");
  }
}

TEST(TailMean, UsesLastEntries) {
  EXPECT_EQ(tail_mean({1, 2, 3, 4}, 2), 3.5);
  EXPECT_EQ(tail_mean({1, 2}, 10), 1.5);
  EXPECT_TRUE(std::isnan(tail_mean({}, 3)));
}
