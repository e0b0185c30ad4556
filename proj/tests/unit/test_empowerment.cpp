#include "infoprio/empowerment.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace infoprio;
using namespace infoprio::empowerment;

TEST(Posterior, HandBayes) {
  const Mat ch{{0.9, 0.1}, {0.2, 0.8}};
  const auto q = ba_update_posterior(Vec::Constant(2, 0.5), ch);
  EXPECT_NEAR(q.q(0, 0), 0.9 / 1.1, 1e-15);
  EXPECT_NEAR(q.q.col(1).sum(), 1.0, 1e-15);
}

TEST(Posterior, UnreachedSuccessorIsUndefined) {
  const Mat ch{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
  const auto q = ba_update_posterior(Vec::Constant(2, 0.5), ch);
  EXPECT_TRUE(q.defined[0]);
  EXPECT_FALSE(q.defined[2]);
}

TEST(PolicyUpdate, CleanChannelGivesUniform) {
  const Mat ch = Mat::Identity(4, 4);
  const auto q = ba_update_posterior(Vec::Constant(4, 0.25), ch);
  const Vec pi = ba_update_policy(q, ch);
  for (int a = 0; a < 4; ++a) EXPECT_NEAR(pi[a], 0.25, 1e-15);
}

TEST(PolicyUpdate, ClosedFormMaximisesSurrogate) {
  const Mat ch{{0.9, 0.1}, {0.2, 0.8}};
  const auto q = ba_update_posterior(Vec{{0.5, 0.5}}, ch);
  const Vec pi = ba_update_policy(q, ch);
  double best = -1e300, arg = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double p = i * 1e-4;
    const double v = ba_surrogate(Vec{{p, 1.0 - p}}, q, ch);
    if (v > best) {
      best = v;
      arg = p;
    }
  }
  EXPECT_NEAR(pi[0], arg, 1e-4);
  EXPECT_GE(ba_surrogate(pi, q, ch), best - 1e-6);
}

TEST(Capacity, BinarySymmetricChannels) {
  for (double p : {0.0, 0.05, 0.1, 0.25, 0.5}) {
    const auto r = channel_capacity(bsc(p));
    EXPECT_NEAR(r.capacity, (1.0 - binary_entropy(p) / std::log(2.0)) * std::log(2.0), 1e-6) << p;
    EXPECT_LE(r.state.iterations, 500);
  }
  EXPECT_NEAR(channel_capacity(bsc(0.0)).capacity, 0.693147, 1e-6);
  EXPECT_NEAR(channel_capacity(bsc(0.5)).capacity, 0.0, 1e-12);
  EXPECT_NEAR(channel_capacity(bsc(0.1)).capacity, 0.368064, 1e-6);
}

TEST(Capacity, MatchesBruteForceGrid) {
  const Mat ch{{0.7, 0.2, 0.1}, {0.1, 0.3, 0.6}};
  double best = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double p = i * 1e-4;
    best = std::max(best, mutual_information(Vec{{p, 1.0 - p}}, ch));
  }
  const auto r = channel_capacity(ch);
  EXPECT_GE(r.capacity, best - 1e-9);
  EXPECT_LE(r.capacity, best + 1e-6);
}

TEST(Capacity, MonotoneAndInvariantToRelabelling) {
  Rng rng(3);
  Mat ch(4, 5);
  for (int a = 0; a < 4; ++a) {
    for (int j = 0; j < 5; ++j) ch(a, j) = rng.gamma(1.0);
    ch.row(a) /= ch.row(a).sum();
  }
  const auto r = channel_capacity(ch);
  for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_GE(r.history[i], r.history[i - 1] - 1e-15);
  Mat perm(4, 5);
  const int rows[] = {2, 0, 3, 1}, cols[] = {4, 1, 0, 3, 2};
  for (int a = 0; a < 4; ++a)
    for (int j = 0; j < 5; ++j) perm(a, j) = ch(rows[a], cols[j]);
  EXPECT_NEAR(channel_capacity(perm).capacity, r.capacity, 1e-10);
}

TEST(Capacity, IdenticalRowsGiveZero) {
  const Mat ch{{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}};
  EXPECT_NEAR(channel_capacity(ch).capacity, 0.0, 1e-15);
}

TEST(Capacity, RejectsInvalidChannel) {
  EXPECT_THROW(channel_capacity(Mat{{0.5, 0.6}}), DomainError);
}

TEST(LowerBound, DeterministicPolicyPerfectInverseIsZero) {
  Mat log_q = Mat::Constant(3, 4, -1e300);
  Mat pol = Mat::Zero(3, 4);
  std::vector<int> actions = {0, 2, 1, 0};
  for (int i = 0; i < 4; ++i) {
    log_q(actions[static_cast<std::size_t>(i)], i) = 0.0;
    pol(actions[static_cast<std::size_t>(i)], i) = 1.0;
  }
  EXPECT_EQ(empowerment_lower_bound(log_q, actions, pol).value, 0.0);
}

TEST(LowerBound, BayesPosteriorRecoversExactMI) {
  const Mat ch{{0.8, 0.15, 0.05}, {0.1, 0.6, 0.3}};
  const Vec pi{{0.4, 0.6}};
  const auto post = ba_update_posterior(pi, ch);
  Rng rng(9);
  const int n = 20000;
  Mat log_q(2, n), pol(2, n);
  std::vector<int> actions(n);
  for (int i = 0; i < n; ++i) {
    const int a = rng.uniform() < pi[0] ? 0 : 1;
    const double u = rng.uniform();
    int z = 0;
    double acc = ch(a, 0);
    while (u >= acc && z < 2) acc += ch(a, ++z);
    actions[static_cast<std::size_t>(i)] = a;
    log_q.col(i) = post.q.col(z).array().log();
    pol.col(i) = pi;
  }
  const auto b = empowerment_lower_bound(log_q, actions, pol);
  EXPECT_NEAR(b.value, mutual_information(pi, ch), 2.0 * b.standard_error);
}
