#pragma once

#include "infoprio/envs.hpp"
#include "infoprio/replay.hpp"
#include "infoprio/rng.hpp"
#include "infoprio/world_model.hpp"

#include <vector>

namespace infoprio::fixtures {

/// Uniform-random-action episode starting from reset(seed).
inline std::vector<TransitionRecord> random_episode(const envs::EnvConfig& cfg, int episode,
                                                    std::uint64_t seed, Rng& act) {
  envs::FactoredEnv env(cfg);
  Vec o = env.reset(seed).observation;
  std::vector<TransitionRecord> out;
  for (int t = 0; t < cfg.horizon; ++t) {
    const int a = act.uniform_int(cfg.num_actions);
    const auto s = env.step(a);
    TransitionRecord r;
    r.o_prev = o;
    r.a_prev = a;
    r.reward = s.reward;
    r.o = s.observation;
    r.episode = episode;
    r.step = t + 1;
    r.state = s.state;
    out.push_back(r);
    o = s.observation;
  }
  return out;
}

inline ReplayBuffer random_replay(const envs::EnvConfig& cfg, int episodes, std::uint64_t seed) {
  ReplayBuffer buf(cfg);
  Rng act(seed);
  for (int e = 0; e < episodes; ++e) buf.add_episode(random_episode(cfg, e, seed * 1000 + e, act));
  return buf;
}

/// Small ring environment and a narrow model for fast checks.
inline envs::EnvConfig tiny_env() {
  envs::EnvConfig cfg = envs::preset("ring");
  cfg.ring_size = 5;
  cfg.distractor_chains = 1;
  cfg.distractor_values = 3;
  cfg.horizon = 12;
  return cfg;
}

inline world::WorldModelConfig tiny_model(const envs::EnvConfig& env) {
  world::WorldModelConfig m;
  m.obs_dim = env.observation_dim();
  m.num_actions = env.num_actions;
  m.latent_dim = 3;
  m.hidden = {6};
  m.critic_dim = 3;
  return m;
}

}  // namespace infoprio::fixtures
