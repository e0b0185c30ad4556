#pragma once

// Episode storage, window sampling and newline-delimited JSON persistence.

#include "infoprio/common.hpp"
#include "infoprio/envs.hpp"
#include "infoprio/rng.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace infoprio {

inline constexpr const char* kReplayFormat = "infoprio.replay.v1";

/// One environment transition. `state` is the ground truth at time `step`;
/// it is kept for diagnostics and never read by the learner.
struct TransitionRecord {
  Vec o_prev;
  int a_prev = 0;
  double reward = 0.0;
  Vec o;
  int episode = 0;
  int step = 0;  // index of o (the first record of an episode has step 1)
  envs::FactoredState state;
};

using Window = std::vector<TransitionRecord>;

/// Throws DomainError if steps are not contiguous within one episode.
void check_window(const Window& w);

class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  explicit ReplayBuffer(envs::EnvConfig env) : env_(std::move(env)) {}

  const envs::EnvConfig& env_config() const { return env_; }

  /// Records of one episode, in step order. Throws on a broken sequence.
  void add_episode(std::vector<TransitionRecord> records);

  int episodes() const { return static_cast<int>(episodes_.size()); }
  const std::vector<TransitionRecord>& episode(int i) const { return episodes_.at(i); }
  std::size_t total_steps() const;

  /// `count` windows of `length` consecutive records from episodes long
  /// enough to hold them, episode and offset uniform.
  std::vector<Window> sample_windows(int count, int length, Rng& rng) const;

  /// Clears every record's ground-truth field.
  void scrub_ground_truth();

  void save(std::ostream& out) const;
  static ReplayBuffer load(std::istream& in);

 private:
  envs::EnvConfig env_;
  std::vector<std::vector<TransitionRecord>> episodes_;
};

}  // namespace infoprio
