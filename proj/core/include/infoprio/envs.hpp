#pragma once

// Factored distractor MDPs. The simulator state splits into
//   s_plus      controllable factor (agent cell on a ring or grid),
//   s_tilde     exogenous reward-relevant factor (drifting goal cell),
//   ds          action-independent distractor chains,
// and the observation renderer entangles all three.

#include "infoprio/common.hpp"
#include "infoprio/rng.hpp"
#include "infoprio/tabular.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace infoprio::envs {

enum class Topology { kRing, kGrid };
enum class RewardMode { kSparse, kDense };
enum class ObservationMode { kOneHot, kScrambledLinear, kTinyImage };
/// kRandomWalk: each chain is a lazy +-1 walk over `distractor_values` symbols.
/// kAgentBehindAgent: each chain is another agent moving on the same topology
/// (rendered like the real agent), driven only by exogenous randomness.
enum class DistractorMode { kRandomWalk, kAgentBehindAgent };

struct EnvConfig {
  Topology topology = Topology::kRing;
  int ring_size = 8;
  int grid_width = 5;
  int grid_height = 5;
  /// Ring moves: {+1, -1, 0, +2, -2}; grid moves: {+x, -x, +y, -y, stay}.
  /// The first `num_actions` entries form the action set.
  int num_actions = 3;
  double slip_prob = 0.0;        // action replaced by "stay"
  double goal_drift_prob = 0.05;  // goal moves to a random neighbour
  double goal_coupling = 0.0;     // agent pulled one cell toward the goal
  int distractor_chains = 2;
  int distractor_values = 8;
  double distractor_move_prob = 0.8;
  int resample_period = 50;  // all chains resampled every this many steps
  DistractorMode distractor_mode = DistractorMode::kRandomWalk;
  RewardMode reward_mode = RewardMode::kSparse;
  ObservationMode observation_mode = ObservationMode::kOneHot;
  int horizon = 50;
  std::uint64_t seed = 0;  // fixes the scramble matrix

  /// Throws ConfigError naming the field.
  void validate() const;

  int num_cells() const;
  /// Symbols per distractor chain.
  int chain_values() const;
  int observation_dim() const;
};

nlohmann::json to_json(const EnvConfig& cfg);
EnvConfig env_config_from_json(const nlohmann::json& doc);

std::string to_string(Topology t);
std::string to_string(RewardMode m);
std::string to_string(ObservationMode m);
std::string to_string(DistractorMode m);

struct FactoredState {
  int s_plus = 0;
  int s_tilde = 0;
  std::vector<int> ds;
  int step = 0;

  bool operator==(const FactoredState&) const = default;
};

struct Factors {
  int s_plus;
  int s_tilde;
  std::vector<int> ds;
};

inline Factors ground_truth_factors(const FactoredState& s) { return {s.s_plus, s.s_tilde, s.ds}; }

struct StepResult {
  FactoredState state;
  Vec observation;
  double reward = 0.0;
  bool done = false;
};

/// Exogenous randomness consumed by one transition. The number of draws per
/// step never depends on the action, so sharing these values across two
/// actions yields identical s_tilde and ds successors.
struct ExogenousDraws {
  double slip = 0.0;
  double coupling = 0.0;
  double drift = 0.0;
  double drift_direction = 0.0;
  std::vector<double> chain_move;
  std::vector<double> chain_direction;
  std::vector<double> chain_resample;
};

class FactoredEnv {
 public:
  explicit FactoredEnv(EnvConfig cfg);

  const EnvConfig& config() const { return cfg_; }

  /// s_plus uniform, goal uniform, chains uniform, step 0.
  StepResult reset(std::uint64_t seed);
  /// Throws DomainError on an out-of-range action.
  StepResult step(int action);

  const FactoredState& state() const { return state_; }
  int observation_dim() const { return cfg_.observation_dim(); }

  Vec observe(const FactoredState& s) const;
  /// Deterministic in (s_plus, s_tilde).
  double reward(const FactoredState& s) const;

  /// Pure transition given explicit exogenous draws.
  FactoredState transition(const FactoredState& s, int action, const ExogenousDraws& draws) const;
  ExogenousDraws draw_exogenous();

  /// Cell reached by `action` from `cell`, ignoring slip and coupling.
  int move(int cell, int action) const;
  /// Ring: shortest arc length. Grid: Manhattan distance.
  int distance(int a, int b) const;
  int max_distance() const;
  /// Embedding of a cell used for geometric ground truth: ring -> (cos, sin), grid -> (x, y).
  Vec cell_coordinates(int cell) const;
  std::vector<int> neighbours(int cell) const;
  /// One step along a shortest path toward `to` (coupling pull).
  int neighbour_toward(int from, int to) const;

 private:

  EnvConfig cfg_;
  Mat scramble_;
  FactoredState state_;
  Rng agent_rng_{0};
  Rng goal_rng_{0};
  Rng distractor_rng_{0};
};

/// Geometric ground-truth vector used by the behavioural-similarity metric:
/// coordinates of s_plus and s_tilde (distractors excluded).
Vec task_state_vector(const FactoredEnv& env, const FactoredState& s);

/// One-hot targets of each factor group, used by linear probes.
Vec one_hot_s_plus(const EnvConfig& cfg, const FactoredState& s);
Vec one_hot_s_tilde(const EnvConfig& cfg, const FactoredState& s);
Vec one_hot_ds(const EnvConfig& cfg, const FactoredState& s);

/// Exact tabular export. The joint state is (s_plus, s_tilde, ds, phase) with
/// phase = step mod resample_period when distractors are present. Episodes
/// are treated as continuing (no horizon). Throws DomainError when the joint
/// state space exceeds `cap`.
TabularMDP as_tabular(const EnvConfig& cfg, double gamma, int cap = 4096);

/// Joint index used by as_tabular.
int tabular_index(const EnvConfig& cfg, const FactoredState& s);
FactoredState tabular_state(const EnvConfig& cfg, int index);
int tabular_state_count(const EnvConfig& cfg);

/// Action -> next-s_plus channel of each agent cell, integrating slip (and
/// coupling when the goal position is given). Rows: actions.
Mat s_plus_channel(const FactoredEnv& env, int s_plus, int goal = -1);

/// Named presets: "ring" (default distractor ring), "grid", "ring-abab"
/// (agent-behind-agent), "ring-scrambled", "grid-image".
EnvConfig preset(const std::string& name);

}  // namespace infoprio::envs
