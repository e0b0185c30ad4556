#include "infoprio/envs.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace infoprio::envs {
namespace {

constexpr int kRingMoves[5] = {+1, -1, 0, +2, -2};
constexpr int kGridDx[5] = {+1, -1, 0, 0, 0};
constexpr int kGridDy[5] = {0, 0, +1, -1, 0};

int ipow(int base, int exp) {
  long long r = 1;
  for (int i = 0; i < exp; ++i) {
    r *= base;
    if (r > (1LL << 30)) return 1 << 30;
  }
  return static_cast<int>(r);
}

template <typename E>
E parse_enum(const std::string& field, const std::string& value,
             std::initializer_list<std::pair<const char*, E>> options) {
  for (const auto& [name, e] : options)
    if (value == name) return e;
  throw ConfigError(field, "unknown value '" + value + "'");
}

}  // namespace

std::string to_string(Topology t) { return t == Topology::kRing ? "ring" : "grid"; }
std::string to_string(RewardMode m) { return m == RewardMode::kSparse ? "sparse" : "dense"; }
std::string to_string(ObservationMode m) {
  switch (m) {
    case ObservationMode::kOneHot: return "factored-one-hot";
    case ObservationMode::kScrambledLinear: return "scrambled-linear";
    case ObservationMode::kTinyImage: return "tiny-image";
  }
  return "?";
}
std::string to_string(DistractorMode m) {
  return m == DistractorMode::kRandomWalk ? "random-walk" : "agent-behind-agent";
}

void EnvConfig::validate() const {
  if (topology == Topology::kRing && ring_size < 3) throw ConfigError("ring_size", "must be >= 3");
  if (topology == Topology::kGrid && (grid_width < 2 || grid_height < 2)) {
    throw ConfigError(grid_width < 2 ? "grid_width" : "grid_height", "must be >= 2");
  }
  if (num_actions < 2 || num_actions > 5) throw ConfigError("num_actions", "must lie in [2, 5]");
  auto prob = [](const char* field, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(field, "must be a probability in [0, 1]");
  };
  prob("slip_prob", slip_prob);
  prob("goal_drift_prob", goal_drift_prob);
  prob("goal_coupling", goal_coupling);
  prob("distractor_move_prob", distractor_move_prob);
  if (distractor_chains < 0) throw ConfigError("distractor_chains", "must be >= 0");
  if (distractor_chains > 0 && distractor_mode == DistractorMode::kRandomWalk &&
      distractor_values < 2) {
    throw ConfigError("distractor_values", "must be >= 2");
  }
  if (resample_period < 1) throw ConfigError("resample_period", "must be >= 1");
  if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
}

int EnvConfig::num_cells() const {
  return topology == Topology::kRing ? ring_size : grid_width * grid_height;
}

int EnvConfig::chain_values() const {
  return distractor_mode == DistractorMode::kAgentBehindAgent ? num_cells() : distractor_values;
}

int EnvConfig::observation_dim() const {
  const int c = num_cells();
  if (observation_mode == ObservationMode::kTinyImage) return c;
  return 2 * c + distractor_chains * chain_values();
}

nlohmann::json to_json(const EnvConfig& cfg) {
  return {{"topology", to_string(cfg.topology)},
          {"ring_size", cfg.ring_size},
          {"grid_width", cfg.grid_width},
          {"grid_height", cfg.grid_height},
          {"num_actions", cfg.num_actions},
          {"slip_prob", cfg.slip_prob},
          {"goal_drift_prob", cfg.goal_drift_prob},
          {"goal_coupling", cfg.goal_coupling},
          {"distractor_chains", cfg.distractor_chains},
          {"distractor_values", cfg.distractor_values},
          {"distractor_move_prob", cfg.distractor_move_prob},
          {"resample_period", cfg.resample_period},
          {"distractor_mode", to_string(cfg.distractor_mode)},
          {"reward_mode", to_string(cfg.reward_mode)},
          {"observation_mode", to_string(cfg.observation_mode)},
          {"horizon", cfg.horizon},
          {"seed", cfg.seed}};
}

EnvConfig env_config_from_json(const nlohmann::json& doc) {
  EnvConfig cfg;
  if (!doc.is_object()) throw ConfigError("env", "must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "topology") {
        cfg.topology = parse_enum<Topology>(
            key, value.get<std::string>(), {{"ring", Topology::kRing}, {"grid", Topology::kGrid}});
      } else if (key == "ring_size") {
        cfg.ring_size = value.get<int>();
      } else if (key == "grid_width") {
        cfg.grid_width = value.get<int>();
      } else if (key == "grid_height") {
        cfg.grid_height = value.get<int>();
      } else if (key == "num_actions") {
        cfg.num_actions = value.get<int>();
      } else if (key == "slip_prob") {
        cfg.slip_prob = value.get<double>();
      } else if (key == "goal_drift_prob") {
        cfg.goal_drift_prob = value.get<double>();
      } else if (key == "goal_coupling") {
        cfg.goal_coupling = value.get<double>();
      } else if (key == "distractor_chains") {
        cfg.distractor_chains = value.get<int>();
      } else if (key == "distractor_values") {
        cfg.distractor_values = value.get<int>();
      } else if (key == "distractor_move_prob") {
        cfg.distractor_move_prob = value.get<double>();
      } else if (key == "resample_period") {
        cfg.resample_period = value.get<int>();
      } else if (key == "distractor_mode") {
        cfg.distractor_mode = parse_enum<DistractorMode>(
            key, value.get<std::string>(),
            {{"random-walk", DistractorMode::kRandomWalk},
             {"agent-behind-agent", DistractorMode::kAgentBehindAgent}});
      } else if (key == "reward_mode") {
        cfg.reward_mode = parse_enum<RewardMode>(
            key, value.get<std::string>(),
            {{"sparse", RewardMode::kSparse}, {"dense", RewardMode::kDense}});
      } else if (key == "observation_mode") {
        cfg.observation_mode = parse_enum<ObservationMode>(
            key, value.get<std::string>(),
            {{"factored-one-hot", ObservationMode::kOneHot},
             {"scrambled-linear", ObservationMode::kScrambledLinear},
             {"tiny-image", ObservationMode::kTinyImage}});
      } else if (key == "horizon") {
        cfg.horizon = value.get<int>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else {
        throw ConfigError("env." + key, "unknown field");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("env." + key, e.what());
    }
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------

FactoredEnv::FactoredEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.observation_mode == ObservationMode::kScrambledLinear) {
    const int n = cfg_.observation_dim();
    Rng rng = Rng::stream(cfg_.seed, "scramble");
    Mat g(n, n);
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r) g(r, c) = rng.normal();
    Eigen::HouseholderQR<Mat> qr(g);
    scramble_ = qr.householderQ() * Mat::Identity(n, n);
  }
}

int FactoredEnv::move(int cell, int action) const {
  if (cfg_.topology == Topology::kRing) {
    const int n = cfg_.ring_size;
    return ((cell + kRingMoves[action]) % n + n) % n;
  }
  const int x = cell % cfg_.grid_width;
  const int y = cell / cfg_.grid_width;
  const int nx = x + kGridDx[action];
  const int ny = y + kGridDy[action];
  if (nx < 0 || nx >= cfg_.grid_width || ny < 0 || ny >= cfg_.grid_height) return cell;
  return ny * cfg_.grid_width + nx;
}

int FactoredEnv::distance(int a, int b) const {
  if (cfg_.topology == Topology::kRing) {
    const int d = std::abs(a - b);
    return std::min(d, cfg_.ring_size - d);
  }
  return std::abs(a % cfg_.grid_width - b % cfg_.grid_width) +
         std::abs(a / cfg_.grid_width - b / cfg_.grid_width);
}

int FactoredEnv::max_distance() const {
  if (cfg_.topology == Topology::kRing) return cfg_.ring_size / 2;
  return cfg_.grid_width + cfg_.grid_height - 2;
}

Vec FactoredEnv::cell_coordinates(int cell) const {
  Vec v(2);
  if (cfg_.topology == Topology::kRing) {
    const double theta = 2.0 * std::numbers::pi * cell / cfg_.ring_size;
    v << std::cos(theta), std::sin(theta);
  } else {
    v << cell % cfg_.grid_width, cell / cfg_.grid_width;
  }
  return v;
}

std::vector<int> FactoredEnv::neighbours(int cell) const {
  std::vector<int> out;
  if (cfg_.topology == Topology::kRing) {
    out = {move(cell, 0), move(cell, 1)};
    return out;
  }
  for (int a = 0; a < 4; ++a) {
    const int n = move(cell, a);
    if (n != cell) out.push_back(n);
  }
  return out;
}

int FactoredEnv::neighbour_toward(int from, int to) const {
  if (from == to) return from;
  if (cfg_.topology == Topology::kRing) {
    const int n = cfg_.ring_size;
    const int forward = ((to - from) % n + n) % n;
    return forward <= n - forward ? move(from, 0) : move(from, 1);
  }
  const int fx = from % cfg_.grid_width;
  const int tx = to % cfg_.grid_width;
  if (fx != tx) return move(from, tx > fx ? 0 : 1);
  return move(from, to / cfg_.grid_width > from / cfg_.grid_width ? 2 : 3);
}

ExogenousDraws FactoredEnv::draw_exogenous() {
  ExogenousDraws d;
  d.slip = agent_rng_.uniform();
  d.coupling = agent_rng_.uniform();
  d.drift = goal_rng_.uniform();
  d.drift_direction = goal_rng_.uniform();
  const auto k = static_cast<std::size_t>(cfg_.distractor_chains);
  d.chain_move.resize(k);
  d.chain_direction.resize(k);
  d.chain_resample.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    d.chain_move[i] = distractor_rng_.uniform();
    d.chain_direction[i] = distractor_rng_.uniform();
    d.chain_resample[i] = distractor_rng_.uniform();
  }
  return d;
}

FactoredState FactoredEnv::transition(const FactoredState& s, int action,
                                      const ExogenousDraws& draws) const {
  if (action < 0 || action >= cfg_.num_actions) {
    throw DomainError("action " + std::to_string(action) + " outside action set of size " +
                      std::to_string(cfg_.num_actions));
  }
  FactoredState next = s;
  next.step = s.step + 1;

  int agent = draws.slip < cfg_.slip_prob ? s.s_plus : move(s.s_plus, action);
  if (draws.coupling < cfg_.goal_coupling) agent = neighbour_toward(agent, s.s_tilde);
  next.s_plus = agent;

  if (draws.drift < cfg_.goal_drift_prob) {
    const auto nb = neighbours(s.s_tilde);
    const auto idx = std::min(nb.size() - 1, static_cast<std::size_t>(draws.drift_direction *
                                                                      static_cast<double>(nb.size())));
    next.s_tilde = nb[idx];
  }

  const int values = cfg_.chain_values();
  const bool resample = next.step % cfg_.resample_period == 0;
  for (std::size_t i = 0; i < next.ds.size(); ++i) {
    if (resample) {
      next.ds[i] = std::min(values - 1, static_cast<int>(draws.chain_resample[i] * values));
    } else if (draws.chain_move[i] < cfg_.distractor_move_prob) {
      if (cfg_.distractor_mode == DistractorMode::kRandomWalk) {
        const int delta = draws.chain_direction[i] < 0.5 ? 1 : -1;
        next.ds[i] = ((s.ds[i] + delta) % values + values) % values;
      } else {
        const int a = std::min(cfg_.num_actions - 1,
                               static_cast<int>(draws.chain_direction[i] * cfg_.num_actions));
        next.ds[i] = move(s.ds[i], a);
      }
    }
  }
  return next;
}

StepResult FactoredEnv::reset(std::uint64_t seed) {
  Rng init = Rng::stream(seed, "env-reset");
  agent_rng_ = Rng::stream(seed, "env-agent");
  goal_rng_ = Rng::stream(seed, "env-goal");
  distractor_rng_ = Rng::stream(seed, "env-distractor");
  state_ = FactoredState{};
  state_.s_plus = init.uniform_int(cfg_.num_cells());
  state_.s_tilde = init.uniform_int(cfg_.num_cells());
  state_.ds.resize(static_cast<std::size_t>(cfg_.distractor_chains));
  for (auto& v : state_.ds) v = init.uniform_int(cfg_.chain_values());
  state_.step = 0;
  return {state_, observe(state_), 0.0, false};
}

StepResult FactoredEnv::step(int action) {
  const auto draws = draw_exogenous();
  state_ = transition(state_, action, draws);
  return {state_, observe(state_), reward(state_), state_.step >= cfg_.horizon};
}

double FactoredEnv::reward(const FactoredState& s) const {
  if (cfg_.reward_mode == RewardMode::kSparse) return s.s_plus == s.s_tilde ? 1.0 : 0.0;
  return -static_cast<double>(distance(s.s_plus, s.s_tilde)) / max_distance();
}

Vec FactoredEnv::observe(const FactoredState& s) const {
  const int c = cfg_.num_cells();
  if (cfg_.observation_mode == ObservationMode::kTinyImage) {
    Vec img = Vec::Zero(c);
    const bool abab = cfg_.distractor_mode == DistractorMode::kAgentBehindAgent;
    for (int v : s.ds) img[v % c] += abab ? 1.0 : 0.25;
    img[s.s_plus] += 1.0;
    img[s.s_tilde] += 0.5;
    return img;
  }
  Vec o = Vec::Zero(cfg_.observation_dim());
  o[s.s_plus] = 1.0;
  o[c + s.s_tilde] = 1.0;
  const int values = cfg_.chain_values();
  for (std::size_t i = 0; i < s.ds.size(); ++i) {
    o[2 * c + static_cast<int>(i) * values + s.ds[i]] = 1.0;
  }
  if (cfg_.observation_mode == ObservationMode::kScrambledLinear) return scramble_ * o;
  return o;
}

Vec task_state_vector(const FactoredEnv& env, const FactoredState& s) {
  Vec v(4);
  v << env.cell_coordinates(s.s_plus), env.cell_coordinates(s.s_tilde);
  return v;
}

Vec one_hot_s_plus(const EnvConfig& cfg, const FactoredState& s) {
  Vec v = Vec::Zero(cfg.num_cells());
  v[s.s_plus] = 1.0;
  return v;
}

Vec one_hot_s_tilde(const EnvConfig& cfg, const FactoredState& s) {
  Vec v = Vec::Zero(cfg.num_cells());
  v[s.s_tilde] = 1.0;
  return v;
}

Vec one_hot_ds(const EnvConfig& cfg, const FactoredState& s) {
  const int values = cfg.chain_values();
  Vec v = Vec::Zero(cfg.distractor_chains * values);
  for (std::size_t i = 0; i < s.ds.size(); ++i) v[static_cast<int>(i) * values + s.ds[i]] = 1.0;
  return v;
}

// ---------------------------------------------------------------------------

namespace {

int phase_count(const EnvConfig& cfg) {
  return cfg.distractor_chains > 0 ? cfg.resample_period : 1;
}

}  // namespace

int tabular_state_count(const EnvConfig& cfg) {
  const long long c = cfg.num_cells();
  const long long total = c * c * ipow(cfg.chain_values(), cfg.distractor_chains) *
                          static_cast<long long>(phase_count(cfg));
  return static_cast<int>(std::min<long long>(total, 1LL << 30));
}

int tabular_index(const EnvConfig& cfg, const FactoredState& s) {
  const int c = cfg.num_cells();
  const int values = cfg.chain_values();
  int ds_index = 0;
  for (int v : s.ds) ds_index = ds_index * values + v;
  const int phases = phase_count(cfg);
  const int phase = s.step % phases;
  return ((s.s_plus * c + s.s_tilde) * ipow(values, cfg.distractor_chains) + ds_index) * phases +
         phase;
}

FactoredState tabular_state(const EnvConfig& cfg, int index) {
  const int c = cfg.num_cells();
  const int values = cfg.chain_values();
  const int phases = phase_count(cfg);
  FactoredState s;
  s.step = index % phases;
  index /= phases;
  const int ds_count = ipow(values, cfg.distractor_chains);
  int ds_index = index % ds_count;
  index /= ds_count;
  s.s_tilde = index % c;
  s.s_plus = index / c;
  s.ds.assign(static_cast<std::size_t>(cfg.distractor_chains), 0);
  for (int i = cfg.distractor_chains; i-- > 0;) {
    s.ds[static_cast<std::size_t>(i)] = ds_index % values;
    ds_index /= values;
  }
  return s;
}

namespace {

using Dist = std::vector<std::pair<int, double>>;

void add_mass(Dist& d, int value, double p) {
  if (p == 0.0) return;
  for (auto& [v, q] : d) {
    if (v == value) {
      q += p;
      return;
    }
  }
  d.emplace_back(value, p);
}

Dist agent_distribution(const FactoredEnv& env, int agent, int goal, int action) {
  const auto& cfg = env.config();
  Dist before;
  add_mass(before, env.move(agent, action), 1.0 - cfg.slip_prob);
  add_mass(before, agent, cfg.slip_prob);
  if (cfg.goal_coupling == 0.0) return before;
  Dist after;
  for (const auto& [cell, p] : before) {
    add_mass(after, cell, p * (1.0 - cfg.goal_coupling));
    add_mass(after, env.neighbour_toward(cell, goal), p * cfg.goal_coupling);
  }
  return after;
}

Dist goal_distribution(const FactoredEnv& env, int goal) {
  const auto& cfg = env.config();
  Dist d;
  add_mass(d, goal, 1.0 - cfg.goal_drift_prob);
  const auto nb = env.neighbours(goal);
  for (int n : nb) add_mass(d, n, cfg.goal_drift_prob / static_cast<double>(nb.size()));
  return d;
}

Dist chain_distribution(const FactoredEnv& env, int value, bool resample) {
  const auto& cfg = env.config();
  const int values = cfg.chain_values();
  Dist d;
  if (resample) {
    for (int v = 0; v < values; ++v) add_mass(d, v, 1.0 / values);
    return d;
  }
  add_mass(d, value, 1.0 - cfg.distractor_move_prob);
  if (cfg.distractor_mode == DistractorMode::kRandomWalk) {
    add_mass(d, ((value + 1) % values + values) % values, 0.5 * cfg.distractor_move_prob);
    add_mass(d, ((value - 1) % values + values) % values, 0.5 * cfg.distractor_move_prob);
  } else {
    for (int a = 0; a < cfg.num_actions; ++a) {
      add_mass(d, env.move(value, a), cfg.distractor_move_prob / cfg.num_actions);
    }
  }
  return d;
}

}  // namespace

TabularMDP as_tabular(const EnvConfig& cfg, double gamma, int cap) {
  cfg.validate();
  const int n = tabular_state_count(cfg);
  if (n > cap) {
    throw DomainError("joint state space has " + std::to_string(n) + " states, above the cap of " +
                      std::to_string(cap));
  }
  FactoredEnv env(cfg);
  TabularMDP mdp;
  mdp.states = n;
  mdp.actions = cfg.num_actions;
  mdp.gamma = gamma;
  mdp.transition.assign(static_cast<std::size_t>(cfg.num_actions), Mat::Zero(n, n));
  mdp.reward = Mat::Zero(n, cfg.num_actions);
  const int phases = phase_count(cfg);

  for (int idx = 0; idx < n; ++idx) {
    const FactoredState s = tabular_state(cfg, idx);
    const int next_phase = (s.step + 1) % phases;
    const bool resample = cfg.distractor_chains > 0 && (s.step + 1) % cfg.resample_period == 0;
    // Distribution over the distractor block (product over chains).
    std::vector<std::pair<std::vector<int>, double>> ds_dist = {{{}, 1.0}};
    for (int v : s.ds) {
      std::vector<std::pair<std::vector<int>, double>> grown;
      for (const auto& [prefix, p] : ds_dist) {
        for (const auto& [nv, q] : chain_distribution(env, v, resample)) {
          auto ext = prefix;
          ext.push_back(nv);
          grown.emplace_back(std::move(ext), p * q);
        }
      }
      ds_dist = std::move(grown);
    }
    const Dist goals = goal_distribution(env, s.s_tilde);
    for (int a = 0; a < cfg.num_actions; ++a) {
      const Dist agents = agent_distribution(env, s.s_plus, s.s_tilde, a);
      double expected_reward = 0.0;
      for (const auto& [ag, pa] : agents) {
        for (const auto& [gl, pg] : goals) {
          FactoredState t;
          t.s_plus = ag;
          t.s_tilde = gl;
          expected_reward += pa * pg * env.reward(t);
          for (const auto& [ds, pd] : ds_dist) {
            t.ds = ds;
            t.step = next_phase;
            mdp.transition[static_cast<std::size_t>(a)](idx, tabular_index(cfg, t)) += pa * pg * pd;
          }
        }
      }
      mdp.reward(idx, a) = expected_reward;
    }
  }
  return mdp;
}

Mat s_plus_channel(const FactoredEnv& env, int s_plus, int goal) {
  const auto& cfg = env.config();
  const int c = cfg.num_cells();
  Mat ch = Mat::Zero(cfg.num_actions, c);
  for (int a = 0; a < cfg.num_actions; ++a) {
    auto local = cfg;
    if (goal < 0) local.goal_coupling = 0.0;
    FactoredEnv e(local);
    for (const auto& [cell, p] : agent_distribution(e, s_plus, std::max(goal, 0), a)) {
      ch(a, cell) += p;
    }
  }
  return ch;
}

EnvConfig preset(const std::string& name) {
  EnvConfig cfg;
  if (name == "ring") return cfg;
  if (name == "ring-abab") {
    cfg.distractor_mode = DistractorMode::kAgentBehindAgent;
    return cfg;
  }
  if (name == "ring-scrambled") {
    cfg.observation_mode = ObservationMode::kScrambledLinear;
    return cfg;
  }
  if (name == "grid") {
    cfg.topology = Topology::kGrid;
    cfg.num_actions = 5;
    return cfg;
  }
  if (name == "grid-image") {
    cfg.topology = Topology::kGrid;
    cfg.num_actions = 5;
    cfg.observation_mode = ObservationMode::kTinyImage;
    return cfg;
  }
  throw ConfigError("env_preset", "unknown preset '" + name + "'");
}

}  // namespace infoprio::envs
