#include "infoprio/replay.hpp"

#include <nlohmann/json.hpp>

#include <istream>
#include <ostream>

namespace infoprio {
namespace {

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void check_window(const Window& w) {
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (w[i].episode != w[0].episode || w[i].step != w[i - 1].step + 1) {
      throw DomainError("window is not contiguous at position " + std::to_string(i));
    }
  }
}

void ReplayBuffer::add_episode(std::vector<TransitionRecord> records) {
  if (records.empty()) throw DomainError("empty episode");
  check_window(records);
  if (records.front().step != 1) throw DomainError("episode must start at step 1");
  episodes_.push_back(std::move(records));
}

std::size_t ReplayBuffer::total_steps() const {
  std::size_t n = 0;
  for (const auto& e : episodes_) n += e.size();
  return n;
}

std::vector<Window> ReplayBuffer::sample_windows(int count, int length, Rng& rng) const {
  std::vector<int> eligible;
  for (int i = 0; i < episodes(); ++i) {
    if (static_cast<int>(episodes_[i].size()) >= length) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw DomainError("no episode holds a window of length " + std::to_string(length));
  }
  std::vector<Window> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int b = 0; b < count; ++b) {
    const auto& ep = episodes_[eligible[rng.uniform_int(static_cast<int>(eligible.size()))]];
    const int start = rng.uniform_int(static_cast<int>(ep.size()) - length + 1);
    out.emplace_back(ep.begin() + start, ep.begin() + start + length);
  }
  return out;
}

void ReplayBuffer::scrub_ground_truth() {
  for (auto& e : episodes_)
    for (auto& r : e) r.state = envs::FactoredState{};
}

void ReplayBuffer::save(std::ostream& out) const {
  out << nlohmann::json{{"format", kReplayFormat}, {"env", envs::to_json(env_)}}.dump() << '\n';
  for (const auto& e : episodes_) {
    for (const auto& r : e) {
      nlohmann::json j{{"episode", r.episode},
                       {"step", r.step},
                       {"a_prev", r.a_prev},
                       {"reward", r.reward},
                       {"o_prev", vec_json(r.o_prev)},
                       {"o", vec_json(r.o)},
                       {"state",
                        {{"s_plus", r.state.s_plus},
                         {"s_tilde", r.state.s_tilde},
                         {"ds", r.state.ds},
                         {"step", r.state.step}}}};
      out << j.dump() << '\n';
    }
  }
}

ReplayBuffer ReplayBuffer::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("replay stream is empty");
  const auto header = nlohmann::json::parse(line);
  if (header.value("format", "") != kReplayFormat) {
    throw DomainError("unsupported replay format '" + header.value("format", "") + "'");
  }
  ReplayBuffer buf(envs::env_config_from_json(header.at("env")));
  std::vector<TransitionRecord> current;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    TransitionRecord r;
    r.episode = j.at("episode").get<int>();
    r.step = j.at("step").get<int>();
    r.a_prev = j.at("a_prev").get<int>();
    r.reward = j.at("reward").get<double>();
    r.o_prev = json_vec(j.at("o_prev"));
    r.o = json_vec(j.at("o"));
    const auto& s = j.at("state");
    r.state.s_plus = s.at("s_plus").get<int>();
    r.state.s_tilde = s.at("s_tilde").get<int>();
    r.state.ds = s.at("ds").get<std::vector<int>>();
    r.state.step = s.at("step").get<int>();
    if (!current.empty() && current.back().episode != r.episode) {
      buf.add_episode(std::move(current));
      current.clear();
    }
    current.push_back(std::move(r));
  }
  if (!current.empty()) buf.add_episode(std::move(current));
  return buf;
}

}  // namespace infoprio
