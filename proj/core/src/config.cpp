#include "infoprio/config.hpp"

#include <cstdio>
#include <functional>
#include <map>

namespace infoprio::config {

using nlohmann::json;

json to_json(const agent::TrainConfig& c) {
  return {
      {"env", envs::to_json(c.env)},
      {"model",
       {{"latent_dim", c.model.latent_dim},
        {"hidden", c.model.hidden},
        {"critic_dim", c.model.critic_dim},
        {"encoder_uses_action", c.model.encoder_uses_action},
        {"logvar_min", c.model.logvar_min},
        {"logvar_max", c.model.logvar_max}}},
      {"loss",
       {{"mi_mode", world::to_string(c.loss.mi_mode)},
        {"negatives", mi::to_string(c.loss.negatives)},
        {"representation", world::to_string(c.loss.representation)},
        {"use_mi", c.loss.use_mi},
        {"use_forward", c.loss.use_forward},
        {"use_empowerment", c.loss.use_empowerment},
        {"use_reward", c.loss.use_reward},
        {"kl_balance", c.loss.kl_balance},
        {"free_nats", c.loss.free_nats}}},
      {"total_steps", c.total_steps},
      {"seed_episodes", c.seed_episodes},
      {"updates_per_episode", c.updates_per_episode},
      {"batch_windows", c.batch_windows},
      {"window_length", c.window_length},
      {"imagination_horizon", c.imagination_horizon},
      {"imagination_starts", c.imagination_starts},
      {"gamma", c.gamma},
      {"lambda_return", c.lambda_return},
      {"beta_emp", c.beta_emp},
      {"entropy_weight", c.behaviour.entropy_weight},
      {"value_weight", c.behaviour.value_weight},
      {"behaviour_grad_clip", c.behaviour.grad_clip},
      {"lr_model", c.lr_model},
      {"lr_actor", c.lr_actor},
      {"lr_value", c.lr_value},
      {"model_grad_clip", c.model_grad_clip},
      {"policy_temperature", c.policy_temperature},
      {"lambda_init", c.lambda_init},
      {"c0", c.c0},
      {"dual_lr", c.dual_lr},
      {"dual_running_rate", c.dual_running_rate},
      {"dual_updates", c.dual_updates},
      {"emp_in_policy", c.emp_in_policy},
      {"zero_rewards", c.zero_rewards},
      {"eval_every", c.eval_every},
      {"eval_episodes", c.eval_episodes},
      {"sim_samples", c.sim_samples},
      {"record_wallclock", c.record_wallclock},
      {"seed", c.seed},
  };
}

namespace {

template <typename T>
std::function<void(const json&)> setter(T& target) {
  return [&target](const json& v) { target = v.get<T>(); };
}

void apply_fields(const json& doc, const std::string& prefix,
                  const std::map<std::string, std::function<void(const json&)>>& fields) {
  if (!doc.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "must be an object");
  for (const auto& [key, value] : doc.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError(name, "unknown field");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ConfigError(name, e.what());
    }
  }
}

}  // namespace

agent::TrainConfig train_config_from_json(const json& doc) {
  agent::TrainConfig c;
  std::string mi_mode, negatives, representation;
  const std::map<std::string, std::function<void(const json&)>> model_fields = {
      {"latent_dim", setter(c.model.latent_dim)},
      {"hidden", setter(c.model.hidden)},
      {"critic_dim", setter(c.model.critic_dim)},
      {"encoder_uses_action", setter(c.model.encoder_uses_action)},
      {"logvar_min", setter(c.model.logvar_min)},
      {"logvar_max", setter(c.model.logvar_max)},
  };
  const std::map<std::string, std::function<void(const json&)>> loss_fields = {
      {"mi_mode",
       [&](const json& v) {
         const auto s = v.get<std::string>();
         if (s == "nce") c.loss.mi_mode = world::MIMode::kNce;
         else if (s == "nwj") c.loss.mi_mode = world::MIMode::kNwj;
         else throw ConfigError("loss.mi_mode", "unknown value '" + s + "'");
       }},
      {"negatives", [&](const json& v) { c.loss.negatives = mi::negative_scheme_from_string(v.get<std::string>()); }},
      {"representation",
       [&](const json& v) {
         const auto s = v.get<std::string>();
         if (s == "contrastive") c.loss.representation = world::Representation::kContrastive;
         else if (s == "reconstruction") c.loss.representation = world::Representation::kReconstruction;
         else throw ConfigError("loss.representation", "unknown value '" + s + "'");
       }},
      {"use_mi", setter(c.loss.use_mi)},
      {"use_forward", setter(c.loss.use_forward)},
      {"use_empowerment", setter(c.loss.use_empowerment)},
      {"use_reward", setter(c.loss.use_reward)},
      {"kl_balance", setter(c.loss.kl_balance)},
      {"free_nats", setter(c.loss.free_nats)},
  };
  const std::map<std::string, std::function<void(const json&)>> fields = {
      {"env", [&](const json& v) { c.env = envs::env_config_from_json(v); }},
      {"model", [&](const json& v) { apply_fields(v, "model", model_fields); }},
      {"loss", [&](const json& v) { apply_fields(v, "loss", loss_fields); }},
      {"total_steps", setter(c.total_steps)},
      {"seed_episodes", setter(c.seed_episodes)},
      {"updates_per_episode", setter(c.updates_per_episode)},
      {"batch_windows", setter(c.batch_windows)},
      {"window_length", setter(c.window_length)},
      {"imagination_horizon", setter(c.imagination_horizon)},
      {"imagination_starts", setter(c.imagination_starts)},
      {"gamma", setter(c.gamma)},
      {"lambda_return", setter(c.lambda_return)},
      {"beta_emp", setter(c.beta_emp)},
      {"entropy_weight", setter(c.behaviour.entropy_weight)},
      {"value_weight", setter(c.behaviour.value_weight)},
      {"behaviour_grad_clip", setter(c.behaviour.grad_clip)},
      {"lr_model", setter(c.lr_model)},
      {"lr_actor", setter(c.lr_actor)},
      {"lr_value", setter(c.lr_value)},
      {"model_grad_clip", setter(c.model_grad_clip)},
      {"policy_temperature", setter(c.policy_temperature)},
      {"lambda_init", setter(c.lambda_init)},
      {"c0", setter(c.c0)},
      {"dual_lr", setter(c.dual_lr)},
      {"dual_running_rate", setter(c.dual_running_rate)},
      {"dual_updates", setter(c.dual_updates)},
      {"emp_in_policy", setter(c.emp_in_policy)},
      {"zero_rewards", setter(c.zero_rewards)},
      {"eval_every", setter(c.eval_every)},
      {"eval_episodes", setter(c.eval_episodes)},
      {"sim_samples", setter(c.sim_samples)},
      {"record_wallclock", setter(c.record_wallclock)},
      {"seed", setter(c.seed)},
  };
  apply_fields(doc, "", fields);
  c.validate();
  return c;
}

json preset(const std::string& name) {
  json doc = to_json(agent::TrainConfig{});
  if (name == "desk") return doc;
  if (name == "paper") {
    doc["model"]["latent_dim"] = 30;
    doc["model"]["hidden"] = {300, 300, 300};
    doc["model"]["critic_dim"] = 30;
    doc["c0"] = 1000.0;
    doc["lr_model"] = 6e-4;
    doc["lr_actor"] = 8e-5;
    doc["lr_value"] = 8e-5;
    doc["updates_per_episode"] = 100;
    doc["seed_episodes"] = 7;
    return doc;
  }
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, "override must look like key.path=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  std::string pointer;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    pointer += "/" + key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    doc[json::json_pointer(pointer)] = value;
  } catch (const json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

void apply_ablation(json& doc, const std::string& name) {
  if (name == "full") return;
  if (name == "no-emp-policy") {
    doc["emp_in_policy"] = false;
  } else if (name == "no-emp-repr") {
    doc["loss"]["use_empowerment"] = false;
  } else if (name == "contrastive-only") {
    doc["emp_in_policy"] = false;
    doc["loss"]["use_empowerment"] = false;
  } else if (name == "recon") {
    doc["loss"]["representation"] = "reconstruction";
    doc["loss"]["use_empowerment"] = false;
    doc["emp_in_policy"] = false;
  } else {
    throw ConfigError("ablate", "unknown ablation '" + name + "'");
  }
}

std::string config_hash(const json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : doc.dump()) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace infoprio::config
