// Acceptance checks, one per criterion. Usage: infoprio_acceptance [N...]
// Prints "criterion N: PASS|FAIL <details>" per criterion; exit 1 if any fails.

#include "fixtures.hpp"

#include "infoprio/agent.hpp"
#include "infoprio/config.hpp"
#include "infoprio/empowerment.hpp"
#include "infoprio/metrics.hpp"
#include "infoprio/mi.hpp"
#include "infoprio/theory.hpp"
#include "infoprio/world_model.hpp"

#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

using namespace infoprio;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(INFOPRIO_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Timer t;
  double worst = 0.0;
  int max_iter = 0;
  bool monotone = true;
  for (double p : {0.0, 0.05, 0.1, 0.25, 0.5}) {
    const auto r = empowerment::channel_capacity(empowerment::bsc(p), 1e-12, 500);
    const double analytic = (1.0 - empowerment::binary_entropy(p) / std::log(2.0)) * std::log(2.0);
    worst = std::max(worst, std::abs(r.capacity - analytic));
    max_iter = std::max(max_iter, r.state.iterations);
    for (std::size_t i = 1; i < r.history.size(); ++i) monotone = monotone && r.history[i] >= r.history[i - 1];
  }
  const double secs = t.seconds();
  const bool pass = worst <= 1e-6 && max_iter <= 500 && monotone && secs < 1.0;
  return {pass, "max|err|=" + fmt("%.2e", worst) + " iters<=" + std::to_string(max_iter) +
                    " monotone=" + (monotone ? "yes" : "no") + " time=" + fmt("%.3fs", secs)};
}

Outcome criterion2() {
  Timer t;
  const Mat joint{{0.4, 0.1}, {0.1, 0.4}};
  const double direct = 0.8 * std::log(1.6) + 0.2 * std::log(0.4);
  const double e_disc = std::abs(mi::exact_mi_discrete(joint) - direct);
  const double e_diag = std::abs(mi::exact_mi_discrete(Mat::Identity(4, 4) / 4.0) - std::log(4.0));
  const double e_gauss = std::abs(mi::exact_mi_gaussian(0.5, 1) + 0.5 * std::log(0.75));
  const bool oracles = e_disc <= 1e-9 && e_diag <= 1e-9 && e_gauss <= 1e-9 && mi::exact_mi_gaussian(0.0, 2) == 0.0;

  mi::MIBenchConfig cfg;
  cfg.rho = 0.5;
  cfg.dims = 1;
  cfg.batch = 512;
  const auto r = mi::run_mi_bench(cfg);
  auto inside = [&](const mi::MIBoundEstimate& e) {
    return e.value >= r.oracle - 0.05 && e.value <= r.oracle + 2.0 * e.standard_error;
  };
  const double secs = t.seconds();
  const bool pass = oracles && inside(r.nwj) && inside(r.nce_inclusive) && secs < 300.0;
  return {pass, "oracle=" + fmt("%.5f", r.oracle) + " nwj=" + fmt("%.4f", r.nwj.value) + "±" +
                    fmt("%.4f", r.nwj.standard_error) + " nce=" + fmt("%.4f", r.nce_inclusive.value) + "±" +
                    fmt("%.4f", r.nce_inclusive.standard_error) + " oracles=" + (oracles ? "exact" : "off") +
                    " time=" + fmt("%.1fs", secs)};
}

Outcome criterion3() {
  Timer t;
  std::map<std::string, double> err;
  const envs::EnvConfig env = envs::preset("ring");
  world::WorldModelConfig mc;
  mc.obs_dim = env.observation_dim();
  mc.num_actions = env.num_actions;
  mc.latent_dim = 4;
  mc.hidden = {10};
  mc.critic_dim = 4;
  Rng init(11);
  world::WorldModel m = world::WorldModel::random(mc, init);
  // Heads: each network against a squared-error loss on random targets.
  Rng data(12);
  auto head = [&](const std::string& name, nn::DenseNet& net) {
    Mat x(net.input_dim(), 5), target(net.output_dim(), 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = data.normal();
    for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = data.normal();
    auto loss = [&](const Mat& y) { return std::pair<double, Mat>{0.5 * (y - target).squaredNorm(), y - target}; };
    err[name] = nn::grad_check(net, loss, x).max_rel_error;
  };
  head("encoder", m.encoder);
  head("prior", m.prior);
  head("inverse", m.inverse);
  head("reward", m.reward);
  head("decoder", m.decoder);
  head("critic-embedding", m.critic.obs_embed);
  agent::Policy policy{nn::DenseNet::random({4, 10, 3}, init)};
  agent::ValueNet value = nn::DenseNet::random({4, 10, 1}, init);
  head("policy", policy.net);
  head("value", value);

  // Composite losses through the whole model.
  const auto buf = fixtures::random_replay(env, 3, 13);
  Rng pick(14);
  const auto windows = buf.sample_windows(2, 3, pick);
  auto composite = [&](const std::string& name, world::LossConfig cfg, const agent::Policy* pol) {
    auto run = [&](bool g) {
      Rng noise(15);
      return world::lagrangian_loss(m, pol, windows, 0.8, -1.0, cfg, noise, g);
    };
    const auto r = run(true);
    err[name] = nn::grad_check(m.parameter_blocks(), [&] { return run(false).loss; }, r.grads.blocks()).max_rel_error;
  };
  world::LossConfig none;
  none.use_mi = none.use_forward = none.use_empowerment = none.use_reward = false;
  world::LossConfig c = none;
  c.use_mi = true;
  composite("contrastive-nce", c, nullptr);
  c.mi_mode = world::MIMode::kNwj;
  composite("contrastive-nwj", c, nullptr);
  c = none;
  c.use_forward = true;
  composite("kl", c, nullptr);
  c = none;
  c.use_empowerment = true;
  composite("empowerment", c, &policy);
  c = none;
  c.use_reward = true;
  composite("reward", c, nullptr);
  c = world::LossConfig{};
  c.representation = world::Representation::kReconstruction;
  composite("reconstruction", c, nullptr);
  composite("lagrangian", world::LossConfig{}, &policy);

  Mat z(4, 9);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = data.normal();
  std::vector<int> acts;
  for (int i = 0; i < 9; ++i) acts.push_back(i % 3);
  Vec adv(9);
  for (int i = 0; i < 9; ++i) adv[i] = data.normal();
  const auto ps = agent::policy_surrogate(policy, z, acts, adv, 0.01);
  err["policy-surrogate"] =
      nn::grad_check(policy.net.parameter_blocks(),
                     [&] { return agent::policy_surrogate(policy, z, acts, adv, 0.01).first; }, ps.second.blocks())
          .max_rel_error;

  double worst = 0.0;
  std::string worst_name;
  for (const auto& [k, v] : err) {
    if (v >= worst) {
      worst = v;
      worst_name = k;
    }
  }
  const double secs = t.seconds();
  return {worst < 1e-4 && secs < 60.0, std::to_string(err.size()) + " checks, worst=" + fmt("%.2e", worst) + " (" +
                                           worst_name + ") time=" + fmt("%.1fs", secs)};
}

Outcome criterion4() {
  Timer t;
  const auto reports = theory::run_t3_suite({});
  int holds = 0;
  double min_slack = 1e300;
  for (const auto& r : reports) {
    holds += r.holds;
    min_slack = std::min(min_slack, r.rhs - r.lhs);
  }
  const int fault_exit = run_cli("theory t3 --fault 100");
  const int clean_exit = run_cli("theory t3");
  const double secs = t.seconds();
  const bool pass = reports.size() == 15 && holds == 15 && fault_exit == 1 && clean_exit == 0 && secs < 30.0;
  return {pass, std::to_string(holds) + "/15 hold, min slack=" + fmt("%.4f", min_slack) +
                    ", cli exit clean=" + std::to_string(clean_exit) + " fault=" + std::to_string(fault_exit) +
                    " time=" + fmt("%.1fs", secs)};
}

Outcome criterion5() {
  Timer t;
  int trained = 0, control = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    theory::Theorem1Config cfg;
    cfg.seed = seed;
    const auto a = theory::theorem1_probe_experiment(cfg);
    cfg.train_steps = 0;
    const auto b = theory::theorem1_probe_experiment(cfg);
    trained += a.r2_s_plus >= a.r2_ds + 0.3;
    control += b.r2_s_plus >= b.r2_ds + 0.3;
    detail += " [" + fmt("%.2f", a.r2_s_plus) + "/" + fmt("%.2f", a.r2_ds) + " vs " + fmt("%.2f", b.r2_s_plus) + "/" +
              fmt("%.2f", b.r2_ds) + "]";
  }
  const double secs = t.seconds();
  return {trained >= 3 && control < 3 && secs < 1200.0,
          "trained " + std::to_string(trained) + "/4, control " + std::to_string(control) + "/4" + detail +
              " time=" + fmt("%.0fs", secs)};
}

std::vector<Vec> random_points(int n, int dim, Rng& r) {
  std::vector<Vec> pts;
  for (int i = 0; i < n; ++i) {
    Vec v(dim);
    for (int k = 0; k < dim; ++k) v[k] = r.normal();
    pts.push_back(v);
  }
  return pts;
}

Outcome criterion6() {
  Timer t;
  Rng r(20240611);
  int exact = 0, self = 0;
  double iso = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = 2 + r.uniform_int(15);
    const auto g1 = metrics::SimilarityGraph::build(random_points(n, 1 + r.uniform_int(4), r));
    const auto g2 = metrics::SimilarityGraph::build(random_points(n, 1 + r.uniform_int(4), r));
    exact += metrics::shortest_path_kernel(g1, g2) == metrics::shortest_path_kernel_naive(g1, g2);
    self += metrics::shortest_path_kernel(g1, g1) == 1.0;
    // Rotation, uniform scale and translation of a 3-d set.
    const auto pts = random_points(n, 3, r);
    Eigen::Vector4d qv;
    for (int k = 0; k < 4; ++k) qv[k] = r.normal();
    const Eigen::Matrix3d rot = Eigen::Quaterniond(qv.normalized()).toRotationMatrix();
    const double scale = 0.1 + 5.0 * r.uniform();
    Vec shift(3);
    for (int k = 0; k < 3; ++k) shift[k] = r.normal();
    std::vector<Vec> moved;
    for (const auto& p : pts) moved.push_back(scale * (rot * p) + shift);
    iso = std::max(iso, std::abs(metrics::behavioral_similarity(moved, pts) - 1.0));
  }
  const double secs = t.seconds();
  return {exact == 100 && self == 100 && iso <= 1e-9 && secs < 60.0,
          "bit-exact " + std::to_string(exact) + "/100, k(G,G)=1 " + std::to_string(self) +
              "/100, isometry err=" + fmt("%.1e", iso) + " time=" + fmt("%.1fs", secs)};
}

// Cached training runs shared by criteria 7-9.
struct RunSummary {
  std::vector<agent::MetricsRow> rows;
  std::vector<double> returns;
  double sim = 0.0;
};

RunSummary train_cached(const json& doc) {
  const fs::path dir = fs::path(INFOPRIO_ACCEPTANCE_CACHE) / config::config_hash(doc);
  fs::create_directories(dir);
  const fs::path csv = dir / "metrics.csv", sum = dir / "summary.json";
  if (!fs::exists(sum)) {
    std::ofstream out(csv, std::ios::binary);
    agent::write_metrics_header(out);
    const auto r = agent::train(config::train_config_from_json(doc),
                                [&](const agent::MetricsRow& row) { agent::write_metrics_row(out, row); });
    out.close();
    std::ofstream(sum) << json{{"returns", r.episode_returns}, {"sim", r.final_eval.sim_kernel}, {"config", doc}}.dump();
  }
  RunSummary s;
  std::ifstream in(csv);
  s.rows = agent::read_metrics_csv(in);
  const json j = json::parse(slurp(sum));
  s.returns = j["returns"].get<std::vector<double>>();
  s.sim = j["sim"].is_number() ? j["sim"].get<double>() : std::nan("");
  return s;
}

Outcome criterion7() {
  Timer t;
  json doc = config::preset("desk");
  doc["total_steps"] = 50000;
  doc["seed"] = 7;
  const auto run = train_cached(doc);
  const double c0 = doc["c0"].get<double>();
  bool nonneg = true;
  std::vector<const agent::MetricsRow*> updates;
  for (const auto& row : run.rows) {
    if (std::isnan(row.lambda)) continue;
    nonneg = nonneg && row.lambda >= 0.0;
    updates.push_back(&row);
  }
  // Maximal stretches of update rows with the running constraint above c0;
  // those covering at least 1000 environment steps are checked.
  int windows = 0, violations = 0;
  std::size_t i = 0;
  while (i < updates.size()) {
    if (!(updates[i]->constraint_running > c0)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < updates.size() && updates[j + 1]->constraint_running > c0) ++j;
    if (updates[j]->step - updates[i]->step >= 1000) {
      ++windows;
      for (std::size_t k = i + 1; k <= j; ++k) violations += updates[k]->lambda > updates[k - 1]->lambda;
    }
    i = j + 1;
  }
  const double secs = t.seconds();
  const bool pass = nonneg && windows > 0 && violations == 0 && secs < 1800.0;
  return {pass, std::string("lambda>=0 ") + (nonneg ? "always" : "violated") + ", " + std::to_string(windows) +
                    " windows above c0 (>=1k steps), " + std::to_string(violations) + " increases inside, " +
                    std::to_string(updates.size()) + " updates, time=" + fmt("%.0fs", secs)};
}

constexpr long kDirectionalSteps = 10000;

std::map<std::string, std::vector<RunSummary>> directional_runs() {
  std::map<std::string, std::vector<RunSummary>> out;
  for (const std::string ablation : {"full", "no-emp-policy", "recon"}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      json doc = config::preset("desk");
      config::apply_ablation(doc, ablation);
      doc["total_steps"] = kDirectionalSteps;
      doc["seed"] = seed;
      out[ablation].push_back(train_cached(doc));
    }
  }
  return out;
}

Outcome criterion8() {
  Timer t;
  const auto runs = directional_runs();
  std::map<std::string, double> med;
  std::string detail;
  for (const auto& [name, rs] : runs) {
    std::vector<double> scores;
    for (const auto& r : rs) scores.push_back(agent::tail_mean(r.returns, 10));
    med[name] = median(scores);
    detail += " " + name + "=" + fmt("%.2f", med[name]);
  }
  const double secs = t.seconds();
  const bool pass = med["full"] >= 1.25 * med["no-emp-policy"] && med["full"] >= 1.5 * med["recon"] && secs < 7200.0;
  return {pass, "median tail return" + detail + " time=" + fmt("%.0fs", secs)};
}

Outcome criterion9() {
  Timer t;
  const auto runs = directional_runs();
  int wins = 0;
  std::string detail;
  for (std::size_t s = 0; s < 4; ++s) {
    const double a = runs.at("full")[s].sim, b = runs.at("recon")[s].sim;
    wins += a > b;
    detail += " [" + fmt("%.3f", a) + " vs " + fmt("%.3f", b) + "]";
  }
  const double secs = t.seconds();
  return {wins >= 3, "full beats recon on " + std::to_string(wins) + "/4 seeds" + detail + " time=" + fmt("%.0fs", secs)};
}

Outcome criterion10() {
  Timer t;
  const fs::path root = fs::path(INFOPRIO_ACCEPTANCE_CACHE) / "determinism";
  fs::remove_all(root);
  std::vector<std::pair<std::string, std::string>> commands = {
      {"train --seed 3 --steps 1000 --no-replay", "metrics.csv"},
      {"train --seed 3 --steps 500 --ablate recon --override loss.mi_mode=nwj --no-replay", "metrics.csv"},
      {"mi-bench --seed 3 --train-steps 200 --eval-batches 3", "mi_bench.json"},
      {"theory t3", "t3.json"},
  };
  int same = 0;
  std::string detail;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    const auto& [args, file] = commands[i];
    std::string contents[2];
    int codes[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path dir = root / (std::to_string(i) + "-" + std::to_string(k));
      codes[k] = run_cli(args + " --out " + dir.string());
      contents[k] = slurp(dir / file);
    }
    const bool ok = codes[0] == 0 && codes[1] == 0 && !contents[0].empty() && contents[0] == contents[1];
    same += ok;
    detail += " " + file + (ok ? ":identical" : ":DIFFERENT");
  }
  return {same == static_cast<int>(commands.size()),
          std::to_string(same) + "/" + std::to_string(commands.size()) + detail + " time=" + fmt("%.0fs", t.seconds())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> checks = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                        criterion6, criterion7, criterion8, criterion9, criterion10};
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty())
    for (int i = 1; i <= 10; ++i) which.push_back(i);
  bool all = true;
  for (int n : which) {
    if (n < 1 || n > 10) {
      std::cerr << "unknown criterion " << n << "\n";
      return 2;
    }
    Outcome o;
    try {
      o = checks[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " " << o.detail << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
