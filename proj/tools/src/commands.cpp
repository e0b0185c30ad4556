#include "commands.hpp"

#include "io.hpp"

#include "infoprio/agent.hpp"
#include "infoprio/config.hpp"
#include "infoprio/empowerment.hpp"
#include "infoprio/metrics.hpp"
#include "infoprio/mi.hpp"
#include "infoprio/theory.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

namespace infoprio::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json resolve_train_config(const CommonOptions& c, const std::string& ablate,
                          std::optional<long> steps) {
  json doc = config::preset(c.preset);
  if (!c.config.empty()) doc.merge_patch(read_json_file(c.config));
  config::apply_ablation(doc, ablate);
  for (const auto& o : c.overrides) config::apply_override(doc, o);
  if (c.seed) doc["seed"] = *c.seed;
  if (steps) doc["total_steps"] = *steps;
  // Round trip so every default is echoed and unknown keys are rejected.
  return config::to_json(config::train_config_from_json(doc));
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json nan_to_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void print_json(const json& doc, const std::string& out_dir, const std::string& name) {
  std::cout << doc.dump(2) << "\n";
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_atomic(fs::path(out_dir) / name, doc.dump(2) + "\n");
  }
}

}  // namespace

int cmd_train(const TrainOptions& o) {
  Manifest m;
  m.command = "train";
  m.started = utc_timestamp();
  m.config = resolve_train_config(o.common, o.ablate, o.steps);
  m.config_hash = config::config_hash(m.config);
  const agent::TrainConfig cfg = config::train_config_from_json(m.config);
  m.seed = cfg.seed;

  const fs::path dir = o.common.out.empty() ? fs::path("runs") / ("train-seed" + std::to_string(cfg.seed))
                                            : fs::path(o.common.out);
  fs::create_directories(dir);
  write_atomic(dir / "config.json", m.config.dump(2) + "\n");

  std::ofstream csv(dir / "metrics.csv", std::ios::binary);
  if (!csv) throw Error("cannot write " + (dir / "metrics.csv").string());
  agent::write_metrics_header(csv);
  agent::TrainResult r = agent::train(cfg, [&](const agent::MetricsRow& row) {
    agent::write_metrics_row(csv, row);
    csv.flush();
  });
  csv.close();
  m.outputs = {"config.json", "metrics.csv"};

  const json checkpoint = {{"config_hash", m.config_hash},
                           {"lagrangian", world::to_json(r.lagrangian)},
                           {"model", world::to_json(r.model)},
                           {"policy", nn::to_json(r.policy.net)},
                           {"value", nn::to_json(r.value)}};
  write_atomic(dir / "checkpoint.json", checkpoint.dump() + "\n");
  m.outputs.push_back("checkpoint.json");

  if (!o.no_replay) {
    std::ostringstream rep;
    r.replay.save(rep);
    write_atomic(dir / "replay.ndjson", rep.str());
    m.outputs.push_back("replay.ndjson");
  }

  const json summary = {
      {"episodes", r.episode_returns.size()},
      {"return_tail_mean", nan_to_null(agent::tail_mean(r.episode_returns, 10))},
      {"sim_kernel", nan_to_null(r.final_eval.sim_kernel)},
      {"probe_r2_splus", nan_to_null(r.final_eval.probe_r2_splus)},
      {"probe_r2_stilde", nan_to_null(r.final_eval.probe_r2_stilde)},
      {"probe_r2_ds", nan_to_null(r.final_eval.probe_r2_ds)},
      {"lambda", r.lagrangian.lambda},
      {"env_steps", r.rows.empty() ? 0L : r.rows.back().step},
  };
  write_atomic(dir / "summary.json", summary.dump(2) + "\n");
  m.outputs.push_back("summary.json");
  m.outputs.push_back("manifest.json");

  m.finished = utc_timestamp();
  m.exit_status = kOk;
  write_manifest(dir, m);
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

int cmd_capacity(const CapacityOptions& o) {
  const json doc = read_json_file(o.channel);
  const json& rows = doc.is_object() ? doc.at("channel") : doc;
  if (!rows.is_array() || rows.empty()) throw ConfigError("channel", "must be a non-empty matrix");
  const std::size_t cols = rows[0].is_array() ? rows[0].size() : 0;
  if (cols == 0) throw ConfigError("channel", "rows must be non-empty arrays");
  Mat ch(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t a = 0; a < rows.size(); ++a) {
    if (!rows[a].is_array() || rows[a].size() != cols) {
      throw ConfigError("channel[" + std::to_string(a) + "]", "ragged matrix");
    }
    for (std::size_t j = 0; j < cols; ++j) {
      if (!rows[a][j].is_number()) throw ConfigError("channel[" + std::to_string(a) + "]", "entries must be numbers");
      ch(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) = rows[a][j].get<double>();
    }
  }
  try {
    empowerment::validate_channel(ch, 1e-9);
  } catch (const DomainError& e) {
    throw ConfigError("channel", e.what());
  }
  const auto r = empowerment::channel_capacity(ch, o.tol, o.max_iter);
  std::printf("capacity_nats %.6f\ncapacity_bits %.6f\niterations %d\nconverged %s\n", r.capacity,
              r.capacity / std::log(2.0), r.state.iterations, r.converged ? "true" : "false");
  return kOk;
}

int cmd_mi_bench(const MIBenchOptions& o) {
  mi::MIBenchConfig cfg;
  if (o.family == "gaussian") cfg.family = mi::BenchFamily::kGaussian;
  else if (o.family == "discrete") cfg.family = mi::BenchFamily::kDiscrete;
  else throw ConfigError("family", "expected gaussian or discrete");
  cfg.rho = o.rho;
  cfg.dims = o.dims;
  cfg.symbols = o.symbols;
  cfg.noise = o.noise;
  cfg.batch = o.batch;
  cfg.train_steps = o.train_steps;
  cfg.eval_batches = o.eval_batches;
  cfg.seed = o.common.seed.value_or(0);
  const auto r = mi::run_mi_bench(cfg);
  std::printf("%-14s %12s %12s\n", "bound", "nats", "se");
  std::printf("%-14s %12.6f %12s\n", "oracle", r.oracle, "-");
  for (const auto* e : {&r.nce_inclusive, &r.nce_exclusive, &r.nwj, &r.ba}) {
    std::printf("%-14s %12.6f %12.6f\n", e->name.c_str(), e->value, e->standard_error);
  }
  if (!o.common.out.empty()) {
    fs::create_directories(o.common.out);
    write_atomic(fs::path(o.common.out) / "mi_bench.json", mi::to_json(r).dump(2) + "\n");
  }
  return kOk;
}

namespace {

// Rows sorted by label so that vertex i carries the same label in both files.
std::vector<Vec> by_label(const PointFile& f, const std::string& name) {
  if (f.labels.empty()) return f.rows;
  std::vector<std::size_t> order(f.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return f.labels[a] < f.labels[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (f.labels[order[i]] == f.labels[order[i - 1]]) throw ConfigError(name, "duplicate label");
  }
  std::vector<Vec> out;
  for (auto i : order) out.push_back(f.rows[i]);
  return out;
}

int vertices_for_edges(std::size_t edges, const std::string& name) {
  for (int n = 2; n <= 100000; ++n) {
    const std::size_t e = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
    if (e == edges) return n;
    if (e > edges) break;
  }
  throw ConfigError(name, "edge count " + std::to_string(edges) + " is not n(n-1)/2");
}

}  // namespace

int cmd_metric(const MetricOptions& o) {
  metrics::KernelConfig kc;
  kc.ridge_width = o.ridge_width;
  kc.vertex_kernel = o.paper_literal ? metrics::VertexKernel::kPaperLiteral : metrics::VertexKernel::kMatching;
  json report;
  if (o.edge_weights) {
    const auto w1 = read_reals(o.latents);
    const auto w2 = read_reals(o.gt);
    if (w1.size() != w2.size()) throw ConfigError("gt", "edge count differs from the latents file");
    const int n = vertices_for_edges(w1.size(), "latents");
    const auto g1 = metrics::SimilarityGraph::from_weights(n, w1);
    const auto g2 = metrics::SimilarityGraph::from_weights(n, w2);
    report["sim_kernel"] = metrics::shortest_path_kernel(g1, g2, kc);
  } else {
    const auto lat = read_point_csv(o.latents, o.labelled);
    const auto gt = read_point_csv(o.gt, o.labelled);
    if (lat.rows.size() != gt.rows.size()) throw ConfigError("gt", "row count differs from the latents file");
    if (o.labelled) {
      auto a = lat.labels, b = gt.labels;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a != b) throw ConfigError("gt", "label sets differ");
    }
    const auto z = by_label(lat, "latents");
    const auto s = by_label(gt, "gt");
    report["sim_kernel"] = metrics::behavioral_similarity(z, s, kc);
    Mat zm(z.front().size(), static_cast<Eigen::Index>(z.size()));
    Mat sm(s.front().size(), static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < z.size(); ++i) {
      zm.col(static_cast<Eigen::Index>(i)) = z[i];
      sm.col(static_cast<Eigen::Index>(i)) = s[i];
    }
    if (z.size() >= 5) {
      const auto p = metrics::linear_probe(zm, sm, o.seed);
      report["probe_r2"] = p.r2;
      report["probe_rank_deficient"] = p.rank_deficient;
    }
  }
  std::printf("sim_kernel %.6f\n", report["sim_kernel"].get<double>());
  if (report.contains("probe_r2")) std::printf("probe_r2 %.6f\n", report["probe_r2"].get<double>());
  return kOk;
}

int cmd_theory(const TheoryOptions& o) {
  if (o.suite == "t3") {
    theory::T3SuiteConfig cfg;
    cfg.fault = o.fault;
    if (o.common.seed) cfg.seed = *o.common.seed;
    const auto reports = theory::run_t3_suite(cfg);
    json doc = {{"suite", "t3"}, {"instances", json::array()}};
    bool all = true;
    for (const auto& r : reports) {
      doc["instances"].push_back(theory::to_json(r));
      all = all && r.holds;
    }
    doc["all_hold"] = all;
    print_json(doc, o.common.out, "t3.json");
    return all ? kOk : kCheckFailed;
  }
  if (o.suite == "t1") {
    if (o.seeds < 1) throw ConfigError("seeds", "must be >= 1");
    theory::Theorem1Config cfg;
    cfg.env = envs::preset(o.env);
    cfg.train_steps = o.train_steps;
    const std::uint64_t base = o.common.seed.value_or(0);
    const int needed = (3 * o.seeds + 3) / 4;
    int trained_pass = 0, control_pass = 0;
    json doc = {{"suite", "t1"}, {"margin", 0.3}, {"runs", json::array()}};
    for (int k = 0; k < o.seeds; ++k) {
      cfg.seed = base + static_cast<std::uint64_t>(k);
      for (bool trained : {true, false}) {
        theory::Theorem1Config c = cfg;
        if (!trained) c.train_steps = 0;
        const auto r = theory::theorem1_probe_experiment(c);
        const bool pass = r.r2_s_plus >= r.r2_ds + 0.3;
        (trained ? trained_pass : control_pass) += pass;
        json j = theory::to_json(r);
        j["seed"] = c.seed;
        j["trained"] = trained;
        j["ordering_holds"] = pass;
        doc["runs"].push_back(j);
      }
    }
    doc["trained_passes"] = trained_pass;
    doc["control_passes"] = control_pass;
    doc["required"] = needed;
    const bool ok = trained_pass >= needed && control_pass < needed;
    doc["holds"] = ok;
    print_json(doc, o.common.out, "t1.json");
    return ok ? kOk : kCheckFailed;
  }
  throw ConfigError("suite", "expected t3 or t1");
}

int cmd_grid(const GridOptions& o) {
  if (o.seeds < 1) throw ConfigError("seeds", "must be >= 1");
  const fs::path root = o.common.out.empty() ? fs::path("runs/grid") : fs::path(o.common.out);
  fs::create_directories(root);
  const std::uint64_t base = o.common.seed.value_or(0);
  for (const auto& a : o.ablations) {
    json probe = config::preset(o.common.preset);
    config::apply_ablation(probe, a);  // reject bad names before spawning anything
  }
  json doc = {{"runs", json::array()}, {"ablations", json::object()}};
  std::map<std::string, std::vector<double>> returns, sims;
  for (const auto& a : o.ablations) {
    for (int k = 0; k < o.seeds; ++k) {
      const std::uint64_t seed = base + static_cast<std::uint64_t>(k);
      const fs::path dir = root / (a + "-seed" + std::to_string(seed));
      std::vector<std::string> args = {o.self, "train", "--preset", o.common.preset, "--ablate", a,
                                       "--seed", std::to_string(seed), "--out", dir.string()};
      if (!o.common.config.empty()) {
        args.push_back("--config");
        args.push_back(o.common.config);
      }
      for (const auto& ov : o.common.overrides) {
        args.push_back("--override");
        args.push_back(ov);
      }
      std::cerr << "grid: " << a << " seed " << seed << "\n";
      const pid_t pid = fork();
      if (pid < 0) throw Error("fork failed");
      if (pid == 0) {
        std::vector<char*> argv;
        for (auto& s : args) argv.push_back(s.data());
        argv.push_back(nullptr);
        const int devnull = ::open("/dev/null", O_WRONLY);
        if (devnull >= 0) dup2(devnull, 1);
        execv(o.self.c_str(), argv.data());
        _exit(127);
      }
      int status = 0;
      waitpid(pid, &status, 0);
      const int code = WIFEXITED(status) ? WEXITSTATUS(status) : kRuntimeError;
      if (code != kOk) throw Error("run " + dir.string() + " exited with " + std::to_string(code));
      const json s = read_json_file(dir / "summary.json");
      const double ret = s["return_tail_mean"].is_number() ? s["return_tail_mean"].get<double>() : std::nan("");
      const double sim = s["sim_kernel"].is_number() ? s["sim_kernel"].get<double>() : std::nan("");
      returns[a].push_back(ret);
      sims[a].push_back(sim);
      doc["runs"].push_back({{"ablation", a}, {"seed", seed}, {"dir", dir.string()}, {"summary", s}});
    }
  }
  std::printf("%-18s %14s %14s\n", "ablation", "median_return", "median_sim");
  for (const auto& a : o.ablations) {
    const double mr = median(returns[a]), ms = median(sims[a]);
    doc["ablations"][a] = {{"median_return", nan_to_null(mr)}, {"median_sim", nan_to_null(ms)}};
    std::printf("%-18s %14.6f %14.6f\n", a.c_str(), mr, ms);
  }
  write_atomic(root / "grid.json", doc.dump(2) + "\n");
  return kOk;
}

}  // namespace infoprio::cli
