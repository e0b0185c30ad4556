#include "commands.hpp"
#include "io.hpp"

#include "infoprio/common.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>

using namespace infoprio;
using namespace infoprio::cli;

namespace {

void add_common(CLI::App* app, CommonOptions& c) {
  app->add_option("--config", c.config, "JSON config merged over the preset");
  app->add_option("--preset", c.preset, "desk | paper");
  app->add_option("--seed", c.seed, "Run seed");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--override", c.overrides, "key.path=value (repeatable)")->take_all();
}

void report_runtime(const std::string& type, const std::string& what) {
  std::cerr << nlohmann::json{{"error", type}, {"message", what}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"infoprio: prioritized-information world models at desk scale"};
  app.require_subcommand(1);

  TrainOptions train;
  auto* t = app.add_subcommand("train", "Train an agent and write a run directory");
  add_common(t, train.common);
  t->add_option("--ablate", train.ablate, "full | no-emp-policy | no-emp-repr | contrastive-only | recon");
  t->add_option("--steps", train.steps, "Environment steps after the seeding episodes");
  t->add_flag("--no-replay", train.no_replay, "Skip writing replay.ndjson");

  CapacityOptions cap;
  auto* c = app.add_subcommand("capacity", "Blahut-Arimoto capacity of a channel JSON");
  c->add_option("channel", cap.channel, "JSON file: matrix or {\"channel\": matrix}")->required();
  c->add_option("--tol", cap.tol, "Stop when the objective changes by less");
  c->add_option("--max-iter", cap.max_iter, "Iteration cap");

  MIBenchOptions mib;
  auto* b = app.add_subcommand("mi-bench", "Compare MI bounds against exact oracles");
  add_common(b, mib.common);
  b->add_option("--family", mib.family, "gaussian | discrete");
  b->add_option("--rho", mib.rho, "Gaussian correlation");
  b->add_option("--dims", mib.dims, "Gaussian dimensions");
  b->add_option("--symbols", mib.symbols, "Discrete alphabet size");
  b->add_option("--noise", mib.noise, "Discrete: probability of a uniform partner");
  b->add_option("--batch", mib.batch, "Batch size");
  b->add_option("--train-steps", mib.train_steps, "Critic training steps");
  b->add_option("--eval-batches", mib.eval_batches, "Fresh batches for evaluation");

  MetricOptions met;
  auto* m = app.add_subcommand("metric", "Behavioural similarity of two point sets");
  m->add_option("latents", met.latents, "CSV of latent vectors")->required();
  m->add_option("gt", met.gt, "CSV of ground-truth vectors")->required();
  m->add_flag("--labels", met.labelled, "First column is an integer vertex label");
  m->add_flag("--edge-weights", met.edge_weights, "Files hold scaled edge weights in (i,j) order");
  m->add_option("--ridge-width", met.ridge_width, "Edge kernel width c (default: max weight)");
  m->add_flag("--paper-literal", met.paper_literal, "Vertex kernel on both endpoint pairs");
  m->add_option("--seed", met.seed, "Probe split seed");

  TheoryOptions th;
  auto* y = app.add_subcommand("theory", "Exact bound checks and probe experiments");
  add_common(y, th.common);
  y->add_option("suite", th.suite, "t3 | t1")->required();
  y->add_option("--fault", th.fault, "Added to every lhs (test hook)");
  y->add_option("--seeds", th.seeds, "t1: number of seeds");
  y->add_option("--train-steps", th.train_steps, "t1: training steps per seed");
  y->add_option("--env", th.env, "t1: environment preset");

  GridOptions grid;
  auto* g = app.add_subcommand("grid", "Ablation x seed grid, one process per run");
  add_common(g, grid.common);
  g->add_option("--ablations", grid.ablations, "Ablation names")->take_all();
  g->add_option("--seeds", grid.seeds, "Seeds per ablation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigInvalid;
  }

  try {
    if (*t) return cmd_train(train);
    if (*c) return cmd_capacity(cap);
    if (*b) return cmd_mi_bench(mib);
    if (*m) return cmd_metric(met);
    if (*y) return cmd_theory(th);
    if (*g) {
      grid.self = std::filesystem::canonical("/proc/self/exe").string();
      return cmd_grid(grid);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigInvalid;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigInvalid;
  } catch (const ShapeError& e) {
    report_runtime("shape", e.what());
    return kRuntimeError;
  } catch (const NumericError& e) {
    report_runtime("numeric", e.what());
    return kRuntimeError;
  } catch (const std::exception& e) {
    report_runtime("runtime", e.what());
    return kRuntimeError;
  }
  return kRuntimeError;
}
