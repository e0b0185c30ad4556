#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace infoprio::cli {

struct CommonOptions {
  std::string config;  // JSON file merged over the preset
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

struct TrainOptions {
  CommonOptions common;
  std::string ablate = "full";
  std::optional<long> steps;
  bool no_replay = false;
};

struct CapacityOptions {
  std::string channel;
  double tol = 1e-12;
  int max_iter = 500;
};

struct MIBenchOptions {
  CommonOptions common;
  std::string family = "gaussian";
  double rho = 0.5;
  int dims = 1;
  int symbols = 4;
  double noise = 0.0;
  int batch = 512;
  int train_steps = 1500;
  int eval_batches = 20;
};

struct MetricOptions {
  std::string latents;
  std::string gt;
  bool labelled = false;
  bool edge_weights = false;
  double ridge_width = 0.0;
  bool paper_literal = false;
  std::uint64_t seed = 0;
};

struct TheoryOptions {
  CommonOptions common;
  std::string suite;
  double fault = 0.0;
  int seeds = 4;
  int train_steps = 1500;
  std::string env = "ring";
};

struct GridOptions {
  CommonOptions common;
  std::vector<std::string> ablations = {"full", "no-emp-policy", "recon"};
  int seeds = 4;
  std::string self;  // path of this executable
};

int cmd_train(const TrainOptions& o);
int cmd_capacity(const CapacityOptions& o);
int cmd_mi_bench(const MIBenchOptions& o);
int cmd_metric(const MetricOptions& o);
int cmd_theory(const TheoryOptions& o);
int cmd_grid(const GridOptions& o);

}  // namespace infoprio::cli
