#pragma once

// Dense feed-forward networks with hand-written backpropagation, the Adam
// optimizer and finite-difference gradient checking. Every model head in the
// library (encoder, dynamics, inverse, reward, critic embedding, policy,
// value) is a DenseNet.

#include "infoprio/common.hpp"
#include "infoprio/rng.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace infoprio::nn {

enum class Activation { kElu, kIdentity };

/// ELU with alpha fixed at 1.
inline double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }
inline double elu_grad(double x) { return x >= 0.0 ? 1.0 : std::exp(x); }

struct DenseLayer {
  Mat weight;  // out x in
  Vec bias;    // out
  Activation activation = Activation::kIdentity;

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
};

class DenseNet {
 public:
  DenseNet() = default;
  /// Throws ShapeError if consecutive layers do not chain.
  explicit DenseNet(std::vector<DenseLayer> layers);

  /// widths = {in, hidden..., out}; ELU on hidden layers, identity on the
  /// final layer. Weights ~ U(-a, a) with a = sqrt(6 / (in + out)), zero bias.
  static DenseNet random(const std::vector<int>& widths, Rng& rng, double output_scale = 1.0);

  int input_dim() const;
  int output_dim() const;
  bool empty() const { return layers_.empty(); }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  /// One block per weight matrix and bias vector, layer order, "prefix.L.weight".
  std::vector<ParamBlock> parameter_blocks(const std::string& prefix = "net");
  std::size_t parameter_count() const;
  bool all_finite() const;

 private:
  std::vector<DenseLayer> layers_;
};

/// Gradients shaped exactly like a DenseNet's parameters.
struct NetGradients {
  std::vector<Mat> weight;
  std::vector<Vec> bias;

  static NetGradients zeros_like(const DenseNet& net);
  std::vector<GradBlock> blocks() const;
  NetGradients& operator+=(const NetGradients& other);
  NetGradients& operator*=(double s);
};

/// Activations kept from a batched forward pass for the backward pass.
/// Batches are column-major: one sample per column.
struct ForwardCache {
  std::vector<Mat> inputs;  // input to each layer
  std::vector<Mat> pre;     // pre-activation of each layer
  Mat output;
};

Vec forward(const DenseNet& net, const Vec& input);
Mat forward_batch(const DenseNet& net, const Mat& inputs);
ForwardCache forward_cached(const DenseNet& net, const Mat& inputs);

/// Backpropagates `upstream` (dLoss/dOutput, out_dim x batch). Writes
/// dLoss/dInput into `input_grad` when it is non-null.
NetGradients backward(const DenseNet& net, const ForwardCache& cache, const Mat& upstream,
                      Mat* input_grad = nullptr);
NetGradients backward(const DenseNet& net, const Mat& inputs, const Mat& upstream);

// ---------------------------------------------------------------------------
// Categorical heads (logits column-major, one distribution per column)

Mat log_softmax(const Mat& logits);
Mat softmax(const Mat& logits);
/// Entropy of each column's softmax distribution.
Vec softmax_entropy(const Mat& logits);
/// dH/dlogits for each column.
Mat softmax_entropy_grad(const Mat& logits);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment accumulators for a fixed list of parameter blocks.
class AdamState {
 public:
  AdamState() = default;
  AdamState(AdamConfig config, const std::vector<ParamBlock>& params);

  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }
  std::int64_t step() const { return step_; }
  const std::vector<Vec>& first_moment() const { return m_; }
  const std::vector<Vec>& second_moment() const { return v_; }

  /// Bias-corrected Adam update applied in place. Throws NumericError naming the
  /// parameter block on a non-finite gradient, before anything is modified.
  void apply(const std::vector<ParamBlock>& params, const std::vector<GradBlock>& grads);

 private:
  AdamConfig config_;
  std::vector<Vec> m_;
  std::vector<Vec> v_;
  std::int64_t step_ = 0;
};

inline void adam_step(AdamState& state, const std::vector<ParamBlock>& params,
                      const std::vector<GradBlock>& grads) {
  state.apply(params, grads);
}

/// Euclidean norm across all blocks.
double global_norm(const std::vector<GradBlock>& grads);

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_block = 0;  // layer / parameter-block index
  std::size_t worst_index = 0;  // flat index within the block
  double step = 0.0;
  std::size_t checked = 0;
};

/// Central differences of `loss` against `analytic`, one entry per parameter:
/// |a - n| / max(|a|, |n|, 1e-8). `loss` must read the parameters through
/// `params` (they are perturbed in place and restored).
GradCheckReport grad_check(const std::vector<ParamBlock>& params,
                           const std::function<double()>& loss,
                           const std::vector<GradBlock>& analytic, double step = 1e-5);

/// Scalar loss of the network output batch, returning (value, dLoss/dOutput).
using OutputLoss = std::function<std::pair<double, Mat>(const Mat& output)>;

GradCheckReport grad_check(DenseNet& net, const OutputLoss& loss, const Mat& batch,
                           double step = 1e-5);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr const char* kNetFormat = "infoprio.densenet.v1";

/// JSON document: format tag, then per layer its shape, activation, and
/// row-major weight and bias arrays.
nlohmann::json to_json(const DenseNet& net);
DenseNet densenet_from_json(const nlohmann::json& doc);

}  // namespace infoprio::nn
