#include "infoprio/nn.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace infoprio::nn {

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.weight.rows()) {
      throw ShapeError("layer " + std::to_string(i) + ": bias length " +
                       std::to_string(l.bias.size()) + " != output dim " +
                       std::to_string(l.weight.rows()));
    }
    if (i > 0 && layers_[i - 1].out_dim() != l.in_dim()) {
      throw ShapeError("layer " + std::to_string(i) + ": input dim " + std::to_string(l.in_dim()) +
                       " does not chain with previous output dim " +
                       std::to_string(layers_[i - 1].out_dim()));
    }
  }
}

DenseNet DenseNet::random(const std::vector<int>& widths, Rng& rng, double output_scale) {
  if (widths.size() < 2) throw ShapeError("a network needs at least input and output widths");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const int in = widths[i];
    const int out = widths[i + 1];
    if (in <= 0 || out <= 0) throw ShapeError("layer widths must be positive");
    DenseLayer l;
    const bool last = i + 2 == widths.size();
    const double a = std::sqrt(6.0 / (in + out)) * (last ? output_scale : 1.0);
    l.weight.resize(out, in);
    for (int c = 0; c < in; ++c)
      for (int r = 0; r < out; ++r) l.weight(r, c) = a * (2.0 * rng.uniform() - 1.0);
    l.bias = Vec::Zero(out);
    l.activation = last ? Activation::kIdentity : Activation::kElu;
    layers.push_back(std::move(l));
  }
  return DenseNet(std::move(layers));
}

int DenseNet::input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
int DenseNet::output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

std::vector<ParamBlock> DenseNet::parameter_blocks(const std::string& prefix) {
  std::vector<ParamBlock> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    out.push_back({base + ".weight", as_span(layers_[i].weight)});
    out.push_back({base + ".bias", as_span(layers_[i].bias)});
  }
  return out;
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool DenseNet::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const DenseLayer& l) {
    return l.weight.allFinite() && l.bias.allFinite();
  });
}

NetGradients NetGradients::zeros_like(const DenseNet& net) {
  NetGradients g;
  for (const auto& l : net.layers()) {
    g.weight.push_back(Mat::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vec::Zero(l.bias.size()));
  }
  return g;
}

std::vector<GradBlock> NetGradients::blocks() const {
  std::vector<GradBlock> out;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    out.push_back(as_span(weight[i]));
    out.push_back(as_span(bias[i]));
  }
  return out;
}

NetGradients& NetGradients::operator+=(const NetGradients& other) {
  if (other.weight.size() != weight.size()) throw ShapeError("gradient layer count mismatch");
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] += other.weight[i];
    bias[i] += other.bias[i];
  }
  return *this;
}

NetGradients& NetGradients::operator*=(double s) {
  for (auto& w : weight) w *= s;
  for (auto& b : bias) b *= s;
  return *this;
}

namespace {

void check_input(const DenseNet& net, Eigen::Index rows) {
  if (net.empty()) throw ShapeError("forward on an empty network");
  if (rows != net.input_dim()) {
    throw ShapeError("input dim " + std::to_string(rows) + " != network input dim " +
                     std::to_string(net.input_dim()));
  }
}

Mat activate(const Mat& pre, Activation act) {
  if (act == Activation::kIdentity) return pre;
  return pre.unaryExpr([](double x) { return elu(x); });
}

}  // namespace

Vec forward(const DenseNet& net, const Vec& input) {
  check_input(net, input.size());
  Vec x = input;
  for (const auto& l : net.layers()) {
    Vec pre = l.weight * x + l.bias;
    x = l.activation == Activation::kElu ? Vec(pre.unaryExpr([](double v) { return elu(v); }))
                                         : pre;
  }
  return x;
}

Mat forward_batch(const DenseNet& net, const Mat& inputs) {
  check_input(net, inputs.rows());
  Mat x = inputs;
  for (const auto& l : net.layers()) {
    Mat pre = l.weight * x;
    pre.colwise() += l.bias;
    x = activate(pre, l.activation);
  }
  return x;
}

ForwardCache forward_cached(const DenseNet& net, const Mat& inputs) {
  check_input(net, inputs.rows());
  ForwardCache cache;
  cache.inputs.reserve(net.layers().size());
  cache.pre.reserve(net.layers().size());
  Mat x = inputs;
  for (const auto& l : net.layers()) {
    cache.inputs.push_back(x);
    Mat pre = l.weight * x;
    pre.colwise() += l.bias;
    x = activate(pre, l.activation);
    cache.pre.push_back(std::move(pre));
  }
  cache.output = std::move(x);
  return cache;
}

NetGradients backward(const DenseNet& net, const ForwardCache& cache, const Mat& upstream,
                      Mat* input_grad) {
  const auto& layers = net.layers();
  if (cache.pre.size() != layers.size()) throw ShapeError("forward cache does not match network");
  if (upstream.rows() != net.output_dim() || upstream.cols() != cache.output.cols()) {
    throw ShapeError("upstream gradient shape " + std::to_string(upstream.rows()) + "x" +
                     std::to_string(upstream.cols()) + " != output shape " +
                     std::to_string(cache.output.rows()) + "x" +
                     std::to_string(cache.output.cols()));
  }
  NetGradients g;
  g.weight.resize(layers.size());
  g.bias.resize(layers.size());
  Mat delta = upstream;
  for (std::size_t i = layers.size(); i-- > 0;) {
    const auto& l = layers[i];
    if (l.activation == Activation::kElu) {
      delta = delta.cwiseProduct(cache.pre[i].unaryExpr([](double v) { return elu_grad(v); }));
    }
    g.weight[i].noalias() = delta * cache.inputs[i].transpose();
    g.bias[i] = delta.rowwise().sum();
    if (i > 0 || input_grad != nullptr) {
      Mat next = l.weight.transpose() * delta;
      delta = std::move(next);
    }
  }
  if (input_grad != nullptr) *input_grad = std::move(delta);
  return g;
}

NetGradients backward(const DenseNet& net, const Mat& inputs, const Mat& upstream) {
  return backward(net, forward_cached(net, inputs), upstream);
}

// ---------------------------------------------------------------------------

Mat log_softmax(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    const double lse = m + std::log((logits.col(c).array() - m).exp().sum());
    out.col(c) = logits.col(c).array() - lse;
  }
  return out;
}

Mat softmax(const Mat& logits) { return log_softmax(logits).array().exp(); }

Vec softmax_entropy(const Mat& logits) {
  const Mat lp = log_softmax(logits);
  return -(lp.array().exp() * lp.array()).colwise().sum().transpose();
}

Mat softmax_entropy_grad(const Mat& logits) {
  // dH/dl_i = -p_i (log p_i + H)
  const Mat lp = log_softmax(logits);
  const Mat p = lp.array().exp();
  const Vec h = -(p.array() * lp.array()).colwise().sum().transpose();
  Mat g(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    g.col(c) = -(p.col(c).array() * (lp.col(c).array() + h[c]));
  }
  return g;
}

AdamState::AdamState(AdamConfig config, const std::vector<ParamBlock>& params)
    : config_(config) {
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning_rate", "must be > 0");
  for (const auto& p : params) {
    m_.push_back(Vec::Zero(static_cast<Eigen::Index>(p.values.size())));
    v_.push_back(Vec::Zero(static_cast<Eigen::Index>(p.values.size())));
  }
}

void AdamState::apply(const std::vector<ParamBlock>& params, const std::vector<GradBlock>& grads) {
  if (params.size() != m_.size() || grads.size() != params.size()) {
    throw ShapeError("adam: expected " + std::to_string(m_.size()) + " parameter blocks, got " +
                     std::to_string(params.size()) + " params / " + std::to_string(grads.size()) +
                     " grads");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].values.size() != static_cast<std::size_t>(m_[b].size()) ||
        grads[b].size() != params[b].values.size()) {
      throw ShapeError("adam: block '" + params[b].name + "' shape changed");
    }
    for (std::size_t i = 0; i < grads[b].size(); ++i) {
      if (!std::isfinite(grads[b][i])) {
        std::ostringstream os;
        os << "non-finite gradient " << grads[b][i] << " in parameter '" << params[b].name
           << "' at index " << i;
        throw NumericError(os.str());
      }
    }
  }
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = m_[b];
    auto& v = v_[b];
    for (std::size_t i = 0; i < grads[b].size(); ++i) {
      const double g = grads[b][i];
      const auto k = static_cast<Eigen::Index>(i);
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      params[b].values[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

double global_norm(const std::vector<GradBlock>& grads) {
  double s = 0.0;
  for (const auto& g : grads)
    for (double x : g) s += x * x;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------

GradCheckReport grad_check(const std::vector<ParamBlock>& params,
                           const std::function<double()>& loss,
                           const std::vector<GradBlock>& analytic, double step) {
  if (analytic.size() != params.size()) throw ShapeError("grad_check: block count mismatch");
  GradCheckReport report;
  report.step = step;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (analytic[b].size() != params[b].values.size()) {
      throw ShapeError("grad_check: block '" + params[b].name + "' size mismatch");
    }
    for (std::size_t i = 0; i < params[b].values.size(); ++i) {
      double& p = params[b].values[i];
      const double saved = p;
      p = saved + step;
      const double up = loss();
      p = saved - step;
      const double down = loss();
      p = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[b][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error || !std::isfinite(rel)) {
        report.max_rel_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
        report.worst_block = b;
        report.worst_index = i;
      }
    }
  }
  return report;
}

GradCheckReport grad_check(DenseNet& net, const OutputLoss& loss, const Mat& batch, double step) {
  const auto cache = forward_cached(net, batch);
  const auto [value, d_out] = loss(cache.output);
  (void)value;
  const NetGradients g = backward(net, cache, d_out);
  const auto blocks = net.parameter_blocks();
  // Layer-level report: fold the weight/bias block pair into the layer index.
  auto report = grad_check(
      blocks, [&] { return loss(forward_batch(net, batch)).first; }, g.blocks(), step);
  report.worst_block /= 2;
  return report;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const DenseNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    layers.push_back({{"in", l.in_dim()},
                      {"out", l.out_dim()},
                      {"activation", l.activation == Activation::kElu ? "elu" : "identity"},
                      {"weight", w},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return {{"format", kNetFormat}, {"layers", layers}};
}

DenseNet densenet_from_json(const nlohmann::json& doc) {
  if (!doc.contains("format") || doc.at("format") != kNetFormat) {
    throw DomainError(std::string("network checkpoint: expected format '") + kNetFormat + "'");
  }
  std::vector<DenseLayer> layers;
  for (const auto& jl : doc.at("layers")) {
    const int in = jl.at("in").get<int>();
    const int out = jl.at("out").get<int>();
    const auto w = jl.at("weight").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(in) * static_cast<std::size_t>(out) ||
        b.size() != static_cast<std::size_t>(out)) {
      throw ShapeError("network checkpoint: layer arrays do not match declared shape");
    }
    DenseLayer l;
    l.weight.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) l.weight(r, c) = w[static_cast<std::size_t>(r * in + c)];
    l.bias = Eigen::Map<const Vec>(b.data(), out);
    const auto act = jl.at("activation").get<std::string>();
    if (act == "elu") {
      l.activation = Activation::kElu;
    } else if (act == "identity") {
      l.activation = Activation::kIdentity;
    } else {
      throw DomainError("network checkpoint: unknown activation '" + act + "'");
    }
    layers.push_back(std::move(l));
  }
  return DenseNet(std::move(layers));
}

}  // namespace infoprio::nn
