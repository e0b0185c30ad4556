#pragma once

#include "infoprio/nn.hpp"

namespace infoprio::agent {

/// Categorical policy over latent states: softmax(net(z) / temperature).
struct Policy {
  nn::DenseNet net;
  double temperature = 1.0;

  Mat logits(const Mat& z) const { return nn::forward_batch(net, z) / temperature; }
  Mat probs(const Mat& z) const { return nn::softmax(logits(z)); }
  Vec entropy(const Mat& z) const { return nn::softmax_entropy(logits(z)); }
  int num_actions() const { return net.output_dim(); }
};

}  // namespace infoprio::agent
