#pragma once

#include <Eigen/Dense>

#include "sleepstage/random.hpp"

namespace sleepstage {

/// Bernoulli-Bernoulli RBM. Batches are column-major: one sample per column.
struct RbmParams {
  Eigen::MatrixXd weights;  // n_hidden x n_visible
  Eigen::VectorXd visible_bias;
  Eigen::VectorXd hidden_bias;

  Eigen::Index n_visible() const { return weights.cols(); }
  Eigen::Index n_hidden() const { return weights.rows(); }

  /// Weights ~ Normal(0, stddev), biases 0.
  static RbmParams random(Eigen::Index n_visible, Eigen::Index n_hidden, Rng& rng, double stddev = 0.01);
  static RbmParams zeros(Eigen::Index n_visible, Eigen::Index n_hidden);

  bool all_finite() const;
};

/// Momentum buffers with the same shapes as RbmParams.
struct RbmVelocity {
  Eigen::MatrixXd weights;
  Eigen::VectorXd visible_bias;
  Eigen::VectorXd hidden_bias;

  static RbmVelocity zeros_like(const RbmParams& p);
};

struct CdConfig {
  double learning_rate = 0.05;
  double momentum = 0.5;
  double weight_decay = 2e-4;
  int cd_steps = 1;
};

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& x);

/// sigma(W v + b_hid), column-wise.
Eigen::MatrixXd hidden_probs(const RbmParams& rbm, const Eigen::MatrixXd& visible);
Eigen::VectorXd hidden_probs(const RbmParams& rbm, const Eigen::VectorXd& visible);

/// sigma(W^T h + b_vis), column-wise.
Eigen::MatrixXd visible_probs(const RbmParams& rbm, const Eigen::MatrixXd& hidden);

/// One contrastive-divergence update on a batch.
///
/// Runs `cd_steps` Gibbs steps starting from the data: hidden states are
/// sampled, visible reconstructions are mean-field, and the final hidden
/// statistics are probabilities. The update is
///   v <- momentum * v + lr * (<h0 v0^T> - <hk vk^T> - weight_decay * W)
///   W <- W + v
/// with batch means in the angle brackets (biases likewise, without decay).
void cd_update(RbmParams& rbm, RbmVelocity& velocity, const Eigen::MatrixXd& batch, const CdConfig& cfg, Rng& rng);

/// Mean over samples of the binary cross-entropy between the data and its
/// deterministic mean-field reconstruction v -> p(h|v) -> p(v|h).
double reconstruction_cross_entropy(const RbmParams& rbm, const Eigen::MatrixXd& data);

}  // namespace sleepstage
