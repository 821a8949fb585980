#include "sleepstage/rbm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sleepstage {

RbmParams RbmParams::random(Eigen::Index n_visible, Eigen::Index n_hidden, Rng& rng, double stddev) {
  RbmParams p = zeros(n_visible, n_hidden);
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index j = 0; j < p.weights.cols(); ++j)
    for (Eigen::Index i = 0; i < p.weights.rows(); ++i) p.weights(i, j) = normal(rng);
  return p;
}

RbmParams RbmParams::zeros(Eigen::Index n_visible, Eigen::Index n_hidden) {
  return {Eigen::MatrixXd::Zero(n_hidden, n_visible), Eigen::VectorXd::Zero(n_visible),
          Eigen::VectorXd::Zero(n_hidden)};
}

bool RbmParams::all_finite() const {
  return weights.allFinite() && visible_bias.allFinite() && hidden_bias.allFinite();
}

RbmVelocity RbmVelocity::zeros_like(const RbmParams& p) {
  return {Eigen::MatrixXd::Zero(p.weights.rows(), p.weights.cols()), Eigen::VectorXd::Zero(p.visible_bias.size()),
          Eigen::VectorXd::Zero(p.hidden_bias.size())};
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& x) {
  return x.unaryExpr([](double a) { return 1.0 / (1.0 + std::exp(-a)); });
}

Eigen::MatrixXd hidden_probs(const RbmParams& rbm, const Eigen::MatrixXd& visible) {
  if (visible.rows() != rbm.n_visible()) throw std::invalid_argument("hidden_probs: visible dimension mismatch");
  Eigen::MatrixXd a = rbm.weights * visible;
  a.colwise() += rbm.hidden_bias;
  return sigmoid(a);
}

Eigen::VectorXd hidden_probs(const RbmParams& rbm, const Eigen::VectorXd& visible) {
  return hidden_probs(rbm, Eigen::MatrixXd(visible)).col(0);
}

Eigen::MatrixXd visible_probs(const RbmParams& rbm, const Eigen::MatrixXd& hidden) {
  if (hidden.rows() != rbm.n_hidden()) throw std::invalid_argument("visible_probs: hidden dimension mismatch");
  Eigen::MatrixXd a = rbm.weights.transpose() * hidden;
  a.colwise() += rbm.visible_bias;
  return sigmoid(a);
}

namespace {

Eigen::MatrixXd sample_bernoulli(const Eigen::MatrixXd& probs, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Eigen::MatrixXd out(probs.rows(), probs.cols());
  for (Eigen::Index j = 0; j < probs.cols(); ++j)
    for (Eigen::Index i = 0; i < probs.rows(); ++i) out(i, j) = uniform(rng) < probs(i, j) ? 1.0 : 0.0;
  return out;
}

}  // namespace

void cd_update(RbmParams& rbm, RbmVelocity& velocity, const Eigen::MatrixXd& batch, const CdConfig& cfg, Rng& rng) {
  if (batch.cols() == 0) throw std::invalid_argument("cd_update: empty batch");
  if (cfg.cd_steps < 1) throw std::invalid_argument("cd_update: cd_steps must be >= 1");
  const double inv_n = 1.0 / static_cast<double>(batch.cols());

  const Eigen::MatrixXd h0 = sample_bernoulli(hidden_probs(rbm, batch), rng);
  Eigen::MatrixXd h = h0;
  Eigen::MatrixXd vk;
  Eigen::MatrixXd hk;
  for (int step = 0; step < cfg.cd_steps; ++step) {
    vk = visible_probs(rbm, h);
    hk = hidden_probs(rbm, vk);
    if (step + 1 < cfg.cd_steps) h = sample_bernoulli(hk, rng);
  }

  const Eigen::MatrixXd grad_w = (h0 * batch.transpose() - hk * vk.transpose()) * inv_n;
  const Eigen::VectorXd grad_vb = (batch - vk).rowwise().sum() * inv_n;
  const Eigen::VectorXd grad_hb = (h0 - hk).rowwise().sum() * inv_n;

  velocity.weights = cfg.momentum * velocity.weights + cfg.learning_rate * (grad_w - cfg.weight_decay * rbm.weights);
  velocity.visible_bias = cfg.momentum * velocity.visible_bias + cfg.learning_rate * grad_vb;
  velocity.hidden_bias = cfg.momentum * velocity.hidden_bias + cfg.learning_rate * grad_hb;
  rbm.weights += velocity.weights;
  rbm.visible_bias += velocity.visible_bias;
  rbm.hidden_bias += velocity.hidden_bias;
}

double reconstruction_cross_entropy(const RbmParams& rbm, const Eigen::MatrixXd& data) {
  if (data.cols() == 0) return 0.0;
  const Eigen::MatrixXd recon = visible_probs(rbm, hidden_probs(rbm, data));
  constexpr double kTiny = 1e-12;
  double ce = 0.0;
  for (Eigen::Index j = 0; j < data.cols(); ++j)
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      const double r = std::clamp(recon(i, j), kTiny, 1.0 - kTiny);
      ce -= data(i, j) * std::log(r) + (1.0 - data(i, j)) * std::log(1.0 - r);
    }
  return ce / static_cast<double>(data.cols());
}

}  // namespace sleepstage
