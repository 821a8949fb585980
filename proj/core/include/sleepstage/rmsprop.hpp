#pragma once

#include <span>
#include <vector>

namespace sleepstage {

struct RmsPropConfig {
  double learning_rate = 0.001;
  double rho = 0.9;
  double epsilon = 1e-8;
};

/// Elementwise update on one parameter block:
///   s <- rho * s + (1 - rho) * g^2
///   theta <- theta - lr * g / (sqrt(s) + eps)
void rmsprop_step(std::span<double> params, std::span<const double> grads, std::span<double> mean_square,
                  const RmsPropConfig& cfg);

/// Owns the running mean-square state for a fixed list of parameter blocks.
class RmsProp {
 public:
  explicit RmsProp(RmsPropConfig cfg = {}) : cfg_(cfg) {}

  /// Block shapes are captured on the first call and must not change.
  void step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads);

  const RmsPropConfig& config() const { return cfg_; }

 private:
  RmsPropConfig cfg_;
  std::vector<std::vector<double>> mean_square_;
};

}  // namespace sleepstage
