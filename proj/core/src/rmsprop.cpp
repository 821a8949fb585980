#include "sleepstage/rmsprop.hpp"

#include <cmath>
#include <stdexcept>

namespace sleepstage {

void rmsprop_step(std::span<double> params, std::span<const double> grads, std::span<double> mean_square,
                  const RmsPropConfig& cfg) {
  if (params.size() != grads.size() || params.size() != mean_square.size())
    throw std::invalid_argument("rmsprop_step: shape mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    mean_square[i] = cfg.rho * mean_square[i] + (1.0 - cfg.rho) * g * g;
    params[i] -= cfg.learning_rate * g / (std::sqrt(mean_square[i]) + cfg.epsilon);
  }
}

void RmsProp::step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("RmsProp::step: block count mismatch");
  if (mean_square_.empty()) {
    for (const auto& p : params) mean_square_.emplace_back(p.size(), 0.0);
  }
  if (mean_square_.size() != params.size()) throw std::invalid_argument("RmsProp::step: block count changed");
  for (std::size_t b = 0; b < params.size(); ++b) rmsprop_step(params[b], grads[b], mean_square_[b], cfg_);
}

}  // namespace sleepstage
