#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "sleepstage/rbm.hpp"

namespace sleepstage {

/// Stacked RBMs with a softmax classification head on top.
struct DbnModel {
  std::vector<RbmParams> layers;
  Eigen::MatrixXd head_weights;  // n_classes x last hidden
  Eigen::VectorXd head_bias;

  Eigen::Index input_dim() const { return layers.front().n_visible(); }
  Eigen::Index num_classes() const { return head_weights.rows(); }

  /// Seeded initialization: every weight ~ Normal(0, 0.01), biases 0.
  static DbnModel init(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden, Eigen::Index num_classes,
                       std::uint64_t seed);

  /// Throws std::invalid_argument when layer dimensions do not chain.
  void validate() const;

  void save(const std::filesystem::path& path) const;
  static DbnModel load(const std::filesystem::path& path);
};

struct DbnTrainConfig {
  std::vector<Eigen::Index> hidden = {200, 200};
  int rbm_batch = 1000;
  int cd_steps = 1;
  int pretrain_epochs = 50;
  int finetune_epochs = 200;
  int finetune_batch = 1000;
  double learning_rate = 0.05;
  double finetune_learning_rate = 0.05;
  double momentum_initial = 0.5;
  double momentum_final = 0.9;
  int momentum_switch_epoch = 5;
  double weight_decay = 2e-4;
  int patience = 10;
  std::uint64_t seed = 1;

  double momentum_at(int epoch) const { return epoch < momentum_switch_epoch ? momentum_initial : momentum_final; }
};

/// Called with each layer's training inputs before that layer is trained.
using PretrainObserver = std::function<void(std::size_t layer, const Eigen::MatrixXd& inputs)>;

/// Greedy layer-wise CD training. `features` holds one sample per column,
/// entries in [0,1]. The head is left untouched.
DbnModel pretrain(DbnModel model, const Eigen::MatrixXd& features, const DbnTrainConfig& cfg,
                  const PretrainObserver& observer = {});

struct DbnGradients {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> weights;      // per layer, same shape as RbmParams::weights
  std::vector<Eigen::VectorXd> hidden_bias;  // per layer
  Eigen::MatrixXd head_weights;
  Eigen::VectorXd head_bias;
};

/// Mean cross-entropy of the deterministic sigmoid network and its exact
/// gradient. Visible biases do not enter the discriminative network.
DbnGradients dbn_loss_gradients(const DbnModel& model, const Eigen::MatrixXd& x, const std::vector<int>& labels);

double dbn_loss(const DbnModel& model, const Eigen::MatrixXd& x, const std::vector<int>& labels);

struct FinetuneStats {
  int epochs_run = 0;
  int best_epoch = -1;
  double best_validation_loss = 0.0;
};

/// Supervised backpropagation through all layers and the head with momentum
/// SGD; early-stops on validation cross-entropy and returns the best model.
/// An empty validation set disables early stopping.
DbnModel finetune(DbnModel model, const Eigen::MatrixXd& train_x, const std::vector<int>& train_labels,
                  const Eigen::MatrixXd& val_x, const std::vector<int>& val_labels, const DbnTrainConfig& cfg,
                  FinetuneStats* stats = nullptr);

/// Top hidden-layer activations.
Eigen::MatrixXd dbn_hidden(const DbnModel& model, const Eigen::MatrixXd& x);

/// Pre-softmax head output.
Eigen::MatrixXd dbn_logits(const DbnModel& model, const Eigen::MatrixXd& x);

/// Softmax posteriors, one column per sample.
Eigen::MatrixXd transform(const DbnModel& model, const Eigen::MatrixXd& x);
Eigen::VectorXd transform(const DbnModel& model, const Eigen::VectorXd& x);

/// argmax of transform, lowest index on ties.
std::vector<int> predict_dbn(const DbnModel& model, const Eigen::MatrixXd& x);

/// Column-wise numerically stable softmax.
Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits);

/// Lowest-index argmax of each column.
std::vector<int> argmax_columns(const Eigen::MatrixXd& m);

}  // namespace sleepstage
