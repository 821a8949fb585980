#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sleepstage/rmsprop.hpp"

namespace sleepstage {

/// Gate order inside the stacked parameter blocks.
enum class Gate : int { Input = 0, Forget = 1, Cell = 2, Output = 3 };
inline constexpr int kNumGates = 4;

/// One LSTM layer. The four gates are stacked row-wise in the order
/// input, forget, cell, output: rows [k*units, (k+1)*units) belong to gate k.
struct LstmLayerParams {
  Eigen::MatrixXd input_weights;      // 4*units x in_dim
  Eigen::MatrixXd recurrent_weights;  // 4*units x units
  Eigen::VectorXd bias;               // 4*units

  Eigen::Index units() const { return recurrent_weights.cols(); }
  Eigen::Index in_dim() const { return input_weights.cols(); }

  static LstmLayerParams zeros(Eigen::Index in_dim, Eigen::Index units);
};

/// All trainable tensors of a stacked LSTM classifier. Also used as the
/// gradient container.
struct LstmWeights {
  std::vector<LstmLayerParams> layers;
  Eigen::MatrixXd head_weights;  // n_classes x last units
  Eigen::VectorXd head_bias;

  /// Zero tensors of identical shape.
  LstmWeights zeros_like() const;

  /// Flat views over every tensor in a fixed order.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
};

struct StackedLstm {
  LstmWeights weights;
  int seq_len = 5;

  Eigen::Index in_dim() const { return weights.layers.front().in_dim(); }
  Eigen::Index num_classes() const { return weights.head_weights.rows(); }

  /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for input, recurrent and head
  /// weights; biases 0 except the forget gate at 1.0.
  static StackedLstm init(Eigen::Index in_dim, const std::vector<Eigen::Index>& units, Eigen::Index num_classes,
                          int seq_len, std::uint64_t seed);

  void validate() const;

  void save(const std::filesystem::path& path) const;
  static StackedLstm load(const std::filesystem::path& path);
};

/// seq_len consecutive per-epoch vectors (one per column) and the label of
/// the last one.
struct SequenceWindow {
  Eigen::MatrixXd inputs;  // in_dim x seq_len
  int label = 0;
  std::size_t end_index = 0;  // position of the final epoch in the source sequence
};

struct CellState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;
};

CellState cell_forward(const LstmLayerParams& layer, const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                       const Eigen::VectorXd& c_prev);

/// Class probabilities for one window. Throws on input dimension or
/// sequence length mismatch.
Eigen::VectorXd forward(const StackedLstm& model, const SequenceWindow& window);

/// Batched forward; returns n_classes x batch probabilities.
Eigen::MatrixXd forward_batch(const StackedLstm& model, std::span<const SequenceWindow> windows);

struct LstmGradients {
  double loss = 0.0;
  LstmWeights grads;
};

/// Mean cross-entropy over the batch and its exact gradient by
/// backpropagation through time over the whole window.
LstmGradients bptt_gradients(const StackedLstm& model, std::span<const SequenceWindow> batch);

double lstm_loss(const StackedLstm& model, std::span<const SequenceWindow> batch);

/// Stride-1 windows; the window ending at t carries labels[t]. Returns an
/// empty list (and logs a warning) when the sequence is shorter than seq_len.
std::vector<SequenceWindow> make_windows(const Eigen::MatrixXd& sequence, const std::vector<int>& labels,
                                         int seq_len);

struct SequencePrediction {
  std::vector<int> predicted;
  std::vector<bool> padded;  // true where the prediction was copied from the first window
  Eigen::MatrixXd probabilities;  // n_classes x T
};

/// One prediction per epoch of a whole recording. The first seq_len-1 epochs
/// have no full window and reuse the first window's prediction. Sequences
/// shorter than seq_len are left-padded with their first vector.
SequencePrediction predict_sequence(const StackedLstm& model, const Eigen::MatrixXd& sequence);

struct LstmTrainConfig {
  std::vector<Eigen::Index> units = {128, 64, 32};
  int seq_len = 5;
  int epochs = 100;
  int batch = 500;
  RmsPropConfig optimizer{};
  std::uint64_t seed = 1;
};

struct LstmTrainStats {
  int best_epoch = -1;
  double best_validation_accuracy = 0.0;
  std::vector<double> train_loss;
};

/// RMSProp on shuffled mini-batches; keeps the parameters of the epoch with
/// the best validation accuracy (earliest on ties). Without validation
/// windows the final parameters are returned.
StackedLstm train(StackedLstm model, std::span<const SequenceWindow> train_windows,
                  std::span<const SequenceWindow> val_windows, const LstmTrainConfig& cfg,
                  LstmTrainStats* stats = nullptr);

double window_accuracy(const StackedLstm& model, std::span<const SequenceWindow> windows);

}  // namespace sleepstage
