#include "sleepstage/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "model_io.hpp"
#include "sleepstage/dbn.hpp"
#include "sleepstage/log.hpp"
#include "sleepstage/random.hpp"

namespace sleepstage {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd logistic(const MatrixXd& a) {
  return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

struct LayerCache {
  std::vector<MatrixXd> input;  // per t, in_dim x B
  std::vector<MatrixXd> i, f, g, o, c, h, tanh_c;
};

struct ForwardPass {
  std::vector<LayerCache> layers;
  MatrixXd probs;  // n_classes x B
};

// Time-major inputs: element t is in_dim x B.
std::vector<MatrixXd> gather_inputs(std::span<const SequenceWindow> all, std::span<const std::size_t> idx,
                                    Index in_dim, int seq_len) {
  std::vector<MatrixXd> xs(static_cast<std::size_t>(seq_len), MatrixXd(in_dim, static_cast<Index>(idx.size())));
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& w = all[idx[b]];
    if (w.inputs.rows() != in_dim || w.inputs.cols() != seq_len)
      throw std::invalid_argument("lstm: window shape " + std::to_string(w.inputs.rows()) + "x" +
                                  std::to_string(w.inputs.cols()) + " does not match model " + std::to_string(in_dim) +
                                  "x" + std::to_string(seq_len));
    for (int t = 0; t < seq_len; ++t) xs[static_cast<std::size_t>(t)].col(static_cast<Index>(b)) = w.inputs.col(t);
  }
  return xs;
}

ForwardPass run_forward(const StackedLstm& model, std::vector<MatrixXd> xs) {
  const Index batch = xs.front().cols();
  const auto T = xs.size();
  ForwardPass pass;
  for (const auto& layer : model.weights.layers) {
    const Index H = layer.units();
    LayerCache cache;
    cache.input = std::move(xs);
    MatrixXd h = MatrixXd::Zero(H, batch);
    MatrixXd c = MatrixXd::Zero(H, batch);
    for (std::size_t t = 0; t < T; ++t) {
      MatrixXd a = layer.input_weights * cache.input[t];
      a.noalias() += layer.recurrent_weights * h;
      a.colwise() += layer.bias;
      MatrixXd gi = logistic(a.middleRows(0, H));
      MatrixXd gf = logistic(a.middleRows(H, H));
      MatrixXd gg = a.middleRows(2 * H, H).array().tanh().matrix();
      MatrixXd go = logistic(a.middleRows(3 * H, H));
      c = (gf.array() * c.array() + gi.array() * gg.array()).matrix();
      MatrixXd tc = c.array().tanh().matrix();
      h = (go.array() * tc.array()).matrix();
      cache.i.push_back(std::move(gi));
      cache.f.push_back(std::move(gf));
      cache.g.push_back(std::move(gg));
      cache.o.push_back(std::move(go));
      cache.c.push_back(c);
      cache.tanh_c.push_back(std::move(tc));
      cache.h.push_back(h);
    }
    xs = cache.h;
    pass.layers.push_back(std::move(cache));
  }
  MatrixXd logits = model.weights.head_weights * pass.layers.back().h.back();
  logits.colwise() += model.weights.head_bias;
  pass.probs = softmax(logits);
  return pass;
}

double mean_ce(const MatrixXd& probs, std::span<const int> labels) {
  double loss = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b)
    loss -= std::log(std::max(probs(labels[b], static_cast<Index>(b)), 1e-300));
  return loss / static_cast<double>(labels.size());
}

LstmGradients backward(const StackedLstm& model, const ForwardPass& pass, std::span<const int> labels) {
  const auto B = static_cast<Index>(labels.size());
  LstmGradients out;
  out.loss = mean_ce(pass.probs, labels);
  out.grads = model.weights.zeros_like();

  MatrixXd dz = pass.probs;
  for (Index b = 0; b < B; ++b) dz(labels[static_cast<std::size_t>(b)], b) -= 1.0;
  dz /= static_cast<double>(B);
  const MatrixXd& h_last = pass.layers.back().h.back();
  out.grads.head_weights = dz * h_last.transpose();
  out.grads.head_bias = dz.rowwise().sum();

  const std::size_t T = pass.layers.front().h.size();
  // Gradient w.r.t. each time step's output of the layer above; the top
  // layer only receives it at the final step.
  std::vector<MatrixXd> dh_above(T, MatrixXd::Zero(h_last.rows(), B));
  dh_above.back() = model.weights.head_weights.transpose() * dz;

  for (std::size_t l = model.weights.layers.size(); l-- > 0;) {
    const auto& layer = model.weights.layers[l];
    const auto& cache = pass.layers[l];
    auto& g = out.grads.layers[l];
    const Index H = layer.units();
    MatrixXd dh_next = MatrixXd::Zero(H, B);
    MatrixXd dc_next = MatrixXd::Zero(H, B);
    std::vector<MatrixXd> dx(T);
    MatrixXd da(4 * H, B);
    for (std::size_t t = T; t-- > 0;) {
      const MatrixXd dh = dh_above[t] + dh_next;
      const auto& gi = cache.i[t].array();
      const auto& gf = cache.f[t].array();
      const auto& gg = cache.g[t].array();
      const auto& go = cache.o[t].array();
      const auto& tc = cache.tanh_c[t].array();
      const MatrixXd dc = (dc_next.array() + dh.array() * go * (1.0 - tc * tc)).matrix();
      const MatrixXd c_prev = t > 0 ? cache.c[t - 1] : MatrixXd::Zero(H, B);
      da.middleRows(0, H) = (dc.array() * gg * gi * (1.0 - gi)).matrix();
      da.middleRows(H, H) = (dc.array() * c_prev.array() * gf * (1.0 - gf)).matrix();
      da.middleRows(2 * H, H) = (dc.array() * gi * (1.0 - gg * gg)).matrix();
      da.middleRows(3 * H, H) = (dh.array() * tc * go * (1.0 - go)).matrix();
      dc_next = (dc.array() * gf).matrix();

      g.input_weights.noalias() += da * cache.input[t].transpose();
      if (t > 0) g.recurrent_weights.noalias() += da * cache.h[t - 1].transpose();
      g.bias += da.rowwise().sum();
      if (l > 0) dx[t] = layer.input_weights.transpose() * da;
      dh_next = layer.recurrent_weights.transpose() * da;
    }
    if (l > 0) dh_above = std::move(dx);
  }
  return out;
}

void check_window(const StackedLstm& model, const SequenceWindow& w) {
  if (w.inputs.rows() != model.in_dim())
    throw std::invalid_argument("lstm: input dimension " + std::to_string(w.inputs.rows()) + " != model " +
                                std::to_string(model.in_dim()));
  if (w.inputs.cols() != model.seq_len)
    throw std::invalid_argument("lstm: window length " + std::to_string(w.inputs.cols()) + " != model seq_len " +
                                std::to_string(model.seq_len));
}

std::vector<int> window_labels(std::span<const SequenceWindow> all, std::span<const std::size_t> idx) {
  std::vector<int> labels(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b) labels[b] = all[idx[b]].label;
  return labels;
}

void check_labels(const StackedLstm& model, std::span<const int> labels) {
  for (int y : labels)
    if (y < 0 || y >= model.num_classes()) throw std::invalid_argument("lstm: label out of range");
}

}  // namespace

LstmLayerParams LstmLayerParams::zeros(Index in_dim, Index units) {
  return {MatrixXd::Zero(4 * units, in_dim), MatrixXd::Zero(4 * units, units), VectorXd::Zero(4 * units)};
}

LstmWeights LstmWeights::zeros_like() const {
  LstmWeights z;
  for (const auto& l : layers) z.layers.push_back(LstmLayerParams::zeros(l.in_dim(), l.units()));
  z.head_weights = MatrixXd::Zero(head_weights.rows(), head_weights.cols());
  z.head_bias = VectorXd::Zero(head_bias.size());
  return z;
}

std::vector<std::span<double>> LstmWeights::blocks() {
  std::vector<std::span<double>> out;
  auto add = [&](auto& m) { out.emplace_back(m.data(), static_cast<std::size_t>(m.size())); };
  for (auto& l : layers) {
    add(l.input_weights);
    add(l.recurrent_weights);
    add(l.bias);
  }
  add(head_weights);
  add(head_bias);
  return out;
}

std::vector<std::span<const double>> LstmWeights::blocks() const {
  std::vector<std::span<const double>> out;
  for (auto s : const_cast<LstmWeights*>(this)->blocks()) out.emplace_back(s.data(), s.size());
  return out;
}

StackedLstm StackedLstm::init(Index in_dim, const std::vector<Index>& units, Index num_classes, int seq_len,
                              std::uint64_t seed) {
  if (units.empty()) throw std::invalid_argument("lstm needs at least one layer");
  if (seq_len < 1) throw std::invalid_argument("lstm seq_len must be >= 1");
  Rng rng(seed);
  auto fill = [&rng](MatrixXd& m, double fan_in) {
    const double r = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> u(-r, r);
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
  };
  StackedLstm model;
  model.seq_len = seq_len;
  Index prev = in_dim;
  for (Index h : units) {
    auto layer = LstmLayerParams::zeros(prev, h);
    fill(layer.input_weights, static_cast<double>(prev));
    fill(layer.recurrent_weights, static_cast<double>(h));
    layer.bias.segment(h, h).setOnes();
    model.weights.layers.push_back(std::move(layer));
    prev = h;
  }
  model.weights.head_weights.resize(num_classes, prev);
  fill(model.weights.head_weights, static_cast<double>(prev));
  model.weights.head_bias = VectorXd::Zero(num_classes);
  return model;
}

void StackedLstm::validate() const {
  const auto& layers = weights.layers;
  if (layers.empty()) throw std::invalid_argument("lstm has no layers");
  if (seq_len < 1) throw std::invalid_argument("lstm seq_len must be >= 1");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& p = layers[l];
    const Index H = p.units();
    if (p.recurrent_weights.rows() != 4 * H || p.input_weights.rows() != 4 * H || p.bias.size() != 4 * H)
      throw std::invalid_argument("lstm layer " + std::to_string(l) + ": gate block shape mismatch");
    if (l > 0 && p.in_dim() != layers[l - 1].units())
      throw std::invalid_argument("lstm layer " + std::to_string(l) + ": dimensions do not chain");
  }
  if (weights.head_weights.cols() != layers.back().units() || weights.head_bias.size() != weights.head_weights.rows())
    throw std::invalid_argument("lstm head shape mismatch");
}

void StackedLstm::save(const std::filesystem::path& path) const {
  validate();
  detail::FileCloser f(std::fopen(path.string().c_str(), "w"));
  if (!f.get()) throw std::runtime_error("cannot write " + path.string());
  std::fprintf(f.get(), "lstm v1 %td", static_cast<std::ptrdiff_t>(in_dim()));
  for (const auto& l : weights.layers) std::fprintf(f.get(), " %td", static_cast<std::ptrdiff_t>(l.units()));
  std::fprintf(f.get(), " %td %d\n", static_cast<std::ptrdiff_t>(num_classes()), seq_len);
  for (const auto& l : weights.layers) {
    const Index H = l.units();
    for (int gate = 0; gate < kNumGates; ++gate) {
      detail::write_matrix(f.get(), l.input_weights.middleRows(gate * H, H));
      detail::write_matrix(f.get(), l.recurrent_weights.middleRows(gate * H, H));
      detail::write_vector(f.get(), l.bias.segment(gate * H, H));
    }
  }
  detail::write_matrix(f.get(), weights.head_weights);
  detail::write_vector(f.get(), weights.head_bias);
}

StackedLstm StackedLstm::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, version;
  hs >> magic >> version;
  if (magic != "lstm" || version != "v1") throw std::runtime_error(path.string() + ": not an 'lstm v1' model");
  std::vector<Index> dims;
  for (Index d; hs >> d;) dims.push_back(d);
  if (dims.size() < 4) throw std::runtime_error(path.string() + ": lstm header too short");
  StackedLstm model;
  model.seq_len = static_cast<int>(dims.back());
  dims.pop_back();
  const Index n_classes = dims.back();
  for (std::size_t l = 0; l + 2 < dims.size(); ++l) {
    const Index in_dim = dims[l], H = dims[l + 1];
    auto layer = LstmLayerParams::zeros(in_dim, H);
    for (int gate = 0; gate < kNumGates; ++gate) {
      layer.input_weights.middleRows(gate * H, H) = detail::read_matrix(in, H, in_dim, "lstm input weights");
      layer.recurrent_weights.middleRows(gate * H, H) = detail::read_matrix(in, H, H, "lstm recurrent weights");
      layer.bias.segment(gate * H, H) = detail::read_vector(in, H, "lstm bias");
    }
    model.weights.layers.push_back(std::move(layer));
  }
  model.weights.head_weights = detail::read_matrix(in, n_classes, dims[dims.size() - 2], "lstm head weights");
  model.weights.head_bias = detail::read_vector(in, n_classes, "lstm head bias");
  model.validate();
  return model;
}

CellState cell_forward(const LstmLayerParams& layer, const VectorXd& x, const VectorXd& h_prev,
                       const VectorXd& c_prev) {
  const Index H = layer.units();
  if (x.size() != layer.in_dim() || h_prev.size() != H || c_prev.size() != H)
    throw std::invalid_argument("cell_forward: dimension mismatch");
  const VectorXd a = layer.input_weights * x + layer.recurrent_weights * h_prev + layer.bias;
  const VectorXd i = logistic(a.segment(0, H));
  const VectorXd f = logistic(a.segment(H, H));
  const VectorXd g = a.segment(2 * H, H).array().tanh().matrix();
  const VectorXd o = logistic(a.segment(3 * H, H));
  CellState s;
  s.c = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
  s.h = (o.array() * s.c.array().tanh()).matrix();
  return s;
}

Eigen::VectorXd forward(const StackedLstm& model, const SequenceWindow& window) {
  check_window(model, window);
  return forward_batch(model, std::span<const SequenceWindow>(&window, 1)).col(0);
}

Eigen::MatrixXd forward_batch(const StackedLstm& model, std::span<const SequenceWindow> windows) {
  if (windows.empty()) return MatrixXd(model.num_classes(), 0);
  for (const auto& w : windows) check_window(model, w);
  std::vector<std::size_t> idx(windows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return run_forward(model, gather_inputs(windows, idx, model.in_dim(), model.seq_len)).probs;
}

LstmGradients bptt_gradients(const StackedLstm& model, std::span<const SequenceWindow> batch) {
  if (batch.empty()) throw std::invalid_argument("bptt_gradients: empty batch");
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto labels = window_labels(batch, idx);
  check_labels(model, labels);
  const auto pass = run_forward(model, gather_inputs(batch, idx, model.in_dim(), model.seq_len));
  return backward(model, pass, labels);
}

double lstm_loss(const StackedLstm& model, std::span<const SequenceWindow> batch) {
  if (batch.empty()) return 0.0;
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto labels = window_labels(batch, idx);
  check_labels(model, labels);
  return mean_ce(forward_batch(model, batch), labels);
}

std::vector<SequenceWindow> make_windows(const MatrixXd& sequence, const std::vector<int>& labels, int seq_len) {
  if (seq_len < 1) throw std::invalid_argument("make_windows: seq_len must be >= 1");
  if (static_cast<std::size_t>(sequence.cols()) != labels.size())
    throw std::invalid_argument("make_windows: vector/label count mismatch");
  std::vector<SequenceWindow> out;
  const auto T = static_cast<std::size_t>(sequence.cols());
  const auto L = static_cast<std::size_t>(seq_len);
  if (T < L) {
    log_warn("make_windows: sequence of " + std::to_string(T) + " epochs is shorter than seq_len " +
             std::to_string(seq_len) + "; no windows");
    return out;
  }
  out.reserve(T - L + 1);
  for (std::size_t end = L - 1; end < T; ++end) {
    SequenceWindow w;
    w.inputs = sequence.middleCols(static_cast<Index>(end + 1 - L), seq_len);
    w.label = labels[end];
    w.end_index = end;
    out.push_back(std::move(w));
  }
  return out;
}

SequencePrediction predict_sequence(const StackedLstm& model, const MatrixXd& sequence) {
  const Index T = sequence.cols();
  if (T == 0) throw std::invalid_argument("predict_sequence: empty sequence");
  if (sequence.rows() != model.in_dim()) throw std::invalid_argument("predict_sequence: input dimension mismatch");
  const Index L = model.seq_len;
  MatrixXd padded_seq = sequence;
  Index pad = 0;
  if (T < L) {
    pad = L - T;
    padded_seq.resize(sequence.rows(), L);
    for (Index k = 0; k < pad; ++k) padded_seq.col(k) = sequence.col(0);
    padded_seq.rightCols(T) = sequence;
  }
  const std::vector<int> dummy(static_cast<std::size_t>(padded_seq.cols()), 0);
  const auto windows = make_windows(padded_seq, dummy, model.seq_len);
  const MatrixXd probs = forward_batch(model, windows);

  SequencePrediction out;
  out.probabilities.resize(model.num_classes(), T);
  out.predicted.resize(static_cast<std::size_t>(T));
  out.padded.assign(static_cast<std::size_t>(T), false);
  const auto preds = argmax_columns(probs);
  for (Index t = 0; t < T; ++t) {
    // Window k ends at padded position k + L - 1, i.e. original epoch k + L - 1 - pad.
    const Index k = std::max<Index>(0, t + pad - (L - 1));
    out.probabilities.col(t) = probs.col(k);
    out.predicted[static_cast<std::size_t>(t)] = preds[static_cast<std::size_t>(k)];
    out.padded[static_cast<std::size_t>(t)] = t + pad < L - 1;
  }
  return out;
}

double window_accuracy(const StackedLstm& model, std::span<const SequenceWindow> windows) {
  if (windows.empty()) return 0.0;
  const auto preds = argmax_columns(forward_batch(model, windows));
  std::size_t correct = 0;
  for (std::size_t b = 0; b < windows.size(); ++b)
    if (preds[b] == windows[b].label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(windows.size());
}

StackedLstm train(StackedLstm model, std::span<const SequenceWindow> train_windows,
                  std::span<const SequenceWindow> val_windows, const LstmTrainConfig& cfg, LstmTrainStats* stats) {
  model.validate();
  if (train_windows.empty()) throw std::invalid_argument("lstm train: empty training set");
  if (cfg.epochs < 1 || cfg.batch < 1) throw std::invalid_argument("lstm train: epochs and batch must be >= 1");
  for (const auto& w : train_windows) check_window(model, w);
  for (const auto& w : val_windows) check_window(model, w);

  RmsProp optimizer(cfg.optimizer);
  Rng rng(derive_seed(cfg.seed, {0x4c53ULL}));
  std::vector<std::size_t> order(train_windows.size());
  LstmTrainStats local;
  StackedLstm best = model;
  double best_acc = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch));
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const auto labels = window_labels(train_windows, idx);
      check_labels(model, labels);
      const auto pass = run_forward(model, gather_inputs(train_windows, idx, model.in_dim(), model.seq_len));
      const auto g = backward(model, pass, labels);
      optimizer.step(model.weights.blocks(), g.grads.blocks());
      epoch_loss += g.loss * static_cast<double>(idx.size());
    }
    local.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    for (auto block : model.weights.blocks())
      for (double v : block)
        if (!std::isfinite(v)) throw std::runtime_error("lstm train: non-finite parameters");

    if (!val_windows.empty()) {
      const double acc = window_accuracy(model, val_windows);
      if (acc > best_acc) {
        best_acc = acc;
        best = model;
        local.best_epoch = epoch;
      }
    }
  }
  if (val_windows.empty()) {
    best = model;
    local.best_epoch = cfg.epochs - 1;
    best_acc = 0.0;
  }
  local.best_validation_accuracy = best_acc;
  if (stats) *stats = std::move(local);
  return best;
}

}  // namespace sleepstage
