#include "sleepstage/dbn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "model_io.hpp"
#include "sleepstage/log.hpp"

namespace sleepstage {

namespace {

struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // [0] = input, [l+1] = layer l output
  Eigen::MatrixXd probs;
};

ForwardCache forward_all(const DbnModel& model, const Eigen::MatrixXd& x) {
  ForwardCache cache;
  cache.activations.push_back(x);
  for (const auto& layer : model.layers) cache.activations.push_back(hidden_probs(layer, cache.activations.back()));
  Eigen::MatrixXd logits = model.head_weights * cache.activations.back();
  logits.colwise() += model.head_bias;
  cache.probs = softmax(logits);
  return cache;
}

double mean_cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& labels) {
  double loss = 0.0;
  for (std::size_t n = 0; n < labels.size(); ++n)
    loss -= std::log(std::max(probs(labels[n], static_cast<Eigen::Index>(n)), 1e-300));
  return loss / static_cast<double>(labels.size());
}

void check_labels(const DbnModel& model, const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  if (x.rows() != model.input_dim()) throw std::invalid_argument("dbn: input dimension mismatch");
  if (static_cast<std::size_t>(x.cols()) != labels.size())
    throw std::invalid_argument("dbn: sample/label count mismatch");
  for (int y : labels)
    if (y < 0 || y >= model.num_classes()) throw std::invalid_argument("dbn: label out of range");
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& x, const std::vector<std::size_t>& order, std::size_t begin,
                               std::size_t end) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t k = begin; k < end; ++k) out.col(static_cast<Eigen::Index>(k - begin)) = x.col(order[k]);
  return out;
}

// Parameter-shaped buffers for momentum SGD during fine-tuning.
struct DbnVelocity {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> hidden_bias;
  Eigen::MatrixXd head_weights;
  Eigen::VectorXd head_bias;

  explicit DbnVelocity(const DbnModel& m) {
    for (const auto& l : m.layers) {
      weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
      hidden_bias.push_back(Eigen::VectorXd::Zero(l.hidden_bias.size()));
    }
    head_weights = Eigen::MatrixXd::Zero(m.head_weights.rows(), m.head_weights.cols());
    head_bias = Eigen::VectorXd::Zero(m.head_bias.size());
  }
};

bool model_finite(const DbnModel& m) {
  for (const auto& l : m.layers)
    if (!l.all_finite()) return false;
  return m.head_weights.allFinite() && m.head_bias.allFinite();
}

}  // namespace

DbnModel DbnModel::init(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden, Eigen::Index num_classes,
                        std::uint64_t seed) {
  if (hidden.empty()) throw std::invalid_argument("dbn needs at least one hidden layer");
  Rng rng(seed);
  DbnModel m;
  Eigen::Index prev = input_dim;
  for (Eigen::Index h : hidden) {
    m.layers.push_back(RbmParams::random(prev, h, rng));
    prev = h;
  }
  std::normal_distribution<double> normal(0.0, 0.01);
  m.head_weights.resize(num_classes, prev);
  for (Eigen::Index j = 0; j < m.head_weights.cols(); ++j)
    for (Eigen::Index i = 0; i < m.head_weights.rows(); ++i) m.head_weights(i, j) = normal(rng);
  m.head_bias = Eigen::VectorXd::Zero(num_classes);
  return m;
}

void DbnModel::validate() const {
  if (layers.empty()) throw std::invalid_argument("dbn has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& p = layers[l];
    if (p.visible_bias.size() != p.n_visible() || p.hidden_bias.size() != p.n_hidden())
      throw std::invalid_argument("dbn layer " + std::to_string(l) + ": bias shape mismatch");
    if (l > 0 && p.n_visible() != layers[l - 1].n_hidden())
      throw std::invalid_argument("dbn layer " + std::to_string(l) + ": dimensions do not chain");
  }
  if (head_weights.cols() != layers.back().n_hidden() || head_bias.size() != head_weights.rows())
    throw std::invalid_argument("dbn head shape mismatch");
}

void DbnModel::save(const std::filesystem::path& path) const {
  validate();
  detail::FileCloser f(std::fopen(path.string().c_str(), "w"));
  if (!f.get()) throw std::runtime_error("cannot write " + path.string());
  std::fprintf(f.get(), "dbn v1 %td", static_cast<std::ptrdiff_t>(input_dim()));
  for (const auto& l : layers) std::fprintf(f.get(), " %td", static_cast<std::ptrdiff_t>(l.n_hidden()));
  std::fprintf(f.get(), " %td\n", static_cast<std::ptrdiff_t>(num_classes()));
  for (const auto& l : layers) {
    detail::write_matrix(f.get(), l.weights);
    detail::write_vector(f.get(), l.visible_bias);
    detail::write_vector(f.get(), l.hidden_bias);
  }
  detail::write_matrix(f.get(), head_weights);
  detail::write_vector(f.get(), head_bias);
}

DbnModel DbnModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, version;
  hs >> magic >> version;
  if (magic != "dbn" || version != "v1") throw std::runtime_error(path.string() + ": not a 'dbn v1' model");
  std::vector<Eigen::Index> dims;
  for (Eigen::Index d; hs >> d;) dims.push_back(d);
  if (dims.size() < 3) throw std::runtime_error(path.string() + ": dbn header needs input, hidden and output sizes");
  DbnModel m;
  for (std::size_t l = 0; l + 2 < dims.size(); ++l) {
    RbmParams p;
    p.weights = detail::read_matrix(in, dims[l + 1], dims[l], "dbn weights");
    p.visible_bias = detail::read_vector(in, dims[l], "dbn visible bias");
    p.hidden_bias = detail::read_vector(in, dims[l + 1], "dbn hidden bias");
    m.layers.push_back(std::move(p));
  }
  m.head_weights = detail::read_matrix(in, dims.back(), dims[dims.size() - 2], "dbn head weights");
  m.head_bias = detail::read_vector(in, dims.back(), "dbn head bias");
  m.validate();
  return m;
}

DbnModel pretrain(DbnModel model, const Eigen::MatrixXd& features, const DbnTrainConfig& cfg,
                  const PretrainObserver& observer) {
  if (features.cols() == 0) throw std::invalid_argument("pretrain: empty training set");
  if (features.rows() != model.input_dim()) throw std::invalid_argument("pretrain: input dimension mismatch");
  if (cfg.rbm_batch < 1 || cfg.cd_steps < 1) throw std::invalid_argument("pretrain: rbm_batch and cd_steps must be >= 1");

  Eigen::MatrixXd inputs = features;
  const auto n = static_cast<std::size_t>(features.cols());
  std::vector<std::size_t> order(n);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    if (observer) observer(l, inputs);
    RbmParams& rbm = model.layers[l];
    RbmVelocity velocity = RbmVelocity::zeros_like(rbm);
    Rng rng(derive_seed(cfg.seed, {0x5052ULL, l}));
    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      const CdConfig cd{cfg.learning_rate, cfg.momentum_at(epoch), cfg.weight_decay, cfg.cd_steps};
      for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg.rbm_batch)) {
        const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.rbm_batch));
        cd_update(rbm, velocity, gather_columns(inputs, order, begin, end), cd, rng);
        if (!rbm.all_finite())
          throw std::runtime_error("pretrain: non-finite parameters in layer " + std::to_string(l));
      }
    }
    log_debug("pretrain layer " + std::to_string(l) +
              ": reconstruction cross-entropy " + std::to_string(reconstruction_cross_entropy(rbm, inputs)));
    inputs = hidden_probs(rbm, inputs);
  }
  return model;
}

Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double mx = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - mx).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

std::vector<int> argmax_columns(const Eigen::MatrixXd& m) {
  std::vector<int> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < m.rows(); ++i)
      if (m(i, j) > m(best, j)) best = i;
    out[static_cast<std::size_t>(j)] = static_cast<int>(best);
  }
  return out;
}

DbnGradients dbn_loss_gradients(const DbnModel& model, const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  check_labels(model, x, labels);
  if (labels.empty()) throw std::invalid_argument("dbn: empty batch");
  const ForwardCache cache = forward_all(model, x);
  const double inv_n = 1.0 / static_cast<double>(labels.size());

  DbnGradients g;
  g.loss = mean_cross_entropy(cache.probs, labels);
  Eigen::MatrixXd delta = cache.probs;
  for (std::size_t n = 0; n < labels.size(); ++n) delta(labels[n], static_cast<Eigen::Index>(n)) -= 1.0;
  delta *= inv_n;

  g.head_weights = delta * cache.activations.back().transpose();
  g.head_bias = delta.rowwise().sum();
  Eigen::MatrixXd upstream = model.head_weights.transpose() * delta;

  const std::size_t n_layers = model.layers.size();
  g.weights.resize(n_layers);
  g.hidden_bias.resize(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    const Eigen::MatrixXd& h = cache.activations[l + 1];
    const Eigen::MatrixXd da = (upstream.array() * h.array() * (1.0 - h.array())).matrix();
    g.weights[l] = da * cache.activations[l].transpose();
    g.hidden_bias[l] = da.rowwise().sum();
    if (l > 0) upstream = model.layers[l].weights.transpose() * da;
  }
  return g;
}

double dbn_loss(const DbnModel& model, const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  check_labels(model, x, labels);
  if (labels.empty()) return 0.0;
  return mean_cross_entropy(forward_all(model, x).probs, labels);
}

DbnModel finetune(DbnModel model, const Eigen::MatrixXd& train_x, const std::vector<int>& train_labels,
                  const Eigen::MatrixXd& val_x, const std::vector<int>& val_labels, const DbnTrainConfig& cfg,
                  FinetuneStats* stats) {
  model.validate();
  check_labels(model, train_x, train_labels);
  if (!val_labels.empty()) check_labels(model, val_x, val_labels);
  if (train_labels.empty()) throw std::invalid_argument("finetune: empty training set");
  if (cfg.finetune_batch < 1) throw std::invalid_argument("finetune: batch must be >= 1");

  const bool early_stop = !val_labels.empty();
  DbnModel best = model;
  double best_loss = early_stop ? dbn_loss(model, val_x, val_labels) : 0.0;
  int best_epoch = -1;
  int since_best = 0;
  int epochs_run = 0;

  DbnVelocity vel(model);
  Rng rng(derive_seed(cfg.seed, {0x4654ULL}));
  const auto n = train_labels.size();
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const double mom = cfg.momentum_at(epoch);
    const double lr = cfg.finetune_learning_rate;
    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg.finetune_batch)) {
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.finetune_batch));
      const Eigen::MatrixXd bx = gather_columns(train_x, order, begin, end);
      std::vector<int> by(end - begin);
      for (std::size_t k = begin; k < end; ++k) by[k - begin] = train_labels[order[k]];
      const DbnGradients g = dbn_loss_gradients(model, bx, by);
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        vel.weights[l] = mom * vel.weights[l] - lr * g.weights[l];
        vel.hidden_bias[l] = mom * vel.hidden_bias[l] - lr * g.hidden_bias[l];
        model.layers[l].weights += vel.weights[l];
        model.layers[l].hidden_bias += vel.hidden_bias[l];
      }
      vel.head_weights = mom * vel.head_weights - lr * g.head_weights;
      vel.head_bias = mom * vel.head_bias - lr * g.head_bias;
      model.head_weights += vel.head_weights;
      model.head_bias += vel.head_bias;
      if (!model_finite(model)) throw std::runtime_error("finetune: non-finite parameters");
    }
    ++epochs_run;
    if (!early_stop) continue;
    const double loss = dbn_loss(model, val_x, val_labels);
    if (loss < best_loss) {
      best_loss = loss;
      best = model;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (!early_stop) best = model;
  if (stats) *stats = {epochs_run, best_epoch, best_loss};
  log_debug("finetune: " + std::to_string(epochs_run) + " epochs, best validation loss " + std::to_string(best_loss) +
            " at epoch " + std::to_string(best_epoch));
  return best;
}

Eigen::MatrixXd dbn_hidden(const DbnModel& model, const Eigen::MatrixXd& x) {
  if (x.rows() != model.input_dim()) throw std::invalid_argument("dbn: input dimension mismatch");
  Eigen::MatrixXd h = x;
  for (const auto& layer : model.layers) h = hidden_probs(layer, h);
  return h;
}

Eigen::MatrixXd dbn_logits(const DbnModel& model, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd logits = model.head_weights * dbn_hidden(model, x);
  logits.colwise() += model.head_bias;
  return logits;
}

Eigen::MatrixXd transform(const DbnModel& model, const Eigen::MatrixXd& x) { return softmax(dbn_logits(model, x)); }

Eigen::VectorXd transform(const DbnModel& model, const Eigen::VectorXd& x) {
  return transform(model, Eigen::MatrixXd(x)).col(0);
}

std::vector<int> predict_dbn(const DbnModel& model, const Eigen::MatrixXd& x) {
  return argmax_columns(transform(model, x));
}

}  // namespace sleepstage
