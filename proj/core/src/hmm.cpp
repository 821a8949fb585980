#include "sleepstage/hmm.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "model_io.hpp"

namespace sleepstage {

namespace {

Eigen::VectorXd normalize_counts(const Eigen::VectorXd& counts, double alpha) {
  const auto S = counts.size();
  const double denom = counts.sum() + static_cast<double>(S) * alpha;
  if (!(denom > 0.0)) return Eigen::VectorXd::Constant(S, 1.0 / static_cast<double>(S));
  return (counts.array() + alpha).matrix() / denom;
}

}  // namespace

void HmmModel::validate() const {
  const auto S = num_states();
  if (S < 1 || transition.rows() != S || transition.cols() != S || class_priors.size() != S)
    throw std::invalid_argument("hmm: shape mismatch");
  if (std::abs(initial.sum() - 1.0) > 1e-9) throw std::invalid_argument("hmm: initial distribution must sum to 1");
  for (Eigen::Index i = 0; i < S; ++i)
    if (std::abs(transition.row(i).sum() - 1.0) > 1e-9)
      throw std::invalid_argument("hmm: transition row " + std::to_string(i) + " must sum to 1");
}

void HmmModel::save(const std::filesystem::path& path) const {
  validate();
  detail::FileCloser f(std::fopen(path.string().c_str(), "w"));
  if (!f.get()) throw std::runtime_error("cannot write " + path.string());
  std::fprintf(f.get(), "hmm v1 %td\n", static_cast<std::ptrdiff_t>(num_states()));
  detail::write_vector(f.get(), initial);
  detail::write_matrix(f.get(), transition);
  detail::write_vector(f.get(), class_priors);
}

HmmModel HmmModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic, version;
  Eigen::Index S = 0;
  in >> magic >> version >> S;
  if (magic != "hmm" || version != "v1" || S < 1) throw std::runtime_error(path.string() + ": not an 'hmm v1' model");
  HmmModel m;
  m.initial = detail::read_vector(in, S, "hmm initial");
  m.transition = detail::read_matrix(in, S, S, "hmm transitions");
  m.class_priors = detail::read_vector(in, S, "hmm priors");
  m.validate();
  return m;
}

HmmModel estimate_transitions(const std::vector<std::vector<int>>& sequences, double alpha, int num_states) {
  if (sequences.empty()) throw std::invalid_argument("estimate_transitions: no sequences");
  if (!(alpha >= 0.0)) throw std::invalid_argument("estimate_transitions: alpha must be >= 0");
  const Eigen::Index S = num_states;
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(S, S);
  Eigen::VectorXd first = Eigen::VectorXd::Zero(S);
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(S);
  for (const auto& seq : sequences) {
    for (int s : seq)
      if (s < 0 || s >= num_states) throw std::invalid_argument("estimate_transitions: state out of range");
    if (seq.empty()) continue;
    first(seq.front()) += 1.0;
    for (std::size_t t = 0; t < seq.size(); ++t) {
      freq(seq[t]) += 1.0;
      if (t + 1 < seq.size()) counts(seq[t], seq[t + 1]) += 1.0;
    }
  }
  HmmModel m;
  m.transition.resize(S, S);
  for (Eigen::Index i = 0; i < S; ++i) m.transition.row(i) = normalize_counts(counts.row(i).transpose(), alpha).transpose();
  m.initial = normalize_counts(first, alpha);
  m.class_priors = normalize_counts(freq, alpha);
  return m;
}

ViterbiResult viterbi(const HmmModel& model, const Eigen::MatrixXd& posteriors, EmissionMode mode) {
  const Eigen::Index S = model.num_states();
  if (posteriors.cols() != S) throw std::invalid_argument("viterbi: posterior width must equal the state count");
  Eigen::MatrixXd log_em(posteriors.rows(), S);
  for (Eigen::Index t = 0; t < posteriors.rows(); ++t) {
    const double sum = posteriors.row(t).sum();
    if (!(posteriors.row(t).maxCoeff() > 0.0))
      throw std::invalid_argument("viterbi: zero emission row at t=" + std::to_string(t));
    if (std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("viterbi: posterior row " + std::to_string(t) + " does not sum to 1");
    for (Eigen::Index s = 0; s < S; ++s) {
      double e = posteriors(t, s);
      if (mode == EmissionMode::ScaledLikelihood) e /= model.class_priors(s);
      log_em(t, s) = std::log(e);
    }
  }
  return viterbi_log(model, log_em);
}

ViterbiResult viterbi_log(const HmmModel& model, const Eigen::MatrixXd& log_emissions) {
  const Eigen::Index S = model.num_states();
  const Eigen::Index T = log_emissions.rows();
  if (log_emissions.cols() != S) throw std::invalid_argument("viterbi: emission width must equal the state count");
  ViterbiResult result;
  if (T == 0) return result;

  const Eigen::MatrixXd log_a = model.transition.array().log().matrix();
  Eigen::VectorXd delta(S);
  for (Eigen::Index s = 0; s < S; ++s) delta(s) = std::log(model.initial(s)) + log_emissions(0, s);
  std::vector<int> back(static_cast<std::size_t>(T * S), 0);
  Eigen::VectorXd next(S);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index j = 0; j < S; ++j) {
      int best = 0;
      double best_score = delta(0) + log_a(0, j);
      for (Eigen::Index i = 1; i < S; ++i) {
        const double score = delta(i) + log_a(i, j);
        if (score > best_score) {
          best_score = score;
          best = static_cast<int>(i);
        }
      }
      next(j) = best_score + log_emissions(t, j);
      back[static_cast<std::size_t>(t * S + j)] = best;
    }
    delta.swap(next);
  }
  int state = 0;
  for (Eigen::Index s = 1; s < S; ++s)
    if (delta(s) > delta(state)) state = static_cast<int>(s);
  result.log_score = delta(state);
  result.path.assign(static_cast<std::size_t>(T), 0);
  for (Eigen::Index t = T; t-- > 0;) {
    result.path[static_cast<std::size_t>(t)] = state;
    if (t > 0) state = back[static_cast<std::size_t>(t * S + state)];
  }
  return result;
}

double path_log_score(const HmmModel& model, const Eigen::MatrixXd& log_emissions, const std::vector<int>& path) {
  if (static_cast<Eigen::Index>(path.size()) != log_emissions.rows())
    throw std::invalid_argument("path_log_score: length mismatch");
  if (path.empty()) return 0.0;
  double score = std::log(model.initial(path[0])) + log_emissions(0, path[0]);
  for (std::size_t t = 1; t < path.size(); ++t)
    score += std::log(model.transition(path[t - 1], path[t])) +
             log_emissions(static_cast<Eigen::Index>(t), path[t]);
  return score;
}

}  // namespace sleepstage
