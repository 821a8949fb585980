#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace sleepstage {

/// Discrete-state HMM used on top of classifier posteriors.
struct HmmModel {
  Eigen::VectorXd initial;      // pi
  Eigen::MatrixXd transition;   // A(i, j) = P(next = j | current = i)
  Eigen::VectorXd class_priors;

  Eigen::Index num_states() const { return initial.size(); }

  void validate() const;
  void save(const std::filesystem::path& path) const;
  static HmmModel load(const std::filesystem::path& path);
};

/// Additively smoothed counts:
///   A(i, j) = (n(i->j) + alpha) / (n(i->.) + S * alpha)
/// pi counts each sequence's first label, class_priors every label. Rows with
/// no counts at alpha = 0 fall back to uniform.
HmmModel estimate_transitions(const std::vector<std::vector<int>>& sequences, double alpha = 1.0,
                              int num_states = 5);

enum class EmissionMode {
  ScaledLikelihood,  // posterior / class prior
  RawPosterior,
};

struct ViterbiResult {
  std::vector<int> path;
  double log_score = 0.0;
};

/// Max-probability path given T x S posteriors. Each posterior row must sum
/// to 1 within 1e-6 and have positive mass. Ties go to the lower state index.
ViterbiResult viterbi(const HmmModel& model, const Eigen::MatrixXd& posteriors,
                      EmissionMode mode = EmissionMode::ScaledLikelihood);

/// Same decoder on arbitrary log-emission scores (T x S).
ViterbiResult viterbi_log(const HmmModel& model, const Eigen::MatrixXd& log_emissions);

/// Log score of a given path under the same scoring as viterbi_log.
double path_log_score(const HmmModel& model, const Eigen::MatrixXd& log_emissions, const std::vector<int>& path);

}  // namespace sleepstage
