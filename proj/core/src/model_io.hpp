#pragma once

// Text persistence helpers shared by the model formats: one matrix row per
// line, 17 significant digits.

#include <cstdio>
#include <istream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sleepstage::detail {

inline void write_matrix(std::FILE* f, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) std::fprintf(f, j ? " %.17g" : "%.17g", m(i, j));
    std::fputc('\n', f);
  }
}

inline void write_vector(std::FILE* f, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) std::fprintf(f, i ? " %.17g" : "%.17g", v(i));
  std::fputc('\n', f);
}

inline Eigen::MatrixXd read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      if (!(in >> m(i, j))) throw std::runtime_error("truncated model file while reading " + what);
  return m;
}

inline Eigen::VectorXd read_vector(std::istream& in, Eigen::Index n, const std::string& what) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(in >> v(i))) throw std::runtime_error("truncated model file while reading " + what);
  return v;
}

class FileCloser {
 public:
  explicit FileCloser(std::FILE* f) : f_(f) {}
  ~FileCloser() {
    if (f_) std::fclose(f_);
  }
  FileCloser(const FileCloser&) = delete;
  FileCloser& operator=(const FileCloser&) = delete;
  std::FILE* get() const { return f_; }

 private:
  std::FILE* f_;
};

}  // namespace sleepstage::detail
