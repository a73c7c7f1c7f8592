#include "rfpca/dataset.hpp"

#include <string>

#include "rfpca/error.hpp"

namespace rfpca {

Eigen::MatrixXd Dataset::vectorized() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()), rows * cols);
  for (std::size_t n = 0; n < samples.size(); ++n) {
    out.row(static_cast<Eigen::Index>(n)) =
        Eigen::Map<const Eigen::VectorXd>(samples[n].data(), rows * cols).transpose();
  }
  return out;
}

Dataset Dataset::transposed() const {
  Dataset out;
  out.rows = cols;
  out.cols = rows;
  out.samples.reserve(samples.size());
  for (const auto& x : samples) out.samples.emplace_back(x.transpose());
  out.labels = labels;
  out.outlier_truth = outlier_truth;
  return out;
}

void Dataset::validate() const {
  if (rows <= 0 || cols <= 0) {
    throw Error(ErrorKind::DimensionMismatch, "Dataset: dimensions must be positive");
  }
  for (std::size_t n = 0; n < samples.size(); ++n) {
    if (samples[n].rows() != rows || samples[n].cols() != cols) {
      throw Error(ErrorKind::DimensionMismatch,
                  "Dataset: sample " + std::to_string(n) + " is " +
                      std::to_string(samples[n].rows()) + "x" + std::to_string(samples[n].cols()) +
                      ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
  if (labels && labels->size() != samples.size()) {
    throw Error(ErrorKind::DimensionMismatch, "Dataset: label count differs from sample count");
  }
  if (outlier_truth && outlier_truth->size() != samples.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "Dataset: outlier-truth count differs from sample count");
  }
}

}  // namespace rfpca
