#ifndef RFPCA_DATASET_HPP
#define RFPCA_DATASET_HPP

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace rfpca {

/// An ordered collection of c x r real observations.
struct Dataset {
  Eigen::Index rows = 0;  // c
  Eigen::Index cols = 0;  // r
  std::vector<Eigen::MatrixXd> samples;
  /// Class labels, one per observation.
  std::optional<std::vector<int>> labels;
  /// Planted-outlier ground truth, one per observation.
  std::optional<std::vector<bool>> outlier_truth;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  /// N x (c r) matrix whose n-th row is the column-major vec of sample n.
  Eigen::MatrixXd vectorized() const;

  /// Every sample transposed (r x c).
  Dataset transposed() const;

  /// Throws DimensionMismatch if any sample is not rows x cols or the
  /// optional per-observation vectors have the wrong length.
  void validate() const;
};

}  // namespace rfpca

#endif  // RFPCA_DATASET_HPP
