#ifndef RFPCA_OUTLIERS_HPP
#define RFPCA_OUTLIERS_HPP

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "rfpca/dataset.hpp"
#include "rfpca/estimators.hpp"

namespace rfpca {

/// Per-observation expected weights E[tau_n | X_n] and the flags they imply.
///
/// flags[n] == (weights[n] < threshold); ranks lists observation indices by
/// ascending weight, ties in index order.
struct OutlierReport {
  std::vector<double> weights;
  std::vector<std::size_t> ranks;
  std::vector<bool> flags;
  double threshold = 0.5;
  ModelFamily model = ModelFamily::MatrixT;
  /// Planted-outlier labels carried over from the dataset, if any.
  std::optional<std::vector<bool>> truth;

  std::size_t flagged() const;
};

/// Scores `data` under a matrix-t or multivariate-t fit (the latter on vec(X)).
/// Matrix-T and matrix-normal fits have no scalar weight: UnsupportedModel.
OutlierReport score(const Dataset& data, const FitResult& fit, double threshold = 0.5);

/// CSV with header `index,weight[,is_planted_outlier],flag`; weights carry
/// 17 significant digits so they read back exactly.
void export_weight_scatter(const OutlierReport& report, const std::filesystem::path& path);

}  // namespace rfpca

#endif  // RFPCA_OUTLIERS_HPP
