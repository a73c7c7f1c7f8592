#include "rfpca/outliers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "rfpca/error.hpp"

namespace rfpca {

std::size_t OutlierReport::flagged() const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
}

OutlierReport score(const Dataset& data, const FitResult& fit, double threshold) {
  data.validate();
  if (!std::isfinite(threshold)) throw Error(ErrorKind::Domain, "score: threshold must be finite");
  OutlierReport rep;
  rep.threshold = threshold;
  rep.model = fit.family;
  rep.truth = data.outlier_truth;
  rep.weights.reserve(data.size());
  if (fit.family == ModelFamily::MatrixT) {
    const auto& p = fit.matrix_t();
    for (const auto& x : data.samples) rep.weights.push_back(matrix_t_posterior_weight(x, p).mean());
  } else if (fit.family == ModelFamily::MultivariateT) {
    const auto& p = fit.multivariate_t();
    for (const auto& x : data.samples) {
      const Eigen::Map<const Eigen::VectorXd> v(x.data(), x.size());
      rep.weights.push_back(mvt_posterior_weight(v, p).mean());
    }
  } else {
    throw Error(ErrorKind::UnsupportedModel,
                "score: the " + std::string(to_string(fit.family)) +
                    " model has no scalar observation weight");
  }
  rep.flags.resize(rep.weights.size());
  for (std::size_t n = 0; n < rep.weights.size(); ++n) rep.flags[n] = rep.weights[n] < threshold;
  rep.ranks.resize(rep.weights.size());
  std::iota(rep.ranks.begin(), rep.ranks.end(), std::size_t{0});
  std::stable_sort(rep.ranks.begin(), rep.ranks.end(),
                   [&](std::size_t a, std::size_t b) { return rep.weights[a] < rep.weights[b]; });
  return rep;
}

void export_weight_scatter(const OutlierReport& report, const std::filesystem::path& path) {
  const bool with_truth = report.truth.has_value();
  if (with_truth && report.truth->size() != report.weights.size()) {
    throw Error(ErrorKind::DimensionMismatch, "export_weight_scatter: truth and weights differ in length");
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "export_weight_scatter: cannot open " + path.string());
  out << (with_truth ? "index,weight,is_planted_outlier,flag\n" : "index,weight,flag\n");
  char buf[64];
  for (std::size_t n = 0; n < report.weights.size(); ++n) {
    std::snprintf(buf, sizeof buf, "%.17g", report.weights[n]);
    out << n << ',' << buf << ',';
    if (with_truth) out << ((*report.truth)[n] ? 1 : 0) << ',';
    out << (report.flags[n] ? 1 : 0) << '\n';
  }
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "export_weight_scatter: write failed for " + path.string());
}

}  // namespace rfpca
