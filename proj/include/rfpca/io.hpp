#ifndef RFPCA_IO_HPP
#define RFPCA_IO_HPP

#include <filesystem>

#include "rfpca/dataset.hpp"

namespace rfpca {

/// Reads a dataset from a JSON manifest
///   {"c": int, "r": int, "n": int, "data": path, "labels": path?, "outlier_truth": path?}
/// with paths relative to the manifest's directory. The data file holds one
/// observation per line as c*r comma-separated values in row-major order;
/// labels hold one integer per line, outlier_truth one 0/1 per line.
///
/// Missing files raise Io; everything malformed raises FormatError carrying
/// the offending path and one-based line.
Dataset load_dataset(const std::filesystem::path& manifest, bool standardize = false);

/// Writes the manifest plus <stem>.csv, <stem>.labels.txt and
/// <stem>.outliers.txt (the last two only when present) next to it.
/// Values are written with 17 significant digits, so load(save(d)) == d exactly.
void save_dataset(const Dataset& data, const std::filesystem::path& manifest);

/// Z-scores each of the c*r variables across observations. A constant
/// variable is only centered.
void standardize_variables(Dataset& data);

}  // namespace rfpca

#endif  // RFPCA_IO_HPP
