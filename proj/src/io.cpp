#include "rfpca/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rfpca/error.hpp"

namespace rfpca {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  // A trailing blank line is a terminator, not an observation.
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

std::size_t line_of_byte(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

Index manifest_int(const nlohmann::json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw FormatError(path, 0, std::string("manifest is missing \"") + key + "\"");
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw FormatError(path, 0, std::string("\"") + key + "\" must be an integer");
  const auto x = v.get<long long>();
  if (x < 0) throw FormatError(path, 0, std::string("\"") + key + "\" must be non-negative");
  return static_cast<Index>(x);
}

std::optional<fs::path> manifest_path(const nlohmann::json& j, const char* key, const std::string& path,
                                      const fs::path& base, bool required) {
  if (!j.contains(key) || j.at(key).is_null()) {
    if (required) throw FormatError(path, 0, std::string("manifest is missing \"") + key + "\"");
    return std::nullopt;
  }
  if (!j.at(key).is_string()) throw FormatError(path, 0, std::string("\"") + key + "\" must be a path string");
  const fs::path p = j.at(key).get<std::string>();
  return p.is_absolute() ? p : base / p;
}

void check_count(const fs::path& path, std::size_t found, std::size_t expected, const char* what) {
  if (found != expected) {
    throw FormatError(path.string(), found > expected ? expected + 1 : 0,
                      std::string(what) + " has " + std::to_string(found) +
                          " entries but the manifest declares n = " + std::to_string(expected));
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, path.string() + ": cannot open for writing");
  return out;
}

}  // namespace

Dataset load_dataset(const fs::path& manifest, bool standardize) {
  const std::string mpath = manifest.string();
  const std::string text = slurp(manifest);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(mpath, line_of_byte(text, e.byte), "malformed manifest JSON");
  }
  if (!j.is_object()) throw FormatError(mpath, 1, "manifest must be a JSON object");

  Dataset d;
  d.rows = manifest_int(j, "c", mpath);
  d.cols = manifest_int(j, "r", mpath);
  const auto n = static_cast<std::size_t>(manifest_int(j, "n", mpath));
  if (d.rows == 0 || d.cols == 0) throw FormatError(mpath, 0, "c and r must be positive");
  const fs::path base = manifest.parent_path();
  const fs::path data_path = *manifest_path(j, "data", mpath, base, true);
  const auto labels_path = manifest_path(j, "labels", mpath, base, false);
  const auto truth_path = manifest_path(j, "outlier_truth", mpath, base, false);

  const std::vector<std::string> lines = read_lines(data_path);
  check_count(data_path, lines.size(), n, "data file");
  const std::size_t width = static_cast<std::size_t>(d.rows * d.cols);
  d.samples.reserve(n);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    MatrixXd x(d.rows, d.cols);
    std::string_view rest = lines[ln];
    std::size_t k = 0;
    while (true) {
      const std::size_t comma = rest.find(',');
      const std::string_view field = rest.substr(0, comma);
      if (k < width) {
        double v;
        if (!parse_number(field, v)) {
          throw FormatError(data_path.string(), ln + 1,
                            "value " + std::to_string(k + 1) + " ('" + std::string(trim(field)) +
                                "') is not a number");
        }
        x(static_cast<Index>(k) / d.cols, static_cast<Index>(k) % d.cols) = v;
      }
      ++k;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (k != width) {
      throw FormatError(data_path.string(), ln + 1,
                        "expected c*r = " + std::to_string(width) + " values, found " + std::to_string(k));
    }
    d.samples.push_back(std::move(x));
  }

  if (labels_path) {
    const auto lab = read_lines(*labels_path);
    check_count(*labels_path, lab.size(), n, "labels file");
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!parse_number(lab[i], labels[i])) {
        throw FormatError(labels_path->string(), i + 1, "label '" + lab[i] + "' is not an integer");
      }
    }
    d.labels = std::move(labels);
  }
  if (truth_path) {
    const auto tl = read_lines(*truth_path);
    check_count(*truth_path, tl.size(), n, "outlier_truth file");
    std::vector<bool> truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string_view t = trim(tl[i]);
      if (t != "0" && t != "1") {
        throw FormatError(truth_path->string(), i + 1, "outlier flag must be 0 or 1, got '" + tl[i] + "'");
      }
      truth[i] = t == "1";
    }
    d.outlier_truth = std::move(truth);
  }
  if (standardize) standardize_variables(d);
  return d;
}

void save_dataset(const Dataset& data, const fs::path& manifest) {
  data.validate();
  const fs::path dir = manifest.parent_path();
  const std::string stem = manifest.stem().string();
  nlohmann::ordered_json j;
  j["c"] = data.rows;
  j["r"] = data.cols;
  j["n"] = data.size();
  j["data"] = stem + ".csv";

  {
    const fs::path p = dir / (stem + ".csv");
    std::ofstream out = open_out(p);
    for (const MatrixXd& x : data.samples) {
      for (Index i = 0; i < data.rows; ++i) {
        for (Index k = 0; k < data.cols; ++k) {
          if (i || k) out << ',';
          out << format_double(x(i, k));
        }
      }
      out << '\n';
    }
    if (!out) throw Error(ErrorKind::Io, p.string() + ": write failed");
  }
  if (data.labels) {
    j["labels"] = stem + ".labels.txt";
    const fs::path p = dir / (stem + ".labels.txt");
    std::ofstream out = open_out(p);
    for (int l : *data.labels) out << l << '\n';
    if (!out) throw Error(ErrorKind::Io, p.string() + ": write failed");
  }
  if (data.outlier_truth) {
    j["outlier_truth"] = stem + ".outliers.txt";
    const fs::path p = dir / (stem + ".outliers.txt");
    std::ofstream out = open_out(p);
    for (bool t : *data.outlier_truth) out << (t ? 1 : 0) << '\n';
    if (!out) throw Error(ErrorKind::Io, p.string() + ": write failed");
  }
  std::ofstream out = open_out(manifest);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, manifest.string() + ": write failed");
}

void standardize_variables(Dataset& data) {
  if (data.empty()) return;
  const double n = static_cast<double>(data.size());
  MatrixXd mean = MatrixXd::Zero(data.rows, data.cols);
  for (const MatrixXd& x : data.samples) mean += x;
  mean /= n;
  MatrixXd var = MatrixXd::Zero(data.rows, data.cols);
  for (const MatrixXd& x : data.samples) var += (x - mean).cwiseAbs2();
  var /= n;
  const MatrixXd scale = var.unaryExpr([](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0; });
  for (MatrixXd& x : data.samples) x = (x - mean).cwiseProduct(scale);
}

}  // namespace rfpca
