#pragma once

// Data model shared by every trainer: datasets, the [-1,1] feature scaling,
// axis-parallel boxes, box-union models, and their text/JSON renderings.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace boxdraw {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data, configuration, or a violated precondition. The CLI maps
/// these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw InputError("row has " + std::to_string(values.size()) +
                                                 " entries, expected " + std::to_string(cols_));
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  const std::vector<double>& values() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Units { original, normalized };

inline std::string_view to_string(Units u) {
  return u == Units::original ? "original" : "normalized";
}

inline std::vector<std::string> default_feature_names(std::size_t n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (std::size_t j = 0; j < n; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

/// Feature matrix with labels in {-1,+1}. Positives are the minority class.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  Units units = Units::original;

  Dataset() = default;
  Dataset(Matrix x, std::vector<int> y, std::vector<std::string> names = {},
          Units u = Units::original)
      : features(std::move(x)), labels(std::move(y)), feature_names(std::move(names)), units(u) {
    if (feature_names.empty()) feature_names = default_feature_names(features.cols());
    validate();
  }

  std::size_t size() const { return features.rows(); }
  std::size_t dims() const { return features.cols(); }
  std::span<const double> row(std::size_t i) const { return features.row(i); }
  double operator()(std::size_t i, std::size_t j) const { return features(i, j); }

  std::size_t count(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
  }
  std::size_t positives() const { return count(+1); }
  std::size_t negatives() const { return count(-1); }

  std::vector<std::size_t> indices_of(int label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == label) out.push_back(i);
    return out;
  }

  void validate() const {
    if (labels.size() != features.rows())
      throw InputError("dataset has " + std::to_string(features.rows()) + " rows but " +
                       std::to_string(labels.size()) + " labels");
    if (feature_names.size() != features.cols())
      throw InputError("dataset has " + std::to_string(features.cols()) + " features but " +
                       std::to_string(feature_names.size()) + " feature names");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != 1 && labels[i] != -1)
        throw InputError("label at row " + std::to_string(i) + " is not -1 or +1");
      for (double v : features.row(i))
        if (!std::isfinite(v)) throw InputError("non-finite value at row " + std::to_string(i));
    }
  }

  /// Training precondition: at least one example of each class.
  void require_both_classes() const {
    if (positives() == 0) throw InputError("dataset has no positive examples");
    if (negatives() == 0) throw InputError("dataset has no negative examples");
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.features = Matrix(rows.size(), dims());
    out.labels.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::copy_n(row(rows[r]).begin(), dims(), out.features.row(r).begin());
      out.labels.push_back(labels[rows[r]]);
    }
    out.feature_names = feature_names;
    out.units = units;
    return out;
  }
};

/// Observed per-feature range used for the affine map onto [-1,1].
struct NormParams {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t dims() const { return min.size(); }
  bool is_constant(std::size_t j) const { return min[j] == max[j]; }

  double forward(std::size_t j, double x) const {
    if (is_constant(j)) return 0.0;
    return 2.0 * (x - min[j]) / (max[j] - min[j]) - 1.0;
  }

  double inverse(std::size_t j, double z) const {
    if (is_constant(j)) return min[j];
    return min[j] + (z + 1.0) * 0.5 * (max[j] - min[j]);
  }

  friend bool operator==(const NormParams&, const NormParams&) = default;
};

/// Scales a dataset with already-known parameters (e.g. a test split).
inline Dataset apply_normalization(const Dataset& data, const NormParams& params) {
  if (params.dims() != data.dims())
    throw InputError("normalization has " + std::to_string(params.dims()) +
                     " features, data has " + std::to_string(data.dims()));
  Dataset out = data;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto r = out.features.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = params.forward(j, r[j]);
  }
  out.units = Units::normalized;
  return out;
}

/// Maps every feature onto [-1,1] by its observed min and max. Constant
/// features map to 0.
inline std::pair<Dataset, NormParams> normalize(const Dataset& data) {
  if (data.size() == 0) throw InputError("cannot normalize an empty dataset");
  const std::size_t n = data.dims();
  NormParams params{std::vector<double>(n, kInf), std::vector<double>(n, -kInf)};
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = data(i, j);
      if (!std::isfinite(v))
        throw InputError("non-finite value at row " + std::to_string(i) + ", feature " +
                         std::to_string(j));
      params.min[j] = std::min(params.min[j], v);
      params.max[j] = std::max(params.max[j], v);
    }
  }
  return {apply_normalization(data, params), std::move(params)};
}

/// Per-dimension closed interval [lower, upper]; infinite ends are unbounded.
struct AxisBox {
  std::vector<double> lower;
  std::vector<double> upper;

  AxisBox() = default;
  AxisBox(std::vector<double> lo, std::vector<double> hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size()) throw InputError("box lower/upper dimension mismatch");
    for (std::size_t j = 0; j < lower.size(); ++j)
      if (!(lower[j] <= upper[j]))
        throw InputError("box has lower > upper in feature " + std::to_string(j));
  }

  /// Box that is unbounded in every dimension.
  static AxisBox everything(std::size_t n) {
    return AxisBox(std::vector<double>(n, -kInf), std::vector<double>(n, kInf));
  }

  std::size_t dims() const { return lower.size(); }

  bool contains(std::span<const double> x) const {
    for (std::size_t j = 0; j < lower.size(); ++j)
      if (!(lower[j] <= x[j] && x[j] <= upper[j])) return false;
    return true;
  }

  friend bool operator==(const AxisBox&, const AxisBox&) = default;
};

/// Union of axis-parallel boxes; predicts +1 inside any box. K = 0 is the
/// all-negative model.
struct BoxModel {
  std::vector<AxisBox> boxes;
  std::optional<NormParams> norm;
  Units units = Units::original;
  std::vector<std::string> feature_names;

  std::size_t num_boxes() const { return boxes.size(); }
  std::size_t dims() const { return feature_names.size(); }

  friend bool operator==(const BoxModel&, const BoxModel&) = default;
};

inline int predict(const BoxModel& model, std::span<const double> x) {
  if (x.size() != model.dims())
    throw InputError("point has " + std::to_string(x.size()) + " features, model expects " +
                     std::to_string(model.dims()));
  for (const auto& box : model.boxes)
    if (box.contains(x)) return 1;
  return -1;
}

inline std::vector<int> predict_all(const BoxModel& model, const Dataset& data) {
  if (data.units != model.units)
    throw InputError("model is in " + std::string(to_string(model.units)) +
                     " units but data is in " + std::string(to_string(data.units)) + " units");
  std::vector<int> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = predict(model, data.row(i));
  return out;
}

/// Rescales a normalized-unit model back to original units. Infinite
/// boundaries stay infinite. On a constant feature the interval either
/// contains the normalized value 0 (and becomes unbounded) or excludes it (and
/// collapses onto the largest representable magnitude).
inline BoxModel denormalize_model(const BoxModel& model, const NormParams& params) {
  if (model.units != Units::normalized) throw InputError("model is not in normalized units");
  if (params.dims() != model.dims())
    throw InputError("normalization has " + std::to_string(params.dims()) +
                     " features, model has " + std::to_string(model.dims()));
  BoxModel out = model;
  for (auto& box : out.boxes) {
    for (std::size_t j = 0; j < box.dims(); ++j) {
      double& lo = box.lower[j];
      double& hi = box.upper[j];
      if (params.is_constant(j)) {
        if (lo <= 0.0 && 0.0 <= hi) {
          lo = -kInf;
          hi = kInf;
        } else if (hi < 0.0) {
          lo = hi = std::numeric_limits<double>::lowest();
        } else {
          lo = hi = std::numeric_limits<double>::max();
        }
        continue;
      }
      if (std::isfinite(lo)) lo = params.inverse(j, lo);
      if (std::isfinite(hi)) hi = params.inverse(j, hi);
    }
  }
  out.norm = params;
  out.units = Units::original;
  return out;
}

/// Inverse of denormalize_model for non-constant features.
inline BoxModel normalize_model(const BoxModel& model, const NormParams& params) {
  if (model.units != Units::original) throw InputError("model is not in original units");
  if (params.dims() != model.dims()) throw InputError("normalization dimension mismatch");
  BoxModel out = model;
  for (auto& box : out.boxes) {
    for (std::size_t j = 0; j < box.dims(); ++j) {
      if (std::isfinite(box.lower[j])) box.lower[j] = params.forward(j, box.lower[j]);
      if (std::isfinite(box.upper[j])) box.upper[j] = params.forward(j, box.upper[j]);
    }
  }
  out.norm = params;
  out.units = Units::normalized;
  return out;
}

// ---------------------------------------------------------------------------
// Text rendering

namespace detail {

inline std::string format_rule_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Shortest text that parses back to the same double.
inline std::string format_exact(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Human-readable rule text: one line per box, features joined by "; ".
/// A feature unbounded on both sides is omitted.
inline std::string describe(const BoxModel& model) {
  if (model.boxes.empty()) return "always predict negative";
  std::string text;
  for (std::size_t k = 0; k < model.boxes.size(); ++k) {
    const auto& box = model.boxes[k];
    std::vector<std::string> clauses;
    for (std::size_t j = 0; j < box.dims(); ++j) {
      const bool has_lo = std::isfinite(box.lower[j]);
      const bool has_hi = std::isfinite(box.upper[j]);
      const std::string& name = model.feature_names[j];
      if (has_lo && has_hi) {
        clauses.push_back(name + " between " + detail::format_rule_value(box.lower[j]) + " and " +
                          detail::format_rule_value(box.upper[j]));
      } else if (has_lo) {
        clauses.push_back(name + " above " + detail::format_rule_value(box.lower[j]));
      } else if (has_hi) {
        clauses.push_back(name + " below " + detail::format_rule_value(box.upper[j]));
      }
    }
    if (k > 0) text += '\n';
    if (clauses.empty()) {
      text += "any point";
      continue;
    }
    for (std::size_t c = 0; c < clauses.size(); ++c) {
      if (c > 0) text += "; ";
      text += clauses[c];
    }
  }
  return text;
}

// ---------------------------------------------------------------------------
// Files

/// Writes to a sibling temporary file and renames it into place, so a failed
/// write never leaves a partial output.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error("failed writing '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InputError("cannot write '" + path.string() + "': " + ec.message());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> raw_lines;  // row text without the line terminator

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    return std::nullopt;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto cell = trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"')
      cell = cell.substr(1, cell.size() - 2);
    cells.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads a comma-separated file with one header row. Blank lines are skipped.
inline CsvTable read_csv_table(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("file not found: '" + path.string() + "'");
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size())
      throw InputError(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                       std::to_string(table.header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    table.rows.push_back(std::move(cells));
    table.raw_lines.push_back(line);
  }
  if (!have_header) throw InputError("'" + path.string() + "' has no header row");
  return table;
}

/// Builds a dataset from a parsed table: every column except label_column is
/// a feature; rows whose label equals positive_label become +1, the rest -1.
inline Dataset dataset_from_table(const CsvTable& table, std::string_view label_column,
                                  std::string_view positive_label, std::string_view source = "csv") {
  const auto label_col = table.column(label_column);
  if (!label_col)
    throw InputError(std::string(source) + ": label column '" + std::string(label_column) +
                     "' not found");
  if (table.rows.empty()) throw InputError(std::string(source) + ": no data rows");
  std::vector<std::string> names;
  for (std::size_t c = 0; c < table.header.size(); ++c)
    if (c != *label_col) names.push_back(table.header[c]);

  Matrix x(table.rows.size(), names.size());
  std::vector<int> y(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::size_t j = 0;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const auto& cell = table.rows[r][c];
      if (c == *label_col) {
        y[r] = detail::trim(cell) == positive_label ? 1 : -1;
        continue;
      }
      const auto v = detail::parse_double(cell);
      if (!v)
        throw InputError(std::string(source) + ": row " + std::to_string(r + 1) + ", column '" +
                         table.header[c] + "': cannot parse '" + cell + "' as a finite number");
      x(r, j++) = *v;
    }
  }
  return Dataset(std::move(x), std::move(y), std::move(names));
}

inline Dataset load_csv(const std::filesystem::path& path, std::string_view label_column,
                        std::string_view positive_label) {
  return dataset_from_table(read_csv_table(path), label_column, positive_label, path.string());
}

/// Serializes a dataset; labels are written as "pos"/"neg" in column `label`.
inline std::string dataset_to_csv(const Dataset& data, std::string_view label_column = "label",
                                  std::string_view positive_label = "pos",
                                  std::string_view negative_label = "neg") {
  std::string out;
  for (const auto& name : data.feature_names) out += name + ",";
  out += std::string(label_column) + "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.row(i)) out += detail::format_exact(v) + ",";
    out += std::string(data.labels[i] == 1 ? positive_label : negative_label) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model JSON: infinite boundaries serialize as null.

namespace detail {

inline nlohmann::json bounds_to_json(const std::vector<double>& values) {
  auto arr = nlohmann::json::array();
  for (double v : values) {
    if (std::isfinite(v))
      arr.push_back(v);
    else
      arr.push_back(nullptr);
  }
  return arr;
}

inline std::vector<double> bounds_from_json(const nlohmann::json& arr, double null_value) {
  std::vector<double> out;
  for (const auto& v : arr) out.push_back(v.is_null() ? null_value : v.get<double>());
  return out;
}

}  // namespace detail

inline nlohmann::json model_to_json(const BoxModel& model) {
  nlohmann::json j;
  j["feature_names"] = model.feature_names;
  j["units"] = std::string(to_string(model.units));
  if (model.norm)
    j["normalization"] = {{"min", model.norm->min}, {"max", model.norm->max}};
  else
    j["normalization"] = nullptr;
  auto boxes = nlohmann::json::array();
  for (const auto& box : model.boxes) {
    boxes.push_back({{"lower", detail::bounds_to_json(box.lower)},
                     {"upper", detail::bounds_to_json(box.upper)}});
  }
  j["boxes"] = std::move(boxes);
  return j;
}

inline BoxModel model_from_json(const nlohmann::json& j) {
  try {
    BoxModel model;
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    const auto units = j.at("units").get<std::string>();
    if (units == "original")
      model.units = Units::original;
    else if (units == "normalized")
      model.units = Units::normalized;
    else
      throw InputError("unknown units '" + units + "'");
    if (j.contains("normalization") && !j["normalization"].is_null()) {
      NormParams p{j["normalization"].at("min").get<std::vector<double>>(),
                   j["normalization"].at("max").get<std::vector<double>>()};
      if (p.min.size() != model.dims() || p.max.size() != model.dims())
        throw InputError("normalization dimension mismatch");
      model.norm = std::move(p);
    }
    for (const auto& b : j.at("boxes")) {
      AxisBox box(detail::bounds_from_json(b.at("lower"), -kInf),
                  detail::bounds_from_json(b.at("upper"), kInf));
      if (box.dims() != model.dims()) throw InputError("box dimension mismatch");
      model.boxes.push_back(std::move(box));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model JSON: ") + e.what());
  }
}

inline std::string model_to_string(const BoxModel& model) { return model_to_json(model).dump(2) + "\n"; }

inline void save_model(const BoxModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_string(model));
}

inline BoxModel load_model(const std::filesystem::path& path) {
  const auto text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace boxdraw
