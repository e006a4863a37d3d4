#pragma once

// Exact Boxes: the mixed-integer program that maximizes weighted class
// accuracy over unions of K boxes, its LP-file serialization, a feasibility
// checker, and an exact desk-scale solver that searches the finite grid of
// boundary positions between data values.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "boxdraw/core.hpp"
#include "boxdraw/fastboxes.hpp"

namespace boxdraw {

struct ExactBoxesConfig {
  std::size_t K = 1;
  double c_I = 1.0;          // majority-class weight, (0,1]
  double c_e = 0.0;          // per-box penalty
  double v = 1e-4;           // margin between points and boundaries
  double big_M = 4.0;
  double eps_strict = 1e-6;  // turns strict inequalities into non-strict ones

  void validate() const {
    if (K < 1) throw InputError("K must be at least 1");
    if (!(c_I > 0.0 && c_I <= 1.0)) throw InputError("c_I must be in (0,1]");
    if (!(c_e >= 0.0) || !std::isfinite(c_e)) throw InputError("c_e must be finite and >= 0");
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("margin v must be finite and >= 0");
    if (!(eps_strict > 0.0)) throw InputError("eps_strict must be > 0");
    // Normalized data spans a diameter of 2 in every feature.
    if (!(big_M > 2.0 + v)) throw InputError("big_M must exceed the data diameter (2) plus the margin");
  }

  /// Largest |l_jk|, |u_jk| for which the big-M rows stay valid on [-1,1] data.
  double boundary_limit() const { return big_M - 1.0 - v - eps_strict; }
};

inline nlohmann::json config_to_json(const ExactBoxesConfig& cfg) {
  return {{"K", cfg.K}, {"c_I", cfg.c_I}, {"c_e", cfg.c_e}, {"v", cfg.v},
          {"big_M", cfg.big_M}, {"eps_strict", cfg.eps_strict}};
}

inline ExactBoxesConfig exact_config_from_json(const nlohmann::json& j) {
  ExactBoxesConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "K") cfg.K = value.get<std::size_t>();
      else if (key == "c_I") cfg.c_I = value.get<double>();
      else if (key == "c_e") cfg.c_e = value.get<double>();
      else if (key == "v") cfg.v = value.get<double>();
      else if (key == "big_M") cfg.big_M = value.get<double>();
      else if (key == "eps_strict") cfg.eps_strict = value.get<double>();
      else throw InputError("unknown Exact Boxes config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed Exact Boxes config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// MIP model

enum class VarType { continuous, binary };
enum class Sense { le, ge, eq };

struct MipVariable {
  std::string name;
  VarType type = VarType::continuous;
  double lower = 0.0;
  double upper = 1.0;
};

struct MipConstraint {
  std::string name;
  int tag = 0;  // formulation row family, 5..21
  std::vector<std::pair<std::size_t, double>> terms;
  Sense sense = Sense::le;
  double rhs = 0.0;
};

/// Variables are laid out as l, u (continuous, n*K each), then the binaries
/// lt (x above l), ut (x below u) (m*n*K each), w (m*K), z (m).
struct MipModel {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t K = 0;
  std::vector<MipVariable> variables;
  std::vector<MipConstraint> constraints;
  std::vector<std::pair<std::size_t, double>> objective;  // maximized
  double objective_constant = 0.0;                       // -c_e * K
  std::vector<std::string> warnings;

  std::size_t l(std::size_t j, std::size_t k) const { return j * K + k; }
  std::size_t u(std::size_t j, std::size_t k) const { return n * K + j * K + k; }
  std::size_t lt(std::size_t i, std::size_t j, std::size_t k) const { return 2 * n * K + (i * n + j) * K + k; }
  std::size_t ut(std::size_t i, std::size_t j, std::size_t k) const {
    return 2 * n * K + m * n * K + (i * n + j) * K + k;
  }
  std::size_t w(std::size_t i, std::size_t k) const { return 2 * n * K + 2 * m * n * K + i * K + k; }
  std::size_t z(std::size_t i) const { return 2 * n * K + 2 * m * n * K + m * K + i; }

  std::size_t count(VarType t) const {
    return static_cast<std::size_t>(
        std::count_if(variables.begin(), variables.end(), [t](const MipVariable& v) { return v.type == t; }));
  }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < variables.size(); ++i)
      if (variables[i].name == name) return i;
    return std::nullopt;
  }
};

namespace detail {

inline std::string idx(std::size_t a) { return std::to_string(a); }
inline std::string idx(std::size_t a, std::size_t b) { return idx(a) + "_" + idx(b); }
inline std::string idx(std::size_t a, std::size_t b, std::size_t c) { return idx(a, b) + "_" + idx(c); }

inline void require_normalized(const Dataset& data) {
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < data.dims(); ++j)
      if (std::abs(data(i, j)) > 1.0 + 1e-9)
        throw InputError("data must be normalized to [-1,1]: row " + std::to_string(i) + ", feature " +
                         std::to_string(j) + " is " + format_exact(data(i, j)));
}

/// Smallest gap between distinct values of any feature (infinity if none).
inline double min_feature_gap(const Dataset& data) {
  double gap = kInf;
  for (std::size_t j = 0; j < data.dims(); ++j) {
    std::vector<double> col;
    for (std::size_t i = 0; i < data.size(); ++i) col.push_back(data(i, j));
    std::sort(col.begin(), col.end());
    for (std::size_t t = 1; t < col.size(); ++t)
      if (col[t] > col[t - 1]) gap = std::min(gap, col[t] - col[t - 1]);
  }
  return gap;
}

}  // namespace detail

/// Builds the linearized formulation over normalized data.
inline MipModel build_mip(const Dataset& data, const ExactBoxesConfig& cfg) {
  cfg.validate();
  detail::require_normalized(data);
  const std::size_t m = data.size(), n = data.dims(), K = cfg.K;
  const double M = cfg.big_M, v = cfg.v, eps = cfg.eps_strict;
  const double B = cfg.boundary_limit();
  using detail::idx;

  MipModel mip;
  mip.m = m;
  mip.n = n;
  mip.K = K;
  mip.variables.resize(2 * n * K + 2 * m * n * K + m * K + m);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < K; ++k) {
      mip.variables[mip.l(j, k)] = {"l_" + idx(j, k), VarType::continuous, -B, B};
      mip.variables[mip.u(j, k)] = {"u_" + idx(j, k), VarType::continuous, -B, B};
    }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < K; ++k) {
        mip.variables[mip.lt(i, j, k)] = {"lt_" + idx(i, j, k), VarType::binary, 0, 1};
        mip.variables[mip.ut(i, j, k)] = {"ut_" + idx(i, j, k), VarType::binary, 0, 1};
      }
    for (std::size_t k = 0; k < K; ++k) mip.variables[mip.w(i, k)] = {"w_" + idx(i, k), VarType::binary, 0, 1};
    mip.variables[mip.z(i)] = {"z_" + idx(i), VarType::binary, 0, 1};
  }

  const double gap = detail::min_feature_gap(data);
  if (std::isfinite(gap) && !(v < gap / 2.0 - eps))
    mip.warnings.push_back("margin v=" + detail::format_exact(v) + " is not below half the minimum feature gap (" +
                           detail::format_exact(gap / 2.0) + "); grid-optimal boxes may be excluded");

  auto add = [&](std::string name, int tag, std::vector<std::pair<std::size_t, double>> terms, Sense s,
                 double rhs) { mip.constraints.push_back({std::move(name), tag, std::move(terms), s, rhs}); };
  auto row = [](int tag, const std::string& suffix) { return "c" + std::to_string(tag) + "_" + suffix; };

  const double two_n = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < m; ++i) {
    const bool pos = data.labels[i] == 1;
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = 0; j < n; ++j) {
        const double x = data(i, j);
        const auto L = mip.l(j, k), U = mip.u(j, k), Lt = mip.lt(i, j, k), Ut = mip.ut(i, j, k);
        const auto s = idx(i, j, k);
        if (pos) {
          // lt = 1 iff x > l + v ; ut = 1 iff x < u - v
          add(row(5, s), 5, {{L, -1.0}, {Lt, -M}}, Sense::le, v - x);
          add(row(6, s), 6, {{L, 1.0}, {Lt, M}}, Sense::le, x - v - eps + M);
          add(row(7, s), 7, {{U, 1.0}, {Ut, -M}}, Sense::le, v + x);
          add(row(8, s), 8, {{U, -1.0}, {Ut, M}}, Sense::le, -x - v - eps + M);
        } else {
          // lt = 1 iff x < l - v ; ut = 1 iff x > u + v
          add(row(13, s), 13, {{L, 1.0}, {Lt, -M}}, Sense::le, v + x);
          add(row(14, s), 14, {{L, -1.0}, {Lt, M}}, Sense::le, -v - x - eps + M);
          add(row(15, s), 15, {{U, -1.0}, {Ut, -M}}, Sense::le, v - x);
          add(row(16, s), 16, {{U, 1.0}, {Ut, M}}, Sense::le, x - v - eps + M);
        }
      }
      std::vector<std::pair<std::size_t, double>> sum_terms;
      for (std::size_t j = 0; j < n; ++j) {
        sum_terms.push_back({mip.lt(i, j, k), 1.0});
        sum_terms.push_back({mip.ut(i, j, k), 1.0});
      }
      const auto W = mip.w(i, k);
      const auto s = idx(i, k);
      if (pos) {
        auto t9 = sum_terms;
        t9.push_back({W, -1.0});
        add(row(9, s), 9, std::move(t9), Sense::le, two_n - 1.0);
        std::vector<std::pair<std::size_t, double>> t10{{W, two_n}};
        for (auto [var, c] : sum_terms) t10.push_back({var, -c});
        add(row(10, s), 10, std::move(t10), Sense::le, 0.0);
      } else {
        auto t17 = sum_terms;
        t17.push_back({W, two_n});
        add(row(17, s), 17, std::move(t17), Sense::le, 2.0 * two_n - 1.0);
        std::vector<std::pair<std::size_t, double>> t18{{W, -1.0}};
        for (auto [var, c] : sum_terms) t18.push_back({var, -c});
        add(row(18, s), 18, std::move(t18), Sense::le, -1.0);
      }
    }
    std::vector<std::pair<std::size_t, double>> wsum;
    for (std::size_t k = 0; k < K; ++k) wsum.push_back({mip.w(i, k), 1.0});
    const auto Z = mip.z(i);
    const double Kd = static_cast<double>(K);
    if (pos) {
      auto t11 = wsum;
      t11.push_back({Z, -Kd});
      add(row(11, idx(i)), 11, std::move(t11), Sense::le, 0.0);
      std::vector<std::pair<std::size_t, double>> t12{{Z, 1.0}};
      for (auto [var, c] : wsum) t12.push_back({var, -c});
      add(row(12, idx(i)), 12, std::move(t12), Sense::le, 0.0);
    } else {
      auto t19 = wsum;
      t19.push_back({Z, Kd});
      add(row(19, idx(i)), 19, std::move(t19), Sense::le, Kd);
      std::vector<std::pair<std::size_t, double>> t20{{Z, -1.0}};
      for (auto [var, c] : wsum) t20.push_back({var, -c});
      add(row(20, idx(i)), 20, std::move(t20), Sense::le, -1.0);
    }
  }
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < K; ++k)
      add(row(21, idx(j, k)), 21, {{mip.l(j, k), 1.0}, {mip.u(j, k), -1.0}}, Sense::le, 0.0);

  for (std::size_t i = 0; i < m; ++i) mip.objective.push_back({mip.z(i), data.labels[i] == 1 ? 1.0 : cfg.c_I});
  mip.objective_constant = -cfg.c_e * static_cast<double>(K);
  return mip;
}

// ---------------------------------------------------------------------------
// LP text

namespace detail {

inline void append_expression(std::string& out, const MipModel& mip,
                              const std::vector<std::pair<std::size_t, double>>& terms) {
  std::size_t line_len = out.size() - out.rfind('\n');
  bool first = true;
  for (auto [var, coef] : terms) {
    std::string t;
    if (first)
      t = coef < 0 ? "-" : "";
    else
      t = coef < 0 ? " - " : " + ";
    const double a = std::abs(coef);
    if (a != 1.0) t += format_exact(a) + " ";
    t += mip.variables[var].name;
    if (line_len + t.size() > 240) {
      out += "\n   ";
      line_len = 3;
    }
    out += t;
    line_len += t.size();
    first = false;
  }
  if (first) out += "0";
}

inline std::string_view sense_text(Sense s) {
  switch (s) {
    case Sense::le: return "<=";
    case Sense::ge: return ">=";
    case Sense::eq: return "=";
  }
  return "<=";
}

}  // namespace detail

/// CPLEX-style LP text. Byte-identical for identical models.
inline std::string emit_lp(const MipModel& mip) {
  using detail::format_exact;
  std::string out = "\\ Box drawing classifier (exact formulation)\n";
  out += "\\ m=" + std::to_string(mip.m) + " n=" + std::to_string(mip.n) + " K=" + std::to_string(mip.K) + "\n";
  if (mip.objective_constant != 0.0)
    out += "\\ objective constant " + format_exact(mip.objective_constant) + "\n";
  out += "Maximize\n obj: ";
  detail::append_expression(out, mip, mip.objective);
  out += "\n";
  if (!mip.constraints.empty()) {
    out += "Subject To\n";
    for (const auto& c : mip.constraints) {
      out += " " + c.name + ": ";
      detail::append_expression(out, mip, c.terms);
      out += " " + std::string(detail::sense_text(c.sense)) + " " + format_exact(c.rhs) + "\n";
    }
    bool any_bounds = false;
    for (const auto& v : mip.variables) {
      if (v.type != VarType::continuous) continue;
      if (!any_bounds) out += "Bounds\n";
      any_bounds = true;
      out += " " + format_exact(v.lower) + " <= " + v.name + " <= " + format_exact(v.upper) + "\n";
    }
    bool any_binary = false;
    for (const auto& v : mip.variables) {
      if (v.type != VarType::binary) continue;
      if (!any_binary) out += "Binary\n";
      any_binary = true;
      out += " " + v.name + "\n";
    }
  }
  out += "End\n";
  return out;
}

inline void write_lp(const MipModel& mip, const std::filesystem::path& path) {
  write_file_atomic(path, emit_lp(mip));
}

// ---------------------------------------------------------------------------
// Solutions and feasibility

/// Parses "name value" lines. Blank lines and lines starting with '#' or '\'
/// are ignored.
inline std::map<std::string, double> parse_solution(std::string_view text) {
  std::map<std::string, double> values;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#' || t.front() == '\\') continue;
    std::istringstream ls{std::string(t)};
    std::string name, value, extra;
    ls >> name >> value;
    const auto parsed = detail::parse_double(value);
    if (name.empty() || !parsed || (ls >> extra))
      throw InputError("solution line " + std::to_string(line_no) + ": expected '<variable> <value>'");
    values[name] = *parsed;
  }
  return values;
}

inline std::string format_solution(const MipModel& mip, std::span<const double> assignment) {
  std::string out;
  for (std::size_t i = 0; i < mip.variables.size(); ++i)
    out += mip.variables[i].name + " " + detail::format_exact(assignment[i]) + "\n";
  return out;
}

/// Orders named values by the model's variable layout; every variable must be present.
inline std::vector<double> assignment_from_solution(const MipModel& mip, const std::map<std::string, double>& values) {
  std::vector<double> out(mip.variables.size());
  for (std::size_t i = 0; i < mip.variables.size(); ++i) {
    const auto it = values.find(mip.variables[i].name);
    if (it == values.end()) throw InputError("solution is missing variable '" + mip.variables[i].name + "'");
    out[i] = it->second;
  }
  if (values.size() != mip.variables.size()) {
    for (const auto& [name, value] : values)
      if (!mip.find(name)) throw InputError("solution names unknown variable '" + name + "'");
  }
  return out;
}

struct Violation {
  std::size_t constraint = 0;
  std::string name;
  int tag = 0;
  double lhs = 0.0;
  double rhs = 0.0;
};

/// Evaluates every constraint and variable bound; returns the violated rows
/// (bound violations are reported with tag 0).
inline std::vector<Violation> check_feasibility(const MipModel& mip, std::span<const double> assignment,
                                                double tolerance = 1e-9) {
  if (assignment.size() != mip.variables.size())
    throw InputError("assignment has " + std::to_string(assignment.size()) + " values, model has " +
                     std::to_string(mip.variables.size()) + " variables");
  std::vector<Violation> out;
  for (std::size_t i = 0; i < mip.variables.size(); ++i) {
    const auto& var = mip.variables[i];
    const double x = assignment[i];
    if (var.type == VarType::binary && x != 0.0 && x != 1.0)
      throw InputError("binary variable '" + var.name + "' has value " + detail::format_exact(x));
    if (x < var.lower - tolerance || x > var.upper + tolerance)
      out.push_back({i, "bound:" + var.name, 0, x, x < var.lower ? var.lower : var.upper});
  }
  for (std::size_t c = 0; c < mip.constraints.size(); ++c) {
    const auto& row = mip.constraints[c];
    double lhs = 0.0;
    for (auto [var, coef] : row.terms) lhs += coef * assignment[var];
    bool ok = true;
    switch (row.sense) {
      case Sense::le: ok = lhs <= row.rhs + tolerance; break;
      case Sense::ge: ok = lhs >= row.rhs - tolerance; break;
      case Sense::eq: ok = std::abs(lhs - row.rhs) <= tolerance; break;
    }
    if (!ok) out.push_back({c, row.name, row.tag, lhs, row.rhs});
  }
  return out;
}

inline double mip_objective(const MipModel& mip, std::span<const double> assignment) {
  double s = mip.objective_constant;
  for (auto [var, coef] : mip.objective) s += coef * assignment[var];
  return s;
}

/// Sets every variable from a box model in normalized units using the
/// indicator definitions (including the margin v). Infinite boundaries are
/// clamped to the variable bounds.
inline std::vector<double> lift_assignment(const MipModel& mip, const Dataset& data, const BoxModel& model,
                                           const ExactBoxesConfig& cfg) {
  if (model.num_boxes() != mip.K) throw InputError("model has a different number of boxes than the MIP");
  if (data.size() != mip.m || data.dims() != mip.n) throw InputError("data does not match the MIP");
  std::vector<double> a(mip.variables.size(), 0.0);
  const double v = cfg.v;
  for (std::size_t k = 0; k < mip.K; ++k)
    for (std::size_t j = 0; j < mip.n; ++j) {
      const auto& lv = mip.variables[mip.l(j, k)];
      const auto& uv = mip.variables[mip.u(j, k)];
      a[mip.l(j, k)] = std::clamp(model.boxes[k].lower[j], lv.lower, lv.upper);
      a[mip.u(j, k)] = std::clamp(model.boxes[k].upper[j], uv.lower, uv.upper);
    }
  for (std::size_t i = 0; i < mip.m; ++i) {
    const bool pos = data.labels[i] == 1;
    bool any_box = false;
    for (std::size_t k = 0; k < mip.K; ++k) {
      int count = 0;
      for (std::size_t j = 0; j < mip.n; ++j) {
        const double x = data(i, j);
        const double l = a[mip.l(j, k)], u = a[mip.u(j, k)];
        const bool lt = pos ? x > l + v : l - v > x;
        const bool ut = pos ? u - v > x : x > u + v;
        a[mip.lt(i, j, k)] = lt ? 1.0 : 0.0;
        a[mip.ut(i, j, k)] = ut ? 1.0 : 0.0;
        count += lt + ut;
      }
      // Positives: inside iff every indicator is on. Negatives: inside iff none is.
      const bool inside = pos ? count == static_cast<int>(2 * mip.n) : count == 0;
      a[mip.w(i, k)] = inside ? 1.0 : 0.0;
      any_box = any_box || inside;
    }
    a[mip.z(i)] = (pos == any_box) ? 1.0 : 0.0;
  }
  return a;
}

/// Reads the boundary variables of an assignment into a normalized-unit model.
inline BoxModel extract_model(const MipModel& mip, std::span<const double> assignment,
                              std::vector<std::string> feature_names = {}) {
  BoxModel model;
  model.units = Units::normalized;
  model.feature_names = feature_names.empty() ? default_feature_names(mip.n) : std::move(feature_names);
  for (std::size_t k = 0; k < mip.K; ++k) {
    std::vector<double> lo(mip.n), hi(mip.n);
    for (std::size_t j = 0; j < mip.n; ++j) {
      lo[j] = assignment[mip.l(j, k)];
      hi[j] = assignment[mip.u(j, k)];
    }
    model.boxes.emplace_back(std::move(lo), std::move(hi));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Objective and exact solver

/// (# positives predicted +1) + c_I (# negatives predicted -1) - c_e K.
inline double objective_value(const BoxModel& model, const Dataset& data, double c_I, double c_e) {
  const auto pred = predict_all(model, data);
  std::size_t tp = 0, tn = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] == 1 && pred[i] == 1) ++tp;
    if (data.labels[i] == -1 && pred[i] == -1) ++tn;
  }
  return static_cast<double>(tp) + c_I * static_cast<double>(tn) - c_e * static_cast<double>(model.num_boxes());
}

/// Midpoints between consecutive distinct values of feature j, plus one value
/// 0.5 below the minimum and one 0.5 above the maximum. Every achievable
/// point-in-box pattern is realized by boundaries taken from this grid.
inline std::vector<double> candidate_grid(const Dataset& data, std::size_t j) {
  if (data.size() == 0) throw InputError("candidate grid needs at least one example");
  std::vector<double> vals;
  for (std::size_t i = 0; i < data.size(); ++i) vals.push_back(data(i, j));
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  std::vector<double> grid{vals.front() - 0.5};
  for (std::size_t t = 1; t < vals.size(); ++t) grid.push_back(0.5 * (vals[t - 1] + vals[t]));
  grid.push_back(vals.back() + 0.5);
  return grid;
}

enum class Optimality { proven_optimal, incumbent };

struct ExactSolution {
  BoxModel model;  // normalized units, boundaries on the candidate grid
  double objective = 0.0;
  Optimality optimality = Optimality::incumbent;
  std::size_t nodes_explored = 0;
};

struct ExactSolverLimits {
  std::size_t node_budget = 50'000'000;
  std::size_t max_box_candidates = 4'000'000;  // per-box boundary combinations enumerated
};

namespace detail {

struct BoxOption {
  std::uint64_t mask = 0;
  std::vector<double> lower;
  std::vector<double> upper;
  double width = 0.0;
};

inline bool lex_less(const BoxOption& a, const BoxOption& b) {
  for (std::size_t j = 0; j < a.lower.size(); ++j) {
    if (a.lower[j] != b.lower[j]) return a.lower[j] < b.lower[j];
    if (a.upper[j] != b.upper[j]) return a.upper[j] < b.upper[j];
  }
  return false;
}

/// Distinct point sets reachable by one grid box. The representative of a
/// non-empty set is its widest box; the empty set keeps the first box.
inline std::vector<BoxOption> enumerate_box_options(const Dataset& data, std::size_t cap) {
  const std::size_t n = data.dims();
  std::vector<std::vector<double>> grids(n);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> pairs(n);
  std::vector<std::vector<std::uint64_t>> pair_masks(n);
  double total = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    grids[j] = candidate_grid(data, j);
    for (std::size_t a = 0; a < grids[j].size(); ++a)
      for (std::size_t b = a; b < grids[j].size(); ++b) {
        std::uint64_t mask = 0;
        for (std::size_t i = 0; i < data.size(); ++i)
          if (grids[j][a] <= data(i, j) && data(i, j) <= grids[j][b]) mask |= std::uint64_t{1} << i;
        pairs[j].push_back({a, b});
        pair_masks[j].push_back(mask);
      }
    total *= static_cast<double>(pairs[j].size());
  }
  if (total > static_cast<double>(cap))
    throw InputError("instance too large for the exact solver: " + format_exact(total) +
                     " box candidates (limit " + std::to_string(cap) + ")");

  std::vector<BoxOption> options;
  std::unordered_map<std::uint64_t, std::size_t> seen;
  std::vector<std::size_t> choice(n, 0);
  const std::uint64_t all = data.size() == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << data.size()) - 1;
  while (true) {
    std::uint64_t mask = all;
    double width = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      mask &= pair_masks[j][choice[j]];
      const auto [a, b] = pairs[j][choice[j]];
      width += grids[j][b] - grids[j][a];
    }
    auto [it, inserted] = seen.try_emplace(mask, options.size());
    if (inserted || (mask != 0 && width > options[it->second].width)) {
      BoxOption opt{mask, std::vector<double>(n), std::vector<double>(n), width};
      for (std::size_t j = 0; j < n; ++j) {
        opt.lower[j] = grids[j][pairs[j][choice[j]].first];
        opt.upper[j] = grids[j][pairs[j][choice[j]].second];
      }
      if (inserted)
        options.push_back(std::move(opt));
      else
        options[it->second] = std::move(opt);
    }
    std::size_t j = n;
    while (j > 0) {
      --j;
      if (++choice[j] < pairs[j].size()) break;
      choice[j] = 0;
      if (j == 0) return options;
    }
    if (n == 0) return options;
  }
}

}  // namespace detail

/// Exact optimum of the weighted-accuracy objective over unions of K grid
/// boxes, by depth-first branch and bound. Boxes are chosen as a
/// non-decreasing sequence of option indices, so each multiset of boxes is
/// visited once. Options dominated by another (no more positives, no fewer
/// negatives) are dropped. The bound adds every positive still reachable by
/// the remaining options and assumes no further negatives are covered.
inline ExactSolution solve_exact_small(const Dataset& data, const ExactBoxesConfig& cfg,
                                       ExactSolverLimits limits = {}) {
  cfg.validate();
  detail::require_normalized(data);
  if (data.size() == 0) throw InputError("exact solver needs at least one example");
  if (data.size() > 64) throw InputError("exact solver supports at most 64 examples, got " + std::to_string(data.size()));

  auto options = detail::enumerate_box_options(data, limits.max_box_candidates);
  std::uint64_t pos_mask = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.labels[i] == 1) pos_mask |= std::uint64_t{1} << i;
  const std::uint64_t neg_mask = ~pos_mask & (data.size() == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << data.size()) - 1);
  const std::size_t K = cfg.K;
  const double penalty = cfg.c_e * static_cast<double>(K);
  auto score = [&](std::uint64_t covered) {
    return static_cast<double>(std::popcount(covered & pos_mask)) +
           cfg.c_I * static_cast<double>(std::popcount(neg_mask & ~covered)) - penalty;
  };

  const auto empty_it = std::find_if(options.begin(), options.end(), [](const auto& o) { return o.mask == 0; });
  const detail::BoxOption empty_box = *empty_it;

  // Keep options not dominated by any other; among identical (pos, neg)
  // signatures masks are distinct, so domination is strict set inclusion.
  std::vector<detail::BoxOption> kept;
  for (std::size_t a = 0; a < options.size(); ++a) {
    const auto pa = options[a].mask & pos_mask, na = options[a].mask & neg_mask;
    bool dominated = false;
    for (std::size_t b = 0; b < options.size() && !dominated; ++b) {
      if (a == b) continue;
      const auto pb = options[b].mask & pos_mask, nb = options[b].mask & neg_mask;
      dominated = (pa & ~pb) == 0 && (nb & ~na) == 0 && (pa != pb || na != nb);
    }
    if (!dominated && pa != 0) kept.push_back(std::move(options[a]));
  }
  // Promising boxes first so good incumbents appear early.
  std::stable_sort(kept.begin(), kept.end(), [&](const auto& a, const auto& b) {
    const double sa = std::popcount(a.mask & pos_mask) - cfg.c_I * std::popcount(a.mask & neg_mask);
    const double sb = std::popcount(b.mask & pos_mask) - cfg.c_I * std::popcount(b.mask & neg_mask);
    if (sa != sb) return sa > sb;
    return detail::lex_less(a, b);
  });
  std::vector<std::uint64_t> suffix(kept.size() + 1, 0);
  for (std::size_t i = kept.size(); i > 0; --i) suffix[i - 1] = suffix[i] | kept[i - 1].mask;

  // Trivial incumbent: every box empty.
  double best = score(0);
  std::vector<std::size_t> best_choice;  // indices into kept; empty boxes fill the rest
  std::vector<std::size_t> path;
  std::size_t nodes = 0;
  bool exhausted = true;

  auto dfs = [&](auto&& self, std::size_t start, std::uint64_t covered) -> void {
    if (path.size() == K) return;
    for (std::size_t i = start; i < kept.size(); ++i) {
      if (nodes >= limits.node_budget) {
        exhausted = false;
        return;
      }
      ++nodes;
      const std::uint64_t next = covered | kept[i].mask;
      const double bound = static_cast<double>(std::popcount((next | suffix[i]) & pos_mask)) +
                           cfg.c_I * static_cast<double>(std::popcount(neg_mask & ~next)) - penalty;
      if (bound <= best) continue;
      path.push_back(i);
      const double value = score(next);
      if (value > best) {
        best = value;
        best_choice = path;
      }
      self(self, i, next);
      path.pop_back();
      if (!exhausted) return;
    }
  };
  dfs(dfs, 0, 0);

  std::vector<detail::BoxOption> boxes;
  for (auto i : best_choice) boxes.push_back(kept[i]);
  while (boxes.size() < K) boxes.push_back(empty_box);
  std::sort(boxes.begin(), boxes.end(), detail::lex_less);

  ExactSolution sol;
  sol.model.units = Units::normalized;
  sol.model.feature_names = data.feature_names;
  for (auto& b : boxes) sol.model.boxes.emplace_back(std::move(b.lower), std::move(b.upper));
  sol.objective = best;
  sol.optimality = exhausted ? Optimality::proven_optimal : Optimality::incumbent;
  sol.nodes_explored = nodes;
  return sol;
}

struct ExactTrainingResult {
  BoxModel model;  // original units
  ExactSolution solution;
  NormParams norm;
};

/// Normalizes, solves, and rescales. A boundary sitting on the outermost grid
/// value of a box that covers training points is opened to infinity.
inline ExactTrainingResult train_exact_boxes(const Dataset& data, const ExactBoxesConfig& cfg,
                                             ExactSolverLimits limits = {}) {
  data.require_both_classes();
  auto [scaled, norm] = normalize(data);
  auto sol = solve_exact_small(scaled, cfg, limits);
  BoxModel open = sol.model;
  for (std::size_t j = 0; j < scaled.dims(); ++j) {
    const auto grid = candidate_grid(scaled, j);
    for (auto& box : open.boxes) {
      if (box.lower[j] == grid.front() && box.upper[j] > grid.front()) box.lower[j] = -kInf;
      if (box.upper[j] == grid.back() && box.lower[j] < grid.back()) box.upper[j] = kInf;
    }
  }
  return {denormalize_model(open, norm), std::move(sol), std::move(norm)};
}

inline SweepTrainer exact_boxes_trainer(ExactBoxesConfig base, ExactSolverLimits limits = {}) {
  return [base, limits](const Dataset& train, std::span<const double> costs) {
    std::vector<BoxModel> models;
    for (double c : costs) {
      auto cfg = base;
      cfg.c_I = c;
      models.push_back(train_exact_boxes(train, cfg, limits).model);
    }
    return models;
  };
}

// ---------------------------------------------------------------------------
// Scaling heuristics

enum class NeighborhoodMode {
  any_dimension,  // negative is close to the positives' range in at least one feature
  all_dimensions, // negative lies within the slack-expanded bounding box of the positives
};

/// 10% of the positives' range in every feature.
inline std::vector<double> default_tau(const Dataset& data, double fraction = 0.1) {
  const auto pos = data.indices_of(1);
  std::vector<double> tau(data.dims(), 0.0);
  if (pos.empty()) return tau;
  for (std::size_t j = 0; j < data.dims(); ++j) {
    double lo = kInf, hi = -kInf;
    for (auto i : pos) {
      lo = std::min(lo, data(i, j));
      hi = std::max(hi, data(i, j));
    }
    tau[j] = fraction * (hi - lo);
  }
  return tau;
}

/// Keeps every positive, and every negative near the positives' per-feature
/// range [min, max] (distance at most tau_j), in one pass over the negatives.
inline Dataset neighborhood_filter(const Dataset& data, std::span<const double> tau,
                                   NeighborhoodMode mode = NeighborhoodMode::any_dimension) {
  if (tau.size() != data.dims()) throw InputError("tau must have one entry per feature");
  for (double t : tau)
    if (!(t >= 0.0)) throw InputError("tau must be >= 0");
  const auto pos = data.indices_of(1);
  std::vector<double> lo(data.dims(), kInf), hi(data.dims(), -kInf);
  for (auto i : pos)
    for (std::size_t j = 0; j < data.dims(); ++j) {
      lo[j] = std::min(lo[j], data(i, j));
      hi[j] = std::max(hi[j], data(i, j));
    }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] == 1) {
      keep.push_back(i);
      continue;
    }
    bool any = false, all = true;
    for (std::size_t j = 0; j < data.dims(); ++j) {
      const double d = std::max({0.0, lo[j] - data(i, j), data(i, j) - hi[j]});
      const bool close = d <= tau[j];
      any = any || close;
      all = all && close;
    }
    if (mode == NeighborhoodMode::any_dimension ? any : all) keep.push_back(i);
  }
  return data.subset(keep);
}

struct DecompositionOptions {
  std::uint64_t kmeans_seed = 0;
  std::size_t kmeans_restarts = 10;
  std::size_t kmeans_max_iter = 100;
  double tau_fraction = 0.1;
  NeighborhoodMode mode = NeighborhoodMode::any_dimension;
  ExactSolverLimits limits;
};

/// Clusters the positives into cfg.K groups and solves a one-box exact
/// problem per cluster on that cluster's positives plus nearby negatives.
/// Returns the union, in normalized units.
inline BoxModel cluster_decompose_mip(const Dataset& data, const ExactBoxesConfig& cfg,
                                      const DecompositionOptions& opt = {}) {
  cfg.validate();
  detail::require_normalized(data);
  const auto pos_rows = data.indices_of(1);
  if (pos_rows.size() < cfg.K)
    throw InputError("need at least K=" + std::to_string(cfg.K) + " positives, found " + std::to_string(pos_rows.size()));
  const auto clusters = kmeans(data.subset(pos_rows).features, cfg.K, opt.kmeans_seed, opt.kmeans_restarts,
                               opt.kmeans_max_iter);
  const auto neg_rows = data.indices_of(-1);

  BoxModel out;
  out.units = Units::normalized;
  out.feature_names = data.feature_names;
  auto one_box = cfg;
  one_box.K = 1;
  for (std::size_t k = 0; k < cfg.K; ++k) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < pos_rows.size(); ++r)
      if (clusters.assignments[r] == k) rows.push_back(pos_rows[r]);
    rows.insert(rows.end(), neg_rows.begin(), neg_rows.end());
    const auto local = data.subset(rows);
    const auto tau = default_tau(local, opt.tau_fraction);
    const auto filtered = neighborhood_filter(local, tau, opt.mode);
    auto sol = solve_exact_small(filtered, one_box, opt.limits);
    out.boxes.push_back(std::move(sol.model.boxes.front()));
  }
  return out;
}

}  // namespace boxdraw
