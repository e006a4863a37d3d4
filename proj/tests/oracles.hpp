#pragma once

// Independent reference computations. None of these call into the library's
// algorithms beyond plain data access and candidate_grid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <utility>
#include <vector>

#include "boxdraw/core.hpp"
#include "boxdraw/exactboxes.hpp"

namespace oracle {

// --- 1-D boundary objectives ------------------------------------------------

/// Exponential loss of the lower boundary l with the starting value factored out.
inline double lower_objective(double l, double l_s, double r_plus, double r_minus, double c, double beta) {
  return r_plus * std::exp(l - l_s + 1.0) + c * r_minus * std::exp(l_s - 1.0 - l) + beta * l;
}

inline double upper_objective(double u, double u_s, double r_plus, double r_minus, double c, double beta) {
  return r_plus * std::exp(u_s + 1.0 - u) + c * r_minus * std::exp(u - u_s - 1.0) - beta * u;
}

/// Golden-section search for the minimizer of a unimodal f on [a, b].
inline double golden_section(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// --- ROC hull ---------------------------------------------------------------

/// Area under the least concave majorant of the points plus (0,0) and (1,1),
/// evaluated by checking every pair of points at every abscissa.
inline double brute_force_auh(std::vector<std::pair<double, double>> pts) {
  pts.push_back({0.0, 0.0});
  pts.push_back({1.0, 1.0});
  std::set<double> xs;
  for (auto [x, y] : pts) xs.insert(x);
  auto hull_at = [&](double x) {
    double best = -1.0;
    for (auto [x1, y1] : pts)
      for (auto [x2, y2] : pts) {
        if (x1 > x || x2 < x) continue;
        const double y = x2 == x1 ? std::max(y1, y2) : y1 + (y2 - y1) * (x - x1) / (x2 - x1);
        best = std::max(best, y);
      }
    return best;
  };
  double area = 0.0;
  double px = *xs.begin(), py = hull_at(px);
  for (auto it = std::next(xs.begin()); it != xs.end(); ++it) {
    const double y = hull_at(*it);
    area += (*it - px) * (py + y) / 2.0;
    px = *it;
    py = y;
  }
  return area;
}

// --- Exact boxes ------------------------------------------------------------

/// Weighted accuracy from counts, in the arithmetic order used throughout:
/// tp + c_I * tn - c_e * K.
inline double counts_objective(std::size_t tp, std::size_t tn, double c_I, double c_e, std::size_t K) {
  return static_cast<double>(tp) + c_I * static_cast<double>(tn) - c_e * static_cast<double>(K);
}

/// Objective of a union of boxes, by direct containment.
inline double direct_objective(const std::vector<boxdraw::AxisBox>& boxes, const boxdraw::Dataset& data, double c_I,
                               double c_e) {
  std::size_t tp = 0, tn = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    bool inside = false;
    for (const auto& b : boxes) {
      bool in = true;
      for (std::size_t j = 0; j < data.dims(); ++j) in = in && b.lower[j] <= data(i, j) && data(i, j) <= b.upper[j];
      inside = inside || in;
    }
    tp += data.labels[i] == 1 && inside;
    tn += data.labels[i] == -1 && !inside;
  }
  return counts_objective(tp, tn, c_I, c_e, boxes.size());
}

/// Best objective over every K-tuple of boxes whose boundaries lie on the
/// candidate grids. Boxes are visited through the full grid product; tuples
/// are formed from the distinct point sets they produce (the objective of a
/// tuple depends only on those sets).
inline double exhaustive_exact(const boxdraw::Dataset& data, std::size_t K, double c_I, double c_e) {
  const std::size_t n = data.dims();
  std::vector<std::vector<double>> grids;
  for (std::size_t j = 0; j < n; ++j) grids.push_back(boxdraw::candidate_grid(data, j));
  std::set<std::uint64_t> sets;
  std::vector<std::size_t> a(n, 0), b(n, 0);
  std::function<void(std::size_t)> rec = [&](std::size_t j) {
    if (j == n) {
      std::uint64_t mask = 0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        bool in = true;
        for (std::size_t p = 0; p < n; ++p) in = in && grids[p][a[p]] <= data(i, p) && data(i, p) <= grids[p][b[p]];
        if (in) mask |= std::uint64_t{1} << i;
      }
      sets.insert(mask);
      return;
    }
    for (a[j] = 0; a[j] < grids[j].size(); ++a[j])
      for (b[j] = a[j]; b[j] < grids[j].size(); ++b[j]) rec(j + 1);
  };
  rec(0);
  const std::vector<std::uint64_t> masks(sets.begin(), sets.end());
  auto score = [&](std::uint64_t covered) {
    std::size_t tp = 0, tn = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const bool in = (covered >> i) & 1;
      tp += data.labels[i] == 1 && in;
      tn += data.labels[i] == -1 && !in;
    }
    return counts_objective(tp, tn, c_I, c_e, K);
  };
  double best = -1e300;
  std::function<void(std::size_t, std::uint64_t)> tuple = [&](std::size_t depth, std::uint64_t covered) {
    if (depth == K) {
      best = std::max(best, score(covered));
      return;
    }
    for (auto m : masks) tuple(depth + 1, covered | m);
  };
  tuple(0, 0);
  return best;
}

// --- Generalization bound -----------------------------------------------------

/// K=2, n=3, M_j=10, m=1000, delta=0.05, evaluated with 50-digit arithmetic
/// (mpmath) before the implementation existed:
/// sqrt((2*3*log(45) - log(2) + log(20)) / 2000).
inline constexpr double kBoundK2n3M10m1000d005 = 0.11212171964346597;

}  // namespace oracle
