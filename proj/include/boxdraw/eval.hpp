#pragma once

// Evaluation protocol: ROC points from a sweep over the majority-class weight,
// area under the ROC convex hull (AUH), stratified cross-validation, and
// synthetic benchmark data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "boxdraw/core.hpp"
#include "boxdraw/random.hpp"

namespace boxdraw {

/// Confusion counts of one trained model on one evaluation set.
struct RocPoint {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double cost = 0.0;  // weight setting that produced the model

  std::size_t positives() const { return tp + fn; }
  std::size_t negatives() const { return fp + tn; }

  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocRate {
  double fpr = 0.0;
  double tpr = 0.0;

  friend bool operator==(const RocRate&, const RocRate&) = default;
};

struct AuhResult {
  std::vector<RocRate> hull;  // upper hull from (0,0) to (1,1), sorted by fpr
  double auh = 0.5;
};

inline RocPoint confusion(const BoxModel& model, const Dataset& data, double cost = 0.0) {
  const auto pred = predict_all(model, data);
  RocPoint p;
  p.cost = cost;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] == 1)
      (pred[i] == 1 ? p.tp : p.fn)++;
    else
      (pred[i] == 1 ? p.fp : p.tn)++;
  }
  return p;
}

/// True iff the model predicts the same label for every example.
inline bool is_trivial(const BoxModel& model, const Dataset& data) {
  const auto pred = predict_all(model, data);
  return std::adjacent_find(pred.begin(), pred.end(), std::not_equal_to<>()) == pred.end();
}

inline bool is_trivial(const RocPoint& p) { return p.tp + p.fp == 0 || p.tn + p.fn == 0; }

/// {0.1, 0.2, ..., 1.0}
inline std::vector<double> default_costs() {
  std::vector<double> costs;
  for (int i = 1; i <= 10; ++i) costs.push_back(i / 10.0);
  return costs;
}

inline void validate_costs(std::span<const double> costs) {
  if (costs.empty()) throw InputError("cost list is empty");
  for (double c : costs)
    if (!(c > 0.0 && c <= 1.0)) throw InputError("cost " + detail::format_exact(c) + " is outside (0,1]");
}

/// Trains one model per cost on the given training split. The callable is
/// free to do per-split work (such as hyperparameter selection) once before
/// the sweep.
using SweepTrainer =
    std::function<std::vector<BoxModel>(const Dataset& train, std::span<const double> costs)>;

inline std::vector<RocPoint> cost_sweep(const SweepTrainer& trainer, const Dataset& train,
                                        const Dataset& test, std::span<const double> costs) {
  validate_costs(costs);
  const auto models = trainer(train, costs);
  if (models.size() != costs.size())
    throw Error("trainer returned " + std::to_string(models.size()) + " models for " +
                std::to_string(costs.size()) + " costs");
  std::vector<RocPoint> points;
  points.reserve(costs.size());
  for (std::size_t c = 0; c < costs.size(); ++c) points.push_back(confusion(models[c], test, costs[c]));
  return points;
}

/// Area under the upper convex hull of the ROC points in rate space, with
/// the anchors (0,0) and (1,1) always included.
inline AuhResult convex_hull_auh(std::span<const RocPoint> points, std::size_t P, std::size_t N) {
  if (P == 0 || N == 0) throw InputError("AUH needs at least one positive and one negative");
  std::vector<RocRate> rates{{0.0, 0.0}, {1.0, 1.0}};
  for (const auto& p : points)
    rates.push_back({static_cast<double>(p.fp) / static_cast<double>(N),
                     static_cast<double>(p.tp) / static_cast<double>(P)});
  std::sort(rates.begin(), rates.end(), [](const RocRate& a, const RocRate& b) {
    return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr;
  });
  rates.erase(std::unique(rates.begin(), rates.end()), rates.end());

  AuhResult result;
  auto& hull = result.hull;
  for (const auto& r : rates) {
    while (hull.size() >= 2) {
      const auto& o = hull[hull.size() - 2];
      const auto& a = hull.back();
      const double cross = (a.fpr - o.fpr) * (r.tpr - o.tpr) - (a.tpr - o.tpr) * (r.fpr - o.fpr);
      if (cross < 0.0) break;
      hull.pop_back();
    }
    hull.push_back(r);
  }
  double area = 0.0;
  for (std::size_t i = 1; i < hull.size(); ++i)
    area += (hull[i].fpr - hull[i - 1].fpr) * (hull[i].tpr + hull[i - 1].tpr) * 0.5;
  result.auh = area;
  return result;
}

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Class-stratified k-fold partition. Positives are dealt round-robin after a
/// seeded shuffle; negatives continue the deal where the positives stopped,
/// so fold sizes differ by at most one.
inline std::vector<Fold> stratified_kfold(const Dataset& data, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw InputError("need at least 2 folds");
  const std::size_t P = data.positives();
  if (P < folds)
    throw InputError("cannot stratify " + std::to_string(P) + " positives into " +
                     std::to_string(folds) + " folds");
  Rng rng(seed);
  auto pos = data.indices_of(1);
  auto neg = data.indices_of(-1);
  rng.shuffle(std::span(pos));
  rng.shuffle(std::span(neg));

  std::vector<std::vector<std::size_t>> test(folds);
  for (std::size_t r = 0; r < pos.size(); ++r) test[r % folds].push_back(pos[r]);
  for (std::size_t r = 0; r < neg.size(); ++r) test[(pos.size() + r) % folds].push_back(neg[r]);

  std::vector<Fold> out(folds);
  std::vector<int> owner(data.size(), -1);
  for (std::size_t f = 0; f < folds; ++f) {
    std::sort(test[f].begin(), test[f].end());
    for (auto i : test[f]) owner[i] = static_cast<int>(f);
    out[f].test = std::move(test[f]);
  }
  for (std::size_t f = 0; f < folds; ++f)
    for (std::size_t i = 0; i < data.size(); ++i)
      if (owner[i] != static_cast<int>(f)) out[f].train.push_back(i);
  return out;
}

struct CvReport {
  std::vector<double> costs;
  std::vector<std::vector<RocPoint>> fold_points;  // [fold][cost]
  std::vector<AuhResult> fold_hulls;
  std::vector<double> fold_auh;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n-1)
  double trivial_fraction = 0.0;
};

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Each fold in turn is the test set; the trainer sweeps the costs on the
/// remaining folds. Triviality is judged on the test fold's predictions.
inline CvReport evaluate_cv(const Dataset& data, const SweepTrainer& trainer,
                            std::span<const double> costs, std::size_t folds, std::uint64_t seed) {
  validate_costs(costs);
  const auto partition = stratified_kfold(data, folds, seed);
  CvReport report;
  report.costs.assign(costs.begin(), costs.end());
  std::size_t trivial = 0;
  std::size_t models = 0;
  for (std::size_t f = 0; f < partition.size(); ++f) {
    const auto train = data.subset(partition[f].train);
    const auto test = data.subset(partition[f].test);
    if (test.negatives() == 0)
      throw InputError("test fold " + std::to_string(f) + " has no negative examples");
    auto points = cost_sweep(trainer, train, test, costs);
    for (const auto& p : points) {
      trivial += is_trivial(p) ? 1 : 0;
      ++models;
    }
    auto hull = convex_hull_auh(points, test.positives(), test.negatives());
    report.fold_auh.push_back(hull.auh);
    report.fold_hulls.push_back(std::move(hull));
    report.fold_points.push_back(std::move(points));
  }
  report.mean = mean_of(report.fold_auh);
  report.std = sample_std(report.fold_auh);
  report.trivial_fraction = static_cast<double>(trivial) / static_cast<double>(models);
  return report;
}

inline nlohmann::json report_to_json(const CvReport& report) {
  nlohmann::json j;
  j["folds"] = report.fold_auh.size();
  j["costs"] = report.costs;
  j["fold_auh"] = report.fold_auh;
  j["mean"] = report.mean;
  j["std"] = report.std;
  j["trivial_fraction"] = report.trivial_fraction;
  auto hulls = nlohmann::json::array();
  for (const auto& h : report.fold_hulls) {
    auto verts = nlohmann::json::array();
    for (const auto& v : h.hull) verts.push_back({v.fpr, v.tpr});
    hulls.push_back(std::move(verts));
  }
  j["hull_vertices"] = std::move(hulls);
  return j;
}

/// fold,cost,tp,fp,tn,fn
inline std::string report_points_csv(const CvReport& report) {
  std::string out = "fold,cost,tp,fp,tn,fn\n";
  for (std::size_t f = 0; f < report.fold_points.size(); ++f)
    for (const auto& p : report.fold_points[f])
      out += std::to_string(f) + "," + detail::format_exact(p.cost) + "," + std::to_string(p.tp) +
             "," + std::to_string(p.fp) + "," + std::to_string(p.tn) + "," + std::to_string(p.fn) + "\n";
  return out;
}

/// fold,fpr,tpr for plotting.
inline std::string report_hull_csv(const CvReport& report) {
  std::string out = "fold,fpr,tpr\n";
  for (std::size_t f = 0; f < report.fold_hulls.size(); ++f)
    for (const auto& v : report.fold_hulls[f].hull)
      out += std::to_string(f) + "," + detail::format_exact(v.fpr) + "," + detail::format_exact(v.tpr) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic 2-D data

enum class Shape { square, corner, diamond, castle };

inline Shape parse_shape(std::string_view name) {
  if (name == "square") return Shape::square;
  if (name == "corner") return Shape::corner;
  if (name == "diamond") return Shape::diamond;
  if (name == "castle" || name == "castle-like") return Shape::castle;
  throw InputError("unknown shape '" + std::string(name) + "' (expected square, corner, diamond, castle)");
}

/// Positive region of each synthetic shape on [-1,1]^2.
inline bool in_region(Shape shape, double x, double y) {
  switch (shape) {
    case Shape::square:
      return std::abs(x) <= 0.5 && std::abs(y) <= 0.5;
    case Shape::corner:
      return x >= 0.6 && y >= 0.6;
    case Shape::diamond:
      return std::abs(x) + std::abs(y) <= 0.6;
    case Shape::castle:
      return (x >= -0.6 && x <= 0.0 && y >= -0.5 && y <= 0.1) ||
             (x >= 0.0 && x <= 0.6 && y >= -0.5 && y <= 0.5);
  }
  return false;
}

/// m points on [-1,1]^2: positives uniform inside the shape's region,
/// negatives uniform outside it, with negatives/positives ~= ratio.
inline Dataset generate_synthetic(Shape shape, std::size_t m, double ratio, std::uint64_t seed) {
  if (m < 10) throw InputError("synthetic datasets need m >= 10");
  if (!(ratio >= 1.0)) throw InputError("imbalance ratio must be >= 1");
  const auto P = static_cast<std::size_t>(std::llround(static_cast<double>(m) / (1.0 + ratio)));
  const std::size_t positives = std::max<std::size_t>(P, 1);
  Rng rng(seed);
  Matrix x(m, 2);
  std::vector<int> y(m);
  for (std::size_t i = 0; i < m; ++i) {
    const bool want_positive = i < positives;
    double a = 0.0;
    double b = 0.0;
    do {
      a = rng.uniform(-1.0, 1.0);
      b = rng.uniform(-1.0, 1.0);
    } while (in_region(shape, a, b) != want_positive);
    x(i, 0) = a;
    x(i, 1) = b;
    y[i] = want_positive ? 1 : -1;
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span(order));
  return Dataset(std::move(x), std::move(y)).subset(order);
}

}  // namespace boxdraw
