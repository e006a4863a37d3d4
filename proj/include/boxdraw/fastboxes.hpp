#pragma once

// Fast Boxes: characterize the positive class with k-means clusters, then fit
// every box boundary as its own one-dimensional discriminative classifier
// under a regularized exponential loss, solved in closed form.
//
// Pipeline (all in normalized units): normalize -> kmeans on positives ->
// tight boxes -> divide space per boundary -> boundary sums -> closed-form
// revised boundaries -> expansion towards the nearest negative -> rescale.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "boxdraw/core.hpp"
#include "boxdraw/eval.hpp"
#include "boxdraw/random.hpp"

namespace boxdraw {

/// Which examples repel a cluster's boundaries.
enum class NegativeSet {
  majority_only,       // negative-class examples
  all_out_of_cluster,  // every example not assigned to the cluster
};

/// How a repelling example's distance outside the box in the other
/// dimensions enters its exponential-loss weight.
enum class DiagonalWeight {
  discount,   // farther diagonal points weigh less
  amplify,    // farther diagonal points weigh more
};

struct FastBoxesConfig {
  std::size_t K = 1;                // number of clusters, hence boxes
  double c = 1.0;                   // majority-class weight, (0,1]
  double beta = 0.0;                // expansion regularizer
  double epsilon_expand = 1e-3;     // gap left to the nearest negative (normalized units)
  double r_minus_threshold = 1e-8;  // negative mass at or below this drops the boundary
  std::uint64_t kmeans_seed = 0;
  std::size_t kmeans_restarts = 10;
  std::size_t kmeans_max_iter = 100;
  NegativeSet negatives = NegativeSet::majority_only;
  DiagonalWeight diagonal = DiagonalWeight::discount;

  void validate() const {
    if (K < 1) throw InputError("K must be at least 1");
    if (!(c > 0.0 && c <= 1.0)) throw InputError("c must be in (0,1]");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InputError("beta must be finite and >= 0");
    if (!(epsilon_expand > 0.0)) throw InputError("epsilon_expand must be > 0");
    if (!(r_minus_threshold > 0.0)) throw InputError("r_minus_threshold must be > 0");
    if (kmeans_restarts < 1) throw InputError("kmeans_restarts must be at least 1");
  }
};

inline nlohmann::json config_to_json(const FastBoxesConfig& cfg) {
  return {{"K", cfg.K},
          {"c", cfg.c},
          {"beta", cfg.beta},
          {"epsilon_expand", cfg.epsilon_expand},
          {"r_minus_threshold", cfg.r_minus_threshold},
          {"kmeans_seed", cfg.kmeans_seed},
          {"kmeans_restarts", cfg.kmeans_restarts},
          {"kmeans_max_iter", cfg.kmeans_max_iter},
          {"negatives_for_discrimination",
           cfg.negatives == NegativeSet::majority_only ? "majority_only" : "all_out_of_cluster"},
          {"diagonal_weight", cfg.diagonal == DiagonalWeight::discount ? "discount" : "amplify"}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline FastBoxesConfig fast_config_from_json(const nlohmann::json& j) {
  FastBoxesConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "K") cfg.K = value.get<std::size_t>();
      else if (key == "c") cfg.c = value.get<double>();
      else if (key == "beta") cfg.beta = value.get<double>();
      else if (key == "epsilon_expand") cfg.epsilon_expand = value.get<double>();
      else if (key == "r_minus_threshold") cfg.r_minus_threshold = value.get<double>();
      else if (key == "kmeans_seed") cfg.kmeans_seed = value.get<std::uint64_t>();
      else if (key == "kmeans_restarts") cfg.kmeans_restarts = value.get<std::size_t>();
      else if (key == "kmeans_max_iter") cfg.kmeans_max_iter = value.get<std::size_t>();
      else if (key == "negatives_for_discrimination") {
        const auto s = value.get<std::string>();
        if (s == "majority_only") cfg.negatives = NegativeSet::majority_only;
        else if (s == "all_out_of_cluster") cfg.negatives = NegativeSet::all_out_of_cluster;
        else throw InputError("unknown negatives_for_discrimination '" + s + "'");
      } else if (key == "diagonal_weight") {
        const auto s = value.get<std::string>();
        if (s == "discount") cfg.diagonal = DiagonalWeight::discount;
        else if (s == "amplify") cfg.diagonal = DiagonalWeight::amplify;
        else throw InputError("unknown diagonal_weight '" + s + "'");
      } else {
        throw InputError("unknown Fast Boxes config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed Fast Boxes config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Clustering

struct ClusterResult {
  std::vector<std::size_t> assignments;  // one per clustered point, in [0,K)
  Matrix centers;                        // K x n
  double within_cluster_sse = 0.0;

  std::size_t num_clusters() const { return centers.rows(); }
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) d += (a[j] - b[j]) * (a[j] - b[j]);
  return d;
}

inline Matrix cluster_means(const Matrix& pts, const std::vector<std::size_t>& assign, std::size_t K) {
  Matrix centers(K, pts.cols());
  std::vector<std::size_t> counts(K, 0);
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    auto c = centers.row(assign[i]);
    const auto p = pts.row(i);
    for (std::size_t j = 0; j < p.size(); ++j) c[j] += p[j];
    ++counts[assign[i]];
  }
  for (std::size_t k = 0; k < K; ++k)
    if (counts[k] > 0)
      for (auto& v : centers.row(k)) v /= static_cast<double>(counts[k]);
  return centers;
}

// Moves the point farthest from its own center into each empty cluster.
inline void repair_empty_clusters(const Matrix& pts, std::vector<std::size_t>& assign,
                                  const Matrix& centers, std::size_t K) {
  std::vector<std::size_t> counts(K, 0);
  for (auto a : assign) ++counts[a];
  for (std::size_t e = 0; e < K; ++e) {
    if (counts[e] > 0) continue;
    std::size_t far = pts.rows();
    double far_d = -1.0;
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      if (counts[assign[i]] < 2) continue;
      const double d = squared_distance(pts.row(i), centers.row(assign[i]));
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    --counts[assign[far]];
    assign[far] = e;
    ++counts[e];
  }
}

inline std::vector<std::size_t> nearest_centers(const Matrix& pts, const Matrix& centers) {
  std::vector<std::size_t> assign(pts.rows(), 0);
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centers.rows(); ++k) {
      const double d = squared_distance(pts.row(i), centers.row(k));
      if (d < best) {
        best = d;
        assign[i] = k;
      }
    }
  }
  return assign;
}

}  // namespace detail

/// Lloyd's k-means with Euclidean distance. Each restart starts from a seeded
/// random partition; the restart with the lowest within-cluster SSE wins
/// (earliest on ties). No cluster is ever left empty.
inline ClusterResult kmeans(const Matrix& points, std::size_t K, std::uint64_t seed,
                            std::size_t restarts = 10, std::size_t max_iter = 100) {
  if (K < 1) throw InputError("kmeans needs K >= 1");
  if (points.rows() < K)
    throw InputError("kmeans: " + std::to_string(points.rows()) + " points cannot form " +
                     std::to_string(K) + " clusters");
  Rng rng(seed);
  ClusterResult best;
  best.within_cluster_sse = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    std::vector<std::size_t> assign(points.rows());
    for (auto& a : assign) a = rng.below(K);
    detail::repair_empty_clusters(points, assign, detail::cluster_means(points, assign, K), K);

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
      const auto centers = detail::cluster_means(points, assign, K);
      auto next = detail::nearest_centers(points, centers);
      detail::repair_empty_clusters(points, next, centers, K);
      if (next == assign) break;
      assign = std::move(next);
    }

    ClusterResult res;
    res.centers = detail::cluster_means(points, assign, K);
    for (std::size_t i = 0; i < points.rows(); ++i)
      res.within_cluster_sse += detail::squared_distance(points.row(i), res.centers.row(assign[i]));
    res.assignments = std::move(assign);
    if (res.within_cluster_sse < best.within_cluster_sse) best = std::move(res);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Boxes and boundary problems

/// K x n lower and upper boundary matrices.
struct BoxBounds {
  Matrix lower;
  Matrix upper;

  std::size_t num_boxes() const { return lower.rows(); }
  std::size_t dims() const { return lower.cols(); }
};

/// Smallest enclosing axis-parallel box of every cluster.
inline BoxBounds tight_boxes(const Matrix& positives, const ClusterResult& clusters) {
  const std::size_t K = clusters.num_clusters();
  const std::size_t n = positives.cols();
  BoxBounds b{Matrix(K, n, kInf), Matrix(K, n, -kInf)};
  std::vector<std::size_t> counts(K, 0);
  for (std::size_t i = 0; i < positives.rows(); ++i) {
    const auto k = clusters.assignments[i];
    ++counts[k];
    for (std::size_t j = 0; j < n; ++j) {
      b.lower(k, j) = std::min(b.lower(k, j), positives(i, j));
      b.upper(k, j) = std::max(b.upper(k, j), positives(i, j));
    }
  }
  for (std::size_t k = 0; k < K; ++k)
    if (counts[k] == 0) throw InputError("cluster " + std::to_string(k) + " is empty");
  return b;
}

/// Example indices that influence the lower and upper boundary of dimension j.
struct SpaceDivision {
  std::vector<std::size_t> lower;
  std::vector<std::size_t> upper;
};

/// lower: points at or below the box's lower face in j, plus points inside
/// the box on the lower half of dimension j. upper mirrors it. A point on the
/// midline and inside the box belongs to both.
inline SpaceDivision divide_space(const Dataset& data, std::span<const double> box_lower,
                                  std::span<const double> box_upper, std::size_t j) {
  const double mid = 0.5 * (box_lower[j] + box_upper[j]);
  SpaceDivision div;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    bool inside_other = true;
    for (std::size_t p = 0; p < x.size() && inside_other; ++p)
      if (p != j) inside_other = box_lower[p] <= x[p] && x[p] <= box_upper[p];
    const double v = x[j];
    if (v <= box_lower[j] || (inside_other && box_lower[j] <= v && v <= mid)) div.lower.push_back(i);
    if (v >= box_upper[j] || (inside_other && mid <= v && v <= box_upper[j])) div.upper.push_back(i);
  }
  return div;
}

/// Exponential-loss masses of one (cluster, dimension) boundary pair, with
/// the starting boundary factored out.
struct BoundarySums {
  double r_plus_lower = 0.0;
  double r_minus_lower = 0.0;
  double r_plus_upper = 0.0;
  double r_minus_upper = 0.0;
};

namespace detail {

inline double hinge(double v) { return v > 0.0 ? v : 0.0; }

// Distance outside the box summed over every dimension except j.
inline double diagonal_excess(std::span<const double> x, std::span<const double> lo,
                              std::span<const double> hi, std::size_t j) {
  double s = 0.0;
  for (std::size_t p = 0; p < x.size(); ++p)
    if (p != j) s += hinge(x[p] - hi[p]) + hinge(lo[p] - x[p]);
  return s;
}

}  // namespace detail

/// cluster_of[i] is the cluster of positive example i, or -1 for negatives.
/// Sums run in dataset order so results do not depend on scheduling.
inline BoundarySums boundary_sums(const Dataset& data, std::span<const int> cluster_of, std::size_t k,
                                  std::span<const double> box_lower, std::span<const double> box_upper,
                                  std::size_t j, const SpaceDivision& div,
                                  NegativeSet negatives = NegativeSet::majority_only,
                                  DiagonalWeight diagonal = DiagonalWeight::discount) {
  const int kk = static_cast<int>(k);
  auto is_own_positive = [&](std::size_t i) { return data.labels[i] == 1 && cluster_of[i] == kk; };
  auto is_repelling = [&](std::size_t i) {
    return negatives == NegativeSet::majority_only ? data.labels[i] == -1 : cluster_of[i] != kk;
  };
  const double sign = diagonal == DiagonalWeight::discount ? -1.0 : 1.0;
  auto excess = [&](std::span<const double> x) {
    return sign * detail::diagonal_excess(x, box_lower, box_upper, j);
  };
  const double ls = box_lower[j];
  const double us = box_upper[j];
  BoundarySums s;
  for (auto i : div.lower) {
    const auto x = data.row(i);
    if (is_own_positive(i))
      s.r_plus_lower += std::exp(-(x[j] - ls + 1.0));
    else if (is_repelling(i))
      s.r_minus_lower += std::exp(x[j] - ls + 1.0 + excess(x));
  }
  for (auto i : div.upper) {
    const auto x = data.row(i);
    if (is_own_positive(i))
      s.r_plus_upper += std::exp(-(us - x[j] + 1.0));
    else if (is_repelling(i))
      s.r_minus_upper += std::exp(us - x[j] + 1.0 + excess(x));
  }
  return s;
}

/// Minimizer over l of
///   r_plus*exp(l - l_s + 1) + c*r_minus*exp(l_s - 1 - l) + beta*l.
/// Negative mass at or below the threshold drops the boundary (-inf).
inline double solve_lower(double l_s, double r_plus, double r_minus, double c, double beta,
                          double r_minus_threshold = 1e-8) {
  if (!(r_minus > r_minus_threshold)) return -kInf;
  if (!(r_plus > 0.0)) throw InputError("solve_lower: positive mass must be > 0");
  // (-beta + sqrt(beta^2 + 4cR+R-)) / (2R+), rewritten without cancellation.
  const double root = 2.0 * c * r_minus / (beta + std::sqrt(beta * beta + 4.0 * c * r_plus * r_minus));
  return l_s - 1.0 + std::log(root);
}

/// Minimizer over u of
///   r_plus*exp(u_s + 1 - u) + c*r_minus*exp(u - u_s - 1) - beta*u.
inline double solve_upper(double u_s, double r_plus, double r_minus, double c, double beta,
                          double r_minus_threshold = 1e-8) {
  if (!(r_minus > r_minus_threshold)) return kInf;
  if (!(r_plus > 0.0)) throw InputError("solve_upper: positive mass must be > 0");
  const double root = (beta + std::sqrt(beta * beta + 4.0 * c * r_plus * r_minus)) / (2.0 * c * r_minus);
  return u_s + 1.0 + std::log(root);
}

/// Final lower boundary: epsilon above the nearest negative below
/// min(l_r, l_s), never above min(l_r, l_s). `sorted_negatives` holds the
/// negatives' values in this dimension, ascending.
inline double expand_lower(double l_s, double l_r, std::span<const double> sorted_negatives,
                           double epsilon) {
  const double edge = std::min(l_r, l_s);
  const auto it = std::lower_bound(sorted_negatives.begin(), sorted_negatives.end(), edge);
  if (it == sorted_negatives.begin()) return -kInf;
  return std::min(*std::prev(it) + epsilon, edge);
}

inline double expand_upper(double u_s, double u_r, std::span<const double> sorted_negatives,
                           double epsilon) {
  const double edge = std::max(u_r, u_s);
  const auto it = std::upper_bound(sorted_negatives.begin(), sorted_negatives.end(), edge);
  if (it == sorted_negatives.end()) return kInf;
  return std::max(*it - epsilon, edge);
}

namespace detail {

inline std::vector<std::vector<double>> sorted_columns(const Matrix& m) {
  std::vector<std::vector<double>> cols(m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    cols[j].reserve(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) cols[j].push_back(m(i, j));
    std::sort(cols[j].begin(), cols[j].end());
  }
  return cols;
}

}  // namespace detail

/// Applies expand_lower/expand_upper to every boundary against the
/// negatives (rows of `negatives`).
inline BoxBounds final_expansion(const BoxBounds& start, const BoxBounds& revised, const Matrix& negatives,
                                 double epsilon) {
  const auto cols = detail::sorted_columns(negatives);
  BoxBounds out{Matrix(start.num_boxes(), start.dims()), Matrix(start.num_boxes(), start.dims())};
  for (std::size_t k = 0; k < start.num_boxes(); ++k) {
    for (std::size_t j = 0; j < start.dims(); ++j) {
      out.lower(k, j) = expand_lower(start.lower(k, j), revised.lower(k, j), cols[j], epsilon);
      out.upper(k, j) = expand_upper(start.upper(k, j), revised.upper(k, j), cols[j], epsilon);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

/// Boxes at each stage, in normalized units.
struct StagedBoxes {
  BoxBounds starting;
  BoxBounds revised;
  BoxBounds final;
};

/// Everything that does not depend on c, beta or epsilon: the clustering,
/// the tight boxes and every boundary sum. Sweeps over the cost and the
/// expansion parameter reuse one preparation.
struct FastBoxesPreparation {
  NormParams norm;
  std::vector<std::string> feature_names;
  ClusterResult clusters;
  std::vector<std::size_t> positive_rows;   // dataset rows of the clustered positives
  BoxBounds starting;
  std::vector<BoundarySums> sums;           // [k * n + j]
  std::vector<std::vector<double>> sorted_negatives;  // per dimension, normalized

  std::size_t num_boxes() const { return starting.num_boxes(); }
  std::size_t dims() const { return starting.dims(); }
  const BoundarySums& sum(std::size_t k, std::size_t j) const { return sums[k * dims() + j]; }
};

inline FastBoxesPreparation prepare_fast_boxes(const Dataset& data, const FastBoxesConfig& cfg) {
  cfg.validate();
  data.require_both_classes();
  if (data.positives() < cfg.K)
    throw InputError("Fast Boxes needs at least K=" + std::to_string(cfg.K) + " positives, found " +
                     std::to_string(data.positives()));
  auto [scaled, norm] = normalize(data);

  FastBoxesPreparation prep;
  prep.norm = std::move(norm);
  prep.feature_names = data.feature_names;
  prep.positive_rows = scaled.indices_of(1);
  const auto positives = scaled.subset(prep.positive_rows).features;
  prep.clusters = kmeans(positives, cfg.K, cfg.kmeans_seed, cfg.kmeans_restarts, cfg.kmeans_max_iter);
  prep.starting = tight_boxes(positives, prep.clusters);

  std::vector<int> cluster_of(scaled.size(), -1);
  for (std::size_t r = 0; r < prep.positive_rows.size(); ++r)
    cluster_of[prep.positive_rows[r]] = static_cast<int>(prep.clusters.assignments[r]);

  const std::size_t n = scaled.dims();
  prep.sums.resize(cfg.K * n);
  for (std::size_t k = 0; k < cfg.K; ++k) {
    const auto lo = prep.starting.lower.row(k);
    const auto hi = prep.starting.upper.row(k);
    for (std::size_t j = 0; j < n; ++j) {
      const auto div = divide_space(scaled, lo, hi, j);
      prep.sums[k * n + j] = boundary_sums(scaled, cluster_of, k, lo, hi, j, div, cfg.negatives, cfg.diagonal);
    }
  }
  prep.sorted_negatives = detail::sorted_columns(scaled.subset(scaled.indices_of(-1)).features);
  return prep;
}

inline StagedBoxes complete_fast_boxes(const FastBoxesPreparation& prep, const FastBoxesConfig& cfg) {
  cfg.validate();
  const std::size_t K = prep.num_boxes();
  const std::size_t n = prep.dims();
  StagedBoxes st{prep.starting, BoxBounds{Matrix(K, n), Matrix(K, n)}, BoxBounds{Matrix(K, n), Matrix(K, n)}};
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto& s = prep.sum(k, j);
      const double ls = st.starting.lower(k, j);
      const double us = st.starting.upper(k, j);
      const double lr = solve_lower(ls, s.r_plus_lower, s.r_minus_lower, cfg.c, cfg.beta, cfg.r_minus_threshold);
      const double ur = solve_upper(us, s.r_plus_upper, s.r_minus_upper, cfg.c, cfg.beta, cfg.r_minus_threshold);
      st.revised.lower(k, j) = lr;
      st.revised.upper(k, j) = ur;
      st.final.lower(k, j) = expand_lower(ls, lr, prep.sorted_negatives[j], cfg.epsilon_expand);
      st.final.upper(k, j) = expand_upper(us, ur, prep.sorted_negatives[j], cfg.epsilon_expand);
    }
  }
  return st;
}

/// Builds the original-unit model from the final boxes.
inline BoxModel fast_boxes_model(const FastBoxesPreparation& prep, const StagedBoxes& st) {
  BoxModel normalized;
  normalized.units = Units::normalized;
  normalized.feature_names = prep.feature_names;
  for (std::size_t k = 0; k < st.final.num_boxes(); ++k) {
    const auto lo = st.final.lower.row(k);
    const auto hi = st.final.upper.row(k);
    normalized.boxes.emplace_back(std::vector<double>(lo.begin(), lo.end()),
                                  std::vector<double>(hi.begin(), hi.end()));
  }
  return denormalize_model(normalized, prep.norm);
}

inline BoxModel train_fast_boxes(const Dataset& data, const FastBoxesConfig& cfg) {
  const auto prep = prepare_fast_boxes(data, cfg);
  return fast_boxes_model(prep, complete_fast_boxes(prep, cfg));
}

/// Per-boundary debugging log: k,j,side,start,r_plus,r_minus,revised,final.
inline std::string fast_boxes_trace_csv(const FastBoxesPreparation& prep, const StagedBoxes& st) {
  using detail::format_exact;
  std::string out = "k,j,side,start,r_plus,r_minus,revised,final\n";
  for (std::size_t k = 0; k < prep.num_boxes(); ++k) {
    for (std::size_t j = 0; j < prep.dims(); ++j) {
      const auto& s = prep.sum(k, j);
      const auto pre = std::to_string(k) + "," + std::to_string(j) + ",";
      out += pre + "lower," + format_exact(st.starting.lower(k, j)) + "," + format_exact(s.r_plus_lower) +
             "," + format_exact(s.r_minus_lower) + "," + format_exact(st.revised.lower(k, j)) + "," +
             format_exact(st.final.lower(k, j)) + "\n";
      out += pre + "upper," + format_exact(st.starting.upper(k, j)) + "," + format_exact(s.r_plus_upper) +
             "," + format_exact(s.r_minus_upper) + "," + format_exact(st.revised.upper(k, j)) + "," +
             format_exact(st.final.upper(k, j)) + "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hyperparameter selection

struct GridPoint {
  std::size_t K = 1;
  double beta = 0.0;

  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

/// K in {1..5} crossed with beta in {0, 0.01, 0.1, 0.5, 1}.
inline std::vector<GridPoint> default_grid() {
  std::vector<GridPoint> grid;
  for (std::size_t K = 1; K <= 5; ++K)
    for (double beta : {0.0, 0.01, 0.1, 0.5, 1.0}) grid.push_back({K, beta});
  return grid;
}

struct SelectionResult {
  FastBoxesConfig config;
  std::vector<double> mean_auh;  // per grid point; NaN where K exceeded a fold's positives
};

/// Inner cross-validation over (K, beta): the grid point with the highest mean
/// validation AUH wins; ties go to the smallest K, then the smallest beta.
/// Grid points whose K exceeds the positives of some training split are skipped.
inline SelectionResult select_hyperparameters_detailed(const Dataset& data, std::span<const GridPoint> grid,
                                                       std::size_t folds, std::span<const double> costs,
                                                       const FastBoxesConfig& base, std::uint64_t seed) {
  if (grid.empty()) throw InputError("hyperparameter grid is empty");
  validate_costs(costs);
  const auto partition = stratified_kfold(data, folds, seed);

  std::vector<double> total(grid.size(), 0.0);
  std::vector<bool> viable(grid.size(), true);
  for (const auto& fold : partition) {
    const auto train = data.subset(fold.train);
    const auto valid = data.subset(fold.test);
    if (valid.negatives() == 0) throw InputError("validation fold has no negative examples");

    std::vector<std::size_t> ks;
    for (const auto& g : grid)
      if (std::find(ks.begin(), ks.end(), g.K) == ks.end()) ks.push_back(g.K);
    for (auto K : ks) {
      FastBoxesConfig cfg = base;
      cfg.K = K;
      if (train.positives() < K) {
        for (std::size_t g = 0; g < grid.size(); ++g)
          if (grid[g].K == K) viable[g] = false;
        continue;
      }
      const auto prep = prepare_fast_boxes(train, cfg);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        if (grid[g].K != K) continue;
        std::vector<RocPoint> points;
        for (double c : costs) {
          cfg.c = c;
          cfg.beta = grid[g].beta;
          points.push_back(confusion(fast_boxes_model(prep, complete_fast_boxes(prep, cfg)), valid, c));
        }
        total[g] += convex_hull_auh(points, valid.positives(), valid.negatives()).auh;
      }
    }
  }

  SelectionResult result;
  result.config = base;
  std::vector<std::size_t> order;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    result.mean_auh.push_back(viable[g] ? total[g] / static_cast<double>(partition.size())
                                        : std::numeric_limits<double>::quiet_NaN());
    if (viable[g]) order.push_back(g);
  }
  if (order.empty()) throw InputError("no grid point is viable: every K exceeds the available positives");
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return grid[a].K != grid[b].K ? grid[a].K < grid[b].K : grid[a].beta < grid[b].beta;
  });
  std::size_t best = order.front();
  for (auto g : order)
    if (result.mean_auh[g] > result.mean_auh[best]) best = g;
  result.config.K = grid[best].K;
  result.config.beta = grid[best].beta;
  return result;
}

inline FastBoxesConfig select_hyperparameters(const Dataset& data, std::span<const GridPoint> grid,
                                              std::size_t folds, std::span<const double> costs,
                                              const FastBoxesConfig& base, std::uint64_t seed) {
  return select_hyperparameters_detailed(data, grid, folds, costs, base, seed).config;
}

/// Sweep trainer for evaluate_cv. With selection enabled, each training split
/// first picks (K, beta) by inner cross-validation.
inline SweepTrainer fast_boxes_trainer(FastBoxesConfig base, std::vector<GridPoint> grid = {},
                                       std::size_t inner_folds = 3, std::uint64_t seed = 0) {
  return [base, grid = std::move(grid), inner_folds, seed](const Dataset& train,
                                                           std::span<const double> costs) {
    FastBoxesConfig cfg = base;
    if (!grid.empty()) cfg = select_hyperparameters(train, grid, inner_folds, costs, base, seed);
    const auto prep = prepare_fast_boxes(train, cfg);
    std::vector<BoxModel> models;
    for (double c : costs) {
      cfg.c = c;
      models.push_back(fast_boxes_model(prep, complete_fast_boxes(prep, cfg)));
    }
    return models;
  };
}

}  // namespace boxdraw
