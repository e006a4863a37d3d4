// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "boxdraw/boxdraw.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace boxdraw;
using testing_support::Gen;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// --- 1 ------------------------------------------------------------------------------

void closed_forms(Outcome& o) {
  Gen g(1001);
  double worst_gap = 0.0, worst_slope = 0.0;
  for (int t = 0; t < 200; ++t) {
    const double s = g.uniform(-1, 1);
    const double rp = g.uniform(std::exp(-1.0), 5.0);
    const double rm = g.uniform(0.01, 5.0);
    const double c = g.uniform(0.05, 1.0);
    const double beta = g.uniform(0.0, 2.0);
    auto fl = [&](double l) { return oracle::lower_objective(l, s, rp, rm, c, beta); };
    auto fu = [&](double u) { return oracle::upper_objective(u, s, rp, rm, c, beta); };
    const double l = solve_lower(s, rp, rm, c, beta);
    const double u = solve_upper(s, rp, rm, c, beta);
    const double gap = std::max(std::abs(l - oracle::golden_section(fl, s - 30, s + 30)),
                                std::abs(u - oracle::golden_section(fu, s - 30, s + 30)));
    const double slope = std::max(std::abs(oracle::central_difference(fl, l)), std::abs(oracle::central_difference(fu, u)));
    worst_gap = std::max(worst_gap, gap);
    worst_slope = std::max(worst_slope, slope);
    o.require(gap <= 1e-6, "tuple " + std::to_string(t) + " differs from the numerical minimizer");
    o.require(slope <= 1e-6, "tuple " + std::to_string(t) + " has nonzero derivative");
  }
  o.detail << "200 tuples, max |closed - numeric| " << worst_gap << ", max |f'| " << worst_slope;
}

// --- 2 and 3 ------------------------------------------------------------------------------

struct Instance {
  Dataset raw;
  ExactBoxesConfig cfg;
};

std::vector<Instance> exact_instances() {
  Gen g(2002);
  std::vector<Instance> out;
  while (out.size() < 50) {
    const std::size_t m = 4 + g.index(9), n = 1 + g.index(2);
    auto raw = testing_support::random_dataset(g, m, n, 0.4, g.coin() ? 8 : 0);
    ExactBoxesConfig cfg;
    cfg.K = 1 + g.index(2);
    if (raw.positives() < cfg.K) cfg.K = 1;
    cfg.c_I = g.coin() ? 1.0 : g.uniform(0.1, 1.0);
    cfg.c_e = g.coin() ? 0.0 : g.uniform(0.0, 1.0);
    out.push_back({std::move(raw), cfg});
  }
  return out;
}

void oracle_equivalence(Outcome& o, const std::vector<Instance>& instances) {
  std::size_t max_m = 0, max_n = 0, max_K = 0;
  for (std::size_t t = 0; t < instances.size(); ++t) {
    const auto& [raw, cfg] = instances[t];
    const auto data = normalize(raw).first;
    max_m = std::max(max_m, data.size());
    max_n = std::max(max_n, data.dims());
    max_K = std::max(max_K, cfg.K);
    const auto sol = solve_exact_small(data, cfg);
    const auto tag = "instance " + std::to_string(t);
    o.require(sol.optimality == Optimality::proven_optimal, tag + " not proven optimal");
    o.require(sol.objective == oracle::exhaustive_exact(data, cfg.K, cfg.c_I, cfg.c_e), tag + " objective differs from enumeration");
    const auto mip = build_mip(data, cfg);
    o.require(check_feasibility(mip, lift_assignment(mip, data, sol.model, cfg)).empty(), tag + " lifted assignment infeasible");
  }
  o.detail << instances.size() << " instances (m<=" << max_m << ", n<=" << max_n << ", K<=" << max_K
           << "), exact objective equality and feasible lifts";
}

void gold_standard(Outcome& o, const std::vector<Instance>& instances) {
  std::size_t violations = 0;
  double min_margin = kInf;
  for (const auto& [raw, cfg] : instances) {
    const auto exact = solve_exact_small(normalize(raw).first, cfg);
    FastBoxesConfig fc;
    fc.K = cfg.K;
    fc.c = cfg.c_I;
    const auto fast = train_fast_boxes(raw, fc);
    const double margin = exact.objective - objective_value(fast, raw, cfg.c_I, cfg.c_e);
    min_margin = std::min(min_margin, margin);
    violations += margin < 0.0;
  }
  o.require(violations == 0, std::to_string(violations) + " instances where Fast Boxes beats the exact optimum");
  o.detail << instances.size() << " instances, " << violations << " violations, min exact - fast " << min_margin;
}

// --- 4 and 5 ------------------------------------------------------------------------------

void iris0(Outcome& o) {
  const auto data = load_csv(testing_support::data_file("iris0.csv"), "class", "positive");
  const auto costs = default_costs();
  const auto r = evaluate_cv(data, fast_boxes_trainer(FastBoxesConfig{}, default_grid()), costs, 10, 0);
  o.require(r.mean >= 0.99, "mean AUH below 0.99");
  o.detail << "10-fold mean AUH " << r.mean << " (std " << r.std << ")";
}

void square(Outcome& o) {
  const auto data = generate_synthetic(Shape::square, 10000, 11, 2024);
  const auto costs = default_costs();
  const auto r = evaluate_cv(data, fast_boxes_trainer(FastBoxesConfig{}, default_grid()), costs, 10, 0);
  o.require(r.mean >= 0.97, "mean test AUH below 0.97");
  o.detail << "m=10000, " << data.positives() << " positives, 10-fold mean test AUH " << r.mean << " (std " << r.std
           << ")";
}

// --- 6 -------------------------------------------------------------------------------------

void auh_calculus(Outcome& o) {
  o.require(convex_hull_auh({}, 5, 5).auh == 0.5, "anchors-only AUH is not 0.5");
  const std::vector<RocPoint> perfect{{5, 0, 5, 0, 0.0}};
  o.require(convex_hull_auh(perfect, 5, 5).auh == 1.0, "perfect point AUH is not 1");
  Gen g(6006);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t P = 1 + g.index(30), N = 1 + g.index(60);
    std::vector<RocPoint> pts;
    std::vector<std::pair<double, double>> rates;
    for (std::size_t k = 0; k < 1 + g.index(15); ++k) {
      const std::size_t tp = g.index(P + 1), fp = g.index(N + 1);
      pts.push_back({tp, fp, N - fp, P - tp, 0.0});
      rates.push_back({double(fp) / double(N), double(tp) / double(P)});
    }
    const auto base = convex_hull_auh(pts, P, N);
    worst = std::max(worst, std::abs(base.auh - oracle::brute_force_auh(rates)));
    auto more = pts;
    for (const auto& v : base.hull) {
      const auto tp = static_cast<std::size_t>(std::floor(v.tpr * double(P) * g.uniform(0, 1)));
      const auto fp = static_cast<std::size_t>(std::ceil(v.fpr * double(N)));
      more.push_back({tp, fp, N - fp, P - tp, 0.0});
    }
    more.push_back(pts.back());
    o.require(convex_hull_auh(more, P, N).auh == base.auh, "dominated points changed AUH on set " + std::to_string(t));
  }
  o.require(worst <= 1e-12, "hull area differs from brute force");
  o.detail << "anchors 0.5, perfect 1.0, 100 sets, max |hull - brute force| " << worst;
}

// --- 7 -------------------------------------------------------------------------------------

void bound_sanity(Outcome& o) {
  BoundInputs trivial;
  trivial.K = 1;
  trivial.M = {2};
  trivial.m = 1000;
  trivial.delta = 1.0;
  o.require(generalization_bound(trivial) == 0.0, "trivial input does not give 0");
  BoundInputs in;
  in.K = 2;
  in.M = {10, 10, 10};
  in.delta = 0.05;
  in.m = 100;
  const double b2 = generalization_bound(in);
  double worst = 0.0;
  for (std::size_t m : {10000u, 1000000u}) {
    in.m = m;
    const double expected = b2 * std::sqrt(100.0 / static_cast<double>(m));
    worst = std::max(worst, std::abs(generalization_bound(in) - expected) / expected);
  }
  o.require(worst <= 1e-12, "1/sqrt(m) scaling off");
  in.m = 1000;
  const double v = generalization_bound(in);
  o.require(std::abs(v - oracle::kBoundK2n3M10m1000d005) <= 1e-10, "precomputed tuple mismatch");
  o.detail << "scaling rel. error " << worst << ", tuple value " << v;
}

// --- 8 -------------------------------------------------------------------------------------

void expansion(Outcome& o) {
  Gen g(8008);
  std::size_t checked = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 20 + g.index(80), n = 1 + g.index(4);
    const auto raw = testing_support::random_dataset(g, m, n, 0.3, g.coin() ? 6 : 0);
    FastBoxesConfig cfg;
    cfg.K = 1 + g.index(std::min<std::size_t>(4, raw.positives()));
    cfg.c = g.uniform(0.05, 1.0);
    cfg.beta = g.coin() ? 0.0 : g.uniform(0.0, 2.0);
    cfg.kmeans_seed = t;
    const auto prep = prepare_fast_boxes(raw, cfg);
    const auto st = complete_fast_boxes(prep, cfg);
    const auto scaled = apply_normalization(raw, prep.norm);
    const auto model = fast_boxes_model(prep, st);
    const auto tag = "model " + std::to_string(t);
    for (std::size_t k = 0; k < cfg.K; ++k)
      for (std::size_t j = 0; j < n; ++j) {
        o.require(st.final.lower(k, j) <= st.starting.lower(k, j), tag + " lower boundary contracted");
        o.require(st.final.upper(k, j) >= st.starting.upper(k, j), tag + " upper boundary contracted");
      }
    for (std::size_t p = 0; p < prep.positive_rows.size(); ++p) {
      const auto row = prep.positive_rows[p];
      const auto k = static_cast<std::size_t>(prep.clusters.assignments[p]);
      for (std::size_t j = 0; j < n; ++j) {
        const double x = scaled(row, j);
        o.require(st.final.lower(k, j) <= x && x <= st.final.upper(k, j), tag + " positive outside its final box");
      }
      o.require(model.boxes[k].contains(raw.row(row)), tag + " positive outside its box in original units");
      ++checked;
    }
  }
  o.detail << "100 models, " << checked << " clustered positives contained, l_f <= l_s and u_f >= u_s throughout";
}

// --- 9 -------------------------------------------------------------------------------------

int run_quiet(const std::string& args) {
  const int status = std::system((std::string(BOXDRAW_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void determinism(Outcome& o) {
  testing_support::TempDir tmp;
  const auto q = [](const std::filesystem::path& p) { return "'" + p.string() + "'"; };
  o.require(run_quiet("generate --shape castle --m 1500 --ratio 6 --seed 9 --out " + q(tmp / "d.csv")) == 0,
            "generate failed");
  const std::string args = "eval " + q(tmp / "d.csv") + " --folds 5 --seed 11";
  o.require(run_quiet(args + " --out " + q(tmp / "a.json")) == 0, "first eval failed");
  o.require(run_quiet(args + " --out " + q(tmp / "b.json")) == 0, "second eval failed");
  if (!o.pass) return;
  const auto a = read_file((tmp / "a.json").string());
  const auto b = read_file((tmp / "b.json").string());
  o.require(a == b, "reports differ");
  o.detail << "two eval runs, " << a.size() << "-byte reports " << (a == b ? "identical" : "differ");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    std::string name;
    double time_limit;  // seconds; 0 means none stated
    std::function<void(Outcome&)> run;
  };
  std::vector<Instance> instances;
  const std::vector<Criterion> criteria{
      {1, "closed-form boundaries", 1.0, closed_forms},
      {2, "exact solver matches enumeration", 60.0,
       [&](Outcome& o) {
         instances = exact_instances();
         oracle_equivalence(o, instances);
       }},
      {3, "exact dominates Fast Boxes", 0.0, [&](Outcome& o) { gold_standard(o, instances); }},
      {4, "iris0 cross-validated AUH", 10.0, iris0},
      {5, "synthetic square recovery", 60.0, square},
      {6, "AUH calculus", 0.0, auh_calculus},
      {7, "bound sanity", 0.0, bound_sanity},
      {8, "expansion guarantee", 0.0, expansion},
      {9, "eval determinism", 0.0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = seconds_since(t0);
    if (c.time_limit > 0.0) o.require(secs < c.time_limit, "runtime over " + std::to_string(c.time_limit) + " s");
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.str().c_str(), secs);
  }
  return failures == 0 ? 0 : 1;
}
