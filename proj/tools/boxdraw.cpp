// Command-line front end: train, predict, eval, emit-lp, bound, generate, describe.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "boxdraw/boxdraw.hpp"

namespace fs = std::filesystem;
using namespace boxdraw;

namespace {

struct DataFlags {
  std::string label_column = "class";
  std::string positive_label = "positive";

  void add(CLI::App* app) {
    app->add_option("--label-column", label_column, "Name of the label column")->capture_default_str();
    app->add_option("--positive-label", positive_label, "Label value of the minority (positive) class")
        ->capture_default_str();
  }
};

struct TrainerFlags {
  std::string trainer = "fast";
  std::optional<std::size_t> k;
  std::optional<double> c;
  std::optional<double> ci;
  double ce = 0.0;
  std::optional<double> beta;
  std::optional<double> epsilon;
  std::optional<double> margin;
  std::uint64_t seed = 0;
  std::size_t node_budget = ExactSolverLimits{}.node_budget;
  std::string config_path;

  void add(CLI::App* app) {
    app->add_option("--trainer", trainer, "fast or exact")->check(CLI::IsMember({"fast", "exact"}))->capture_default_str();
    app->add_option("--k", k, "Number of boxes");
    app->add_option("--c", c, "Majority-class weight in (0,1]");
    app->add_option("--ci", ci, "Majority-class weight in (0,1] (same as --c)");
    app->add_option("--ce", ce, "Per-box penalty for the objective")->capture_default_str();
    app->add_option("--beta", beta, "Expansion regularizer (fast)");
    app->add_option("--epsilon", epsilon, "Gap left before the nearest negative, normalized units (fast)");
    app->add_option("--margin", margin, "Point-to-boundary margin v (exact)");
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--node-budget", node_budget, "Branch-and-bound node limit (exact)")->capture_default_str();
    app->add_option("--config", config_path, "JSON file with trainer settings; flags override it");
  }

  bool exact() const { return trainer == "exact"; }

  double weight() const {
    if (c && ci && *c != *ci) throw InputError("--c and --ci disagree");
    return c ? *c : ci ? *ci : 1.0;
  }

  std::optional<nlohmann::json> config_json() const {
    if (config_path.empty()) return std::nullopt;
    try {
      return nlohmann::json::parse(read_file(config_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(config_path + ": " + e.what());
    }
  }

  FastBoxesConfig fast() const {
    if (margin) throw InputError("--margin applies only to --trainer exact");
    FastBoxesConfig cfg;
    if (auto j = config_json()) cfg = fast_config_from_json(*j);
    if (k) cfg.K = *k;
    if (c || ci) cfg.c = weight();
    if (beta) cfg.beta = *beta;
    if (epsilon) cfg.epsilon_expand = *epsilon;
    cfg.kmeans_seed = seed;
    cfg.validate();
    return cfg;
  }

  ExactBoxesConfig exact_config() const {
    if (beta) throw InputError("--beta applies only to --trainer fast");
    if (epsilon) throw InputError("--epsilon applies only to --trainer fast");
    ExactBoxesConfig cfg;
    if (auto j = config_json()) cfg = exact_config_from_json(*j);
    if (k) cfg.K = *k;
    if (c || ci) cfg.c_I = weight();
    cfg.c_e = ce;
    if (margin) cfg.v = *margin;
    cfg.validate();
    return cfg;
  }

  ExactSolverLimits limits() const {
    ExactSolverLimits l;
    l.node_budget = node_budget;
    return l;
  }
};

std::string accuracy_line(std::string_view cls, std::size_t correct, std::size_t total) {
  const double acc = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  return std::string(cls) + " accuracy: " + detail::format_exact(acc) + " (" + std::to_string(correct) + "/" +
         std::to_string(total) + ")\n";
}

std::string accuracy_summary(const Dataset& data, const std::vector<int>& pred) {
  std::size_t tp = 0, tn = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    tp += data.labels[i] == 1 && pred[i] == 1;
    tn += data.labels[i] == -1 && pred[i] == -1;
  }
  return accuracy_line("positive", tp, data.positives()) + accuracy_line("negative", tn, data.negatives());
}

// ---------------------------------------------------------------------------

struct TrainCmd {
  std::string input, output, out, trace;
  DataFlags data;
  TrainerFlags trainer;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("train", "Train a box model and save it as JSON");
    app->add_option("input", input, "Training CSV")->required();
    app->add_option("output", output, "Model JSON path");
    app->add_option("--out", out, "Model JSON path");
    app->add_option("--trace", trace, "Write per-boundary Fast Boxes stages as CSV");
    data.add(app);
    trainer.add(app);
  }

  int run() {
    const auto path = !out.empty() ? out : output;
    if (path.empty()) throw InputError("train needs an output path (positional or --out)");
    const auto ds = load_csv(input, data.label_column, data.positive_label);
    ds.require_both_classes();
    BoxModel model;
    std::string extra;
    double weight = 1.0;
    if (trainer.exact()) {
      if (!trace.empty()) throw InputError("--trace applies only to --trainer fast");
      const auto cfg = trainer.exact_config();
      weight = cfg.c_I;
      auto result = train_exact_boxes(ds, cfg, trainer.limits());
      model = std::move(result.model);
      extra = std::string("optimality: ") +
              (result.solution.optimality == Optimality::proven_optimal ? "proven_optimal" : "incumbent") +
              "\nnodes: " + std::to_string(result.solution.nodes_explored) + "\n";
    } else {
      const auto cfg = trainer.fast();
      weight = cfg.c;
      const auto prep = prepare_fast_boxes(ds, cfg);
      const auto staged = complete_fast_boxes(prep, cfg);
      model = fast_boxes_model(prep, staged);
      if (!trace.empty()) write_file_atomic(trace, fast_boxes_trace_csv(prep, staged));
    }
    save_model(model, path);
    std::cout << "trainer: " << trainer.trainer << "\n"
              << "K: " << model.num_boxes() << "\n"
              << accuracy_summary(ds, predict_all(model, ds))
              << "objective: " << detail::format_exact(objective_value(model, ds, weight, trainer.ce)) << "\n"
              << extra;
    return 0;
  }
};

struct PredictCmd {
  std::string model_path, input, out;
  DataFlags data;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("predict", "Append a prediction column to a CSV");
    app->add_option("model", model_path, "Model JSON")->required();
    app->add_option("input", input, "CSV with the model's feature columns")->required();
    app->add_option("--out", out, "Output CSV (default: standard output)");
    data.add(app);
  }

  int run() {
    const auto model = load_model(model_path);
    const auto table = read_csv_table(input);
    std::vector<std::size_t> cols;
    for (const auto& name : model.feature_names) {
      const auto c = table.column(name);
      if (!c) throw InputError(input + ": feature column '" + name + "' required by the model is missing");
      cols.push_back(*c);
    }
    if (table.column("prediction")) throw InputError(input + ": already has a 'prediction' column");
    const auto label_col = table.column(data.label_column);

    std::string csv;
    for (std::size_t c = 0; c < table.header.size(); ++c) csv += table.header[c] + ",";
    csv += "prediction\n";
    Dataset labelled;
    labelled.feature_names = model.feature_names;
    std::vector<int> preds;
    std::vector<double> x(cols.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto v = detail::parse_double(table.rows[r][cols[j]]);
        if (!v)
          throw InputError(input + ": row " + std::to_string(r + 1) + ", column '" + model.feature_names[j] +
                           "': cannot parse '" + table.rows[r][cols[j]] + "'");
        x[j] = *v;
      }
      const int p = predict(model, x);
      csv += table.raw_lines[r] + "," + (p == 1 ? "1" : "-1") + "\n";
      if (label_col) {
        labelled.features.append_row(x);
        labelled.labels.push_back(detail::trim(table.rows[r][*label_col]) == data.positive_label ? 1 : -1);
        preds.push_back(p);
      }
    }
    if (out.empty()) {
      std::cout << csv;
    } else {
      write_file_atomic(out, csv);
    }
    if (label_col && !preds.empty()) (out.empty() ? std::cerr : std::cout) << accuracy_summary(labelled, preds);
    return 0;
  }
};

struct EvalCmd {
  std::string input, out;
  DataFlags data;
  TrainerFlags trainer;
  std::vector<double> costs;
  std::size_t folds = 10;
  std::size_t inner_folds = 3;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("eval", "Stratified cross-validated AUH of a cost sweep");
    app->add_option("input", input, "Dataset CSV")->required();
    app->add_option("--out", out, "Report JSON path; .points.csv and .hull.csv are written beside it")->required();
    app->add_option("--costs", costs, "Comma-separated class weights (default 0.1..1.0)")->delimiter(',');
    app->add_option("--folds", folds, "Outer folds")->capture_default_str();
    app->add_option("--inner-folds", inner_folds, "Folds for (K, beta) selection (fast)")->capture_default_str();
    data.add(app);
    trainer.add(app);
  }

  int run() {
    if (folds < 2) throw InputError("--folds must be at least 2");
    if (costs.empty()) costs = default_costs();
    validate_costs(costs);
    const auto ds = load_csv(input, data.label_column, data.positive_label);
    ds.require_both_classes();
    if (trainer.c || trainer.ci) throw InputError("eval sweeps the class weight; use --costs instead of --c/--ci");
    SweepTrainer sweep;
    nlohmann::json settings{{"trainer", trainer.trainer}, {"folds", folds}, {"seed", trainer.seed}};
    if (trainer.exact()) {
      const auto cfg = trainer.exact_config();
      settings["config"] = config_to_json(cfg);
      sweep = exact_boxes_trainer(cfg, trainer.limits());
    } else {
      const auto cfg = trainer.fast();
      const bool select = !trainer.k && !trainer.beta && trainer.config_path.empty();
      settings["config"] = config_to_json(cfg);
      settings["selection"] = select ? "inner-cv" : "fixed";
      if (select) settings["inner_folds"] = inner_folds;
      sweep = fast_boxes_trainer(cfg, select ? default_grid() : std::vector<GridPoint>{}, inner_folds, trainer.seed);
    }
    const auto report = evaluate_cv(ds, sweep, costs, folds, trainer.seed);
    auto j = report_to_json(report);
    j["settings"] = settings;
    const fs::path base(out);
    auto sibling = [&](const std::string& suffix) {
      auto p = base;
      p.replace_extension(suffix);
      return p;
    };
    write_file_atomic(sibling(".points.csv"), report_points_csv(report));
    write_file_atomic(sibling(".hull.csv"), report_hull_csv(report));
    write_file_atomic(base, j.dump(2) + "\n");
    std::cout << "mean AUH: " << detail::format_exact(report.mean) << "\n"
              << "std AUH: " << detail::format_exact(report.std) << "\n"
              << "trivial fraction: " << detail::format_exact(report.trivial_fraction) << "\n";
    return 0;
  }
};

struct EmitLpCmd {
  std::string input, out;
  DataFlags data;
  TrainerFlags trainer;
  std::size_t max_size = 200000;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("emit-lp", "Write the exact formulation as an LP file");
    app->add_option("input", input, "Dataset CSV")->required();
    app->add_option("--out", out, "LP file path")->required();
    app->add_option("--max-size", max_size, "Largest allowed m*n*K")->capture_default_str();
    data.add(app);
    trainer.add(app);
  }

  int run() {
    trainer.trainer = "exact";
    const auto cfg = trainer.exact_config();
    const auto ds = load_csv(input, data.label_column, data.positive_label);
    const std::size_t size = ds.size() * ds.dims() * cfg.K;
    if (size > max_size)
      throw InputError("m*n*K = " + std::to_string(size) + " exceeds --max-size " + std::to_string(max_size));
    const auto mip = build_mip(normalize(ds).first, cfg);
    for (const auto& w : mip.warnings) std::cerr << "warning: " << w << "\n";
    write_lp(mip, out);
    std::cout << "continuous variables: " << mip.count(VarType::continuous) << "\n"
              << "binary variables: " << mip.count(VarType::binary) << "\n"
              << "constraints: " << mip.constraints.size() << "\n";
    return 0;
  }
};

struct BoundCmd {
  BoundInputs in;
  std::size_t m = 0;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("bound", "Generalization bound for K boxes on finite grids");
    app->add_option("--k", in.K, "Number of boxes")->required();
    app->add_option("--m", m, "Sample count")->required();
    app->add_option("--delta", in.delta, "Failure probability in (0,1]")->capture_default_str();
    app->add_option("--grid", in.M, "Comma-separated grid size per feature")->delimiter(',')->required();
  }

  int run() {
    in.m = m;
    const auto r = generalization_bound_detailed(in);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << detail::format_exact(r.value) << "\n";
    return 0;
  }
};

struct GenerateCmd {
  std::string shape, out;
  std::size_t m = 1000;
  double ratio = 9.0;
  std::uint64_t seed = 0;
  DataFlags data;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("generate", "Write a synthetic 2-D dataset");
    app->add_option("--shape", shape, "square, corner, diamond or castle")->required();
    app->add_option("--m", m, "Number of points")->capture_default_str();
    app->add_option("--ratio", ratio, "Negatives per positive")->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--out", out, "CSV path")->required();
    data.add(app);
  }

  int run() {
    const auto ds = generate_synthetic(parse_shape(shape), m, ratio, seed);
    write_file_atomic(out, dataset_to_csv(ds, data.label_column, data.positive_label, "negative"));
    std::cout << "positives: " << ds.positives() << "\nnegatives: " << ds.negatives() << "\n";
    return 0;
  }
};

struct DescribeCmd {
  std::string model_path;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("describe", "Print a model as readable rules");
    app->add_option("model", model_path, "Model JSON")->required();
  }

  int run() {
    std::cout << describe(load_model(model_path));
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Union-of-boxes classifiers for rare positive classes"};
  app.require_subcommand(1);
  TrainCmd train;
  PredictCmd predict_cmd;
  EvalCmd eval;
  EmitLpCmd emit;
  BoundCmd bound;
  GenerateCmd generate;
  DescribeCmd describe_cmd;
  train.add(app);
  predict_cmd.add(app);
  eval.add(app);
  emit.add(app);
  bound.add(app);
  generate.add(app);
  describe_cmd.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "train") return train.run();
    if (name == "predict") return predict_cmd.run();
    if (name == "eval") return eval.run();
    if (name == "emit-lp") return emit.run();
    if (name == "bound") return bound.run();
    if (name == "generate") return generate.run();
    if (name == "describe") return describe_cmd.run();
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
