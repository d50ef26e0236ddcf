#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "schoolconn/csv.hpp"
#include "schoolconn/error.hpp"
#include "schoolconn/io.hpp"
#include "schoolconn/pipeline.hpp"
#include "schoolconn/synth.hpp"

namespace fs = std::filesystem;
using namespace schoolconn;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> report;
  std::string model;
  std::string schools;
  std::string predictions;
  std::vector<double> bbox;
};

ExperimentConfig configure(const Options& o) {
  std::optional<fs::path> out;
  if (o.out) out = fs::path(*o.out);
  return load_config(o.config, o.seed, out);
}

void write_report(const Options& o, const std::string& text) {
  if (o.report) csv::write_text_file(*o.report, text);
}

std::vector<SchoolRecord> cleaned_schools(const ExperimentConfig& cfg, const Options& o, bool reuse) {
  const Layout layout{cfg.output_dir};
  if (reuse && manifest_matches(cfg, layout.root) && fs::exists(layout.cleaned())) {
    return parse_schools_csv(layout.cleaned());
  }
  check_inputs(cfg);
  CleaningResult cleaned = run_clean(cfg);
  write_schools_csv(cleaned.schools, layout.cleaned());
  const std::string report = cleaned.report.to_text();
  csv::write_text_file(layout.cleaning_report(), report);
  write_report(o, report);
  write_manifest(cfg, layout.root, std::nullopt);
  return std::move(cleaned.schools);
}

FeatureTable features(const ExperimentConfig& cfg, const Options& o, const std::vector<SchoolRecord>& schools,
                      bool reuse) {
  const fs::path dir = Layout{cfg.output_dir}.radius_dir(cfg, cfg.buffer_radius_m);
  if (reuse && manifest_matches(cfg, dir) && fs::exists(Layout::features(dir))) {
    return FeatureTable::read_csv(Layout::features(dir));
  }
  check_inputs(cfg);
  FeatureTable table = run_featurize(cfg, schools, cfg.buffer_radius_m);
  table.write_csv(Layout::features(dir));
  write_manifest(cfg, dir, cfg.buffer_radius_m);
  (void)o;
  return table;
}

TrainedModel trained_model(const ExperimentConfig& cfg, const FeatureTable& table, const ModelSpec& spec,
                           bool reuse, std::string* summary) {
  const fs::path dir = Layout{cfg.output_dir}.radius_dir(cfg, cfg.buffer_radius_m);
  const fs::path mdir = Layout::model_dir(dir, spec);
  if (reuse && manifest_matches(cfg, dir) && fs::exists(mdir / "model.json")) return load_model(mdir / "model.json");
  TrainOutcome out = run_train(cfg, table, spec);
  save_model(out.model, mdir / "model.json");
  csv::write_text_file(mdir / "grid_search.csv", grid_search_csv(out.search));
  if (summary) {
    const auto& best = out.search.best();
    *summary += spec.label + " " + to_string(best.config.family()) + " " + params_to_json(best.config).dump() +
                " mean_accuracy=" + csv::format_double(best.mean_accuracy) +
                " mean_f1=" + csv::format_double(best.mean_f1) + " score=" + csv::format_double(best.score) + "\n";
  }
  return out.model;
}

int cmd_clean(const Options& o) {
  const ExperimentConfig cfg = configure(o);
  cleaned_schools(cfg, o, false);
  return 0;
}

int cmd_featurize(const Options& o) {
  const ExperimentConfig cfg = configure(o);
  features(cfg, o, cleaned_schools(cfg, o, true), false);
  return 0;
}

int cmd_train(const Options& o) {
  const ExperimentConfig cfg = configure(o);
  const FeatureTable table = features(cfg, o, cleaned_schools(cfg, o, true), true);
  std::string summary;
  for (const ModelSpec& spec : cfg.models) trained_model(cfg, table, spec, false, &summary);
  write_manifest(cfg, Layout{cfg.output_dir}.radius_dir(cfg, cfg.buffer_radius_m), cfg.buffer_radius_m);
  write_report(o, summary);
  return 0;
}

int cmd_evaluate(const Options& o) {
  const ExperimentConfig cfg = configure(o);
  const FeatureTable table = features(cfg, o, cleaned_schools(cfg, o, true), true);
  const fs::path dir = Layout{cfg.output_dir}.radius_dir(cfg, cfg.buffer_radius_m);
  std::string combined;
  for (const ModelSpec& spec : cfg.models) {
    const TrainedModel model = trained_model(cfg, table, spec, true, nullptr);
    const MetricsReport report = run_evaluate(cfg, table, model.config);
    const std::string text = metrics_csv(report);
    csv::write_text_file(Layout::model_dir(dir, spec) / "metrics.csv", text);
    combined += "# " + spec.label + "\n" + text;
  }
  write_manifest(cfg, dir, cfg.buffer_radius_m);
  write_report(o, combined);
  return 0;
}

int cmd_predict(const Options& o) {
  const ExperimentConfig cfg = configure(o);
  check_inputs(cfg);
  const TrainedModel model = load_model(o.model);
  const std::vector<SchoolRecord> schools = parse_schools_csv(o.schools);
  const FeatureTable table = run_featurize(cfg, schools, cfg.buffer_radius_m);
  const std::string text = predictions_csv(predict(model, table), table);
  csv::write_text_file(cfg.output_dir / "predictions.csv", text);
  write_report(o, text);
  return 0;
}

int cmd_export_map(const Options& o) {
  const ExperimentConfig cfg = configure(o);
  const Layout layout{cfg.output_dir};
  const fs::path pred_path = o.predictions.empty()
                                 ? Layout::model_dir(layout.radius_dir(cfg, cfg.buffer_radius_m), cfg.models.front()) /
                                       "predictions.csv"
                                 : fs::path(o.predictions);
  const std::vector<SchoolRecord> schools =
      o.schools.empty() ? cleaned_schools(cfg, o, true) : parse_schools_csv(o.schools);
  std::optional<BBox> bbox = cfg.map_bbox;
  if (!o.bbox.empty()) {
    if (o.bbox.size() != 4) fail(ErrorKind::InvalidConfig, "--bbox takes min_lon min_lat max_lon max_lat");
    bbox = BBox{o.bbox[0], o.bbox[1], o.bbox[2], o.bbox[3]};
  }
  const PredictionRows rows = parse_predictions_csv(csv::read_text_file(pred_path), pred_path.string());
  const std::string map = prediction_map(schools, rows, bbox);
  csv::write_text_file(o.report ? fs::path(*o.report) : pred_path.parent_path() / "map.geojson", map);
  return 0;
}

int cmd_run_experiment(const Options& o) {
  run_experiment(configure(o));
  return 0;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"School connectivity prediction from geospatial layers"};
  app.set_version_flag("--version", std::string("schoolconn ") + kToolVersion);
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Override the root seed");
    sub->add_option("--out", o.out, "Override the output directory");
    sub->add_option("--report", o.report, "Also write this command's report here");
  };

  int status = 0;
  auto* clean = app.add_subcommand("clean", "Run the cleaning cascade");
  common(clean);
  clean->callback([&] { status = cmd_clean(o); });

  auto* featurize = app.add_subcommand("featurize", "Build the feature table");
  common(featurize);
  featurize->callback([&] { status = cmd_featurize(o); });

  auto* train = app.add_subcommand("train", "Grid-search and fit every configured model");
  common(train);
  train->callback([&] { status = cmd_train(o); });

  auto* evaluate = app.add_subcommand("evaluate", "Repeated seeded runs and metrics");
  common(evaluate);
  evaluate->callback([&] { status = cmd_evaluate(o); });

  auto* predict = app.add_subcommand("predict", "Predict connectivity for a schools file");
  common(predict);
  predict->add_option("--model", o.model, "Model artifact")->required();
  predict->add_option("--schools", o.schools, "Schools CSV")->required();
  predict->callback([&] { status = cmd_predict(o); });

  auto* map = app.add_subcommand("export-map", "Write predictions as GeoJSON points");
  common(map);
  map->add_option("--predictions", o.predictions, "Predictions CSV");
  map->add_option("--schools", o.schools, "Schools CSV (default: cleaned schools)");
  map->add_option("--bbox", o.bbox, "min_lon min_lat max_lon max_lat")->expected(4);
  map->callback([&] { status = cmd_export_map(o); });

  auto* run = app.add_subcommand("run-experiment", "Run every stage, including the radius sweep");
  common(run);
  run->callback([&] { status = cmd_run_experiment(o); });

  std::string synth_dir;
  synth::DatasetSpec synth_spec;
  bool synth_sweep = false;
  auto* gen = app.add_subcommand("synth-dataset", "Write a seeded synthetic dataset and experiment config");
  gen->add_option("--dir", synth_dir, "Destination directory")->required();
  gen->add_option("--seed", synth_spec.seed, "Generator seed");
  gen->add_option("--schools", synth_spec.n_schools, "Number of planted schools");
  gen->add_option("--families", synth_spec.families, "Model families to configure");
  gen->add_option("--runs", synth_spec.n_runs, "Repeated runs in the generated config");
  gen->add_flag("--sweep", synth_sweep, "Configure the 300..5000 m radius sweep");
  gen->callback([&] {
    if (synth_sweep) synth_spec.radius_sweep.assign(std::begin(kDefaultRadiusSweep), std::end(kDefaultRadiusSweep));
    std::cout << synth::write_dataset(synth_dir, synth_spec).string() << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: InvalidConfig: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: IoError: " << one_line(e.what()) << "\n";
    return 1;
  }
  return status;
}
