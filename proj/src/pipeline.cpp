#include "schoolconn/pipeline.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "schoolconn/csv.hpp"
#include "schoolconn/error.hpp"
#include "schoolconn/io.hpp"
#include "schoolconn/preprocess.hpp"

namespace schoolconn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& msg) { fail(ErrorKind::InvalidConfig, msg); }

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
  const json* v = find(obj, key);
  if (!v || !v->is_string()) bad(where + ": '" + key + "' must be a string");
  return v->get<std::string>();
}

bool get_bool(const json& obj, const char* key, bool fallback, const std::string& where) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) bad(where + ": '" + key + "' must be true or false");
  return v->get<bool>();
}

double get_number(const json& obj, const char* key, double fallback, const std::string& where) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) bad(where + ": '" + key + "' must be a number");
  return v->get<double>();
}

void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [k, v] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* allowed) { return k == allowed; })) {
      bad(where + ": unknown key '" + k + "'");
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

std::vector<int> legend_from(const json& v, const std::string& where) {
  if (v.is_string()) {
    const auto name = v.get<std::string>();
    if (name == "modis") return modis_legend();
    if (name == "ghsl") return ghsl_legend();
    bad(where + ": unknown legend '" + name + "'");
  }
  if (!v.is_array() || v.empty()) bad(where + ": legend must be \"modis\", \"ghsl\" or a list of class ids");
  std::vector<int> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) bad(where + ": legend ids must be integers");
    out.push_back(x.get<int>());
  }
  return out;
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

ModelSpec parse_model(const json& m, std::size_t index) {
  const std::string where = "models[" + std::to_string(index) + "]";
  if (!m.is_object()) bad(where + " must be an object");
  only_keys(m, {"label", "family", "grid", "params", "cv_folds"}, where);
  ModelSpec spec;
  const json* family = find(m, "family");
  const json* grid = find(m, "grid");
  if (grid && grid->is_string()) {
    spec.grid = default_grid(grid->get<std::string>());
    if (family && parse_family(family->get<std::string>()) != spec.grid.family) {
      bad(where + ": grid '" + grid->get<std::string>() + "' does not belong to family '" +
          family->get<std::string>() + "'");
    }
  } else {
    if (!family || !family->is_string()) bad(where + ": 'family' is required");
    spec.grid.family = parse_family(family->get<std::string>());
    if (grid) {
      if (!grid->is_object()) bad(where + ": 'grid' must be a grid name or an object of value lists");
      for (const auto& [k, values] : grid->items()) {
        if (!values.is_array() || values.empty()) bad(where + ": grid axis '" + k + "' must be a nonempty list");
        spec.grid.grid.emplace_back(k, std::vector<json>(values.begin(), values.end()));
      }
    }
  }
  if (const json* params = find(m, "params")) {
    if (!params->is_object()) bad(where + ": 'params' must be an object");
    ParamGrid fixed;
    for (const auto& [k, v] : params->items()) fixed.emplace_back(k, std::vector<json>{v});
    for (auto& axis : spec.grid.grid) {
      if (params->contains(axis.first)) axis.second.clear();
    }
    std::erase_if(spec.grid.grid, [](const auto& axis) { return axis.second.empty(); });
    fixed.insert(fixed.end(), spec.grid.grid.begin(), spec.grid.grid.end());
    spec.grid.grid = std::move(fixed);
  }
  spec.label = find(m, "label") ? get_string(m, "label", where)
                                : upper(family && family->is_string() ? family->get<std::string>()
                                                                      : to_string(spec.grid.family));
  if (spec.label.empty() || spec.label.find_first_of("/\\") != std::string::npos || spec.label == "." ||
      spec.label == "..") {
    bad(where + ": label must be a plain directory name");
  }
  spec.cv_folds = static_cast<int>(get_number(m, "cv_folds", 5, where));
  if (spec.cv_folds < 2) bad(where + ": cv_folds must be at least 2");
  try {
    expand_grid(spec.grid, 0);
  } catch (const Error& e) {
    throw e.annotated(where);
  }
  return spec;
}

SourceSpec parse_source(const json& f, std::size_t index, const fs::path& base, json& resolved) {
  const std::string where = "features[" + std::to_string(index) + "]";
  if (!f.is_object()) bad(where + " must be an object");
  only_keys(f, {"type", "name", "path", "layers", "stats", "legend", "auxiliary"}, where);
  SourceSpec s;
  s.type = get_string(f, "type", where);
  s.name = get_string(f, "name", where);
  s.auxiliary = get_bool(f, "auxiliary", false, where);
  if (s.type == "population") {
    const json* layers = find(f, "layers");
    if (!layers || !layers->is_array() || layers->empty()) bad(where + ": population needs a 'layers' list");
    for (std::size_t i = 0; i < layers->size(); ++i) {
      const json& l = (*layers)[i];
      if (!l.is_object()) bad(where + ": population layers must be {label, path} objects");
      const fs::path p = resolve(base, get_string(l, "path", where));
      s.paths.emplace_back(get_string(l, "label", where), p);
      resolved["layers"][i]["path"] = p.string();
    }
  } else if (s.type == "raster" || s.type == "lines" || s.type == "ookla" || s.type == "admin") {
    const fs::path p = resolve(base, get_string(f, "path", where));
    s.paths.emplace_back("", p);
    resolved["path"] = p.string();
  } else {
    bad(where + ": unknown source type '" + s.type + "'");
  }
  if (s.type == "raster") {
    const json* stats = find(f, "stats");
    if (!stats || !stats->is_array() || stats->empty()) bad(where + ": raster sources need a 'stats' list");
    for (const auto& st : *stats) {
      if (!st.is_string()) bad(where + ": stats must be names");
      try {
        s.stats.push_back(parse_stat(st.get<std::string>()));
      } catch (const Error& e) {
        throw e.annotated(where);
      }
    }
    if (const json* legend = find(f, "legend")) s.legend = legend_from(*legend, where);
  }
  return s;
}

std::vector<double> sweep_from(const json& v) {
  if (v.is_boolean()) {
    if (!v.get<bool>()) return {};
    return {std::begin(kDefaultRadiusSweep), std::end(kDefaultRadiusSweep)};
  }
  if (!v.is_array() || v.empty()) bad("'radius_sweep' must be true or a nonempty list of radii");
  std::vector<double> out;
  for (const auto& r : v) {
    if (!r.is_number() || !(r.get<double>() > 0.0)) bad("'radius_sweep' radii must be positive numbers");
    out.push_back(r.get<double>());
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) bad("experiment config must be a JSON object");
  only_keys(doc,
            {"schools", "output_dir", "seed", "n_runs", "buffer_radius_m", "radius_sweep", "cleaning", "features",
             "auxiliary", "auxiliary_comparison", "embeddings", "preprocess", "split", "models", "importance",
             "map_bbox"},
            "config");
  const fs::path base = fs::absolute(base_dir);
  ExperimentConfig cfg;
  cfg.resolved = doc;
  json& r = cfg.resolved;

  cfg.schools = resolve(base, get_string(doc, "schools", "config"));
  r["schools"] = cfg.schools.string();
  cfg.output_dir = resolve(base, find(doc, "output_dir") ? get_string(doc, "output_dir", "config") : "out");
  r["output_dir"] = cfg.output_dir.string();
  if (const json* seed = find(doc, "seed")) {
    if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<std::int64_t>() >= 0)) {
      bad("'seed' must be a nonnegative integer");
    }
    cfg.seed = seed->get<std::uint64_t>();
  }
  r["seed"] = cfg.seed;
  const double runs = get_number(doc, "n_runs", 5, "config");
  if (runs < 1 || runs != std::floor(runs)) bad("'n_runs' must be a positive integer");
  cfg.n_runs = static_cast<int>(runs);
  cfg.buffer_radius_m = get_number(doc, "buffer_radius_m", 1000.0, "config");
  if (!(cfg.buffer_radius_m > 0.0)) bad("'buffer_radius_m' must be positive");
  if (const json* sweep = find(doc, "radius_sweep")) cfg.radius_sweep = sweep_from(*sweep);

  if (const json* c = find(doc, "cleaning")) {
    if (!c->is_object()) bad("'cleaning' must be an object");
    only_keys(*c,
              {"keywords", "proximity", "names", "settlement", "footprints", "ghsl", "proximity_buffer_m",
               "name_radius_m", "name_threshold", "settlement_radius_m"},
              "cleaning");
    auto& o = cfg.cleaning;
    o.keywords = get_bool(*c, "keywords", true, "cleaning");
    o.proximity = get_bool(*c, "proximity", true, "cleaning");
    o.names = get_bool(*c, "names", true, "cleaning");
    o.proximity_buffer_m = get_number(*c, "proximity_buffer_m", o.proximity_buffer_m, "cleaning");
    o.name_radius_m = get_number(*c, "name_radius_m", o.name_radius_m, "cleaning");
    o.name_threshold = get_number(*c, "name_threshold", o.name_threshold, "cleaning");
    o.settlement_radius_m = get_number(*c, "settlement_radius_m", o.settlement_radius_m, "cleaning");
    if (find(*c, "footprints")) {
      cfg.footprints = resolve(base, get_string(*c, "footprints", "cleaning"));
      r["cleaning"]["footprints"] = cfg.footprints->string();
    }
    if (find(*c, "ghsl")) {
      cfg.ghsl = resolve(base, get_string(*c, "ghsl", "cleaning"));
      r["cleaning"]["ghsl"] = cfg.ghsl->string();
    }
    const bool have_layers = cfg.footprints && cfg.ghsl;
    o.settlement = get_bool(*c, "settlement", have_layers, "cleaning");
    if (o.settlement && !have_layers) bad("cleaning: the settlement stage needs 'footprints' and 'ghsl' rasters");
  } else {
    cfg.cleaning.settlement = false;
  }

  const json* features = find(doc, "features");
  if (!features || !features->is_array()) bad("'features' must be a list of layer sources");
  std::set<std::string> names;
  for (std::size_t i = 0; i < features->size(); ++i) {
    cfg.features.push_back(parse_source((*features)[i], i, base, r["features"][i]));
    if (!names.insert(cfg.features.back().name).second) bad("duplicate feature source name '" + cfg.features.back().name + "'");
  }
  cfg.auxiliary = get_bool(doc, "auxiliary", true, "config");
  cfg.auxiliary_comparison = get_bool(doc, "auxiliary_comparison", false, "config");
  if (find(doc, "embeddings")) {
    cfg.embeddings = resolve(base, get_string(doc, "embeddings", "config"));
    r["embeddings"] = cfg.embeddings->string();
  }

  if (const json* p = find(doc, "preprocess")) {
    if (!p->is_object()) bad("'preprocess' must be an object");
    only_keys(*p, {"scale", "correlation_threshold"}, "preprocess");
    cfg.preprocess.scale = get_bool(*p, "scale", true, "preprocess");
    if (p->contains("correlation_threshold") && (*p)["correlation_threshold"].is_null()) {
      cfg.preprocess.correlation_threshold.reset();
    } else {
      cfg.preprocess.correlation_threshold = get_number(*p, "correlation_threshold", 0.9, "preprocess");
    }
  }
  if (const json* s = find(doc, "split")) {
    if (!s->is_object()) bad("'split' must be an object");
    only_keys(*s, {"train", "val", "test"}, "split");
    cfg.split.train = get_number(*s, "train", 0.70, "split");
    cfg.split.val = get_number(*s, "val", 0.15, "split");
    cfg.split.test = get_number(*s, "test", 0.15, "split");
  }
  const double total = cfg.split.train + cfg.split.val + cfg.split.test;
  if (std::abs(total - 1.0) > 1e-9 || cfg.split.train <= 0 || cfg.split.val <= 0 || cfg.split.test <= 0) {
    bad("split fractions must be positive and sum to 1");
  }

  const json* models = find(doc, "models");
  if (!models || !models->is_array() || models->empty()) bad("'models' must be a nonempty list");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < models->size(); ++i) {
    cfg.models.push_back(parse_model((*models)[i], i));
    if (!labels.insert(cfg.models.back().label).second) bad("duplicate model label '" + cfg.models.back().label + "'");
  }
  if (const json* imp = find(doc, "importance")) {
    if (!imp->is_object()) bad("'importance' must be an object");
    only_keys(*imp, {"permutation_repeats"}, "importance");
    cfg.permutation_repeats = static_cast<int>(get_number(*imp, "permutation_repeats", 0, "importance"));
    if (cfg.permutation_repeats < 0) bad("importance: permutation_repeats must be nonnegative");
  }
  if (const json* bb = find(doc, "map_bbox")) {
    if (!bb->is_array() || bb->size() != 4 || !std::all_of(bb->begin(), bb->end(), [](const json& x) { return x.is_number(); })) {
      bad("'map_bbox' must be [min_lon, min_lat, max_lon, max_lat]");
    }
    cfg.map_bbox = BBox{(*bb)[0].get<double>(), (*bb)[1].get<double>(), (*bb)[2].get<double>(), (*bb)[3].get<double>()};
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed_override,
                             std::optional<fs::path> out_override) {
  json doc;
  try {
    doc = json::parse(csv::read_text_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  if (doc.is_object()) {
    if (seed_override) doc["seed"] = *seed_override;
    if (out_override) doc["output_dir"] = fs::absolute(*out_override).string();
  }
  try {
    return parse_config(doc, fs::absolute(path).parent_path());
  } catch (const Error& e) {
    throw e.annotated(path.string());
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
}

std::string config_hash(const ExperimentConfig& cfg) {
  json doc = cfg.resolved;
  doc.erase("output_dir");
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void check_inputs(const ExperimentConfig& cfg) {
  auto need = [](const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) fail(ErrorKind::IoError, what + " not found: '" + p.string() + "'");
  };
  need(cfg.schools, "schools file");
  if (cfg.cleaning.settlement) {
    need(*cfg.footprints, "footprint raster");
    need(*cfg.ghsl, "GHSL raster");
  }
  for (const auto& s : cfg.features) {
    for (const auto& [label, p] : s.paths) need(p, "layer '" + s.name + "'");
  }
  if (cfg.embeddings) need(*cfg.embeddings, "embedding file");
}

json manifest(const ExperimentConfig& cfg, std::optional<double> radius_m) {
  json m{{"tool", "schoolconn"},
         {"version", kToolVersion},
         {"config_hash", config_hash(cfg)},
         {"seed", cfg.seed},
         {"libraries",
          {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                         std::to_string(EIGEN_MINOR_VERSION)},
           {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                 std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                 std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
         {"config", cfg.resolved}};
  if (radius_m) m["buffer_radius_m"] = *radius_m;
  return m;
}

void write_manifest(const ExperimentConfig& cfg, const fs::path& dir, std::optional<double> radius_m) {
  csv::write_text_file(dir / "manifest.json", manifest(cfg, radius_m).dump(2) + "\n");
}

bool manifest_matches(const ExperimentConfig& cfg, const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) return false;
  try {
    const json m = json::parse(csv::read_text_file(p));
    return m.value("config_hash", "") == config_hash(cfg);
  } catch (const std::exception&) {
    return false;
  }
}

// ---------------------------------------------------------------------------

CleaningResult run_clean(const ExperimentConfig& cfg) {
  const std::vector<SchoolRecord> schools = parse_schools_csv(cfg.schools);
  std::optional<RasterLayer> footprints, ghsl;
  SettlementLayers layers;
  if (cfg.cleaning.settlement) {
    footprints = parse_raster(*cfg.footprints);
    ghsl = parse_raster(*cfg.ghsl);
    layers = {&*footprints, &*ghsl};
  }
  return clean_schools(schools, cfg.cleaning, layers);
}

LayerConfig load_layers(const ExperimentConfig& cfg, bool auxiliary_only) {
  LayerConfig layers;
  layers.auxiliary = cfg.auxiliary;
  for (const SourceSpec& s : cfg.features) {
    if (auxiliary_only && !s.auxiliary) continue;
    try {
      if (s.type == "raster") {
        RasterLayer layer = parse_raster(s.paths.front().second);
        if (s.legend) layer.set_categorical(*s.legend);
        layers.sources.emplace_back(RasterSource{s.name, std::move(layer), s.stats});
      } else if (s.type == "lines") {
        layers.sources.emplace_back(LineSource{s.name, parse_polylines(s.paths.front().second)});
      } else if (s.type == "ookla") {
        layers.sources.emplace_back(TileSource{s.name, parse_ookla_tiles(s.paths.front().second)});
      } else if (s.type == "population") {
        PopulationSource pop{s.name, {}};
        for (const auto& [label, p] : s.paths) pop.layers.emplace_back(label, parse_raster(p));
        layers.sources.emplace_back(std::move(pop));
      } else {
        layers.sources.emplace_back(AdminSource{s.name, parse_polygons(s.paths.front().second)});
      }
    } catch (const Error& e) {
      throw e.annotated("layer '" + s.name + "'");
    }
  }
  validate(layers);
  return layers;
}

FeatureTable run_featurize(const ExperimentConfig& cfg, const std::vector<SchoolRecord>& schools, double radius_m) {
  FeatureTable table = build_feature_table(schools, load_layers(cfg), BufferSpec{radius_m});
  if (cfg.embeddings) table = merge_embeddings(table, *cfg.embeddings);
  return table;
}

std::vector<std::string> auxiliary_columns(const ExperimentConfig& cfg, const FeatureTable& table,
                                           const std::vector<SchoolRecord>& schools) {
  LayerConfig aux = load_layers(cfg, true);
  std::vector<std::string> cols = feature_columns(aux, schools);
  std::erase_if(cols, [&](const std::string& c) { return !table.column_index(c); });
  return cols;
}

namespace {

SplitSpec split_with_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SplitSpec s = cfg.split;
  s.seed = seed;
  return s;
}

}  // namespace

TrainOutcome run_train(const ExperimentConfig& cfg, const FeatureTable& table, const ModelSpec& spec) {
  const SplitIndices idx = stratified_split_indices(table.labels(), split_with_seed(cfg, cfg.seed));
  const FeatureTable train_raw = table.select_rows(idx.train);
  const Preprocessor prep = fit_preprocessor(train_raw, cfg.preprocess);
  const FeatureTable val = prep.apply(table.select_rows(idx.val));
  TrainOutcome out;
  try {
    out.search = grid_search_cv(val, spec.grid, spec.cv_folds, cfg.seed);
  } catch (const Error& e) {
    throw e.annotated("grid search for " + spec.label);
  }
  ModelConfig best = out.search.best().config;
  best.seed = cfg.seed;
  out.model = train_with_preprocessing(train_raw, best, cfg.preprocess);
  return out;
}

MetricsReport run_evaluate(const ExperimentConfig& cfg, const FeatureTable& table, const ModelConfig& config) {
  const Eigen::VectorXi& labels = table.labels();
  return repeated_runs(
      [&](std::uint64_t seed) {
        const SplitIndices idx = stratified_split_indices(labels, split_with_seed(cfg, seed));
        ModelConfig run_cfg = config;
        run_cfg.seed = seed;
        const TrainedModel model = train_with_preprocessing(table.select_rows(idx.train), run_cfg, cfg.preprocess);
        const FeatureTable test = table.select_rows(idx.test);
        return confusion(test.labels(), predict(model, test).label);
      },
      cfg.n_runs, cfg.seed);
}

std::string predictions_csv(const Predictions& p, const FeatureTable& table) {
  std::ostringstream out;
  const bool labelled = table.has_labels();
  std::vector<std::string> header{"id", "probability", "predicted"};
  if (labelled) header.emplace_back("actual");
  csv::write_row(out, header);
  for (std::size_t i = 0; i < p.ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::vector<std::string> row{p.ids[i], csv::format_double(p.probability(r)), std::to_string(p.label(r))};
    if (labelled) row.push_back(std::to_string(table.labels()(r)));
    csv::write_row(out, row);
  }
  return out.str();
}

PredictionRows parse_predictions_csv(std::string_view text, std::string_view source) {
  const csv::Document doc = csv::parse(text, source);
  const std::size_t id = doc.require_column("id");
  const std::size_t pred = doc.require_column("predicted");
  const auto actual = doc.column("actual");
  PredictionRows out;
  const auto n = static_cast<Eigen::Index>(doc.rows.size());
  out.predicted.resize(n);
  if (actual) out.actual = Eigen::VectorXi(n);
  auto flag = [&](const std::string& v, std::size_t row) {
    if (v == "0") return 0;
    if (v == "1") return 1;
    fail(ErrorKind::ParseError, std::string(source) + ":" + std::to_string(doc.line_numbers[row]) +
                                    ": expected 0 or 1, got '" + v + "'");
  };
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    out.ids.push_back(doc.rows[i][id]);
    out.predicted(static_cast<Eigen::Index>(i)) = flag(doc.rows[i][pred], i);
    if (actual) (*out.actual)(static_cast<Eigen::Index>(i)) = flag(doc.rows[i][*actual], i);
  }
  return out;
}

std::string prediction_map(const std::vector<SchoolRecord>& schools, const PredictionRows& rows,
                           const std::optional<BBox>& bbox) {
  std::map<std::string, const SchoolRecord*> by_id;
  for (const auto& s : schools) by_id.emplace(s.id, &s);
  std::vector<SchoolRecord> aligned;
  for (const auto& id : rows.ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) fail(ErrorKind::LengthMismatch, "prediction for unknown school id '" + id + "'");
    aligned.push_back(*it->second);
  }
  return export_prediction_map(aligned, rows.predicted, rows.actual, bbox);
}

// ---------------------------------------------------------------------------

std::string radius_label(double radius_m) { return csv::format_double(radius_m) + "m"; }

fs::path Layout::radius_dir(const ExperimentConfig& cfg, double radius_m) const {
  return cfg.radius_sweep.empty() ? root : root / ("radius_" + radius_label(radius_m));
}

namespace {

std::string results_table(const ExperimentConfig& cfg, double radius_m, const std::vector<MetricsReport>& reports) {
  MetricTable t;
  t.title = cfg.embeddings ? "Engineered + embeddings" : "Engineered";
  t.groups = {radius_label(radius_m)};
  t.metrics = {"Acc", "F1"};
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    t.rows.emplace_back(cfg.models[m].label,
                        std::vector<std::optional<double>>{reports[m].mean_of("accuracy"), reports[m].mean_of("f1")});
  }
  return render_metric_table(t);
}

}  // namespace

void run_radius(const ExperimentConfig& cfg, const std::vector<SchoolRecord>& schools, double radius_m,
                const fs::path& dir, std::vector<MetricsReport>* reports_out) {
  const FeatureTable table = run_featurize(cfg, schools, radius_m);
  table.write_csv(Layout::features(dir));

  std::optional<FeatureTable> without_aux;
  if (cfg.auxiliary_comparison) {
    const std::vector<std::string> aux = auxiliary_columns(cfg, table, schools);
    std::vector<std::string> keep;
    for (const auto& n : table.names()) {
      if (std::find(aux.begin(), aux.end(), n) == aux.end()) keep.push_back(n);
    }
    without_aux = table.select_columns(keep);
  }

  std::vector<MetricsReport> reports, reports_no_aux;
  std::vector<ModelConfig> best;
  for (const ModelSpec& spec : cfg.models) {
    const fs::path mdir = Layout::model_dir(dir, spec);
    const TrainOutcome trained = run_train(cfg, table, spec);
    save_model(trained.model, mdir / "model.json");
    csv::write_text_file(mdir / "grid_search.csv", grid_search_csv(trained.search));
    best.push_back(trained.model.config);

    reports.push_back(run_evaluate(cfg, table, trained.model.config));
    csv::write_text_file(mdir / "metrics.csv", metrics_csv(reports.back()));
    if (without_aux) {
      reports_no_aux.push_back(run_evaluate(cfg, *without_aux, trained.model.config));
      csv::write_text_file(mdir / "metrics_no_aux.csv", metrics_csv(reports_no_aux.back()));
    }

    const Predictions pred = predict(trained.model, table);
    const std::string pred_text = predictions_csv(pred, table);
    csv::write_text_file(mdir / "predictions.csv", pred_text);
    csv::write_text_file(mdir / "map.geojson",
                         prediction_map(schools, parse_predictions_csv(pred_text, "predictions"), cfg.map_bbox));

    if (std::holds_alternative<EnsembleState>(trained.model.state)) {
      csv::write_text_file(mdir / "importance.csv", ranking_csv(feature_importance(trained.model)));
    }
    if (cfg.permutation_repeats > 0) {
      const SplitIndices idx = stratified_split_indices(table.labels(), split_with_seed(cfg, cfg.seed));
      csv::write_text_file(mdir / "permutation_importance.csv",
                           ranking_csv(permutation_importance(trained.model, table.select_rows(idx.test),
                                                              cfg.permutation_repeats, cfg.seed)));
    }
  }

  csv::write_text_file(dir / "results_table.txt", results_table(cfg, radius_m, reports));
  if (cfg.auxiliary_comparison) {
    std::vector<std::pair<std::string, std::pair<const MetricsReport*, const MetricsReport*>>> rows;
    for (std::size_t m = 0; m < cfg.models.size(); ++m) {
      rows.emplace_back(cfg.models[m].label, std::pair{&reports_no_aux[m], &reports[m]});
    }
    csv::write_text_file(dir / "auxiliary_table.txt", render_metric_table(auxiliary_table("Dataset", rows)));
  }
  std::string records;
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    records += render_config_record(cfg.models[m].label, {"best"}, {best[m]}) + "\n";
  }
  csv::write_text_file(dir / "best_params.txt", records);
  write_manifest(cfg, dir, radius_m);
  if (reports_out) *reports_out = std::move(reports);
}

void run_experiment(const ExperimentConfig& cfg) {
  check_inputs(cfg);
  const Layout layout{cfg.output_dir};
  const CleaningResult cleaned = run_clean(cfg);
  write_schools_csv(cleaned.schools, layout.cleaned());
  csv::write_text_file(layout.cleaning_report(), cleaned.report.to_text());

  const std::vector<double> radii = cfg.radius_sweep.empty() ? std::vector<double>{cfg.buffer_radius_m} : cfg.radius_sweep;
  MetricTable sweep;
  sweep.title = "Buffer";
  sweep.metrics = {"Acc", "F1"};
  for (const auto& m : cfg.models) sweep.rows.emplace_back(m.label, std::vector<std::optional<double>>{});
  for (double radius : radii) {
    std::vector<MetricsReport> reports;
    try {
      run_radius(cfg, cleaned.schools, radius, layout.radius_dir(cfg, radius), &reports);
    } catch (const Error& e) {
      throw e.annotated("radius " + radius_label(radius));
    }
    sweep.groups.push_back(radius_label(radius));
    for (std::size_t m = 0; m < reports.size(); ++m) {
      sweep.rows[m].second.push_back(reports[m].mean_of("accuracy"));
      sweep.rows[m].second.push_back(reports[m].mean_of("f1"));
    }
  }
  if (!cfg.radius_sweep.empty()) csv::write_text_file(layout.root / "buffer_table.txt", render_metric_table(sweep));
  write_manifest(cfg, layout.root, cfg.radius_sweep.empty() ? std::optional<double>(cfg.buffer_radius_m) : std::nullopt);
}

}  // namespace schoolconn
