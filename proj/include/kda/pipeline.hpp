#pragma once

#include <array>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kda/config.hpp"
#include "kda/dataset.hpp"
#include "kda/gda.hpp"
#include "kda/lda.hpp"
#include "kda/metrics.hpp"
#include "kda/mlp.hpp"
#include "kda/model_io.hpp"
#include "kda/report.hpp"
#include "kda/tree.hpp"

namespace kda {

struct CliOverrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

/// Validated pipeline settings for the ingest -> reduce -> train-eval -> report
/// chain. Keys use flat section prefixes (reducer.gda.sigma=0.1).
struct PipelineConfig {
  // paths
  std::string train_path, test_path, schema_path, labelmap_path;
  bool has_header = false;
  LabelMap::UnknownPolicy unknown_policy = LabelMap::UnknownPolicy::error;
  int fallback_category = 0;

  // reducer
  std::string reducer = "none";  // none | lda | gda
  int components = 4;
  std::optional<double> lda_ridge;
  KernelSpec kernel;
  std::optional<double> gda_ridge;
  double rank_tol = 1e-10;
  long budget = 2000;
  long min_per_class = 50;
  std::uint64_t seed = 1;

  // classifier
  std::string classifier = "tree";  // tree | mlp
  TreeConfig tree;
  MlpConfig mlp;
  bool mlp_seed_given = false;

  // output
  std::string out_dir = "out";
  std::vector<std::string> formats = {"json"};
  std::string run_name;

  ConfigMap echo;

  std::string dataset_tag() const {
    if (reducer == "none") return "ORIGDATA";
    if (reducer == "lda") return "LDADATA";
    return "GDADATA";
  }

  std::string name() const { return run_name.empty() ? dataset_tag() + "-" + classifier : run_name; }

  std::filesystem::path out(const std::string& file) const {
    return std::filesystem::path(out_dir) / file;
  }
};

inline PipelineConfig pipeline_config_from_map(ConfigMap map, const CliOverrides& overrides = {}) {
  // env var / flag overrides, flag winning
  if (const char* env = std::getenv("KDA_OUT"); env && *env) map["out.dir"] = env;
  if (overrides.out_dir) map["out.dir"] = *overrides.out_dir;
  if (overrides.seed) {
    map["reducer.gda.seed"] = std::to_string(*overrides.seed);
    map["classifier.mlp.seed"] = std::to_string(*overrides.seed);
  }

  ConfigView view(map);
  PipelineConfig cfg;
  cfg.echo = map;

  cfg.train_path = view.get("paths.train", "");
  cfg.test_path = view.get("paths.test", "");
  cfg.schema_path = view.get("paths.schema", "");
  cfg.labelmap_path = view.get("paths.labelmap", "");
  cfg.has_header = view.get_bool("ingest.header", false);
  const std::string policy = view.get("ingest.unknown_policy", "error");
  if (policy == "error") {
    cfg.unknown_policy = LabelMap::UnknownPolicy::error;
  } else {
    cfg.unknown_policy = LabelMap::UnknownPolicy::assign;
    cfg.fallback_category = category_id(policy);
  }

  cfg.reducer = view.get("reducer.kind", "none");
  if (cfg.reducer != "none" && cfg.reducer != "lda" && cfg.reducer != "gda") {
    throw ConfigError("reducer.kind must be none, lda or gda (got '" + cfg.reducer + "')");
  }
  cfg.components = static_cast<int>(view.get_long("reducer.components", 4));
  if (cfg.components < 1) throw ConfigError("reducer.components must be >= 1");
  cfg.lda_ridge = view.maybe_double("reducer.lda.ridge");
  cfg.kernel.family = parse_kernel_family(view.get("reducer.gda.kernel", "gaussian"));
  cfg.kernel.gaussian_s = view.get_double("reducer.gda.sigma", 0.1);
  cfg.kernel.poly_degree = static_cast<int>(view.get_long("reducer.gda.degree", 2));
  cfg.kernel.poly_offset = view.get_double("reducer.gda.offset", 1.0);
  cfg.kernel.validate();
  cfg.gda_ridge = view.maybe_double("reducer.gda.ridge");
  cfg.rank_tol = view.get_double("reducer.gda.rank_tol", 1e-10);
  cfg.budget = view.get_long("reducer.gda.budget", 2000);
  cfg.min_per_class = view.get_long("reducer.gda.min_per_class", 50);
  cfg.seed = static_cast<std::uint64_t>(view.get_long("reducer.gda.seed", 1));

  cfg.classifier = view.get("classifier.kind", "tree");
  if (cfg.classifier != "tree" && cfg.classifier != "mlp") {
    throw ConfigError("classifier.kind must be tree or mlp (got '" + cfg.classifier + "')");
  }
  cfg.tree.min_leaf = view.get_long("classifier.tree.min_leaf", 2);
  cfg.tree.max_depth = static_cast<int>(view.get_long("classifier.tree.max_depth", 30));
  cfg.tree.min_gain = view.get_double("classifier.tree.min_gain", 1e-6);
  cfg.mlp.hidden = static_cast<int>(view.get_long("classifier.mlp.hidden", 20));
  cfg.mlp.epochs = static_cast<int>(view.get_long("classifier.mlp.epochs", 50));
  cfg.mlp.rate = view.get_double("classifier.mlp.rate", 0.1);
  cfg.mlp.batch = view.get_long("classifier.mlp.batch", 32);
  if (view.has("classifier.mlp.seed")) {
    cfg.mlp.seed = static_cast<std::uint64_t>(view.get_long("classifier.mlp.seed", 0));
    cfg.mlp_seed_given = true;
  }
  cfg.mlp.zero_init = view.get_bool("classifier.mlp.zero_init", false);

  cfg.out_dir = view.get("out.dir", "out");
  const std::string formats = view.get("out.formats", "json");
  cfg.formats.clear();
  std::size_t start = 0;
  while (start <= formats.size()) {
    const std::size_t comma = formats.find(',', start);
    const std::string fmt = formats.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!fmt.empty()) {
      if (fmt != "json" && fmt != "csv" && fmt != "txt") {
        throw ConfigError("out.formats accepts json, csv, txt (got '" + fmt + "')");
      }
      cfg.formats.push_back(fmt);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (cfg.formats.empty()) cfg.formats = {"json"};
  cfg.run_name = view.get("run.name", "");

  view.check_consumed();
  return cfg;
}

inline PipelineConfig load_pipeline_config(const std::string& path, const CliOverrides& overrides = {}) {
  return pipeline_config_from_map(load_config(path), overrides);
}

namespace detail {

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError("config is missing the " + what + " path");
  if (!std::filesystem::exists(path)) throw ConfigError(what + " file does not exist: " + path);
}

inline std::string require_artifact(const PipelineConfig& cfg, const std::string& file,
                                    const std::string& producer) {
  const std::string path = cfg.out(file).string();
  if (!std::filesystem::exists(path)) {
    throw ConfigError("missing pipeline artifact " + path + " (run '" + producer + "' first)");
  }
  return path;
}

inline NumericDataset reduced_dataset(const NumericDataset& source, const Matrix& projected,
                                      const std::string& prefix) {
  NumericDataset out;
  out.x = projected;
  out.labels = source.labels;
  out.class_names = source.class_names;
  out.class_sizes = source.class_sizes;
  for (Eigen::Index j = 0; j < projected.cols(); ++j) {
    EncodedColumnInfo info;
    info.name = prefix + "_" + std::to_string(j + 1);
    info.origin = info.name;
    info.origin_index = static_cast<int>(j);
    info.kind = ColumnKind::continuous;
    out.columns.push_back(std::move(info));
  }
  return out;
}

}  // namespace detail

struct IngestSummary {
  std::array<long, kCategoryCount> train_histogram{};
  std::array<long, kCategoryCount> test_histogram{};
  std::vector<std::string> class_names;
  long train_rows = 0;
  long test_rows = 0;
  long encoded_width = 0;
  long origin_features = 0;
  std::string train_dataset_path;
  std::string test_dataset_path;
};

/// Parse, label, encode and persist the train/test pair.
inline IngestSummary cmd_ingest(const PipelineConfig& cfg) {
  detail::require_file(cfg.schema_path, "schema");
  detail::require_file(cfg.labelmap_path, "label map");
  detail::require_file(cfg.train_path, "training data");
  detail::require_file(cfg.test_path, "test data");

  const Schema schema = load_schema(cfg.schema_path);
  LabelMap labels = LabelMap::load(cfg.labelmap_path);
  labels.policy = cfg.unknown_policy;
  labels.fallback_category = cfg.fallback_category;

  const RawDataset train_raw = parse_kdd_file(cfg.train_path, schema, cfg.has_header);
  const RawDataset test_raw = parse_kdd_file(cfg.test_path, schema, cfg.has_header);
  const LabelingResult train_lab = map_labels(train_raw, labels);
  const LabelingResult test_lab = map_labels(test_raw, labels);

  // class ids are the categories present in the training data, canonical order
  IngestSummary summary;
  summary.train_histogram = train_lab.histogram;
  summary.test_histogram = test_lab.histogram;
  std::array<int, kCategoryCount> remap;
  remap.fill(-1);
  for (int c = 0; c < kCategoryCount; ++c) {
    if (train_lab.histogram[static_cast<std::size_t>(c)] > 0) {
      remap[static_cast<std::size_t>(c)] = static_cast<int>(summary.class_names.size());
      summary.class_names.push_back(category_names()[static_cast<std::size_t>(c)]);
    }
  }
  auto remapped = [&](const std::vector<int>& ids, const std::string& which) {
    std::vector<int> out;
    out.reserve(ids.size());
    for (int id : ids) {
      const int mapped = remap[static_cast<std::size_t>(id)];
      if (mapped < 0) {
        throw DataError(which + " data contains category '" + category_names()[static_cast<std::size_t>(id)] +
                        "' which has no training samples");
      }
      out.push_back(mapped);
    }
    return out;
  };

  const Encoder enc = fit_encoder(train_raw);
  const NumericDataset train = enc.encode(train_raw, remapped(train_lab.ids, "training"), summary.class_names);
  const NumericDataset test = enc.encode(test_raw, remapped(test_lab.ids, "test"), summary.class_names);

  std::filesystem::create_directories(cfg.out_dir);
  summary.train_dataset_path = cfg.out("train.dataset.kda").string();
  summary.test_dataset_path = cfg.out("test.dataset.kda").string();
  save_dataset(train, summary.train_dataset_path);
  save_dataset(test, summary.test_dataset_path);
  summary.train_rows = train.rows();
  summary.test_rows = test.rows();
  summary.encoded_width = train.dims();
  summary.origin_features = static_cast<long>(schema.size());
  return summary;
}

struct ReduceSummary {
  std::string tag;
  std::string reducer;
  long components = 0;
  std::vector<double> eigenvalues;
  double fit_seconds = 0.0;
  std::string model_path;  // empty for the pass-through
  std::string train_path;
  std::string test_path;
};

inline void save_reduce_summary(const ReduceSummary& s, const std::string& path) {
  Json j;
  j["schema"] = "kda.reduce_summary/1";
  j["tag"] = s.tag;
  j["reducer"] = s.reducer;
  j["components"] = s.components;
  j["eigenvalues"] = s.eigenvalues;
  j["fit_seconds"] = s.fit_seconds;
  j["model"] = s.model_path;
  j["train"] = s.train_path;
  j["test"] = s.test_path;
  write_file_atomic(path, j.dump(2) + "\n");
}

inline ReduceSummary load_reduce_summary(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw DataError(path + ": invalid reduce summary (" + e.what() + ")");
  }
  if (!j.contains("schema") || j["schema"] != "kda.reduce_summary/1") {
    throw DataError(path + ": not a kda reduce summary");
  }
  ReduceSummary s;
  s.tag = j["tag"];
  s.reducer = j["reducer"];
  s.components = j["components"];
  s.eigenvalues = j["eigenvalues"].get<std::vector<double>>();
  s.fit_seconds = j["fit_seconds"];
  s.model_path = j["model"];
  s.train_path = j["train"];
  s.test_path = j["test"];
  return s;
}

/// Fit the configured reducer on the ingested training set (GDA subsamples a
/// class-stratified basis first), project both splits, persist model and
/// projected datasets under the dataset tag.
inline ReduceSummary cmd_reduce(const PipelineConfig& cfg) {
  const NumericDataset train =
      load_dataset(detail::require_artifact(cfg, "train.dataset.kda", "ingest"));
  const NumericDataset test = load_dataset(detail::require_artifact(cfg, "test.dataset.kda", "ingest"));

  ReduceSummary summary;
  summary.tag = cfg.dataset_tag();
  summary.reducer = cfg.reducer;
  summary.train_path = cfg.out(summary.tag + ".train.kda").string();
  summary.test_path = cfg.out(summary.tag + ".test.kda").string();

  if (cfg.reducer == "none") {
    save_dataset(train, summary.train_path);
    save_dataset(test, summary.test_path);
  } else if (cfg.reducer == "lda") {
    auto [model, seconds] = timed("reduce-fit", [&] { return fit_lda(train, cfg.components, cfg.lda_ridge); });
    summary.fit_seconds = seconds;
    summary.components = model.components();
    summary.eigenvalues.assign(model.eigenvalues.data(), model.eigenvalues.data() + model.eigenvalues.size());
    summary.model_path = cfg.out(summary.tag + ".model.kda").string();
    save_lda_model(model, summary.model_path);
    save_dataset(detail::reduced_dataset(train, project_lda(model, train.x), "lda"), summary.train_path);
    save_dataset(detail::reduced_dataset(test, project_lda(model, test.x), "lda"), summary.test_path);
  } else {
    GdaOptions options;
    options.ridge = cfg.gda_ridge;
    options.rank_tol = cfg.rank_tol;
    auto [model, seconds] = timed("reduce-fit", [&] {
      const NumericDataset basis = stratified_sample(train, cfg.budget, cfg.min_per_class, cfg.seed);
      return fit_gda(basis, cfg.kernel, cfg.components, options);
    });
    summary.fit_seconds = seconds;
    summary.components = model.components();
    summary.eigenvalues.assign(model.eigenvalues.data(), model.eigenvalues.data() + model.eigenvalues.size());
    summary.model_path = cfg.out(summary.tag + ".model.kda").string();
    save_gda_model(model, summary.model_path);
    save_dataset(detail::reduced_dataset(train, project_gda(model, train.x), "gda"), summary.train_path);
    save_dataset(detail::reduced_dataset(test, project_gda(model, test.x), "gda"), summary.test_path);
  }
  save_reduce_summary(summary, cfg.out(summary.tag + ".reduce.json").string());
  return summary;
}

/// Train the configured classifier on the reduced training split, evaluate on
/// the reduced test split, and persist the report in every requested format.
inline RunReport cmd_train_eval(const PipelineConfig& cfg) {
  const std::string tag = cfg.dataset_tag();
  const ReduceSummary reduce =
      load_reduce_summary(detail::require_artifact(cfg, tag + ".reduce.json", "reduce"));
  const NumericDataset train = load_dataset(detail::require_artifact(cfg, tag + ".train.kda", "reduce"));
  const NumericDataset test = load_dataset(detail::require_artifact(cfg, tag + ".test.kda", "reduce"));
  if (train.class_names != test.class_names) {
    throw DataError("train and test datasets disagree on the class set");
  }

  RunReport report;
  report.name = cfg.name();
  report.config_echo = cfg.echo;
  report.dataset_tag = tag;
  report.train_rows = train.rows();
  report.test_rows = test.rows();
  report.features = train.dims();
  report.class_names = train.class_names;
  report.train_class_sizes = train.class_sizes;
  report.test_class_sizes = test.class_sizes;
  report.reducer = reduce.reducer;
  report.components = reduce.components;
  report.eigenvalues = reduce.eigenvalues;
  report.classifier = cfg.classifier;
  report.timings.add("reduce-fit", reduce.fit_seconds);

  std::vector<int> predictions;
  std::string model_path;
  if (cfg.classifier == "tree") {
    TreeModel model = timed_into(report.timings, "classifier-train", [&] { return train_tree(train, cfg.tree); });
    predictions = timed_into(report.timings, "classifier-test", [&] { return predict_tree(model, test.x); }).labels;
    model_path = cfg.out(report.name + ".tree.kda").string();
    save_tree_model(model, model_path);
  } else {
    if (!cfg.mlp_seed_given) {
      throw ConfigError("classifier.mlp.seed is required (pass it in the config or via --seed)");
    }
    MlpModel model = timed_into(report.timings, "classifier-train", [&] { return train_mlp(train, cfg.mlp); });
    predictions = timed_into(report.timings, "classifier-test", [&] { return predict_mlp(model, test.x); }).labels;
    model_path = cfg.out(report.name + ".mlp.kda").string();
    save_mlp_model(model, model_path);
  }

  report.confusion = confusion_matrix(test.labels, predictions, test.class_names);
  report.per_class = class_reports(report.confusion);
  report.accuracy = accuracy_percent(report.confusion);
  report.artifacts["classifier_model"] = model_path;
  report.artifacts["reduced_train"] = reduce.train_path;
  report.artifacts["reduced_test"] = reduce.test_path;
  if (!reduce.model_path.empty()) report.artifacts["reducer_model"] = reduce.model_path;

  for (const std::string& fmt : cfg.formats) {
    const std::string path = cfg.out(report.name + ".report." + fmt).string();
    if (fmt == "json") {
      save_report_json(report, path);
    } else if (fmt == "csv") {
      write_file_atomic(path, reports_to_csv({report}));
    } else {
      write_file_atomic(path, report_to_text(report));
    }
  }
  return report;
}

struct ReportOutputs {
  std::vector<std::string> svg_paths;
  std::string csv_path;
};

/// Cross-run comparison artifacts: per-class grouped bar charts for detection
/// rate, false alarm rate and the two timings, plus one combined CSV.
inline ReportOutputs cmd_report(const std::vector<std::string>& report_paths, const std::string& out_dir) {
  if (report_paths.empty()) throw ConfigError("cmd_report: need at least one run report");
  std::vector<RunReport> reports;
  for (const auto& path : report_paths) reports.push_back(load_report(path));
  for (const auto& report : reports) {
    if (report.class_names != reports.front().class_names) {
      throw DataError("run reports disagree on the class set ('" + report.name + "' vs '" +
                      reports.front().name + "')");
    }
  }

  const std::vector<std::string>& classes = reports.front().class_names;
  std::vector<std::string> series;
  for (const auto& report : reports) series.push_back(report.name);

  auto collect = [&](auto&& per_report) {
    std::vector<std::vector<std::optional<double>>> values;
    for (const auto& report : reports) {
      std::vector<std::optional<double>> row;
      for (std::size_t g = 0; g < classes.size(); ++g) row.push_back(per_report(report, g));
      values.push_back(std::move(row));
    }
    return values;
  };

  std::filesystem::create_directories(out_dir);
  ReportOutputs outputs;
  const auto emit = [&](const std::string& file, const std::string& title, const std::string& unit,
                        const std::vector<std::vector<std::optional<double>>>& values) {
    const std::string path = (std::filesystem::path(out_dir) / file).string();
    write_file_atomic(path, svg_grouped_bars(title, classes, series, values, unit));
    outputs.svg_paths.push_back(path);
  };

  emit("dr.svg", "Detection rate by class", "percent",
       collect([](const RunReport& r, std::size_t g) { return r.per_class[g].detection_rate; }));
  emit("far.svg", "False alarm rate by class (100 - precision)", "percent",
       collect([](const RunReport& r, std::size_t g) { return r.per_class[g].far_tabular; }));
  emit("train_time.svg", "Training time", "seconds", collect([](const RunReport& r, std::size_t) {
         return std::optional<double>(r.timings.find("classifier-train").value_or(0.0));
       }));
  emit("test_time.svg", "Testing time", "seconds", collect([](const RunReport& r, std::size_t) {
         return std::optional<double>(r.timings.find("classifier-test").value_or(0.0));
       }));

  outputs.csv_path = (std::filesystem::path(out_dir) / "comparison.csv").string();
  write_file_atomic(outputs.csv_path, reports_to_csv(reports));
  return outputs;
}

}  // namespace kda
