// Acceptance suite: one check function per criterion, one pass/fail line per
// criterion on stdout. Exits nonzero if any criterion fails.

#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "kda/model_io.hpp"
#include "kda/pipeline.hpp"
#include "reference_tables.hpp"
#include "test_support.hpp"

using kda::Matrix;
using kda::Vector;
namespace pt = reftables;
namespace ts = testsupport;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

void check_close(double got, double want, double tol, const std::string& what) {
  if (!(std::abs(got - want) <= tol)) {
    std::ostringstream os;
    os << what << ": got " << std::setprecision(10) << got << ", want " << want << " +/- " << tol;
    throw Failure(os.str());
  }
}

// ---------------------------------------------------------------------------
// 1. metric fixture reproduction
// ---------------------------------------------------------------------------

void criterion_metric_fixtures() {
  // C4.5/GDA table against the printed margins and its summary-table columns
  {
    const auto cm = pt::c45_gda();
    const auto pct = kda::table_percentages(cm);
    const std::vector<double> cols = pt::c45_gda_col_pct();
    for (int c = 0; c < 5; ++c) {
      check_close(*pct.row[static_cast<std::size_t>(c)], pt::c45_gda_dr()[static_cast<std::size_t>(c)], 0.05,
                  "row percent, class " + cm.class_names[static_cast<std::size_t>(c)]);
      check_close(*pct.col[static_cast<std::size_t>(c)], cols[static_cast<std::size_t>(c)], 0.05,
                  "column percent, class " + cm.class_names[static_cast<std::size_t>(c)]);
      check_close(kda::far_tabular(cm, c), pt::c45_gda_far()[static_cast<std::size_t>(c)], 0.05,
                  "summary FAR, class " + cm.class_names[static_cast<std::size_t>(c)]);
      check_close(kda::detection_rate(cm, c), pt::c45_gda_dr()[static_cast<std::size_t>(c)], 0.05,
                  "summary DR, class " + cm.class_names[static_cast<std::size_t>(c)]);
    }
  }
  // ANN/LDA table against its summary columns (Probe DR and the two R2L cells
  // are pinned to the matrix-derived values; see tests/reference_tables.hpp)
  {
    const auto cm = pt::ann_lda();
    for (int c = 0; c < 5; ++c) {
      check_close(kda::detection_rate(cm, c), pt::ann_lda_dr()[static_cast<std::size_t>(c)], 0.05,
                  "ANN/LDA DR, class " + cm.class_names[static_cast<std::size_t>(c)]);
      check_close(kda::far_tabular(cm, c), pt::ann_lda_far()[static_cast<std::size_t>(c)], 0.05,
                  "ANN/LDA FAR, class " + cm.class_names[static_cast<std::size_t>(c)]);
    }
  }
}

// ---------------------------------------------------------------------------
// 2. GDA-LDA equivalence
// ---------------------------------------------------------------------------

void criterion_equivalence() {
  kda::Rng rng(2024);
  const long per_class = 30;  // 60 points
  Matrix x(2 * per_class, 2);
  std::vector<int> labels;
  for (long i = 0; i < 2 * per_class; ++i) {
    const int cls = i < per_class ? 0 : 1;
    x(i, 0) = (cls == 0 ? -1.0 : 1.0) + rng.uniform(-1, 1);
    x(i, 1) = 0.5 * x(i, 0) + rng.uniform(-1, 1);
    labels.push_back(cls);
  }
  const auto train = ts::make_dataset(x, labels, 2);
  const auto test = ts::random_blobs(2025, 2, 15, 2);

  kda::KernelSpec linear;
  linear.family = kda::KernelFamily::linear;
  kda::GdaOptions options;
  options.ridge = 0.0;
  const auto gda = kda::fit_gda(train, linear, 1, options);
  const auto lda = kda::fit_lda(train, 1, 0.0);

  const double train_angle =
      ts::principal_angle(kda::project_gda(gda, train.x), kda::project_lda(lda, train.x));
  const double test_angle =
      ts::principal_angle(kda::project_gda(gda, test.x), kda::project_lda(lda, test.x));
  check(train_angle < 1e-6, "training-projection principal angle " + std::to_string(train_angle));
  check(test_angle < 1e-6, "test-projection principal angle " + std::to_string(test_angle));
}

// ---------------------------------------------------------------------------
// 3. quotient self-consistency and bound
// ---------------------------------------------------------------------------

void criterion_rayleigh() {
  struct Fixture {
    std::uint64_t seed;
    int classes;
    long per_class;
    long dims;
    kda::KernelSpec kernel;
  };
  // rank-limited kernels keep the eigenvalues interior instead of saturating
  // at 1; the quotient is compared as written, so the fits carry no ridge
  kda::KernelSpec wide_gaussian;
  wide_gaussian.gaussian_s = 50.0;
  kda::KernelSpec linear;
  linear.family = kda::KernelFamily::linear;
  kda::KernelSpec quadratic;
  quadratic.family = kda::KernelFamily::polynomial;
  quadratic.poly_degree = 2;
  const std::vector<Fixture> fixtures = {
      {301, 2, 12, 2, wide_gaussian}, {302, 3, 10, 3, linear}, {303, 4, 8, 5, quadratic}};

  for (const auto& f : fixtures) {
    const auto ds = ts::random_blobs(f.seed, f.classes, f.per_class, f.dims, 1.0, 1.2);
    const kda::KernelSpec& spec = f.kernel;
    kda::GdaOptions fit_options;
    fit_options.ridge = 0.0;
    const auto model = kda::fit_gda(ds, spec, 4, fit_options);
    check(model.eigenvalues(0) < 1.0 - 1e-3, "fixture saturated; eigenvalues are not interior");

    const Matrix gram = kda::gram_matrix(model.basis, model.basis, spec);
    const auto [centered, stats] = kda::center_kernel(kda::SymmetricMatrix(gram));
    (void)stats;
    const kda::SymmetricMatrix kc(centered);
    const auto d = kda::build_d_matrix(model.class_sizes);
    for (Eigen::Index i = 0; i < model.components(); ++i) {
      const double quotient = kda::rayleigh_quotient(kc, d, model.alphas.col(i));
      const double rel = std::abs(quotient - model.eigenvalues(i)) / model.eigenvalues(i);
      check(rel <= 1e-7, "fixture seed " + std::to_string(f.seed) + ", component " + std::to_string(i) +
                             ": relative error " + std::to_string(rel));
    }
  }

  // 1000 random alphas on a seeded 20-point problem never exceed 1 + 1e-8
  const auto ds = ts::random_blobs(304, 2, 10, 2);
  kda::KernelSpec spec;
  spec.gaussian_s = 1.0;
  const auto model = kda::fit_gda(ds, spec, 1);
  const Matrix gram = kda::gram_matrix(model.basis, model.basis, spec);
  const auto [centered, stats] = kda::center_kernel(kda::SymmetricMatrix(gram));
  (void)stats;
  const kda::SymmetricMatrix kc(centered);
  const auto d = kda::build_d_matrix(model.class_sizes);
  kda::Rng rng(305);
  for (int trial = 0; trial < 1000; ++trial) {
    Vector alpha(20);
    for (int i = 0; i < 20; ++i) alpha(i) = rng.uniform(-1, 1);
    const double quotient = kda::rayleigh_quotient(kc, d, alpha);
    check(quotient <= 1.0 + 1e-8, "random alpha exceeded the bound: " + std::to_string(quotient));
  }
}

// ---------------------------------------------------------------------------
// 4. scatter identities
// ---------------------------------------------------------------------------

void criterion_scatter() {
  kda::Rng seeds(400);
  for (int trial = 0; trial < 20; ++trial) {
    const int classes = 2 + static_cast<int>(seeds.below(4));   // 2..5
    const long dims = 2 + static_cast<long>(seeds.below(9));    // 2..10
    const auto ds = ts::random_blobs(4000 + static_cast<std::uint64_t>(trial), classes, 12, dims);

    const auto sp = kda::scatter_matrices(ds);
    const auto oracle = ts::brute_scatter(ds);
    const Matrix total = sp.between + sp.within;
    check((total - oracle.total).norm() <= 1e-8 * oracle.total.norm(),
          "B + W differs from the total scatter (trial " + std::to_string(trial) + ")");

    const auto eb = kda::sym_eig(kda::SymmetricMatrix(sp.between));
    if (classes <= static_cast<int>(dims)) {
      check(eb.eigenvalues(classes - 1) <= 1e-8 * std::max(eb.eigenvalues(0), 1e-300),
            "rank(B) exceeds C-1 (trial " + std::to_string(trial) + ")");
    }

    if (dims == 2) {
      const auto model = kda::fit_lda(ds, 1);
      const Vector oracle_dir = ts::grid_search_direction(sp.between, sp.within, model.ridge);
      const double angle_deg = ts::line_angle(model.projection.col(0), oracle_dir) * 180.0 / M_PI;
      check(angle_deg <= 0.1,
            "grid-search direction differs by " + std::to_string(angle_deg) + " degrees");
    }
  }
}

// ---------------------------------------------------------------------------
// 5. nonlinear separability through the pipeline
// ---------------------------------------------------------------------------

kda::ConfigMap base_config(const std::string& train, const std::string& test, const std::string& schema,
                           const std::string& labelmap, const std::string& out_dir,
                           const std::string& reducer) {
  kda::ConfigMap map;
  map["paths.train"] = train;
  map["paths.test"] = test;
  map["paths.schema"] = schema;
  map["paths.labelmap"] = labelmap;
  map["reducer.kind"] = reducer;
  map["reducer.components"] = "4";
  map["classifier.kind"] = "tree";
  map["out.dir"] = out_dir;
  return map;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(KDA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

double class_dr(const kda::RunReport& report, const std::string& name) {
  for (const auto& c : report.per_class) {
    if (c.name == name) {
      check(c.detection_rate.has_value(), "class " + name + " has no detection rate");
      return *c.detection_rate;
    }
  }
  throw Failure("class " + name + " missing from the report");
}

void criterion_separability() {
  ts::TempDir dir("kda-acc5");

  // rings through the in-process pipeline, GDA vs LDA, frozen thresholds
  const auto rings = ts::make_rings(500, 100, 100);  // 400 points total
  const auto corpus = ts::write_rings_corpus(dir, rings);
  auto gda_map = base_config(corpus.train_csv, corpus.test_csv, corpus.schema, corpus.labelmap,
                             dir.path("rings_gda"), "gda");
  gda_map["reducer.gda.sigma"] = "0.5";
  auto lda_map = base_config(corpus.train_csv, corpus.test_csv, corpus.schema, corpus.labelmap,
                             dir.path("rings_lda"), "lda");

  const auto gda_cfg = kda::pipeline_config_from_map(gda_map);
  kda::cmd_ingest(gda_cfg);
  kda::cmd_reduce(gda_cfg);
  const auto gda_report = kda::cmd_train_eval(gda_cfg);

  const auto lda_cfg = kda::pipeline_config_from_map(lda_map);
  kda::cmd_ingest(lda_cfg);
  kda::cmd_reduce(lda_cfg);
  const auto lda_report = kda::cmd_train_eval(lda_cfg);

  check(gda_report.accuracy >= 95.0,
        "GDA->tree accuracy " + std::to_string(gda_report.accuracy) + "% is below 95%");
  check(lda_report.accuracy <= 75.0,
        "LDA->tree accuracy " + std::to_string(lda_report.accuracy) + "% is above 75%");

  // the same configs drive the shipped binary end to end
  ts::write_text(dir.path("cli.conf"), [&] {
    std::string text;
    auto cli_map = gda_map;
    cli_map["out.dir"] = dir.path("cli_out");
    for (const auto& [k, v] : cli_map) text += k + "=" + v + "\n";
    return text;
  }());
  check(run_cli("ingest --config " + dir.path("cli.conf")) == 0, "CLI ingest failed");
  check(run_cli("reduce --config " + dir.path("cli.conf")) == 0, "CLI reduce failed");
  check(run_cli("train-eval --config " + dir.path("cli.conf")) == 0, "CLI train-eval failed");
  check(run_cli("report " + dir.path("cli_out") + "/GDADATA-tree.report.json --out " +
                dir.path("cli_charts")) == 0,
        "CLI report failed");
  check(std::filesystem::exists(dir.path("cli_charts") + "/dr.svg"), "CLI report emitted no charts");

  // KDD-format corpus: ingest, stratify down to a 5k-row training subsample,
  // then GDA -> tree must rank DOS far above U2R
  const kda::Schema schema = kda::load_schema(std::string(KDA_DATA_DIR) + "/kdd.schema");
  ts::write_kdd_corpus(dir.path("kdd_train.csv"), schema,
                       {{"Normal", 2500}, {"DOS", 2000}, {"R2L", 500}, {"U2R", 60}, {"Probe", 500}}, 501);
  ts::write_kdd_corpus(dir.path("kdd_test.csv"), schema,
                       {{"Normal", 700}, {"DOS", 600}, {"R2L", 150}, {"U2R", 40}, {"Probe", 150}}, 502);

  auto kdd_map = base_config(dir.path("kdd_train.csv"), dir.path("kdd_test.csv"),
                             std::string(KDA_DATA_DIR) + "/kdd.schema",
                             std::string(KDA_DATA_DIR) + "/kdd_attack_map.csv", dir.path("kdd_out"), "gda");
  kdd_map["reducer.gda.sigma"] = "30";
  kdd_map["reducer.gda.budget"] = "2000";
  const auto kdd_cfg = kda::pipeline_config_from_map(kdd_map);
  const auto ingest = kda::cmd_ingest(kdd_cfg);
  check(ingest.train_rows == 5560, "unexpected corpus size");

  const auto full_train = kda::load_dataset(ingest.train_dataset_path);
  const auto subsample = kda::stratified_sample(full_train, 5000, 50, 1);
  check(subsample.rows() <= 5060 && subsample.rows() >= 5000, "stratified subsample size off");
  kda::save_dataset(subsample, ingest.train_dataset_path);

  kda::cmd_reduce(kdd_cfg);
  const auto kdd_report = kda::cmd_train_eval(kdd_cfg);
  const double dos_dr = class_dr(kdd_report, "DOS");
  const double u2r_dr = class_dr(kdd_report, "U2R");
  check(dos_dr > u2r_dr, "DOS DR " + std::to_string(dos_dr) + " is not above U2R DR " +
                             std::to_string(u2r_dr));
}

// ---------------------------------------------------------------------------
// 6. classifier correctness
// ---------------------------------------------------------------------------

void criterion_classifiers() {
  // gain-ratio fixtures
  check_close(kda::entropy({9, 5}), 0.940286, 1e-5, "entropy(9,5)");
  check_close(kda::entropy({5, 4, 5}), 1.577406, 1e-5, "split info entropy(5,4,5)");
  check_close(kda::gain_ratio({9, 5}, {{2, 3}, {4, 0}, {3, 2}}), 0.156428, 1e-5, "gain ratio fixture");

  // tree reaches purity on consistent data with min_gain 0
  const auto blobs = ts::random_blobs(600, 3, 30, 3);
  const auto tree = kda::train_tree(blobs, {1, 1 << 20, 0.0});
  const auto pred = kda::predict_tree(tree, blobs.x);
  check(pred.labels == blobs.labels, "tree failed to reach 100% training accuracy");

  // analytic gradients vs central finite differences on a seeded 5x3x2 net
  kda::Rng rng(601);
  const Matrix x = ts::random_matrix(rng, 10, 5);
  std::vector<int> y;
  for (int i = 0; i < 10; ++i) y.push_back(static_cast<int>(rng.below(2)));
  kda::MlpConfig config;
  config.hidden = 3;
  config.epochs = 0;
  config.seed = 602;
  kda::MlpModel model = kda::train_mlp(ts::make_dataset(x, y, 2), config);

  const auto analytic = kda::mlp_gradients(model, x, y);
  const double h = 1e-5;
  auto probe = [&](double* slot, double grad, const std::string& tag) {
    const double keep = *slot;
    *slot = keep + h;
    const double up = kda::mlp_loss(model, x, y);
    *slot = keep - h;
    const double down = kda::mlp_loss(model, x, y);
    *slot = keep;
    const double numeric = (up - down) / (2 * h);
    const double rel = std::abs(numeric - grad) / std::max({std::abs(numeric), std::abs(grad), 1e-8});
    check(rel <= 1e-4, tag + ": gradient relative error " + std::to_string(rel));
  };
  // Eigen stores column-major; matching flat buffers line up entry for entry
  for (Eigen::Index i = 0; i < model.w1.size(); ++i) probe(model.w1.data() + i, analytic.w1.data()[i], "w1");
  for (Eigen::Index i = 0; i < model.b1.size(); ++i) probe(model.b1.data() + i, analytic.b1.data()[i], "b1");
  for (Eigen::Index i = 0; i < model.w2.size(); ++i) probe(model.w2.data() + i, analytic.w2.data()[i], "w2");
  for (Eigen::Index i = 0; i < model.b2.size(); ++i) probe(model.b2.data() + i, analytic.b2.data()[i], "b2");
}

// ---------------------------------------------------------------------------
// 7. determinism and persistence
// ---------------------------------------------------------------------------

void criterion_determinism() {
  ts::TempDir dir("kda-acc7");
  const auto rings = ts::make_rings(700, 60, 60);
  const auto corpus = ts::write_rings_corpus(dir, rings);
  auto map = base_config(corpus.train_csv, corpus.test_csv, corpus.schema, corpus.labelmap,
                         dir.path("out"), "gda");
  map["reducer.gda.sigma"] = "0.5";
  map["classifier.kind"] = "mlp";
  map["classifier.mlp.seed"] = "7";
  map["classifier.mlp.epochs"] = "10";
  const auto cfg = kda::pipeline_config_from_map(map);

  kda::cmd_ingest(cfg);
  kda::cmd_reduce(cfg);
  auto j1 = kda::report_to_json(kda::cmd_train_eval(cfg));
  auto j2 = kda::report_to_json(kda::cmd_train_eval(cfg));
  j1.erase("timings");
  j2.erase("timings");
  check(j1.dump(2) == j2.dump(2), "reports differ beyond the timing fields");

  // save/load round trips for every model type
  const auto train = ts::random_blobs(701, 3, 20, 4);
  const auto probe = ts::random_blobs(702, 1, 12, 4);

  const auto lda = kda::fit_lda(train, 2);
  kda::save_lda_model(lda, dir.path("lda.kda"));
  check((kda::project_lda(kda::load_lda_model(dir.path("lda.kda")), probe.x) -
         kda::project_lda(lda, probe.x))
                .cwiseAbs()
                .maxCoeff() <= 1e-12,
        "LDA projections drifted across save/load");

  kda::KernelSpec spec;
  spec.gaussian_s = 2.0;
  const auto gda = kda::fit_gda(train, spec, 2);
  kda::save_gda_model(gda, dir.path("gda.kda"));
  check((kda::project_gda(kda::load_gda_model(dir.path("gda.kda")), probe.x) -
         kda::project_gda(gda, probe.x))
                .cwiseAbs()
                .maxCoeff() <= 1e-12,
        "GDA projections drifted across save/load");

  const auto tree = kda::train_tree(train, {});
  kda::save_tree_model(tree, dir.path("tree.kda"));
  check(kda::predict_tree(kda::load_tree_model(dir.path("tree.kda")), probe.x).labels ==
            kda::predict_tree(tree, probe.x).labels,
        "tree predictions drifted across save/load");

  kda::MlpConfig mconfig;
  mconfig.hidden = 5;
  mconfig.epochs = 5;
  mconfig.batch = 16;
  mconfig.seed = 703;
  const auto mlp = kda::train_mlp(train, mconfig);
  kda::save_mlp_model(mlp, dir.path("mlp.kda"));
  check((kda::predict_mlp(kda::load_mlp_model(dir.path("mlp.kda")), probe.x).probabilities -
         kda::predict_mlp(mlp, probe.x).probabilities)
                .cwiseAbs()
                .maxCoeff() <= 1e-12,
        "MLP probabilities drifted across save/load");
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    std::function<void()> run;
  };
  const std::vector<Criterion> criteria = {
      {"1. metric fixture reproduction (C4.5/GDA exact; ANN/LDA with matrix-derived pins)",
       criterion_metric_fixtures},
      {"2. GDA-LDA equivalence (linear kernel, principal angle < 1e-6 rad)", criterion_equivalence},
      {"3. quotient self-consistency (1e-7 relative) and bound (1000 random alphas)", criterion_rayleigh},
      {"4. scatter identities and grid-search direction match (20 seeded datasets)", criterion_scatter},
      {"5. nonlinear separability: rings GDA>=0.95 / LDA<=0.75; KDD-format 5k pipeline, DOS DR > U2R DR",
       criterion_separability},
      {"6. classifier correctness (gradients, purity, gain-ratio fixtures)", criterion_classifiers},
      {"7. determinism and persistence round trips", criterion_determinism},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    try {
      criterion.run();
      std::cout << "[PASS] " << criterion.name << "\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "[FAIL] " << criterion.name << " -- " << e.what() << "\n";
    }
  }
  return failures;
}
