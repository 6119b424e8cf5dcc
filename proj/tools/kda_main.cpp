#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kda/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "pipeline config file")->required();
  cmd->add_option("--seed", [&args](const CLI::results_t& res) {
        try {
          args.seed = std::stoull(res[0]);
        } catch (const std::exception&) {
          return false;  // CLI11 reports the conversion failure
        }
        return true;
      },
      "override the reducer and classifier seeds");
  cmd->add_option("--out", [&args](const CLI::results_t& res) {
        args.out_dir = res[0];
        return true;
      },
      "override the output directory (also via KDA_OUT)");
}

kda::PipelineConfig load(const CommonArgs& args) {
  kda::CliOverrides overrides;
  overrides.out_dir = args.out_dir;
  overrides.seed = args.seed;
  return kda::load_pipeline_config(args.config_path, overrides);
}

void print_histogram(const char* title, const std::array<long, kda::kCategoryCount>& hist) {
  std::cout << title;
  for (int c = 0; c < kda::kCategoryCount; ++c) {
    std::cout << " " << kda::category_names()[static_cast<std::size_t>(c)] << "=" << hist[static_cast<std::size_t>(c)];
  }
  std::cout << "\n";
}

int run_ingest(const CommonArgs& args) {
  const auto cfg = load(args);
  const auto summary = kda::cmd_ingest(cfg);
  print_histogram("train:", summary.train_histogram);
  print_histogram("test: ", summary.test_histogram);
  std::cout << "encoded " << summary.train_rows << " train / " << summary.test_rows << " test rows, "
            << summary.origin_features << " features -> " << summary.encoded_width << " columns\n";
  std::cout << "wrote " << summary.train_dataset_path << "\n";
  std::cout << "wrote " << summary.test_dataset_path << "\n";
  return 0;
}

int run_reduce(const CommonArgs& args) {
  const auto cfg = load(args);
  const auto summary = kda::cmd_reduce(cfg);
  std::cout << summary.tag << ": reducer=" << summary.reducer << " components=" << summary.components;
  if (!summary.eigenvalues.empty()) {
    std::cout << " eigenvalues=";
    for (std::size_t i = 0; i < summary.eigenvalues.size(); ++i) {
      std::cout << (i ? "," : "") << summary.eigenvalues[i];
    }
  }
  std::cout << "\n";
  std::cout << "wrote " << summary.train_path << "\n";
  std::cout << "wrote " << summary.test_path << "\n";
  if (!summary.model_path.empty()) std::cout << "wrote " << summary.model_path << "\n";
  return 0;
}

int run_train_eval(const CommonArgs& args) {
  const auto cfg = load(args);
  const auto report = kda::cmd_train_eval(cfg);
  std::cout << kda::report_to_text(report);
  return 0;
}

int run_report(const std::vector<std::string>& reports, const std::string& out_dir) {
  const auto outputs = kda::cmd_report(reports, out_dir);
  for (const auto& path : outputs.svg_paths) std::cout << "wrote " << path << "\n";
  std::cout << "wrote " << outputs.csv_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discriminant-analysis feature reduction pipeline for connection-record classification"};
  app.require_subcommand(1);

  CommonArgs ingest_args, reduce_args, train_args;
  auto* ingest = app.add_subcommand("ingest", "parse, label, encode and persist the train/test pair");
  add_common(ingest, ingest_args);
  auto* reduce = app.add_subcommand("reduce", "fit the reducer and project both splits");
  add_common(reduce, reduce_args);
  auto* train_eval = app.add_subcommand("train-eval", "train the classifier and evaluate on the test split");
  add_common(train_eval, train_args);

  std::vector<std::string> report_paths;
  std::string report_out = "out";
  auto* report = app.add_subcommand("report", "emit comparison charts and a combined CSV from run reports");
  report->add_option("reports", report_paths, "run report JSON files")->required()->expected(-1);
  report->add_option("--out", report_out, "output directory for charts (also via KDA_OUT)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) return run_ingest(ingest_args);
    if (reduce->parsed()) return run_reduce(reduce_args);
    if (train_eval->parsed()) return run_train_eval(train_args);
    if (report->parsed()) {
      if (const char* env = std::getenv("KDA_OUT"); env && *env && report->count("--out") == 0) {
        report_out = env;
      }
      return run_report(report_paths, report_out);
    }
  } catch (const kda::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const kda::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const kda::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
