#pragma once

#include <algorithm>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kda/common.hpp"
#include "kda/metrics.hpp"
#include "kda/model_io.hpp"

namespace kda {

using Json = nlohmann::ordered_json;

/// Everything a finished train/evaluate run produced. Serializes to a stable
/// JSON layout: reruns with the same config and seeds are byte-identical
/// except for the "timings" object.
struct RunReport {
  std::string name;
  ConfigMap config_echo;

  std::string dataset_tag;  // ORIGDATA / LDADATA / GDADATA
  long train_rows = 0;
  long test_rows = 0;
  long features = 0;
  std::vector<std::string> class_names;
  std::vector<long> train_class_sizes;
  std::vector<long> test_class_sizes;

  std::string reducer;
  long components = 0;
  std::vector<double> eigenvalues;

  std::string classifier;
  ConfusionMatrix confusion;
  std::vector<ClassReport> per_class;
  double accuracy = 0.0;

  Timings timings;
  ConfigMap artifacts;  // logical name -> path
};

namespace detail {

inline Json optional_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

inline std::optional<double> json_optional(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace detail

inline Json report_to_json(const RunReport& report) {
  Json j;
  j["schema"] = "kda.run_report/1";
  j["name"] = report.name;
  j["config"] = report.config_echo;
  j["dataset"] = Json{{"tag", report.dataset_tag},
                      {"train_rows", report.train_rows},
                      {"test_rows", report.test_rows},
                      {"features", report.features},
                      {"classes", report.class_names},
                      {"train_class_sizes", report.train_class_sizes},
                      {"test_class_sizes", report.test_class_sizes}};
  j["reducer"] = Json{{"kind", report.reducer},
                      {"components", report.components},
                      {"eigenvalues", report.eigenvalues}};
  j["classifier"] = report.classifier;
  j["confusion"] = Json{{"classes", report.confusion.class_names}, {"counts", report.confusion.counts}};
  Json per_class = Json::array();
  for (const auto& c : report.per_class) {
    per_class.push_back(Json{{"class", c.name},
                             {"tp", c.tp},
                             {"fp", c.fp},
                             {"fn", c.fn},
                             {"tn", c.tn},
                             {"support", c.support},
                             {"detection_rate", detail::optional_json(c.detection_rate)},
                             {"far_textual", detail::optional_json(c.far_textual)},
                             {"far_tabular", detail::optional_json(c.far_tabular)},
                             {"precision", detail::optional_json(c.precision)}});
  }
  j["per_class"] = per_class;
  j["accuracy"] = report.accuracy;
  Json timings;
  for (const auto& [tag, seconds] : report.timings.entries) timings[tag] = seconds;
  j["timings"] = timings;
  j["artifacts"] = report.artifacts;
  return j;
}

inline RunReport report_from_json(const Json& j) {
  if (!j.contains("schema") || j["schema"] != "kda.run_report/1") {
    throw DataError("not a kda run report (schema mismatch)");
  }
  RunReport r;
  r.name = j["name"];
  r.config_echo = j["config"].get<ConfigMap>();
  r.dataset_tag = j["dataset"]["tag"];
  r.train_rows = j["dataset"]["train_rows"];
  r.test_rows = j["dataset"]["test_rows"];
  r.features = j["dataset"]["features"];
  r.class_names = j["dataset"]["classes"].get<std::vector<std::string>>();
  r.train_class_sizes = j["dataset"]["train_class_sizes"].get<std::vector<long>>();
  r.test_class_sizes = j["dataset"]["test_class_sizes"].get<std::vector<long>>();
  r.reducer = j["reducer"]["kind"];
  r.components = j["reducer"]["components"];
  r.eigenvalues = j["reducer"]["eigenvalues"].get<std::vector<double>>();
  r.classifier = j["classifier"];
  r.confusion.class_names = j["confusion"]["classes"].get<std::vector<std::string>>();
  r.confusion.counts = j["confusion"]["counts"].get<std::vector<std::vector<long>>>();
  for (const auto& c : j["per_class"]) {
    ClassReport rep;
    rep.name = c["class"];
    rep.tp = c["tp"];
    rep.fp = c["fp"];
    rep.fn = c["fn"];
    rep.tn = c["tn"];
    rep.support = c["support"];
    rep.detection_rate = detail::json_optional(c["detection_rate"]);
    rep.far_textual = detail::json_optional(c["far_textual"]);
    rep.far_tabular = detail::json_optional(c["far_tabular"]);
    rep.precision = detail::json_optional(c["precision"]);
    r.per_class.push_back(std::move(rep));
  }
  r.accuracy = j["accuracy"];
  for (const auto& [tag, seconds] : j["timings"].items()) r.timings.add(tag, seconds.get<double>());
  r.artifacts = j["artifacts"].get<ConfigMap>();
  return r;
}

inline void save_report_json(const RunReport& report, const std::string& path) {
  write_file_atomic(path, report_to_json(report).dump(2) + "\n");
}

inline RunReport load_report(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw DataError(path + ": invalid report JSON (" + e.what() + ")");
  }
  try {
    return report_from_json(j);
  } catch (const Json::exception& e) {
    throw DataError(path + ": malformed report (" + e.what() + ")");
  }
}

namespace detail {

inline std::string fmt_percent(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << *v;
  return os.str();
}

inline std::string fmt_seconds(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

}  // namespace detail

/// One metrics row per (class, variant), in the summary-table column layout.
inline std::string reports_to_csv(const std::vector<RunReport>& reports) {
  std::string csv = "class,variant,DR,FAR_tabular,FAR_textual,train_s,test_s\n";
  for (const auto& report : reports) {
    const double train_s = report.timings.find("classifier-train").value_or(0.0);
    const double test_s = report.timings.find("classifier-test").value_or(0.0);
    for (const auto& c : report.per_class) {
      csv += c.name + "," + report.name + "," + detail::fmt_percent(c.detection_rate) + "," +
             detail::fmt_percent(c.far_tabular) + "," + detail::fmt_percent(c.far_textual) + "," +
             detail::fmt_seconds(train_s) + "," + detail::fmt_seconds(test_s) + "\n";
    }
  }
  return csv;
}

inline std::string report_to_text(const RunReport& report) {
  std::ostringstream os;
  os << "run: " << report.name << "\n";
  os << "dataset: " << report.dataset_tag << " (" << report.train_rows << " train, " << report.test_rows
     << " test, " << report.features << " features)\n";
  os << "reducer: " << report.reducer << " (" << report.components << " components)\n";
  os << "classifier: " << report.classifier << "\n";
  os << std::fixed << std::setprecision(2) << "accuracy: " << report.accuracy << "%\n\n";
  os << render_confusion(report.confusion);
  os << "\nclass\tDR\tFAR(tabular)\tFAR(textual)\tprecision\n";
  for (const auto& c : report.per_class) {
    auto cell = [](const std::optional<double>& v) { return v ? detail::fmt_percent(v) : std::string("-"); };
    os << c.name << '\t' << cell(c.detection_rate) << '\t' << cell(c.far_tabular) << '\t'
       << cell(c.far_textual) << '\t' << cell(c.precision) << '\n';
  }
  for (const auto& [tag, seconds] : report.timings.entries) {
    os << tag << ": " << detail::fmt_seconds(seconds) << "s\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// SVG comparison charts (grouped bars, one group per class, one series per run)
// ---------------------------------------------------------------------------

namespace detail {

inline const std::vector<std::string>& svg_palette() {
  static const std::vector<std::string> colors = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759",
                                                  "#76b7b2", "#edc948", "#b07aa1", "#9c755f"};
  return colors;
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace detail

/// Grouped bar chart. `values[s][g]` is series s at group g; missing values
/// render as absent bars.
inline std::string svg_grouped_bars(const std::string& title, const std::vector<std::string>& groups,
                                    const std::vector<std::string>& series,
                                    const std::vector<std::vector<std::optional<double>>>& values,
                                    const std::string& unit) {
  const double width = 720, height = 400;
  const double left = 60, right = 20, top = 48, bottom = 64;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double peak = 0.0;
  for (const auto& row : values) {
    for (const auto& v : row) {
      if (v) peak = std::max(peak, *v);
    }
  }
  if (peak <= 0.0) peak = 1.0;

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"16\">"
     << detail::svg_escape(title) << "</text>\n";

  // y axis with 5 gridlines
  for (int g = 0; g <= 5; ++g) {
    const double frac = static_cast<double>(g) / 5.0;
    const double y = top + plot_h * (1.0 - frac);
    os << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << width - right << "\" y2=\"" << y
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << y + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << peak * frac
       << "</text>\n";
  }
  os << "<text x=\"14\" y=\"" << top + plot_h / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 "
     << top + plot_h / 2 << ")\">" << detail::svg_escape(unit) << "</text>\n";

  const double group_w = plot_w / static_cast<double>(groups.size());
  const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(series.size(), 1));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = left + group_w * static_cast<double>(g);
    for (std::size_t s = 0; s < series.size(); ++s) {
      const auto& v = values[s][g];
      if (!v) continue;
      const double h = plot_h * (*v / peak);
      const double x = gx + group_w * 0.1 + bar_w * static_cast<double>(s);
      os << "<rect x=\"" << x << "\" y=\"" << top + plot_h - h << "\" width=\"" << bar_w * 0.92
         << "\" height=\"" << h << "\" fill=\""
         << detail::svg_palette()[s % detail::svg_palette().size()] << "\"><title>"
         << detail::svg_escape(series[s]) << " / " << detail::svg_escape(groups[g]) << ": " << *v
         << "</title></rect>\n";
    }
    os << "<text x=\"" << gx + group_w / 2 << "\" y=\"" << top + plot_h + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
       << detail::svg_escape(groups[g]) << "</text>\n";
  }

  // legend
  double lx = left;
  const double ly = height - 22;
  for (std::size_t s = 0; s < series.size(); ++s) {
    os << "<rect x=\"" << lx << "\" y=\"" << ly - 10 << "\" width=\"12\" height=\"12\" fill=\""
       << detail::svg_palette()[s % detail::svg_palette().size()] << "\"/>\n";
    os << "<text x=\"" << lx + 16 << "\" y=\"" << ly
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << detail::svg_escape(series[s])
       << "</text>\n";
    lx += 24.0 + 7.5 * static_cast<double>(series[s].size());
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace kda
