#pragma once

#include <chrono>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kda/common.hpp"

namespace kda {

/// C x C count table, stored actual-row / predicted-column (the layout the
/// published tables use); rendering can transpose.
struct ConfusionMatrix {
  std::vector<std::vector<long>> counts;
  std::vector<std::string> class_names;

  int classes() const { return static_cast<int>(class_names.size()); }

  long at(int actual, int predicted) const {
    return counts[static_cast<std::size_t>(actual)][static_cast<std::size_t>(predicted)];
  }

  long row_sum(int actual) const {
    long s = 0;
    for (long v : counts[static_cast<std::size_t>(actual)]) s += v;
    return s;
  }

  long col_sum(int predicted) const {
    long s = 0;
    for (const auto& row : counts) s += row[static_cast<std::size_t>(predicted)];
    return s;
  }

  long total() const {
    long s = 0;
    for (int a = 0; a < classes(); ++a) s += row_sum(a);
    return s;
  }
};

inline ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted,
                                        const std::vector<std::string>& class_names) {
  if (truth.size() != predicted.size()) {
    throw DataError("confusion_matrix: truth and prediction lengths differ");
  }
  const int c = static_cast<int>(class_names.size());
  ConfusionMatrix cm;
  cm.class_names = class_names;
  cm.counts.assign(static_cast<std::size_t>(c), std::vector<long>(static_cast<std::size_t>(c), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= c || predicted[i] < 0 || predicted[i] >= c) {
      throw DataError("confusion_matrix: class id out of range at sample " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return cm;
}

/// Build a matrix directly from counts (reference-table fixtures).
inline ConfusionMatrix confusion_from_counts(std::vector<std::vector<long>> counts,
                                             std::vector<std::string> class_names) {
  ConfusionMatrix cm;
  cm.counts = std::move(counts);
  cm.class_names = std::move(class_names);
  for (const auto& row : cm.counts) {
    if (row.size() != cm.class_names.size()) throw DataError("confusion_from_counts: ragged counts");
    for (long v : row) {
      if (v < 0) throw DataError("confusion_from_counts: negative count");
    }
  }
  if (cm.counts.size() != cm.class_names.size()) throw DataError("confusion_from_counts: ragged counts");
  return cm;
}

struct OneVsRest {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline OneVsRest one_vs_rest(const ConfusionMatrix& cm, int c) {
  OneVsRest o;
  o.tp = cm.at(c, c);
  o.fn = cm.row_sum(c) - o.tp;
  o.fp = cm.col_sum(c) - o.tp;
  o.tn = cm.total() - o.tp - o.fn - o.fp;
  return o;
}

/// DR = TP / (TP + FN) * 100: the fraction of class-c samples recovered,
/// identical to the row percent.
inline double detection_rate(const ConfusionMatrix& cm, int c) {
  const long support = cm.row_sum(c);
  if (support == 0) throw DataError("detection_rate: class '" + cm.class_names[static_cast<std::size_t>(c)] +
                                    "' has no samples");
  return 100.0 * static_cast<double>(cm.at(c, c)) / static_cast<double>(support);
}

/// FAR as the running text defines it: FP / (FP + TN) * 100, one-vs-rest.
inline double far_textual(const ConfusionMatrix& cm, int c) {
  const OneVsRest o = one_vs_rest(cm, c);
  if (o.fp + o.tn == 0) {
    throw DataError("far_textual: FP + TN is zero for class '" +
                    cm.class_names[static_cast<std::size_t>(c)] + "'");
  }
  return 100.0 * static_cast<double>(o.fp) / static_cast<double>(o.fp + o.tn);
}

/// FAR as the published summary tables actually contain it: 100 - precision,
/// i.e. the share of predictions for class c that were wrong.
inline double far_tabular(const ConfusionMatrix& cm, int c) {
  const long predicted = cm.col_sum(c);
  if (predicted == 0) {
    throw DataError("far_tabular: class '" + cm.class_names[static_cast<std::size_t>(c)] +
                    "' was never predicted");
  }
  return 100.0 * static_cast<double>(predicted - cm.at(c, c)) / static_cast<double>(predicted);
}

inline double precision_percent(const ConfusionMatrix& cm, int c) { return 100.0 - far_tabular(cm, c); }

/// The "% Correct" margins of the published matrices: diagonal over row sum
/// and diagonal over column sum. Empty sums are absent, not zero.
struct TablePercentages {
  std::vector<std::optional<double>> row;
  std::vector<std::optional<double>> col;
};

inline TablePercentages table_percentages(const ConfusionMatrix& cm) {
  TablePercentages out;
  for (int c = 0; c < cm.classes(); ++c) {
    const long rs = cm.row_sum(c);
    const long cs = cm.col_sum(c);
    out.row.push_back(rs == 0 ? std::nullopt
                              : std::optional<double>(100.0 * static_cast<double>(cm.at(c, c)) /
                                                      static_cast<double>(rs)));
    out.col.push_back(cs == 0 ? std::nullopt
                              : std::optional<double>(100.0 * static_cast<double>(cm.at(c, c)) /
                                                      static_cast<double>(cs)));
  }
  return out;
}

/// Per-class one-vs-rest tabulation plus the derived rates. Rates that have
/// no defined value (zero support, never-predicted class) stay empty.
struct ClassReport {
  std::string name;
  long tp = 0, fp = 0, fn = 0, tn = 0;
  long support = 0;
  std::optional<double> detection_rate;
  std::optional<double> far_textual;
  std::optional<double> far_tabular;
  std::optional<double> precision;
};

inline std::vector<ClassReport> class_reports(const ConfusionMatrix& cm) {
  std::vector<ClassReport> out;
  for (int c = 0; c < cm.classes(); ++c) {
    ClassReport rep;
    rep.name = cm.class_names[static_cast<std::size_t>(c)];
    const OneVsRest o = one_vs_rest(cm, c);
    rep.tp = o.tp;
    rep.fp = o.fp;
    rep.fn = o.fn;
    rep.tn = o.tn;
    rep.support = cm.row_sum(c);
    if (rep.support > 0) rep.detection_rate = detection_rate(cm, c);
    if (o.fp + o.tn > 0) rep.far_textual = far_textual(cm, c);
    if (cm.col_sum(c) > 0) {
      rep.far_tabular = far_tabular(cm, c);
      rep.precision = precision_percent(cm, c);
    }
    out.push_back(std::move(rep));
  }
  return out;
}

inline double accuracy_percent(const ConfusionMatrix& cm) {
  long diag = 0;
  for (int c = 0; c < cm.classes(); ++c) diag += cm.at(c, c);
  const long total = cm.total();
  if (total == 0) throw DataError("accuracy_percent: empty matrix");
  return 100.0 * static_cast<double>(diag) / static_cast<double>(total);
}

/// Plain-text rendering; `predicted_rows` transposes into the
/// predicted-row/actual-column orientation. Percents rounded to 2 decimals at
/// render time only.
inline std::string render_confusion(const ConfusionMatrix& cm, bool predicted_rows = false) {
  const TablePercentages pct = table_percentages(cm);
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  const auto& names = cm.class_names;
  os << (predicted_rows ? "predicted\\actual" : "actual\\predicted");
  for (const auto& n : names) os << '\t' << n;
  os << "\t% Correct\n";
  for (int i = 0; i < cm.classes(); ++i) {
    os << names[static_cast<std::size_t>(i)];
    for (int j = 0; j < cm.classes(); ++j) {
      os << '\t' << (predicted_rows ? cm.at(j, i) : cm.at(i, j));
    }
    const auto& margin = predicted_rows ? pct.col[static_cast<std::size_t>(i)]
                                        : pct.row[static_cast<std::size_t>(i)];
    if (margin) {
      os << '\t' << *margin;
    } else {
      os << "\t-";
    }
    os << '\n';
  }
  os << "% Correct";
  for (int j = 0; j < cm.classes(); ++j) {
    const auto& margin = predicted_rows ? pct.row[static_cast<std::size_t>(j)]
                                        : pct.col[static_cast<std::size_t>(j)];
    if (margin) {
      os << '\t' << *margin;
    } else {
      os << "\t-";
    }
  }
  os << '\n';
  return os.str();
}

/// Ordered (tag, seconds) pairs collected while running a pipeline.
struct Timings {
  std::vector<std::pair<std::string, double>> entries;

  void add(const std::string& tag, double seconds) { entries.emplace_back(tag, seconds); }

  std::optional<double> find(const std::string& tag) const {
    for (const auto& [t, s] : entries) {
      if (t == tag) return s;
    }
    return std::nullopt;
  }
};

/// Run a thunk under the monotonic clock; returns its result and the elapsed
/// wall-clock seconds.
template <class F>
auto timed(const std::string& tag, F&& fn) -> std::pair<decltype(fn()), double> {
  (void)tag;
  const auto start = std::chrono::steady_clock::now();
  auto result = fn();
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  return {std::move(result), elapsed.count()};
}

template <class F>
auto timed_into(Timings& timings, const std::string& tag, F&& fn) {
  auto [result, seconds] = timed(tag, std::forward<F>(fn));
  timings.add(tag, seconds);
  return result;
}

}  // namespace kda
