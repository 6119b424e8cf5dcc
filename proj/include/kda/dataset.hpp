#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kda/common.hpp"
#include "kda/eigencore.hpp"

namespace kda {

enum class ColumnKind { continuous, discrete };

struct SchemaColumn {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
};

using Schema = std::vector<SchemaColumn>;

// ---------------------------------------------------------------------------
// raw connection records
// ---------------------------------------------------------------------------

// Column-major storage: continuous columns hold parsed doubles, discrete
// columns hold codes into a per-column token table interned in
// first-occurrence order.
struct RawColumn {
  SchemaColumn decl;
  std::vector<double> numeric;
  std::vector<std::int32_t> codes;
  std::vector<std::string> tokens;
};

struct RawDataset {
  std::vector<RawColumn> columns;
  std::vector<std::string> labels;
  std::string source;
  std::size_t line_count = 0;

  std::size_t rows() const { return labels.size(); }

  Schema schema() const {
    Schema s;
    s.reserve(columns.size());
    for (const auto& c : columns) s.push_back(c.decl);
    return s;
  }
};

struct ParseOptions {
  bool has_header = false;
  std::string source_name = "<stream>";
};

namespace detail {

inline void split_fields(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline double parse_continuous(std::string_view field, std::size_t line_no, const std::string& source,
                               const std::string& column) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw DataError(source + ":" + std::to_string(line_no) + ": cannot parse '" + std::string(field) +
                    "' as a finite number for column '" + column + "'");
  }
  return value;
}

}  // namespace detail

/// Parse comma-separated connection records: one record per non-empty line,
/// schema.size() feature fields followed by a label field whose optional
/// trailing period is stripped.
inline RawDataset parse_kdd_csv(std::istream& in, const Schema& schema, const ParseOptions& opts = {}) {
  if (schema.empty()) throw ConfigError("parse_kdd_csv: empty schema");
  RawDataset ds;
  ds.source = opts.source_name;
  ds.columns.resize(schema.size());
  std::vector<std::unordered_map<std::string, std::int32_t>> token_index(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) ds.columns[c].decl = schema[c];

  std::string line;
  std::vector<std::string_view> fields;
  std::size_t line_no = 0;
  bool header_pending = opts.has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    detail::split_fields(line, fields);
    if (fields.size() != schema.size() + 1) {
      throw DataError(ds.source + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(schema.size() + 1) + " fields, got " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < schema.size(); ++c) {
      RawColumn& col = ds.columns[c];
      if (schema[c].kind == ColumnKind::continuous) {
        col.numeric.push_back(detail::parse_continuous(fields[c], line_no, ds.source, schema[c].name));
      } else {
        std::string token(fields[c]);
        auto [it, inserted] = token_index[c].emplace(token, static_cast<std::int32_t>(col.tokens.size()));
        if (inserted) col.tokens.push_back(std::move(token));
        col.codes.push_back(it->second);
      }
    }
    std::string_view label = fields.back();
    if (!label.empty() && label.back() == '.') label.remove_suffix(1);
    ds.labels.emplace_back(label);
  }
  ds.line_count = line_no;
  if (ds.rows() == 0) throw DataError(ds.source + ": no records found");
  return ds;
}

inline RawDataset parse_kdd_file(const std::string& path, const Schema& schema, bool has_header = false) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file: " + path);
  ParseOptions opts;
  opts.has_header = has_header;
  opts.source_name = path;
  return parse_kdd_csv(in, schema, opts);
}

/// Schema file: ordered `name,kind` lines with kind in {continuous, discrete}.
inline Schema parse_schema(std::istream& in, const std::string& source = "<schema>") {
  Schema schema;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'name,kind'");
    }
    SchemaColumn col;
    col.name = line.substr(0, comma);
    const std::string kind = line.substr(comma + 1);
    if (kind == "continuous") {
      col.kind = ColumnKind::continuous;
    } else if (kind == "discrete") {
      col.kind = ColumnKind::discrete;
    } else {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": unknown column kind '" + kind + "'");
    }
    schema.push_back(std::move(col));
  }
  if (schema.empty()) throw ConfigError(source + ": empty schema");
  return schema;
}

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file: " + path);
  return parse_schema(in, path);
}

// ---------------------------------------------------------------------------
// label categories
// ---------------------------------------------------------------------------

inline constexpr int kCategoryCount = 5;

inline const std::array<std::string, kCategoryCount>& category_names() {
  static const std::array<std::string, kCategoryCount> names = {"Normal", "DOS", "R2L", "U2R", "Probe"};
  return names;
}

inline int category_id(const std::string& name) {
  const auto& names = category_names();
  for (int i = 0; i < kCategoryCount; ++i) {
    if (names[i] == name) return i;
  }
  throw ConfigError("unknown category '" + name + "' (expected Normal, DOS, R2L, U2R or Probe)");
}

struct LabelMap {
  enum class UnknownPolicy { error, assign };

  std::unordered_map<std::string, int> entries;  // attack name -> category id
  UnknownPolicy policy = UnknownPolicy::error;
  int fallback_category = 0;

  void validate() const {
    auto it = entries.find("normal");
    if (it == entries.end() || it->second != 0) {
      throw ConfigError("label map must map 'normal' to Normal");
    }
  }

  /// `attack_name,category` lines; blank lines and '#' comments ignored.
  static LabelMap parse(std::istream& in, const std::string& source = "<labelmap>") {
    LabelMap map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const std::size_t comma = line.find(',');
      if (comma == std::string::npos) {
        throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'attack_name,category'");
      }
      map.entries[line.substr(0, comma)] = category_id(line.substr(comma + 1));
    }
    map.validate();
    return map;
  }

  static LabelMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open label map file: " + path);
    return parse(in, path);
  }
};

struct LabelingResult {
  std::vector<int> ids;                          // per row, category ids 0..4
  std::array<long, kCategoryCount> histogram{};  // rows per category
};

inline LabelingResult map_labels(const RawDataset& ds, const LabelMap& map) {
  map.validate();
  LabelingResult out;
  out.ids.reserve(ds.rows());
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    const std::string& label = ds.labels[r];
    int id;
    auto it = map.entries.find(label);
    if (it != map.entries.end()) {
      id = it->second;
    } else if (map.policy == LabelMap::UnknownPolicy::assign) {
      id = map.fallback_category;
    } else {
      throw DataError("unknown attack name '" + label + "' at record " + std::to_string(r + 1));
    }
    out.ids.push_back(id);
    ++out.histogram[static_cast<std::size_t>(id)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// encoding
// ---------------------------------------------------------------------------

struct EncodedColumnInfo {
  std::string name;    // "duration" or "service=http"
  std::string origin;  // schema column name
  int origin_index = 0;
  ColumnKind kind = ColumnKind::continuous;
  std::string token;  // one-hot member token, empty for continuous columns
};

struct NumericDataset {
  Matrix x;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::vector<long> class_sizes;
  std::vector<EncodedColumnInfo> columns;

  long rows() const { return static_cast<long>(x.rows()); }
  long dims() const { return static_cast<long>(x.cols()); }
  int classes() const { return static_cast<int>(class_names.size()); }

  std::vector<std::string> feature_names() const {
    std::vector<std::string> names;
    names.reserve(columns.size());
    for (const auto& c : columns) names.push_back(c.name);
    return names;
  }

  void recount_classes() {
    class_sizes.assign(class_names.size(), 0);
    for (int id : labels) {
      if (id < 0 || id >= classes()) throw DataError("class id out of range: " + std::to_string(id));
      ++class_sizes[static_cast<std::size_t>(id)];
    }
  }
};

/// Per-column encoding statistics frozen at fit time: discrete vocabularies in
/// first-occurrence order, continuous mean / population standard deviation,
/// and the zero-variance column set.
class Encoder {
 public:
  struct ColumnStats {
    SchemaColumn decl;
    std::vector<std::string> vocab;
    std::unordered_map<std::string, int> vocab_index;
    double mean = 0.0;
    double stddev = 0.0;
    bool zero_variance = false;
  };

  static Encoder fit(const RawDataset& ds) {
    if (ds.rows() == 0) throw DataError("fit_encoder: empty dataset");
    Encoder enc;
    enc.cols_.resize(ds.columns.size());
    const double m = static_cast<double>(ds.rows());
    for (std::size_t c = 0; c < ds.columns.size(); ++c) {
      ColumnStats& st = enc.cols_[c];
      const RawColumn& col = ds.columns[c];
      st.decl = col.decl;
      if (col.decl.kind == ColumnKind::discrete) {
        st.vocab = col.tokens;  // interned in first-occurrence order
        for (std::size_t i = 0; i < st.vocab.size(); ++i) {
          st.vocab_index[st.vocab[i]] = static_cast<int>(i);
        }
      } else {
        double sum = 0.0;
        for (double v : col.numeric) sum += v;
        st.mean = sum / m;
        double ss = 0.0;
        for (double v : col.numeric) ss += (v - st.mean) * (v - st.mean);
        st.stddev = std::sqrt(ss / m);  // population convention
        st.zero_variance = st.stddev <= 1e-12 * std::max(1.0, std::abs(st.mean));
        if (st.zero_variance) st.stddev = 0.0;
      }
    }
    return enc;
  }

  const std::vector<ColumnStats>& columns() const { return cols_; }

  long encoded_width() const {
    long d = 0;
    for (const auto& st : cols_) {
      d += (st.decl.kind == ColumnKind::discrete) ? static_cast<long>(st.vocab.size()) : 1;
    }
    return d;
  }

  /// One-hot expand discrete columns (unseen tokens become an all-zero block)
  /// and standardize continuous ones; zero-variance columns map to constant 0.
  NumericDataset encode(const RawDataset& ds, const std::vector<int>& labels,
                        const std::vector<std::string>& class_names) const {
    if (ds.columns.size() != cols_.size()) {
      throw DataError("encode: dataset has " + std::to_string(ds.columns.size()) + " columns, encoder has " +
                      std::to_string(cols_.size()));
    }
    for (std::size_t c = 0; c < cols_.size(); ++c) {
      if (ds.columns[c].decl.name != cols_[c].decl.name || ds.columns[c].decl.kind != cols_[c].decl.kind) {
        throw DataError("encode: column " + std::to_string(c) + " ('" + ds.columns[c].decl.name +
                        "') does not match the fitted schema ('" + cols_[c].decl.name + "')");
      }
    }
    if (labels.size() != ds.rows()) throw DataError("encode: label count does not match row count");

    NumericDataset out;
    out.class_names = class_names;
    out.labels = labels;
    out.x.setZero(static_cast<Eigen::Index>(ds.rows()), encoded_width());

    long base = 0;
    for (std::size_t c = 0; c < cols_.size(); ++c) {
      const ColumnStats& st = cols_[c];
      const RawColumn& col = ds.columns[c];
      if (st.decl.kind == ColumnKind::discrete) {
        // translate this dataset's token codes into the fitted vocabulary
        std::vector<int> code_map(col.tokens.size(), -1);
        for (std::size_t t = 0; t < col.tokens.size(); ++t) {
          auto it = st.vocab_index.find(col.tokens[t]);
          if (it != st.vocab_index.end()) code_map[t] = it->second;
        }
        for (std::size_t r = 0; r < ds.rows(); ++r) {
          const int enc = code_map[static_cast<std::size_t>(col.codes[r])];
          if (enc >= 0) out.x(static_cast<Eigen::Index>(r), base + enc) = 1.0;
        }
        for (std::size_t v = 0; v < st.vocab.size(); ++v) {
          EncodedColumnInfo info;
          info.name = st.decl.name + "=" + st.vocab[v];
          info.origin = st.decl.name;
          info.origin_index = static_cast<int>(c);
          info.kind = ColumnKind::discrete;
          info.token = st.vocab[v];
          out.columns.push_back(std::move(info));
        }
        base += static_cast<long>(st.vocab.size());
      } else {
        if (!st.zero_variance) {
          for (std::size_t r = 0; r < ds.rows(); ++r) {
            out.x(static_cast<Eigen::Index>(r), base) = (col.numeric[r] - st.mean) / st.stddev;
          }
        }
        EncodedColumnInfo info;
        info.name = st.decl.name;
        info.origin = st.decl.name;
        info.origin_index = static_cast<int>(c);
        info.kind = ColumnKind::continuous;
        out.columns.push_back(std::move(info));
        base += 1;
      }
    }
    out.recount_classes();
    return out;
  }

 private:
  std::vector<ColumnStats> cols_;
};

inline Encoder fit_encoder(const RawDataset& ds) { return Encoder::fit(ds); }

// ---------------------------------------------------------------------------
// subsampling and feature selection
// ---------------------------------------------------------------------------

/// Per-class sample counts for a stratified subsample. Proportional to class
/// size with largest-remainder rounding, floored at min(min_per_class, M_c);
/// a class whose floor would leave fewer than min_per_class rows behind is
/// kept whole (subsampling it buys nothing and the rarest classes carry the
/// discriminant signal).
inline std::vector<long> stratified_allocation(const std::vector<long>& class_sizes, long budget,
                                               long min_per_class) {
  const long c_count = static_cast<long>(class_sizes.size());
  long total = 0;
  for (long s : class_sizes) {
    if (s < 0) throw DataError("stratified_allocation: negative class size");
    total += s;
  }
  if (budget <= 0 || min_per_class <= 0) {
    throw DataError("stratified_allocation: budget and min_per_class must be positive");
  }
  if (budget < c_count * min_per_class) {
    throw DataError("stratified_allocation: budget " + std::to_string(budget) + " is below classes*min = " +
                    std::to_string(c_count * min_per_class));
  }
  if (budget >= total) return class_sizes;

  // largest-remainder rounding of budget * M_c / M, ties broken by class id
  std::vector<long> rounded(class_sizes.size(), 0);
  std::vector<std::pair<long, std::size_t>> remainders;
  long assigned = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    const long numer = budget * class_sizes[c];
    rounded[c] = numer / total;
    remainders.emplace_back(-(numer % total), c);
    assigned += rounded[c];
  }
  std::sort(remainders.begin(), remainders.end());
  for (long k = 0; k < budget - assigned; ++k) {
    ++rounded[remainders[static_cast<std::size_t>(k)].second];
  }

  std::vector<long> alloc(class_sizes.size(), 0);
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    const long size = class_sizes[c];
    const long floor_c = std::min(min_per_class, size);
    if (size - floor_c < min_per_class) {
      alloc[c] = size;  // keep whole
    } else {
      alloc[c] = std::clamp(rounded[c], min_per_class, size);
    }
  }
  return alloc;
}

/// Deterministic class-proportional subsample; the full dataset comes back
/// order-preserved when the budget covers it.
inline NumericDataset stratified_sample(const NumericDataset& ds, long budget, long min_per_class,
                                        std::uint64_t seed) {
  const std::vector<long> alloc = stratified_allocation(ds.class_sizes, budget, min_per_class);
  if (budget >= ds.rows()) return ds;

  std::vector<std::vector<long>> by_class(ds.class_names.size());
  for (long r = 0; r < ds.rows(); ++r) {
    by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(r)])].push_back(r);
  }

  Rng rng(seed);
  std::vector<char> selected(static_cast<std::size_t>(ds.rows()), 0);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& rows = by_class[c];
    const long take = alloc[c];
    // partial Fisher-Yates: the first `take` entries become the sample
    for (long i = 0; i < take; ++i) {
      const std::size_t j = static_cast<std::size_t>(i) +
                            static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(rows.size() - static_cast<std::size_t>(i))));
      std::swap(rows[static_cast<std::size_t>(i)], rows[j]);
    }
    for (long i = 0; i < take; ++i) selected[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])] = 1;
  }

  NumericDataset out;
  out.class_names = ds.class_names;
  out.columns = ds.columns;
  long kept = 0;
  for (char s : selected) kept += s;
  out.x.resize(kept, ds.x.cols());
  out.labels.reserve(static_cast<std::size_t>(kept));
  long w = 0;
  for (long r = 0; r < ds.rows(); ++r) {
    if (!selected[static_cast<std::size_t>(r)]) continue;
    out.x.row(w++) = ds.x.row(r);
    out.labels.push_back(ds.labels[static_cast<std::size_t>(r)]);
  }
  out.recount_classes();
  return out;
}

/// Column subset by origin feature name; a discrete name selects its whole
/// one-hot block. Labels and class bookkeeping are unchanged.
inline NumericDataset select_features(const NumericDataset& ds, const std::vector<std::string>& names) {
  std::vector<long> chosen;
  for (const auto& name : names) {
    bool found = false;
    for (long j = 0; j < ds.dims(); ++j) {
      if (ds.columns[static_cast<std::size_t>(j)].origin == name) {
        chosen.push_back(j);
        found = true;
      }
    }
    if (!found) throw DataError("select_features: unknown feature name '" + name + "'");
  }
  NumericDataset out;
  out.labels = ds.labels;
  out.class_names = ds.class_names;
  out.class_sizes = ds.class_sizes;
  out.x.resize(ds.x.rows(), static_cast<Eigen::Index>(chosen.size()));
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    out.x.col(static_cast<Eigen::Index>(k)) = ds.x.col(chosen[k]);
    out.columns.push_back(ds.columns[static_cast<std::size_t>(chosen[k])]);
  }
  return out;
}

inline NumericDataset select_features(const NumericDataset& ds, const std::vector<int>& origin_indices) {
  std::vector<std::string> names;
  for (int idx : origin_indices) {
    bool found = false;
    for (const auto& col : ds.columns) {
      if (col.origin_index == idx) {
        names.push_back(col.origin);
        found = true;
        break;
      }
    }
    if (!found) throw DataError("select_features: no columns originate from index " + std::to_string(idx));
  }
  return select_features(ds, names);
}

}  // namespace kda
