#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kda/common.hpp"
#include "kda/dataset.hpp"
#include "kda/gda.hpp"
#include "kda/lda.hpp"
#include "kda/mlp.hpp"
#include "kda/tree.hpp"

namespace kda {

/// Atomic file write: the destination either keeps its old content or gets
/// the complete new one (write to a sibling temp file, then rename).
inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Self-describing single-file container: versioned header followed by named
/// typed entries (f64 arrays with dimensions, i64 arrays, strings). Floats
/// are little-endian 64-bit.
class ArrayStore {
 public:
  enum class Kind : std::uint8_t { f64 = 0, i64 = 1, text = 2 };

  struct Entry {
    std::string name;
    Kind kind = Kind::f64;
    std::vector<std::uint64_t> dims;  // f64 only
    std::vector<double> f64;
    std::vector<std::int64_t> i64;
    std::string text;
  };

  void put_matrix(const std::string& name, const Matrix& m) {
    Entry e;
    e.name = name;
    e.kind = Kind::f64;
    e.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    e.f64.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) e.f64.push_back(m(r, c));
    }
    add(std::move(e));
  }

  void put_vector(const std::string& name, const Vector& v) {
    Entry e;
    e.name = name;
    e.kind = Kind::f64;
    e.dims = {static_cast<std::uint64_t>(v.size())};
    e.f64.assign(v.data(), v.data() + v.size());
    add(std::move(e));
  }

  void put_scalar(const std::string& name, double v) {
    Entry e;
    e.name = name;
    e.kind = Kind::f64;
    e.dims = {1};
    e.f64 = {v};
    add(std::move(e));
  }

  void put_ints(const std::string& name, const std::vector<std::int64_t>& v) {
    Entry e;
    e.name = name;
    e.kind = Kind::i64;
    e.i64 = v;
    add(std::move(e));
  }

  void put_int(const std::string& name, std::int64_t v) { put_ints(name, {v}); }

  void put_text(const std::string& name, std::string v) {
    Entry e;
    e.name = name;
    e.kind = Kind::text;
    e.text = std::move(v);
    add(std::move(e));
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Matrix get_matrix(const std::string& name) const {
    const Entry& e = at(name, Kind::f64);
    if (e.dims.size() != 2) throw DataError("container entry '" + name + "' is not a matrix");
    Matrix m(static_cast<Eigen::Index>(e.dims[0]), static_cast<Eigen::Index>(e.dims[1]));
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = e.f64[k++];
    }
    return m;
  }

  Vector get_vector(const std::string& name) const {
    const Entry& e = at(name, Kind::f64);
    if (e.dims.size() != 1) throw DataError("container entry '" + name + "' is not a vector");
    Vector v(static_cast<Eigen::Index>(e.dims[0]));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = e.f64[static_cast<std::size_t>(i)];
    return v;
  }

  double get_scalar(const std::string& name) const {
    const Entry& e = at(name, Kind::f64);
    if (e.f64.size() != 1) throw DataError("container entry '" + name + "' is not a scalar");
    return e.f64[0];
  }

  const std::vector<std::int64_t>& get_ints(const std::string& name) const { return at(name, Kind::i64).i64; }

  std::int64_t get_int(const std::string& name) const {
    const auto& v = get_ints(name);
    if (v.size() != 1) throw DataError("container entry '" + name + "' is not a single integer");
    return v[0];
  }

  const std::string& get_text(const std::string& name) const { return at(name, Kind::text).text; }

  std::string serialize() const {
    std::string out;
    out.append("KDAC", 4);
    append_u32(out, 1);  // version
    append_u64(out, entries_.size());
    for (const Entry& e : entries_) {
      append_u32(out, static_cast<std::uint32_t>(e.name.size()));
      out.append(e.name);
      out.push_back(static_cast<char>(e.kind));
      switch (e.kind) {
        case Kind::f64:
          append_u32(out, static_cast<std::uint32_t>(e.dims.size()));
          for (std::uint64_t d : e.dims) append_u64(out, d);
          append_raw(out, e.f64.data(), e.f64.size() * sizeof(double));
          break;
        case Kind::i64:
          append_u64(out, e.i64.size());
          append_raw(out, e.i64.data(), e.i64.size() * sizeof(std::int64_t));
          break;
        case Kind::text:
          append_u64(out, e.text.size());
          out.append(e.text);
          break;
      }
    }
    return out;
  }

  void save(const std::string& path) const { write_file_atomic(path, serialize()); }

  static ArrayStore deserialize(const std::string& bytes, const std::string& source = "<bytes>") {
    Reader r{bytes, 0, source};
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, "KDAC", 4) != 0) throw DataError(source + ": not a kda container file");
    const std::uint32_t version = r.u32();
    if (version != 1) throw DataError(source + ": unsupported container version " + std::to_string(version));
    const std::uint64_t count = r.u64();
    ArrayStore store;
    for (std::uint64_t i = 0; i < count; ++i) {
      Entry e;
      const std::uint32_t name_len = r.u32();
      e.name.resize(name_len);
      r.raw(e.name.data(), name_len);
      e.kind = static_cast<Kind>(r.u8());
      switch (e.kind) {
        case Kind::f64: {
          const std::uint32_t ndim = r.u32();
          std::uint64_t total = 1;
          for (std::uint32_t d = 0; d < ndim; ++d) {
            e.dims.push_back(r.u64());
            total *= e.dims.back();
          }
          e.f64.resize(total);
          r.raw(e.f64.data(), total * sizeof(double));
          break;
        }
        case Kind::i64: {
          const std::uint64_t n = r.u64();
          e.i64.resize(n);
          r.raw(e.i64.data(), n * sizeof(std::int64_t));
          break;
        }
        case Kind::text: {
          const std::uint64_t n = r.u64();
          e.text.resize(n);
          r.raw(e.text.data(), n);
          break;
        }
        default:
          throw DataError(source + ": unknown entry kind");
      }
      store.add(std::move(e));
    }
    return store;
  }

  static ArrayStore load(const std::string& path) { return deserialize(read_file(path), path); }

 private:
  struct Reader {
    const std::string& bytes;
    std::size_t pos;
    std::string source;

    void raw(void* dst, std::size_t n) {
      if (pos + n > bytes.size()) throw DataError(source + ": truncated container file");
      std::memcpy(dst, bytes.data() + pos, n);
      pos += n;
    }
    std::uint8_t u8() {
      std::uint8_t v;
      raw(&v, 1);
      return v;
    }
    std::uint32_t u32() {
      std::uint32_t v;
      raw(&v, 4);
      return v;
    }
    std::uint64_t u64() {
      std::uint64_t v;
      raw(&v, 8);
      return v;
    }
  };

  void add(Entry e) {
    if (index_.count(e.name)) throw DataError("duplicate container entry '" + e.name + "'");
    index_[e.name] = entries_.size();
    entries_.push_back(std::move(e));
  }

  const Entry& at(const std::string& name, Kind kind) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("container entry '" + name + "' is missing");
    const Entry& e = entries_[it->second];
    if (e.kind != kind) throw DataError("container entry '" + name + "' has the wrong type");
    return e;
  }

  static void append_u32(std::string& out, std::uint32_t v) { append_raw(out, &v, 4); }
  static void append_u64(std::string& out, std::uint64_t v) { append_raw(out, &v, 8); }
  static void append_raw(std::string& out, const void* data, std::size_t n) {
    out.append(static_cast<const char*>(data), n);
  }

  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// column metadata and dataset round-trips
// ---------------------------------------------------------------------------

namespace detail {

inline std::string join_lines(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back('\n');
    out += parts[i];
  }
  return out;
}

inline std::vector<std::string> split_lines(const std::string& text, std::size_t expected) {
  std::vector<std::string> out;
  if (expected == 0) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (out.size() != expected) throw DataError("container column metadata is inconsistent");
  return out;
}

inline void put_columns(ArrayStore& store, const std::vector<EncodedColumnInfo>& columns) {
  std::vector<std::string> names, origins, tokens;
  std::vector<std::int64_t> origin_index, kinds;
  for (const auto& c : columns) {
    names.push_back(c.name);
    origins.push_back(c.origin);
    tokens.push_back(c.token);
    origin_index.push_back(c.origin_index);
    kinds.push_back(c.kind == ColumnKind::discrete ? 1 : 0);
  }
  store.put_int("columns.count", static_cast<std::int64_t>(columns.size()));
  store.put_text("columns.name", join_lines(names));
  store.put_text("columns.origin", join_lines(origins));
  store.put_text("columns.token", join_lines(tokens));
  store.put_ints("columns.origin_index", origin_index);
  store.put_ints("columns.kind", kinds);
}

inline std::vector<EncodedColumnInfo> get_columns(const ArrayStore& store) {
  const std::size_t n = static_cast<std::size_t>(store.get_int("columns.count"));
  const auto names = split_lines(store.get_text("columns.name"), n);
  const auto origins = split_lines(store.get_text("columns.origin"), n);
  const auto tokens = split_lines(store.get_text("columns.token"), n);
  const auto& origin_index = store.get_ints("columns.origin_index");
  const auto& kinds = store.get_ints("columns.kind");
  if (origin_index.size() != n || kinds.size() != n) throw DataError("container column metadata is inconsistent");
  std::vector<EncodedColumnInfo> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].name = names[i];
    out[i].origin = origins[i];
    out[i].token = tokens[i];
    out[i].origin_index = static_cast<int>(origin_index[i]);
    out[i].kind = kinds[i] == 1 ? ColumnKind::discrete : ColumnKind::continuous;
  }
  return out;
}

inline std::vector<std::int64_t> to_i64(const std::vector<long>& v) {
  return std::vector<std::int64_t>(v.begin(), v.end());
}
inline std::vector<std::int64_t> to_i64(const std::vector<int>& v) {
  return std::vector<std::int64_t>(v.begin(), v.end());
}
inline std::vector<long> to_long(const std::vector<std::int64_t>& v) {
  return std::vector<long>(v.begin(), v.end());
}
inline std::vector<int> to_int(const std::vector<std::int64_t>& v) {
  return std::vector<int>(v.begin(), v.end());
}

inline void put_kernel(ArrayStore& store, const KernelSpec& spec) {
  store.put_text("kernel.family", kernel_family_name(spec.family));
  store.put_scalar("kernel.sigma", spec.gaussian_s);
  store.put_int("kernel.degree", spec.poly_degree);
  store.put_scalar("kernel.offset", spec.poly_offset);
}

inline KernelSpec get_kernel(const ArrayStore& store) {
  KernelSpec spec;
  spec.family = parse_kernel_family(store.get_text("kernel.family"));
  spec.gaussian_s = store.get_scalar("kernel.sigma");
  spec.poly_degree = static_cast<int>(store.get_int("kernel.degree"));
  spec.poly_offset = store.get_scalar("kernel.offset");
  return spec;
}

inline void expect_type(const ArrayStore& store, const std::string& type, const std::string& source) {
  if (!store.has("type") || store.get_text("type") != type) {
    throw DataError(source + ": container does not hold a '" + type + "' payload");
  }
}

}  // namespace detail

inline void save_dataset(const NumericDataset& ds, const std::string& path) {
  ArrayStore store;
  store.put_text("type", "dataset");
  store.put_matrix("x", ds.x);
  store.put_ints("labels", detail::to_i64(ds.labels));
  store.put_text("class_names", detail::join_lines(ds.class_names));
  store.put_int("class_count", static_cast<std::int64_t>(ds.class_names.size()));
  store.put_ints("class_sizes", detail::to_i64(ds.class_sizes));
  detail::put_columns(store, ds.columns);
  store.save(path);
}

inline NumericDataset load_dataset(const std::string& path) {
  const ArrayStore store = ArrayStore::load(path);
  detail::expect_type(store, "dataset", path);
  NumericDataset ds;
  ds.x = store.get_matrix("x");
  ds.labels = detail::to_int(store.get_ints("labels"));
  ds.class_names = detail::split_lines(store.get_text("class_names"),
                                       static_cast<std::size_t>(store.get_int("class_count")));
  ds.class_sizes = detail::to_long(store.get_ints("class_sizes"));
  ds.columns = detail::get_columns(store);
  return ds;
}

inline void save_lda_model(const LdaModel& model, const std::string& path) {
  ArrayStore store;
  store.put_text("type", "lda");
  store.put_matrix("projection", model.projection);
  store.put_vector("eigenvalues", model.eigenvalues);
  store.put_vector("global_mean", model.global_mean);
  store.put_matrix("class_means", model.class_means);
  store.put_ints("class_sizes", detail::to_i64(model.class_sizes));
  store.put_scalar("ridge", model.ridge);
  detail::put_columns(store, model.columns);
  store.save(path);
}

inline LdaModel load_lda_model(const std::string& path) {
  const ArrayStore store = ArrayStore::load(path);
  detail::expect_type(store, "lda", path);
  LdaModel model;
  model.projection = store.get_matrix("projection");
  model.eigenvalues = store.get_vector("eigenvalues");
  model.global_mean = store.get_vector("global_mean");
  model.class_means = store.get_matrix("class_means");
  model.class_sizes = detail::to_long(store.get_ints("class_sizes"));
  model.ridge = store.get_scalar("ridge");
  model.columns = detail::get_columns(store);
  return model;
}

inline void save_gda_model(const GdaModel& model, const std::string& path) {
  ArrayStore store;
  store.put_text("type", "gda");
  store.put_matrix("basis", model.basis);
  store.put_ints("basis_labels", detail::to_i64(model.basis_labels));
  store.put_ints("class_sizes", detail::to_i64(model.class_sizes));
  detail::put_kernel(store, model.kernel);
  store.put_matrix("alphas", model.alphas);
  store.put_vector("eigenvalues", model.eigenvalues);
  store.put_vector("centering.col_means", model.centering.col_means);
  store.put_scalar("centering.grand_mean", model.centering.grand_mean);
  store.put_ints("permutation", detail::to_i64(model.permutation));
  store.put_scalar("ridge", model.ridge);
  store.put_scalar("rank_tol", model.rank_tol);
  detail::put_columns(store, model.columns);
  store.save(path);
}

inline GdaModel load_gda_model(const std::string& path) {
  const ArrayStore store = ArrayStore::load(path);
  detail::expect_type(store, "gda", path);
  GdaModel model;
  model.basis = store.get_matrix("basis");
  model.basis_labels = detail::to_int(store.get_ints("basis_labels"));
  model.class_sizes = detail::to_long(store.get_ints("class_sizes"));
  model.kernel = detail::get_kernel(store);
  model.alphas = store.get_matrix("alphas");
  model.eigenvalues = store.get_vector("eigenvalues");
  model.centering.col_means = store.get_vector("centering.col_means");
  model.centering.grand_mean = store.get_scalar("centering.grand_mean");
  model.permutation = detail::to_long(store.get_ints("permutation"));
  model.ridge = store.get_scalar("ridge");
  model.rank_tol = store.get_scalar("rank_tol");
  model.columns = detail::get_columns(store);
  return model;
}

inline void save_tree_model(const TreeModel& model, const std::string& path) {
  ArrayStore store;
  store.put_text("type", "tree");
  store.put_int("n_classes", model.n_classes);
  store.put_int("n_features", model.n_features);
  store.put_int("config.min_leaf", model.config.min_leaf);
  store.put_int("config.max_depth", model.config.max_depth);
  store.put_scalar("config.min_gain", model.config.min_gain);

  const std::size_t n = model.nodes.size();
  std::vector<std::int64_t> kind(n), label(n), column(n), left(n), right(n), majority(n);
  std::vector<std::int64_t> distribution, member_offsets, members, children;
  Vector thresholds(static_cast<Eigen::Index>(n));
  member_offsets.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    const TreeNode& node = model.nodes[i];
    kind[i] = static_cast<std::int64_t>(node.kind);
    label[i] = node.label;
    column[i] = node.column;
    left[i] = node.left;
    right[i] = node.right;
    majority[i] = node.majority_child;
    thresholds(static_cast<Eigen::Index>(i)) = node.threshold;
    for (long dcount : node.distribution) distribution.push_back(dcount);
    for (long mcol : node.member_columns) members.push_back(mcol);
    for (long ch : node.children) children.push_back(ch);
    member_offsets.push_back(static_cast<std::int64_t>(members.size()));
  }
  store.put_ints("nodes.kind", kind);
  store.put_ints("nodes.label", label);
  store.put_ints("nodes.column", column);
  store.put_ints("nodes.left", left);
  store.put_ints("nodes.right", right);
  store.put_ints("nodes.majority_child", majority);
  store.put_vector("nodes.threshold", thresholds);
  store.put_ints("nodes.distribution", distribution);
  store.put_ints("nodes.member_offsets", member_offsets);
  store.put_ints("nodes.member_columns", members);
  store.put_ints("nodes.children", children);
  store.save(path);
}

inline TreeModel load_tree_model(const std::string& path) {
  const ArrayStore store = ArrayStore::load(path);
  detail::expect_type(store, "tree", path);
  TreeModel model;
  model.n_classes = static_cast<int>(store.get_int("n_classes"));
  model.n_features = store.get_int("n_features");
  model.config.min_leaf = store.get_int("config.min_leaf");
  model.config.max_depth = static_cast<int>(store.get_int("config.max_depth"));
  model.config.min_gain = store.get_scalar("config.min_gain");

  const auto& kind = store.get_ints("nodes.kind");
  const auto& label = store.get_ints("nodes.label");
  const auto& column = store.get_ints("nodes.column");
  const auto& left = store.get_ints("nodes.left");
  const auto& right = store.get_ints("nodes.right");
  const auto& majority = store.get_ints("nodes.majority_child");
  const Vector thresholds = store.get_vector("nodes.threshold");
  const auto& distribution = store.get_ints("nodes.distribution");
  const auto& member_offsets = store.get_ints("nodes.member_offsets");
  const auto& members = store.get_ints("nodes.member_columns");
  const auto& children = store.get_ints("nodes.children");

  const std::size_t n = kind.size();
  if (distribution.size() != n * static_cast<std::size_t>(model.n_classes) || member_offsets.size() != n + 1) {
    throw DataError(path + ": inconsistent tree payload");
  }
  model.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    TreeNode& node = model.nodes[i];
    node.kind = static_cast<TreeNode::Kind>(kind[i]);
    node.label = static_cast<int>(label[i]);
    node.column = column[i];
    node.left = left[i];
    node.right = right[i];
    node.majority_child = majority[i];
    node.threshold = thresholds(static_cast<Eigen::Index>(i));
    node.distribution.assign(distribution.begin() + static_cast<long>(i) * model.n_classes,
                             distribution.begin() + static_cast<long>(i + 1) * model.n_classes);
    for (std::int64_t k = member_offsets[i]; k < member_offsets[i + 1]; ++k) {
      node.member_columns.push_back(members[static_cast<std::size_t>(k)]);
      node.children.push_back(children[static_cast<std::size_t>(k)]);
    }
  }
  return model;
}

inline void save_mlp_model(const MlpModel& model, const std::string& path) {
  ArrayStore store;
  store.put_text("type", "mlp");
  store.put_matrix("w1", model.w1);
  store.put_vector("b1", model.b1);
  store.put_matrix("w2", model.w2);
  store.put_vector("b2", model.b2);
  store.put_int("config.hidden", model.config.hidden);
  store.put_int("config.epochs", model.config.epochs);
  store.put_scalar("config.rate", model.config.rate);
  store.put_int("config.batch", model.config.batch);
  store.put_int("config.seed", static_cast<std::int64_t>(model.config.seed));
  store.put_int("config.zero_init", model.config.zero_init ? 1 : 0);
  store.save(path);
}

inline MlpModel load_mlp_model(const std::string& path) {
  const ArrayStore store = ArrayStore::load(path);
  detail::expect_type(store, "mlp", path);
  MlpModel model;
  model.w1 = store.get_matrix("w1");
  model.b1 = store.get_vector("b1");
  model.w2 = store.get_matrix("w2");
  model.b2 = store.get_vector("b2");
  model.config.hidden = static_cast<int>(store.get_int("config.hidden"));
  model.config.epochs = static_cast<int>(store.get_int("config.epochs"));
  model.config.rate = store.get_scalar("config.rate");
  model.config.batch = store.get_int("config.batch");
  model.config.seed = static_cast<std::uint64_t>(store.get_int("config.seed"));
  model.config.zero_init = store.get_int("config.zero_init") != 0;
  return model;
}

}  // namespace kda
