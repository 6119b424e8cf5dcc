#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "kda/dataset.hpp"

namespace kda {

/// Shannon entropy of a count vector, in bits, with 0*log0 = 0.
inline double entropy(const std::vector<long>& class_counts) {
  long total = 0;
  for (long c : class_counts) {
    if (c < 0) throw DataError("entropy: negative count");
    total += c;
  }
  if (total == 0) throw DataError("entropy: all counts are zero");
  double h = 0.0;
  for (long c : class_counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

/// C4.5 split criterion: information gain divided by the entropy of the child
/// sizes. Children must partition the parent exactly. A split with zero split
/// information (all rows in one child) scores 0.
inline double gain_ratio(const std::vector<long>& parent_counts,
                         const std::vector<std::vector<long>>& children_counts) {
  std::vector<long> recombined(parent_counts.size(), 0);
  std::vector<long> child_sizes;
  child_sizes.reserve(children_counts.size());
  for (const auto& child : children_counts) {
    if (child.size() != parent_counts.size()) {
      throw DataError("gain_ratio: child class-count length mismatch");
    }
    long size = 0;
    for (std::size_t k = 0; k < child.size(); ++k) {
      recombined[k] += child[k];
      size += child[k];
    }
    child_sizes.push_back(size);
  }
  if (recombined != parent_counts) throw DataError("gain_ratio: children do not partition the parent");

  long total = 0;
  for (long s : child_sizes) total += s;
  double split_info = 0.0;
  double weighted = 0.0;
  for (std::size_t k = 0; k < children_counts.size(); ++k) {
    if (child_sizes[k] == 0) continue;
    const double w = static_cast<double>(child_sizes[k]) / static_cast<double>(total);
    split_info -= w * std::log2(w);
    weighted += w * entropy(children_counts[k]);
  }
  if (split_info == 0.0) return 0.0;
  return (entropy(parent_counts) - weighted) / split_info;
}

struct TreeConfig {
  long min_leaf = 2;
  int max_depth = 30;
  double min_gain = 1e-6;
};

struct TreeNode {
  enum class Kind { leaf, continuous_split, group_split };
  Kind kind = Kind::leaf;

  // leaf
  int label = 0;
  std::vector<long> distribution;  // training counts routed here

  // continuous split: rows with x[column] <= threshold go left
  long column = -1;
  double threshold = 0.0;
  long left = -1;
  long right = -1;

  // group split over a one-hot block: one branch per member column
  std::vector<long> member_columns;
  std::vector<long> children;
  long majority_child = -1;  // fallback when the whole block is zero
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // node 0 is the root
  TreeConfig config;
  int n_classes = 0;
  long n_features = 0;
};

namespace detail {

// split candidates in deterministic order: by the first encoded column index
struct SplitCandidate {
  bool is_group = false;
  long column = -1;                  // continuous column, or first column of the block
  std::vector<long> member_columns;  // group members
};

inline std::vector<SplitCandidate> split_candidates(const NumericDataset& ds) {
  std::vector<SplitCandidate> out;
  long j = 0;
  while (j < ds.dims()) {
    const auto& col = ds.columns[static_cast<std::size_t>(j)];
    if (col.kind == ColumnKind::discrete) {
      SplitCandidate cand;
      cand.is_group = true;
      cand.column = j;
      long k = j;
      while (k < ds.dims() && ds.columns[static_cast<std::size_t>(k)].kind == ColumnKind::discrete &&
             ds.columns[static_cast<std::size_t>(k)].origin_index == col.origin_index) {
        cand.member_columns.push_back(k);
        ++k;
      }
      out.push_back(std::move(cand));
      j = k;
    } else {
      out.push_back({false, j, {}});
      ++j;
    }
  }
  return out;
}

struct TreeBuilder {
  const NumericDataset& ds;
  const TreeConfig& config;
  std::vector<SplitCandidate> candidates;
  std::vector<TreeNode> nodes;

  explicit TreeBuilder(const NumericDataset& data, const TreeConfig& cfg)
      : ds(data), config(cfg), candidates(split_candidates(data)) {}

  std::vector<long> count(const std::vector<long>& rows) const {
    std::vector<long> counts(static_cast<std::size_t>(ds.classes()), 0);
    for (long r : rows) ++counts[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(r)])];
    return counts;
  }

  static int majority(const std::vector<long>& counts) {
    int best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c) {
      if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    }
    return best;
  }

  long make_leaf(const std::vector<long>& counts) {
    TreeNode node;
    node.kind = TreeNode::Kind::leaf;
    node.distribution = counts;
    node.label = majority(counts);
    nodes.push_back(std::move(node));
    return static_cast<long>(nodes.size()) - 1;
  }

  struct BestSplit {
    double ratio = -std::numeric_limits<double>::infinity();
    std::size_t candidate = 0;
    double threshold = 0.0;
    bool found = false;
  };

  bool admissible(const std::vector<std::vector<long>>& children) const {
    int nonempty = 0;
    for (const auto& child : children) {
      long size = 0;
      for (long c : child) size += c;
      if (size == 0) continue;
      if (size < config.min_leaf) return false;
      ++nonempty;
    }
    return nonempty >= 2;
  }

  BestSplit find_best(const std::vector<long>& rows, const std::vector<long>& parent_counts) const {
    BestSplit best;
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
      const SplitCandidate& cand = candidates[ci];
      if (cand.is_group) {
        std::vector<std::vector<long>> children(
            cand.member_columns.size(), std::vector<long>(static_cast<std::size_t>(ds.classes()), 0));
        for (long r : rows) {
          for (std::size_t t = 0; t < cand.member_columns.size(); ++t) {
            if (ds.x(r, cand.member_columns[t]) > 0.5) {
              ++children[t][static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(r)])];
              break;
            }
          }
        }
        if (!admissible(children)) continue;
        const double ratio = gain_ratio(parent_counts, children);
        if (ratio > best.ratio) best = {ratio, ci, 0.0, true};
      } else {
        // midpoints between consecutive distinct sorted values
        std::vector<std::pair<double, int>> vals;
        vals.reserve(rows.size());
        for (long r : rows) {
          vals.emplace_back(ds.x(r, cand.column), ds.labels[static_cast<std::size_t>(r)]);
        }
        std::sort(vals.begin(), vals.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<long> left(static_cast<std::size_t>(ds.classes()), 0);
        std::vector<long> right = parent_counts;
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
          ++left[static_cast<std::size_t>(vals[i].second)];
          --right[static_cast<std::size_t>(vals[i].second)];
          if (vals[i].first == vals[i + 1].first) continue;
          long left_size = static_cast<long>(i) + 1;
          long right_size = static_cast<long>(vals.size()) - left_size;
          if (left_size < config.min_leaf || right_size < config.min_leaf) continue;
          const double ratio = gain_ratio(parent_counts, {left, right});
          if (ratio > best.ratio) {
            best = {ratio, ci, (vals[i].first + vals[i + 1].first) / 2.0, true};
          }
        }
      }
    }
    return best;
  }

  long build(const std::vector<long>& rows, int depth) {
    const std::vector<long> counts = count(rows);
    int nonzero = 0;
    for (long c : counts) nonzero += (c > 0);
    if (nonzero <= 1 || depth >= config.max_depth) return make_leaf(counts);

    const BestSplit best = find_best(rows, counts);
    if (!best.found || best.ratio < config.min_gain) return make_leaf(counts);

    const SplitCandidate& cand = candidates[best.candidate];
    const long index = static_cast<long>(nodes.size());
    nodes.emplace_back();  // reserve slot; children are appended behind it
    nodes[static_cast<std::size_t>(index)].distribution = counts;
    nodes[static_cast<std::size_t>(index)].label = majority(counts);

    if (cand.is_group) {
      std::vector<std::vector<long>> parts(cand.member_columns.size());
      for (long r : rows) {
        for (std::size_t t = 0; t < cand.member_columns.size(); ++t) {
          if (ds.x(r, cand.member_columns[t]) > 0.5) {
            parts[t].push_back(r);
            break;
          }
        }
      }
      std::size_t largest = 0;
      std::vector<long> children;
      for (std::size_t t = 0; t < parts.size(); ++t) {
        if (parts[t].size() > parts[largest].size()) largest = t;
      }
      for (std::size_t t = 0; t < parts.size(); ++t) {
        if (parts[t].empty()) {
          children.push_back(make_leaf(counts));  // empty branch predicts the node majority
        } else {
          children.push_back(build(parts[t], depth + 1));
        }
      }
      TreeNode& node = nodes[static_cast<std::size_t>(index)];
      node.kind = TreeNode::Kind::group_split;
      node.member_columns = cand.member_columns;
      node.children = std::move(children);
      node.majority_child = node.children[largest];
    } else {
      std::vector<long> left_rows, right_rows;
      for (long r : rows) {
        (ds.x(r, cand.column) <= best.threshold ? left_rows : right_rows).push_back(r);
      }
      const long left = build(left_rows, depth + 1);
      const long right = build(right_rows, depth + 1);
      TreeNode& node = nodes[static_cast<std::size_t>(index)];
      node.kind = TreeNode::Kind::continuous_split;
      node.column = cand.column;
      node.threshold = best.threshold;
      node.left = left;
      node.right = right;
    }
    return index;
  }
};

}  // namespace detail

/// Greedy top-down gain-ratio tree. Continuous splits test midpoints between
/// consecutive distinct sorted values; ties go to the lowest feature index,
/// then the lowest threshold; leaves take the majority class (lowest id on
/// ties).
inline TreeModel train_tree(const NumericDataset& ds, const TreeConfig& config = {}) {
  if (ds.rows() < 1) throw DataError("train_tree: empty dataset");
  if (config.min_leaf < 1) throw DataError("train_tree: min_leaf must be >= 1");
  detail::TreeBuilder builder(ds, config);
  std::vector<long> rows(static_cast<std::size_t>(ds.rows()));
  std::iota(rows.begin(), rows.end(), 0L);
  // the root must be node 0; build() appends parents before children
  builder.build(rows, 0);
  TreeModel model;
  model.nodes = std::move(builder.nodes);
  model.config = config;
  model.n_classes = ds.classes();
  model.n_features = ds.dims();
  return model;
}

struct TreePrediction {
  std::vector<int> labels;
  std::vector<std::vector<long>> distributions;  // training counts of the reached leaf
};

inline TreePrediction predict_tree(const TreeModel& model, const Matrix& x) {
  if (x.cols() != model.n_features) {
    throw DataError("predict_tree: input has " + std::to_string(x.cols()) + " columns, model expects " +
                    std::to_string(model.n_features));
  }
  TreePrediction out;
  out.labels.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    long at = 0;
    while (model.nodes[static_cast<std::size_t>(at)].kind != TreeNode::Kind::leaf) {
      const TreeNode& node = model.nodes[static_cast<std::size_t>(at)];
      if (node.kind == TreeNode::Kind::continuous_split) {
        at = (x(r, node.column) <= node.threshold) ? node.left : node.right;
      } else {
        long next = node.majority_child;  // unseen token: block is all zero
        for (std::size_t t = 0; t < node.member_columns.size(); ++t) {
          if (x(r, node.member_columns[t]) > 0.5) {
            next = node.children[t];
            break;
          }
        }
        at = next;
      }
    }
    const TreeNode& leaf = model.nodes[static_cast<std::size_t>(at)];
    out.labels.push_back(leaf.label);
    out.distributions.push_back(leaf.distribution);
  }
  return out;
}

}  // namespace kda
