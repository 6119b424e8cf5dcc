#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "kda/common.hpp"
#include "kda/dataset.hpp"

namespace kda {

struct MlpConfig {
  int hidden = 20;
  int epochs = 50;
  double rate = 0.1;
  long batch = 32;
  std::uint64_t seed = 0;
  bool zero_init = false;  // override the uniform fan-in initialization
};

/// One-hidden-layer feed-forward network: logistic-sigmoid hidden units and a
/// softmax output over the classes.
struct MlpModel {
  Matrix w1;  // inputs x hidden
  Vector b1;
  Matrix w2;  // hidden x classes
  Vector b2;
  MlpConfig config;

  long inputs() const { return static_cast<long>(w1.rows()); }
  int classes() const { return static_cast<int>(w2.cols()); }
};

/// Row-wise softmax with max-logit subtraction, stable for large magnitudes.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double peak = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - peak).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

namespace detail {

inline Matrix sigmoid(const Matrix& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

struct MlpForward {
  Matrix hidden;  // activations
  Matrix probs;
};

inline MlpForward mlp_forward(const MlpModel& model, const Matrix& x) {
  MlpForward f;
  f.hidden = sigmoid((x * model.w1).rowwise() + model.b1.transpose());
  f.probs = softmax_rows((f.hidden * model.w2).rowwise() + model.b2.transpose());
  return f;
}

}  // namespace detail

struct MlpGradients {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
  double loss = 0.0;  // mean cross-entropy over the batch
};

/// Mean cross-entropy loss and its analytic gradients for a batch; the same
/// computation training consumes, exposed so it can be finite-difference
/// checked.
inline MlpGradients mlp_gradients(const MlpModel& model, const Matrix& x, const std::vector<int>& y) {
  if (x.cols() != model.inputs()) throw DataError("mlp_gradients: input width mismatch");
  if (static_cast<long>(y.size()) != x.rows()) throw DataError("mlp_gradients: label count mismatch");
  const auto f = detail::mlp_forward(model, x);
  const double inv_m = 1.0 / static_cast<double>(x.rows());

  MlpGradients g;
  g.loss = 0.0;
  Matrix dz2 = f.probs;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const int label = y[static_cast<std::size_t>(r)];
    if (label < 0 || label >= model.classes()) throw DataError("mlp_gradients: label out of range");
    g.loss -= std::log(std::max(f.probs(r, label), 1e-300));
    dz2(r, label) -= 1.0;
  }
  g.loss *= inv_m;
  dz2 *= inv_m;

  g.w2 = f.hidden.transpose() * dz2;
  g.b2 = dz2.colwise().sum();
  const Matrix dhidden = dz2 * model.w2.transpose();
  const Matrix dz1 = dhidden.array() * f.hidden.array() * (1.0 - f.hidden.array());
  g.w1 = x.transpose() * dz1;
  g.b1 = dz1.colwise().sum();
  return g;
}

inline double mlp_loss(const MlpModel& model, const Matrix& x, const std::vector<int>& y) {
  return mlp_gradients(model, x, y).loss;
}

/// Mini-batch gradient descent on the mean cross-entropy. Deterministic for a
/// fixed seed: weights are drawn uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]
/// from the seeded generator (biases start at zero) and the per-epoch row
/// order comes from the same stream.
inline MlpModel train_mlp(const NumericDataset& ds, const MlpConfig& config) {
  if (ds.rows() < 1) throw DataError("train_mlp: empty dataset");
  if (config.hidden < 1) throw DataError("train_mlp: hidden width must be >= 1");
  if (config.batch < 1) throw DataError("train_mlp: batch size must be >= 1");
  if (!(config.rate > 0.0)) throw DataError("train_mlp: learning rate must be positive");

  MlpModel model;
  model.config = config;
  model.w1.setZero(ds.dims(), config.hidden);
  model.b1.setZero(config.hidden);
  model.w2.setZero(config.hidden, ds.classes());
  model.b2.setZero(ds.classes());

  Rng rng(config.seed);
  if (!config.zero_init) {
    const double s1 = 1.0 / std::sqrt(static_cast<double>(std::max<long>(ds.dims(), 1)));
    for (Eigen::Index i = 0; i < model.w1.rows(); ++i) {
      for (Eigen::Index j = 0; j < model.w1.cols(); ++j) model.w1(i, j) = rng.uniform(-s1, s1);
    }
    const double s2 = 1.0 / std::sqrt(static_cast<double>(config.hidden));
    for (Eigen::Index i = 0; i < model.w2.rows(); ++i) {
      for (Eigen::Index j = 0; j < model.w2.cols(); ++j) model.w2(i, j) = rng.uniform(-s2, s2);
    }
  }

  const long m = ds.rows();
  std::vector<long> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0L);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (long start = 0; start < m; start += config.batch) {
      const long size = std::min(config.batch, m - start);
      Matrix xb(size, ds.dims());
      std::vector<int> yb(static_cast<std::size_t>(size));
      for (long i = 0; i < size; ++i) {
        const long r = order[static_cast<std::size_t>(start + i)];
        xb.row(i) = ds.x.row(r);
        yb[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(r)];
      }
      const MlpGradients g = mlp_gradients(model, xb, yb);
      if (!std::isfinite(g.loss)) {
        throw NumericError("train_mlp: non-finite loss at epoch " + std::to_string(epoch));
      }
      model.w1 -= config.rate * g.w1;
      model.b1 -= config.rate * g.b1;
      model.w2 -= config.rate * g.w2;
      model.b2 -= config.rate * g.b2;
    }
  }
  return model;
}

struct MlpPrediction {
  std::vector<int> labels;
  Matrix probabilities;  // rows sum to 1
};

inline MlpPrediction predict_mlp(const MlpModel& model, const Matrix& x) {
  if (x.cols() != model.inputs()) {
    throw DataError("predict_mlp: input has " + std::to_string(x.cols()) + " columns, model expects " +
                    std::to_string(model.inputs()));
  }
  MlpPrediction out;
  out.probabilities = detail::mlp_forward(model, x).probs;
  out.labels.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    int best = 0;
    for (int c = 1; c < model.classes(); ++c) {
      if (out.probabilities(r, c) > out.probabilities(r, best)) best = c;
    }
    out.labels.push_back(best);
  }
  return out;
}

}  // namespace kda
