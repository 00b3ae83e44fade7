#pragma once

#include "graphmu/graph.hpp"

#include <cstdint>

namespace graphmu {

/// Two-layer GCN: ReLU on the hidden layer, softmax on the output.
struct GcnModel {
  Matrix w0;  // d x h
  Matrix w1;  // h x c

  Eigen::Index feature_dim() const { return w0.rows(); }
  Eigen::Index hidden_dim() const { return w0.cols(); }
  Eigen::Index num_classes() const { return w1.cols(); }

  bool operator==(const GcnModel& other) const;
};

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 200;
  std::uint64_t seed = 0;
  double weight_init_scale = 1.0;
  int hidden_dim = 16;

  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

struct ForwardPass {
  Matrix propagated;     // A_hat X
  Matrix hidden_input;   // A_hat X W0
  Matrix hidden;         // ReLU(hidden_input)
  Matrix aggregated;     // A_hat H1
  Matrix logits;         // A_hat H1 W1
  Matrix probabilities;  // row softmax of logits
};

struct Gradients {
  Matrix w0;
  Matrix w1;
  double loss = 0.0;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool operator==(const Metrics&) const = default;
};

/// Uniform(-s, s) init with s = weight_init_scale / sqrt(d).
GcnModel init_model(Eigen::Index feature_dim, Eigen::Index num_classes, const TrainConfig& cfg);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

ForwardPass forward(const GcnModel& model, const SparseMatrix& adj, const Matrix& features);

/// Mean over masked rows of the per-class binary cross-entropy with one-hot
/// targets, evaluated on probabilities (0 log 0 taken as 0).
double loss(const Matrix& probabilities, std::span<const int> labels, const Mask& mask);

/// Same quantity evaluated from logits through log-sum-exp.
double loss_from_logits(const Matrix& logits, std::span<const int> labels, const Mask& mask);

/// Analytic gradients of `loss_from_logits` with respect to W0 and W1.
Gradients backward(const GcnModel& model, const SparseMatrix& adj, const Matrix& features,
                   std::span<const int> labels, const Mask& mask);

/// theta <- theta - lr * grad.
GcnModel gradient_step(const GcnModel& model, const Gradients& grads, double learning_rate);

/// Full-batch gradient descent on the graph's train mask from a fresh init.
GcnModel train(const Graph& g, const TrainConfig& cfg);

/// Continues full-batch descent from `start` for `epochs` steps.
GcnModel descend(GcnModel start, const SparseMatrix& adj, const Matrix& features,
                 std::span<const int> labels, const Mask& mask, double learning_rate, int epochs);

std::vector<int> predict(const Matrix& probabilities);

/// Accuracy is the plain fraction correct; precision, recall and F1 are
/// macro-averaged over the classes that occur among the masked labels.
Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels,
                        const Mask& mask, int num_classes);

Metrics evaluate(const GcnModel& model, const Graph& g, const Mask& mask);

/// Single-class confusion counts to accuracy, precision, recall and F1.
Metrics binary_scores(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

}  // namespace graphmu
