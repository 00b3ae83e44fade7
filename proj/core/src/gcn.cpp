#include "graphmu/gcn.hpp"

#include "graphmu/error.hpp"
#include "graphmu/rng.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace graphmu {

namespace {

std::size_t masked_count(const Mask& mask) {
  std::size_t count = 0;
  for (bool b : mask) count += b ? 1 : 0;
  return count;
}

void check_targets(Eigen::Index rows, std::span<const int> labels, const Mask& mask) {
  if (labels.size() != static_cast<std::size_t>(rows) || mask.size() != labels.size()) {
    throw Error(fmt::format("labels ({}) and mask ({}) must match the {} output rows",
                            labels.size(), mask.size(), rows));
  }
  if (masked_count(mask) == 0) throw Error("mask selects no nodes");
}

// log(sum_{j != skip} exp(z_j)); -inf when the row has a single class.
double log_sum_exp_excluding(const Eigen::Ref<const Eigen::RowVectorXd>& z, Eigen::Index skip) {
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    if (j != skip) m = std::max(m, z[j]);
  }
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    if (j != skip) sum += std::exp(z[j] - m);
  }
  return m + std::log(sum);
}

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  return log_sum_exp_excluding(z, -1);
}

}  // namespace

bool GcnModel::operator==(const GcnModel& other) const {
  return w0.rows() == other.w0.rows() && w0.cols() == other.w0.cols() &&
         w1.rows() == other.w1.rows() && w1.cols() == other.w1.cols() && w0 == other.w0 &&
         w1 == other.w1;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(fmt::format("learning rate must be > 0, got {}", learning_rate));
  if (epochs < 1) throw Error(fmt::format("epochs must be >= 1, got {}", epochs));
  if (hidden_dim < 1) throw Error("hidden_dim must be >= 1");
  if (!(weight_init_scale >= 0.0)) throw Error("weight_init_scale must be >= 0");
}

GcnModel init_model(Eigen::Index feature_dim, Eigen::Index num_classes, const TrainConfig& cfg) {
  if (feature_dim < 1 || num_classes < 2) {
    throw Error(fmt::format("need d >= 1 and c >= 2, got d={} c={}", feature_dim, num_classes));
  }
  Rng rng(cfg.seed);
  GcnModel model;
  model.w0.resize(feature_dim, cfg.hidden_dim);
  model.w1.resize(cfg.hidden_dim, num_classes);
  const double s0 = cfg.weight_init_scale / std::sqrt(static_cast<double>(feature_dim));
  const double s1 = cfg.weight_init_scale / std::sqrt(static_cast<double>(cfg.hidden_dim));
  for (Eigen::Index i = 0; i < model.w0.size(); ++i) model.w0.data()[i] = rng.uniform(-s0, s0);
  for (Eigen::Index i = 0; i < model.w1.size(); ++i) model.w1.data()[i] = rng.uniform(-s1, s1);
  return model;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

ForwardPass forward(const GcnModel& model, const SparseMatrix& adj, const Matrix& features) {
  if (adj.rows() != adj.cols() || adj.rows() != features.rows()) {
    throw Error(fmt::format("adjacency is {}x{} but features have {} rows", adj.rows(), adj.cols(),
                            features.rows()));
  }
  if (features.cols() != model.w0.rows()) {
    throw Error(fmt::format("feature width {} does not match W0 rows {}", features.cols(),
                            model.w0.rows()));
  }
  if (model.w0.cols() != model.w1.rows()) {
    throw Error(fmt::format("W0 is {}x{} but W1 is {}x{}", model.w0.rows(), model.w0.cols(),
                            model.w1.rows(), model.w1.cols()));
  }
  ForwardPass pass;
  pass.propagated = adj * features;
  pass.hidden_input = pass.propagated * model.w0;
  pass.hidden = pass.hidden_input.cwiseMax(0.0);
  pass.aggregated = adj * pass.hidden;
  pass.logits = pass.aggregated * model.w1;
  pass.probabilities = softmax_rows(pass.logits);
  return pass;
}

double loss(const Matrix& probabilities, std::span<const int> labels, const Mask& mask) {
  check_targets(probabilities.rows(), labels, mask);
  double total = 0.0;
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
    if (!mask[i]) continue;
    for (Eigen::Index k = 0; k < probabilities.cols(); ++k) {
      const double o = probabilities(i, k);
      if (k == labels[i]) {
        total -= o > 0.0 ? std::log(o) : -std::numeric_limits<double>::infinity();
      } else if (o > 0.0) {
        total -= std::log1p(-o);
      }
    }
  }
  return total / static_cast<double>(masked_count(mask));
}

double loss_from_logits(const Matrix& logits, std::span<const int> labels, const Mask& mask) {
  check_targets(logits.rows(), labels, mask);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    const auto z = logits.row(i);
    const double lse = log_sum_exp(z);
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      // log o_k for the target, log(1 - o_k) for the rest.
      total -= k == labels[i] ? z[k] - lse : log_sum_exp_excluding(z, k) - lse;
    }
  }
  return total / static_cast<double>(masked_count(mask));
}

Gradients backward(const GcnModel& model, const SparseMatrix& adj, const Matrix& features,
                   std::span<const int> labels, const Mask& mask) {
  const ForwardPass pass = forward(model, adj, features);
  check_targets(pass.logits.rows(), labels, mask);
  const auto c = pass.logits.cols();
  const double scale = 1.0 / static_cast<double>(masked_count(mask));

  // dL/dz_j = t_j - o_j * sum_k t_k with t_k = -y_k + (1 - y_k) * o_k / (1 - o_k).
  Matrix dlogits = Matrix::Zero(pass.logits.rows(), c);
  double total = 0.0;
  Eigen::RowVectorXd t(c);
  for (Eigen::Index i = 0; i < pass.logits.rows(); ++i) {
    if (!mask[i]) continue;
    const auto z = pass.logits.row(i);
    const double lse = log_sum_exp(z);
    for (Eigen::Index k = 0; k < c; ++k) {
      const double rest = log_sum_exp_excluding(z, k);
      if (k == labels[i]) {
        t[k] = -1.0;
        total -= z[k] - lse;
      } else {
        t[k] = std::exp(z[k] - rest);
        total -= rest - lse;
      }
    }
    const double t_sum = t.sum();
    for (Eigen::Index k = 0; k < c; ++k) {
      dlogits(i, k) = scale * (t[k] - pass.probabilities(i, k) * t_sum);
    }
  }

  Gradients grads;
  grads.loss = total * scale;
  grads.w1 = pass.aggregated.transpose() * dlogits;
  const Matrix dhidden = adj.transpose() * (dlogits * model.w1.transpose());
  const Matrix dhidden_input =
      dhidden.cwiseProduct((pass.hidden_input.array() > 0.0).cast<double>().matrix());
  grads.w0 = pass.propagated.transpose() * dhidden_input;
  return grads;
}

GcnModel gradient_step(const GcnModel& model, const Gradients& grads, double learning_rate) {
  GcnModel next = model;
  next.w0 -= learning_rate * grads.w0;
  next.w1 -= learning_rate * grads.w1;
  return next;
}

GcnModel descend(GcnModel start, const SparseMatrix& adj, const Matrix& features,
                 std::span<const int> labels, const Mask& mask, double learning_rate, int epochs) {
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const Gradients grads = backward(start, adj, features, labels, mask);
    if (!std::isfinite(grads.loss)) throw Error(fmt::format("non-finite loss at epoch {}", epoch));
    start = gradient_step(start, grads, learning_rate);
  }
  return start;
}

GcnModel train(const Graph& g, const TrainConfig& cfg) {
  cfg.validate();
  const Mask train_mask = g.mask(Split::train);
  const NormalizedAdjacency norm = normalize(g);
  GcnModel model = init_model(g.features.cols(), g.num_classes, cfg);
  return descend(std::move(model), norm.matrix, g.features, g.labels, train_mask,
                 cfg.learning_rate, cfg.epochs);
}

std::vector<int> predict(const Matrix& probabilities) {
  std::vector<int> out(static_cast<std::size_t>(probabilities.rows()));
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
    Eigen::Index best = 0;
    probabilities.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels,
                        const Mask& mask, int num_classes) {
  if (predictions.size() != labels.size() || mask.size() != labels.size()) {
    throw Error("predictions, labels and mask must have equal length");
  }
  const std::size_t total = masked_count(mask);
  if (total == 0) throw Error("mask selects no nodes");
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0),
      support(num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!mask[i]) continue;
    const int y = labels[i];
    const int p = predictions[i];
    ++support[y];
    if (p == y) {
      ++correct;
      ++tp[y];
    } else {
      ++fn[y];
      if (p >= 0 && p < num_classes) ++fp[p];
    }
  }
  Metrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  int present = 0;
  for (int k = 0; k < num_classes; ++k) {
    if (support[k] == 0) continue;
    ++present;
    const double precision = tp[k] + fp[k] == 0 ? 0.0 : static_cast<double>(tp[k]) / static_cast<double>(tp[k] + fp[k]);
    const double recall = static_cast<double>(tp[k]) / static_cast<double>(tp[k] + fn[k]);
    m.precision += precision;
    m.recall += recall;
    m.f1 += precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
  }
  m.precision /= present;
  m.recall /= present;
  m.f1 /= present;
  return m;
}

Metrics evaluate(const GcnModel& model, const Graph& g, const Mask& mask) {
  const NormalizedAdjacency norm = normalize(g);
  const ForwardPass pass = forward(model, norm.matrix, g.features);
  return compute_metrics(predict(pass.probabilities), g.labels, mask, g.num_classes);
}

Metrics binary_scores(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  Metrics m;
  const std::size_t total = tp + fp + fn + tn;
  m.accuracy = total == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total);
  m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

}  // namespace graphmu
