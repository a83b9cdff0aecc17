#include "sc2t/nn/loss.hpp"

#include <cmath>
#include <vector>

#include "sc2t/error.hpp"

namespace sc2t::nn {

namespace {

// Writes softmax(row) - onehot(target) into grad_row (unscaled) and returns -log p[target].
double row_xent(const double* row, std::size_t classes, std::size_t target, double* grad_row) {
  double mx = row[0];
  for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
  double sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    grad_row[c] = std::exp(row[c] - mx);
    sum += grad_row[c];
  }
  for (std::size_t c = 0; c < classes; ++c) grad_row[c] /= sum;
  const double nll = std::log(sum) - (row[target] - mx);
  grad_row[target] -= 1.0;
  return nll;
}

}  // namespace

LossResult softmax_xent_per_position(const Tensor& scores, const Tensor& target) {
  if (scores.rank() != 2 || scores.shape() != target.shape()) {
    throw InvalidArgument("softmax cross-entropy: shapes " + shape_string(scores.shape()) + " and " +
                          shape_string(target.shape()) + " differ");
  }
  require_finite(scores, "loss scores");
  const std::size_t positions = scores.dim(0), classes = scores.dim(1);
  std::vector<std::int32_t> idx(positions);
  for (std::size_t r = 0; r < positions; ++r) {
    int hot = -1;
    for (std::size_t c = 0; c < classes; ++c) {
      const double v = target.at(r, c);
      if (v == 1.0 && hot < 0) {
        hot = static_cast<int>(c);
      } else if (v != 0.0) {
        hot = -2;
        break;
      }
    }
    if (hot < 0) throw InvalidArgument("target row " + std::to_string(r) + " is not one-hot");
    idx[r] = hot;
  }
  LossResult res = softmax_xent_indexed(scores.reshaped({1, positions * classes}), idx, positions, classes);
  res.grad = std::move(res.grad).reshaped(scores.shape());
  return res;
}

LossResult softmax_xent_indexed(const Tensor& scores, std::span<const std::int32_t> targets, std::size_t positions,
                                std::size_t classes) {
  if (scores.rank() != 2 || scores.dim(1) != positions * classes) {
    throw InvalidArgument("softmax cross-entropy: scores shape " + shape_string(scores.shape()));
  }
  const std::size_t rows = scores.dim(0) * positions;
  if (targets.size() != rows) throw InvalidArgument("softmax cross-entropy: target count mismatch");
  require_finite(scores, "loss scores");
  LossResult res{0.0, Tensor(scores.shape())};
  const double scale = rows ? 1.0 / static_cast<double>(rows) : 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= classes) throw InvalidArgument("target class out of range");
    double* g = res.grad.data().data() + r * classes;
    total += row_xent(scores.data().data() + r * classes, classes, static_cast<std::size_t>(t), g);
    for (std::size_t c = 0; c < classes; ++c) g[c] *= scale;
  }
  res.loss = total * scale;
  return res;
}

}  // namespace sc2t::nn
