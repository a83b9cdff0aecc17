#pragma once

#include <cstdint>
#include <span>

#include "sc2t/nn/tensor.hpp"

namespace sc2t::nn {

struct LossResult {
  double loss = 0.0;
  Tensor grad;
};

// Softmax over each row of `scores` (positions x classes), cross-entropy
// against the one-hot `target`, averaged over positions.
// grad = (softmax - target) / positions.
LossResult softmax_xent_per_position(const Tensor& scores, const Tensor& target);

// Batched form: scores [N, positions * classes], target class index per
// (sample, position). Loss is the mean over all N * positions rows.
LossResult softmax_xent_indexed(const Tensor& scores, std::span<const std::int32_t> targets, std::size_t positions,
                                std::size_t classes);

}  // namespace sc2t::nn
