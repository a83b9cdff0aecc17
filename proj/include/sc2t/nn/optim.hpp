#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sc2t/nn/tensor.hpp"

namespace sc2t::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update. Throws NumericError on non-finite gradients
// (parameters are left untouched in that case).
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& cfg = {});

}  // namespace sc2t::nn
