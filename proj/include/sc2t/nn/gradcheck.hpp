#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sc2t/nn/network.hpp"

namespace sc2t::nn {

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Coordinates sampled per parameter tensor; 0 checks every coordinate.
  std::size_t coords_per_tensor = 0;
  // Relative error denominators are clamped to at least this magnitude.
  double magnitude_floor = 1e-6;
  std::uint64_t seed = 7;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Coordinates whose perturbation crossed a ReLU or max-pool switch point.
  std::size_t skipped = 0;
};

struct ObjectiveValue {
  double loss = 0.0;
  std::vector<std::uint64_t> branch_signature;
};

double relative_error(double analytic, double numeric, double floor);

// Central differences of `objective` with respect to each tensor in `params`,
// compared against `analytic` (same order and shapes).
GradCheckResult finite_difference_check(std::span<Tensor* const> params, std::span<const Tensor> analytic,
                                        const std::function<ObjectiveValue()>& objective,
                                        const GradCheckOptions& opt = {});

// Checks a network against the scalar objective sum(w * net(x)) for a fixed
// random w, over all parameters and the input.
GradCheckResult check_network_gradients(Network& net, const Tensor& input, Mode mode, std::uint64_t rng_seed,
                                        const GradCheckOptions& opt = {});

}  // namespace sc2t::nn
