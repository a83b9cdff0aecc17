#include "sc2t/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sc2t/error.hpp"

namespace sc2t::nn {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult finite_difference_check(std::span<Tensor* const> params, std::span<const Tensor> analytic,
                                        const std::function<ObjectiveValue()>& objective,
                                        const GradCheckOptions& opt) {
  if (params.size() != analytic.size()) throw InvalidArgument("gradient check: parameter/gradient count mismatch");
  GradCheckResult res;
  const ObjectiveValue base = objective();
  Rng rng(opt.seed);
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    if (p.shape() != analytic[t].shape()) throw InvalidArgument("gradient check: shape mismatch");
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opt.coords_per_tensor && coords.size() > opt.coords_per_tensor) {
      rng.shuffle(coords);
      coords.resize(opt.coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t j : coords) {
      const double orig = p[j];
      p[j] = orig + opt.epsilon;
      const ObjectiveValue plus = objective();
      p[j] = orig - opt.epsilon;
      const ObjectiveValue minus = objective();
      p[j] = orig;
      if (plus.branch_signature != base.branch_signature || minus.branch_signature != base.branch_signature) {
        ++res.skipped;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * opt.epsilon);
      res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic[t][j], numeric, opt.magnitude_floor));
      ++res.checked;
    }
  }
  return res;
}

GradCheckResult check_network_gradients(Network& net, const Tensor& input, Mode mode, std::uint64_t rng_seed,
                                        const GradCheckOptions& opt) {
  Tape tape;
  Tensor y = net.forward(input, mode, rng_seed, tape);
  Rng wrng(derive_seed(opt.seed, 99));
  Tensor w(y.shape());
  for (double& v : w.values()) v = wrng.uniform(-1.0, 1.0);

  Gradients grads = net.make_gradients();
  Tensor dx = net.backward(tape, w, grads);

  Tensor x = input;
  auto objective = [&]() {
    Tape t;
    Tensor out = net.forward(x, mode, rng_seed, t);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += w[i] * out[i];
    return ObjectiveValue{s, t.branch_signature};
  };

  std::vector<Tensor*> params = net.mutable_parameters();
  params.push_back(&x);
  grads.push_back(dx);
  // Perturbing parameters invalidates nothing here: every objective call
  // records a fresh tape.
  return finite_difference_check(params, grads, objective, opt);
}

}  // namespace sc2t::nn
