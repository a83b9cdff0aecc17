#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "sc2t/nn/layers.hpp"

namespace sc2t::nn {

// Activations recorded by a forward pass. Bound to the parameter version of
// the network that produced it.
struct Tape {
  std::uint64_t network_id = 0;
  std::uint64_t version = 0;
  std::vector<LayerCache> caches;

  bool record_signature = true;  // hash of ReLU / max-pool branch choices, for gradient checks
  std::vector<std::uint64_t> branch_signature;
};

using Gradients = std::vector<Tensor>;

// Sequential stack of layers over a fixed per-sample input shape.
class Network {
 public:
  explicit Network(Shape sample_input_shape);
  Network(Shape sample_input_shape, const std::vector<LayerSpec>& specs);

  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;
  Network(const Network& other);
  Network& operator=(const Network& other);

  Network& add(const LayerSpec& spec);

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return output_shape_; }
  std::size_t layer_count() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  std::vector<LayerSpec> specs() const;

  // He-uniform weights, zero biases, unit batch-norm from the given seed.
  void initialize(std::uint64_t seed);

  // Input is [N, sample_input_shape...]. Dropout masks in train mode derive from rng_seed.
  // With input_grad false, backward may return an empty tensor.
  Tensor forward(const Tensor& input, Mode mode, std::uint64_t rng_seed, Tape& tape, bool input_grad = true);
  // Eval-mode forward without keeping a tape.
  Tensor infer(const Tensor& input);

  // Accumulates parameter gradients into `grads` (see make_gradients) and returns dL/dinput.
  Tensor backward(const Tape& tape, const Tensor& output_grad, Gradients& grads) const;

  Gradients make_gradients() const;

  std::vector<Tensor*> mutable_parameters();
  std::vector<const Tensor*> parameters() const;
  std::vector<Tensor*> mutable_state();
  std::vector<const Tensor*> state() const;
  std::size_t parameter_count() const;

  // Call after changing parameters in place; older tapes become stale.
  void touch() { ++version_; }
  std::uint64_t version() const { return version_; }

  void save(std::ostream& os) const;
  static Network load(std::istream& is);

 private:
  Shape input_shape_;
  Shape output_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::uint64_t id_;
  std::uint64_t version_ = 0;
};

}  // namespace sc2t::nn
