#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sc2t/nn/tensor.hpp"
#include "sc2t/rng.hpp"

namespace sc2t::nn {

enum class Mode { Train, Eval };

enum class LayerKind : std::uint32_t {
  Dense = 1,
  Conv1d = 2,
  MaxPoolOverTime = 3,
  Flatten = 4,
  Relu = 5,
  BatchNorm = 6,
  Dropout = 7,
};

const char* layer_kind_name(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::size_t units = 0;  // Dense output width, or Conv1d filter count
  std::size_t width = 1;  // Conv1d filter width
  double p = 0.0;         // Dropout probability

  static LayerSpec dense(std::size_t units) { return {LayerKind::Dense, units, 1, 0.0}; }
  static LayerSpec conv1d(std::size_t filters, std::size_t width) { return {LayerKind::Conv1d, filters, width, 0.0}; }
  static LayerSpec max_pool() { return {LayerKind::MaxPoolOverTime}; }
  static LayerSpec flatten() { return {LayerKind::Flatten}; }
  static LayerSpec relu() { return {LayerKind::Relu}; }
  static LayerSpec batch_norm() { return {LayerKind::BatchNorm}; }
  static LayerSpec dropout(double p) { return {LayerKind::Dropout, 0, 1, p}; }

  // Throws InvalidArgument when the kind-specific parameters are out of range.
  void validate() const;
};

// Per-call activations a layer needs for its backward pass.
struct LayerCache {
  Mode mode = Mode::Eval;
  Shape input_shape;
  Tensor saved;                      // layer-specific: input, im2col, output, mask or x-hat
  Tensor aux;                        // batch-norm inverse std
  std::vector<std::uint32_t> index;  // max-pool argmax, conv one-hot positions
  bool sparse = false;               // conv input was one-hot, `index` holds the hot channel
  bool want_input_grad = true;
};

// A layer maps a batch tensor [N, ...] to [N, ...]. Sample shapes exclude N.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerSpec spec() const = 0;
  virtual Shape output_shape(const Shape& sample_shape) const = 0;

  virtual Tensor forward(const Tensor& x, Mode mode, Rng& rng, LayerCache& cache) = 0;
  // Returns dL/dx and accumulates parameter gradients into `grads`
  // (one entry per parameter, same order as parameters()).
  virtual Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>& grads) const = 0;

  // Trainable parameters.
  virtual std::vector<Tensor*> parameters() { return {}; }
  virtual std::vector<const Tensor*> parameters() const { return {}; }
  // Non-trainable persistent state (batch-norm running statistics).
  virtual std::vector<Tensor*> state() { return {}; }
  virtual std::vector<const Tensor*> state() const { return {}; }

  virtual void initialize(Rng& /*rng*/) {}

  // Appends a fingerprint of the piecewise-linear branch taken during forward
  // (ReLU signs, max-pool winners). Finite-difference checks skip coordinates
  // whose perturbation changes it.
  virtual void branch_signature(const LayerCache& /*cache*/, std::vector<std::uint64_t>& /*out*/) const {}
};

// Builds a layer for the given per-sample input shape.
std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& sample_shape);

class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out);
  LayerSpec spec() const override { return LayerSpec::dense(out_); }
  Shape output_shape(const Shape& s) const override;
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, LayerCache& cache) override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>& grads) const override;
  std::vector<Tensor*> parameters() override { return {&weight_, &bias_}; }
  std::vector<const Tensor*> parameters() const override { return {&weight_, &bias_}; }
  void initialize(Rng& rng) override;

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Tensor weight_;  // [in, out]
  Tensor bias_;    // [out]
};

// One-dimensional convolution over [N, T, C] with zero "same" padding.
class Conv1d final : public Layer {
 public:
  Conv1d(std::size_t channels, std::size_t filters, std::size_t width);
  LayerSpec spec() const override { return LayerSpec::conv1d(filters_, width_); }
  Shape output_shape(const Shape& s) const override;
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, LayerCache& cache) override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>& grads) const override;
  std::vector<Tensor*> parameters() override { return {&weight_, &bias_}; }
  std::vector<const Tensor*> parameters() const override { return {&weight_, &bias_}; }
  void initialize(Rng& rng) override;

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  std::size_t channels_, filters_, width_;
  Tensor weight_;  // [width * channels, filters], row k*C + c
  Tensor bias_;    // [filters]
};

// Global max over the sequence axis: [N, T, C] -> [N, C].
class MaxPoolOverTime final : public Layer {
 public:
  LayerSpec spec() const override { return LayerSpec::max_pool(); }
  Shape output_shape(const Shape& s) const override;
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, LayerCache& cache) override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>& grads) const override;
  void branch_signature(const LayerCache& cache, std::vector<std::uint64_t>& out) const override;
};

class Flatten final : public Layer {
 public:
  LayerSpec spec() const override { return LayerSpec::flatten(); }
  Shape output_shape(const Shape& s) const override;
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, LayerCache& cache) override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>& grads) const override;
};

class Relu final : public Layer {
 public:
  LayerSpec spec() const override { return LayerSpec::relu(); }
  Shape output_shape(const Shape& s) const override { return s; }
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, LayerCache& cache) override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>& grads) const override;
  void branch_signature(const LayerCache& cache, std::vector<std::uint64_t>& out) const override;
};

// Normalizes each feature (last axis) over all other axes of the batch.
class BatchNorm final : public Layer {
 public:
  explicit BatchNorm(std::size_t features);
  LayerSpec spec() const override { return LayerSpec::batch_norm(); }
  Shape output_shape(const Shape& s) const override { return s; }
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, LayerCache& cache) override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>& grads) const override;
  std::vector<Tensor*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<const Tensor*> parameters() const override { return {&gamma_, &beta_}; }
  std::vector<Tensor*> state() override { return {&running_mean_, &running_var_}; }
  std::vector<const Tensor*> state() const override { return {&running_mean_, &running_var_}; }
  void initialize(Rng& rng) override;

  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

 private:
  std::size_t features_;
  Tensor gamma_, beta_;
  Tensor running_mean_, running_var_;
};

// Inverted dropout: kept units are scaled by 1/(1-p) in train mode, identity in eval mode.
class Dropout final : public Layer {
 public:
  explicit Dropout(double p);
  LayerSpec spec() const override { return LayerSpec::dropout(p_); }
  Shape output_shape(const Shape& s) const override { return s; }
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, LayerCache& cache) override;
  Tensor backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor*>& grads) const override;

 private:
  double p_;
};

}  // namespace sc2t::nn
