#include "sc2t/nn/network.hpp"

#include <atomic>
#include <istream>
#include <ostream>

#include "sc2t/error.hpp"
#include "sc2t/nn/serialize.hpp"

namespace sc2t::nn {

namespace {

std::uint64_t next_network_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

}  // namespace

Network::Network(Shape sample_input_shape)
    : input_shape_(sample_input_shape), output_shape_(std::move(sample_input_shape)), id_(next_network_id()) {
  if (input_shape_.empty()) throw InvalidArgument("network input needs at least one axis");
}

Network::Network(Shape sample_input_shape, const std::vector<LayerSpec>& specs) : Network(std::move(sample_input_shape)) {
  for (const auto& s : specs) add(s);
}

Network::Network(const Network& other) : Network(other.input_shape_, other.specs()) {
  auto dst = mutable_parameters();
  auto src = other.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] = *src[i];
  auto dst_state = mutable_state();
  auto src_state = other.state();
  for (std::size_t i = 0; i < dst_state.size(); ++i) *dst_state[i] = *src_state[i];
}

Network& Network::operator=(const Network& other) {
  if (this != &other) *this = Network(other);
  return *this;
}

Network& Network::add(const LayerSpec& spec) {
  auto layer = make_layer(spec, output_shape_);
  output_shape_ = layer->output_shape(output_shape_);
  layers_.push_back(std::move(layer));
  touch();
  return *this;
}

std::vector<LayerSpec> Network::specs() const {
  std::vector<LayerSpec> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) out.push_back(l->spec());
  return out;
}

void Network::initialize(std::uint64_t seed) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    layers_[i]->initialize(rng);
  }
  touch();
}

Tensor Network::forward(const Tensor& input, Mode mode, std::uint64_t rng_seed, Tape& tape, bool input_grad) {
  if (input.rank() != input_shape_.size() + 1 ||
      !std::equal(input_shape_.begin(), input_shape_.end(), input.shape().begin() + 1)) {
    throw InvalidArgument("network expects input [N," + shape_string(input_shape_).substr(1) + " but got " +
                          shape_string(input.shape()));
  }
  tape.network_id = id_;
  tape.version = version_;
  tape.caches.assign(layers_.size(), LayerCache{});
  tape.branch_signature.clear();
  if (!tape.caches.empty()) tape.caches.front().want_input_grad = input_grad;
  Tensor x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Rng rng(derive_seed(rng_seed, i));
    x = layers_[i]->forward(x, mode, rng, tape.caches[i]);
    if (tape.record_signature) layers_[i]->branch_signature(tape.caches[i], tape.branch_signature);
  }
  require_finite(x, "network output");
  return x;
}

Tensor Network::infer(const Tensor& input) {
  Tape tape;
  return forward(input, Mode::Eval, 0, tape);
}

Tensor Network::backward(const Tape& tape, const Tensor& output_grad, Gradients& grads) const {
  if (tape.network_id != id_ || tape.version != version_ || tape.caches.size() != layers_.size()) {
    throw InvalidArgument("stale tape: parameters changed since the forward pass");
  }
  if (grads.size() != parameters().size()) throw InvalidArgument("gradient buffer does not match network");
  Tensor g = output_grad;
  std::size_t param_end = grads.size();
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const std::size_t count = layers_[i]->parameters().size();
    std::vector<Tensor*> slots;
    for (std::size_t k = 0; k < count; ++k) slots.push_back(&grads[param_end - count + k]);
    g = layers_[i]->backward(g, tape.caches[i], slots);
    param_end -= count;
  }
  return g;
}

Gradients Network::make_gradients() const {
  Gradients out;
  for (const Tensor* p : parameters()) out.emplace_back(p->shape());
  return out;
}

std::vector<Tensor*> Network::mutable_parameters() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    for (Tensor* p : l->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<const Tensor*> Network::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers_) {
    for (const Tensor* p : static_cast<const Layer&>(*l).parameters()) out.push_back(p);
  }
  return out;
}

std::vector<Tensor*> Network::mutable_state() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    for (Tensor* p : l->state()) out.push_back(p);
  }
  return out;
}

std::vector<const Tensor*> Network::state() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers_) {
    for (const Tensor* p : static_cast<const Layer&>(*l).state()) out.push_back(p);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* p : parameters()) n += p->size();
  return n;
}

void Network::save(std::ostream& os) const {
  write_u32(os, static_cast<std::uint32_t>(input_shape_.size()));
  for (auto d : input_shape_) write_u64(os, d);
  write_u32(os, static_cast<std::uint32_t>(layers_.size()));
  for (const auto& l : layers_) {
    const LayerSpec s = l->spec();
    write_u32(os, static_cast<std::uint32_t>(s.kind));
    write_u64(os, s.units);
    write_u64(os, s.width);
    write_f64(os, s.p);
  }
  for (const Tensor* p : parameters()) write_tensor(os, *p);
  for (const Tensor* p : state()) write_tensor(os, *p);
}

Network Network::load(std::istream& is) {
  const std::uint32_t rank = read_u32(is);
  if (rank == 0 || rank > 8) throw DataError("bad network input rank in model data");
  Shape input(rank);
  for (auto& d : input) d = read_u64(is);
  const std::uint32_t n_layers = read_u32(is);
  if (n_layers > 4096) throw DataError("layer manifest too long");
  std::vector<LayerSpec> specs(n_layers);
  for (auto& s : specs) {
    s.kind = static_cast<LayerKind>(read_u32(is));
    s.units = read_u64(is);
    s.width = read_u64(is);
    s.p = read_f64(is);
  }
  Network net = [&] {
    try {
      return Network(input, specs);
    } catch (const InvalidArgument& e) {
      throw DataError(std::string("invalid layer manifest: ") + e.what());
    }
  }();
  auto assign = [](std::vector<Tensor*> slots, std::istream& in) {
    for (Tensor* slot : slots) {
      Tensor t = read_tensor(in);
      if (t.shape() != slot->shape()) {
        throw DataError("parameter shape " + shape_string(t.shape()) + " does not match manifest " +
                        shape_string(slot->shape()));
      }
      *slot = std::move(t);
    }
  };
  assign(net.mutable_parameters(), is);
  assign(net.mutable_state(), is);
  net.touch();
  return net;
}

}  // namespace sc2t::nn
