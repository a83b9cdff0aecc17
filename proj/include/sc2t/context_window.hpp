#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sc2t/nn/tensor.hpp"
#include "sc2t/text_grid.hpp"

namespace sc2t {

struct TokenPos {
  std::size_t line = 0;
  std::size_t idx = 0;
  friend bool operator==(const TokenPos&, const TokenPos&) = default;
};

// Empty optional marks a zero-padded slot.
using NeighborRef = std::optional<TokenPos>;

struct WindowConfig {
  std::size_t h_w = 21;  // horizontal window, target slot included
  std::size_t v_w = 5;   // vertical window, target line included
  std::size_t l_t = 20;  // characters per token encoding
  void validate() const;
};

// The h_w/2 tokens left of the target then the h_w/2 tokens right of it, in line order.
std::vector<NeighborRef> horizontal_context(const TokenGrid& grid, TokenPos pos, std::size_t h_w);

// One token per surrounding line, ordered -1, +1, -2, +2, ...: the token whose
// last character column is closest to the target's (ties to the smaller column).
std::vector<NeighborRef> vertical_context(const TokenGrid& grid, TokenPos pos, std::size_t v_w);

struct SamplePosition {
  std::size_t doc = 0;
  std::size_t line = 0;
  std::size_t idx = 0;
};

// A training/inference example as token ids into SampleSet::vocab; -1 is padding.
struct ContextSample {
  std::int32_t target = -1;
  std::span<const std::int32_t> h_ctx;
  std::span<const std::int32_t> v_ctx;
  SamplePosition position;
};

// Fully materialized one-hot form of a sample.
struct EncodedSample {
  nn::Tensor target;             // [l_t, d]
  std::vector<nn::Tensor> h_ctx;  // h_w - 1 of [l_t, d]
  std::vector<nn::Tensor> v_ctx;  // v_w - 1 of [l_t, d]
  std::vector<bool> h_padding;
  std::vector<bool> v_padding;
};

// Samples for one or more documents. Token texts are interned, so a corpus of
// ~200K tokens costs a few ints per slot instead of l_t x d matrices.
class SampleSet {
 public:
  explicit SampleSet(WindowConfig cfg = {});

  // Adds one sample per token of `grid`, in grid order.
  void append(const TokenGrid& grid, std::size_t doc_id);

  // Copies sample `i` of `other` (which may use a different vocabulary).
  void append_sample(const SampleSet& other, std::size_t i);

  const WindowConfig& config() const { return cfg_; }
  std::size_t size() const { return positions_.size(); }
  bool empty() const { return positions_.empty(); }
  std::size_t h_slots() const { return cfg_.h_w - 1; }
  std::size_t v_slots() const { return cfg_.v_w - 1; }
  std::size_t stride() const { return 1 + h_slots() + v_slots(); }

  ContextSample operator[](std::size_t i) const;
  const SamplePosition& position(std::size_t i) const { return positions_.at(i); }
  const std::string& target_text(std::size_t i) const;

  const std::vector<std::string>& vocab() const { return vocab_; }
  std::span<const std::int32_t> slots(std::size_t i) const;

  EncodedSample encode(std::size_t i, const CharCodec& codec) const;

 private:
  std::int32_t intern(const std::string& text);

  WindowConfig cfg_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::int32_t> vocab_index_;
  std::vector<std::int32_t> ids_;
  std::vector<SamplePosition> positions_;
};

SampleSet build_samples(const TokenGrid& grid, const WindowConfig& cfg);

}  // namespace sc2t
