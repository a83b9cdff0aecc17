#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sc2t/nn/tensor.hpp"

namespace sc2t {

struct Token {
  std::string text;  // UTF-8, no whitespace
  std::size_t line_idx = 0;
  std::size_t start_col = 0;  // columns count code points after tab expansion
  std::size_t end_col = 0;    // column of the last character

  friend bool operator==(const Token&, const Token&) = default;
};

struct TokenGrid {
  std::vector<std::vector<Token>> lines;
  std::vector<std::string> raw_lines;

  std::size_t line_count() const { return lines.size(); }
  std::size_t token_count() const;
  const Token& at(std::size_t line, std::size_t idx) const { return lines.at(line).at(idx); }
};

// Splits on '\n' (a trailing newline does not start a new line), drops '\r',
// expands tabs to 8-column stops and splits each line on whitespace runs.
TokenGrid tokenize_document(std::string_view raw_text);

// Places each token at its column span; spaces elsewhere, no trailing blanks.
std::string render_line(const std::vector<Token>& tokens);
std::string render_grid(const TokenGrid& grid);

// Code points of a UTF-8 string. Invalid bytes decode to U+FFFD.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

// Fixed character alphabet with one-hot encoding and left padding.
class CharCodec {
 public:
  // The default 78-slot alphabet: space, digits, a-z, A-Z, 14 punctuation
  // marks and a final out-of-alphabet slot.
  CharCodec();
  // `alphabet` must contain the space; an OOV slot is appended after it.
  explicit CharCodec(std::u32string alphabet);

  std::size_t size() const { return alphabet_.size() + 1; }  // d
  std::size_t oov_index() const { return alphabet_.size(); }
  std::size_t space_index() const { return space_index_; }
  const std::u32string& alphabet() const { return alphabet_; }

  std::size_t index_of(char32_t c) const;
  // Character for an index; the OOV slot decodes to '?'.
  char32_t char_at(std::size_t index) const;

  // Row indices of the l_t x d one-hot encoding (suffix kept, left-padded with spaces).
  std::vector<std::int32_t> encode_indices(std::string_view text, std::size_t max_len) const;
  void encode_indices(std::string_view text, std::size_t max_len, std::int32_t* out) const;

  // One-hot matrix of shape [max_len, d].
  nn::Tensor encode(std::string_view text, std::size_t max_len) const;

  // Row-wise argmax (lowest index wins ties), then leading spaces stripped.
  std::string decode(const nn::Tensor& scores) const;

  friend bool operator==(const CharCodec& a, const CharCodec& b) { return a.alphabet_ == b.alphabet_; }

 private:
  std::u32string alphabet_;
  std::size_t space_index_ = 0;
  std::array<std::int16_t, 128> ascii_{};
};

}  // namespace sc2t
