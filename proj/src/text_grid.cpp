#include "sc2t/text_grid.hpp"

#include <algorithm>

#include "sc2t/error.hpp"

namespace sc2t {

namespace {

constexpr std::size_t kTabStop = 8;

bool is_blank(char32_t c) { return c == U' ' || c == U'\t' || c == U'\v' || c == U'\f' || c == U'\r'; }

const std::u32string& default_alphabet() {
  static const std::u32string alphabet = [] {
    std::u32string a = U" ";
    for (char32_t c = U'0'; c <= U'9'; ++c) a += c;
    for (char32_t c = U'a'; c <= U'z'; ++c) a += c;
    for (char32_t c = U'A'; c <= U'Z'; ++c) a += c;
    a += U".,:;/-_()+#'\"&";
    return a;
  }();
  return alphabet;
}

}  // namespace

std::size_t TokenGrid::token_count() const {
  std::size_t n = 0;
  for (const auto& l : lines) n += l.size();
  return n;
}

std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b < 0x80) {
      len = 1;
      cp = b;
    } else if ((b & 0xe0) == 0xc0) {
      len = 2;
      cp = b & 0x1f;
    } else if ((b & 0xf0) == 0xe0) {
      len = 3;
      cp = b & 0x0f;
    } else if ((b & 0xf8) == 0xf0) {
      len = 4;
      cp = b & 0x07;
    }
    bool ok = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto cb = static_cast<unsigned char>(s[i + k]);
      if ((cb & 0xc0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (cb & 0x3f);
      }
    }
    if (!ok) {
      out += U'�';
      ++i;
    } else {
      out += cp;
      i += len;
    }
  }
  return out;
}

std::string utf8_encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) {
    if (c < 0x80) {
      out += static_cast<char>(c);
    } else if (c < 0x800) {
      out += static_cast<char>(0xc0 | (c >> 6));
      out += static_cast<char>(0x80 | (c & 0x3f));
    } else if (c < 0x10000) {
      out += static_cast<char>(0xe0 | (c >> 12));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3f));
      out += static_cast<char>(0x80 | (c & 0x3f));
    } else {
      out += static_cast<char>(0xf0 | (c >> 18));
      out += static_cast<char>(0x80 | ((c >> 12) & 0x3f));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3f));
      out += static_cast<char>(0x80 | (c & 0x3f));
    }
  }
  return out;
}

TokenGrid tokenize_document(std::string_view raw_text) {
  TokenGrid grid;
  std::size_t pos = 0;
  while (pos < raw_text.size()) {
    std::size_t nl = raw_text.find('\n', pos);
    if (nl == std::string_view::npos) nl = raw_text.size();
    std::string_view raw = raw_text.substr(pos, nl - pos);
    pos = nl + 1;

    // Expand tabs and drop carriage returns.
    std::u32string line;
    for (char32_t c : utf8_decode(raw)) {
      if (c == U'\r') continue;
      if (c == U'\t') {
        line.append(kTabStop - line.size() % kTabStop, U' ');
      } else {
        line += c;
      }
    }

    const std::size_t line_idx = grid.lines.size();
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && is_blank(line[i])) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && !is_blank(line[j])) ++j;
      tokens.push_back(Token{utf8_encode(std::u32string_view(line).substr(i, j - i)), line_idx, i, j - 1});
      i = j;
    }
    grid.lines.push_back(std::move(tokens));
    grid.raw_lines.push_back(utf8_encode(line));
  }
  return grid;
}

std::string render_line(const std::vector<Token>& tokens) {
  std::u32string out;
  for (const Token& t : tokens) {
    if (out.size() < t.start_col) out.append(t.start_col - out.size(), U' ');
    out += utf8_decode(t.text);
  }
  return utf8_encode(out);
}

std::string render_grid(const TokenGrid& grid) {
  std::string out;
  for (const auto& line : grid.lines) {
    out += render_line(line);
    out += '\n';
  }
  return out;
}

CharCodec::CharCodec() : CharCodec(default_alphabet()) {}

CharCodec::CharCodec(std::u32string alphabet) : alphabet_(std::move(alphabet)) {
  ascii_.fill(-1);
  if (alphabet_.empty()) throw InvalidArgument("alphabet must not be empty");
  const auto space = alphabet_.find(U' ');
  if (space == std::u32string::npos) throw InvalidArgument("alphabet must contain the blank space");
  space_index_ = space;
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    if (alphabet_.find(alphabet_[i]) != i) throw InvalidArgument("alphabet characters must be distinct");
    if (alphabet_[i] < 128) ascii_[alphabet_[i]] = static_cast<std::int16_t>(i);
  }
}

std::size_t CharCodec::index_of(char32_t c) const {
  if (c < 128) {
    const auto v = ascii_[c];
    return v < 0 ? oov_index() : static_cast<std::size_t>(v);
  }
  const auto p = alphabet_.find(c);
  return p == std::u32string::npos ? oov_index() : p;
}

char32_t CharCodec::char_at(std::size_t index) const {
  if (index < alphabet_.size()) return alphabet_[index];
  if (index == oov_index()) return U'?';
  throw InvalidArgument("character index out of range");
}

void CharCodec::encode_indices(std::string_view text, std::size_t max_len, std::int32_t* out) const {
  if (max_len == 0) throw InvalidArgument("max token length must be >= 1");
  const std::u32string cps = utf8_decode(text);
  const std::size_t keep = std::min(cps.size(), max_len);
  const std::size_t pad = max_len - keep;
  for (std::size_t r = 0; r < pad; ++r) out[r] = static_cast<std::int32_t>(space_index_);
  for (std::size_t r = 0; r < keep; ++r) {
    out[pad + r] = static_cast<std::int32_t>(index_of(cps[cps.size() - keep + r]));
  }
}

std::vector<std::int32_t> CharCodec::encode_indices(std::string_view text, std::size_t max_len) const {
  std::vector<std::int32_t> out(max_len);
  encode_indices(text, max_len, out.data());
  return out;
}

nn::Tensor CharCodec::encode(std::string_view text, std::size_t max_len) const {
  const auto idx = encode_indices(text, max_len);
  nn::Tensor m({max_len, size()});
  for (std::size_t r = 0; r < max_len; ++r) m.at(r, static_cast<std::size_t>(idx[r])) = 1.0;
  return m;
}

std::string CharCodec::decode(const nn::Tensor& scores) const {
  if (scores.rank() != 2 || scores.dim(1) != size()) {
    throw InvalidArgument("decode expects [l_t, " + std::to_string(size()) + "] scores, got " +
                          nn::shape_string(scores.shape()));
  }
  std::u32string out;
  for (std::size_t r = 0; r < scores.dim(0); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < size(); ++c) {
      if (scores.at(r, c) > scores.at(r, best)) best = c;
    }
    out += char_at(best);
  }
  const auto first = out.find_first_not_of(U' ');
  return first == std::u32string::npos ? std::string() : utf8_encode(std::u32string_view(out).substr(first));
}

}  // namespace sc2t
