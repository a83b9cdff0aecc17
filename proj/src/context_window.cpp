#include "sc2t/context_window.hpp"

#include <algorithm>
#include <cstdlib>

#include "sc2t/error.hpp"

namespace sc2t {

namespace {

void check_window(std::size_t w, const char* name) {
  if (w == 0 || w % 2 == 0) throw InvalidArgument(std::string(name) + " must be odd and >= 1");
}

void check_pos(const TokenGrid& grid, TokenPos pos) {
  if (pos.line >= grid.lines.size() || pos.idx >= grid.lines[pos.line].size()) {
    throw InvalidArgument("no token at line " + std::to_string(pos.line) + ", index " + std::to_string(pos.idx));
  }
}

NeighborRef closest_on_line(const TokenGrid& grid, std::ptrdiff_t line, std::size_t end_col) {
  if (line < 0 || line >= static_cast<std::ptrdiff_t>(grid.lines.size())) return std::nullopt;
  const auto& tokens = grid.lines[static_cast<std::size_t>(line)];
  if (tokens.empty()) return std::nullopt;
  // Tokens are sorted by end_col; the best is at the first end >= target or just before it.
  auto it = std::lower_bound(tokens.begin(), tokens.end(), end_col,
                             [](const Token& t, std::size_t col) { return t.end_col < col; });
  std::size_t best = static_cast<std::size_t>(it - tokens.begin());
  if (best == tokens.size()) {
    best = tokens.size() - 1;
  } else if (best > 0) {
    const std::size_t above = tokens[best].end_col - end_col;
    const std::size_t below = end_col - tokens[best - 1].end_col;
    if (below <= above) --best;
  }
  return TokenPos{static_cast<std::size_t>(line), best};
}

}  // namespace

void WindowConfig::validate() const {
  check_window(h_w, "h_w");
  check_window(v_w, "v_w");
  if (l_t == 0) throw InvalidArgument("l_t must be >= 1");
}

std::vector<NeighborRef> horizontal_context(const TokenGrid& grid, TokenPos pos, std::size_t h_w) {
  check_window(h_w, "h_w");
  check_pos(grid, pos);
  const std::size_t half = h_w / 2;
  const auto n = static_cast<std::ptrdiff_t>(grid.lines[pos.line].size());
  const auto center = static_cast<std::ptrdiff_t>(pos.idx);
  std::vector<NeighborRef> out;
  out.reserve(h_w - 1);
  auto push = [&](std::ptrdiff_t j) {
    if (j >= 0 && j < n) {
      out.emplace_back(TokenPos{pos.line, static_cast<std::size_t>(j)});
    } else {
      out.emplace_back(std::nullopt);
    }
  };
  for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(half); k >= 1; --k) push(center - k);
  for (std::ptrdiff_t k = 1; k <= static_cast<std::ptrdiff_t>(half); ++k) push(center + k);
  return out;
}

std::vector<NeighborRef> vertical_context(const TokenGrid& grid, TokenPos pos, std::size_t v_w) {
  check_window(v_w, "v_w");
  check_pos(grid, pos);
  const std::size_t end_col = grid.lines[pos.line][pos.idx].end_col;
  const auto line = static_cast<std::ptrdiff_t>(pos.line);
  std::vector<NeighborRef> out;
  out.reserve(v_w - 1);
  for (std::ptrdiff_t k = 1; k <= static_cast<std::ptrdiff_t>(v_w / 2); ++k) {
    out.push_back(closest_on_line(grid, line - k, end_col));
    out.push_back(closest_on_line(grid, line + k, end_col));
  }
  return out;
}

SampleSet::SampleSet(WindowConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::int32_t SampleSet::intern(const std::string& text) {
  auto [it, inserted] = vocab_index_.try_emplace(text, static_cast<std::int32_t>(vocab_.size()));
  if (inserted) vocab_.push_back(text);
  return it->second;
}

void SampleSet::append(const TokenGrid& grid, std::size_t doc_id) {
  for (std::size_t l = 0; l < grid.lines.size(); ++l) {
    for (std::size_t i = 0; i < grid.lines[l].size(); ++i) {
      const TokenPos pos{l, i};
      ids_.push_back(intern(grid.lines[l][i].text));
      for (const auto& ref : horizontal_context(grid, pos, cfg_.h_w)) {
        ids_.push_back(ref ? intern(grid.at(ref->line, ref->idx).text) : -1);
      }
      for (const auto& ref : vertical_context(grid, pos, cfg_.v_w)) {
        ids_.push_back(ref ? intern(grid.at(ref->line, ref->idx).text) : -1);
      }
      positions_.push_back(SamplePosition{doc_id, l, i});
    }
  }
}

void SampleSet::append_sample(const SampleSet& other, std::size_t i) {
  if (other.cfg_.h_w != cfg_.h_w || other.cfg_.v_w != cfg_.v_w) {
    throw InvalidArgument("cannot mix samples with different window sizes");
  }
  for (std::int32_t id : other.slots(i)) ids_.push_back(id < 0 ? -1 : intern(other.vocab_[static_cast<std::size_t>(id)]));
  positions_.push_back(other.positions_.at(i));
}

std::span<const std::int32_t> SampleSet::slots(std::size_t i) const {
  if (i >= positions_.size()) throw InvalidArgument("sample index out of range");
  return std::span<const std::int32_t>(ids_).subspan(i * stride(), stride());
}

ContextSample SampleSet::operator[](std::size_t i) const {
  const auto s = slots(i);
  return ContextSample{s[0], s.subspan(1, h_slots()), s.subspan(1 + h_slots(), v_slots()), positions_[i]};
}

const std::string& SampleSet::target_text(std::size_t i) const {
  return vocab_[static_cast<std::size_t>(slots(i)[0])];
}

EncodedSample SampleSet::encode(std::size_t i, const CharCodec& codec) const {
  const ContextSample s = (*this)[i];
  EncodedSample e;
  auto enc = [&](std::int32_t id) {
    if (id < 0) return nn::Tensor({cfg_.l_t, codec.size()});
    return codec.encode(vocab_[static_cast<std::size_t>(id)], cfg_.l_t);
  };
  e.target = enc(s.target);
  for (auto id : s.h_ctx) {
    e.h_ctx.push_back(enc(id));
    e.h_padding.push_back(id < 0);
  }
  for (auto id : s.v_ctx) {
    e.v_ctx.push_back(enc(id));
    e.v_padding.push_back(id < 0);
  }
  return e;
}

SampleSet build_samples(const TokenGrid& grid, const WindowConfig& cfg) {
  SampleSet set(cfg);
  set.append(grid, 0);
  return set;
}

}  // namespace sc2t
