#pragma once

#include <span>
#include <string>
#include <vector>

#include "sc2t/nn/tensor.hpp"
#include "sc2t/text_grid.hpp"

namespace sc2t {

// Line with the most tokens among `table_lines` (ties: smallest index).
std::size_t select_reference_line(std::span<const std::size_t> table_lines, const TokenGrid& grid);

// Strictly increasing map of the m rows of `line_embs` onto the n rows of
// `ref_embs` minimizing the summed Euclidean distance; among optimal maps the
// lexicographically smallest is returned.
std::vector<std::size_t> align_line(const nn::Tensor& line_embs, const nn::Tensor& ref_embs);

// Same, on a precomputed m x n cost matrix (row-major).
std::vector<std::size_t> align_costs(std::span<const double> costs, std::size_t m, std::size_t n);

struct AlignmentResult {
  std::size_t reference_line = 0;
  std::size_t columns = 0;
  std::vector<std::size_t> table_lines;
  std::vector<std::vector<std::size_t>> mapping;  // per table line: token idx -> column
  std::vector<std::size_t> truncated_lines;       // lines with more tokens than the reference
  std::string text;
  std::string cells_tsv;
};

// Aligns every table line against the reference line. `token_embeddings`
// holds one row per token of `grid` in grid order. Lines longer than the
// reference keep only their first n tokens when `truncate_long_lines` is set
// and raise InvalidArgument otherwise.
AlignmentResult realign_table(const TokenGrid& grid, const nn::Tensor& token_embeddings,
                              std::span<const std::size_t> table_lines, bool truncate_long_lines = false);

// Fixed-width table: each column is as wide as its widest token plus one
// space; unmatched cells stay blank; other lines are copied unchanged.
std::string render_table(const TokenGrid& grid, std::span<const std::size_t> table_lines,
                         const std::vector<std::vector<std::size_t>>& mapping, std::size_t columns);

// Tab-separated cell matrix of the table lines, empty strings for blank cells.
std::string render_cells_tsv(const TokenGrid& grid, std::span<const std::size_t> table_lines,
                             const std::vector<std::vector<std::size_t>>& mapping, std::size_t columns);

}  // namespace sc2t
