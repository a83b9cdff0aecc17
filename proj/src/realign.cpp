#include "sc2t/realign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sc2t/error.hpp"

namespace sc2t {

std::size_t select_reference_line(std::span<const std::size_t> table_lines, const TokenGrid& grid) {
  if (table_lines.empty()) throw InvalidArgument("no table lines to choose a reference from");
  std::size_t best = table_lines[0];
  for (std::size_t l : table_lines) {
    if (l >= grid.lines.size()) throw InvalidArgument("table line index out of range");
    const std::size_t n = grid.lines[l].size(), nb = grid.lines[best].size();
    if (n > nb || (n == nb && l < best)) best = l;
  }
  return best;
}

std::vector<std::size_t> align_costs(std::span<const double> costs, std::size_t m, std::size_t n) {
  if (m > n) {
    throw InvalidArgument("line has " + std::to_string(m) + " tokens but the reference has only " + std::to_string(n));
  }
  if (costs.size() != m * n) throw InvalidArgument("cost matrix size mismatch");
  // best[i][j]: cheapest map of tokens i.. onto columns j.. (infinite when infeasible).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best((m + 1) * (n + 1), inf);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return best[i * (n + 1) + j]; };
  for (std::size_t j = 0; j <= n; ++j) at(m, j) = 0.0;
  for (std::size_t i = m; i-- > 0;) {
    for (std::size_t j = n; j-- > 0;) {
      if (n - j < m - i) continue;
      const double take = costs[i * n + j] + at(i + 1, j + 1);
      at(i, j) = std::min(at(i, j + 1), take);
    }
  }
  std::vector<std::size_t> out(m);
  std::size_t j = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double target = at(i, j);
    const double slack = 1e-12 * (1.0 + std::abs(target));
    for (std::size_t c = j; c + (m - i) <= n; ++c) {
      if (costs[i * n + c] + at(i + 1, c + 1) <= target + slack) {
        out[i] = c;
        j = c + 1;
        break;
      }
    }
  }
  return out;
}

std::vector<std::size_t> align_line(const nn::Tensor& line_embs, const nn::Tensor& ref_embs) {
  if (line_embs.rank() != 2 || ref_embs.rank() != 2 || (line_embs.dim(0) && line_embs.dim(1) != ref_embs.dim(1))) {
    throw InvalidArgument("align_line expects [m, dim] and [n, dim] embeddings");
  }
  const std::size_t m = line_embs.dim(0), n = ref_embs.dim(0), dim = ref_embs.dim(1);
  if (m > n) {
    throw InvalidArgument("line has " + std::to_string(m) + " tokens but the reference has only " + std::to_string(n));
  }
  std::vector<double> costs(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double d = line_embs.at(i, k) - ref_embs.at(j, k);
        s += d * d;
      }
      costs[i * n + j] = std::sqrt(s);
    }
  }
  return align_costs(costs, m, n);
}

AlignmentResult realign_table(const TokenGrid& grid, const nn::Tensor& token_embeddings,
                              std::span<const std::size_t> table_lines, bool truncate_long_lines) {
  if (token_embeddings.rank() != 2 || token_embeddings.dim(0) != grid.token_count()) {
    throw InvalidArgument("need one embedding row per token");
  }
  const std::size_t dim = token_embeddings.dim(1);
  std::vector<std::size_t> first_row(grid.lines.size() + 1, 0);
  for (std::size_t l = 0; l < grid.lines.size(); ++l) first_row[l + 1] = first_row[l] + grid.lines[l].size();
  auto rows_of = [&](std::size_t line, std::size_t count) {
    nn::Tensor t({count, dim});
    std::copy_n(token_embeddings.data().data() + first_row[line] * dim, count * dim, t.data().data());
    return t;
  };

  AlignmentResult res;
  res.table_lines.assign(table_lines.begin(), table_lines.end());
  std::sort(res.table_lines.begin(), res.table_lines.end());
  res.reference_line = select_reference_line(res.table_lines, grid);
  res.columns = grid.lines[res.reference_line].size();
  const nn::Tensor ref = rows_of(res.reference_line, res.columns);
  for (std::size_t l : res.table_lines) {
    std::size_t m = grid.lines[l].size();
    if (m > res.columns) {
      if (!truncate_long_lines) {
        throw InvalidArgument("line " + std::to_string(l) + " is longer than the reference line");
      }
      res.truncated_lines.push_back(l);
      m = res.columns;
    }
    res.mapping.push_back(l == res.reference_line ? [&] {
      std::vector<std::size_t> id(m);
      for (std::size_t i = 0; i < m; ++i) id[i] = i;
      return id;
    }()
                                                  : align_line(rows_of(l, m), ref));
  }
  res.text = render_table(grid, res.table_lines, res.mapping, res.columns);
  res.cells_tsv = render_cells_tsv(grid, res.table_lines, res.mapping, res.columns);
  return res;
}

namespace {

std::vector<std::vector<std::string>> cell_matrix(const TokenGrid& grid, std::span<const std::size_t> table_lines,
                                                  const std::vector<std::vector<std::size_t>>& mapping,
                                                  std::size_t columns) {
  if (mapping.size() != table_lines.size()) throw InvalidArgument("one mapping per table line is required");
  std::vector<std::vector<std::string>> cells(table_lines.size(), std::vector<std::string>(columns));
  for (std::size_t r = 0; r < table_lines.size(); ++r) {
    const auto& tokens = grid.lines.at(table_lines[r]);
    for (std::size_t i = 0; i < mapping[r].size(); ++i) {
      const std::size_t c = mapping[r][i];
      if (c >= columns) throw InvalidArgument("mapped column out of range");
      if (i > 0 && c <= mapping[r][i - 1]) throw InvalidArgument("mapping must be strictly increasing");
      cells[r][c] = tokens.at(i).text;
    }
  }
  return cells;
}

}  // namespace

std::string render_table(const TokenGrid& grid, std::span<const std::size_t> table_lines,
                         const std::vector<std::vector<std::size_t>>& mapping, std::size_t columns) {
  const auto cells = cell_matrix(grid, table_lines, mapping, columns);
  std::vector<std::size_t> width(columns, 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < columns; ++c) width[c] = std::max(width[c], utf8_decode(row[c]).size());
  }
  std::vector<long> row_of(grid.lines.size(), -1);
  for (std::size_t r = 0; r < table_lines.size(); ++r) row_of.at(table_lines[r]) = static_cast<long>(r);

  std::string out;
  for (std::size_t l = 0; l < grid.lines.size(); ++l) {
    if (row_of[l] < 0) {
      std::string raw = grid.raw_lines[l];
      raw.erase(raw.find_last_not_of(' ') + 1);
      out += raw;
    } else {
      std::string line;
      const auto& row = cells[static_cast<std::size_t>(row_of[l])];
      for (std::size_t c = 0; c < columns; ++c) {
        line += row[c];
        line.append(width[c] + 1 - utf8_decode(row[c]).size(), ' ');
      }
      line.erase(line.find_last_not_of(' ') + 1);
      out += line;
    }
    out += '\n';
  }
  return out;
}

std::string render_cells_tsv(const TokenGrid& grid, std::span<const std::size_t> table_lines,
                             const std::vector<std::vector<std::size_t>>& mapping, std::size_t columns) {
  const auto cells = cell_matrix(grid, table_lines, mapping, columns);
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < columns; ++c) {
      if (c) out += '\t';
      out += row[c];
    }
    out += '\n';
  }
  return out;
}

}  // namespace sc2t
