#include "sc2t/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string_view>
#include <unordered_set>

#include "sc2t/error.hpp"
#include "sc2t/parallel.hpp"
#include "sc2t/rng.hpp"

namespace sc2t {

using nn::RowMatrix;
using nn::Tensor;

namespace {

constexpr std::size_t kAssignChunk = 4096;

void check_points(const Tensor& points) {
  if (points.rank() != 2) throw InvalidArgument("points must be an [N, dim] tensor");
  nn::require_finite(points, "clustering input");
}

double row_sq_dist(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

void cluster_means(const Tensor& points, const std::vector<std::uint32_t>& assign, Tensor& means,
                   std::vector<std::size_t>& counts) {
  const std::size_t n = points.dim(0), dim = points.dim(1), k = means.dim(0);
  means.fill(0.0);
  std::fill(counts.begin(), counts.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++counts[assign[i]];
    double* dst = means.data().data() + assign[i] * dim;
    const double* src = points.data().data() + i * dim;
    for (std::size_t j = 0; j < dim; ++j) dst[j] += src[j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    double* dst = means.data().data() + c * dim;
    const double inv = 1.0 / static_cast<double>(counts[c]);
    for (std::size_t j = 0; j < dim; ++j) dst[j] *= inv;
  }
}

// One sweep of single-point transfers that lower the sum of squares
// (Hartigan's rule), updating the two affected means after each move.
// Candidates come from distances to the means at the start of each chunk and
// are confirmed against the current means.
std::size_t hartigan_moves(const Tensor& points, Tensor& means, std::vector<std::uint32_t>& assign,
                           std::vector<std::size_t>& counts) {
  const std::size_t n = points.dim(0), dim = points.dim(1), k = means.dim(0);
  const auto x = points.matrix();
  auto c = means.matrix();
  Eigen::VectorXd c_norm = c.rowwise().squaredNorm();
  RowMatrix cross;
  std::size_t moves = 0;
  for (std::size_t b = 0; b < n; b += kAssignChunk) {
    const std::size_t e = std::min(n, b + kAssignChunk);
    cross.noalias() = x.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)) * c.transpose();
    for (std::size_t i = b; i < e; ++i) {
      const std::uint32_t from = assign[i];
      if (counts[from] < 2) continue;
      const double* xi = points.data().data() + i * dim;
      const auto row = cross.row(static_cast<Eigen::Index>(i - b));
      std::uint32_t to = from;
      double best = std::numeric_limits<double>::infinity();
      for (std::uint32_t j = 0; j < k; ++j) {
        if (j == from) continue;
        const double nj = static_cast<double>(counts[j]);
        const double v = nj / (nj + 1.0) * (c_norm[j] - 2.0 * row[j]);
        if (v < best) {
          best = v;
          to = j;
        }
      }
      if (to == from) continue;
      double* cf = means.data().data() + from * dim;
      double* ct = means.data().data() + to * dim;
      const double nf = static_cast<double>(counts[from]), nt = static_cast<double>(counts[to]);
      const double df = row_sq_dist(xi, cf, dim), dt = row_sq_dist(xi, ct, dim);
      const double delta = nt / (nt + 1.0) * dt - nf / (nf - 1.0) * df;
      if (!(delta < -1e-12 * (df + dt))) continue;
      for (std::size_t j = 0; j < dim; ++j) {
        cf[j] = (nf * cf[j] - xi[j]) / (nf - 1.0);
        ct[j] = (nt * ct[j] + xi[j]) / (nt + 1.0);
      }
      --counts[from];
      ++counts[to];
      assign[i] = to;
      c_norm[from] = c.row(from).squaredNorm();
      c_norm[to] = c.row(to).squaredNorm();
      ++moves;
    }
  }
  return moves;
}

}  // namespace

std::size_t count_distinct_rows(const Tensor& points, std::size_t cap) {
  const std::size_t n = points.dim(0), dim = points.dim(1);
  std::unordered_set<std::string_view> seen;
  const char* base = reinterpret_cast<const char*>(points.data().data());
  for (std::size_t i = 0; i < n && seen.size() < cap; ++i) {
    seen.emplace(base + i * dim * sizeof(double), dim * sizeof(double));
  }
  return seen.size();
}

std::vector<std::uint32_t> assign_nearest(const Tensor& points, const Tensor& centroids, std::vector<double>* sq_dist,
                                          std::size_t threads) {
  const std::size_t n = points.dim(0), k = centroids.dim(0), dim = points.dim(1);
  const auto c = centroids.matrix();
  const Eigen::RowVectorXd c_norm = c.rowwise().squaredNorm().transpose();
  std::vector<std::uint32_t> out(n);
  if (sq_dist) sq_dist->assign(n, 0.0);

  parallel_chunks((n + kAssignChunk - 1) / kAssignChunk, threads, [&](std::size_t cb, std::size_t ce) {
    RowMatrix cross;
    for (std::size_t chunk = cb; chunk < ce; ++chunk) {
      const std::size_t b = chunk * kAssignChunk, e = std::min(n, b + kAssignChunk);
      auto x = points.matrix().middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b));
      // |x - c|^2 = |x|^2 - 2 x.c + |c|^2; |x|^2 is constant per row, so rank by |c|^2 - 2 x.c.
      cross.noalias() = x * c.transpose();
      for (std::size_t i = b; i < e; ++i) {
        const auto row = cross.row(static_cast<Eigen::Index>(i - b));
        std::uint32_t best = 0;
        double best_v = c_norm[0] - 2.0 * row[0];
        for (std::size_t j = 1; j < k; ++j) {
          const double v = c_norm[static_cast<Eigen::Index>(j)] - 2.0 * row[static_cast<Eigen::Index>(j)];
          if (v < best_v) {
            best_v = v;
            best = static_cast<std::uint32_t>(j);
          }
        }
        out[i] = best;
        if (sq_dist) {
          (*sq_dist)[i] = row_sq_dist(points.data().data() + i * dim, centroids.data().data() + best * dim, dim);
        }
      }
    }
  });
  return out;
}

ClusterAssignment kmeans_pp(const Tensor& points, std::size_t k, std::uint64_t seed, const KMeansOptions& opt) {
  check_points(points);
  if (k == 0) throw InvalidArgument("k must be >= 1");
  const std::size_t n = points.dim(0), dim = points.dim(1);
  if (count_distinct_rows(points, k) < k) {
    throw InvalidArgument("k = " + std::to_string(k) + " exceeds the number of distinct points");
  }
  const double* data = points.data().data();
  Rng rng(seed);

  // D^2 seeding; with several local trials the candidate that lowers the
  // potential most is kept (the greedy variant used by scikit-learn).
  const std::size_t trials =
      opt.local_trials ? opt.local_trials : 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  Tensor centroids({k, dim});
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  const auto pts = points.matrix();
  const Eigen::VectorXd pt_norm = trials > 1 ? Eigen::VectorXd(pts.rowwise().squaredNorm()) : Eigen::VectorXd();
  auto draw = [&](double total) {
    double target = rng.uniform() * total;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      target -= d2[i];
      if (target < 0.0) return i;
    }
    // Rounding left the draw past the end: take the last point with positive weight.
    for (std::size_t i = n; i-- > 0;) {
      if (d2[i] > 0.0) return i;
    }
    return n;
  };
  std::size_t chosen = rng.below(n);
  RowMatrix cand, cross;
  std::vector<std::size_t> ids;
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(data + chosen * dim, dim, centroids.data().data() + c * dim);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], row_sq_dist(data + i * dim, data + chosen * dim, dim));
      total += d2[i];
    }
    if (c + 1 == k) break;
    if (trials == 1) {
      chosen = draw(total);
      continue;
    }
    ids.clear();
    for (std::size_t t = 0; t < trials; ++t) ids.push_back(draw(total));
    cand.resize(static_cast<Eigen::Index>(trials), static_cast<Eigen::Index>(dim));
    for (std::size_t t = 0; t < trials; ++t) cand.row(static_cast<Eigen::Index>(t)) = pts.row(static_cast<Eigen::Index>(ids[t]));
    const Eigen::VectorXd cand_norm = cand.rowwise().squaredNorm();
    std::vector<double> potential(trials, 0.0);
    for (std::size_t b = 0; b < n; b += kAssignChunk) {
      const std::size_t e = std::min(n, b + kAssignChunk);
      cross.noalias() = pts.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)) * cand.transpose();
      for (std::size_t i = b; i < e; ++i) {
        for (std::size_t t = 0; t < trials; ++t) {
          const double d = std::max(0.0, pt_norm[static_cast<Eigen::Index>(i)] + cand_norm[static_cast<Eigen::Index>(t)] -
                                             2.0 * cross(static_cast<Eigen::Index>(i - b), static_cast<Eigen::Index>(t)));
          potential[t] += std::min(d2[i], d);
        }
      }
    }
    chosen = ids[static_cast<std::size_t>(std::min_element(potential.begin(), potential.end()) - potential.begin())];
  }

  ClusterAssignment res;
  std::vector<double> dist;
  Tensor next({k, dim});
  std::vector<std::size_t> counts(k);
  const std::size_t max_iters = std::max<std::size_t>(opt.max_iters, 1);
  std::size_t iter = 0;
  while (true) {
    for (; iter < max_iters; ++iter) {
      res.assignment = assign_nearest(points, centroids, &dist, opt.threads);
      double inertia = 0.0;
      for (double v : dist) inertia += v;
      res.inertia_history.push_back(inertia);
      res.iterations = iter + 1;

      cluster_means(points, res.assignment, next, counts);
      // Empty clusters restart at the point currently farthest from its centroid.
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] != 0) continue;
        const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy_n(data + far * dim, dim, next.data().data() + c * dim);
        dist[far] = 0.0;
      }

      double shift = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        shift = std::max(shift, row_sq_dist(next.data().data() + c * dim, centroids.data().data() + c * dim, dim));
      }
      std::swap(centroids, next);
      if (std::sqrt(shift) < opt.tol) {
        ++iter;
        break;
      }
    }
    res.assignment = assign_nearest(points, centroids, &dist, opt.threads);
    if (!opt.hartigan || iter >= max_iters) break;
    cluster_means(points, res.assignment, centroids, counts);
    if (std::find(counts.begin(), counts.end(), 0) != counts.end()) break;
    if (hartigan_moves(points, centroids, res.assignment, counts) == 0) break;
    cluster_means(points, res.assignment, centroids, counts);
  }

  res.inertia = 0.0;
  for (double v : dist) res.inertia += v;
  res.centroids = std::move(centroids);
  return res;
}

HomogeneityDetail homogeneity_detail(std::span<const std::uint32_t> assignment, std::span<const std::string> labels) {
  if (assignment.size() != labels.size()) throw InvalidArgument("labels must cover every point");
  std::uint32_t k = 0;
  for (auto a : assignment) k = std::max(k, a + 1);
  std::vector<std::map<std::string_view, std::size_t>> counts(k);
  for (std::size_t i = 0; i < assignment.size(); ++i) ++counts[assignment[i]][labels[i]];

  HomogeneityDetail out;
  out.majority.resize(k);
  out.cluster_size.resize(k);
  long double sum = 0.0L;  // extended precision, so simple fractions round like their exact value
  for (std::uint32_t c = 0; c < k; ++c) {
    std::size_t total = 0, best = 0;
    // std::map iterates labels in lexicographic order, so '>' keeps the smallest on ties.
    for (const auto& [label, count] : counts[c]) {
      total += count;
      if (count > best) {
        best = count;
        out.majority[c] = std::string(label);
      }
    }
    out.cluster_size[c] = total;
    if (total == 0) continue;
    sum += static_cast<long double>(best) / static_cast<long double>(total);
    ++out.clusters;
  }
  out.h = out.clusters ? static_cast<double>(sum / static_cast<long double>(out.clusters)) : 0.0;
  return out;
}

double homogeneity(std::span<const std::uint32_t> assignment, std::span<const std::string> labels) {
  return homogeneity_detail(assignment, labels).h;
}

double homogeneity(const ClusterAssignment& assign, std::span<const std::string> labels) {
  return homogeneity(assign.assignment, labels);
}

std::vector<ProtocolRow> evaluate_protocol(const Tensor& points, std::span<const std::string> labels,
                                           std::span<const std::size_t> nc_list, std::size_t runs, std::uint64_t seed,
                                           const KMeansOptions& opt) {
  check_points(points);
  if (points.dim(0) == 0) throw InvalidArgument("no points to cluster");
  if (labels.size() != points.dim(0)) throw InvalidArgument("labels must cover every point");
  if (runs == 0) throw InvalidArgument("runs must be >= 1");
  std::vector<ProtocolRow> rows;
  for (std::size_t nc : nc_list) {
    ProtocolRow row{nc, 0.0, 0.0, runs};
    std::vector<double> hs;
    for (std::size_t r = 0; r < runs; ++r) {
      const auto assign = kmeans_pp(points, nc, derive_seed(seed, nc * 100'003 + r), opt);
      hs.push_back(homogeneity(assign, labels));
    }
    double mean = 0.0;
    for (double h : hs) mean += h;
    mean /= static_cast<double>(runs);
    double var = 0.0;
    for (double h : hs) var += (h - mean) * (h - mean);
    row.mean_h = mean;
    row.stddev_h = runs > 1 ? std::sqrt(var / static_cast<double>(runs - 1)) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

LineClustering cluster_lines(const Tensor& line_embeddings, std::uint64_t seed, std::size_t k,
                             const KMeansOptions& opt) {
  check_points(line_embeddings);
  if (count_distinct_rows(line_embeddings, k) < k) {
    throw InvalidArgument("line clustering needs at least " + std::to_string(k) + " distinct lines");
  }
  LineClustering out;
  out.clusters = kmeans_pp(line_embeddings, k, seed, opt);
  std::vector<std::size_t> sizes(k);
  for (auto a : out.clusters.assignment) ++sizes[a];
  out.table_cluster = static_cast<std::uint32_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  return out;
}

}  // namespace sc2t
