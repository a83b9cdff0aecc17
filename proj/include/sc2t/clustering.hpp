#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sc2t/nn/tensor.hpp"

namespace sc2t {

struct ClusterAssignment {
  std::vector<std::uint32_t> assignment;  // point -> cluster id in [0, k)
  nn::Tensor centroids;                   // [k, dim]
  double inertia = 0.0;                   // sum of squared distances to assigned centroids
  std::size_t iterations = 0;
  std::vector<double> inertia_history;  // after each assignment step

  std::size_t k() const { return centroids.empty() ? 0 : centroids.dim(0); }
};

struct KMeansOptions {
  std::size_t max_iters = 300;
  double tol = 1e-6;  // stop when no centroid moves farther than this
  std::size_t threads = 1;
  // k-means++ candidates drawn per new centroid; 0 means 2 + floor(ln k), 1 is plain k-means++.
  std::size_t local_trials = 0;
  // After Lloyd converges, apply improving single-point transfers and resume.
  bool hartigan = true;
};

// Number of distinct rows, counting at most up to `cap`.
std::size_t count_distinct_rows(const nn::Tensor& points, std::size_t cap);

// k-means with D^2 (k-means++) seeding, Lloyd iterations and a Hartigan
// transfer refinement. Points are rows of [N, dim].
ClusterAssignment kmeans_pp(const nn::Tensor& points, std::size_t k, std::uint64_t seed, const KMeansOptions& opt = {});

// Squared distances of every point to its nearest centroid; ties go to the lowest id.
std::vector<std::uint32_t> assign_nearest(const nn::Tensor& points, const nn::Tensor& centroids,
                                          std::vector<double>* sq_dist = nullptr, std::size_t threads = 1);

struct HomogeneityDetail {
  double h = 0.0;
  std::size_t clusters = 0;             // non-empty clusters averaged over
  std::vector<std::string> majority;    // per cluster id; empty for empty clusters
  std::vector<std::size_t> cluster_size;
};

// Mean over non-empty clusters of the fraction of members carrying the
// cluster's most frequent label (ties to the lexicographically smallest label).
HomogeneityDetail homogeneity_detail(std::span<const std::uint32_t> assignment, std::span<const std::string> labels);
double homogeneity(std::span<const std::uint32_t> assignment, std::span<const std::string> labels);
double homogeneity(const ClusterAssignment& assign, std::span<const std::string> labels);

struct ProtocolRow {
  std::size_t nc = 0;
  double mean_h = 0.0;
  double stddev_h = 0.0;
  std::size_t runs = 0;
};

// Mean homogeneity over `runs` independently seeded k-means++ runs per cluster count.
std::vector<ProtocolRow> evaluate_protocol(const nn::Tensor& points, std::span<const std::string> labels,
                                           std::span<const std::size_t> nc_list, std::size_t runs, std::uint64_t seed,
                                           const KMeansOptions& opt = {});

struct LineClustering {
  ClusterAssignment clusters;
  std::uint32_t table_cluster = 0;  // the cluster holding the most lines (ties: lowest id)
};

// 3-means (by default) over max-pooled line embeddings [L, dim].
LineClustering cluster_lines(const nn::Tensor& line_embeddings, std::uint64_t seed, std::size_t k = 3,
                             const KMeansOptions& opt = {});

}  // namespace sc2t
