#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "driftbench/dataset.hpp"

namespace driftbench {

struct KMeansOptions {
    std::size_t k_clusters = 64;
    std::uint64_t seed = 0;
    int max_iter = 300;
    double rel_tol = 1e-6;
    /// Row-parallel assignment. Results do not depend on this value.
    int threads = 1;
};

struct ClusterModel {
    std::size_t k_clusters = 0;
    Matrix centroids;                      // k_clusters x D
    std::vector<std::size_t> assignments;  // nearest centroid per fitted row
    double inertia = 0.0;
    std::uint64_t seed = 0;
    int iterations_run = 0;
    /// Inertia after each assignment step, in order. Non-increasing.
    std::vector<double> inertia_history;
};

/// Lloyd's algorithm from a seeded k-means++ start. Empty clusters are
/// repaired by moving the point farthest from its centroid into them.
ClusterModel KMeansFit(const Matrix& x, const KMeansOptions& options);

/// Runs `restarts` fits with seeds seed, seed+1, ... and keeps the lowest
/// inertia (first wins on ties).
ClusterModel KMeansFitBest(const Matrix& x, KMeansOptions options, int restarts);

/// Index of the Euclidean-nearest centroid per row, ties to the lowest index.
std::vector<std::size_t> AssignNearest(const Matrix& x, const Matrix& centroids, int threads = 1);

/// Sum of squared distances from each row to its assigned centroid.
double Inertia(const Matrix& x, const Matrix& centroids, const std::vector<std::size_t>& assignments);

/// "EKM1" | u32 K | u32 D | K*D f32 centroids, little-endian.
void WriteClusterModel(const std::filesystem::path& path, const ClusterModel& model);
Matrix ReadClusterCentroids(const std::filesystem::path& path);

}  // namespace driftbench
