#include "driftbench/clustering.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <thread>

#include "byte_io.hpp"
#include "rng.hpp"

namespace driftbench {

namespace {

void CheckFinite(const Matrix& x, const char* what) {
    if (!x.allFinite()) {
        throw Error(ErrorKind::kNonFinite, std::string(what) + " contains non-finite values");
    }
}

// D^2-weighted seeding.
Matrix KMeansPlusPlus(const Matrix& x, std::size_t k, std::mt19937_64& rng) {
    const Eigen::Index n = x.rows();
    Matrix centroids(static_cast<Eigen::Index>(k), x.cols());
    centroids.row(0) = x.row(static_cast<Eigen::Index>(detail::UniformIndex(rng, n)));

    std::vector<double> closest(n);
    for (Eigen::Index i = 0; i < n; ++i) closest[i] = (x.row(i) - centroids.row(0)).squaredNorm();

    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double d : closest) total += d;
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double target = detail::Uniform01(rng) * total;
            double running = 0.0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                running += closest[i];
                if (running > target && closest[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(detail::UniformIndex(rng, n));
        }
        centroids.row(static_cast<Eigen::Index>(c)) = x.row(pick);
        for (Eigen::Index i = 0; i < n; ++i) {
            closest[i] = std::min(closest[i], (x.row(i) - x.row(pick)).squaredNorm());
        }
    }
    return centroids;
}

void RepairEmptyClusters(const Matrix& x, Matrix& centroids, std::vector<std::size_t>& assignments) {
    const std::size_t k = static_cast<std::size_t>(centroids.rows());
    std::vector<std::size_t> counts(k, 0);
    for (auto a : assignments) ++counts[a];

    for (std::size_t j = 0; j < k; ++j) {
        if (counts[j] > 0) continue;
        double worst = -1.0;
        std::size_t donor = assignments.size();
        for (std::size_t i = 0; i < assignments.size(); ++i) {
            if (counts[assignments[i]] < 2) continue;
            const double d = (x.row(i) - centroids.row(assignments[i])).squaredNorm();
            if (d > worst) {
                worst = d;
                donor = i;
            }
        }
        assert(donor < assignments.size());
        --counts[assignments[donor]];
        assignments[donor] = j;
        counts[j] = 1;
        centroids.row(j) = x.row(donor);
    }
}

Matrix ClusterMeans(const Matrix& x, const std::vector<std::size_t>& assignments, std::size_t k) {
    Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), x.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        sums.row(assignments[i]) += x.row(i);
        ++counts[assignments[i]];
    }
    for (std::size_t j = 0; j < k; ++j) sums.row(j) /= static_cast<double>(counts[j]);
    return sums;
}

}  // namespace

std::vector<std::size_t> AssignNearest(const Matrix& x, const Matrix& centroids, int threads) {
    if (x.cols() != centroids.cols()) {
        throw Error(ErrorKind::kDimensionMismatch,
                    "points have " + std::to_string(x.cols()) + " columns but centroids have " +
                        std::to_string(centroids.cols()));
    }
    if (centroids.rows() == 0) throw Error(ErrorKind::kInvalidArgument, "no centroids");

    std::vector<std::size_t> out(static_cast<std::size_t>(x.rows()));
    auto assign_range = [&](Eigen::Index begin, Eigen::Index end) {
        for (Eigen::Index i = begin; i < end; ++i) {
            Eigen::Index best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
                const double d = (x.row(i) - centroids.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
        }
    };

    const Eigen::Index n = x.rows();
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n / 256) + 1));
    if (workers == 1) {
        assign_range(0, n);
        return out;
    }
    std::vector<std::jthread> pool;
    const Eigen::Index chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const Eigen::Index begin = w * chunk;
        const Eigen::Index end = std::min(n, begin + chunk);
        if (begin < end) pool.emplace_back(assign_range, begin, end);
    }
    return out;
}

double Inertia(const Matrix& x, const Matrix& centroids, const std::vector<std::size_t>& assignments) {
    double total = 0.0;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        total += (x.row(static_cast<Eigen::Index>(i)) - centroids.row(assignments[i])).squaredNorm();
    }
    return total;
}

ClusterModel KMeansFit(const Matrix& x, const KMeansOptions& options) {
    const std::size_t n = static_cast<std::size_t>(x.rows());
    const std::size_t k = options.k_clusters;
    if (k < 1) throw Error(ErrorKind::kInvalidArgument, "k_clusters must be at least 1");
    if (k > n) {
        throw Error(ErrorKind::kInvalidArgument, "k_clusters " + std::to_string(k) +
                                                     " exceeds sample count " + std::to_string(n));
    }
    if (options.max_iter < 1) throw Error(ErrorKind::kInvalidArgument, "max_iter must be positive");
    CheckFinite(x, "k-means input");

    std::mt19937_64 rng(options.seed);
    ClusterModel model;
    model.k_clusters = k;
    model.seed = options.seed;
    model.centroids = KMeansPlusPlus(x, k, rng);

    double previous = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < options.max_iter; ++iter) {
        model.assignments = AssignNearest(x, model.centroids, options.threads);
        RepairEmptyClusters(x, model.centroids, model.assignments);
        model.inertia = Inertia(x, model.centroids, model.assignments);
        model.inertia_history.push_back(model.inertia);
        model.iterations_run = iter + 1;
        assert(model.inertia <= previous * (1.0 + 1e-12) + 1e-300);

        const bool converged =
            std::isfinite(previous) && previous - model.inertia <= options.rel_tol * previous;
        if (converged || iter + 1 == options.max_iter) break;
        previous = model.inertia;
        model.centroids = ClusterMeans(x, model.assignments, k);
    }
    return model;
}

ClusterModel KMeansFitBest(const Matrix& x, KMeansOptions options, int restarts) {
    if (restarts < 1) throw Error(ErrorKind::kInvalidArgument, "restarts must be positive");
    const std::uint64_t base = options.seed;
    ClusterModel best;
    for (int r = 0; r < restarts; ++r) {
        options.seed = base + static_cast<std::uint64_t>(r);
        ClusterModel candidate = KMeansFit(x, options);
        if (r == 0 || candidate.inertia < best.inertia) best = std::move(candidate);
    }
    return best;
}

void WriteClusterModel(const std::filesystem::path& path, const ClusterModel& model) {
    std::vector<std::uint8_t> bytes = {'E', 'K', 'M', '1'};
    detail::AppendU32(bytes, static_cast<std::uint32_t>(model.centroids.rows()));
    detail::AppendU32(bytes, static_cast<std::uint32_t>(model.centroids.cols()));
    for (Eigen::Index i = 0; i < model.centroids.size(); ++i) {
        detail::AppendF32(bytes, static_cast<float>(model.centroids.data()[i]));
    }
    detail::WriteFileBytes(path, bytes);
}

Matrix ReadClusterCentroids(const std::filesystem::path& path) {
    const auto bytes = detail::ReadFileBytes(path);
    const std::span<const std::uint8_t> view(bytes);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "EKM1", 4) != 0) {
        throw Error(ErrorKind::kBadMagic, path.string() + " is not an EKM1 cluster model");
    }
    const std::size_t k = detail::ReadU32(view.subspan(4));
    const std::size_t d = detail::ReadU32(view.subspan(8));
    if (bytes.size() != 12 + 4 * k * d) {
        throw Error(ErrorKind::kSizeMismatch, path.string() + ": centroid payload size mismatch");
    }
    Matrix centroids(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < k * d; ++i) centroids.data()[i] = detail::ReadF32(view.subspan(12 + 4 * i));
    return centroids;
}

}  // namespace driftbench
