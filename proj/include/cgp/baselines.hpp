#pragma once

// Distributed supervised learning baseline: normalized spectral clustering of
// the features followed by one ridge-regularized linear model per cluster.

#include "cgp/matrix.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace cgp {

struct SpectralConfig {
    Index n_clust = 10;
    std::optional<double> sigma2; // affinity bandwidth; median squared distance when unset
    int kmeans_restarts = 10;
    int kmeans_max_iter = 300;
    std::uint64_t seed = 0;
};

double median_squared_distance(const RowMatrix& x);

/// L = D^-1/2 A D^-1/2 with A_ij = exp(-|xi - xj|^2 / (2 sigma2)), A_ii = 0.
/// Rows whose affinity sum underflows get a tiny floor; `floored` counts them.
Matrix normalized_affinity(const RowMatrix& x, double sigma2, int* floored = nullptr);

struct KMeansResult {
    std::vector<Index> assignments;
    RowMatrix centroids;
    double inertia = 0.0;
};

/// k-means++ seeding and Lloyd iterations; best of `restarts` by inertia.
/// Points are processed in lexicographic order so the result does not depend
/// on input row order.
KMeansResult kmeans(const RowMatrix& points, Index k, int restarts, std::uint64_t seed, int max_iter = 300);

struct SpectralResult {
    std::vector<Index> assignments;
    RowMatrix embedding;  // n x n_clust, unit-norm rows
    Vector eigenvalues;   // top n_clust eigenvalues of L, descending
    double sigma2 = 0.0;
    int floored_rows = 0;
};

SpectralResult spectral_cluster(const RowMatrix& x, const SpectralConfig& cfg);

double adjusted_rand_index(std::span<const Index> a, std::span<const Index> b);

struct ClusterLinearModel {
    Vector coef;
    double intercept = 0.0;
    Index rows = 0;
    bool constant = false; // singleton cluster: predicts its response
};

struct ClusterModel {
    std::vector<Index> assignments;
    RowMatrix centroids; // raw-feature centroids, one row per cluster
    std::vector<ClusterLinearModel> per_cluster;
    double ridge = 0.0;
    double residual_variance = 0.0; // pooled leave-one-out residual variance
};

/// Per-cluster ridge regression on cluster-centered data; ridge == 0 gives the
/// minimum-norm least-squares solution.
ClusterModel fit_dsl_with_assignments(const RowMatrix& x, const Vector& y, std::span<const Index> assignments,
                                      Index n_clust, double ridge);

ClusterModel fit_dsl(const RowMatrix& x, const Vector& y, const SpectralConfig& cfg, double ridge);

struct DslPrediction {
    Vector values;
    std::vector<Index> clusters;
};

/// Routes each row to the nearest raw-feature centroid.
DslPrediction predict_dsl(const ClusterModel& model, const RowMatrix& x);

} // namespace cgp
