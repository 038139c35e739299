#include "cgp/baselines.hpp"

#include "cgp/errors.hpp"
#include "cgp/eval.hpp"
#include "cgp/rng.hpp"
#include "cgp/simd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace cgp {
namespace {

constexpr double kAffinityFloor = 1e-300;
constexpr double kLeverageFloor = 1e-10;

double sqdist(const RowMatrix& a, Index i, const RowMatrix& b, Index j) {
    return simd::squared_distance(row_span(a, i), row_span(b, j));
}

// One k-means run on points already in canonical order.
KMeansResult lloyd(const RowMatrix& pts, Index k, Rng& rng, int max_iter) {
    const Index n = pts.rows();
    RowMatrix c(k, pts.cols());
    // k-means++ seeding
    std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    Index first = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    c.row(0) = pts.row(first);
    for (Index j = 1; j < k; ++j) {
        double total = 0.0;
        for (Index i = 0; i < n; ++i) {
            best[i] = std::min(best[i], sqdist(pts, i, c, j - 1));
            total += best[i];
        }
        Index pick = n - 1;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (Index i = 0; i < n; ++i) {
                target -= best[i];
                if (target < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
        }
        c.row(j) = pts.row(pick);
    }

    std::vector<Index> assign(static_cast<std::size_t>(n), -1);
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (int iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (Index i = 0; i < n; ++i) {
            Index arg = 0;
            double d = sqdist(pts, i, c, 0);
            for (Index j = 1; j < k; ++j) {
                const double dj = sqdist(pts, i, c, j);
                if (dj < d) {
                    d = dj;
                    arg = j;
                }
            }
            dist[i] = d;
            if (assign[i] != arg) {
                assign[i] = arg;
                changed = true;
            }
        }
        if (!changed) break;
        RowMatrix sum = RowMatrix::Zero(k, pts.cols());
        std::vector<Index> count(static_cast<std::size_t>(k), 0);
        for (Index i = 0; i < n; ++i) {
            sum.row(assign[i]) += pts.row(i);
            ++count[assign[i]];
        }
        for (Index j = 0; j < k; ++j) {
            if (count[j] > 0) {
                c.row(j) = sum.row(j) / static_cast<double>(count[j]);
            } else {
                // Empty cluster: move it to the point farthest from its centroid.
                const auto far = std::max_element(dist.begin(), dist.end()) - dist.begin();
                c.row(j) = pts.row(far);
                dist[far] = 0.0;
            }
        }
    }
    KMeansResult r;
    r.assignments = std::move(assign);
    r.centroids = std::move(c);
    for (Index i = 0; i < n; ++i) r.inertia += sqdist(pts, i, r.centroids, r.assignments[i]);
    return r;
}

} // namespace

double median_squared_distance(const RowMatrix& x) {
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(x.rows() * (x.rows() - 1) / 2));
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = i + 1; j < x.rows(); ++j) d.push_back(sqdist(x, i, x, j));
    }
    if (d.empty()) throw ConfigError("median_squared_distance: need at least two points");
    return median(d);
}

Matrix normalized_affinity(const RowMatrix& x, double sigma2, int* floored) {
    if (!(sigma2 > 0.0)) throw ConfigError("affinity bandwidth must be positive");
    const Index n = x.rows();
    Matrix a = Matrix::Zero(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = j + 1; i < n; ++i) {
            const double v = std::exp(-sqdist(x, i, x, j) / (2.0 * sigma2));
            a(i, j) = v;
            a(j, i) = v;
        }
    }
    Vector dinv(n);
    int count = 0;
    for (Index i = 0; i < n; ++i) {
        double s = a.row(i).sum();
        if (!(s > 0.0)) {
            s = kAffinityFloor;
            ++count;
        }
        dinv[i] = 1.0 / std::sqrt(s);
    }
    if (floored != nullptr) *floored = count;
    return dinv.asDiagonal() * a * dinv.asDiagonal();
}

KMeansResult kmeans(const RowMatrix& points, Index k, int restarts, std::uint64_t seed, int max_iter) {
    const Index n = points.rows();
    if (k < 1 || k > n) throw ConfigError("kmeans: cluster count must lie in [1, n]");
    if (restarts < 1) throw ConfigError("kmeans: need at least one restart");
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        for (Index c = 0; c < points.cols(); ++c) {
            if (points(a, c) != points(b, c)) return points(a, c) < points(b, c);
        }
        return false;
    });
    RowMatrix sorted(n, points.cols());
    for (Index i = 0; i < n; ++i) sorted.row(i) = points.row(order[i]);

    Rng rng(derive_key({seed, 0x6b6d}));
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        KMeansResult run = lloyd(sorted, k, rng, max_iter);
        if (run.inertia < best.inertia) best = std::move(run);
    }
    // Relabel clusters by first appearance in canonical order.
    std::vector<Index> relabel(static_cast<std::size_t>(k), -1);
    Index next = 0;
    for (Index i = 0; i < n; ++i) {
        Index& l = relabel[best.assignments[i]];
        if (l < 0) l = next++;
    }
    for (Index j = 0; j < k; ++j) {
        if (relabel[j] < 0) relabel[j] = next++;
    }
    KMeansResult out;
    out.inertia = best.inertia;
    out.centroids.resize(k, points.cols());
    for (Index j = 0; j < k; ++j) out.centroids.row(relabel[j]) = best.centroids.row(j);
    out.assignments.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) out.assignments[order[i]] = relabel[best.assignments[i]];
    return out;
}

SpectralResult spectral_cluster(const RowMatrix& x, const SpectralConfig& cfg) {
    const Index n = x.rows();
    if (cfg.n_clust < 1 || cfg.n_clust > n) throw ConfigError("spectral_cluster: need 1 <= n_clust <= n");
    SpectralResult out;
    if (n == 1) {
        out.assignments = {0};
        out.embedding = RowMatrix::Ones(1, 1);
        out.eigenvalues = Vector::Zero(1);
        out.sigma2 = cfg.sigma2.value_or(1.0);
        return out;
    }
    out.sigma2 = cfg.sigma2 ? *cfg.sigma2 : median_squared_distance(x);
    if (!(out.sigma2 > 0.0)) out.sigma2 = 1.0; // all points identical
    const Matrix l = normalized_affinity(x, out.sigma2, &out.floored_rows);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(l);
    if (eig.info() != Eigen::Success) throw NumericalError("spectral_cluster: eigendecomposition failed");
    const Index k = cfg.n_clust;
    out.eigenvalues.resize(k);
    out.embedding.resize(n, k);
    for (Index c = 0; c < k; ++c) {
        const Index src = n - 1 - c; // ascending order from the solver
        out.eigenvalues[c] = eig.eigenvalues()[src];
        Vector v = eig.eigenvectors().col(src);
        Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0.0) v = -v;
        out.embedding.col(c) = v;
    }
    for (Index i = 0; i < n; ++i) {
        const double norm = out.embedding.row(i).norm();
        if (norm > 0.0) out.embedding.row(i) /= norm;
    }
    if (k == 1) {
        out.assignments.assign(static_cast<std::size_t>(n), 0);
        return out;
    }
    out.assignments = kmeans(out.embedding, k, cfg.kmeans_restarts, cfg.seed, cfg.kmeans_max_iter).assignments;
    return out;
}

double adjusted_rand_index(std::span<const Index> a, std::span<const Index> b) {
    if (a.size() != b.size()) throw DimensionError("adjusted_rand_index: label vectors differ in length");
    const auto n = static_cast<double>(a.size());
    std::map<std::pair<Index, Index>, double> joint;
    std::map<Index, double> ca, cb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        ca[a[i]] += 1.0;
        cb[b[i]] += 1.0;
    }
    auto choose2 = [](double v) { return 0.5 * v * (v - 1.0); };
    double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [key, v] : joint) sum_joint += choose2(v);
    for (const auto& [key, v] : ca) sum_a += choose2(v);
    for (const auto& [key, v] : cb) sum_b += choose2(v);
    const double expected = sum_a * sum_b / choose2(n);
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0; // both partitions trivial
    return (sum_joint - expected) / (max_index - expected);
}

ClusterModel fit_dsl_with_assignments(const RowMatrix& x, const Vector& y, std::span<const Index> assignments,
                                      Index n_clust, double ridge) {
    const Index n = x.rows();
    const Index p = x.cols();
    if (y.size() != n || static_cast<Index>(assignments.size()) != n) {
        throw DimensionError("fit_dsl: features, response and assignments differ in length");
    }
    if (!(ridge >= 0.0)) throw ConfigError("fit_dsl: ridge must be nonnegative");
    std::vector<std::vector<Index>> members(static_cast<std::size_t>(n_clust));
    for (Index i = 0; i < n; ++i) {
        const Index c = assignments[static_cast<std::size_t>(i)];
        if (c < 0 || c >= n_clust) throw DataError("fit_dsl: cluster label out of range");
        members[c].push_back(i);
    }
    ClusterModel model;
    model.assignments.assign(assignments.begin(), assignments.end());
    model.ridge = ridge;
    model.centroids.resize(n_clust, p);
    double press = 0.0;
    Index press_rows = 0;
    for (Index c = 0; c < n_clust; ++c) {
        const auto& rows = members[c];
        if (rows.empty()) throw DataError("fit_dsl: cluster " + std::to_string(c) + " is empty");
        const auto nc = static_cast<Index>(rows.size());
        RowMatrix xc(nc, p);
        Vector yc(nc);
        for (Index r = 0; r < nc; ++r) {
            xc.row(r) = x.row(rows[r]);
            yc[r] = y[rows[r]];
        }
        const Eigen::RowVectorXd xmean = xc.colwise().mean();
        const double ymean = yc.mean();
        model.centroids.row(c) = xmean;
        ClusterLinearModel lm;
        lm.rows = nc;
        if (nc == 1) {
            lm.constant = true;
            lm.coef = Vector::Zero(p);
            lm.intercept = ymean;
            model.per_cluster.push_back(std::move(lm));
            continue;
        }
        xc.rowwise() -= xmean;
        yc.array() -= ymean;
        // Leverages of the centered fit; the intercept adds 1/nc.
        Vector leverage;
        if (ridge == 0.0) {
            const Eigen::CompleteOrthogonalDecomposition<Matrix> cod{Matrix(xc)};
            lm.coef = cod.solve(yc);
            leverage = (xc * cod.pseudoInverse()).diagonal();
        } else if (p <= nc) {
            Matrix gram = xc.transpose() * xc;
            gram.diagonal().array() += ridge;
            const Eigen::LDLT<Matrix> ldlt(gram);
            lm.coef = ldlt.solve(xc.transpose() * yc);
            leverage = (xc.array() * ldlt.solve(Matrix(xc.transpose())).transpose().array()).rowwise().sum();
        } else {
            Matrix gram = xc * xc.transpose();
            gram.diagonal().array() += ridge;
            const Eigen::LDLT<Matrix> ldlt(gram);
            lm.coef = xc.transpose() * ldlt.solve(yc);
            leverage = Vector::Ones(nc) - ridge * ldlt.solve(Matrix::Identity(nc, nc)).diagonal();
        }
        if (!lm.coef.allFinite()) throw NumericalError("fit_dsl: solve failed in cluster " + std::to_string(c));
        lm.intercept = ymean - xmean.dot(lm.coef);
        const Vector resid = yc - xc * lm.coef;
        for (Index r = 0; r < nc; ++r) {
            const double keep = 1.0 - leverage[r] - 1.0 / static_cast<double>(nc);
            if (keep <= kLeverageFloor) continue;
            press += (resid[r] / keep) * (resid[r] / keep);
            ++press_rows;
        }
        model.per_cluster.push_back(std::move(lm));
    }
    model.residual_variance = press_rows > 0 ? press / static_cast<double>(press_rows) : 0.0;
    return model;
}

ClusterModel fit_dsl(const RowMatrix& x, const Vector& y, const SpectralConfig& cfg, double ridge) {
    const SpectralResult sc = spectral_cluster(x, cfg);
    return fit_dsl_with_assignments(x, y, sc.assignments, cfg.n_clust, ridge);
}

DslPrediction predict_dsl(const ClusterModel& model, const RowMatrix& x) {
    if (x.cols() != model.centroids.cols()) throw DimensionError("predict_dsl: feature count mismatch");
    DslPrediction out;
    out.values.resize(x.rows());
    out.clusters.resize(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i) {
        Index arg = 0;
        double best = sqdist(x, i, model.centroids, 0);
        for (Index c = 1; c < model.centroids.rows(); ++c) {
            const double d = sqdist(x, i, model.centroids, c);
            if (d < best) {
                best = d;
                arg = c;
            }
        }
        const ClusterLinearModel& lm = model.per_cluster[static_cast<std::size_t>(arg)];
        out.clusters[static_cast<std::size_t>(i)] = arg;
        out.values[i] = lm.intercept + x.row(i).dot(lm.coef);
    }
    return out;
}

} // namespace cgp
