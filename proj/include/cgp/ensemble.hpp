#pragma once

// Bayesian model averaging over random feature compressions: one member per
// compression dimension m in a window, each with its own Psi and a bandwidth
// drawn from U(3/d_max, 3/d_min). Members are weighted by their marginal
// likelihoods (equal priors) and predict through a mixture of Student-t
// densities.

#include "cgp/exact_gp.hpp"
#include "cgp/lowrank_gp.hpp"
#include "cgp/matrix.hpp"
#include "cgp/simdata.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cgp {

enum class Mode { exact, lowrank };

std::string_view to_string(Mode mode) noexcept;
Mode parse_mode(std::string_view text);

struct MemberConfig {
    Index m = 0;
    double lambda = 0.0; // 0 until drawn from the compressed features
    std::uint64_t psi_seed = 0;
    std::uint64_t lambda_seed = 0;
    Mode mode = Mode::exact;
};

/// Window [ceil(2 ln p), min(n, p)] (exact) or [ceil(2 ln p), min(m_phi, p)]
/// (low-rank), walked with `stride`.
struct GridPolicy {
    Index m_lo = 0;
    Index m_hi = 0;
    Index stride = 1;
    std::size_t subsample_cap = 1000;
};

GridPolicy make_grid_policy(Index n, Index p, Mode mode, Index stride = 1, Index m_phi = 150);

/// m = m_lo, m_lo + stride, ...; m_hi is always the last member.
std::vector<MemberConfig> build_grid(const GridPolicy& policy, Mode mode, std::uint64_t seed);
std::vector<MemberConfig> build_grid(Index n, Index p, Mode mode, Index stride, std::uint64_t seed,
                                     Index m_phi = 150);

struct SquaredDistanceRange {
    double min = 0.0; // smallest nonzero squared distance
    double max = 0.0;
    std::size_t points = 0;
};

/// Extremes over a seeded subsample of at most `cap` rows (all rows when
/// n <= cap). Throws ConfigError when all sampled rows coincide.
SquaredDistanceRange squared_distance_range(const RowMatrix& z, std::uint64_t seed, std::size_t cap = 1000);

/// Uniform draw on [3/d_max, 3/d_min].
Bandwidth draw_lambda(const RowMatrix& z, std::uint64_t seed, std::size_t cap = 1000);

/// exp(l_i - max l) / sum; all -inf entries give uniform weights.
Vector normalize_log_weights(std::span<const double> log_ml);

struct FitOptions {
    Mode mode = Mode::exact;
    Index stride = 1;
    Index m_phi = 150;
    std::size_t subsample_cap = 1000;
    unsigned workers = 0;
    bool per_member_phi = false;
    JitterPolicy jitter;
    std::uint64_t master_seed = 0;
};

using MemberPosterior = std::variant<GpPosterior, LowRankPosterior>;

struct Member {
    MemberConfig config;
    MemberPosterior posterior;
    double log_ml = 0.0;
    std::uint64_t phi_seed = 0; // low-rank only; 0 with an identity Phi
};

struct MemberFailure {
    MemberConfig config;
    std::string reason;
};

struct FitTimings {
    double compress_seconds = 0.0; // summed over members
    double fit_seconds = 0.0;      // summed over members
    double wall_seconds = 0.0;
};

struct EnsembleInfo {
    Mode mode = Mode::exact;
    Index n = 0;
    Index p = 0;
    Index m_phi = 0;         // rows of Phi actually used (n when identity)
    bool phi_identity = false;
    std::uint64_t master_seed = 0;
    Centering centering;
};

class EnsembleModel {
public:
    EnsembleModel(EnsembleInfo info, std::vector<Member> members, Vector weights,
                  std::vector<MemberFailure> failures = {}, std::vector<std::string> warnings = {});

    const EnsembleInfo& info() const noexcept { return info_; }
    const std::vector<Member>& members() const noexcept { return members_; }
    const Vector& weights() const noexcept { return weights_; }
    const std::vector<MemberFailure>& failures() const noexcept { return failures_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }
    FitTimings timings;

private:
    EnsembleInfo info_;
    std::vector<Member> members_;
    Vector weights_;
    std::vector<MemberFailure> failures_;
    std::vector<std::string> warnings_;
};

/// Centers X and y, fits every grid member (in parallel), and weights them.
/// The result depends only on the data and options, not on worker count.
EnsembleModel fit_ensemble(const RowMatrix& x, const Vector& y, const FitOptions& options);

/// Fits an ensemble from explicit member configurations (lambda == 0 means
/// draw it). Used by fit_ensemble and by tests that pin members.
EnsembleModel fit_members(const RowMatrix& x, const Vector& y, std::vector<MemberConfig> configs,
                          const FitOptions& options);

struct MixtureComponent {
    double weight = 0.0;
    double location = 0.0;
    double scale = 0.0;
    Index df = 0;
};

double mixture_cdf(std::span<const MixtureComponent> components, double x);
/// Bisection on the mixture CDF inside the envelope of component quantiles.
double mixture_quantile(std::span<const MixtureComponent> components, double q);

struct PointPrediction {
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::vector<MixtureComponent> components;
};

struct PredictOptions {
    double level = 0.95;
    unsigned workers = 0;
    bool keep_components = true;
};

/// Members with weight below 1e-300 are skipped.
std::vector<PointPrediction> predict_ensemble(const EnsembleModel& model, const RowMatrix& x_test,
                                              const PredictOptions& options = {});

struct FitPredictResult {
    EnsembleModel model;
    std::vector<PointPrediction> predictions;
};

/// fit_ensemble followed by predict_ensemble, compressing the test rows while
/// each member's Psi is in memory instead of regenerating it. Predictions are
/// identical to the two-step path.
FitPredictResult fit_predict_ensemble(const RowMatrix& x, const Vector& y, const RowMatrix& x_test,
                                      const FitOptions& fit_options, const PredictOptions& predict_options = {});

} // namespace cgp
