#include "cgp/ensemble.hpp"

#include "cgp/compress.hpp"
#include "cgp/errors.hpp"
#include "cgp/parallel.hpp"
#include "cgp/rng.hpp"
#include "cgp/simd.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace cgp {
namespace {

constexpr std::uint64_t kPsiTag = 0x707369;
constexpr std::uint64_t kLambdaTag = 0x6c616d;
constexpr std::uint64_t kPhiTag = 0x706869;
constexpr std::uint64_t kSubsampleTag = 0x737562;
constexpr std::uint64_t kDrawTag = 0x647261;
constexpr double kNegligibleWeight = 1e-300;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t phi_seed_for(std::uint64_t master, std::optional<std::size_t> member) {
    return member ? derive_key({master, kPhiTag, static_cast<std::uint64_t>(*member)})
                  : derive_key({master, kPhiTag});
}

double component_quantile(const MixtureComponent& c, double q) {
    if (c.scale == 0.0) return c.location;
    const boost::math::students_t dist(static_cast<double>(c.df));
    return c.location + c.scale * boost::math::quantile(dist, q);
}

} // namespace

std::string_view to_string(Mode mode) noexcept { return mode == Mode::exact ? "exact" : "lowrank"; }

Mode parse_mode(std::string_view text) {
    if (text == "exact") return Mode::exact;
    if (text == "lowrank") return Mode::lowrank;
    throw ConfigError("unknown mode '" + std::string(text) + "' (expected exact or lowrank)");
}

GridPolicy make_grid_policy(Index n, Index p, Mode mode, Index stride, Index m_phi) {
    if (p < 2) throw ConfigError("grid: need at least two features");
    if (stride < 1) throw ConfigError("grid: stride must be positive");
    GridPolicy policy;
    policy.m_lo = static_cast<Index>(std::ceil(2.0 * std::log(static_cast<double>(p))));
    policy.m_hi = mode == Mode::exact ? std::min(n, p) : std::min(m_phi, p);
    policy.stride = stride;
    if (policy.m_lo > policy.m_hi) {
        throw ConfigError("grid: window [" + std::to_string(policy.m_lo) + ", " + std::to_string(policy.m_hi) +
                          "] is empty; p is too small for this sample size");
    }
    return policy;
}

std::vector<MemberConfig> build_grid(const GridPolicy& policy, Mode mode, std::uint64_t seed) {
    if (policy.stride < 1) throw ConfigError("grid: stride must be positive");
    if (policy.m_lo < 1 || policy.m_lo > policy.m_hi) throw ConfigError("grid: empty window");
    std::vector<MemberConfig> out;
    auto add = [&](Index m) {
        const auto index = static_cast<std::uint64_t>(out.size());
        out.push_back(MemberConfig{m, 0.0, derive_key({seed, kPsiTag, index}),
                                   derive_key({seed, kLambdaTag, index}), mode});
    };
    for (Index m = policy.m_lo; m <= policy.m_hi; m += policy.stride) add(m);
    if (out.back().m != policy.m_hi) add(policy.m_hi);
    return out;
}

std::vector<MemberConfig> build_grid(Index n, Index p, Mode mode, Index stride, std::uint64_t seed, Index m_phi) {
    return build_grid(make_grid_policy(n, p, mode, stride, m_phi), mode, seed);
}

SquaredDistanceRange squared_distance_range(const RowMatrix& z, std::uint64_t seed, std::size_t cap) {
    const auto n = static_cast<std::size_t>(z.rows());
    std::vector<Index> rows(n);
    std::iota(rows.begin(), rows.end(), Index{0});
    if (cap >= 2 && n > cap) {
        Rng rng(derive_key({seed, kSubsampleTag}));
        for (std::size_t i = 0; i < cap; ++i) std::swap(rows[i], rows[i + rng.below(n - i)]);
        rows.resize(cap);
        std::sort(rows.begin(), rows.end());
    }
    SquaredDistanceRange range;
    range.points = rows.size();
    range.min = std::numeric_limits<double>::infinity();
    const auto dim = static_cast<std::size_t>(z.cols());
    const auto& kernels = simd::active();
    for (std::size_t a = 0; a < rows.size(); ++a) {
        const double* za = z.data() + rows[a] * z.cols();
        for (std::size_t b = a + 1; b < rows.size(); ++b) {
            const double d = kernels.squared_distance(za, z.data() + rows[b] * z.cols(), dim);
            if (d > 0.0) {
                range.min = std::min(range.min, d);
                range.max = std::max(range.max, d);
            }
        }
    }
    if (!(range.max > 0.0)) throw ConfigError("draw_lambda: all compressed points coincide");
    return range;
}

Bandwidth draw_lambda(const RowMatrix& z, std::uint64_t seed, std::size_t cap) {
    const SquaredDistanceRange range = squared_distance_range(z, seed, cap);
    Rng rng(derive_key({seed, kDrawTag}));
    const double lo = 3.0 / range.max;
    const double hi = 3.0 / range.min;
    return Bandwidth(std::clamp(rng.uniform(lo, hi), lo, hi));
}

Vector normalize_log_weights(std::span<const double> log_ml) {
    if (log_ml.empty()) throw ConfigError("normalize_log_weights: no members");
    const double top = *std::max_element(log_ml.begin(), log_ml.end());
    const auto s = static_cast<Index>(log_ml.size());
    if (top == -std::numeric_limits<double>::infinity()) return Vector::Constant(s, 1.0 / static_cast<double>(s));
    Vector w(s);
    for (Index i = 0; i < s; ++i) w[i] = std::exp(log_ml[static_cast<std::size_t>(i)] - top);
    return w / w.sum();
}

EnsembleModel::EnsembleModel(EnsembleInfo info, std::vector<Member> members, Vector weights,
                             std::vector<MemberFailure> failures, std::vector<std::string> warnings)
    : info_(std::move(info)), members_(std::move(members)), weights_(std::move(weights)),
      failures_(std::move(failures)), warnings_(std::move(warnings)) {
    if (members_.empty()) throw NumericalError("ensemble has no members");
    if (weights_.size() != static_cast<Index>(members_.size())) throw DataError("ensemble: weight count mismatch");
}

namespace {

PredictiveDistribution member_predictive(const MemberPosterior& posterior, const RowMatrix& z) {
    return std::visit(
        [&](const auto& post) {
            if constexpr (std::is_same_v<std::decay_t<decltype(post)>, GpPosterior>) {
                return predict(post, z, false);
            } else {
                return predict_lowrank(post, z, false);
            }
        },
        posterior);
}

// Fits the members; when `x_test` is given, also evaluates each member's
// predictive at the (centered, compressed) test rows into `test_pred`, aligned
// with the kept members.
EnsembleModel fit_members_impl(const RowMatrix& x, const Vector& y, const std::vector<MemberConfig>& configs,
                               const FitOptions& options, const RowMatrix* x_test,
                               std::vector<PredictiveDistribution>* test_pred) {
    const auto started = Clock::now();
    const Index n = x.rows();
    const Index p = x.cols();
    if (y.size() != n) throw DimensionError("fit: feature rows and response length differ");
    if (n < 3) throw ConfigError("fit: need at least three training points");
    if (!x.allFinite() || !y.allFinite()) throw DataError("fit: non-finite values in training data");
    if (configs.empty()) throw ConfigError("fit: no members configured");

    Dataset raw{x, y, std::nullopt};
    auto [centered, stats] = center(raw);

    EnsembleInfo info;
    info.mode = options.mode;
    info.n = n;
    info.p = p;
    info.master_seed = options.master_seed;
    info.centering = std::move(stats);
    std::vector<std::string> warnings;

    std::optional<SampleMap> shared_phi;
    if (options.mode == Mode::lowrank) {
        if (options.m_phi < 1) throw ConfigError("fit: m_phi must be positive");
        info.phi_identity = options.m_phi >= n;
        info.m_phi = info.phi_identity ? n : options.m_phi;
        if (info.phi_identity) {
            warnings.push_back("m_phi=" + std::to_string(options.m_phi) + " >= n=" + std::to_string(n) +
                               "; using the identity sample map (exact-equivalent)");
            shared_phi = SampleMap::identity(n);
        } else if (!options.per_member_phi) {
            shared_phi = SampleMap::gaussian(info.m_phi, n, phi_seed_for(options.master_seed, std::nullopt));
        }
    }

    struct Outcome {
        std::optional<Member> member;
        PredictiveDistribution test_pred;
        std::string error;
        double compress_seconds = 0.0;
        double fit_seconds = 0.0;
    };
    std::vector<Outcome> outcomes(configs.size());

    parallel_for(configs.size(), options.workers, [&](std::size_t l) {
        Outcome& out = outcomes[l];
        MemberConfig cfg = configs[l];
        cfg.mode = options.mode;
        try {
            auto t0 = Clock::now();
            const ProjectionMatrix psi = generate(ProjectionSpec{ProjectionKind::feature, cfg.m, p, cfg.psi_seed});
            const RowMatrix z = apply(psi, centered.x);
            RowMatrix z_test;
            if (x_test != nullptr) {
                RowMatrix xc = *x_test;
                xc.rowwise() -= info.centering.x_means.transpose();
                z_test = apply(psi, xc);
            }
            out.compress_seconds = seconds_since(t0);
            t0 = Clock::now();
            const Bandwidth lambda =
                cfg.lambda > 0.0 ? Bandwidth(cfg.lambda) : draw_lambda(z, cfg.lambda_seed, options.subsample_cap);
            cfg.lambda = lambda.value();
            if (options.mode == Mode::exact) {
                GpPosterior post = fit(z, centered.y, lambda);
                const double lml = log_marginal(post);
                if (x_test != nullptr) out.test_pred = predict(post, z_test, false);
                post.release();
                out.member.emplace(Member{cfg, std::move(post), lml, 0});
            } else {
                std::optional<SampleMap> own_phi;
                std::uint64_t phi_seed = shared_phi ? shared_phi->seed() : 0;
                if (!shared_phi) {
                    phi_seed = phi_seed_for(options.master_seed, l);
                    own_phi = SampleMap::gaussian(info.m_phi, n, phi_seed);
                }
                LowRankPosterior post =
                    fit_lowrank(z, centered.y, lambda, shared_phi ? *shared_phi : *own_phi, options.jitter);
                const double lml = log_marginal_lowrank(post);
                if (x_test != nullptr) out.test_pred = predict_lowrank(post, z_test, false);
                post.release();
                out.member.emplace(Member{cfg, std::move(post), lml, phi_seed});
            }
            out.fit_seconds = seconds_since(t0);
        } catch (const NumericalError& e) {
            out.error = e.what();
        } catch (const ConfigError& e) {
            // Degenerate compressed features (all points identical).
            out.error = e.what();
        }
    });

    std::vector<Member> members;
    std::vector<MemberFailure> failures;
    FitTimings timings;
    for (std::size_t l = 0; l < outcomes.size(); ++l) {
        timings.compress_seconds += outcomes[l].compress_seconds;
        timings.fit_seconds += outcomes[l].fit_seconds;
        if (outcomes[l].member) {
            members.push_back(std::move(*outcomes[l].member));
            if (test_pred != nullptr) test_pred->push_back(std::move(outcomes[l].test_pred));
        } else {
            failures.push_back(MemberFailure{configs[l], outcomes[l].error});
        }
    }
    if (members.empty()) {
        throw NumericalError("all " + std::to_string(configs.size()) + " ensemble members failed; first error: " +
                             failures.front().reason);
    }
    std::vector<double> log_ml;
    log_ml.reserve(members.size());
    for (const Member& m : members) log_ml.push_back(m.log_ml);
    if (std::all_of(log_ml.begin(), log_ml.end(), [](double v) { return std::isinf(v) && v < 0; })) {
        warnings.push_back("response has zero signal under every member; using uniform weights");
    }
    Vector weights = normalize_log_weights(log_ml);

    // Solver state was freed after each fit so peak memory stays near one
    // member per worker; rebuild it for the members that carry weight. The
    // rebuild repeats the original computation, so results are unchanged.
    std::vector<std::size_t> active;
    for (std::size_t l = 0; l < members.size(); ++l)
        if (weights[static_cast<Index>(l)] >= kNegligibleWeight) active.push_back(l);
    parallel_for(active.size(), options.workers, [&](std::size_t k) {
        Member& m = members[active[k]];
        if (auto* post = std::get_if<GpPosterior>(&m.posterior)) {
            if (post->released())
                *post = GpPosterior::restore(post->train(), post->bandwidth(), post->alpha(), post->quad());
        } else {
            auto& lr = std::get<LowRankPosterior>(m.posterior);
            if (!lr.released()) return;
            const SampleMap phi = shared_phi ? *shared_phi : SampleMap::gaussian(info.m_phi, n, m.phi_seed);
            lr = LowRankPosterior::restore(lr.train(), lr.bandwidth(), phi, options.jitter, lr.alpha(), lr.quad());
        }
    });

    EnsembleModel model(std::move(info), std::move(members), std::move(weights), std::move(failures),
                        std::move(warnings));
    timings.wall_seconds = seconds_since(started);
    model.timings = timings;
    return model;
}

} // namespace

EnsembleModel fit_members(const RowMatrix& x, const Vector& y, std::vector<MemberConfig> configs,
                          const FitOptions& options) {
    return fit_members_impl(x, y, configs, options, nullptr, nullptr);
}

EnsembleModel fit_ensemble(const RowMatrix& x, const Vector& y, const FitOptions& options) {
    GridPolicy policy = make_grid_policy(x.rows(), x.cols(), options.mode, options.stride, options.m_phi);
    policy.subsample_cap = options.subsample_cap;
    return fit_members(x, y, build_grid(policy, options.mode, options.master_seed), options);
}

double mixture_cdf(std::span<const MixtureComponent> components, double x) {
    double total = 0.0;
    double weight = 0.0;
    for (const MixtureComponent& c : components) {
        weight += c.weight;
        if (c.weight == 0.0) continue;
        if (c.scale == 0.0) {
            total += x >= c.location ? c.weight : 0.0;
            continue;
        }
        const boost::math::students_t dist(static_cast<double>(c.df));
        total += c.weight * boost::math::cdf(dist, (x - c.location) / c.scale);
    }
    return weight > 0.0 ? total / weight : 0.0;
}

double mixture_quantile(std::span<const MixtureComponent> components, double q) {
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("mixture_quantile: level must lie in (0, 1)");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const MixtureComponent& c : components) {
        if (c.weight <= 0.0) continue;
        const double v = component_quantile(c, q);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) throw ConfigError("mixture_quantile: no weighted components");
    if (lo == hi) return lo;
    // The mixture CDF crosses q inside the envelope [lo, hi].
    const auto f = [&](double x) { return mixture_cdf(components, x) - q; };
    const double f_lo = f(lo);
    const double f_hi = f(hi);
    if (f_lo >= 0.0) return lo;
    if (f_hi <= 0.0) return hi;
    std::uintmax_t max_iter = 200;
    const auto [a, b] =
        boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(50), max_iter);
    return 0.5 * (a + b);
}

namespace {

std::vector<std::size_t> active_members(const EnsembleModel& model) {
    std::vector<std::size_t> active;
    for (std::size_t l = 0; l < model.members().size(); ++l) {
        if (model.weights()[static_cast<Index>(l)] >= kNegligibleWeight) active.push_back(l);
    }
    return active;
}

// Mixes per-member predictives; `per_member[k]` belongs to member active[k].
std::vector<PointPrediction> mix_members(const EnsembleModel& model, const std::vector<std::size_t>& active,
                                         const std::vector<PredictiveDistribution>& per_member, Index rows,
                                         const PredictOptions& options) {
    const EnsembleInfo& info = model.info();
    const double q_lo = 0.5 * (1.0 - options.level);
    const double q_hi = 0.5 * (1.0 + options.level);
    std::vector<PointPrediction> out(static_cast<std::size_t>(rows));
    parallel_for(out.size(), options.workers, [&](std::size_t i) {
        std::vector<MixtureComponent> comps;
        comps.reserve(active.size());
        double mean = 0.0;
        double total = 0.0;
        for (std::size_t k = 0; k < active.size(); ++k) {
            const PredictiveDistribution& pd = per_member[k];
            const auto row = static_cast<Index>(i);
            MixtureComponent c{model.weights()[static_cast<Index>(active[k])],
                               pd.locations[row] + info.centering.y_mean, pd.scales[row], pd.df};
            mean += c.weight * c.location;
            total += c.weight;
            comps.push_back(c);
        }
        PointPrediction& pp = out[i];
        pp.mean = mean / total;
        pp.lower = mixture_quantile(comps, q_lo);
        pp.upper = mixture_quantile(comps, q_hi);
        if (options.keep_components) pp.components = std::move(comps);
    });
    return out;
}

void check_level(const PredictOptions& options) {
    if (!(options.level > 0.0 && options.level < 1.0)) throw ConfigError("predict: level must lie in (0, 1)");
}

} // namespace

std::vector<PointPrediction> predict_ensemble(const EnsembleModel& model, const RowMatrix& x_test,
                                              const PredictOptions& options) {
    const EnsembleInfo& info = model.info();
    if (x_test.cols() != info.p) {
        throw DimensionError("predict: test data has " + std::to_string(x_test.cols()) + " features, model has " +
                             std::to_string(info.p));
    }
    check_level(options);
    RowMatrix xc = x_test;
    xc.rowwise() -= info.centering.x_means.transpose();
    const std::vector<std::size_t> active = active_members(model);
    std::vector<PredictiveDistribution> per_member(active.size());
    parallel_for(active.size(), options.workers, [&](std::size_t k) {
        const Member& member = model.members()[active[k]];
        const ProjectionMatrix psi =
            generate(ProjectionSpec{ProjectionKind::feature, member.config.m, info.p, member.config.psi_seed});
        per_member[k] = member_predictive(member.posterior, apply(psi, xc));
    });
    return mix_members(model, active, per_member, x_test.rows(), options);
}

FitPredictResult fit_predict_ensemble(const RowMatrix& x, const Vector& y, const RowMatrix& x_test,
                                      const FitOptions& fit_options, const PredictOptions& predict_options) {
    if (x_test.cols() != x.cols()) {
        throw DimensionError("predict: test data has " + std::to_string(x_test.cols()) + " features, model has " +
                             std::to_string(x.cols()));
    }
    GridPolicy policy = make_grid_policy(x.rows(), x.cols(), fit_options.mode, fit_options.stride, fit_options.m_phi);
    policy.subsample_cap = fit_options.subsample_cap;
    check_level(predict_options);
    std::vector<PredictiveDistribution> test_pred;
    EnsembleModel model = fit_members_impl(x, y, build_grid(policy, fit_options.mode, fit_options.master_seed),
                                           fit_options, &x_test, &test_pred);
    const std::vector<std::size_t> active = active_members(model);
    std::vector<PredictiveDistribution> per_member;
    per_member.reserve(active.size());
    for (std::size_t l : active) per_member.push_back(std::move(test_pred[l]));
    auto preds = mix_members(model, active, per_member, x_test.rows(), predict_options);
    return FitPredictResult{std::move(model), std::move(preds)};
}

} // namespace cgp
