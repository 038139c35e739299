#include "cgp/benchmark.hpp"

#include "cgp/errors.hpp"
#include "cgp/rng.hpp"

#include <boost/math/distributions/normal.hpp>

#include <chrono>
#include <cmath>
#include <exception>

namespace cgp {
namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

} // namespace

std::string_view to_string(Method method) noexcept { return method == Method::cgp ? "cgp" : "dsl"; }

Method parse_method(std::string_view text) {
    if (text == "cgp") return Method::cgp;
    if (text == "dsl") return Method::dsl;
    throw ConfigError("unknown method '" + std::string(text) + "' (expected cgp or dsl)");
}

TrainTest draw_replicate(SwissRollConfig cfg, Index n_test, std::uint64_t seed) {
    if (n_test < 1) throw ConfigError("n_test must be at least 1");
    const Index n_train = cfg.n;
    cfg.n = n_train + n_test;
    cfg.seed = seed;
    return split(gen_swiss_roll(cfg), n_train);
}

ReplicateResult evaluate_cgp(const Dataset& train, const Dataset& test, const FitOptions& fit, double level,
                             FitTimings* timings) {
    PredictOptions popts;
    popts.level = level;
    popts.workers = fit.workers;
    popts.keep_components = false;
    const FitPredictResult res = fit_predict_ensemble(train.x, train.y, test.x, fit, popts);
    const EnsembleModel& model = res.model;
    const double fit_seconds = model.timings.wall_seconds;
    const auto& preds = res.predictions;
    Vector mean(test.n()), lower(test.n()), upper(test.n());
    for (Index i = 0; i < test.n(); ++i) {
        mean[i] = preds[static_cast<std::size_t>(i)].mean;
        lower[i] = preds[static_cast<std::size_t>(i)].lower;
        upper[i] = preds[static_cast<std::size_t>(i)].upper;
    }
    ReplicateResult r;
    r.mspe = mspe(as_span(mean), as_span(test.y));
    const IntervalMetrics im = interval_metrics(as_span(lower), as_span(upper), as_span(test.y));
    r.coverage = im.coverage;
    r.median_pi_length = im.median_length;
    r.runtime_seconds = fit_seconds;
    if (timings != nullptr) *timings = model.timings;
    return r;
}

ReplicateResult evaluate_dsl(const Dataset& train, const Dataset& test, const SpectralConfig& cfg, double ridge,
                             double level) {
    const auto start = std::chrono::steady_clock::now();
    const ClusterModel model = fit_dsl(train.x, train.y, cfg, ridge);
    const double fit_seconds = seconds_since(start);
    const DslPrediction pred = predict_dsl(model, test.x);
    const double z = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
    const double half = z * std::sqrt(model.residual_variance);
    const Vector lower = pred.values.array() - half;
    const Vector upper = pred.values.array() + half;
    ReplicateResult r;
    r.mspe = mspe(as_span(pred.values), as_span(test.y));
    const IntervalMetrics im = interval_metrics(as_span(lower), as_span(upper), as_span(test.y));
    r.coverage = im.coverage;
    r.median_pi_length = im.median_length;
    r.runtime_seconds = fit_seconds;
    return r;
}

BenchmarkReport run_benchmark(const BenchmarkOptions& options, const ProgressFn& progress) {
    if (options.replicates < 1) throw ConfigError("replicate count must be at least 1");
    if (options.scenarios.empty()) throw ConfigError("no scenarios to run");
    if (options.methods.empty()) throw ConfigError("no methods selected");
    if (!(options.level > 0.0 && options.level < 1.0)) throw ConfigError("interval level must lie in (0, 1)");
    for (const auto& s : options.scenarios) s.validate();

    BenchmarkReport report;
    for (std::size_t s = 0; s < options.scenarios.size(); ++s) {
        const SwissRollConfig& scenario = options.scenarios[s];
        std::vector<std::vector<ReplicateRecord>> per_method(options.methods.size());
        for (int rep = 0; rep < options.replicates; ++rep) {
            const std::uint64_t data_seed = derive_key({options.master_seed, 1, s, static_cast<std::uint64_t>(rep)});
            std::optional<TrainTest> data;
            std::string data_error;
            try {
                data = draw_replicate(scenario, options.n_test, data_seed);
            } catch (const std::exception& e) {
                data_error = e.what();
            }
            for (std::size_t k = 0; k < options.methods.size(); ++k) {
                ReplicateRecord rec;
                rec.scenario = s;
                rec.replicate = rep;
                rec.method = options.methods[k];
                rec.data_seed = data_seed;
                rec.error = data_error;
                if (data) {
                    try {
                        if (rec.method == Method::cgp) {
                            FitOptions fit = options.fit;
                            fit.master_seed = derive_key({options.master_seed, 2, s, static_cast<std::uint64_t>(rep)});
                            rec.result = evaluate_cgp(data->train, data->test, fit, options.level, &rec.timings);
                        } else {
                            SpectralConfig cfg = options.dsl;
                            cfg.seed = derive_key({options.master_seed, 3, s, static_cast<std::uint64_t>(rep)});
                            rec.result = evaluate_dsl(data->train, data->test, cfg, options.dsl_ridge, options.level);
                        }
                    } catch (const std::exception& e) {
                        rec.error = e.what();
                    }
                }
                if (progress) progress(rec);
                per_method[k].push_back(rec);
            }
        }
        for (std::size_t k = 0; k < options.methods.size(); ++k) {
            std::vector<ReplicateResult> ok;
            int failed = 0;
            for (const auto& rec : per_method[k]) {
                if (rec.error.empty()) ok.push_back(rec.result);
                else ++failed;
                report.records.push_back(rec);
            }
            ScenarioSummary sum;
            sum.scenario = s;
            sum.config = scenario;
            sum.method = options.methods[k];
            sum.failed = failed;
            if (!ok.empty()) {
                sum.summary = summarize(ok, options.bootstrap_resamples,
                                        derive_key({options.master_seed, 4, s, k}));
            }
            report.summaries.push_back(sum);
        }
    }
    return report;
}

} // namespace cgp
