#include "cgp/simdata.hpp"

#include "cgp/errors.hpp"
#include "cgp/rng.hpp"

#include <cmath>
#include <numbers>

namespace cgp {
namespace {

constexpr std::uint64_t kLatentTag = 1;
constexpr std::uint64_t kFeatureTag = 2;
constexpr std::uint64_t kResponseTag = 3;

constexpr double kTLow = 1.5 * std::numbers::pi;
constexpr double kTHigh = 4.5 * std::numbers::pi;

} // namespace

void SwissRollConfig::validate() const {
    if (n < 1) throw ConfigError("swiss roll: n must be at least 1");
    if (p < 3) throw ConfigError("swiss roll: p must be at least 3");
    if (!(tau >= 0.0)) throw ConfigError("swiss roll: tau must be nonnegative");
    if (!(h_max > 0.0)) throw ConfigError("swiss roll: h_max must be positive");
    if (!(response_noise_sd >= 0.0)) throw ConfigError("swiss roll: response noise sd must be nonnegative");
}

double swiss_roll_response(double t, double h) { return std::sin(5.0 * std::numbers::pi * t) + h * h; }

Dataset gen_swiss_roll(const SwissRollConfig& cfg) {
    cfg.validate();
    const CounterStream latent(derive_key({cfg.seed, kLatentTag}));
    const CounterStream features(derive_key({cfg.feature_noise_seed.value_or(cfg.seed), kFeatureTag}));
    const CounterStream response(derive_key({cfg.seed, kResponseTag}));

    Dataset ds;
    ds.x.resize(cfg.n, cfg.p);
    ds.y.resize(cfg.n);
    Latent lat{Vector(cfg.n), Vector(cfg.n)};
    const auto p = static_cast<std::uint64_t>(cfg.p);
    for (Index i = 0; i < cfg.n; ++i) {
        const auto row = static_cast<std::uint64_t>(i);
        const double t = kTLow + (kTHigh - kTLow) * latent.uniform(2 * row);
        const double h = cfg.h_max * latent.uniform(2 * row + 1);
        lat.t[i] = t;
        lat.h[i] = h;
        auto x = row_span(ds.x, i);
        for (std::uint64_t j = 0; j < p; ++j) x[j] = cfg.tau == 0.0 ? 0.0 : cfg.tau * features.normal(row * p + j);
        x[0] += t * std::cos(t);
        x[1] += h;
        x[2] += t * std::sin(t);
        ds.y[i] = swiss_roll_response(t, h) +
                  (cfg.response_noise_sd == 0.0 ? 0.0 : cfg.response_noise_sd * response.normal(row));
    }
    ds.latent = std::move(lat);
    return ds;
}

std::pair<Dataset, Centering> center(const Dataset& ds) {
    if (ds.n() < 1) throw DataError("center: empty data set");
    Centering stats;
    stats.y_mean = ds.y.mean();
    stats.x_means = ds.x.colwise().mean().transpose();
    Dataset out = ds;
    out.y.array() -= stats.y_mean;
    out.x.rowwise() -= stats.x_means.transpose();
    return {std::move(out), std::move(stats)};
}

Dataset uncenter(const Dataset& ds, const Centering& stats) {
    if (stats.x_means.size() != ds.p()) throw DimensionError("uncenter: statistics do not match feature count");
    Dataset out = ds;
    out.y.array() += stats.y_mean;
    out.x.rowwise() += stats.x_means.transpose();
    return out;
}

TrainTest split(const Dataset& ds, Index n_train) {
    if (n_train < 0 || n_train > ds.n()) throw ConfigError("split: training size out of range");
    const Index n_test = ds.n() - n_train;
    TrainTest out;
    out.train.x = ds.x.topRows(n_train);
    out.train.y = ds.y.head(n_train);
    out.test.x = ds.x.bottomRows(n_test);
    out.test.y = ds.y.tail(n_test);
    if (ds.latent) {
        out.train.latent = Latent{ds.latent->t.head(n_train), ds.latent->h.head(n_train)};
        out.test.latent = Latent{ds.latent->t.tail(n_test), ds.latent->h.tail(n_test)};
    }
    return out;
}

std::vector<SwissRollConfig> scenario_matrix(ScenarioTable table) {
    const bool small = table == ScenarioTable::small_n;
    const Index n = small ? 100 : 5000;
    const double h_max = small ? 3.0 : 5.0;
    const double taus_small[] = {0.02, 0.05, 0.10};
    const double taus_large[] = {0.03, 0.06, 0.10};
    std::vector<SwissRollConfig> out;
    for (int k = 0; k < 3; ++k) {
        for (Index p : {Index{10000}, Index{20000}}) {
            SwissRollConfig cfg;
            cfg.n = n;
            cfg.p = p;
            cfg.tau = small ? taus_small[k] : taus_large[k];
            cfg.h_max = h_max;
            out.push_back(cfg);
        }
    }
    return out;
}

} // namespace cgp
