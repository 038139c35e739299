#include "cgp/eval.hpp"

#include "cgp/errors.hpp"
#include "cgp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace cgp {

double mspe(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) throw DimensionError("mspe: prediction and truth lengths differ");
    if (pred.empty()) throw DimensionError("mspe: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

double median(std::span<const double> values) {
    if (values.empty()) throw DimensionError("median: empty input");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

IntervalMetrics interval_metrics(std::span<const double> lower, std::span<const double> upper,
                                 std::span<const double> truth) {
    if (lower.size() != upper.size() || lower.size() != truth.size()) {
        throw DimensionError("interval_metrics: input lengths differ");
    }
    if (truth.empty()) throw DimensionError("interval_metrics: empty input");
    std::size_t covered = 0;
    std::vector<double> lengths(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (lower[i] > upper[i]) throw DataError("interval_metrics: lower bound exceeds upper bound");
        if (lower[i] <= truth[i] && truth[i] <= upper[i]) ++covered;
        lengths[i] = upper[i] - lower[i];
    }
    return {static_cast<double>(covered) / static_cast<double>(truth.size()), median(lengths)};
}

double bootstrap_se(std::span<const double> values, int resamples, std::uint64_t seed) {
    if (values.size() < 2) throw ConfigError("bootstrap_se: need at least two values");
    if (resamples < 2) throw ConfigError("bootstrap_se: need at least two resamples");
    Rng rng(derive_key({seed, 0x626f6f74}));
    const std::size_t n = values.size();
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (double& m : means) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += values[rng.below(n)];
        m = s / static_cast<double>(n);
    }
    double mean = 0.0;
    for (double m : means) mean += m;
    mean /= static_cast<double>(means.size());
    double ss = 0.0;
    for (double m : means) ss += (m - mean) * (m - mean);
    return std::sqrt(ss / static_cast<double>(means.size() - 1));
}

Distribution5 five_number_summary(std::span<const double> values) {
    if (values.empty()) throw DimensionError("five_number_summary: empty input");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    auto at = [&](double q) {
        const double pos = q * static_cast<double>(v.size() - 1);
        const auto k = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(k);
        return k + 1 < v.size() ? v[k] + frac * (v[k + 1] - v[k]) : v[k];
    };
    return {v.front(), at(0.25), at(0.5), at(0.75), v.back()};
}

SummaryResult summarize(std::span<const ReplicateResult> reps, int resamples, std::uint64_t seed) {
    if (reps.empty()) throw ConfigError("summarize: no replicates");
    std::vector<double> mspes, cover, length;
    double runtime = 0.0;
    for (const auto& r : reps) {
        mspes.push_back(r.mspe);
        cover.push_back(r.coverage);
        length.push_back(r.median_pi_length);
        runtime += r.runtime_seconds;
    }
    SummaryResult s;
    s.replicates = reps.size();
    for (double m : mspes) s.mean_mspe += m;
    s.mean_mspe /= static_cast<double>(mspes.size());
    if (mspes.size() >= 2) s.bootstrap_se = bootstrap_se(mspes, resamples, seed);
    s.coverage = five_number_summary(cover);
    s.pi_length = five_number_summary(length);
    s.mean_runtime_seconds = runtime / static_cast<double>(reps.size());
    return s;
}

} // namespace cgp
