#pragma once

#include "cgp/matrix.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace cgp {

/// Mean squared prediction error.
double mspe(std::span<const double> pred, std::span<const double> truth);

struct IntervalMetrics {
    double coverage = 0.0;
    double median_length = 0.0;
};

/// Coverage counts truth in the closed interval [lower, upper].
IntervalMetrics interval_metrics(std::span<const double> lower, std::span<const double> upper,
                                 std::span<const double> truth);

/// Standard error of the mean from `resamples` bootstrap data sets drawn with
/// replacement from `values`: the standard deviation of the resample means.
double bootstrap_se(std::span<const double> values, int resamples = 50, std::uint64_t seed = 0);

double median(std::span<const double> values);

struct ReplicateResult {
    double mspe = 0.0;
    double coverage = 0.0;
    double median_pi_length = 0.0;
    double runtime_seconds = 0.0;
};

struct Distribution5 {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

Distribution5 five_number_summary(std::span<const double> values);

struct SummaryResult {
    double mean_mspe = 0.0;
    std::optional<double> bootstrap_se; // absent with fewer than two replicates
    Distribution5 coverage;
    Distribution5 pi_length;
    double mean_runtime_seconds = 0.0;
    std::size_t replicates = 0;
};

SummaryResult summarize(std::span<const ReplicateResult> reps, int resamples = 50, std::uint64_t seed = 0);

} // namespace cgp
