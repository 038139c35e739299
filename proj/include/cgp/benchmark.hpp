#pragma once

// Replicated swiss-roll experiments: for each scenario and replicate, draw a
// fresh training and test set, fit each method, and record MSPE, interval
// coverage, median interval length and fit time.

#include "cgp/baselines.hpp"
#include "cgp/ensemble.hpp"
#include "cgp/eval.hpp"
#include "cgp/simdata.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cgp {

enum class Method { cgp, dsl };

std::string_view to_string(Method method) noexcept;
Method parse_method(std::string_view text);

struct BenchmarkOptions {
    std::vector<SwissRollConfig> scenarios; // seeds are overwritten per replicate
    int replicates = 10;
    Index n_test = 100;
    std::vector<Method> methods{Method::cgp};
    FitOptions fit;                 // master_seed is overwritten per replicate
    SpectralConfig dsl;             // seed is overwritten per replicate
    double dsl_ridge = 1e-2;
    double level = 0.95;
    int bootstrap_resamples = 50;
    std::uint64_t master_seed = 0;
};

struct ReplicateRecord {
    std::size_t scenario = 0;
    int replicate = 0;
    Method method = Method::cgp;
    std::uint64_t data_seed = 0;
    ReplicateResult result;
    FitTimings timings;   // CGP only
    std::string error;    // non-empty when the replicate failed
};

struct ScenarioSummary {
    std::size_t scenario = 0;
    SwissRollConfig config;
    Method method = Method::cgp;
    SummaryResult summary;
    int failed = 0;
};

struct BenchmarkReport {
    std::vector<ReplicateRecord> records;     // scenario, method, replicate order
    std::vector<ScenarioSummary> summaries;   // scenario, method order
};

/// Metrics of one method on one train/test pair. Throws on failure.
ReplicateResult evaluate_cgp(const Dataset& train, const Dataset& test, const FitOptions& fit, double level,
                             FitTimings* timings = nullptr);
ReplicateResult evaluate_dsl(const Dataset& train, const Dataset& test, const SpectralConfig& cfg, double ridge,
                             double level);

/// Draws n + n_test points from one stream and splits them.
TrainTest draw_replicate(SwissRollConfig cfg, Index n_test, std::uint64_t seed);

using ProgressFn = std::function<void(const ReplicateRecord&)>;

/// Failed replicates are recorded and skipped; the run continues.
BenchmarkReport run_benchmark(const BenchmarkOptions& options, const ProgressFn& progress = {});

} // namespace cgp
