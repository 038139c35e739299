#pragma once

// Noisy swiss-roll benchmarks embedded in p dimensions:
//   t ~ U(3pi/2, 9pi/2), h ~ U(0, h_max),
//   x = (t cos t, h, t sin t, 0, ..., 0) + N(0, tau^2 I_p),
//   y = sin(5 pi t) + h^2 + N(0, 0.02^2).

#include "cgp/matrix.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace cgp {

struct SwissRollConfig {
    Index n = 100;
    Index p = 3;
    double tau = 0.0;
    double h_max = 3.0;
    double response_noise_sd = 0.02;
    std::uint64_t seed = 0;
    /// Overrides the feature-noise stream; latent draws and response noise
    /// still follow `seed`.
    std::optional<std::uint64_t> feature_noise_seed;

    void validate() const;
};

struct Latent {
    Vector t;
    Vector h;
};

struct Dataset {
    RowMatrix x;
    Vector y;
    std::optional<Latent> latent;

    Index n() const noexcept { return x.rows(); }
    Index p() const noexcept { return x.cols(); }
};

struct Centering {
    double y_mean = 0.0;
    Vector x_means;
};

double swiss_roll_response(double t, double h);

Dataset gen_swiss_roll(const SwissRollConfig& cfg);

std::pair<Dataset, Centering> center(const Dataset& ds);
/// Inverse of center().
Dataset uncenter(const Dataset& ds, const Centering& stats);

struct TrainTest {
    Dataset train;
    Dataset test;
};

/// First n_train rows become the training set, the rest the test set.
TrainTest split(const Dataset& ds, Index n_train);

enum class ScenarioTable { small_n, large_n };

/// small_n: n=100, h_max=3, (p, tau) over {10000, 20000} x {0.02, 0.05, 0.10};
/// large_n: n=5000, h_max=5, (p, tau) over {10000, 20000} x {0.03, 0.06, 0.10}.
/// Rows are ordered tau-major, p-minor.
std::vector<SwissRollConfig> scenario_matrix(ScenarioTable table);

} // namespace cgp
