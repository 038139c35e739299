#pragma once

// File formats.
//
// CSV (format version 1): optional leading comment lines starting with '#'
// (the first is "# cgp-manifest: <json>"), then a header line, then one row
// per sample. Data sets use the header y,x1,...,xp; feature-only files use
// x1,...,xp. Values are written with 17 significant digits.
//
// Model file (format "cgp-model", version 1): a JSON document holding the
// manifest, centering statistics, the Phi seed (low-rank), and one record per
// member with its Psi seed, m, lambda, log marginal likelihood, weight, solve
// vector and compressed training design. Psi entries are never stored; they
// are regenerated from the seed.

#include "cgp/ensemble.hpp"
#include "cgp/matrix.hpp"
#include "cgp/simdata.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cgp {

inline constexpr int kCsvFormatVersion = 1;
inline constexpr int kModelFormatVersion = 1;

std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> header;
    RowMatrix values;
    std::vector<std::string> comments;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const RowMatrix& values,
               const nlohmann::json* manifest = nullptr);

/// Reads y,x1..xp or x1..xp; `y` is empty for feature-only files.
Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const Dataset& ds, const nlohmann::json* manifest = nullptr);
void write_latent(const std::filesystem::path& path, const Latent& latent, const nlohmann::json* manifest = nullptr);

/// Returns the manifest embedded in a CSV comment line, if any.
std::optional<nlohmann::json> read_manifest(const CsvTable& table);

struct SaveOptions {
    /// Drop the stored design and solve vector of members whose weight is
    /// below 1e-300; they never contribute to predictions.
    bool slim = false;
};

nlohmann::json model_to_json(const EnsembleModel& model, const FitOptions& options, const nlohmann::json& manifest,
                             const SaveOptions& save = {});
EnsembleModel model_from_json(const nlohmann::json& doc);

void save_model(const std::filesystem::path& path, const EnsembleModel& model, const FitOptions& options,
                const nlohmann::json& manifest, const SaveOptions& save = {});
EnsembleModel load_model(const std::filesystem::path& path);

} // namespace cgp
