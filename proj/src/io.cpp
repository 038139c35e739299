#include "cgp/io.hpp"

#include "cgp/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace cgp {
namespace {

using nlohmann::json;

constexpr std::string_view kManifestPrefix = "# cgp-manifest: ";

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    return out;
}

json double_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double double_from(const json& j) {
    return j.is_null() ? -std::numeric_limits<double>::infinity() : j.get<double>();
}

json matrix_to_json(const RowMatrix& m) {
    return json{{"rows", m.rows()}, {"cols", m.cols()},
                {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

RowMatrix matrix_from_json(const json& j) {
    const Index rows = j.at("rows").get<Index>();
    const Index cols = j.at("cols").get<Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Index>(data.size()) != rows * cols) throw DataError("model file: matrix data has the wrong size");
    RowMatrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

Vector vector_from_json(const json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(data.data(), static_cast<Index>(data.size()));
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    std::vector<double> values;
    Index rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty()) continue;
        if (view.front() == '#') {
            table.comments.emplace_back(view);
            continue;
        }
        const auto fields = split_fields(view);
        if (table.header.empty()) {
            for (auto f : fields) table.header.emplace_back(trim(f));
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": row " + std::to_string(rows + 1) +
                            ": expected " +
                            std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const std::string_view f = trim(fields[c]);
            double v = 0.0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": row " + std::to_string(rows + 1) +
                                ", column " + std::to_string(c + 1) +
                                " ('" + table.header[c] + "') is not a number: '" + std::string(f) + "'");
            }
            values.push_back(v);
        }
        ++rows;
    }
    if (table.header.empty()) throw DataError(path.string() + ": missing header line");
    table.values = Eigen::Map<RowMatrix>(values.data(), rows, static_cast<Index>(table.header.size()));
    return table;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const RowMatrix& values,
               const nlohmann::json* manifest) {
    if (static_cast<Index>(header.size()) != values.cols()) throw DimensionError("write_csv: header width mismatch");
    std::ofstream out = open_out(path);
    if (manifest != nullptr) out << kManifestPrefix << manifest->dump() << '\n';
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    std::string row;
    for (Index i = 0; i < values.rows(); ++i) {
        row.clear();
        for (Index c = 0; c < values.cols(); ++c) {
            if (c) row += ',';
            row += format_double(values(i, c));
        }
        row += '\n';
        out << row;
    }
    if (!out) throw DataError("failed writing " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    Dataset ds;
    const bool has_y = !t.header.empty() && t.header.front() == "y";
    const Index first_x = has_y ? 1 : 0;
    for (std::size_t c = static_cast<std::size_t>(first_x); c < t.header.size(); ++c) {
        const std::string expected = "x" + std::to_string(c + 1 - static_cast<std::size_t>(first_x));
        if (t.header[c] != expected) {
            throw DataError(path.string() + ": header column " + std::to_string(c + 1) + " is '" + t.header[c] +
                            "', expected '" + expected + "'");
        }
    }
    if (has_y) ds.y = t.values.col(0);
    ds.x = t.values.rightCols(t.values.cols() - first_x);
    if (!ds.x.allFinite() || !ds.y.allFinite()) throw DataError(path.string() + ": non-finite values");
    return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds, const nlohmann::json* manifest) {
    std::vector<std::string> header{"y"};
    for (Index j = 0; j < ds.p(); ++j) header.push_back("x" + std::to_string(j + 1));
    RowMatrix values(ds.n(), ds.p() + 1);
    values.col(0) = ds.y;
    values.rightCols(ds.p()) = ds.x;
    write_csv(path, header, values, manifest);
}

void write_latent(const std::filesystem::path& path, const Latent& latent, const nlohmann::json* manifest) {
    RowMatrix values(latent.t.size(), 2);
    values.col(0) = latent.t;
    values.col(1) = latent.h;
    write_csv(path, {"t", "h"}, values, manifest);
}

std::optional<nlohmann::json> read_manifest(const CsvTable& table) {
    for (const auto& c : table.comments) {
        if (c.rfind(kManifestPrefix, 0) == 0) return json::parse(c.substr(kManifestPrefix.size()));
    }
    return std::nullopt;
}

json model_to_json(const EnsembleModel& model, const FitOptions& options, const json& manifest,
                   const SaveOptions& save) {
    const EnsembleInfo& info = model.info();
    json doc;
    doc["format"] = "cgp-model";
    doc["version"] = kModelFormatVersion;
    doc["manifest"] = manifest;
    doc["mode"] = std::string(to_string(info.mode));
    doc["n"] = info.n;
    doc["p"] = info.p;
    doc["master_seed"] = info.master_seed;
    doc["centering"] = {{"y_mean", info.centering.y_mean},
                        {"x_means", std::vector<double>(info.centering.x_means.data(),
                                                        info.centering.x_means.data() + info.centering.x_means.size())}};
    if (info.mode == Mode::lowrank) {
        doc["phi"] = {{"rows", info.m_phi},
                      {"identity", info.phi_identity},
                      {"jitter", {{"initial", options.jitter.initial}, {"max", options.jitter.max},
                                  {"factor", options.jitter.factor}}}};
    }
    json members = json::array();
    for (std::size_t l = 0; l < model.members().size(); ++l) {
        const Member& m = model.members()[l];
        const double weight = model.weights()[static_cast<Index>(l)];
        json rec;
        rec["psi_seed"] = m.config.psi_seed;
        rec["lambda_seed"] = m.config.lambda_seed;
        rec["m"] = m.config.m;
        rec["lambda"] = m.config.lambda;
        rec["mode"] = std::string(to_string(m.config.mode));
        rec["log_ml"] = double_or_null(m.log_ml);
        rec["weight"] = weight;
        rec["phi_seed"] = m.phi_seed;
        if (save.slim && weight < 1e-300) {
            rec["dropped"] = true;
            members.push_back(std::move(rec));
            continue;
        }
        std::visit(
            [&](const auto& post) {
                rec["quad"] = post.quad();
                rec["alpha"] = std::vector<double>(post.alpha().data(), post.alpha().data() + post.alpha().size());
                rec["design"] = matrix_to_json(post.train());
            },
            m.posterior);
        members.push_back(std::move(rec));
    }
    doc["members"] = std::move(members);
    json failures = json::array();
    for (const auto& f : model.failures()) failures.push_back({{"m", f.config.m}, {"reason", f.reason}});
    doc["failures"] = std::move(failures);
    return doc;
}

EnsembleModel model_from_json(const json& doc) {
    if (doc.value("format", std::string()) != "cgp-model") throw DataError("not a cgp model file");
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
        throw DataError("model file format version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kModelFormatVersion) + ")");
    }
    EnsembleInfo info;
    info.mode = parse_mode(doc.at("mode").get<std::string>());
    info.n = doc.at("n").get<Index>();
    info.p = doc.at("p").get<Index>();
    info.master_seed = doc.at("master_seed").get<std::uint64_t>();
    info.centering.y_mean = doc.at("centering").at("y_mean").get<double>();
    info.centering.x_means = vector_from_json(doc.at("centering").at("x_means"));
    if (info.centering.x_means.size() != info.p) throw DataError("model file: centering vector has the wrong length");
    JitterPolicy jitter;
    if (info.mode == Mode::lowrank) {
        const json& phi = doc.at("phi");
        info.m_phi = phi.at("rows").get<Index>();
        info.phi_identity = phi.at("identity").get<bool>();
        jitter.initial = phi.at("jitter").at("initial").get<double>();
        jitter.max = phi.at("jitter").at("max").get<double>();
        jitter.factor = phi.at("jitter").at("factor").get<double>();
    }
    std::map<std::uint64_t, SampleMap> phis;
    auto sample_map = [&](std::uint64_t seed) -> const SampleMap& {
        auto it = phis.find(seed);
        if (it == phis.end()) {
            it = phis.emplace(seed, info.phi_identity ? SampleMap::identity(info.n)
                                                      : SampleMap::gaussian(info.m_phi, info.n, seed))
                     .first;
        }
        return it->second;
    };

    std::vector<Member> members;
    std::vector<double> weights;
    for (const json& rec : doc.at("members")) {
        if (rec.value("dropped", false)) continue;
        MemberConfig cfg;
        cfg.psi_seed = rec.at("psi_seed").get<std::uint64_t>();
        cfg.lambda_seed = rec.at("lambda_seed").get<std::uint64_t>();
        cfg.m = rec.at("m").get<Index>();
        cfg.lambda = rec.at("lambda").get<double>();
        cfg.mode = parse_mode(rec.at("mode").get<std::string>());
        RowMatrix design = matrix_from_json(rec.at("design"));
        if (design.rows() != info.n || design.cols() != cfg.m) throw DataError("model file: design has the wrong shape");
        Vector alpha = vector_from_json(rec.at("alpha"));
        const double quad = rec.at("quad").get<double>();
        const double log_ml = double_from(rec.at("log_ml"));
        const auto phi_seed = rec.at("phi_seed").get<std::uint64_t>();
        const double weight = rec.at("weight").get<double>();
        // Members that never contribute to predictions skip the rebuild.
        const bool active = weight >= 1e-300;
        const Bandwidth lambda(cfg.lambda);
        if (cfg.mode == Mode::exact) {
            members.push_back(Member{cfg,
                                     active ? GpPosterior::restore(std::move(design), lambda, std::move(alpha), quad)
                                            : GpPosterior::stored(std::move(design), lambda, std::move(alpha), quad),
                                     log_ml, 0});
        } else {
            members.push_back(Member{cfg,
                                     active ? LowRankPosterior::restore(std::move(design), lambda, sample_map(phi_seed),
                                                                        jitter, std::move(alpha), quad)
                                            : LowRankPosterior::stored(std::move(design), lambda, std::move(alpha), quad),
                                     log_ml, phi_seed});
        }
        weights.push_back(weight);
    }
    if (members.empty()) throw DataError("model file has no usable members");
    return EnsembleModel(std::move(info), std::move(members),
                         Eigen::Map<const Vector>(weights.data(), static_cast<Index>(weights.size())));
}

void save_model(const std::filesystem::path& path, const EnsembleModel& model, const FitOptions& options,
                const json& manifest, const SaveOptions& save) {
    std::ofstream out = open_out(path);
    out << model_to_json(model, options, manifest, save).dump() << '\n';
    if (!out) throw DataError("failed writing " + path.string());
}

EnsembleModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("model file " + path.string() + " is not valid JSON: " + e.what());
    }
    try {
        return model_from_json(doc);
    } catch (const json::exception& e) {
        throw DataError("model file " + path.string() + " is malformed: " + e.what());
    }
}

} // namespace cgp
