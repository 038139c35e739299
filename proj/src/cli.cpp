#include "cgp/cli.hpp"

#include "cgp/benchmark.hpp"
#include "cgp/errors.hpp"
#include "cgp/io.hpp"
#include "cgp/parallel.hpp"
#include "cgp/simd.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace cgp {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kToolVersion = "1.0.0";

json make_manifest(const std::string& command, json flags, std::uint64_t seed) {
    return json{{"tool", "cgp"},
                {"version", kToolVersion},
                {"command", command},
                {"flags", std::move(flags)},
                {"seed", seed},
                {"formats", {{"csv", kCsvFormatVersion}, {"model", kModelFormatVersion}}}};
}

void write_json(const fs::path& path, const json& doc) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

struct SimulateArgs {
    Index n = 100;
    Index p = 3;
    double tau = 0.0;
    double h_max = 3.0;
    double noise_sd = 0.02;
    std::uint64_t seed = 0;
    Index n_test = 0;
    std::string out = ".";
    bool latent = false;
};

void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    SwissRollConfig cfg;
    cfg.n = a.n + a.n_test;
    cfg.p = a.p;
    cfg.tau = a.tau;
    cfg.h_max = a.h_max;
    cfg.response_noise_sd = a.noise_sd;
    cfg.seed = a.seed;
    if (a.n < 1) throw ConfigError("--n must be at least 1");
    if (a.n_test < 0) throw ConfigError("--n-test must be nonnegative");
    cfg.validate();
    const json manifest = make_manifest(
        "simulate",
        {{"n", a.n}, {"p", a.p}, {"tau", a.tau}, {"hmax", a.h_max}, {"noise_sd", a.noise_sd}, {"n_test", a.n_test}},
        a.seed);
    const TrainTest tt = split(gen_swiss_roll(cfg), a.n);
    const fs::path dir(a.out);
    write_dataset(dir / "train.csv", tt.train, &manifest);
    out << "wrote " << (dir / "train.csv").string() << " (" << tt.train.n() << " rows)\n";
    if (a.n_test > 0) {
        write_dataset(dir / "test.csv", tt.test, &manifest);
        out << "wrote " << (dir / "test.csv").string() << " (" << tt.test.n() << " rows)\n";
    }
    if (a.latent) {
        write_latent(dir / "train_latent.csv", *tt.train.latent, &manifest);
        if (a.n_test > 0) write_latent(dir / "test_latent.csv", *tt.test.latent, &manifest);
    }
}

struct FitArgs {
    std::string train;
    std::string model = "model.json";
    std::string mode = "exact";
    Index stride = 1;
    Index m_phi = 150;
    std::size_t subsample_cap = 1000;
    unsigned workers = 0;
    bool slim = false;
    bool per_member_phi = false;
    std::uint64_t seed = 0;
};

FitOptions fit_options(const FitArgs& a) {
    FitOptions o;
    o.mode = parse_mode(a.mode);
    o.stride = a.stride;
    o.m_phi = a.m_phi;
    o.subsample_cap = a.subsample_cap;
    o.workers = a.workers;
    o.per_member_phi = a.per_member_phi;
    o.master_seed = a.seed;
    if (o.stride < 1) throw ConfigError("--stride must be at least 1");
    if (o.m_phi < 1) throw ConfigError("--m-phi must be at least 1");
    if (o.subsample_cap < 2) throw ConfigError("--subsample-cap must be at least 2");
    return o;
}

void cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
    const FitOptions options = fit_options(a);
    const Dataset train = read_dataset(a.train);
    if (train.y.size() == 0) throw DataError(a.train + ": training file needs a 'y' column");
    const EnsembleModel model = fit_ensemble(train.x, train.y, options);
    for (const auto& w : model.warnings()) err << "warning: " << w << '\n';
    for (const auto& f : model.failures()) err << "warning: member m=" << f.config.m << " dropped: " << f.reason << '\n';
    const json manifest = make_manifest("fit",
                                        {{"mode", a.mode},
                                         {"stride", a.stride},
                                         {"m_phi", a.m_phi},
                                         {"subsample_cap", a.subsample_cap},
                                         {"slim", a.slim},
                                         {"per_member_phi", a.per_member_phi}},
                                        a.seed);
    SaveOptions save;
    save.slim = a.slim;
    save_model(a.model, model, options, manifest, save);
    err << "member          m          lambda          log_ml          weight\n";
    for (std::size_t l = 0; l < model.members().size(); ++l) {
        const Member& m = model.members()[l];
        char line[160];
        std::snprintf(line, sizeof line, "%6zu %10lld %15.6g %15.6g %15.6g\n", l, static_cast<long long>(m.config.m),
                      m.config.lambda, m.log_ml, model.weights()[static_cast<Index>(l)]);
        err << line;
    }
    out << "fitted " << model.members().size() << " members (" << to_string(options.mode) << ") in "
        << fixed(model.timings.wall_seconds, 3) << " s; wrote " << a.model << '\n';
}

struct PredictArgs {
    std::string model;
    std::string test;
    std::string out = "predictions.csv";
    double level = 0.95;
    unsigned workers = 0;
};

void cmd_predict(const PredictArgs& a, std::ostream& out) {
    if (!(a.level > 0.0 && a.level < 1.0)) throw ConfigError("--level must lie in (0, 1)");
    const EnsembleModel model = load_model(a.model);
    const Dataset test = read_dataset(a.test);
    if (test.p() != model.info().p) {
        throw DimensionError("test file has " + std::to_string(test.p()) + " feature columns but the model expects " +
                             std::to_string(model.info().p));
    }
    PredictOptions popts;
    popts.level = a.level;
    popts.workers = a.workers;
    popts.keep_components = false;
    const auto preds = predict_ensemble(model, test.x, popts);
    RowMatrix values(static_cast<Index>(preds.size()), 3);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        values(static_cast<Index>(i), 0) = preds[i].mean;
        values(static_cast<Index>(i), 1) = preds[i].lower;
        values(static_cast<Index>(i), 2) = preds[i].upper;
    }
    const json manifest = make_manifest("predict", {{"level", a.level}}, model.info().master_seed);
    write_csv(a.out, {"mean", "lower", "upper"}, values, &manifest);
    out << "wrote " << a.out << " (" << preds.size() << " rows)\n";
}

struct BenchmarkArgs {
    std::string scenario = "table2";
    int reps = 10;
    std::vector<std::string> methods{"cgp"};
    std::string out_dir = "bench";
    Index n_test = 100;
    std::uint64_t seed = 0;
    std::string mode; // default: exact for table2, lowrank for table4
    Index stride = 1;
    Index m_phi = 150;
    std::size_t subsample_cap = 1000;
    unsigned workers = 0;
    Index n_clust = 10;
    double ridge = 1e-2;
    double level = 0.95;
    int bootstrap = 50;
    std::vector<std::size_t> rows;
    // custom scenario
    Index n = 100;
    Index p = 1000;
    double tau = 0.02;
    double h_max = 3.0;
};

json summary_json(const SummaryResult& s) {
    auto five = [](const Distribution5& d) {
        return json{{"min", d.min}, {"q1", d.q1}, {"median", d.median}, {"q3", d.q3}, {"max", d.max}};
    };
    return json{{"replicates", s.replicates},
                {"mean_mspe", s.mean_mspe},
                {"bootstrap_se", s.bootstrap_se ? json(*s.bootstrap_se) : json(nullptr)},
                {"coverage", five(s.coverage)},
                {"pi_length", five(s.pi_length)},
                {"mean_runtime_seconds", s.mean_runtime_seconds}};
}

void cmd_benchmark(const BenchmarkArgs& a, std::ostream& out, std::ostream& err) {
    BenchmarkOptions o;
    std::string mode = a.mode;
    if (a.scenario == "table2") {
        o.scenarios = scenario_matrix(ScenarioTable::small_n);
        if (mode.empty()) mode = "exact";
    } else if (a.scenario == "table4") {
        o.scenarios = scenario_matrix(ScenarioTable::large_n);
        if (mode.empty()) mode = "lowrank";
    } else if (a.scenario == "custom") {
        SwissRollConfig cfg;
        cfg.n = a.n;
        cfg.p = a.p;
        cfg.tau = a.tau;
        cfg.h_max = a.h_max;
        o.scenarios = {cfg};
        if (mode.empty()) mode = "exact";
    } else {
        throw ConfigError("unknown scenario '" + a.scenario + "' (expected table2, table4 or custom)");
    }
    if (!a.rows.empty()) {
        std::vector<SwissRollConfig> picked;
        for (std::size_t r : a.rows) {
            if (r < 1 || r > o.scenarios.size()) throw ConfigError("--rows entries must lie in 1.." + std::to_string(o.scenarios.size()));
            picked.push_back(o.scenarios[r - 1]);
        }
        o.scenarios = std::move(picked);
    }
    o.replicates = a.reps;
    o.n_test = a.n_test;
    o.methods.clear();
    for (const auto& m : a.methods) o.methods.push_back(parse_method(m));
    o.fit.mode = parse_mode(mode);
    o.fit.stride = a.stride;
    o.fit.m_phi = a.m_phi;
    o.fit.subsample_cap = a.subsample_cap;
    o.fit.workers = a.workers;
    o.dsl.n_clust = a.n_clust;
    o.dsl_ridge = a.ridge;
    o.level = a.level;
    o.bootstrap_resamples = a.bootstrap;
    o.master_seed = a.seed;
    if (a.stride < 1) throw ConfigError("--stride must be at least 1");
    if (a.n_clust < 1) throw ConfigError("--n-clust must be at least 1");
    if (a.ridge < 0.0) throw ConfigError("--ridge must be nonnegative");
    if (a.bootstrap < 1) throw ConfigError("--bootstrap must be at least 1");

    const json manifest = make_manifest("benchmark",
                                        {{"scenario", a.scenario},
                                         {"reps", a.reps},
                                         {"methods", a.methods},
                                         {"n_test", a.n_test},
                                         {"mode", mode},
                                         {"stride", a.stride},
                                         {"m_phi", a.m_phi},
                                         {"subsample_cap", a.subsample_cap},
                                         {"n_clust", a.n_clust},
                                         {"ridge", a.ridge},
                                         {"level", a.level},
                                         {"bootstrap", a.bootstrap},
                                         {"rows", a.rows}},
                                        a.seed);

    const BenchmarkReport report = run_benchmark(o, [&](const ReplicateRecord& r) {
        err << "scenario " << r.scenario + 1 << " rep " << r.replicate + 1 << " " << to_string(r.method) << ": ";
        if (r.error.empty()) {
            err << "mspe=" << fixed(r.result.mspe, 5) << " coverage=" << fixed(r.result.coverage, 3)
                << " length=" << fixed(r.result.median_pi_length, 4) << " time=" << fixed(r.result.runtime_seconds, 3)
                << "s\n";
        } else {
            err << "failed: " << r.error << '\n';
        }
    });

    const fs::path dir(a.out_dir);
    json results;
    results["manifest"] = manifest;
    json scen = json::array();
    for (const auto& s : o.scenarios) {
        scen.push_back({{"n", s.n}, {"p", s.p}, {"tau", s.tau}, {"hmax", s.h_max}, {"noise_sd", s.response_noise_sd}});
    }
    results["scenarios"] = scen;
    json reps = json::array();
    for (const auto& r : report.records) {
        json rec{{"scenario", r.scenario + 1},
                 {"replicate", r.replicate + 1},
                 {"method", std::string(to_string(r.method))},
                 {"data_seed", r.data_seed}};
        if (r.error.empty()) {
            rec["mspe"] = r.result.mspe;
            rec["coverage"] = r.result.coverage;
            rec["median_pi_length"] = r.result.median_pi_length;
            rec["runtime_seconds"] = r.result.runtime_seconds;
            if (r.method == Method::cgp) {
                rec["phases"] = {{"compress_seconds", r.timings.compress_seconds},
                                 {"fit_seconds", r.timings.fit_seconds},
                                 {"wall_seconds", r.timings.wall_seconds}};
            }
        } else {
            rec["error"] = r.error;
        }
        reps.push_back(std::move(rec));
    }
    results["replicates"] = std::move(reps);
    json sums = json::array();
    for (const auto& s : report.summaries) {
        json j = summary_json(s.summary);
        j["scenario"] = s.scenario + 1;
        j["method"] = std::string(to_string(s.method));
        j["failed"] = s.failed;
        if (!s.summary.bootstrap_se) j["bootstrap_se_note"] = "fewer than two replicates";
        sums.push_back(std::move(j));
    }
    results["summaries"] = std::move(sums);
    write_json(dir / "results.json", results);

    {
        std::ofstream csv(dir / "replicates.csv", std::ios::binary);
        if (!csv) throw DataError("cannot write " + (dir / "replicates.csv").string());
        csv << "# cgp-manifest: " << manifest.dump() << '\n';
        csv << "scenario,n,p,tau,method,replicate,mspe,coverage,median_pi_length,runtime_seconds,error\n";
        for (const auto& r : report.records) {
            const auto& s = o.scenarios[r.scenario];
            csv << r.scenario + 1 << ',' << s.n << ',' << s.p << ',' << format_double(s.tau) << ','
                << to_string(r.method) << ',' << r.replicate + 1 << ',';
            if (r.error.empty()) {
                csv << format_double(r.result.mspe) << ',' << format_double(r.result.coverage) << ','
                    << format_double(r.result.median_pi_length) << ',' << format_double(r.result.runtime_seconds)
                    << ",\n";
            } else {
                std::string e = r.error;
                for (char& c : e) if (c == ',' || c == '\n') c = ';';
                csv << ",,,," << e << '\n';
            }
        }
    }
    {
        std::ofstream csv(dir / "summary.csv", std::ios::binary);
        if (!csv) throw DataError("cannot write " + (dir / "summary.csv").string());
        csv << "# cgp-manifest: " << manifest.dump() << '\n';
        csv << "scenario,n,p,tau,method,replicates,failed,mean_mspe,bootstrap_se,coverage_median,"
               "pi_length_median,mean_runtime_seconds\n";
        for (const auto& s : report.summaries) {
            csv << s.scenario + 1 << ',' << s.config.n << ',' << s.config.p << ',' << format_double(s.config.tau)
                << ',' << to_string(s.method) << ',' << s.summary.replicates << ',' << s.failed << ','
                << format_double(s.summary.mean_mspe) << ','
                << (s.summary.bootstrap_se ? format_double(*s.summary.bootstrap_se) : std::string("NA")) << ','
                << format_double(s.summary.coverage.median) << ',' << format_double(s.summary.pi_length.median)
                << ',' << format_double(s.summary.mean_runtime_seconds) << '\n';
        }
    }

    out << "scenario      n       p    tau  method  reps   mean_mspe   boot_se  cov_med  len_med\n";
    for (const auto& s : report.summaries) {
        char line[200];
        std::snprintf(line, sizeof line, "%8zu %6lld %7lld %6.3f  %-6s %5zu %11.4f %9s %8.3f %8.3f\n", s.scenario + 1,
                      static_cast<long long>(s.config.n), static_cast<long long>(s.config.p), s.config.tau,
                      std::string(to_string(s.method)).c_str(), s.summary.replicates, s.summary.mean_mspe,
                      s.summary.bootstrap_se ? fixed(*s.summary.bootstrap_se, 4).c_str() : "NA",
                      s.summary.coverage.median, s.summary.pi_length.median);
        out << line;
    }
    out << "wrote " << (dir / "results.json").string() << ", replicates.csv, summary.csv\n";
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Compressed Gaussian-process regression"};
    app.require_subcommand(1);
    std::string simd_choice;
    app.add_option("--simd", simd_choice, "Force a kernel set: scalar, avx2 or neon");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate swiss-roll train/test CSV files");
    simulate->add_option("--n", sim.n, "Training rows")->capture_default_str();
    simulate->add_option("--p", sim.p, "Feature dimension")->capture_default_str();
    simulate->add_option("--tau", sim.tau, "Feature noise standard deviation")->capture_default_str();
    simulate->add_option("--hmax", sim.h_max, "Upper bound of the height coordinate")->capture_default_str();
    simulate->add_option("--noise-sd", sim.noise_sd, "Response noise standard deviation")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
    simulate->add_option("--n-test", sim.n_test, "Test rows (0 writes no test file)")->capture_default_str();
    simulate->add_option("--out", sim.out, "Output directory")->capture_default_str();
    simulate->add_flag("--latent", sim.latent, "Also write the latent (t, h) coordinates");

    FitArgs fit;
    auto* fitc = app.add_subcommand("fit", "Fit a model-averaged compressed GP");
    fitc->add_option("--train", fit.train, "Training CSV (y,x1,...,xp)")->required();
    fitc->add_option("--model", fit.model, "Output model file")->capture_default_str();
    fitc->add_option("--mode", fit.mode, "exact or lowrank")->capture_default_str();
    fitc->add_option("--stride", fit.stride, "Step between compression dimensions")->capture_default_str();
    fitc->add_option("--m-phi", fit.m_phi, "Rows of the sample compression (lowrank)")->capture_default_str();
    fitc->add_option("--subsample-cap", fit.subsample_cap, "Points used for bandwidth bounds")->capture_default_str();
    fitc->add_option("--workers", fit.workers, "Worker threads (0: CGP_WORKERS or all cores)")->capture_default_str();
    fitc->add_option("--seed", fit.seed, "Master seed")->capture_default_str();
    fitc->add_flag("--slim", fit.slim, "Do not store members with negligible weight");
    fitc->add_flag("--per-member-phi", fit.per_member_phi, "Draw an independent sample compression per member");

    PredictArgs pred;
    auto* predc = app.add_subcommand("predict", "Predict with a saved model");
    predc->add_option("--model", pred.model, "Model file")->required();
    predc->add_option("--test", pred.test, "CSV with x1,...,xp (a y column is ignored)")->required();
    predc->add_option("--out", pred.out, "Output CSV")->capture_default_str();
    predc->add_option("--level", pred.level, "Interval level")->capture_default_str();
    predc->add_option("--workers", pred.workers, "Worker threads")->capture_default_str();

    BenchmarkArgs bench;
    auto* benchc = app.add_subcommand("benchmark", "Run replicated swiss-roll experiments");
    benchc->add_option("--scenario", bench.scenario, "table2, table4 or custom")->capture_default_str();
    benchc->add_option("--reps", bench.reps, "Replicates per scenario")->capture_default_str();
    benchc->add_option("--methods", bench.methods, "Methods: cgp, dsl")->delimiter(',')->capture_default_str();
    benchc->add_option("--out-dir", bench.out_dir, "Output directory")->capture_default_str();
    benchc->add_option("--n-test", bench.n_test, "Test points per replicate")->capture_default_str();
    benchc->add_option("--seed", bench.seed, "Master seed")->capture_default_str();
    benchc->add_option("--mode", bench.mode, "exact or lowrank (default by scenario)");
    benchc->add_option("--stride", bench.stride, "Step between compression dimensions")->capture_default_str();
    benchc->add_option("--m-phi", bench.m_phi, "Rows of the sample compression")->capture_default_str();
    benchc->add_option("--subsample-cap", bench.subsample_cap, "Points used for bandwidth bounds")->capture_default_str();
    benchc->add_option("--workers", bench.workers, "Worker threads")->capture_default_str();
    benchc->add_option("--n-clust", bench.n_clust, "Clusters for the dsl baseline")->capture_default_str();
    benchc->add_option("--ridge", bench.ridge, "Ridge penalty for the dsl baseline")->capture_default_str();
    benchc->add_option("--level", bench.level, "Interval level")->capture_default_str();
    benchc->add_option("--bootstrap", bench.bootstrap, "Bootstrap resamples")->capture_default_str();
    benchc->add_option("--rows", bench.rows, "Run only these scenario rows (1-based)")->delimiter(',');
    benchc->add_option("--n", bench.n, "custom: training rows")->capture_default_str();
    benchc->add_option("--p", bench.p, "custom: feature dimension")->capture_default_str();
    benchc->add_option("--tau", bench.tau, "custom: feature noise")->capture_default_str();
    benchc->add_option("--hmax", bench.h_max, "custom: height bound")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (!simd_choice.empty()) {
            if (simd_choice == "scalar") simd::set_active(simd::Isa::scalar);
            else if (simd_choice == "avx2") simd::set_active(simd::Isa::avx2);
            else if (simd_choice == "neon") simd::set_active(simd::Isa::neon);
            else throw ConfigError("unknown --simd value '" + simd_choice + "'");
        }
        if (simulate->parsed()) cmd_simulate(sim, out);
        else if (fitc->parsed()) cmd_fit(fit, out, err);
        else if (predc->parsed()) cmd_predict(pred, out);
        else cmd_benchmark(bench, out, err);
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitOk;
}

} // namespace cgp
