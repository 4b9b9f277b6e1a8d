// cvcov: cross-validated covariance estimator selection and simulation driver.
//
//   cvcov select   --config run.ini | --input data.csv [--folds 5 | --pn 0.2 --splits 10] [--pca L]
//   cvcov simulate --profile smoke|desk|full [--config exp.ini] [--out DIR]
//   cvcov bench    --profile smoke [--config exp.ini] [--out DIR]
//
// Exit codes: 0 success, 2 input/config error, 3 every candidate failed.

#include "cvcov/config.hpp"
#include "cvcov/cv_engine.hpp"
#include "cvcov/errors.hpp"
#include "cvcov/io.hpp"
#include "cvcov/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace cvcov;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitEstimation = 3;

void emit_record(const char* kind, const std::string& category, const std::string& message,
                 std::size_t line = 0, std::size_t column = 0) {
    nlohmann::json j;
    j[kind] = category;
    j["message"] = message;
    if (line != 0) j["line"] = line;
    if (column != 0) j["column"] = column;
    std::cerr << j.dump() << '\n';
}

struct SchemeFlags {
    std::optional<std::uint64_t> seed;
    std::optional<int> folds;
    std::optional<double> pn;
    std::optional<int> splits;

    void add_to(CLI::App& app) {
        app.add_option("--seed", seed, "Seed for CV splits (select) or master seed (simulate, bench)");
        auto* f = app.add_option("--folds", folds, "V-fold cross-validation with V folds");
        auto* p = app.add_option("--pn", pn, "Validation proportion for Monte-Carlo or single splits");
        app.add_option("--splits", splits, "Number of Monte-Carlo splits (with --pn)")->needs(p);
        f->excludes(p);
    }

    void apply(SplitScheme& scheme) const {
        if (seed) scheme.seed = *seed;
        if (folds) scheme.design = VFold{*folds};
        if (pn) {
            if (splits) {
                scheme.design = MonteCarloSplit{*splits, *pn};
            } else {
                scheme.design = SingleSplit{*pn};
            }
        }
    }
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open '" + path.string() + "' for writing");
    out << text;
}

config::Document load_or_empty(const std::string& path) {
    return path.empty() ? config::Document{} : config::load(path);
}

int run_select(const std::string& config_path, const std::string& input, const SchemeFlags& flags,
               const std::string& out, std::optional<int> pca, bool no_center, const std::string& eta,
               std::optional<unsigned> threads) {
    auto cfg = config::select_config(load_or_empty(config_path));
    if (!input.empty()) cfg.input = input;
    flags.apply(cfg.scheme);
    if (!out.empty()) cfg.out_dir = out;
    if (pca) cfg.pca = *pca;
    if (no_center) cfg.center = false;
    if (!eta.empty()) cfg.eta = eta_policy_from_name(eta);
    if (threads) cfg.threads = *threads;
    if (cfg.input.empty()) throw ConfigError("no input dataset given (--input or [select] input)");
    if (cfg.pca < 0) throw ConfigError("--pca must be >= 0");

    const auto named = io::read_data_csv(cfg.input, cfg.csv);
    if (cfg.pca > named.data.J()) throw ConfigError("--pca exceeds the number of features");

    SelectOptions options;
    options.cv.eta = cfg.eta;
    options.cv.center = cfg.center;
    options.cv.threads = cfg.threads;
    options.report_psd = true;
    const auto report = select(cfg.library, named.data, cfg.scheme, options);

    fs::create_directories(cfg.out_dir);
    write_text(cfg.out_dir / "selection_report.json", io::selection_report_json(report));
    io::write_risk_table_csv(cfg.out_dir / "risk_table.csv", report);
    io::write_estimate_csv(cfg.out_dir / "estimate.csv", report);
    if (cfg.pca > 0) {
        const Matrix scores = io::pca_scores(named.data, report.estimate, cfg.pca, cfg.center);
        std::vector<std::string> header;
        for (int c = 1; c <= cfg.pca; ++c) header.push_back("PC" + std::to_string(c));
        io::write_matrix_csv(cfg.out_dir / "scores.csv", scores, header);
    }
    for (const auto& w : report.warnings) emit_record("warning", "select", w);
    std::cout << "selected " << report.selected_id << " (K=" << report.candidates.size() << ", n=" << report.n
              << ", J=" << report.J << ")\n";
    return 0;
}

config::SimulateConfig simulate_setup(const std::string& config_path, const std::string& profile,
                                      const SchemeFlags& flags, const std::string& out,
                                      std::optional<unsigned> threads) {
    std::optional<config::Profile> override_profile;
    if (!profile.empty()) override_profile = config::profile_from_name(profile);
    auto cfg = config::simulate_config(load_or_empty(config_path), override_profile);
    auto& e = cfg.experiment;
    if (flags.seed) e.master_seed = *flags.seed;
    SchemeFlags scheme_only = flags;
    scheme_only.seed.reset();
    scheme_only.apply(e.scheme);
    if (!out.empty()) cfg.out_dir = out;
    if (threads) e.threads = *threads;
    validate(e);
    if (cfg.profile == config::Profile::Full) {
        const double secs = estimated_runtime_seconds(e);
        char buf[160];
        std::snprintf(buf, sizeof buf, "full profile: estimated runtime %.1f hours (%.0f minutes) on %u thread(s); proceeding",
                      secs / 3600.0, secs / 60.0, e.threads);
        emit_record("warning", "runtime", buf);
    }
    return cfg;
}

int run_simulate(const config::SimulateConfig& cfg) {
    const auto& e = cfg.experiment;
    const auto result = run_monte_carlo(e);
    for (const auto& line : result.log) emit_record("warning", "cell", line);
    const auto summary =
        summarize_ratios(result.rows, {e.metrics, e.scheme.validation_proportion(), 1.0});
    fs::create_directories(cfg.out_dir);
    io::write_results_csv(cfg.out_dir / "results.csv", result.rows);
    write_text(cfg.out_dir / "summary.json", io::summary_json(summary, e, result.log));
    std::cout << "wrote " << result.rows.size() << " rows for " << summary.size() << " cell(s)\n";
    return 0;
}

int run_bench(config::SimulateConfig cfg) {
    auto& e = cfg.experiment;
    std::vector<Metric> norms;
    for (Metric m : e.metrics) {
        if (m == Metric::Frobenius || m == Metric::Spectral) norms.push_back(m);
    }
    if (norms.empty()) throw ConfigError("bench needs frobenius and/or spectral metrics");
    e.metrics = norms;
    const auto result = run_benchmark(e, cfg.competitors);
    for (const auto& line : result.log) emit_record("warning", "cell", line);
    const auto summary = summarize_ratios(result.rows, {e.metrics, e.scheme.validation_proportion(), 1.0});
    fs::create_directories(cfg.out_dir);
    io::write_results_csv(cfg.out_dir / "results.csv", result.rows);
    io::write_norms_csv(cfg.out_dir / "norms.csv", summary);
    std::cout << "wrote norms for " << summary.size() << " cell(s)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-validated covariance matrix estimator selection"};
    app.require_subcommand(1);

    std::string config_path, input, out, eta, profile;
    std::optional<int> pca;
    std::optional<unsigned> threads;
    bool no_center = false;
    SchemeFlags flags;

    auto* sel = app.add_subcommand("select", "Select a covariance estimator for a CSV dataset");
    sel->add_option("--config", config_path, "Config file (INI-style or JSON)");
    sel->add_option("--input", input, "Input CSV, rows = observations");
    sel->add_option("--out", out, "Output directory");
    sel->add_option("--pca", pca, "Number of PCA score columns to export");
    sel->add_flag("--no-center", no_center, "Do not center columns");
    sel->add_option("--eta", eta, "Loss scaling: one, inv_J, inv_J2, weighted");
    sel->add_option("--threads", threads, "Worker threads");
    flags.add_to(*sel);

    SchemeFlags sim_flags;
    std::string sim_config, sim_out, sim_profile;
    std::optional<unsigned> sim_threads;
    auto* sim = app.add_subcommand("simulate", "Run the Monte-Carlo selection experiments");
    sim->add_option("--config", sim_config, "Experiment config file");
    sim->add_option("--out", sim_out, "Output directory");
    sim->add_option("--profile", sim_profile, "smoke, desk or full");
    sim->add_option("--threads", sim_threads, "Worker threads");
    sim_flags.add_to(*sim);

    SchemeFlags bench_flags;
    std::string bench_config, bench_out, bench_profile;
    std::optional<unsigned> bench_threads;
    auto* bench = app.add_subcommand("bench", "Compare mean Frobenius/spectral errors against single families");
    bench->add_option("--config", bench_config, "Experiment config file");
    bench->add_option("--out", bench_out, "Output directory");
    bench->add_option("--profile", bench_profile, "smoke, desk or full");
    bench->add_option("--threads", bench_threads, "Worker threads");
    bench_flags.add_to(*bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_record("error", "usage", e.what());
        return kExitInput;
    }

    try {
        if (*sel) return run_select(config_path, input, flags, out, pca, no_center, eta, threads);
        if (*sim) return run_simulate(simulate_setup(sim_config, sim_profile, sim_flags, sim_out, sim_threads));
        if (*bench) {
            auto cfg = simulate_setup(bench_config, bench_profile, bench_flags, bench_out, bench_threads);
            return run_bench(std::move(cfg));
        }
    } catch (const io::CsvError& e) {
        emit_record("error", "input", e.what(), e.line(), e.column());
        return kExitInput;
    } catch (const SelectionError& e) {
        emit_record("error", "estimation", e.what());
        return kExitEstimation;
    } catch (const NumericError& e) {
        emit_record("error", "estimation", e.what());
        return kExitEstimation;
    } catch (const ConfigError& e) {
        emit_record("error", "config", e.what());
        return kExitInput;
    } catch (const InvalidInput& e) {
        emit_record("error", "input", e.what());
        return kExitInput;
    } catch (const std::filesystem::filesystem_error& e) {
        emit_record("error", "input", e.what());
        return kExitInput;
    }
    return 0;
}
