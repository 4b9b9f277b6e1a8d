// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.
//   usage: cvcov_acceptance <path-to-cvcov-cli> <scratch-dir>

#include "cvcov/cv_engine.hpp"
#include "cvcov/estimators.hpp"
#include "cvcov/format.hpp"
#include "cvcov/io.hpp"
#include "cvcov/loss_risk.hpp"
#include "cvcov/simulation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace cvcov;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_seconds > 0 && secs > budget_seconds) {
        o.pass = false;
        o.detail += "; over time budget";
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

SymMatrix ar1(Index J, double rho) {
    Matrix m(J, J);
    for (Index j = 0; j < J; ++j)
        for (Index l = 0; l < J; ++l) m(j, l) = std::pow(rho, std::abs(static_cast<double>(j - l)));
    return SymMatrix::from_upper(m);
}

// 1: observation-level and matrix-shortcut selection agree, ties included.
Outcome criterion1() {
    std::mt19937_64 rng(1);
    const std::vector<EstimatorSpec> pool = {
        EstimatorSpec::sample_cov(),       EstimatorSpec::hard(0.1),          EstimatorSpec::hard(0.3),
        EstimatorSpec::scad(0.2),          EstimatorSpec::adaptive_lasso(0.2, 0.3), EstimatorSpec::banding(1),
        EstimatorSpec::banding(3),         EstimatorSpec::tapering(4),        EstimatorSpec::linear_shrinkage(),
        EstimatorSpec::dense_shrinkage(),  EstimatorSpec::poet(1, 0.2),       EstimatorSpec::poet(2, 0.5),
        // Identical estimators under two ids force an exact tie.
        EstimatorSpec::hard(0.3).with_id("hard_copy")};
    const CandidateLibrary lib(pool);
    int agree = 0, ties_seen = 0;
    for (int inst = 0; inst < 100; ++inst) {
        const Index n = std::uniform_int_distribution<Index>(20, 60)(rng);
        const Index J = std::uniform_int_distribution<Index>(5, 40)(rng);
        const int model = std::uniform_int_distribution<int>(1, 8)(rng);
        const auto x = sample_gaussian(build_model_covariance({model, J, rng()}), n, rng());
        const auto scheme = SplitScheme::vfold(5, rng());
        SelectOptions obs, mat;
        mat.cv.route = RiskRoute::Matrix;
        const auto a = select(lib, x, scheme, obs);
        const auto b = select(lib, x, scheme, mat);
        agree += a.selected_id == b.selected_id && a.tie_ids == b.tie_ids;
        ties_seen += a.tie_ids.size() > 1;
    }
    return {agree == 100, std::to_string(agree) + "/100 identical selections and tie sets (K=" +
                              std::to_string(lib.size()) + ", " + std::to_string(ties_seen) + " instances with ties)"};
}

// 2: Monte-Carlo mean of L(X; a) - L(X; psi0) against the closed-form risk difference.
Outcome criterion2() {
    const auto one = ScalingMatrix::constant(1.0);
    std::vector<std::pair<SymMatrix, SymMatrix>> pairs;
    const auto m2 = build_model_covariance({2, 4, 0});
    const auto m4 = build_model_covariance({4, 4, 0});
    const auto m1 = build_model_covariance({1, 4, 0});
    pairs.emplace_back(SymMatrix::identity(4), m2);
    pairs.emplace_back(band_matrix(m2, 1), m2);
    pairs.emplace_back(ar1(4, 0.3), m4);
    pairs.emplace_back(SymMatrix::diagonal(Vector::Constant(4, 1.5)), m1);
    Matrix odd(4, 4);
    odd << 2.0, -0.3, 0.1, 0.0, -0.3, 0.5, 0.2, 0.4, 0.1, 0.2, 1.2, -0.6, 0.0, 0.4, -0.6, 0.9;
    pairs.emplace_back(SymMatrix::from_upper(odd), ar1(4, -0.4));

    int within3 = 0, within4 = 0;
    std::string detail;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto& [a, psi0] = pairs[p];
        const auto x = sample_gaussian(psi0, 200000, 1000 + p);
        double sum = 0, sum2 = 0;
        for (Index i = 0; i < x.n(); ++i) {
            const Vector row = x.values().row(i).transpose();
            const double d = observation_loss(row, a, one) - observation_loss(row, psi0, one);
            sum += d;
            sum2 += d * d;
        }
        const double n = static_cast<double>(x.n());
        const double mean = sum / n;
        const double se = std::sqrt((sum2 / n - mean * mean) / (n - 1));
        const double z = std::abs(mean - true_risk_difference(a, psi0, one)) / se;
        within3 += z <= 3;
        within4 += z <= 4;
        detail += (p ? ", " : "") + std::string("z=") + fmt(z);
    }
    return {within3 >= 4 && within4 == 5,
            std::to_string(within3) + "/5 within 3 SE, " + std::to_string(within4) + "/5 within 4 SE (" + detail + ")"};
}

struct DeskRun {
    MonteCarloResult result;
    std::vector<CellSummary> cells;
    double seconds = 0;
};

DeskRun& desk_run() {
    static DeskRun run = [] {
        ExperimentConfig cfg{};
        cfg.models = {2};
        cfg.sample_sizes = {50, 200};
        cfg.ratios = {1.0};
        cfg.replications = 50;
        cfg.scheme = SplitScheme::vfold(5, 0);
        cfg.library = default_library();
        cfg.metrics = {Metric::CvRatio};
        const auto t0 = std::chrono::steady_clock::now();
        DeskRun r;
        r.result = run_monte_carlo(cfg);
        r.cells = summarize_ratios(r.result.rows, {cfg.metrics, cfg.scheme.validation_proportion(), 1.0});
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }();
    return run;
}

// 3: desk-scale CV risk-difference ratios for Model 2.
Outcome criterion3() {
    const auto& run = desk_run();
    bool ok = run.cells.size() == 2 && run.result.log.empty();
    std::string detail;
    for (const auto& c : run.cells) {
        const double limit = c.n == 50 ? 1.25 : 1.05;
        const double mor = c.cv_ratio_mean_of_ratios.value_or(INFINITY);
        ok = ok && mor <= limit;
        detail += "n=J=" + std::to_string(c.n) + ": mean ratio " + fmt(mor) + " (ratio of means " +
                  fmt(c.cv_ratio_of_means.value_or(INFINITY)) + ", limit " + fmt(limit) + "); ";
    }
    return {ok, detail + "R=50"};
}

// 4: per-replication oracle dominance over the criterion-3 rows.
Outcome criterion4() {
    const auto& run = desk_run();
    std::map<std::tuple<Index, int>, double> sel, orc;
    for (const auto& r : run.result.rows) {
        if (r.metric != row_metric::cv_risk_diff) continue;
        if (r.subject == subject::selector) sel[{r.n, r.replication}] = r.value;
        if (r.subject == subject::cv_oracle) orc[{r.n, r.replication}] = r.value;
    }
    std::size_t ok = 0;
    double worst = INFINITY;
    for (const auto& [key, v] : sel) {
        const double ratio = risk_ratio(v, orc.at(key));
        worst = std::min(worst, ratio);
        ok += ratio >= 1 - 1e-12;
    }
    return {ok == sel.size() && sel.size() == 100,
            std::to_string(ok) + "/" + std::to_string(sel.size()) + " replications with ratio >= 1 - 1e-12 (min " +
                fmt(worst) + ")"};
}

// 5: cvCovEst against the best within-family tuned procedure on Model 3.
Outcome criterion5() {
    ExperimentConfig cfg{};
    cfg.models = {3};
    cfg.sample_sizes = {200};
    cfg.ratios = {1.0};
    cfg.replications = 20;
    cfg.scheme = SplitScheme::vfold(5, 0);
    cfg.library = default_library();
    cfg.metrics = {Metric::Frobenius};
    const auto result = run_benchmark(cfg, competitor_library());
    const auto cells = summarize_ratios(result.rows, {cfg.metrics, 0.2, 1.0});
    if (cells.size() != 1) return {false, "benchmark produced no cell"};
    const auto& means = cells[0].mean_frobenius;
    double best = INFINITY;
    std::string best_name;
    for (const auto& [name, v] : means) {
        if (name != subject::selector && v < best) {
            best = v;
            best_name = name;
        }
    }
    const double ours = means.at(subject::selector);
    return {ours <= 1.10 * best, "cvCovEst " + fmt(ours) + " vs best single family " + best_name + " " + fmt(best) +
                                     " (ratio " + fmt(ours / best) + ", limit 1.10)"};
}

// 6: finite-sample bound with empirical plug-ins in every criterion-3 cell.
Outcome criterion6() {
    const auto& run = desk_run();
    bool ok = run.cells.size() == 2;
    std::string detail;
    for (const auto& c : run.cells) {
        if (!c.bound) return {false, "no bound computed"};
        const auto& b = *c.bound;
        ok = ok && b.holds && b.selector_mean <= b.bound.rhs;
        detail += "n=J=" + std::to_string(c.n) + ": " + fmt(b.selector_mean) + " <= " + fmt(b.bound.rhs) + "; ";
    }
    return {ok, detail + "delta=1"};
}

// 7: exact estimator identities.
Outcome criterion7() {
    std::vector<std::string> bad;
    auto need = [&](bool cond, const std::string& what) {
        if (!cond) bad.push_back(what);
    };
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Index J = std::uniform_int_distribution<Index>(2, 15)(rng);
        const Index n = std::uniform_int_distribution<Index>(3, 40)(rng);
        const auto x = sample_gaussian(build_model_covariance({1 + trial % 8, J, rng()}), n, rng());
        FitContext ctx(x);
        const auto& s = ctx.sample_cov();

        const auto fit = linear_shrinkage_fit(ctx);
        need(std::abs(fit.a2 + fit.b2 - fit.d2) <= 1e-12 * std::max(fit.d2, 1e-300), "a2 + b2 = d2");
        const double m = s.dense().trace() / static_cast<double>(J);
        const Matrix recon = fit.intensity * m * Matrix::Identity(J, J) + (1 - fit.intensity) * s.dense();
        need((fit.estimate.dense() - recon).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, s.dense().cwiseAbs().maxCoeff()),
             "shrinkage coefficients sum to 1");
        need(fit.intensity >= 0 && fit.intensity <= 1, "intensity in [0,1]");

        need(band_matrix(s, 0).dense() == Matrix(s.dense().diagonal().asDiagonal()), "band(0) = diag(S)");
        need(band_matrix(s, static_cast<int>(J - 1)) == s, "band(J-1) = S");
        need(taper_matrix(s, 2) == band_matrix(s, 1), "taper(2) = band(1)");
        need((poet_estimate(ctx, static_cast<int>(J), 0.3).dense() - s.dense()).norm() <= 1e-8 * std::max(1.0, s.dense().norm()),
             "POET(L=J) = S");

        for (double u : {0.05, 0.2, 0.6}) {
            const auto al = threshold_matrix(s, ThresholdRule::AdaptiveLasso, {u, 3.7, 0.0});
            const auto scad = threshold_matrix(s, ThresholdRule::Scad, {u, 3.7, 0.0});
            const auto hard = threshold_matrix(s, ThresholdRule::Hard, {u, 3.7, 0.0});
            for (Index j = 0; j < J; ++j)
                for (Index l = 0; l < J; ++l) {
                    const double z = s(j, l);
                    need(al(j, l) == soft_threshold(z, u), "adaptive lasso(eta=0) = soft threshold");
                    if (std::abs(z) > 3.7 * u) need(scad(j, l) == z, "SCAD identity region");
                    need(std::abs(hard(j, l)) <= std::abs(z), "hard threshold dominance");
                }
        }
    }
    std::sort(bad.begin(), bad.end());
    bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
    std::string detail = bad.empty() ? "all identities hold on 50 random datasets" : "violated:";
    for (const auto& b : bad) detail += " [" + b + "]";
    return {bad.empty(), detail};
}

int run(const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// 8: byte-identical reruns, CSV round trips, exit codes.
Outcome criterion8(const std::string& cli, const fs::path& dir) {
    std::vector<std::string> bad;
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string q = "\"" + cli + "\"";
    const auto a = dir / "sim_a", b = dir / "sim_b";
    if (run(q + " simulate --profile smoke --seed 7 --out \"" + a.string() + "\"") != 0) bad.push_back("smoke run a");
    if (run(q + " simulate --profile smoke --seed 7 --out \"" + b.string() + "\"") != 0) bad.push_back("smoke run b");
    const auto ra = slurp(a / "results.csv");
    if (ra.empty() || ra != slurp(b / "results.csv")) bad.push_back("results.csv not byte-identical");
    if (slurp(a / "summary.json") != slurp(b / "summary.json")) bad.push_back("summary.json not byte-identical");

    const auto rows = io::read_results_csv(a / "results.csv");
    std::ostringstream rewritten;
    io::write_results_csv(rewritten, rows);
    if (rewritten.str() != ra) bad.push_back("results.csv round trip");

    // Selection outputs.
    const auto data = sample_gaussian(ar1(6, 0.5), 40, 3);
    io::write_matrix_csv(dir / "data.csv", data.values(), {"a", "b", "c", "d", "e", "f"});
    if (io::read_matrix_csv(dir / "data.csv") != data.values()) bad.push_back("data.csv round trip");
    const auto sel = dir / "sel";
    if (run(q + " select --input \"" + (dir / "data.csv").string() + "\" --pca 2 --out \"" + sel.string() + "\"") != 0)
        bad.push_back("select run");
    const auto report = select(default_library(), data, SplitScheme::vfold(5, 20240101));
    const Matrix est = io::read_matrix_csv(sel / "estimate.csv");
    if (est != report.estimate.dense()) bad.push_back("estimate.csv round trip");
    const Matrix scores = io::read_matrix_csv(sel / "scores.csv");
    const Matrix expect_scores = io::pca_scores(data, report.estimate, 2, true);
    if (scores != expect_scores) bad.push_back("scores.csv round trip");
    const auto table = io::read_csv_table(sel / "risk_table.csv", {});
    bool table_ok = table.rows.size() == report.candidates.size();
    for (const auto& row : table.rows) {
        const auto idx = default_library().index_of(row.at(0));
        double v = 0;
        table_ok = table_ok && idx && parse_double(row.at(3), v) && v == report.candidates[*idx].cv_risk;
    }
    if (!table_ok) bad.push_back("risk_table.csv round trip");
    const auto sel_b = dir / "sel_b";
    run(q + " select --input \"" + (dir / "data.csv").string() + "\" --pca 2 --out \"" + sel_b.string() + "\"");
    for (const char* f : {"risk_table.csv", "estimate.csv", "scores.csv", "selection_report.json"})
        if (slurp(sel / f) != slurp(sel_b / f)) bad.push_back(std::string(f) + " not byte-identical");

    // Exit codes.
    std::ofstream(dir / "ragged.csv") << "a,b\n1,2\n3\n";
    std::ofstream(dir / "text.csv") << "a,b\n1,2\n3,abc\n";
    std::ofstream(dir / "one_col.csv") << "x\n1\n2\n-1\n0.5\n3\n";
    std::ofstream(dir / "dense_only.ini") << "[library]\npreset = none\n[library.dense_shrinkage]\n";
    const std::vector<std::pair<std::string, int>> cases = {
        {"select --input \"" + (dir / "ragged.csv").string() + "\"", 2},
        {"select --input \"" + (dir / "text.csv").string() + "\"", 2},
        {"select --input \"" + (dir / "missing.csv").string() + "\"", 2},
        {"select --input \"" + (dir / "data.csv").string() + "\" --folds 1", 2},
        {"select --input \"" + (dir / "data.csv").string() + "\" --folds 5 --pn 0.2", 2},
        {"simulate --profile bogus", 2},
        {"select --config \"" + (dir / "dense_only.ini").string() + "\" --input \"" + (dir / "one_col.csv").string() +
             "\" --out \"" + (dir / "fail").string() + "\"",
         3},
    };
    for (const auto& [args, want] : cases) {
        const int got = run(q + " " + args);
        if (got != want) bad.push_back("exit " + std::to_string(got) + " != " + std::to_string(want) + " for: " + args);
    }
    std::string detail = bad.empty() ? "byte-identical reruns, round trips and exit codes verified" : "";
    for (const auto& b : bad) detail += "[" + b + "] ";
    return {bad.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: cvcov_acceptance <cvcov-cli> <scratch-dir>\n";
        return 2;
    }
    const std::string cli = argv[1];
    const fs::path scratch = argv[2];

    report(1, "observation vs matrix risk selection", 60, criterion1);
    report(2, "oracle risk identity", 60, criterion2);
    report(3, "Model 2 desk-scale CV ratios", 0, criterion3);
    const double desk_seconds = desk_run().seconds;
    std::printf("      criterion 3 simulation time %.1fs (budget 900s)\n", desk_seconds);
    if (desk_seconds > 900) {
        ++failures;
        std::printf("FAIL criterion 3 (runtime): %.1fs exceeds 900s\n", desk_seconds);
    }
    report(4, "per-replication oracle dominance", 0, criterion4);
    report(5, "Model 3 benchmark vs single families", 600, criterion5);
    report(6, "finite-sample bound sanity", 0, criterion6);
    report(7, "estimator identities", 0, criterion7);
    report(8, "determinism, I/O and exit codes", 0, [&] { return criterion8(cli, scratch); });
    std::printf("%d criterion failure(s)\n", failures);
    return failures == 0 ? 0 : 1;
}
