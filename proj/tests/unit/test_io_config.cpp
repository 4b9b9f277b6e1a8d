#include "cvcov/config.hpp"
#include "cvcov/errors.hpp"
#include "cvcov/format.hpp"
#include "cvcov/io.hpp"
#include "cvcov/simulation.hpp"
#include "helpers.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <map>
#include <numeric>
#include <fstream>
#include <sstream>

using namespace cvcov;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "cvcov_unit";
    fs::create_directories(dir);
    return dir / name;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

}  // namespace

TEST_CASE("csv reading") {
    std::istringstream in("\xEF\xBB\xBF\"a\",b\n# comment\n1,2\n3,\"4\"\n");
    const auto t = io::read_csv_table(in, {});
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][1] == "4");

    const auto p = scratch("semi.csv");
    write(p, "1;2\n3;4\n");
    io::CsvOptions o;
    o.delimiter = ';';
    const auto d = io::read_data_csv(p, o);
    CHECK(d.data.n() == 2);
    CHECK(d.data.values()(1, 1) == 4.0);

    write(p, "a,b\n1,2\n3\n");
    try {
        io::read_data_csv(p);
        FAIL("expected error");
    } catch (const io::CsvError& e) {
        CHECK(e.line() == 3);
    }
    write(p, "a,b\n1,2\n3,nan\n");
    CHECK_THROWS_AS(io::read_data_csv(p), io::CsvError);
    write(p, "");
    CHECK_THROWS_AS(io::read_data_csv(p), InvalidInput);
    CHECK_THROWS_AS(io::read_data_csv(scratch("missing.csv")), InvalidInput);
}

TEST_CASE("csv round trips") {
    std::mt19937_64 rng(1);
    const Matrix m = testing::to_eigen(oracle::random_matrix(rng, 5, 4, 1e3));
    const auto p = scratch("m.csv");
    io::write_matrix_csv(p, m, {"w", "x", "y", "z"});
    CHECK(io::read_matrix_csv(p) == m);

    ExperimentConfig cfg{};
    cfg.models = {2};
    cfg.sample_sizes = {30};
    cfg.ratios = {0.3};
    cfg.metrics = {Metric::CvRatio, Metric::Frobenius};
    const auto rows = run_monte_carlo(cfg).rows;
    const auto rp = scratch("results.csv");
    io::write_results_csv(rp, rows);
    CHECK(io::read_results_csv(rp) == rows);

    const auto x = sample_gaussian(testing::ar1(5, 0.5), 30, 3);
    SelectOptions so;
    so.report_psd = true;
    const auto report = select(default_library(), x, SplitScheme::vfold(5, 1), so);
    const auto ep = scratch("estimate.csv");
    io::write_estimate_csv(ep, report);
    CHECK(io::read_matrix_csv(ep) == report.estimate.dense());

    const auto tp = scratch("risk.csv");
    io::write_risk_table_csv(tp, report);
    const auto table = io::read_csv_table(tp, {});
    REQUIRE(table.rows.size() == 73);
    CHECK(table.rows[0][0] == report.selected_id);
    CHECK(table.rows[0][5] == "true");
    double prev = -1;
    for (const auto& row : table.rows) {
        double v = 0;
        REQUIRE(parse_double(row[3], v));
        CHECK(v >= prev);
        prev = v;
        const auto idx = default_library().index_of(row[0]);
        REQUIRE(idx);
        CHECK(v == report.candidates[*idx].cv_risk);
    }
}

TEST_CASE("pca scores") {
    const auto x = sample_gaussian(testing::ar1(6, 0.6), 80, 2);
    const auto est = sample_covariance(center_columns(x));
    const Matrix scores = io::pca_scores(x, est, 3, true);
    CHECK(scores.rows() == 80);
    CHECK(scores.cols() == 3);
    // The covariance of the scores is V^T S V, diagonal with the leading eigenvalues when the estimate is S.
    const auto e = eigendecompose(est);
    const Matrix cov = scores.transpose() * scores / 80.0;
    for (Index j = 0; j < 3; ++j) CHECK(cov(j, j) == doctest::Approx(e.values(j)).epsilon(1e-8));
}

TEST_CASE("selection report json") {
    const auto x = sample_gaussian(testing::ar1(3, 0.5), 20, 3);
    const auto report = select(CandidateLibrary({EstimatorSpec::sample_cov()}), x, SplitScheme::vfold(5, 1));
    const auto j = nlohmann::json::parse(io::selection_report_json(report));
    CHECK(j["schema_version"] == io::kSchemaVersion);
    CHECK(j["selected_id"] == "sample_cov");
    CHECK(j["K"] == 1);
}

TEST_CASE("config parsing") {
    CHECK(config::parse_list("0.1:0.3:0.1, 0.5") == std::vector<double>{0.1, 0.2, 0.3, 0.5});
    CHECK(config::parse_int_list("1:3,7") == std::vector<int>{1, 2, 3, 7});
    CHECK(config::parse_bool("yes"));
    CHECK_FALSE(config::parse_bool("false"));
    CHECK_THROWS_AS(config::parse_bool("maybe"), ConfigError);

    const auto doc = config::parse_ini(
        "# comment\n[select]\ninput = data.csv\nfolds = 3 # inline\nseed = 9\n"
        "[library]\npreset = none\n[library.hard]\nthresholds = 0.1,0.2\n[library.banding]\nbands = 1:3\n");
    const auto sel = config::select_config(doc);
    CHECK(sel.input == "data.csv");
    CHECK(sel.scheme.describe() == "vfold(V=3)");
    CHECK(sel.scheme.seed == 9);
    CHECK(sel.library.size() == 5);

    const auto json = config::parse_json(R"({"select": {"input": "x.csv", "pn": 0.25, "splits": 4},
                                             "library": {"preset": "default"}})");
    const auto js = config::select_config(json);
    CHECK(js.scheme.describe().find("monte_carlo") != std::string::npos);
    CHECK(js.library.size() == 73);

    CHECK_THROWS_AS(config::select_config(config::parse_ini("[select]\nfolds = 5\npn = 0.2\n")), ConfigError);
    CHECK_THROWS_AS(config::parse_ini("[select\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(config::select_config(config::parse_ini("[library]\npreset = wat\n")), ConfigError);

    const auto sim = config::simulate_config(config::parse_ini("[experiment]\nprofile = smoke\nreplications = 3\n"), std::nullopt);
    CHECK(sim.experiment.replications == 3);
    CHECK(sim.experiment.models == std::vector<int>{2});
    const auto full = config::simulate_config({}, config::Profile::Full);
    CHECK(full.experiment.replications == 200);
    CHECK(full.experiment.models.size() == 8);
    CHECK(estimated_runtime_seconds(full.experiment) > 3600.0);
}

TEST_CASE("summary.json agrees with a recomputation from results.csv") {
    ExperimentConfig cfg{};
    cfg.models = {2, 4};
    cfg.sample_sizes = {25};
    cfg.ratios = {0.4};
    cfg.replications = 3;
    cfg.metrics = {Metric::CvRatio, Metric::FullRatio, Metric::Frobenius};
    const auto result = run_monte_carlo(cfg);
    const auto rp = scratch("summary_results.csv");
    io::write_results_csv(rp, result.rows);
    const auto summary = nlohmann::json::parse(
        io::summary_json(summarize_ratios(result.rows, {cfg.metrics, 0.2, 1.0}), cfg, result.log));

    // Independent aggregation straight from the file.
    const auto table = io::read_csv_table(rp, {});
    std::map<std::tuple<int, std::string, std::string>, std::vector<double>> series;  // (model, subject, metric)
    for (const auto& row : table.rows) {
        double v = 0;
        REQUIRE(parse_double(row[7], v));
        series[{std::stoi(row[0]), row[5], row[6]}].push_back(v);
    }
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    REQUIRE(summary["cells"].size() == 2);
    for (const auto& cell : summary["cells"]) {
        const int model = cell["model"];
        const auto& sel = series[{model, "cvCovEst", "cv_risk_diff"}];
        const auto& orc = series[{model, "cv-oracle", "cv_risk_diff"}];
        CHECK(cell["cv_ratio_of_means"].get<double>() == doctest::Approx(mean(sel) / mean(orc)).epsilon(1e-12));
        double mor = 0;
        for (std::size_t r = 0; r < sel.size(); ++r) mor += risk_ratio(sel[r], orc[r]);
        CHECK(cell["cv_ratio_mean_of_ratios"].get<double>() == doctest::Approx(mor / sel.size()).epsilon(1e-12));
        const auto& fsel = series[{model, "cvCovEst", "full_risk_diff"}];
        const auto& forc = series[{model, "full-oracle", "full_risk_diff"}];
        CHECK(cell["full_ratio_of_means"].get<double>() == doctest::Approx(mean(fsel) / mean(forc)).epsilon(1e-12));
        CHECK(cell["mean_frobenius"]["cvCovEst"].get<double>() ==
              doctest::Approx(mean(series[{model, "cvCovEst", "frobenius"}])).epsilon(1e-12));
    }
}
