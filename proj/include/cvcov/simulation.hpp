#pragma once

#include "cvcov/cv_engine.hpp"
#include "cvcov/estimators.hpp"
#include "cvcov/loss_risk.hpp"
#include "cvcov/matrix_core.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cvcov {

/// One of the eight covariance models. `seed` matters only for the random
/// models 5 and 8.
struct CovModelSpec {
    int model = 1;
    Index J = 2;
    std::uint64_t seed = 0;
};

SymMatrix build_model_covariance(const CovModelSpec& spec);

/// n i.i.d. N(0, psi) rows drawn through the spectral factor V sqrt(max(lambda, 1e-10)).
DataMatrix sample_gaussian(const SymMatrix& psi, Index n, std::uint64_t seed);

enum class Metric { CvRatio, FullRatio, Frobenius, Spectral };
std::string metric_name(Metric m);
Metric metric_from_name(const std::string& name);

/// Row labels used in results.csv.
namespace row_metric {
inline constexpr const char* cv_risk_diff = "cv_risk_diff";
inline constexpr const char* full_risk_diff = "full_risk_diff";
inline constexpr const char* frobenius = "frobenius";
inline constexpr const char* spectral = "spectral";
inline constexpr const char* max_sq_entry = "max_sq_entry";
inline constexpr const char* max_abs_estimate = "max_abs_estimate";
}  // namespace row_metric

/// Special subjects in results.csv besides candidate ids.
namespace subject {
inline constexpr const char* selector = "cvCovEst";
inline constexpr const char* cv_oracle = "cv-oracle";
inline constexpr const char* full_oracle = "full-oracle";
inline constexpr const char* plugin = "plugin";
}  // namespace subject

struct ExperimentConfig {
    std::vector<int> models{2};
    std::vector<Index> sample_sizes{50};
    std::vector<double> ratios{1.0};
    int replications = 2;
    /// Design of the CV scheme; its seed is replaced per replication.
    SplitScheme scheme = SplitScheme::vfold(5, 0);
    CandidateLibrary library = default_library();
    std::vector<Metric> metrics{Metric::CvRatio, Metric::FullRatio, Metric::Frobenius};
    std::uint64_t master_seed = 20240101;
    CvOptions cv;
    /// Redraw models 5 and 8 per replication (default) or keep one draw per cell.
    bool fix_random_models = false;
    /// Worker threads across replications.
    unsigned threads = 1;
};

/// J = round(ratio * n), at least 2.
Index cell_dimension(Index n, double ratio);

/// Seed for one replication: splitmix64 chained over (master, model, n, bits of ratio, replication).
std::uint64_t replication_seed(std::uint64_t master, int model, Index n, double ratio, int replication);

struct ResultRow {
    int model = 0;
    Index n = 0;
    Index J = 0;
    double ratio = 0.0;
    int replication = 0;
    std::string subject;
    std::string metric;
    double value = 0.0;
    std::uint64_t seed = 0;

    friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

/// Ordering used for serialization: model, n, ratio, replication, subject, metric.
bool row_less(const ResultRow& a, const ResultRow& b);

struct MonteCarloResult {
    std::vector<ResultRow> rows;  // sorted by row_less
    std::vector<std::string> log;
};

/// Validate the config; throws ConfigError.
void validate(const ExperimentConfig& config);

MonteCarloResult run_monte_carlo(const ExperimentConfig& config);

/// Norm comparison of the selector against single-family procedures, each tuned
/// within its family by the same CV. Subjects are "cvCovEst" and "<family>(tuned)".
MonteCarloResult run_benchmark(const ExperimentConfig& config, const CandidateLibrary& competitors);

struct BoundCheck {
    double M1 = 0.0;
    double M2 = 0.0;
    std::size_t K = 0;
    double p_n = 0.0;
    double delta = 1.0;
    double selector_mean = 0.0;  // mean cv risk difference of the selection
    double oracle_mean = 0.0;    // mean cv risk difference of the cv oracle
    FiniteSampleBound bound;
    bool holds = false;
};

struct CellSummary {
    int model = 0;
    Index n = 0;
    Index J = 0;
    double ratio = 0.0;
    int replications = 0;

    /// mean(selector) / mean(cv oracle) of cv risk differences.
    std::optional<double> cv_ratio_of_means;
    /// Per-replication ratios selector / cv oracle (replication order).
    std::vector<double> cv_ratio_per_replication;
    std::optional<double> cv_ratio_mean_of_ratios;
    /// mean(selector) / mean(full oracle) of full-data risk differences.
    std::optional<double> full_ratio_of_means;
    std::vector<double> full_ratio_per_replication;
    std::optional<double> full_ratio_mean_of_ratios;

    std::map<std::string, double> mean_frobenius;  // subject -> mean
    std::map<std::string, double> mean_spectral;
    std::optional<BoundCheck> bound;
};

struct SummaryOptions {
    std::vector<Metric> metrics;  // requested metrics; each must be present in the rows
    double p_n = 0.2;
    double delta = 1.0;
};

/// Aggregate long-format rows per cell. Depends only on the rows and options.
std::vector<CellSummary> summarize_ratios(const std::vector<ResultRow>& rows, const SummaryOptions& options);

/// a / b with 0 / 0 read as 1 (identical selections with zero risk).
double risk_ratio(double numerator, double denominator);

/// Rough single-thread runtime estimate in seconds, used to warn before large grids.
double estimated_runtime_seconds(const ExperimentConfig& config);

}  // namespace cvcov
