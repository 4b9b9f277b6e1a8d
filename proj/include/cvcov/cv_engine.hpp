#pragma once

#include "cvcov/estimators.hpp"
#include "cvcov/matrix_core.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace cvcov {

struct VFold {
    int folds = 5;
};
struct MonteCarloSplit {
    int count = 10;
    double p_n = 0.2;
};
struct SingleSplit {
    double p_n = 0.2;
};

/// CV design plus the seed that fully determines its realizations for a given n.
struct SplitScheme {
    std::variant<VFold, MonteCarloSplit, SingleSplit> design = VFold{};
    std::uint64_t seed = 0;

    static SplitScheme vfold(int V, std::uint64_t seed) { return {VFold{V}, seed}; }
    static SplitScheme monte_carlo(int count, double p_n, std::uint64_t seed) {
        return {MonteCarloSplit{count, p_n}, seed};
    }
    static SplitScheme single(double p_n, std::uint64_t seed) { return {SingleSplit{p_n}, seed}; }

    /// Validation proportion p_n (1/V for V-fold).
    double validation_proportion() const;
    std::string describe() const;
};

/// One realization of the split vector: mask[i] == 1 puts row i in validation.
struct SplitAssignment {
    std::vector<std::uint8_t> mask;

    std::size_t validation_count() const;
    std::vector<Index> training_indices() const;
    std::vector<Index> validation_indices() const;
};

/// Explicit training/validation row lists. Usually built from a SplitAssignment;
/// may overlap in tests.
struct Fold {
    std::vector<Index> training;
    std::vector<Index> validation;

    static Fold from(const SplitAssignment& split);
};

/// Throws ConfigError when V > n, n p_n < 1, or a split would leave no training row.
std::vector<SplitAssignment> make_splits(const SplitScheme& scheme, Index n);
std::vector<Fold> to_folds(const std::vector<SplitAssignment>& splits);

enum class EtaPolicy { One, InvJ, InvJ2, Weighted };
std::string eta_policy_name(EtaPolicy policy);
EtaPolicy eta_policy_from_name(const std::string& name);

/// Observation-level risk (mean loss over validation rows) or the matrix
/// shortcut ||S_validation - psi||^2. Both give the same selection for constant eta.
enum class RiskRoute { Observation, Matrix };

struct CvOptions {
    EtaPolicy eta = EtaPolicy::One;
    RiskRoute route = RiskRoute::Observation;
    /// Center each training fold and shift its validation rows by the training means.
    bool center = true;
    unsigned threads = 1;
};

/// Constant scaling for constant policies. Weighted needs data and is built by
/// estimate_weight_matrix.
ScalingMatrix constant_scaling(EtaPolicy policy, Index J);

/// Data for one fold after centering, with its scaling matrix.
struct PreparedFold {
    DataMatrix training;
    DataMatrix validation;
    ScalingMatrix eta;
};

PreparedFold prepare_fold(const DataMatrix& data, const Fold& fold, const CvOptions& options);

struct CandidateOutcome {
    double cv_risk = 0.0;
    std::vector<double> fold_risks;
    /// Split-averaged true risk difference, filled only when psi0 is supplied.
    std::optional<double> cv_oracle_risk;
    std::vector<double> fold_oracle_risks;
    bool failed = false;
    std::string failure;
};

struct CvEvaluation {
    std::vector<CandidateOutcome> candidates;
    std::vector<std::string> warnings;
    RiskRoute route = RiskRoute::Observation;
};

/// Optional true covariance for simulation-only oracle risks. Unbound "truth"
/// placeholders in the library are bound to psi0.
struct OracleTarget {
    const SymMatrix& psi0;
    ScalingMatrix eta;
};

/// Fit every candidate on every training fold and score it. Results land in
/// fixed (candidate, fold) slots, so they do not depend on thread scheduling.
CvEvaluation evaluate_library(const CandidateLibrary& library, const DataMatrix& data,
                              std::span<const Fold> folds, const CvOptions& options,
                              const std::optional<OracleTarget>& oracle = std::nullopt);

struct ArgminResult {
    std::size_t index = 0;
    std::vector<std::size_t> ties;  // every index attaining the minimum, ascending
};

/// Minimum over entries with valid[k]; ties go to the lowest index. Empty when
/// nothing is valid.
std::optional<ArgminResult> argmin_lowest_index(std::span<const double> values,
                                                const std::vector<bool>& valid);

/// Cross-validated risk of a single candidate. Throws NumericError if it fails on a fold.
double cv_risk_estimate(const EstimatorSpec& spec, const DataMatrix& data,
                        std::span<const Fold> folds, const CvOptions& options);

struct CandidateRisk {
    std::string id;
    Family family = Family::SampleCov;
    std::vector<std::pair<std::string, double>> hyperparameters;
    double cv_risk = 0.0;
    std::vector<double> fold_risks;
    bool failed = false;
    std::string failure;
    std::optional<bool> psd;  // of the full-data estimate, when requested
};

struct SelectionReport {
    std::vector<CandidateRisk> candidates;  // library order
    std::size_t selected_index = 0;
    std::string selected_id;
    std::vector<std::string> tie_ids;
    std::string scheme;
    std::uint64_t seed = 0;
    double p_n = 0.0;
    std::size_t fold_count = 0;
    EtaPolicy eta = EtaPolicy::One;
    RiskRoute route = RiskRoute::Observation;
    bool centered = true;
    Index n = 0;
    Index J = 0;
    std::vector<std::string> warnings;
    SymMatrix estimate;  // selected candidate refit on the full data
};

struct SelectOptions {
    CvOptions cv;
    /// Refit every candidate on the full data and flag positive semi-definiteness.
    bool report_psd = false;
};

/// Throws SelectionError when every candidate fails.
SelectionReport select(const CandidateLibrary& library, const DataMatrix& data,
                       const SplitScheme& scheme, const SelectOptions& options = {});
SelectionReport select(const CandidateLibrary& library, const DataMatrix& data,
                       std::span<const Fold> folds, const SelectOptions& options = {});

/// Min eigenvalue >= -1e-10 * max |eigenvalue|.
bool is_psd(const SymMatrix& m);

struct OracleSelection {
    std::vector<double> risk_differences;  // library order; NaN for failed candidates
    std::vector<bool> failed;
    std::size_t selected_index = 0;
    std::string selected_id;
    std::vector<std::string> tie_ids;
};

struct OracleReport {
    OracleSelection cv;    // split-averaged risk differences
    OracleSelection full;  // full-data risk differences
};

/// Index minimizing the split-averaged ||psi_hat_k(training) - psi0||^2_{F,eta}.
OracleSelection oracle_select_cv(const CandidateLibrary& library, const DataMatrix& data,
                                 std::span<const Fold> folds, const SymMatrix& psi0,
                                 const ScalingMatrix& eta, const CvOptions& options = {});

/// Index minimizing ||psi_hat_k(full data) - psi0||^2_{F,eta}.
OracleSelection oracle_select_full(const CandidateLibrary& library, const DataMatrix& data,
                                   const SymMatrix& psi0, const ScalingMatrix& eta,
                                   const CvOptions& options = {});

/// Apply every candidate to the full (optionally centered) data. Failed
/// candidates yield std::nullopt with the reason in `failures`.
std::vector<std::optional<SymMatrix>> fit_all(const CandidateLibrary& library, const DataMatrix& data,
                                              const CvOptions& options,
                                              std::vector<std::string>* failures = nullptr,
                                              const SymMatrix* truth = nullptr);

}  // namespace cvcov
