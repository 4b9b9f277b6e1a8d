#pragma once

#include "cvcov/matrix_core.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cvcov {

enum class Family {
    SampleCov,
    HardThreshold,
    ScadThreshold,
    AdaptiveLassoThreshold,
    Banding,
    Tapering,
    LinearShrinkage,
    DenseLinearShrinkage,
    Poet,
    Fixed,
};

/// Config-file name of a family ("hard", "poet", ...).
std::string family_name(Family family);
Family family_from_name(const std::string& name);

namespace params {

struct SampleCov {};
struct HardThreshold {
    double threshold;
};
struct ScadThreshold {
    double threshold;
    double a = 3.7;
};
struct AdaptiveLassoThreshold {
    double threshold;
    double exponent;
};
struct Banding {
    int bands;
};
struct Tapering {
    int bands;
};
struct LinearShrinkage {};
struct DenseLinearShrinkage {};
struct Poet {
    int factors;
    double threshold;
};
/// Returns a fixed matrix regardless of the data. A null matrix marks a
/// placeholder that the simulation runner binds to the true covariance.
struct Fixed {
    std::string name;
    std::shared_ptr<const SymMatrix> matrix;
};

}  // namespace params

using EstimatorParams =
    std::variant<params::SampleCov, params::HardThreshold, params::ScadThreshold,
                 params::AdaptiveLassoThreshold, params::Banding, params::Tapering,
                 params::LinearShrinkage, params::DenseLinearShrinkage, params::Poet,
                 params::Fixed>;

/// One candidate estimator: a family plus validated hyperparameters.
class EstimatorSpec {
public:
    /// Throws ConfigError on invalid hyperparameters.
    explicit EstimatorSpec(EstimatorParams params);

    static EstimatorSpec sample_cov() { return EstimatorSpec(params::SampleCov{}); }
    static EstimatorSpec hard(double u) { return EstimatorSpec(params::HardThreshold{u}); }
    static EstimatorSpec scad(double u, double a = 3.7) {
        return EstimatorSpec(params::ScadThreshold{u, a});
    }
    static EstimatorSpec adaptive_lasso(double u, double exponent) {
        return EstimatorSpec(params::AdaptiveLassoThreshold{u, exponent});
    }
    static EstimatorSpec banding(int b) { return EstimatorSpec(params::Banding{b}); }
    static EstimatorSpec tapering(int b) { return EstimatorSpec(params::Tapering{b}); }
    static EstimatorSpec linear_shrinkage() { return EstimatorSpec(params::LinearShrinkage{}); }
    static EstimatorSpec dense_shrinkage() { return EstimatorSpec(params::DenseLinearShrinkage{}); }
    static EstimatorSpec poet(int L, double u) { return EstimatorSpec(params::Poet{L, u}); }
    static EstimatorSpec fixed(std::string name, SymMatrix m);
    /// Placeholder bound to the true covariance inside simulations.
    static EstimatorSpec truth() { return EstimatorSpec(params::Fixed{"truth", nullptr}); }

    Family family() const noexcept;
    const EstimatorParams& params() const noexcept { return params_; }
    const std::string& id() const noexcept { return id_; }
    /// Hyperparameters as name/value pairs, in declaration order.
    std::vector<std::pair<std::string, double>> hyperparameters() const;
    /// "u=0.1;eta=0.2" form, empty for parameter-free families.
    std::string hyperparameter_string() const;

    /// Dimension-dependent checks (POET L <= J, fixed matrix size).
    void validate_for(Index J) const;

    bool is_unbound_truth() const;

    /// Override the id (e.g. to disambiguate duplicates in a library).
    EstimatorSpec with_id(std::string id) const;

private:
    EstimatorParams params_;
    std::string id_;
};

/// Ordered, non-empty list of candidates with pairwise distinct ids. The order
/// is the tie-break authority for selection.
class CandidateLibrary {
public:
    explicit CandidateLibrary(std::vector<EstimatorSpec> candidates);

    std::size_t size() const noexcept { return candidates_.size(); }
    const EstimatorSpec& operator[](std::size_t k) const { return candidates_[k]; }
    const std::vector<EstimatorSpec>& candidates() const noexcept { return candidates_; }
    auto begin() const { return candidates_.begin(); }
    auto end() const { return candidates_.end(); }

    std::optional<std::size_t> index_of(const std::string& id) const;

private:
    std::vector<EstimatorSpec> candidates_;
};

/// Cartesian grid helpers used by presets and config parsing. Values are
/// rounded to 1e-9 so that decimal grids yield the nearest doubles.
std::vector<double> decimal_grid(double start, double stop, double step);

/// Candidate grid used for selection in the simulations (73 estimators; the
/// nonlinear shrinkage family is not provided).
CandidateLibrary default_library();
/// Grids for the single-family competitor procedures.
CandidateLibrary competitor_library();
/// Grids used for the single-cell analyses.
CandidateLibrary single_cell_library();

/// Fitting state for one (already centered) training set. The sample covariance
/// is computed on construction; the eigendecomposition and sampling variance of
/// S are computed once on first use. Safe to share across threads.
class FitContext {
public:
    explicit FitContext(const DataMatrix& data);
    FitContext(const FitContext&) = delete;
    FitContext& operator=(const FitContext&) = delete;

    const DataMatrix& data() const noexcept { return data_; }
    const SymMatrix& sample_cov() const noexcept { return sample_cov_; }
    const EigenDecomposition& eigen() const;
    /// n^-2 sum_i ||x_i x_i^T - S||^2_{F,1/J}.
    double sampling_variance() const;

private:
    const DataMatrix& data_;
    SymMatrix sample_cov_;
    mutable std::once_flag eigen_once_;
    mutable std::optional<EigenDecomposition> eigen_;
    mutable std::once_flag variance_once_;
    mutable double variance_ = 0.0;
};

/// Evaluate one candidate. Deterministic in (spec, data).
SymMatrix apply(const EstimatorSpec& spec, const DataMatrix& data);
SymMatrix apply(const EstimatorSpec& spec, const FitContext& context);

// Scalar thresholding rules.
double hard_threshold(double z, double u);
double soft_threshold(double z, double u);
double scad_threshold(double z, double u, double a = 3.7);
double adaptive_lasso_threshold(double z, double u, double exponent);

enum class ThresholdRule { Hard, Scad, AdaptiveLasso };

struct ThresholdParams {
    double threshold = 0.0;
    double scad_a = 3.7;
    double exponent = 0.0;
};

/// Apply the rule entrywise to S, diagonal included.
SymMatrix threshold_estimate(const DataMatrix& data, ThresholdRule rule, const ThresholdParams& p);
SymMatrix threshold_matrix(const SymMatrix& s, ThresholdRule rule, const ThresholdParams& p);

SymMatrix band_estimate(const DataMatrix& data, int bands);
SymMatrix band_matrix(const SymMatrix& s, int bands);

/// Taper weight at distance |j-l|: 1 up to b/2, then 2 - 2|j-l|/b down to 0 at b.
double taper_weight(Index distance, int bands);
SymMatrix taper_estimate(const DataMatrix& data, int bands);
SymMatrix taper_matrix(const SymMatrix& s, int bands);

struct ShrinkageFit {
    SymMatrix estimate;
    SymMatrix target;
    double intensity = 0.0;       // weight on the target, in [0, 1]
    double d2 = 0.0;              // scaled distance of S to the target
    double b2 = 0.0;              // min(sampling variance, d2)
    double a2 = 0.0;              // d2 - b2
    bool degenerate = false;      // d2 == 0: the target is returned
};

ShrinkageFit linear_shrinkage_fit(const FitContext& context);
SymMatrix linear_shrinkage_estimate(const DataMatrix& data);

/// Target with the mean sample variance on the diagonal and the mean
/// off-diagonal sample covariance elsewhere. Requires J >= 2.
SymMatrix dense_target(const SymMatrix& s);
ShrinkageFit dense_shrinkage_fit(const FitContext& context);
SymMatrix dense_shrinkage_estimate(const DataMatrix& data);

SymMatrix poet_estimate(const DataMatrix& data, int factors, double threshold);
SymMatrix poet_estimate(const FitContext& context, int factors, double threshold);

}  // namespace cvcov
