#include "cvcov/estimators.hpp"

#include "cvcov/errors.hpp"
#include "cvcov/format.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace cvcov {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

void check_threshold(double u, const char* family) {
    require(std::isfinite(u) && u >= 0.0,
            std::string(family) + ": threshold must be finite and >= 0, got " + format_double(u));
}

std::vector<std::pair<std::string, double>> hyperparameters_of(const EstimatorParams& p) {
    using HP = std::vector<std::pair<std::string, double>>;
    return std::visit(
        overloaded{
            [](const params::SampleCov&) { return HP{}; },
            [](const params::HardThreshold& h) { return HP{{"u", h.threshold}}; },
            [](const params::ScadThreshold& s) { return HP{{"u", s.threshold}, {"a", s.a}}; },
            [](const params::AdaptiveLassoThreshold& s) {
                return HP{{"u", s.threshold}, {"eta", s.exponent}};
            },
            [](const params::Banding& b) { return HP{{"b", static_cast<double>(b.bands)}}; },
            [](const params::Tapering& b) { return HP{{"b", static_cast<double>(b.bands)}}; },
            [](const params::LinearShrinkage&) { return HP{}; },
            [](const params::DenseLinearShrinkage&) { return HP{}; },
            [](const params::Poet& p) {
                return HP{{"L", static_cast<double>(p.factors)}, {"u", p.threshold}};
            },
            [](const params::Fixed&) { return HP{}; },
        },
        p);
}

}  // namespace

std::string family_name(Family family) {
    switch (family) {
        case Family::SampleCov: return "sample_cov";
        case Family::HardThreshold: return "hard";
        case Family::ScadThreshold: return "scad";
        case Family::AdaptiveLassoThreshold: return "adaptive_lasso";
        case Family::Banding: return "banding";
        case Family::Tapering: return "tapering";
        case Family::LinearShrinkage: return "linear_shrinkage";
        case Family::DenseLinearShrinkage: return "dense_shrinkage";
        case Family::Poet: return "poet";
        case Family::Fixed: return "fixed";
    }
    return "unknown";
}

Family family_from_name(const std::string& name) {
    for (Family f : {Family::SampleCov, Family::HardThreshold, Family::ScadThreshold,
                     Family::AdaptiveLassoThreshold, Family::Banding, Family::Tapering,
                     Family::LinearShrinkage, Family::DenseLinearShrinkage, Family::Poet,
                     Family::Fixed}) {
        if (family_name(f) == name) return f;
    }
    throw ConfigError("unknown estimator family '" + name + "'");
}

EstimatorSpec::EstimatorSpec(EstimatorParams p) : params_(std::move(p)) {
    std::visit(overloaded{
                   [](const params::SampleCov&) {},
                   [](const params::HardThreshold& h) { check_threshold(h.threshold, "hard"); },
                   [](const params::ScadThreshold& s) {
                       check_threshold(s.threshold, "scad");
                       require(std::isfinite(s.a) && s.a > 2.0,
                               "scad: shape a must be > 2, got " + format_double(s.a));
                   },
                   [](const params::AdaptiveLassoThreshold& s) {
                       check_threshold(s.threshold, "adaptive_lasso");
                       require(std::isfinite(s.exponent) && s.exponent >= 0.0,
                               "adaptive_lasso: exponent must be >= 0, got " +
                                   format_double(s.exponent));
                   },
                   [](const params::Banding& b) {
                       require(b.bands >= 0, "banding: bands must be >= 0");
                   },
                   [](const params::Tapering& b) {
                       require(b.bands >= 2 && b.bands % 2 == 0,
                               "tapering: bands must be an even integer >= 2, got " +
                                   std::to_string(b.bands));
                   },
                   [](const params::LinearShrinkage&) {},
                   [](const params::DenseLinearShrinkage&) {},
                   [](const params::Poet& p) {
                       require(p.factors >= 0, "poet: factors must be >= 0");
                       check_threshold(p.threshold, "poet");
                   },
                   [](const params::Fixed& f) {
                       require(!f.name.empty(), "fixed: a name is required");
                   },
               },
               params_);

    if (const auto* f = std::get_if<params::Fixed>(&params_)) {
        id_ = f->matrix ? "fixed(" + f->name + ")" : f->name;
        return;
    }
    id_ = family_name(family());
    const auto hp = hyperparameter_string();
    if (!hp.empty()) id_ += "(" + hp + ")";
}

EstimatorSpec EstimatorSpec::fixed(std::string name, SymMatrix m) {
    return EstimatorSpec(params::Fixed{std::move(name), std::make_shared<const SymMatrix>(std::move(m))});
}

Family EstimatorSpec::family() const noexcept {
    return static_cast<Family>(params_.index());
}

std::vector<std::pair<std::string, double>> EstimatorSpec::hyperparameters() const {
    return hyperparameters_of(params_);
}

std::string EstimatorSpec::hyperparameter_string() const {
    std::string out;
    for (const auto& [name, value] : hyperparameters()) {
        if (!out.empty()) out += ';';
        out += name + "=" + format_double(value);
    }
    return out;
}

void EstimatorSpec::validate_for(Index J) const {
    if (const auto* p = std::get_if<params::Poet>(&params_)) {
        require(p->factors <= J, "poet: factors L = " + std::to_string(p->factors) +
                                     " exceeds J = " + std::to_string(J));
    }
    if (const auto* f = std::get_if<params::Fixed>(&params_)) {
        if (!f->matrix) throw ConfigError("candidate '" + id_ + "' is not bound to a matrix");
        require(f->matrix->dim() == J, "fixed candidate '" + f->name + "' has dimension " +
                                           std::to_string(f->matrix->dim()) + ", data has J = " +
                                           std::to_string(J));
    }
}

bool EstimatorSpec::is_unbound_truth() const {
    const auto* f = std::get_if<params::Fixed>(&params_);
    return f != nullptr && !f->matrix;
}

EstimatorSpec EstimatorSpec::with_id(std::string id) const {
    EstimatorSpec copy = *this;
    copy.id_ = std::move(id);
    return copy;
}

CandidateLibrary::CandidateLibrary(std::vector<EstimatorSpec> candidates)
    : candidates_(std::move(candidates)) {
    if (candidates_.empty()) throw ConfigError("candidate library is empty");
    std::unordered_set<std::string> seen;
    for (const auto& c : candidates_) {
        if (!seen.insert(c.id()).second) {
            throw ConfigError("duplicate candidate id '" + c.id() + "'");
        }
    }
}

std::optional<std::size_t> CandidateLibrary::index_of(const std::string& id) const {
    for (std::size_t k = 0; k < candidates_.size(); ++k) {
        if (candidates_[k].id() == id) return k;
    }
    return std::nullopt;
}

std::vector<double> decimal_grid(double start, double stop, double step) {
    if (!(step > 0.0) || stop < start) throw ConfigError("invalid grid range");
    std::vector<double> out;
    for (int i = 0;; ++i) {
        const double v = std::round((start + i * step) * 1e9) / 1e9;
        if (v > stop + step * 1e-6) break;
        out.push_back(v);
    }
    return out;
}

namespace {

void add_thresholds(std::vector<EstimatorSpec>& out, const std::vector<double>& us, Family f) {
    for (double u : us) {
        out.push_back(f == Family::HardThreshold ? EstimatorSpec::hard(u) : EstimatorSpec::scad(u));
    }
}

}  // namespace

CandidateLibrary default_library() {
    std::vector<EstimatorSpec> c;
    c.push_back(EstimatorSpec::sample_cov());
    add_thresholds(c, decimal_grid(0.1, 1.0, 0.1), Family::HardThreshold);
    add_thresholds(c, decimal_grid(0.1, 1.0, 0.1), Family::ScadThreshold);
    for (double u : decimal_grid(0.1, 0.5, 0.1)) {
        for (double e : decimal_grid(0.1, 0.5, 0.1)) c.push_back(EstimatorSpec::adaptive_lasso(u, e));
    }
    for (int b = 1; b <= 5; ++b) c.push_back(EstimatorSpec::banding(b));
    for (int b = 2; b <= 10; b += 2) c.push_back(EstimatorSpec::tapering(b));
    c.push_back(EstimatorSpec::linear_shrinkage());
    c.push_back(EstimatorSpec::dense_shrinkage());
    for (int L = 1; L <= 5; ++L) {
        for (double u : decimal_grid(0.1, 0.3, 0.1)) c.push_back(EstimatorSpec::poet(L, u));
    }
    return CandidateLibrary(std::move(c));
}

CandidateLibrary competitor_library() {
    std::vector<EstimatorSpec> c;
    c.push_back(EstimatorSpec::sample_cov());
    add_thresholds(c, decimal_grid(0.05, 1.0, 0.05), Family::HardThreshold);
    add_thresholds(c, decimal_grid(0.05, 1.0, 0.05), Family::ScadThreshold);
    for (double u : decimal_grid(0.1, 0.5, 0.1)) {
        for (double e : decimal_grid(0.1, 0.5, 0.1)) c.push_back(EstimatorSpec::adaptive_lasso(u, e));
    }
    for (int b = 1; b <= 10; ++b) c.push_back(EstimatorSpec::banding(b));
    for (int b = 2; b <= 10; b += 2) c.push_back(EstimatorSpec::tapering(b));
    c.push_back(EstimatorSpec::linear_shrinkage());
    c.push_back(EstimatorSpec::dense_shrinkage());
    for (int L = 1; L <= 10; ++L) {
        for (double u : decimal_grid(0.1, 1.0, 0.1)) c.push_back(EstimatorSpec::poet(L, u));
    }
    return CandidateLibrary(std::move(c));
}

CandidateLibrary single_cell_library() {
    std::vector<EstimatorSpec> c;
    c.push_back(EstimatorSpec::sample_cov());
    add_thresholds(c, decimal_grid(0.05, 0.3, 0.05), Family::HardThreshold);
    add_thresholds(c, decimal_grid(0.05, 0.5, 0.05), Family::ScadThreshold);
    for (double u : decimal_grid(0.1, 0.5, 0.1)) {
        for (double e : decimal_grid(0.1, 0.5, 0.1)) c.push_back(EstimatorSpec::adaptive_lasso(u, e));
    }
    c.push_back(EstimatorSpec::linear_shrinkage());
    c.push_back(EstimatorSpec::dense_shrinkage());
    for (int L = 5; L <= 10; ++L) {
        for (double u : decimal_grid(0.05, 0.3, 0.05)) c.push_back(EstimatorSpec::poet(L, u));
    }
    return CandidateLibrary(std::move(c));
}

FitContext::FitContext(const DataMatrix& data) : data_(data), sample_cov_(sample_covariance(data)) {}

const EigenDecomposition& FitContext::eigen() const {
    std::call_once(eigen_once_, [this] { eigen_ = eigendecompose(sample_cov_); });
    return *eigen_;
}

double FitContext::sampling_variance() const {
    std::call_once(variance_once_, [this] {
        const auto& x = data_.values();
        const auto& s = sample_cov_.dense();
        const Index n = x.rows();
        const Index J = x.cols();
        double total = 0.0;
        for (Index i = 0; i < n; ++i) {
            const Eigen::RowVectorXd xi = x.row(i);
            total += ((xi.transpose() * xi) - s).squaredNorm();
        }
        variance_ = total / static_cast<double>(J) / (static_cast<double>(n) * static_cast<double>(n));
    });
    return variance_;
}

double hard_threshold(double z, double u) { return std::abs(z) > u ? z : 0.0; }

double soft_threshold(double z, double u) {
    const double m = std::abs(z) - u;
    return m > 0.0 ? std::copysign(m, z) : 0.0;
}

double scad_threshold(double z, double u, double a) {
    const double az = std::abs(z);
    if (az <= 2.0 * u) return soft_threshold(z, u);
    if (az <= a * u) return ((a - 1.0) * z - std::copysign(a * u, z)) / (a - 2.0);
    return z;
}

double adaptive_lasso_threshold(double z, double u, double exponent) {
    const double az = std::abs(z);
    if (az == 0.0) return 0.0;
    const double m = az - std::pow(u, exponent + 1.0) * std::pow(az, -exponent);
    return m > 0.0 ? std::copysign(m, z) : 0.0;
}

namespace {

template <class Fn>
SymMatrix map_entries(const SymMatrix& s, Fn&& fn) {
    const Index J = s.dim();
    Matrix out(J, J);
    for (Index l = 0; l < J; ++l) {
        for (Index j = 0; j <= l; ++j) out(j, l) = fn(s(j, l), j, l);
    }
    return SymMatrix::from_upper(out);
}

}  // namespace

SymMatrix threshold_matrix(const SymMatrix& s, ThresholdRule rule, const ThresholdParams& p) {
    check_threshold(p.threshold, "threshold");
    switch (rule) {
        case ThresholdRule::Hard:
            return map_entries(s, [&](double z, Index, Index) { return hard_threshold(z, p.threshold); });
        case ThresholdRule::Scad:
            require(p.scad_a > 2.0, "scad: shape a must be > 2");
            return map_entries(s, [&](double z, Index, Index) {
                return scad_threshold(z, p.threshold, p.scad_a);
            });
        case ThresholdRule::AdaptiveLasso:
            require(p.exponent >= 0.0, "adaptive_lasso: exponent must be >= 0");
            return map_entries(s, [&](double z, Index, Index) {
                return adaptive_lasso_threshold(z, p.threshold, p.exponent);
            });
    }
    throw ConfigError("unknown threshold rule");
}

SymMatrix threshold_estimate(const DataMatrix& data, ThresholdRule rule, const ThresholdParams& p) {
    return threshold_matrix(sample_covariance(data), rule, p);
}

SymMatrix band_matrix(const SymMatrix& s, int bands) {
    require(bands >= 0, "banding: bands must be >= 0");
    return map_entries(s, [&](double z, Index j, Index l) { return l - j <= bands ? z : 0.0; });
}

SymMatrix band_estimate(const DataMatrix& data, int bands) {
    return band_matrix(sample_covariance(data), bands);
}

double taper_weight(Index distance, int bands) {
    const double d = static_cast<double>(distance < 0 ? -distance : distance);
    const double b = static_cast<double>(bands);
    if (d <= b / 2.0) return 1.0;
    if (d <= b) return 2.0 - 2.0 * d / b;
    return 0.0;
}

SymMatrix taper_matrix(const SymMatrix& s, int bands) {
    require(bands >= 2 && bands % 2 == 0, "tapering: bands must be an even integer >= 2");
    return map_entries(s, [&](double z, Index j, Index l) {
        const double w = taper_weight(l - j, bands);
        return w == 1.0 ? z : w * z;
    });
}

SymMatrix taper_estimate(const DataMatrix& data, int bands) {
    return taper_matrix(sample_covariance(data), bands);
}

namespace {

ShrinkageFit shrink_towards(const FitContext& context, SymMatrix target) {
    const auto& s = context.sample_cov();
    const double J = static_cast<double>(s.dim());
    ShrinkageFit fit;
    fit.d2 = (s.dense() - target.dense()).squaredNorm() / J;
    if (fit.d2 == 0.0) {
        fit.degenerate = true;
        fit.intensity = 1.0;
        fit.estimate = target;
        fit.target = std::move(target);
        return fit;
    }
    fit.b2 = std::min(context.sampling_variance(), fit.d2);
    fit.a2 = fit.d2 - fit.b2;
    fit.intensity = std::clamp(fit.b2 / fit.d2, 0.0, 1.0);
    const double keep = fit.a2 / fit.d2;
    fit.estimate = SymMatrix::from_upper(fit.intensity * target.dense() + keep * s.dense());
    fit.target = std::move(target);
    return fit;
}

}  // namespace

ShrinkageFit linear_shrinkage_fit(const FitContext& context) {
    const auto& s = context.sample_cov();
    const double m = s.dense().trace() / static_cast<double>(s.dim());
    return shrink_towards(context, SymMatrix::diagonal(Vector::Constant(s.dim(), m)));
}

SymMatrix linear_shrinkage_estimate(const DataMatrix& data) {
    FitContext ctx(data);
    return linear_shrinkage_fit(ctx).estimate;
}

SymMatrix dense_target(const SymMatrix& s) {
    const Index J = s.dim();
    if (J < 2) throw InvalidInput("dense shrinkage target requires J >= 2");
    const double diag_mean = s.dense().trace() / static_cast<double>(J);
    const double off_mean = (s.dense().sum() - s.dense().trace()) / static_cast<double>(J * (J - 1));
    Matrix t = Matrix::Constant(J, J, off_mean);
    t.diagonal().setConstant(diag_mean);
    return SymMatrix::from_upper(t);
}

ShrinkageFit dense_shrinkage_fit(const FitContext& context) {
    return shrink_towards(context, dense_target(context.sample_cov()));
}

SymMatrix dense_shrinkage_estimate(const DataMatrix& data) {
    FitContext ctx(data);
    return dense_shrinkage_fit(ctx).estimate;
}

SymMatrix poet_estimate(const FitContext& context, int factors, double threshold) {
    const auto& s = context.sample_cov();
    const Index J = s.dim();
    require(factors >= 0 && factors <= J, "poet: factors must lie in [0, J]");
    check_threshold(threshold, "poet");

    Matrix low_rank = Matrix::Zero(J, J);
    if (factors > 0) {
        const auto& eig = context.eigen();
        const auto v = eig.vectors.leftCols(factors);
        low_rank = v * eig.values.head(factors).asDiagonal() * v.transpose();
    }
    Matrix out(J, J);
    for (Index l = 0; l < J; ++l) {
        for (Index j = 0; j < l; ++j) {
            const double residual = s(j, l) - low_rank(j, l);
            out(j, l) = low_rank(j, l) + hard_threshold(residual, threshold);
        }
        // rank-L part plus the kept complement diagonal reconstitutes S's diagonal
        out(l, l) = s(l, l);
    }
    return SymMatrix::from_upper(out);
}

SymMatrix poet_estimate(const DataMatrix& data, int factors, double threshold) {
    FitContext ctx(data);
    return poet_estimate(ctx, factors, threshold);
}

SymMatrix apply(const EstimatorSpec& spec, const FitContext& ctx) {
    spec.validate_for(ctx.data().J());
    const auto& s = ctx.sample_cov();
    return std::visit(
        overloaded{
            [&](const params::SampleCov&) { return s; },
            [&](const params::HardThreshold& h) {
                return threshold_matrix(s, ThresholdRule::Hard, {.threshold = h.threshold});
            },
            [&](const params::ScadThreshold& p) {
                return threshold_matrix(s, ThresholdRule::Scad,
                                        {.threshold = p.threshold, .scad_a = p.a});
            },
            [&](const params::AdaptiveLassoThreshold& p) {
                return threshold_matrix(s, ThresholdRule::AdaptiveLasso,
                                        {.threshold = p.threshold, .exponent = p.exponent});
            },
            [&](const params::Banding& b) { return band_matrix(s, b.bands); },
            [&](const params::Tapering& b) { return taper_matrix(s, b.bands); },
            [&](const params::LinearShrinkage&) { return linear_shrinkage_fit(ctx).estimate; },
            [&](const params::DenseLinearShrinkage&) { return dense_shrinkage_fit(ctx).estimate; },
            [&](const params::Poet& p) { return poet_estimate(ctx, p.factors, p.threshold); },
            [&](const params::Fixed& f) { return *f.matrix; },
        },
        spec.params());
}

SymMatrix apply(const EstimatorSpec& spec, const DataMatrix& data) {
    FitContext ctx(data);
    return apply(spec, ctx);
}

}  // namespace cvcov
