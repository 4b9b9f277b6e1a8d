#include "cvcov/cv_engine.hpp"

#include "cvcov/errors.hpp"
#include "cvcov/format.hpp"
#include "cvcov/loss_risk.hpp"
#include "parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace cvcov {

double SplitScheme::validation_proportion() const {
    if (const auto* v = std::get_if<VFold>(&design)) return 1.0 / static_cast<double>(v->folds);
    if (const auto* m = std::get_if<MonteCarloSplit>(&design)) return m->p_n;
    return std::get<SingleSplit>(design).p_n;
}

std::string SplitScheme::describe() const {
    if (const auto* v = std::get_if<VFold>(&design)) return "vfold(V=" + std::to_string(v->folds) + ")";
    if (const auto* m = std::get_if<MonteCarloSplit>(&design)) {
        return "monte_carlo(splits=" + std::to_string(m->count) + ";p_n=" + format_double(m->p_n) + ")";
    }
    return "single(p_n=" + format_double(std::get<SingleSplit>(design).p_n) + ")";
}

std::size_t SplitAssignment::validation_count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::vector<Index> SplitAssignment::training_indices() const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] == 0) out.push_back(static_cast<Index>(i));
    }
    return out;
}

std::vector<Index> SplitAssignment::validation_indices() const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] != 0) out.push_back(static_cast<Index>(i));
    }
    return out;
}

Fold Fold::from(const SplitAssignment& split) {
    return Fold{split.training_indices(), split.validation_indices()};
}

std::vector<Fold> to_folds(const std::vector<SplitAssignment>& splits) {
    std::vector<Fold> out;
    out.reserve(splits.size());
    for (const auto& s : splits) out.push_back(Fold::from(s));
    return out;
}

namespace {

std::vector<Index> shuffled(Index n, std::mt19937_64& rng) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    // Fisher-Yates with explicit draws keeps the permutation independent of the
    // standard library's shuffle implementation.
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

std::size_t validation_size(Index n, double p_n) {
    if (!(p_n > 0.0 && p_n < 1.0)) {
        throw ConfigError("validation proportion must lie in (0, 1), got " + format_double(p_n));
    }
    const double raw = static_cast<double>(n) * p_n;
    if (raw < 1.0) {
        throw ConfigError("n * p_n = " + format_double(raw) + " leaves no validation observation");
    }
    const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-12));
    if (count >= static_cast<std::size_t>(n)) {
        throw ConfigError("validation proportion leaves no training observation");
    }
    return count;
}

SplitAssignment random_split(Index n, std::size_t count, std::mt19937_64& rng) {
    const auto order = shuffled(n, rng);
    SplitAssignment s;
    s.mask.assign(static_cast<std::size_t>(n), 0);
    for (std::size_t i = 0; i < count; ++i) s.mask[static_cast<std::size_t>(order[i])] = 1;
    return s;
}

}  // namespace

std::vector<SplitAssignment> make_splits(const SplitScheme& scheme, Index n) {
    if (n < 2) throw ConfigError("cross-validation needs at least two observations");
    std::mt19937_64 rng(scheme.seed);
    std::vector<SplitAssignment> out;
    if (const auto* v = std::get_if<VFold>(&scheme.design)) {
        if (v->folds < 2) throw ConfigError("V-fold CV needs V >= 2");
        if (v->folds > n) {
            throw ConfigError("V = " + std::to_string(v->folds) + " exceeds n = " + std::to_string(n));
        }
        const auto order = shuffled(n, rng);
        const Index V = v->folds;
        const Index base = n / V;
        const Index extra = n % V;
        Index pos = 0;
        for (Index f = 0; f < V; ++f) {
            const Index size = base + (f < extra ? 1 : 0);
            SplitAssignment s;
            s.mask.assign(static_cast<std::size_t>(n), 0);
            for (Index i = 0; i < size; ++i) s.mask[static_cast<std::size_t>(order[pos + i])] = 1;
            pos += size;
            out.push_back(std::move(s));
        }
        return out;
    }
    if (const auto* m = std::get_if<MonteCarloSplit>(&scheme.design)) {
        if (m->count < 1) throw ConfigError("Monte-Carlo CV needs at least one split");
        const auto count = validation_size(n, m->p_n);
        for (int s = 0; s < m->count; ++s) out.push_back(random_split(n, count, rng));
        return out;
    }
    const auto count = validation_size(n, std::get<SingleSplit>(scheme.design).p_n);
    out.push_back(random_split(n, count, rng));
    return out;
}

std::string eta_policy_name(EtaPolicy policy) {
    switch (policy) {
        case EtaPolicy::One: return "one";
        case EtaPolicy::InvJ: return "inv_J";
        case EtaPolicy::InvJ2: return "inv_J2";
        case EtaPolicy::Weighted: return "weighted";
    }
    return "one";
}

EtaPolicy eta_policy_from_name(const std::string& name) {
    for (auto p : {EtaPolicy::One, EtaPolicy::InvJ, EtaPolicy::InvJ2, EtaPolicy::Weighted}) {
        if (eta_policy_name(p) == name) return p;
    }
    throw ConfigError("unknown scaling policy '" + name + "' (expected one, inv_J, inv_J2, weighted)");
}

ScalingMatrix constant_scaling(EtaPolicy policy, Index J) {
    const double j = static_cast<double>(J);
    switch (policy) {
        case EtaPolicy::One: return ScalingMatrix::constant(1.0);
        case EtaPolicy::InvJ: return ScalingMatrix::constant(1.0 / j);
        case EtaPolicy::InvJ2: return ScalingMatrix::constant(1.0 / (j * j));
        case EtaPolicy::Weighted: break;
    }
    throw ConfigError("weighted scaling is estimated from data, not constant");
}

PreparedFold prepare_fold(const DataMatrix& data, const Fold& fold, const CvOptions& options) {
    if (fold.training.empty()) throw InvalidInput("training fold is empty");
    if (fold.validation.empty()) throw InvalidInput("validation fold is empty");
    DataMatrix training = data.select_rows(fold.training);
    DataMatrix validation = data.select_rows(fold.validation);
    if (options.center && training.n() >= 2) {
        const Eigen::RowVectorXd means = training.values().colwise().mean();
        training = DataMatrix(Matrix(training.values().rowwise() - means));
        validation = DataMatrix(Matrix(validation.values().rowwise() - means));
    }
    ScalingMatrix eta = options.eta == EtaPolicy::Weighted ? estimate_weight_matrix(training)
                                                           : constant_scaling(options.eta, data.J());
    return PreparedFold{std::move(training), std::move(validation), std::move(eta)};
}

namespace {

EstimatorSpec bind_truth(const EstimatorSpec& spec, const SymMatrix* truth) {
    if (!spec.is_unbound_truth()) return spec;
    if (truth == nullptr) {
        throw ConfigError("candidate '" + spec.id() + "' needs a known true covariance");
    }
    return EstimatorSpec::fixed(spec.id(), *truth).with_id(spec.id());
}

/// Fit and check; returns an error message on failure.
std::optional<SymMatrix> try_fit(const EstimatorSpec& spec, const FitContext& ctx, const SymMatrix* truth,
                                 std::string& failure) {
    try {
        SymMatrix est = apply(bind_truth(spec, truth), ctx);
        if (!est.dense().allFinite()) {
            failure = "non-finite estimate";
            return std::nullopt;
        }
        return est;
    } catch (const std::exception& e) {
        failure = e.what();
        return std::nullopt;
    }
}

RiskRoute effective_route(const CvOptions& options, std::vector<std::string>& warnings) {
    if (options.route == RiskRoute::Matrix && options.eta == EtaPolicy::Weighted) {
        warnings.emplace_back(
            "matrix risk shortcut requires constant scaling; using observation-level risk");
        return RiskRoute::Observation;
    }
    return options.route;
}

}  // namespace

CvEvaluation evaluate_library(const CandidateLibrary& library, const DataMatrix& data,
                              std::span<const Fold> folds, const CvOptions& options,
                              const std::optional<OracleTarget>& oracle) {
    if (folds.empty()) throw ConfigError("no CV splits supplied");
    CvEvaluation eval;
    eval.route = effective_route(options, eval.warnings);
    const std::size_t K = library.size();
    const std::size_t F = folds.size();
    const SymMatrix* truth = oracle ? &oracle->psi0 : nullptr;

    eval.candidates.resize(K);
    for (auto& c : eval.candidates) {
        c.fold_risks.assign(F, 0.0);
        if (oracle) c.fold_oracle_risks.assign(F, 0.0);
    }
    std::vector<std::string> fold_fail(K);

    bool warned_small = false;
    for (std::size_t f = 0; f < F; ++f) {
        const PreparedFold fold = prepare_fold(data, folds[f], options);
        if (!warned_small && fold.training.n() < data.J()) {
            eval.warnings.push_back("training fold " + std::to_string(f) + " has " +
                                    std::to_string(fold.training.n()) + " observations, fewer than J = " +
                                    std::to_string(data.J()));
            warned_small = true;
        }
        const FitContext ctx(fold.training);
        std::optional<SymMatrix> validation_cov;
        if (eval.route == RiskRoute::Matrix) validation_cov = sample_covariance(fold.validation);

        detail::parallel_for(K, options.threads, [&](std::size_t k) {
            auto& slot = eval.candidates[k];
            if (slot.failed) return;
            std::string failure;
            auto est = try_fit(library[k], ctx, truth, failure);
            if (!est) {
                slot.failed = true;
                slot.failure = "fold " + std::to_string(f) + ": " + failure;
                return;
            }
            slot.fold_risks[f] =
                eval.route == RiskRoute::Matrix
                    ? scaled_frobenius_sq(Matrix(validation_cov->dense() - est->dense()), fold.eta)
                    : validation_risk(*est, fold.validation, fold.eta);
            if (oracle) slot.fold_oracle_risks[f] = true_risk_difference(*est, oracle->psi0, oracle->eta);
        });
    }

    const double inv_f = 1.0 / static_cast<double>(F);
    for (auto& c : eval.candidates) {
        if (c.failed) {
            c.cv_risk = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        double sum = 0.0;
        for (double r : c.fold_risks) sum += r;
        c.cv_risk = sum * inv_f;
        if (oracle) {
            double osum = 0.0;
            for (double r : c.fold_oracle_risks) osum += r;
            c.cv_oracle_risk = osum * inv_f;
        }
    }
    return eval;
}

std::optional<ArgminResult> argmin_lowest_index(std::span<const double> values, const std::vector<bool>& valid) {
    std::optional<ArgminResult> best;
    double best_value = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!valid[k]) continue;
        if (!best || values[k] < best_value) {
            best = ArgminResult{k, {k}};
            best_value = values[k];
        } else if (values[k] == best_value) {
            best->ties.push_back(k);
        }
    }
    return best;
}

double cv_risk_estimate(const EstimatorSpec& spec, const DataMatrix& data, std::span<const Fold> folds,
                        const CvOptions& options) {
    const CandidateLibrary single({spec});
    const auto eval = evaluate_library(single, data, folds, options);
    if (eval.candidates[0].failed) {
        throw NumericError("candidate '" + spec.id() + "' failed: " + eval.candidates[0].failure);
    }
    return eval.candidates[0].cv_risk;
}

bool is_psd(const SymMatrix& m) {
    if (m.dim() == 0) return true;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m.dense(), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) return false;
    const auto& ev = solver.eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    return ev.minCoeff() >= -1e-10 * scale;
}

namespace {

DataMatrix maybe_center(const DataMatrix& data, bool center) {
    return center && data.n() >= 2 ? center_columns(data) : data;
}

}  // namespace

std::vector<std::optional<SymMatrix>> fit_all(const CandidateLibrary& library, const DataMatrix& data,
                                              const CvOptions& options, std::vector<std::string>* failures,
                                              const SymMatrix* truth) {
    const DataMatrix prepared = maybe_center(data, options.center);
    const FitContext ctx(prepared);
    std::vector<std::optional<SymMatrix>> out(library.size());
    std::vector<std::string> reasons(library.size());
    detail::parallel_for(library.size(), options.threads,
                         [&](std::size_t k) { out[k] = try_fit(library[k], ctx, truth, reasons[k]); });
    if (failures != nullptr) *failures = std::move(reasons);
    return out;
}

SelectionReport select(const CandidateLibrary& library, const DataMatrix& data, std::span<const Fold> folds,
                       const SelectOptions& options) {
    const auto eval = evaluate_library(library, data, folds, options.cv);
    const std::size_t K = library.size();

    SelectionReport report;
    report.n = data.n();
    report.J = data.J();
    report.eta = options.cv.eta;
    report.route = eval.route;
    report.centered = options.cv.center;
    report.fold_count = folds.size();
    report.warnings = eval.warnings;
    report.scheme = "custom";
    if (!folds.empty()) {
        report.p_n = static_cast<double>(folds[0].validation.size()) / static_cast<double>(data.n());
    }

    std::vector<double> risks(K);
    std::vector<bool> valid_vec(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c = eval.candidates[k];
        CandidateRisk row;
        row.id = library[k].id();
        row.family = library[k].family();
        row.hyperparameters = library[k].hyperparameters();
        row.cv_risk = c.cv_risk;
        row.fold_risks = c.fold_risks;
        row.failed = c.failed;
        row.failure = c.failure;
        report.candidates.push_back(std::move(row));
        risks[k] = c.cv_risk;
        valid_vec[k] = !c.failed;
    }
    const auto best = argmin_lowest_index(risks, valid_vec);
    if (!best) throw SelectionError("every candidate failed during cross-validation");
    report.selected_index = best->index;
    report.selected_id = library[best->index].id();
    for (auto t : best->ties) report.tie_ids.push_back(library[t].id());

    if (options.report_psd) {
        std::vector<std::string> reasons;
        const auto fits = fit_all(library, data, options.cv, &reasons);
        for (std::size_t k = 0; k < K; ++k) {
            if (fits[k]) report.candidates[k].psd = is_psd(*fits[k]);
        }
        if (!fits[best->index]) {
            throw SelectionError("selected candidate '" + report.selected_id +
                                 "' failed on the full data: " + reasons[best->index]);
        }
        report.estimate = *fits[best->index];
    } else {
        const DataMatrix prepared = maybe_center(data, options.cv.center);
        report.estimate = apply(library[best->index], prepared);
    }
    return report;
}

SelectionReport select(const CandidateLibrary& library, const DataMatrix& data, const SplitScheme& scheme,
                       const SelectOptions& options) {
    const auto folds = to_folds(make_splits(scheme, data.n()));
    SelectionReport report = select(library, data, folds, options);
    report.scheme = scheme.describe();
    report.seed = scheme.seed;
    report.p_n = scheme.validation_proportion();
    return report;
}

namespace {

OracleSelection finish_oracle(const CandidateLibrary& library, std::vector<double> risks,
                              std::vector<bool> failed) {
    OracleSelection out;
    const std::size_t K = library.size();
    std::vector<bool> valid(K);
    for (std::size_t k = 0; k < K; ++k) valid[k] = !failed[k];
    const auto best = argmin_lowest_index(risks, valid);
    if (!best) throw SelectionError("every candidate failed in oracle evaluation");
    out.selected_index = best->index;
    out.selected_id = library[best->index].id();
    for (auto t : best->ties) out.tie_ids.push_back(library[t].id());
    out.risk_differences = std::move(risks);
    out.failed = std::move(failed);
    return out;
}

}  // namespace

OracleSelection oracle_select_cv(const CandidateLibrary& library, const DataMatrix& data,
                                 std::span<const Fold> folds, const SymMatrix& psi0, const ScalingMatrix& eta,
                                 const CvOptions& options) {
    const auto eval = evaluate_library(library, data, folds, options, OracleTarget{psi0, eta});
    std::vector<double> risks(library.size());
    std::vector<bool> failed(library.size());
    for (std::size_t k = 0; k < library.size(); ++k) {
        failed[k] = eval.candidates[k].failed;
        risks[k] = failed[k] ? std::numeric_limits<double>::quiet_NaN() : *eval.candidates[k].cv_oracle_risk;
    }
    return finish_oracle(library, std::move(risks), std::move(failed));
}

OracleSelection oracle_select_full(const CandidateLibrary& library, const DataMatrix& data,
                                   const SymMatrix& psi0, const ScalingMatrix& eta, const CvOptions& options) {
    const auto fits = fit_all(library, data, options, nullptr, &psi0);
    std::vector<double> risks(library.size());
    std::vector<bool> failed(library.size());
    for (std::size_t k = 0; k < library.size(); ++k) {
        failed[k] = !fits[k].has_value();
        risks[k] = failed[k] ? std::numeric_limits<double>::quiet_NaN()
                             : true_risk_difference(*fits[k], psi0, eta);
    }
    return finish_oracle(library, std::move(risks), std::move(failed));
}

}  // namespace cvcov
