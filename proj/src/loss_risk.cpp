#include "cvcov/loss_risk.hpp"

#include "cvcov/errors.hpp"

#include <cmath>
#include <string>

namespace cvcov {

namespace {

void check_same_dim(Index a, Index b, const char* what) {
    if (a != b) {
        throw InvalidInput(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                           " vs " + std::to_string(b) + ")");
    }
}

}  // namespace

double observation_loss(const Eigen::Ref<const Vector>& x, const SymMatrix& psi,
                        const ScalingMatrix& eta) {
    check_same_dim(x.size(), psi.dim(), "observation_loss");
    eta.check_dim(psi.dim());
    const auto& m = psi.dense();
    double total = 0.0;
    if (eta.is_constant()) {
        for (Index l = 0; l < m.cols(); ++l) total += (x * x[l] - m.col(l)).squaredNorm();
        return eta.constant_value() * total;
    }
    const auto& w = eta.full_matrix();
    for (Index l = 0; l < m.cols(); ++l) {
        total += (w.col(l).array() * (x * x[l] - m.col(l)).array().square()).sum();
    }
    return total;
}

double validation_risk(const SymMatrix& psi, const DataMatrix& validation, const ScalingMatrix& eta) {
    if (validation.n() < 1) throw InvalidInput("validation set is empty");
    check_same_dim(validation.J(), psi.dim(), "validation_risk");
    double total = 0.0;
    for (Index i = 0; i < validation.n(); ++i) {
        total += observation_loss(validation.values().row(i).transpose(), psi, eta);
    }
    return total / static_cast<double>(validation.n());
}

double matrix_cv_risk_term(const SymMatrix& psi, const DataMatrix& validation,
                           const ScalingMatrix& eta) {
    if (validation.n() < 1) throw InvalidInput("validation set is empty");
    check_same_dim(validation.J(), psi.dim(), "matrix_cv_risk_term");
    const SymMatrix s = sample_covariance(validation);
    return scaled_frobenius_sq(Matrix(s.dense() - psi.dense()), eta);
}

double true_risk_difference(const SymMatrix& psi_hat, const SymMatrix& psi0, const ScalingMatrix& eta) {
    check_same_dim(psi_hat.dim(), psi0.dim(), "true_risk_difference");
    return scaled_frobenius_sq(Matrix(psi_hat.dense() - psi0.dense()), eta);
}

ScalingMatrix estimate_weight_matrix(const DataMatrix& training) {
    const SymMatrix s = sample_covariance(training);
    const Index J = s.dim();
    Vector inv_sd(J);
    for (Index j = 0; j < J; ++j) {
        if (!(s(j, j) > 0.0)) {
            throw DegenerateFeature(static_cast<std::size_t>(j),
                                    "feature " + std::to_string(j) +
                                        " has zero sample variance; weighted loss is undefined");
        }
        inv_sd[j] = 1.0 / std::sqrt(s(j, j));
    }
    Matrix w = inv_sd * inv_sd.transpose();
    // the outer product of identical vectors is symmetric up to rounding order; mirror it
    w.triangularView<Eigen::StrictlyLower>() = w.transpose();
    for (Index j = 0; j < J; ++j) w(j, j) = 1.0 / s(j, j);
    return ScalingMatrix::full(std::move(w));
}

FiniteSampleBound finite_sample_bound(const BoundParams& p, double oracle_risk_diff) {
    if (!(p.delta > 0.0) || !(p.M1 > 0.0) || !(p.M2 > 0.0) || !(p.p_n > 0.0 && p.p_n < 1.0) ||
        p.J < 1 || p.K < 1 || p.n < 1) {
        throw InvalidInput("finite_sample_bound: parameters out of range");
    }
    if (!(oracle_risk_diff >= 0.0)) {
        throw InvalidInput("finite_sample_bound: oracle risk difference must be >= 0");
    }
    FiniteSampleBound out;
    const double J = static_cast<double>(p.J);
    const double m_sum = p.M1 + p.M2;
    out.M_bar = 4.0 * m_sum * m_sum * J * J;
    out.c_value = 2.0 * (1.0 + p.delta) * (1.0 + p.delta) * out.M_bar * (1.0 / 3.0 + 1.0 / p.delta);
    out.bound_term = 2.0 * out.c_value * (1.0 + std::log(static_cast<double>(p.K))) /
                     (static_cast<double>(p.n) * p.p_n);
    out.rhs = (1.0 + 2.0 * p.delta) * oracle_risk_diff + out.bound_term;
    return out;
}

}  // namespace cvcov
