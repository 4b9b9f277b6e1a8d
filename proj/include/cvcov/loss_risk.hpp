#pragma once

#include "cvcov/matrix_core.hpp"

#include <cstddef>

namespace cvcov {

/// sum_{j,l} eta(j,l) (x_j x_l - psi(j,l))^2 for a single observation.
double observation_loss(const Eigen::Ref<const Vector>& x, const SymMatrix& psi,
                        const ScalingMatrix& eta);

/// Mean observation loss over the rows of `validation`.
double validation_risk(const SymMatrix& psi, const DataMatrix& validation, const ScalingMatrix& eta);

/// ||S(validation) - psi||^2_{F,eta}, with S the zero-mean second moment of the
/// validation rows. Differs from validation_risk by a psi-free constant when
/// eta is constant.
double matrix_cv_risk_term(const SymMatrix& psi, const DataMatrix& validation,
                           const ScalingMatrix& eta);

/// Conditional risk difference of psi_hat under a distribution with
/// covariance psi0: ||psi_hat - psi0||^2_{F,eta}.
double true_risk_difference(const SymMatrix& psi_hat, const SymMatrix& psi0, const ScalingMatrix& eta);

/// eta(j,l) = 1 / sqrt(s_jj s_ll) from the training sample covariance diagonal.
/// Throws DegenerateFeature naming the first zero-variance column.
ScalingMatrix estimate_weight_matrix(const DataMatrix& training);

struct BoundParams {
    double delta = 1.0;
    double M1 = 1.0;  // bound on squared entries of X
    double M2 = 1.0;  // bound on |psi(j,l)| over the parameter space
    std::size_t J = 1;
    std::size_t K = 1;
    std::size_t n = 1;
    double p_n = 0.2;
};

struct FiniteSampleBound {
    double M_bar = 0.0;       // 4 (M1 + M2)^2 J^2
    double c_value = 0.0;     // 2 (1 + delta)^2 M_bar (1/3 + 1/delta)
    double bound_term = 0.0;  // 2 c (1 + log K) / (n p_n)
    double rhs = 0.0;         // (1 + 2 delta) oracle_risk_diff + bound_term
};

FiniteSampleBound finite_sample_bound(const BoundParams& params, double oracle_risk_diff);

}  // namespace cvcov
