#include "cvcov/matrix_core.hpp"

#include "cvcov/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace cvcov {

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

DataMatrix::DataMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1) {
        throw InvalidInput("data matrix must have at least one row and one column");
    }
    if (!all_finite(values_)) {
        throw InvalidInput("data matrix contains non-finite entries");
    }
}

DataMatrix DataMatrix::select_rows(std::span<const Index> rows) const {
    Matrix out(static_cast<Index>(rows.size()), J());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= n()) {
            throw InvalidInput("row index " + std::to_string(rows[i]) + " out of range");
        }
        out.row(static_cast<Index>(i)) = values_.row(rows[i]);
    }
    return DataMatrix(std::move(out));
}

SymMatrix::SymMatrix(Index dim) : m_(Matrix::Zero(dim, dim)) {}

SymMatrix SymMatrix::from_upper(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw InvalidInput("symmetric matrix must be square");
    }
    SymMatrix out;
    out.m_ = m.triangularView<Eigen::Upper>();
    out.m_.triangularView<Eigen::StrictlyLower>() = out.m_.transpose();
    if (!all_finite(out.m_)) {
        throw InvalidInput("symmetric matrix contains non-finite entries");
    }
    return out;
}

SymMatrix SymMatrix::symmetrize(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw InvalidInput("symmetric matrix must be square");
    }
    Matrix avg = 0.5 * (m + m.transpose());
    return from_upper(avg);
}

SymMatrix SymMatrix::identity(Index dim) {
    SymMatrix out;
    out.m_ = Matrix::Identity(dim, dim);
    return out;
}

SymMatrix SymMatrix::diagonal(const Vector& diag) {
    if (!diag.allFinite()) {
        throw InvalidInput("diagonal contains non-finite entries");
    }
    SymMatrix out;
    out.m_ = diag.asDiagonal();
    return out;
}

void SymMatrix::set(Index j, Index l, double value) {
    if (!std::isfinite(value)) {
        throw InvalidInput("symmetric matrix entries must be finite");
    }
    m_(j, l) = value;
    m_(l, j) = value;
}

ScalingMatrix ScalingMatrix::constant(double c) {
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw InvalidInput("constant scaling factor must be positive and finite");
    }
    return ScalingMatrix(c);
}

ScalingMatrix ScalingMatrix::full(Matrix weights) {
    if (weights.rows() != weights.cols()) {
        throw InvalidInput("scaling matrix must be square");
    }
    if (!weights.allFinite() || (weights.array() <= 0.0).any()) {
        throw InvalidInput("scaling matrix entries must be positive and finite");
    }
    if (weights != weights.transpose()) {
        throw InvalidInput("scaling matrix must be symmetric");
    }
    return ScalingMatrix(std::move(weights));
}

double ScalingMatrix::constant_value() const {
    if (!is_constant()) {
        throw InvalidInput("scaling matrix is not constant");
    }
    return std::get<double>(value_);
}

const Matrix& ScalingMatrix::full_matrix() const {
    if (is_constant()) {
        throw InvalidInput("scaling matrix is constant");
    }
    return std::get<Matrix>(value_);
}

double ScalingMatrix::operator()(Index j, Index l) const {
    if (is_constant()) return std::get<double>(value_);
    return std::get<Matrix>(value_)(j, l);
}

void ScalingMatrix::check_dim(Index J) const {
    if (!is_constant() && std::get<Matrix>(value_).rows() != J) {
        throw InvalidInput("scaling matrix dimension " +
                           std::to_string(std::get<Matrix>(value_).rows()) +
                           " does not match J = " + std::to_string(J));
    }
}

Vector column_means(const DataMatrix& data) { return data.values().colwise().mean().transpose(); }

DataMatrix center_columns(const DataMatrix& data) {
    if (data.n() < 2) {
        throw InvalidInput("centering requires at least two observations");
    }
    Matrix centered = data.values().rowwise() - data.values().colwise().mean();
    return DataMatrix(std::move(centered));
}

SymMatrix sample_covariance(const DataMatrix& data) {
    const auto& x = data.values();
    Matrix s = Matrix::Zero(data.J(), data.J());
    s.selfadjointView<Eigen::Upper>().rankUpdate(x.transpose(), 1.0 / static_cast<double>(data.n()));
    return SymMatrix::from_upper(s);
}

double scaled_frobenius_sq(const Matrix& m, const ScalingMatrix& eta) {
    if (m.rows() != m.cols()) {
        throw InvalidInput("scaled Frobenius norm needs a square matrix");
    }
    eta.check_dim(m.rows());
    if (eta.is_constant()) {
        return eta.constant_value() * m.squaredNorm();
    }
    return (eta.full_matrix().array() * m.array().square()).sum();
}

double scaled_frobenius_sq(const SymMatrix& m, const ScalingMatrix& eta) {
    return scaled_frobenius_sq(m.dense(), eta);
}

double spectral_norm(const SymMatrix& m) {
    if (m.dim() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m.dense(), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw NumericError("eigenvalue computation failed to converge (J = " +
                           std::to_string(m.dim()) + ")");
    }
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

EigenDecomposition eigendecompose(const SymMatrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m.dense());
    if (solver.info() != Eigen::Success) {
        throw NumericError("symmetric eigendecomposition failed to converge (J = " +
                           std::to_string(m.dim()) + ", max |entry| = " +
                           std::to_string(m.dense().cwiseAbs().maxCoeff()) + ")");
    }
    const Index J = m.dim();
    EigenDecomposition out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    for (Index c = 0; c < J; ++c) {
        Index arg = 0;
        out.vectors.col(c).cwiseAbs().maxCoeff(&arg);
        if (out.vectors(arg, c) < 0.0) out.vectors.col(c) *= -1.0;
    }
    return out;
}

}  // namespace cvcov
