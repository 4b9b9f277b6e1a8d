#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <variant>

namespace cvcov {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// n x J observation matrix, rows are observations. Entries are always finite.
class DataMatrix {
public:
    DataMatrix() = default;
    explicit DataMatrix(Matrix values);

    Index n() const noexcept { return values_.rows(); }
    Index J() const noexcept { return values_.cols(); }
    const Matrix& values() const noexcept { return values_; }

    /// Rows at the given indices, in the given order.
    DataMatrix select_rows(std::span<const Index> rows) const;

private:
    Matrix values_;
};

/// Dense symmetric J x J matrix. Every write goes to both (j,l) and (l,j), so
/// the stored matrix is exactly symmetric. Positive semi-definiteness is not
/// enforced: thresholded and banded estimates may be indefinite.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(Index dim);

    /// Copies the upper triangle of `m` (diagonal included) and mirrors it.
    static SymMatrix from_upper(const Matrix& m);
    /// (m + m^T) / 2.
    static SymMatrix symmetrize(const Matrix& m);
    static SymMatrix identity(Index dim);
    static SymMatrix diagonal(const Vector& diag);

    Index dim() const noexcept { return m_.rows(); }
    double operator()(Index j, Index l) const { return m_(j, l); }
    void set(Index j, Index l, double value);

    const Matrix& dense() const noexcept { return m_; }

    friend bool operator==(const SymMatrix& a, const SymMatrix& b) {
        return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
    }

private:
    Matrix m_;
};

/// Entry weights eta for the scaled Frobenius norm: a positive constant or a
/// full symmetric matrix of positive entries.
class ScalingMatrix {
public:
    static ScalingMatrix constant(double c);
    static ScalingMatrix full(Matrix weights);

    bool is_constant() const noexcept { return std::holds_alternative<double>(value_); }
    double constant_value() const;
    const Matrix& full_matrix() const;
    double operator()(Index j, Index l) const;

    /// Check the weight dimension against J. Constant weights fit any J.
    void check_dim(Index J) const;

private:
    explicit ScalingMatrix(std::variant<double, Matrix> v) : value_(std::move(v)) {}
    std::variant<double, Matrix> value_;
};

struct EigenDecomposition {
    Vector values;   // non-increasing
    Matrix vectors;  // column j pairs with values[j]; largest-|entry| of each column is positive
};

Vector column_means(const DataMatrix& data);

/// Subtract each column's mean. Requires n >= 2.
DataMatrix center_columns(const DataMatrix& data);

/// Zero-mean second moment (1/n) X^T X. The caller centers the data.
SymMatrix sample_covariance(const DataMatrix& data);

/// sum_{j,l} eta(j,l) * m(j,l)^2.
double scaled_frobenius_sq(const Matrix& m, const ScalingMatrix& eta);
double scaled_frobenius_sq(const SymMatrix& m, const ScalingMatrix& eta);

/// Largest absolute eigenvalue.
double spectral_norm(const SymMatrix& m);

/// Throws NumericError if the symmetric eigensolver fails to converge.
EigenDecomposition eigendecompose(const SymMatrix& m);

}  // namespace cvcov
