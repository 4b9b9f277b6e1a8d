#pragma once

#include "cvcov/matrix_core.hpp"
#include "oracles.hpp"

#include <initializer_list>

namespace testing {

inline cvcov::Matrix to_eigen(const oracle::Mat& m) {
    cvcov::Matrix out(static_cast<cvcov::Index>(m.size()), static_cast<cvcov::Index>(m[0].size()));
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m[i].size(); ++j) out(i, j) = m[i][j];
    return out;
}

inline cvcov::Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
    oracle::Mat m;
    for (auto row : r) m.emplace_back(row);
    return to_eigen(m);
}

inline cvcov::DataMatrix data(const oracle::Mat& m) { return cvcov::DataMatrix(to_eigen(m)); }

inline cvcov::SymMatrix sym(const oracle::Mat& m) { return cvcov::SymMatrix::from_upper(to_eigen(m)); }

inline double max_abs_diff(const cvcov::Matrix& a, const cvcov::Matrix& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

// AR(1)-style correlation matrix, handy as a well-conditioned truth.
inline cvcov::SymMatrix ar1(cvcov::Index J, double rho) {
    cvcov::Matrix m(J, J);
    for (cvcov::Index j = 0; j < J; ++j)
        for (cvcov::Index l = 0; l < J; ++l) m(j, l) = std::pow(rho, std::abs(static_cast<double>(j - l)));
    return cvcov::SymMatrix::from_upper(m);
}

}  // namespace testing
