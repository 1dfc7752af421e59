#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "colltherm/errors.hpp"

namespace colltherm {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

namespace linalg {

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline int qubit_count(Eigen::Index dim) {
    int n = 0;
    while ((Eigen::Index{1} << n) < dim) ++n;
    if ((Eigen::Index{1} << n) != dim) throw DomainError("dimension is not a power of two");
    return n;
}

// Partial trace over a register of qubits. Qubit 0 is the most significant
// tensor factor. `keep` lists the retained qubits in ascending order.
inline CMatrix partial_trace(const CMatrix& rho, const std::vector<int>& keep) {
    const int n = qubit_count(rho.rows());
    std::vector<bool> kept(static_cast<std::size_t>(n), false);
    for (int q : keep) {
        if (q < 0 || q >= n) throw DomainError("partial_trace: qubit index out of range");
        kept[static_cast<std::size_t>(q)] = true;
    }
    const int n_keep = static_cast<int>(keep.size());
    const Eigen::Index dim_keep = Eigen::Index{1} << n_keep;
    CMatrix out = CMatrix::Zero(dim_keep, dim_keep);

    // Scatter the bits of the full index onto the kept/traced registers.
    auto reduced_index = [&](Eigen::Index full, bool want_kept) {
        Eigen::Index r = 0;
        for (int q = 0; q < n; ++q) {
            if (kept[static_cast<std::size_t>(q)] != want_kept) continue;
            r = (r << 1) | ((full >> (n - 1 - q)) & 1);
        }
        return r;
    };
    for (Eigen::Index i = 0; i < rho.rows(); ++i) {
        const Eigen::Index ik = reduced_index(i, true), it = reduced_index(i, false);
        for (Eigen::Index j = 0; j < rho.cols(); ++j) {
            if (reduced_index(j, false) != it) continue;
            out(ik, reduced_index(j, true)) += rho(i, j);
        }
    }
    return out;
}

inline double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace linalg
}  // namespace colltherm
