#pragma once

// Steady state of the Lindblad master equation built from the same
// effective Hamiltonian and collapse operators as the trajectory engine.
// Used as an ensemble oracle for the unraveling.

#include <Eigen/SparseLU>
#include <unsupported/Eigen/KroneckerProduct>

#include <array>

#include "qbeat/operators.hpp"

namespace qbeat::testing {

struct SteadyState {
    DenseMatrix rho;
    std::array<double, channel_count> rates{};
    double n_v = 0.0;
    double n_h = 0.0;
};

inline SteadyState master_equation_steady_state(int n_max_v, int n_max_h, const PhysicalParams& p,
                                                double drive_scale = 1.0) {
    const HilbertSpace space(n_max_v, n_max_h);
    const auto n = static_cast<Eigen::Index>(space.dim());
    const SparseMatrix h = build_effective_hamiltonian(space, p, drive_scale).matrix;
    const auto cs = build_collapse_operators(space, p);
    using Sp = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;
    Sp id(n, n);
    id.setIdentity();
    const Sp hc = h;
    const Sp hconj = hc.conjugate();
    // vec(A rho B) = (B^T kron A) vec(rho), column-major vec.
    Sp l = cplx(0.0, -1.0) * Sp(Eigen::kroneckerProduct(id, hc)) + cplx(0.0, 1.0) * Sp(Eigen::kroneckerProduct(hconj, id));
    for (const auto& c : cs) {
        const Sp cc = c.matrix;
        l += Sp(Eigen::kroneckerProduct(Sp(cc.conjugate()), cc));
    }
    // Replace the first equation by the trace condition.
    std::vector<Eigen::Triplet<cplx>> trip;
    for (int k = 0; k < l.outerSize(); ++k) {
        for (Sp::InnerIterator it(l, k); it; ++it) {
            if (it.row() != 0) trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(0, static_cast<int>(i * n + i), 1.0);
    Sp a(n * n, n * n);
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Sp> lu;
    lu.compute(a);
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(n * n);
    b[0] = 1.0;
    const Eigen::VectorXcd x = lu.solve(b);
    SteadyState s;
    s.rho = Eigen::Map<const DenseMatrix>(x.data(), n, n);
    s.rho = 0.5 * (s.rho + s.rho.adjoint()).eval();
    for (std::size_t k = 0; k < cs.size(); ++k) {
        const DenseMatrix cc = DenseMatrix(cs[k].matrix.adjoint() * cs[k].matrix);
        s.rates[k] = (cc * s.rho).trace().real();
    }
    const OperatorSet ops = build_operators(space, p);
    s.n_v = (DenseMatrix(ops.a_v.matrix.adjoint() * ops.a_v.matrix) * s.rho).trace().real();
    s.n_h = (DenseMatrix(ops.a_h.matrix.adjoint() * ops.a_h.matrix) * s.rho).trace().real();
    return s;
}

}  // namespace qbeat::testing
