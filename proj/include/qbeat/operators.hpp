#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <string>

#include "qbeat/channel.hpp"
#include "qbeat/model.hpp"

namespace qbeat {

using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using DenseMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

struct OperatorMatrix {
    SparseMatrix matrix;
    std::string label;

    std::size_t dim() const { return static_cast<std::size_t>(matrix.rows()); }
    OperatorMatrix adjoint() const;
};

OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b);
OperatorMatrix operator-(const OperatorMatrix& a, const OperatorMatrix& b);
OperatorMatrix operator*(cplx s, const OperatorMatrix& a);
OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b);

// Mode and atomic operators lifted to the full space. Atomic lowering
// operators include the optional coupling weights.
struct OperatorSet {
    OperatorMatrix a_v;
    OperatorMatrix a_h;
    OperatorMatrix lower_pi;           // sum_m |g_m><e_m|
    OperatorMatrix lower_sigma_plus;   // e_m -> g_(m-1)
    OperatorMatrix lower_sigma_minus;  // e_m -> g_(m+1)
    OperatorMatrix side_pi;
    OperatorMatrix side_sigma_plus;
    OperatorMatrix side_sigma_minus;

    // Atomic operator coupled to the H mode: (A_sigma+ - A_sigma-)/sqrt(2).
    OperatorMatrix h_coupled_lowering() const;
};

OperatorSet build_operators(const HilbertSpace& space, const PhysicalParams& params);

// H_eff split by how its pieces are modulated in time:
//   H_eff = fixed + coupling_scale * coupling + drive_scale * drive.
// `fixed` holds the Zeeman ladder, the drive detuning and the
// anti-Hermitian decay part.
struct HamiltonianParts {
    OperatorMatrix fixed;
    OperatorMatrix coupling;
    OperatorMatrix drive;

    OperatorMatrix assemble(double coupling_scale, double drive_scale) const;
};

HamiltonianParts build_hamiltonian_parts(const HilbertSpace& space, const PhysicalParams& params);

// Non-Hermitian effective Hamiltonian with the drive multiplied by
// drive_scale in [0, 1].
OperatorMatrix build_effective_hamiltonian(const HilbertSpace& space, const PhysicalParams& params,
                                           double drive_scale);

// Detection-path field operators after the local-oscillator mixing:
//   b_H = sqrt(1-|eps|^2) a_H + eps a_V
//   b_V = sqrt(1-|eps|^2) a_V - conj(eps) a_H
// The map is unitary, so b_H'b_H + b_V'b_V = a_H'a_H + a_V'a_V.
struct DetectionOperators {
    OperatorMatrix b_h;
    OperatorMatrix b_v;
};

DetectionOperators build_detection_operators(const OperatorSet& ops, const PhysicalParams& params);

// Collapse operators indexed by Channel. The H output is split 50/50 onto
// two detectors.
std::array<OperatorMatrix, channel_count> build_collapse_operators(const HilbertSpace& space,
                                                                   const PhysicalParams& params);

// Steady V-mode amplitude used by the closed-form shift formulas: the
// resonant empty-cavity response to the input term.
cplx steady_alpha(const PhysicalParams& params);

}  // namespace qbeat
