#include "qbeat/operators.hpp"

#include <cmath>
#include <vector>

#include "qbeat/errors.hpp"

namespace qbeat {
namespace {

using Triplets = std::vector<Eigen::Triplet<cplx>>;

SparseMatrix from_triplets(std::size_t dim, const Triplets& t) {
    SparseMatrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

// |to><from| on the atom, identity on both modes.
void add_atomic(const HilbertSpace& space, Level to, Level from, double weight, Triplets& out) {
    if (weight == 0.0) return;
    for (int nv = 0; nv <= space.n_max_v(); ++nv) {
        for (int nh = 0; nh <= space.n_max_h(); ++nh) {
            out.emplace_back(static_cast<Eigen::Index>(space.index({to, nv, nh})),
                             static_cast<Eigen::Index>(space.index({from, nv, nh})), weight);
        }
    }
}

OperatorMatrix mode_lowering(const HilbertSpace& space, bool v_mode) {
    Triplets t;
    for (std::size_t i = 0; i < space.dim(); ++i) {
        const BasisState s = space.state(i);
        const int n = v_mode ? s.n_v : s.n_h;
        if (n == 0) continue;
        BasisState lower = s;
        (v_mode ? lower.n_v : lower.n_h) -= 1;
        t.emplace_back(static_cast<Eigen::Index>(space.index(lower)), static_cast<Eigen::Index>(i),
                       std::sqrt(static_cast<double>(n)));
    }
    return {from_triplets(space.dim(), t), v_mode ? "a_V" : "a_H"};
}

}  // namespace

OperatorMatrix OperatorMatrix::adjoint() const {
    SparseMatrix m = matrix.adjoint();
    m.makeCompressed();
    return {std::move(m), label + "^dag"};
}

OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b) {
    if (a.dim() != b.dim()) throw DomainError("operator dimension mismatch");
    SparseMatrix m = a.matrix + b.matrix;
    return {std::move(m), "(" + a.label + " + " + b.label + ")"};
}

OperatorMatrix operator-(const OperatorMatrix& a, const OperatorMatrix& b) {
    if (a.dim() != b.dim()) throw DomainError("operator dimension mismatch");
    SparseMatrix m = a.matrix - b.matrix;
    return {std::move(m), "(" + a.label + " - " + b.label + ")"};
}

OperatorMatrix operator*(cplx s, const OperatorMatrix& a) {
    SparseMatrix m = s * a.matrix;
    return {std::move(m), a.label};
}

OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b) {
    if (a.dim() != b.dim()) throw DomainError("operator dimension mismatch");
    SparseMatrix m = a.matrix * b.matrix;
    m.prune(cplx(0.0, 0.0));
    return {std::move(m), a.label + " " + b.label};
}

OperatorMatrix OperatorSet::h_coupled_lowering() const {
    OperatorMatrix m = (1.0 / std::sqrt(2.0)) * (lower_sigma_plus - lower_sigma_minus);
    m.label = "A_H";
    return m;
}

OperatorSet build_operators(const HilbertSpace& space, const PhysicalParams& params) {
    params.validate();
    const CouplingWeights w = params.coupling_override.value_or(CouplingWeights{});
    OperatorSet ops;
    ops.a_v = mode_lowering(space, true);
    ops.a_h = mode_lowering(space, false);

    Triplets pi;
    for (int m = -1; m <= 1; ++m) {
        add_atomic(space, ground_level(m), excited_level(m), w.pi[static_cast<std::size_t>(m + 1)], pi);
    }
    ops.lower_pi = {from_triplets(space.dim(), pi), "A_pi"};

    Triplets sp;
    for (int m = 0; m <= 1; ++m) {
        add_atomic(space, ground_level(m - 1), excited_level(m),
                   w.sigma_plus[static_cast<std::size_t>(m)], sp);
    }
    ops.lower_sigma_plus = {from_triplets(space.dim(), sp), "A_sigma+"};

    Triplets sm;
    for (int m = -1; m <= 0; ++m) {
        add_atomic(space, ground_level(m + 1), excited_level(m),
                   w.sigma_minus[static_cast<std::size_t>(m + 1)], sm);
    }
    ops.lower_sigma_minus = {from_triplets(space.dim(), sm), "A_sigma-"};

    ops.side_pi = std::sqrt(params.gamma * params.pi_branch) * ops.lower_pi;
    ops.side_pi.label = "S_pi";
    const double sigma_rate = std::sqrt(params.gamma * params.sigma_branch / 2.0);
    ops.side_sigma_plus = sigma_rate * ops.lower_sigma_plus;
    ops.side_sigma_plus.label = "S_sigma+";
    ops.side_sigma_minus = sigma_rate * ops.lower_sigma_minus;
    ops.side_sigma_minus.label = "S_sigma-";
    return ops;
}

OperatorMatrix HamiltonianParts::assemble(double coupling_scale, double drive_scale) const {
    OperatorMatrix h = fixed + cplx(coupling_scale) * coupling;
    h = h + cplx(drive_scale) * drive;
    h.label = "H_eff";
    return h;
}

HamiltonianParts build_hamiltonian_parts(const HilbertSpace& space, const PhysicalParams& params) {
    const OperatorSet ops = build_operators(space, params);
    const cplx i(0.0, 1.0);

    Triplets zeeman;
    for (std::size_t k = 0; k < space.dim(); ++k) {
        const Level l = space.state(k).level;
        const double m = magnetic_number(l);
        const double e = is_excited(l) ? m * params.delta_e - params.drive_detuning : m * params.delta_g;
        if (e != 0.0) zeeman.emplace_back(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k), e);
    }
    OperatorMatrix fixed{from_triplets(space.dim(), zeeman), "H_zeeman"};

    const OperatorMatrix nv = ops.a_v.adjoint() * ops.a_v;
    const OperatorMatrix nh = ops.a_h.adjoint() * ops.a_h;
    OperatorMatrix loss = cplx(2.0 * params.kappa) * (nv + nh);
    for (const OperatorMatrix* c : {&ops.side_pi, &ops.side_sigma_plus, &ops.side_sigma_minus}) {
        loss = loss + c->adjoint() * *c;
    }
    fixed = fixed - cplx(0.0, 0.5) * loss;
    fixed.label = "H_fixed";

    const OperatorMatrix a_hc = ops.h_coupled_lowering();
    OperatorMatrix coupling = ops.a_v * ops.lower_pi.adjoint() + ops.a_h * a_hc.adjoint();
    coupling = cplx(params.g) * (coupling + coupling.adjoint());
    coupling.label = "H_coupling";

    const cplx eps = params.drive_amplitude;
    OperatorMatrix drive = (i * eps * params.kappa) * ops.a_v.adjoint() -
                           (i * std::conj(eps) * params.kappa) * ops.a_v;
    drive.label = "H_drive";
    return {std::move(fixed), std::move(coupling), std::move(drive)};
}

OperatorMatrix build_effective_hamiltonian(const HilbertSpace& space, const PhysicalParams& params,
                                           double drive_scale) {
    if (!(drive_scale >= 0.0 && drive_scale <= 1.0)) {
        throw DomainError("drive_scale must lie in [0, 1]");
    }
    return build_hamiltonian_parts(space, params).assemble(1.0, drive_scale);
}

DetectionOperators build_detection_operators(const OperatorSet& ops, const PhysicalParams& params) {
    const cplx eps = params.lo_mix;
    const double keep = std::sqrt(1.0 - std::norm(eps));
    OperatorMatrix b_h = cplx(keep) * ops.a_h + eps * ops.a_v;
    OperatorMatrix b_v = cplx(keep) * ops.a_v - std::conj(eps) * ops.a_h;
    b_h.matrix.prune(cplx(0.0, 0.0));
    b_v.matrix.prune(cplx(0.0, 0.0));
    b_h.label = "b_H";
    b_v.label = "b_V";
    return {std::move(b_h), std::move(b_v)};
}

std::array<OperatorMatrix, channel_count> build_collapse_operators(const HilbertSpace& space,
                                                                   const PhysicalParams& params) {
    const OperatorSet ops = build_operators(space, params);
    const DetectionOperators det = build_detection_operators(ops, params);
    const double half_h = std::sqrt(params.kappa);
    std::array<OperatorMatrix, channel_count> c;
    c[static_cast<int>(Channel::h_det_a)] = cplx(half_h) * det.b_h;
    c[static_cast<int>(Channel::h_det_b)] = cplx(half_h) * det.b_h;
    c[static_cast<int>(Channel::v_out)] = cplx(std::sqrt(2.0 * params.kappa)) * det.b_v;
    c[static_cast<int>(Channel::side_pi)] = ops.side_pi;
    c[static_cast<int>(Channel::side_sigma_plus)] = ops.side_sigma_plus;
    c[static_cast<int>(Channel::side_sigma_minus)] = ops.side_sigma_minus;
    for (int k = 0; k < channel_count; ++k) c[static_cast<std::size_t>(k)].label = channel_name(static_cast<Channel>(k));
    return c;
}

cplx steady_alpha(const PhysicalParams& params) { return params.drive_amplitude; }

}  // namespace qbeat
