// lindblad.hpp — Lindbladian assembly in vectorized form, propagation, steady state

#pragma once

#include <complex>

#include "tqst/model.hpp"

namespace tqst {

enum class SuperopTag {
    lindbladian,
    lindbladian_adjoint,
    current,
    activity,
    dissipator,
    jump_plus,
    jump_minus,
};

// Dense superoperator on row-wise vectorized operators.
struct Superoperator {
    Eigen::MatrixXcd matrix;
    SuperopTag tag{SuperopTag::lindbladian};
    int qubit{-1}; // for per-bath superoperators; -1 otherwise

    int dim() const { return static_cast<int>(matrix.rows()); }
    Eigen::MatrixXcd apply(const Eigen::MatrixXcd& rho) const {
        return devectorize(matrix * vectorize(rho));
    }
};

// Vectorized dissipator D[A] . = A . A^dag - {A^dag A, .}/2.
Eigen::MatrixXcd dissipator_matrix(const Eigen::MatrixXcd& a);

// System Hamiltonian. Two qubits: on-site energies, interaction U, resonant and
// off-resonant couplings, optional local drives. Single qubit: energy plus drive.
Eigen::MatrixXcd build_hamiltonian(const SystemConfig& config);

// L = -i(H x 1 - 1 x H^T) + sum_j [gamma_j^+ D[sigma_+^j] + gamma_j^- D[sigma_-^j]
//     + (gamma_j^z/2) D[sigma_z^j]].
Superoperator build_lindbladian(const SystemConfig& config);

// Heisenberg-picture generator: the Hilbert-Schmidt adjoint (conjugate transpose).
Superoperator adjoint(const Superoperator& l);

enum class PropagationMethod { eigendecomposition, scaling_squaring, adaptive_rk };

// Time-evolution engine. Eigendecomposition of the dense Lindbladian by default;
// falls back to scaling-and-squaring when the eigenvector basis is ill-conditioned
// (condition number > 1e8, near-defective spectra). Adaptive Runge-Kutta is kept
// as a cross-validation method.
class Propagator {
public:
    explicit Propagator(Superoperator l,
                        PropagationMethod method = PropagationMethod::eigendecomposition);

    PropagationMethod method() const { return method_; }
    double eigenvector_condition() const { return condition_; }
    const Superoperator& generator() const { return l_; }

    Eigen::VectorXcd propagate_vec(const Eigen::VectorXcd& v0, double t) const;
    Eigen::MatrixXcd propagate(const Eigen::MatrixXcd& rho0, double t) const;
    DensityOperator evolve(const DensityOperator& rho0, double t) const;

private:
    Superoperator l_;
    PropagationMethod method_;
    double condition_{0.0};
    Eigen::MatrixXcd eigvecs_;
    Eigen::MatrixXcd eigvecs_inv_;
    Eigen::VectorXcd eigvals_;
};

// One-shot convenience wrapper around Propagator.
DensityOperator evolve(const Superoperator& l, const DensityOperator& rho0, double t);

// Null-space steady state, trace-normalized and symmetrized as (rho + rho^dag)/2.
// Requires a unique zero eigenvalue: second-smallest |lambda| > 1e-10.
DensityOperator steady_state(const Superoperator& l);

// The Lindbladian expressed on the 16 real state components (state_directions
// ordering: populations; alpha,beta parts; x,y parts; v,z parts). The result is
// real for any Hermiticity-preserving generator; the imaginary residue is checked.
Eigen::MatrixXd component_matrix(const Superoperator& l);

} // namespace tqst
