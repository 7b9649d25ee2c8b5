// krylov.hpp — Krylov spaces of transport observables and spectral observability

#pragma once

#include <complex>
#include <string>
#include <vector>

#include "tqst/lindblad.hpp"

namespace tqst {

// Orthonormal basis of span{seed, L^dag seed, L^dag^2 seed, ...} under the
// Hilbert-Schmidt inner product.
struct KrylovBasis {
    std::string seed_label;
    std::vector<Eigen::MatrixXcd> vectors;
    std::vector<double> residuals; // norm left after projection, one per extension try

    int dimension() const { return static_cast<int>(vectors.size()); }
};

// Three-step iteration: apply the adjoint generator, project out the basis built
// so far (with one full reorthogonalization pass), normalize or stop. Stops when
// the residual drops below tol relative to the seed norm.
KrylovBasis arnoldi(const Superoperator& l_adjoint, const Eigen::MatrixXcd& seed,
                    const std::string& seed_label = "", double tol = 1e-10);

// Krylov bases seeded by every occupation projector: identity, n_L, n_R, n_L n_R
// for two qubits (all subsets in general).
std::vector<KrylovBasis> standard_krylov_bases(const SystemConfig& config,
                                               double tol = 1e-10);

// Union of Krylov subspaces, orthonormalized in seed order.
struct ObservableSpace {
    std::vector<Eigen::MatrixXcd> basis;
    std::vector<int> seed_budget; // vectors each input basis contributed

    int dimension() const { return static_cast<int>(basis.size()); }
    Eigen::MatrixXcd projector() const; // acts on vectorized operators
};

ObservableSpace assemble_observable_space(const std::vector<KrylovBasis>& bases);

enum class Membership { inside, outside, partial };

struct DirectionMembership {
    std::string label;
    Membership membership{Membership::outside};
    double overlap{0.0}; // squared-norm fraction captured by the space
};

// Project each of the 16 two-qubit state directions onto the observable space.
std::vector<DirectionMembership> classify_directions(const ObservableSpace& space);

// Eigenvalues equal within 1e-9 form one cluster; only one direction per cluster
// and seed remains reachable by transport moments.
struct DegeneracyCluster {
    std::vector<int> members;                // eigenvalue indices
    std::vector<Eigen::MatrixXcd> reachable; // per seed: sum_i <rho_i,n_P> sigma_i
};

struct SpectralReport {
    Eigen::VectorXcd eigenvalues;
    std::vector<Eigen::MatrixXcd> right_ops; // rho_i
    std::vector<Eigen::MatrixXcd> left_ops;  // sigma_i, biorthonormal duals
    double biorthogonality_residual{0.0};
    std::vector<std::string> seed_labels;
    Eigen::MatrixXcd overlaps; // (eigen index, seed) -> <rho_i, n_P>
    std::vector<DegeneracyCluster> clusters; // nontrivial clusters only
    double eigenvector_condition{0.0};
    double vandermonde_condition{0.0};
    bool near_defective{false};
    int observable_dimension{0}; // spectral prediction for dim of the summed space
    std::string status;          // "analyzed" or "detected, not analyzed"
};

// Observability analysis of the generator's spectrum: which eigen-directions the
// occupation seeds reach, how degeneracies reduce them, and how well-conditioned
// the moment inversion is. Near-defective spectra are flagged, not analyzed.
SpectralReport spectral_analysis(const Superoperator& l);

} // namespace tqst
