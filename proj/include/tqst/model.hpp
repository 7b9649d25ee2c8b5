// model.hpp — Domain types, Fock-basis conventions, vectorization, and config validation

#pragma once

#include <array>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tqst {

// Error taxonomy; the CLI maps these to exit codes (config 1, numeric 2, I/O 3).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class BathStatistics { fermionic, bosonic };

// Resolved upward/downward jump rates of one bath.
struct Rates {
    double plus{0.0};  // gamma_j^+
    double minus{0.0}; // gamma_j^-

    double total() const { return plus + minus; }
};

// Bath attached to one qubit. Rates either follow from (gamma_bare, temperature,
// chem_potential) through the occupation function at the qubit energy, or are
// pinned directly with the explicit override pair.
struct BathSpec {
    int qubit{0};
    BathStatistics statistics{BathStatistics::fermionic};
    double gamma_bare{0.0};
    double temperature{1.0};
    double chem_potential{0.0};
    std::optional<Rates> override_rates;
};

// gamma^+ = gamma n(eps), gamma^- = gamma (1 -+ n(eps)), with n the Fermi (upper
// sign) or Bose occupation at energy eps. Fermionic rates sum to gamma exactly;
// bosonic rates differ by gamma exactly and require eps > mu.
Rates bath_rates(const BathSpec& spec, double eps_j);

// Physical parameters of the register. Energies, rates, and couplings share one
// energy unit with hbar = k_B = 1; times are in inverse units.
struct SystemConfig {
    int n_qubits{2};
    std::vector<double> eps;     // bare energy eps_j per qubit
    double u_int{0.0};           // on-site interaction U
    double g_res{0.0};           // resonant exchange coupling
    double g_off{0.0};           // off-resonant pair coupling
    std::vector<double> drive;   // local drive amplitude f_j (empty = none)
    std::vector<double> gamma_z; // pure-dephasing rate per qubit (empty = none)
    std::vector<BathSpec> baths; // one entry per bath-coupled qubit

    int dim() const { return 1 << n_qubits; }
    bool has_bath(int j) const;
    Rates rates(int j) const; // resolved gamma_j^{+,-}; throws if j is not coupled
    double Gamma(int j) const { return rates(j).total(); }
    double Gamma_total() const;   // sum of Gamma_j over coupled qubits
    double Gamma_z_total() const; // sum of gamma_j^z
    double Gamma_tilde() const { return Gamma_total() + 2.0 * Gamma_z_total(); }
    double delta() const;       // eps_L - eps_R (two-qubit)
    double pair_energy() const; // E = eps_L + eps_R + U (two-qubit)
    double drive_amp(int j) const;
    double dephasing(int j) const;

    void validate() const; // throws ConfigError on structural violations
};

// Advisory regime checks (weak coupling, local-equation validity). Warnings only;
// the identities downstream are exact for any parameter values.
std::vector<std::string> validity_check(const SystemConfig& config);

// Row-wise vectorization: element (i,j) of a d x d matrix lands at index i*d + j.
Eigen::VectorXcd vectorize(const Eigen::MatrixXcd& m);
Eigen::MatrixXcd devectorize(const Eigen::VectorXcd& v);

// Superoperator of the sandwich map rho -> A rho B: kron(A, B^T) under row-wise
// vectorization.
Eigen::MatrixXcd super_sandwich(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

// Hilbert-Schmidt inner product Tr[A^dag B]; equals the conjugated dot product of
// the vectorized operands.
std::complex<double> hs_inner(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);
double hs_norm(const Eigen::MatrixXcd& a);

// Single-qubit operators embedded at position j of the register. Qubit 0 is the
// leftmost tensor factor; the Fock basis is ordered |00>,|01>,|10>,|11> for N=2.
Eigen::MatrixXcd sigma_plus(int j, int n_qubits);
Eigen::MatrixXcd sigma_minus(int j, int n_qubits);
Eigen::MatrixXcd sigma_z(int j, int n_qubits);
Eigen::MatrixXcd number_op(int j, int n_qubits);

// Occupation projector n_P = prod_{j in P} n_j; the empty subset gives the identity.
Eigen::MatrixXcd occupation_projector(const std::vector<int>& subset, int n_qubits);

// Density operator with validated invariants: Hermitian within 1e-12, unit trace
// within 1e-12, minimum eigenvalue >= -1e-10 (integrator round-off allowance).
class DensityOperator {
public:
    explicit DensityOperator(Eigen::MatrixXcd matrix);

    const Eigen::MatrixXcd& matrix() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }

    // Named two-qubit elements in the basis {|00>,|01>,|10>,|11>}.
    double r00() const { return m_(0, 0).real(); }
    double r01() const { return m_(1, 1).real(); }
    double r10() const { return m_(2, 2).real(); }
    double r11() const { return m_(3, 3).real(); }
    std::complex<double> alpha() const { return m_(1, 2); } // <01|rho|10>
    std::complex<double> beta() const { return m_(0, 3); }  // <00|rho|11>
    std::complex<double> v() const { return m_(0, 1); }     // <00|rho|01>
    std::complex<double> x() const { return m_(0, 2); }     // <00|rho|10>
    std::complex<double> y() const { return m_(1, 3); }     // <01|rho|11>
    std::complex<double> z() const { return m_(2, 3); }     // <10|rho|11>

    static DensityOperator ground_state(int n_qubits);
    static DensityOperator maximally_mixed(int n_qubits);
    static DensityOperator basis_state(int index, int n_qubits);
    static DensityOperator bell_phi_plus();  // (|00> + |11>)/sqrt(2)
    static DensityOperator bell_phi_minus(); // (|00> - |11>)/sqrt(2)
    static DensityOperator bell_psi_plus();  // (|01> + |10>)/sqrt(2)
    static DensityOperator bell_psi_minus(); // (|01> - |10>)/sqrt(2)

private:
    Eigen::MatrixXcd m_;
};

// The 16 real components of a two-qubit density matrix, ordered
// (r00, r01, r10, r11, Im a, Re a, Im b, Re b, Im x, Re x, Im y, Re y,
//  Im v, Re v, Im z, Re z). state_components returns the literal element values;
// state_directions returns the matching orthonormal Hermitian direction operators.
const std::vector<std::string>& state_component_labels();
Eigen::VectorXd state_components(const Eigen::MatrixXcd& rho);
const std::vector<Eigen::MatrixXcd>& state_directions();

} // namespace tqst
