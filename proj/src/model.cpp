#include "tqst/model.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace tqst {

namespace {

constexpr double kHermitianTol = 1e-12;
constexpr double kTraceTol = 1e-12;
constexpr double kEigenvalueFloor = -1e-10;

Eigen::MatrixXcd embed_single(const Eigen::Matrix2cd& op, int j, int n_qubits) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
    for (int q = 0; q < n_qubits; ++q) {
        const Eigen::MatrixXcd factor =
            (q == j) ? Eigen::MatrixXcd(op) : Eigen::MatrixXcd(Eigen::Matrix2cd::Identity());
        Eigen::MatrixXcd next(out.rows() * 2, out.cols() * 2);
        for (Eigen::Index r = 0; r < out.rows(); ++r)
            for (Eigen::Index c = 0; c < out.cols(); ++c)
                next.block(2 * r, 2 * c, 2, 2) = out(r, c) * factor;
        out = std::move(next);
    }
    return out;
}

void require_qubit_index(int j, int n_qubits) {
    if (j < 0 || j >= n_qubits)
        throw ConfigError("qubit index " + std::to_string(j) + " out of range for " +
                          std::to_string(n_qubits) + " qubits");
}

} // namespace

Rates bath_rates(const BathSpec& spec, double eps_j) {
    if (spec.override_rates) {
        const Rates& r = *spec.override_rates;
        if (r.plus < 0.0 || r.minus < 0.0)
            throw ConfigError("explicit bath rates must be nonnegative");
        return r;
    }
    if (spec.gamma_bare < 0.0)
        throw ConfigError("bare bath coupling must be nonnegative");
    if (spec.temperature <= 0.0)
        throw ConfigError("bath temperature must be positive");
    const double xarg = (eps_j - spec.chem_potential) / spec.temperature;
    if (spec.statistics == BathStatistics::fermionic) {
        const double plus = spec.gamma_bare / (1.0 + std::exp(xarg));
        // gamma^+ + gamma^- = gamma exactly, by construction.
        return Rates{plus, spec.gamma_bare - plus};
    }
    if (eps_j <= spec.chem_potential)
        throw ConfigError("divergent bosonic occupation: qubit energy must exceed "
                          "the bath chemical potential");
    const double plus = spec.gamma_bare / std::expm1(xarg);
    // gamma^- - gamma^+ = gamma exactly, by construction.
    return Rates{plus, plus + spec.gamma_bare};
}

bool SystemConfig::has_bath(int j) const {
    for (const BathSpec& b : baths)
        if (b.qubit == j) return true;
    return false;
}

Rates SystemConfig::rates(int j) const {
    require_qubit_index(j, n_qubits);
    for (const BathSpec& b : baths)
        if (b.qubit == j) return bath_rates(b, eps.at(j));
    throw ConfigError("qubit " + std::to_string(j) + " is not coupled to a bath");
}

double SystemConfig::Gamma_total() const {
    double sum = 0.0;
    for (const BathSpec& b : baths) sum += bath_rates(b, eps.at(b.qubit)).total();
    return sum;
}

double SystemConfig::Gamma_z_total() const {
    double sum = 0.0;
    for (double gz : gamma_z) sum += gz;
    return sum;
}

double SystemConfig::delta() const {
    if (n_qubits != 2) throw ConfigError("delta is defined for the two-qubit system");
    return eps.at(0) - eps.at(1);
}

double SystemConfig::pair_energy() const {
    if (n_qubits != 2) throw ConfigError("pair energy is defined for the two-qubit system");
    return eps.at(0) + eps.at(1) + u_int;
}

double SystemConfig::drive_amp(int j) const {
    require_qubit_index(j, n_qubits);
    return drive.empty() ? 0.0 : drive.at(j);
}

double SystemConfig::dephasing(int j) const {
    require_qubit_index(j, n_qubits);
    return gamma_z.empty() ? 0.0 : gamma_z.at(j);
}

void SystemConfig::validate() const {
    if (n_qubits < 1) throw ConfigError("n_qubits must be at least 1");
    if (static_cast<int>(eps.size()) != n_qubits)
        throw ConfigError("eps must list one energy per qubit");
    if (!drive.empty() && static_cast<int>(drive.size()) != n_qubits)
        throw ConfigError("drive must be empty or list one amplitude per qubit");
    if (!gamma_z.empty() && static_cast<int>(gamma_z.size()) != n_qubits)
        throw ConfigError("gamma_z must be empty or list one rate per qubit");
    for (double gz : gamma_z)
        if (gz < 0.0) throw ConfigError("gamma_z rates must be nonnegative");
    std::set<int> seen;
    for (const BathSpec& b : baths) {
        require_qubit_index(b.qubit, n_qubits);
        if (!seen.insert(b.qubit).second)
            throw ConfigError("qubit " + std::to_string(b.qubit) + " has more than one bath");
        bath_rates(b, eps.at(b.qubit)); // rate-level validation
    }
}

std::vector<std::string> validity_check(const SystemConfig& config) {
    std::vector<std::string> warnings;
    double gamma_max = 0.0;
    for (const BathSpec& b : config.baths) {
        const double gamma_scale =
            b.override_rates ? b.override_rates->total() : b.gamma_bare;
        gamma_max = std::max(gamma_max, gamma_scale);
        if (b.override_rates) continue; // no thermodynamic scales to compare against
        std::ostringstream tag;
        tag << "bath on qubit " << b.qubit;
        if (b.gamma_bare > 0.1 * b.temperature)
            warnings.push_back(tag.str() + ": coupling gamma is not small against temperature "
                                           "(ratio > 0.1); local weak-coupling form questionable");
        const double detuning = std::abs(config.eps.at(b.qubit) - b.chem_potential);
        if (b.gamma_bare > 0.1 * detuning)
            warnings.push_back(tag.str() + ": coupling gamma is not small against |eps - mu| "
                                           "(ratio > 0.1); local weak-coupling form questionable");
    }
    if (std::abs(config.g_res) > 2.0 * gamma_max || std::abs(config.g_off) > 2.0 * gamma_max)
        warnings.push_back("inter-qubit coupling exceeds the largest bath coupling by more than "
                           "a factor 2; local dissipator placement questionable");
    return warnings;
}

Eigen::VectorXcd vectorize(const Eigen::MatrixXcd& m) {
    if (m.rows() != m.cols()) throw NumericError("vectorize expects a square matrix");
    const Eigen::Index d = m.rows();
    Eigen::VectorXcd v(d * d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) v(i * d + j) = m(i, j);
    return v;
}

Eigen::MatrixXcd devectorize(const Eigen::VectorXcd& v) {
    const Eigen::Index d = static_cast<Eigen::Index>(std::llround(std::sqrt(double(v.size()))));
    if (d * d != v.size()) throw NumericError("devectorize expects a square-length vector");
    Eigen::MatrixXcd m(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = v(i * d + j);
    return m;
}

Eigen::MatrixXcd super_sandwich(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    const Eigen::Index n = a.rows(), m = b.rows();
    Eigen::MatrixXcd bt = b.transpose();
    Eigen::MatrixXcd out(n * m, n * m);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c)
            out.block(r * m, c * m, m, m) = a(r, c) * bt;
    return out;
}

std::complex<double> hs_inner(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return (a.adjoint() * b).trace();
}

double hs_norm(const Eigen::MatrixXcd& a) { return std::sqrt(std::abs(hs_inner(a, a))); }

Eigen::MatrixXcd sigma_plus(int j, int n_qubits) {
    require_qubit_index(j, n_qubits);
    Eigen::Matrix2cd sp = Eigen::Matrix2cd::Zero();
    sp(1, 0) = 1.0; // sigma_+ |0> = |1>
    return embed_single(sp, j, n_qubits);
}

Eigen::MatrixXcd sigma_minus(int j, int n_qubits) {
    require_qubit_index(j, n_qubits);
    Eigen::Matrix2cd sm = Eigen::Matrix2cd::Zero();
    sm(0, 1) = 1.0;
    return embed_single(sm, j, n_qubits);
}

Eigen::MatrixXcd sigma_z(int j, int n_qubits) {
    require_qubit_index(j, n_qubits);
    Eigen::Matrix2cd sz = Eigen::Matrix2cd::Zero();
    sz(0, 0) = -1.0; // n_j = (1 + sigma_z)/2
    sz(1, 1) = 1.0;
    return embed_single(sz, j, n_qubits);
}

Eigen::MatrixXcd number_op(int j, int n_qubits) {
    require_qubit_index(j, n_qubits);
    Eigen::Matrix2cd n = Eigen::Matrix2cd::Zero();
    n(1, 1) = 1.0;
    return embed_single(n, j, n_qubits);
}

Eigen::MatrixXcd occupation_projector(const std::vector<int>& subset, int n_qubits) {
    const int d = 1 << n_qubits;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(d, d);
    for (int j : subset) out = out * number_op(j, n_qubits);
    return out;
}

DensityOperator::DensityOperator(Eigen::MatrixXcd matrix) : m_(std::move(matrix)) {
    if (m_.rows() != m_.cols()) throw NumericError("density matrix must be square");
    const double herm = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > kHermitianTol) {
        std::ostringstream msg;
        msg << "density matrix is not Hermitian (residual " << herm << ")";
        throw NumericError(msg.str());
    }
    const double trace_dev = std::abs(m_.trace() - std::complex<double>(1.0, 0.0));
    if (trace_dev > kTraceTol) {
        std::ostringstream msg;
        msg << "density matrix trace deviates from 1 (residual " << trace_dev << ")";
        throw NumericError(msg.str());
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(0.5 * (m_ + m_.adjoint()));
    const double min_eig = solver.eigenvalues().minCoeff();
    if (min_eig < kEigenvalueFloor) {
        std::ostringstream msg;
        msg << "density matrix has negative eigenvalue " << min_eig;
        throw NumericError(msg.str());
    }
}

DensityOperator DensityOperator::ground_state(int n_qubits) { return basis_state(0, n_qubits); }

DensityOperator DensityOperator::maximally_mixed(int n_qubits) {
    const int d = 1 << n_qubits;
    return DensityOperator(Eigen::MatrixXcd::Identity(d, d) / double(d));
}

DensityOperator DensityOperator::basis_state(int index, int n_qubits) {
    const int d = 1 << n_qubits;
    if (index < 0 || index >= d) throw ConfigError("basis state index out of range");
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
    m(index, index) = 1.0;
    return DensityOperator(std::move(m));
}

namespace {

DensityOperator bell_state(int i, int j, double sign) {
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(4);
    psi(i) = 1.0 / std::sqrt(2.0);
    psi(j) = sign / std::sqrt(2.0);
    return DensityOperator(psi * psi.adjoint());
}

} // namespace

DensityOperator DensityOperator::bell_phi_plus() { return bell_state(0, 3, 1.0); }
DensityOperator DensityOperator::bell_phi_minus() { return bell_state(0, 3, -1.0); }
DensityOperator DensityOperator::bell_psi_plus() { return bell_state(1, 2, 1.0); }
DensityOperator DensityOperator::bell_psi_minus() { return bell_state(1, 2, -1.0); }

namespace {

// Coherence slots in component order: alpha, beta, x, y, v, z.
constexpr std::array<std::pair<int, int>, 6> kCoherencePairs = {
    {{1, 2}, {0, 3}, {0, 2}, {1, 3}, {0, 1}, {2, 3}}};

} // namespace

const std::vector<std::string>& state_component_labels() {
    static const std::vector<std::string> labels = {
        "r00", "r01", "r10", "r11", "Im_alpha", "Re_alpha", "Im_beta", "Re_beta",
        "Im_x", "Re_x", "Im_y", "Re_y", "Im_v", "Re_v", "Im_z", "Re_z"};
    return labels;
}

Eigen::VectorXd state_components(const Eigen::MatrixXcd& rho) {
    if (rho.rows() != 4 || rho.cols() != 4)
        throw NumericError("state components are defined for two-qubit matrices");
    Eigen::VectorXd c(16);
    for (int i = 0; i < 4; ++i) c(i) = rho(i, i).real();
    for (std::size_t p = 0; p < kCoherencePairs.size(); ++p) {
        const std::complex<double> val = rho(kCoherencePairs[p].first, kCoherencePairs[p].second);
        c(4 + 2 * p) = val.imag();
        c(5 + 2 * p) = val.real();
    }
    return c;
}

const std::vector<Eigen::MatrixXcd>& state_directions() {
    static const std::vector<Eigen::MatrixXcd> dirs = [] {
        std::vector<Eigen::MatrixXcd> out;
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        const std::complex<double> iu(0.0, 1.0);
        for (int i = 0; i < 4; ++i) {
            Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(4, 4);
            d(i, i) = 1.0;
            out.push_back(d);
        }
        for (const auto& [i, j] : kCoherencePairs) {
            Eigen::MatrixXcd im_dir = Eigen::MatrixXcd::Zero(4, 4);
            im_dir(i, j) = iu * inv_sqrt2;
            im_dir(j, i) = -iu * inv_sqrt2;
            out.push_back(im_dir);
            Eigen::MatrixXcd re_dir = Eigen::MatrixXcd::Zero(4, 4);
            re_dir(i, j) = inv_sqrt2;
            re_dir(j, i) = inv_sqrt2;
            out.push_back(re_dir);
        }
        return out;
    }();
    return dirs;
}

} // namespace tqst
