// lindblad.cpp — Lindbladian assembly, propagation backends, steady state

#include "tqst/lindblad.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <boost/numeric/odeint.hpp>
#include <unsupported/Eigen/MatrixFunctions>

namespace tqst {

namespace {

constexpr double kConditionLimit   = 1e8;  // eigenvector basis beyond this is unusable
constexpr double kSpectralGapFloor = 1e-10;
constexpr double kOdeTolerance     = 1e-12;

Eigen::MatrixXcd hamiltonian_commutator(const Eigen::MatrixXcd& h) {
    const int d = static_cast<int>(h.rows());
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(d, d);
    const std::complex<double> mi(0.0, -1.0);
    return mi * (super_sandwich(h, id) - super_sandwich(id, h));
}

} // namespace

Eigen::MatrixXcd dissipator_matrix(const Eigen::MatrixXcd& a) {
    const int d = static_cast<int>(a.rows());
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(d, d);
    const Eigen::MatrixXcd ada = a.adjoint() * a;
    return super_sandwich(a, a.adjoint())
         - 0.5 * (super_sandwich(ada, id) + super_sandwich(id, ada));
}

Eigen::MatrixXcd build_hamiltonian(const SystemConfig& config) {
    config.validate();
    if (config.n_qubits < 1 || config.n_qubits > 2)
        throw ConfigError("Hamiltonian assembly is validated for 1 or 2 qubits, got "
                          + std::to_string(config.n_qubits));

    const int d = config.dim();
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(d, d);
    for (int j = 0; j < config.n_qubits; ++j) {
        h += config.eps[j] * number_op(j, config.n_qubits);
        const double f = config.drive_amp(j);
        if (f != 0.0)
            h += f * (sigma_plus(j, config.n_qubits) + sigma_minus(j, config.n_qubits));
    }
    if (config.n_qubits == 2) {
        h += config.u_int * number_op(0, 2) * number_op(1, 2);
        const Eigen::MatrixXcd res = sigma_plus(0, 2) * sigma_minus(1, 2);
        const Eigen::MatrixXcd off = sigma_plus(0, 2) * sigma_plus(1, 2);
        h += config.g_res * (res + res.adjoint());
        h += config.g_off * (off + off.adjoint());
    }
    return h;
}

Superoperator build_lindbladian(const SystemConfig& config) {
    const Eigen::MatrixXcd h = build_hamiltonian(config);
    Eigen::MatrixXcd l = hamiltonian_commutator(h);
    for (int j = 0; j < config.n_qubits; ++j) {
        if (config.has_bath(j)) {
            const Rates r = config.rates(j);
            l += r.plus * dissipator_matrix(sigma_plus(j, config.n_qubits));
            l += r.minus * dissipator_matrix(sigma_minus(j, config.n_qubits));
        }
        const double gz = config.dephasing(j);
        if (gz != 0.0)
            l += 0.5 * gz * dissipator_matrix(sigma_z(j, config.n_qubits));
    }
    return Superoperator{std::move(l), SuperopTag::lindbladian, -1};
}

Superoperator adjoint(const Superoperator& l) {
    SuperopTag tag = l.tag;
    if (l.tag == SuperopTag::lindbladian)
        tag = SuperopTag::lindbladian_adjoint;
    else if (l.tag == SuperopTag::lindbladian_adjoint)
        tag = SuperopTag::lindbladian;
    return Superoperator{l.matrix.adjoint(), tag, l.qubit};
}

Propagator::Propagator(Superoperator l, PropagationMethod method)
    : l_(std::move(l)), method_(method) {
    if (method_ != PropagationMethod::eigendecomposition)
        return;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(l_.matrix);
    if (solver.info() != Eigen::Success)
        throw NumericError("eigendecomposition of the generator failed");
    eigvecs_ = solver.eigenvectors();
    eigvals_ = solver.eigenvalues();

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(eigvecs_);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    condition_ = (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();
    if (!std::isfinite(condition_) || condition_ > kConditionLimit) {
        // Near-defective spectrum; the eigenbasis would amplify round-off.
        method_ = PropagationMethod::scaling_squaring;
        eigvecs_.resize(0, 0);
        eigvals_.resize(0);
        return;
    }
    eigvecs_inv_ = eigvecs_.partialPivLu().inverse();
}

Eigen::VectorXcd Propagator::propagate_vec(const Eigen::VectorXcd& v0, double t) const {
    if (t < 0.0)
        throw NumericError("propagation time must be nonnegative, got " + std::to_string(t));
    if (v0.size() != l_.dim())
        throw NumericError("state dimension does not match the generator");
    if (t == 0.0)
        return v0;

    switch (method_) {
    case PropagationMethod::eigendecomposition: {
        const Eigen::VectorXcd phases =
            (eigvals_.array() * std::complex<double>(t, 0.0)).exp();
        return eigvecs_ * phases.asDiagonal() * (eigvecs_inv_ * v0);
    }
    case PropagationMethod::scaling_squaring: {
        const Eigen::MatrixXcd expm = (l_.matrix * t).exp();
        return expm * v0;
    }
    case PropagationMethod::adaptive_rk: {
        using State = std::vector<std::complex<double>>;
        State v(v0.data(), v0.data() + v0.size());
        const Eigen::MatrixXcd& m = l_.matrix;
        auto rhs = [&m](const State& x, State& dxdt, double) {
            const Eigen::Map<const Eigen::VectorXcd> xv(x.data(),
                                                        static_cast<Eigen::Index>(x.size()));
            Eigen::Map<Eigen::VectorXcd> dv(dxdt.data(),
                                            static_cast<Eigen::Index>(dxdt.size()));
            dv = m * xv;
        };
        namespace odeint = boost::numeric::odeint;
        using Stepper = odeint::runge_kutta_dopri5<State>;
        try {
            odeint::integrate_adaptive(
                odeint::make_controlled<Stepper>(kOdeTolerance, kOdeTolerance),
                rhs, v, 0.0, t, t / 100.0);
        } catch (const std::exception& e) {
            throw NumericError(std::string("adaptive integration failed: ") + e.what());
        }
        return Eigen::Map<const Eigen::VectorXcd>(v.data(),
                                                  static_cast<Eigen::Index>(v.size()));
    }
    }
    throw NumericError("unknown propagation method");
}

Eigen::MatrixXcd Propagator::propagate(const Eigen::MatrixXcd& rho0, double t) const {
    return devectorize(propagate_vec(vectorize(rho0), t));
}

DensityOperator Propagator::evolve(const DensityOperator& rho0, double t) const {
    Eigen::MatrixXcd rho = propagate(rho0.matrix(), t);
    rho = 0.5 * (rho + rho.adjoint()).eval(); // scrub round-off anti-Hermitian part
    try {
        return DensityOperator(rho);
    } catch (const NumericError& e) {
        throw NumericError("time evolution produced an invalid state at t = "
                           + std::to_string(t) + ": " + e.what());
    }
}

DensityOperator evolve(const Superoperator& l, const DensityOperator& rho0, double t) {
    return Propagator(l).evolve(rho0, t);
}

DensityOperator steady_state(const Superoperator& l) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(l.matrix);
    if (solver.info() != Eigen::Success)
        throw NumericError("eigendecomposition of the generator failed");

    const Eigen::VectorXcd vals = solver.eigenvalues();
    int min_idx = 0;
    int near_zero = 0;
    double second = std::numeric_limits<double>::infinity();
    for (int i = 0; i < vals.size(); ++i) {
        if (std::abs(vals(i)) <= kSpectralGapFloor)
            ++near_zero;
        if (std::abs(vals(i)) < std::abs(vals(min_idx)))
            min_idx = i;
    }
    for (int i = 0; i < vals.size(); ++i) {
        if (i != min_idx)
            second = std::min(second, std::abs(vals(i)));
    }
    if (near_zero != 1) {
        std::ostringstream msg;
        msg << "steady state is not unique: " << near_zero
            << " eigenvalues within " << kSpectralGapFloor
            << " of zero (second-smallest |lambda| = " << second << ")";
        throw NumericError(msg.str());
    }

    Eigen::MatrixXcd rho = devectorize(solver.eigenvectors().col(min_idx));
    rho = 0.5 * (rho + rho.adjoint()).eval();
    const double tr = rho.trace().real();
    if (std::abs(tr) < 1e-12)
        throw NumericError("steady-state candidate has vanishing trace");
    rho /= tr;
    try {
        return DensityOperator(rho);
    } catch (const NumericError& e) {
        throw NumericError(std::string("steady-state extraction failed: ") + e.what());
    }
}

Eigen::MatrixXd component_matrix(const Superoperator& l) {
    if (l.dim() != 16)
        throw ConfigError("component dynamics is defined for two-qubit generators");
    const std::vector<Eigen::MatrixXcd> dirs = state_directions();
    Eigen::MatrixXcd w(16, 16);
    for (int i = 0; i < 16; ++i)
        w.row(i) = vectorize(dirs[static_cast<std::size_t>(i)]).adjoint();
    const Eigen::MatrixXcd m = w * l.matrix * w.adjoint();
    const double residue = m.imag().cwiseAbs().maxCoeff();
    if (residue > 1e-12)
        throw NumericError("component dynamics has an imaginary residue of "
                           + std::to_string(residue)
                           + "; the generator does not preserve Hermiticity");
    return m.real();
}

} // namespace tqst
