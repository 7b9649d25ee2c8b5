// transport.cpp — Transport observables and their serialization

#include "tqst/transport.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

namespace tqst {

namespace {

constexpr double kImagTolerance = 1e-9;

void require_coupled(const SystemConfig& config, int j) {
    if (j < 0 || j >= config.n_qubits)
        throw ConfigError("bath index " + std::to_string(j) + " is out of range");
    if (!config.has_bath(j))
        throw ConfigError("qubit " + std::to_string(j) + " is not bath-coupled");
}

Eigen::MatrixXcd jump_combination(const SystemConfig& config, int j, double sign_minus) {
    const Rates r = config.rates(j);
    const Eigen::MatrixXcd sp = sigma_plus(j, config.n_qubits);
    const Eigen::MatrixXcd sm = sigma_minus(j, config.n_qubits);
    return r.plus * super_sandwich(sp, sm) + sign_minus * r.minus * super_sandwich(sm, sp);
}

// Product over P of the current superoperators, as one matrix.
Eigen::MatrixXcd current_product(const std::vector<int>& subset, const SystemConfig& config) {
    Eigen::MatrixXcd prod =
        Eigen::MatrixXcd::Identity(config.dim() * config.dim(), config.dim() * config.dim());
    for (int j : subset)
        prod = current_superoperator(config, j).matrix * prod;
    return prod;
}

Eigen::VectorXcd apply_powers(const Superoperator& l, const Eigen::MatrixXcd& rho, int k) {
    Eigen::VectorXcd v = vectorize(rho);
    for (int i = 0; i < k; ++i)
        v = l.matrix * v;
    return v;
}

double traced_real(const Eigen::VectorXcd& v, int dim) {
    std::complex<double> tr = 0.0;
    for (int i = 0; i < dim; ++i)
        tr += v(i * dim + i);
    if (std::abs(tr.imag()) > kImagTolerance)
        throw NumericError("transport moment has an imaginary part of "
                           + std::to_string(tr.imag())
                           + "; inputs are internally inconsistent");
    return tr.real();
}

void append_value(std::string& out, double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    out += buf;
}

} // namespace

Superoperator current_superoperator(const SystemConfig& config, int j) {
    require_coupled(config, j);
    return Superoperator{jump_combination(config, j, -1.0), SuperopTag::current, j};
}

Superoperator activity_superoperator(const SystemConfig& config, int j) {
    require_coupled(config, j);
    return Superoperator{jump_combination(config, j, +1.0), SuperopTag::activity, j};
}

double real_expectation(const Superoperator& s, const Eigen::MatrixXcd& rho) {
    return traced_real(s.matrix * vectorize(rho), static_cast<int>(rho.rows()));
}

double current_moment(const std::vector<int>& subset, int k, const Eigen::MatrixXcd& rho,
                      const Superoperator& l, const SystemConfig& config) {
    if (subset.empty())
        throw ConfigError("current moment needs a nonempty bath subset");
    if (k < 0)
        throw ConfigError("derivative order must be nonnegative");
    const Eigen::VectorXcd v = current_product(subset, config) * apply_powers(l, rho, k);
    return traced_real(v, config.dim());
}

double occupation_moment(const std::vector<int>& subset, int k, const Eigen::MatrixXcd& rho,
                         const Superoperator& l) {
    const int dim = static_cast<int>(rho.rows());
    int n_qubits = 0;
    while ((1 << n_qubits) < dim)
        ++n_qubits;
    const Eigen::MatrixXcd proj = occupation_projector(subset, n_qubits);
    const Eigen::MatrixXcd evolved = devectorize(apply_powers(l, rho, k));
    const std::complex<double> value = (proj * evolved).trace();
    if (std::abs(value.imag()) > kImagTolerance)
        throw NumericError("occupation moment has an imaginary part of "
                           + std::to_string(value.imag()));
    return value.real();
}

double occupation_moment_from_currents(const std::vector<int>& subset, int k,
                                       const Eigen::MatrixXcd& rho, const Superoperator& l,
                                       const SystemConfig& config) {
    // Expand prod_{j in P} (gamma_j^+ - 𝓘_j)/Gamma_j over sub-subsets P'. The
    // empty sub-subset contributes the trace moment, delta_{k,0}.
    const int n = static_cast<int>(subset.size());
    double total = 0.0;
    for (int mask = 0; mask < (1 << n); ++mask) {
        double weight = 1.0;
        std::vector<int> chosen;
        for (int b = 0; b < n; ++b) {
            const int j = subset[static_cast<std::size_t>(b)];
            const Rates r = config.rates(j);
            if (mask & (1 << b)) {
                weight *= -1.0 / r.total();
                chosen.push_back(j);
            } else {
                weight *= r.plus / r.total();
            }
        }
        if (chosen.empty())
            total += weight * (k == 0 ? 1.0 : 0.0);
        else
            total += weight * current_moment(chosen, k, rho, l, config);
    }
    return total;
}

double cross_correlation(const Eigen::MatrixXcd& rho, const Superoperator& l,
                         const SystemConfig& config) {
    const double i_lr = current_moment({0, 1}, 0, rho, l, config);
    const double i_l = current_moment({0}, 0, rho, l, config);
    const double i_r = current_moment({1}, 0, rho, l, config);
    return i_lr - i_l * i_r;
}

InternalCurrents internal_current(const DensityOperator& rho, const SystemConfig& config) {
    if (config.n_qubits != 2)
        throw ConfigError("internal currents are defined for two-qubit registers");
    return InternalCurrents{-2.0 * config.g_res * rho.alpha().imag(),
                            2.0 * config.g_off * rho.beta().imag()};
}

TwoTimeCorrelation two_time_correlation(const Propagator& prop, const SystemConfig& config,
                                        int j1, double t1, const DensityOperator& rho_t1,
                                        int j2, double t2, const DensityOperator& rho_t2) {
    // Order so the later time sits on the left; the definition is symmetric.
    if (t1 < t2)
        return two_time_correlation(prop, config, j2, t2, rho_t2, j1, t1, rho_t1);

    const Superoperator i1 = current_superoperator(config, j1);
    const Superoperator i2 = current_superoperator(config, j2);
    const double avg1 = real_expectation(i1, rho_t1.matrix());
    const double avg2 = real_expectation(i2, rho_t2.matrix());

    TwoTimeCorrelation result;
    if (t1 == t2) {
        // Both step functions contribute with weight 1/2 at coinciding times.
        const Eigen::MatrixXcd r12 = i1.apply(i2.apply(rho_t2.matrix()));
        const Eigen::MatrixXcd r21 = i2.apply(i1.apply(rho_t1.matrix()));
        result.regular = 0.5 * traced_real(vectorize(r12), config.dim())
                       + 0.5 * traced_real(vectorize(r21), config.dim())
                       - avg1 * avg2;
        if (j1 == j2) {
            result.has_delta = true;
            result.delta_coefficient =
                real_expectation(activity_superoperator(config, j1), rho_t1.matrix());
        }
        return result;
    }
    const Eigen::MatrixXcd propagated = prop.propagate(i2.apply(rho_t2.matrix()), t1 - t2);
    result.regular = real_expectation(i1, propagated) - avg1 * avg2;
    return result;
}

TransportSample measure_transport(double t, const DensityOperator& rho,
                                  const Superoperator& l, const SystemConfig& config) {
    TransportSample sample;
    sample.time = t;
    for (int k = 0; k < kDerivativeOrders; ++k) {
        sample.current_l[static_cast<std::size_t>(k)] =
            current_moment({0}, k, rho.matrix(), l, config);
        sample.current_r[static_cast<std::size_t>(k)] =
            current_moment({1}, k, rho.matrix(), l, config);
    }
    sample.s_lr = cross_correlation(rho.matrix(), l, config);
    sample.activity_l = real_expectation(activity_superoperator(config, 0), rho.matrix());
    sample.activity_r = real_expectation(activity_superoperator(config, 1), rho.matrix());
    const InternalCurrents internal = internal_current(rho, config);
    sample.i_s = internal.i_s;
    sample.p_s = internal.p_s;
    return sample;
}

TransportRecord simulate_transport(const SystemConfig& config, const DensityOperator& rho0,
                                   const std::vector<double>& times,
                                   PropagationMethod method) {
    const Superoperator l = build_lindbladian(config);
    const Propagator prop(l, method);
    TransportRecord record;
    record.samples.reserve(times.size());
    for (double t : times)
        record.samples.push_back(measure_transport(t, prop.evolve(rho0, t), l, config));
    return record;
}

std::string TransportRecord::to_csv() const {
    std::string out = "time,I_L,dI_L,d2I_L,d3I_L,I_R,dI_R,d2I_R,d3I_R,"
                      "S_LR,A_L,A_R,I_S,P_S\n";
    for (const TransportSample& s : samples) {
        append_value(out, s.time);
        for (double v : s.current_l) {
            out += ',';
            append_value(out, v);
        }
        for (double v : s.current_r) {
            out += ',';
            append_value(out, v);
        }
        for (double v : {s.s_lr, s.activity_l, s.activity_r, s.i_s, s.p_s}) {
            out += ',';
            append_value(out, v);
        }
        out += '\n';
    }
    return out;
}

} // namespace tqst
