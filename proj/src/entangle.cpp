// entangle.cpp — Branch formulas, spin-flip oracle, transport closures

#include "tqst/entangle.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace tqst {

namespace {

constexpr double kXShapeTol = 1e-9;            // allowed leakage outside the X blocks
constexpr double kProductFloor = -1e-9;        // tolerated negative population product
constexpr double kSingularEnergyFactor = 1e-6; // below this x Gamma, drop the real part

std::string describe(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

double checked_sqrt_product(double a, double b) {
    const double product = a * b;
    if (product < kProductFloor)
        throw NumericError("inconsistent transport data: population product is "
                           "negative (" + describe(product) + ")");
    return std::sqrt(std::max(product, 0.0));
}

void require_positive_rates(const Rates& rates_l, const Rates& rates_r) {
    if (!(rates_l.total() > 0.0) || !(rates_r.total() > 0.0))
        throw ConfigError("the transport concurrence requires strictly positive "
                          "total rates on both leads");
}

} // namespace

ConcurrenceResult concurrence_x_state(const DensityOperator& rho) {
    if (rho.dim() != 4)
        throw ConfigError("concurrence is defined for two-qubit states");
    const double leak = std::max({std::abs(rho.v()), std::abs(rho.x()),
                                  std::abs(rho.y()), std::abs(rho.z())});
    if (leak > kXShapeTol)
        throw ConfigError("density matrix is not X-shaped (off-block coherence "
                          + describe(leak) + "); use wootters_full instead");

    const double arg_exchange =
        std::abs(rho.alpha()) - std::sqrt(std::max(rho.r00() * rho.r11(), 0.0));
    const double arg_pair =
        std::abs(rho.beta()) - std::sqrt(std::max(rho.r01() * rho.r10(), 0.0));

    ConcurrenceResult result;
    result.method = ConcurrenceMethod::x_state;
    result.value = 2.0 * std::max({0.0, arg_exchange, arg_pair});
    if (result.value > 0.0)
        result.branch = (arg_exchange >= arg_pair) ? ConcurrenceBranch::exchange
                                                   : ConcurrenceBranch::pair;
    return result;
}

ConcurrenceResult wootters_full(const DensityOperator& rho) {
    if (rho.dim() != 4)
        throw ConfigError("concurrence is defined for two-qubit states");
    Eigen::MatrixXcd yy = Eigen::MatrixXcd::Zero(4, 4);
    yy(0, 3) = -1.0;
    yy(1, 2) = 1.0;
    yy(2, 1) = 1.0;
    yy(3, 0) = -1.0;

    const Eigen::MatrixXcd& m = rho.matrix();
    const Eigen::MatrixXcd flipped = m * yy * m.conjugate() * yy;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(flipped, false);
    if (solver.info() != Eigen::Success)
        throw NumericError("spin-flip eigenvalue computation failed to converge");

    std::array<double, 4> lambda{};
    for (int i = 0; i < 4; ++i)
        lambda[static_cast<std::size_t>(i)] =
            std::sqrt(std::max(solver.eigenvalues()(i).real(), 0.0));
    std::sort(lambda.begin(), lambda.end(), std::greater<double>());

    ConcurrenceResult result;
    result.method = ConcurrenceMethod::wootters_full;
    result.value = std::max(0.0, lambda[0] - lambda[1] - lambda[2] - lambda[3]);
    result.branch = (result.value > 0.0) ? ConcurrenceBranch::spin_flip
                                         : ConcurrenceBranch::none;
    return result;
}

ConcurrenceResult concurrence_transport_special(const TransportSample& sample,
                                                const Rates& rates_l,
                                                const Rates& rates_r, double g_res) {
    if (g_res == 0.0)
        throw ConfigError("the exchange coupling must be nonzero for the "
                          "transport concurrence");
    require_positive_rates(rates_l, rates_r);

    const double gl = rates_l.total();
    const double gr = rates_r.total();
    const double phi_l = phi_combination(sample.current_l[0], sample.current_l[1], gl);
    const double phi_r = phi_combination(sample.current_r[0], sample.current_r[1], gr);
    if (std::abs(phi_l + phi_r)
        > 1e-8 * std::max(1.0, std::abs(phi_l) + std::abs(phi_r)))
        throw ConfigError("case assumption violated: the lead escape combinations "
                          "do not cancel (phi_L + phi_R = " + describe(phi_l + phi_r)
                          + ")");

    ReconstructionInput in;
    in.i_l = sample.current_l[0];
    in.i_r = sample.current_r[0];
    in.s_lr = sample.s_lr;
    in.rates_l = rates_l;
    in.rates_r = rates_r;
    const std::array<double, 4> r = reconstruct_populations(in);

    ConcurrenceResult result;
    result.method = ConcurrenceMethod::transport_special;
    const double arg = std::abs(phi_l / g_res) - 2.0 * checked_sqrt_product(r[3], r[0]);
    result.value = std::max(0.0, arg);
    result.branch = (result.value > 0.0) ? ConcurrenceBranch::exchange
                                         : ConcurrenceBranch::none;
    return result;
}

ConcurrenceResult concurrence_transport_general(const ReconstructionInput& input) {
    if (!input.has_first)
        throw ConfigError("the transport concurrence needs first current derivatives");
    require_positive_rates(input.rates_l, input.rates_r);

    const double gl = input.rates_l.total();
    const double gr = input.rates_r.total();
    const double gamma_bare = gl + gr;
    const std::array<double, 4> r = reconstruct_populations(input);

    const double phi_l = phi_combination(input.i_l, input.di_l, gl);
    const double phi_r = phi_combination(input.i_r, input.di_r, gr);
    const double chi_l = chi_combination(input.i_l, input.rates_l.plus, gl);
    const double chi_r = chi_combination(input.i_r, input.rates_r.plus, gr);
    const bool full_available = input.has_second && input.gamma_tilde.has_value();

    ConcurrenceResult result;
    result.method = ConcurrenceMethod::transport_general;
    if (!full_available)
        result.notes.push_back("second derivatives or the total width unavailable; "
                               "real coherence parts dropped");

    double best = 0.0;
    if (input.g_res != 0.0) {
        const double dphi = phi_l - phi_r;
        double coherence_sq = dphi * dphi; // (4 g Im)^2 so far
        bool dropped_real = !full_available;
        if (full_available) {
            if (std::abs(input.delta) < kSingularEnergyFactor * gamma_bare) {
                dropped_real = true;
                result.notes.push_back("detuning too small to resolve the exchange "
                                       "real part; lower bound used");
            } else {
                const double dphi_dot =
                    phi_combination(input.di_l, input.d2i_l, gl)
                    - phi_combination(input.di_r, input.d2i_r, gr);
                const double d_alpha = dphi_dot + 0.5 * *input.gamma_tilde * dphi
                                     + 4.0 * input.g_res * input.g_res
                                           * (chi_l - chi_r);
                const double ratio = d_alpha / input.delta;
                coherence_sq += ratio * ratio;
            }
        }
        const double arg = std::sqrt(coherence_sq) / (2.0 * std::abs(input.g_res))
                         - 2.0 * checked_sqrt_product(r[3], r[0]);
        result.partial = result.partial || dropped_real;
        if (arg > best) {
            best = arg;
            result.branch = ConcurrenceBranch::exchange;
        }
    }
    if (input.g_off != 0.0) {
        const double sphi = phi_l + phi_r;
        double coherence_sq = sphi * sphi;
        bool dropped_real = !full_available;
        if (full_available) {
            if (std::abs(input.pair_energy) < kSingularEnergyFactor * gamma_bare) {
                dropped_real = true;
                result.notes.push_back("pair energy too small to resolve the pair "
                                       "real part; lower bound used");
            } else {
                const double sphi_dot =
                    phi_combination(input.di_l, input.d2i_l, gl)
                    + phi_combination(input.di_r, input.d2i_r, gr);
                const double d_beta = sphi_dot + 0.5 * *input.gamma_tilde * sphi
                                    + 4.0 * input.g_off * input.g_off
                                          * (chi_l + chi_r + 1.0);
                const double ratio = d_beta / input.pair_energy;
                coherence_sq += ratio * ratio;
            }
        }
        const double arg = std::sqrt(coherence_sq) / (2.0 * std::abs(input.g_off))
                         - 2.0 * checked_sqrt_product(r[1], r[2]);
        result.partial = result.partial || dropped_real;
        if (arg > best) {
            best = arg;
            result.branch = ConcurrenceBranch::pair;
        }
    }

    result.value = best;
    if (result.value <= 0.0) {
        result.value = 0.0;
        result.branch = ConcurrenceBranch::none;
    }
    return result;
}

ConcurrenceResult concurrence_transport_general(const TransportSample& sample,
                                                const SystemConfig& config) {
    for (int j = 0; j < config.n_qubits; ++j)
        if (config.drive_amp(j) != 0.0)
            throw ConfigError("the transport concurrence needs an X-shaped "
                              "evolution; a drive generates coherences outside "
                              "the X blocks");
    return concurrence_transport_general(ReconstructionInput::from_sample(sample, config));
}

} // namespace tqst
