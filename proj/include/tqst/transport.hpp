// transport.hpp — Currents, activities, correlation functions, transport records

#pragma once

#include <array>
#include <string>
#include <vector>

#include "tqst/lindblad.hpp"

namespace tqst {

// I_j and its first three analytic time derivatives are kept per sample; this is
// enough for full two-qubit state reconstruction and parameter estimation.
inline constexpr int kDerivativeOrders = 4;

// Jump superoperators of bath j: current 𝓘_j = γ_j^+ σ_+ • σ_- − γ_j^- σ_- • σ_+,
// activity 𝓐_j with the + sign. Expectations give the particle current into the
// system and the direction-blind jump rate.
Superoperator current_superoperator(const SystemConfig& config, int j);
Superoperator activity_superoperator(const SystemConfig& config, int j);

// Tr[S rho], asserted real: imaginary residue above 1e-9 is an internal error,
// anything smaller is discarded.
double real_expectation(const Superoperator& s, const Eigen::MatrixXcd& rho);

// k-th time derivative of the product current moment, Tr[prod_{j in P} 𝓘_j L^k rho].
double current_moment(const std::vector<int>& subset, int k, const Eigen::MatrixXcd& rho,
                      const Superoperator& l, const SystemConfig& config);

// Occupation moment p_{P,k} = Tr[n_P L^k rho], measured on the state directly.
double occupation_moment(const std::vector<int>& subset, int k, const Eigen::MatrixXcd& rho,
                         const Superoperator& l);

// The same moment recovered from current moments alone through the
// inclusion-exclusion expansion over sub-subsets; the empty subset contributes
// the trace moment delta_{k,0}.
double occupation_moment_from_currents(const std::vector<int>& subset, int k,
                                       const Eigen::MatrixXcd& rho, const Superoperator& l,
                                       const SystemConfig& config);

// Instantaneous cross-correlation S_LR = I_LR − I_L I_R.
double cross_correlation(const Eigen::MatrixXcd& rho, const Superoperator& l,
                         const SystemConfig& config);

// Exchange currents inside the register: I_S = −2 g_res Im(alpha) through the
// resonant coupling, P_S = 2 g_off Im(beta) through the pair coupling.
struct InternalCurrents {
    double i_s{0.0};
    double p_s{0.0};
};
InternalCurrents internal_current(const DensityOperator& rho, const SystemConfig& config);

// Current-current correlation S_{j1 j2}(t1, t2). The equal-time auto-correlation
// carries a delta(t1-t2) singularity; its weight (the activity) is reported as a
// coefficient next to the regular part, never folded into a number.
struct TwoTimeCorrelation {
    double regular{0.0};
    double delta_coefficient{0.0};
    bool has_delta{false};
};

TwoTimeCorrelation two_time_correlation(const Propagator& prop, const SystemConfig& config,
                                        int j1, double t1, const DensityOperator& rho_t1,
                                        int j2, double t2, const DensityOperator& rho_t2);

// Every transport observable at one instant.
struct TransportSample {
    double time{0.0};
    std::array<double, kDerivativeOrders> current_l{}; // I_L, dI_L, d2I_L, d3I_L
    std::array<double, kDerivativeOrders> current_r{};
    double s_lr{0.0};
    double activity_l{0.0};
    double activity_r{0.0};
    double i_s{0.0};
    double p_s{0.0};
};

struct TransportRecord {
    std::vector<TransportSample> samples;

    // Fixed column order, 17 significant digits per value.
    std::string to_csv() const;
};

TransportSample measure_transport(double t, const DensityOperator& rho,
                                  const Superoperator& l, const SystemConfig& config);

// Evolve rho0 over the time grid and record the transport observables at each node.
TransportRecord simulate_transport(const SystemConfig& config, const DensityOperator& rho0,
                                   const std::vector<double>& times,
                                   PropagationMethod method =
                                       PropagationMethod::eigendecomposition);

} // namespace tqst
