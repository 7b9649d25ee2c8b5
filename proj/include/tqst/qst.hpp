// qst.hpp — State reconstruction from transport data

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tqst/krylov.hpp"
#include "tqst/transport.hpp"

namespace tqst {

// Escape combination phi_j = dI_j/Gamma_j + I_j and occupation reading
// chi_j = (I_j - gamma_j^+)/Gamma_j = -n_j. Every reconstruction and estimation
// formula is written in these.
double phi_combination(double i, double di, double gamma_total);
double chi_combination(double i, double gamma_plus, double gamma_total);

// Transport measurements at one instant plus the dynamics parameters assumed known.
struct ReconstructionInput {
    double i_l{0.0}, i_r{0.0};   // currents
    double di_l{0.0}, di_r{0.0}; // first derivatives
    double d2i_l{0.0}, d2i_r{0.0};
    double s_lr{0.0};
    bool has_first{false};  // first derivatives present
    bool has_second{false}; // second derivatives present

    Rates rates_l, rates_r;
    double g_res{0.0}, g_off{0.0};
    double delta{0.0};       // eps_L - eps_R
    double pair_energy{0.0}; // eps_L + eps_R + U
    std::optional<double> gamma_tilde;

    static ReconstructionInput from_sample(const TransportSample& sample,
                                           const SystemConfig& config);
};

enum class ElementStatus {
    reconstructed,  // value recovered from the data
    unidentifiable, // the inverting coefficient vanishes; data only constrains consistency
    not_generated,  // the dynamics never populates this element from transport's view
};

struct ReconstructedElement {
    double value{0.0};
    ElementStatus status{ElementStatus::reconstructed};
    double residual{0.0}; // consistency-check residual attached to this element
};

struct ReconstructedState {
    ReconstructedElement r00, r01, r10, r11;
    ReconstructedElement im_alpha, re_alpha;
    ReconstructedElement im_beta, re_beta;
    std::vector<std::string> warnings;
    std::optional<double> gamma_tilde_estimate; // steady-state route only

    // Raw assembly: reconstructed and not-generated entries as numbers, zeros for
    // the v,x,y,z sector the transport data never sees.
    Eigen::MatrixXcd matrix() const;
    bool physical() const; // does the assembly pass density-operator validation
};

// Population inversion from currents and the cross-correlation:
// n_j = (gamma_j^+ - I_j)/Gamma_j, r11 = S_LR/(Gamma_L Gamma_R) + n_L n_R,
// r01/r10 from the mixed products, r00 from trace closure. Out-of-range results
// are flagged, never clipped.
std::array<double, 4> reconstruct_populations(const ReconstructionInput& input,
                                              std::vector<std::string>* warnings = nullptr);

struct CoherencePair {
    ReconstructedElement alpha, beta;
    std::vector<std::string> warnings;
};

// Imaginary parts: -4 g_res Im(alpha) = phi_L - phi_R, -4 g_off Im(beta) =
// phi_L + phi_R. A vanishing coupling makes the element unidentifiable and turns
// the corresponding combination into a conservation check.
CoherencePair reconstruct_im_coherences(const ReconstructionInput& input);

// Real parts: -4 g_res delta Re(alpha) = dphi_L - dphi_R
//             + (Gamma_tilde/2)(phi_L - phi_R) + 4 g_res^2 (chi_L - chi_R),
// and the plus-combination with 4 g_off^2 (chi_L + chi_R + 1) for Re(beta),
// divided by 4 g_off E. Vanishing detuning or pair energy makes the part
// unidentifiable; a vanishing coupling means it was never generated.
CoherencePair reconstruct_re_coherences(const ReconstructionInput& input);

// All stages on one input (derivatives required).
ReconstructedState reconstruct_state(const ReconstructionInput& input);

// Steady-state shortcut: time derivatives vanish, so currents alone carry the
// state. Only meaningful without the pair coupling, where I_L = -I_R =: I_ss.
struct SteadyInput {
    double i_l{0.0}, i_r{0.0}, s_lr{0.0};
    Rates rates_l, rates_r;
    double g_res{0.0};
    double delta{0.0};
    std::optional<double> gamma_tilde; // estimated from the current when absent
};

ReconstructedState steady_state_qst(const SteadyInput& input);

// Which density-matrix directions transport can reach for this configuration.
struct CompletenessReport {
    int dimension{0};
    std::vector<DirectionMembership> directions;
};

CompletenessReport completeness_report(const SystemConfig& config);

} // namespace tqst
