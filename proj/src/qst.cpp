// qst.cpp — Transport-data inversion into density-matrix elements

#include "tqst/qst.hpp"

#include <cmath>
#include <sstream>

namespace tqst {

namespace {

constexpr double kPopulationTol   = 1e-6; // allowed excursion outside [0, 1]
constexpr double kConservationTol = 1e-9; // unidentifiable combinations must vanish
constexpr double kVanishingRhsTol = 1e-8; // right-hand sides of degenerate inversions

void flag(std::vector<std::string>* warnings, const std::string& message) {
    if (warnings)
        warnings->push_back(message);
}

// Distance of a population outside [0, 1]; the residual attached to diagonal
// elements, zero when the value is admissible.
double range_residual(double r) {
    return std::max({0.0, -r, r - 1.0});
}

std::string describe(double value) {
    std::ostringstream s;
    s << value;
    return s.str();
}

} // namespace

double phi_combination(double i, double di, double gamma_total) {
    return di / gamma_total + i;
}

double chi_combination(double i, double gamma_plus, double gamma_total) {
    return (i - gamma_plus) / gamma_total;
}

ReconstructionInput ReconstructionInput::from_sample(const TransportSample& sample,
                                                     const SystemConfig& config) {
    if (config.n_qubits != 2)
        throw ConfigError("transport reconstruction is defined for two-qubit registers");
    for (int j = 0; j < config.n_qubits; ++j)
        if (config.drive_amp(j) != 0.0)
            throw ConfigError("the reconstruction identities assume an undriven "
                              "register; drive amplitudes must vanish");
    ReconstructionInput in;
    in.i_l = sample.current_l[0];
    in.di_l = sample.current_l[1];
    in.d2i_l = sample.current_l[2];
    in.i_r = sample.current_r[0];
    in.di_r = sample.current_r[1];
    in.d2i_r = sample.current_r[2];
    in.s_lr = sample.s_lr;
    in.has_first = true;
    in.has_second = true;
    in.rates_l = config.rates(0);
    in.rates_r = config.rates(1);
    in.g_res = config.g_res;
    in.g_off = config.g_off;
    in.delta = config.delta();
    in.pair_energy = config.pair_energy();
    in.gamma_tilde = config.Gamma_tilde();
    return in;
}

std::array<double, 4> reconstruct_populations(const ReconstructionInput& input,
                                              std::vector<std::string>* warnings) {
    const double gamma_l = input.rates_l.total();
    const double gamma_r = input.rates_r.total();
    const double n_l = (input.rates_l.plus - input.i_l) / gamma_l;
    const double n_r = (input.rates_r.plus - input.i_r) / gamma_r;
    const double corr = input.s_lr / (gamma_l * gamma_r);

    const double r11 = corr + n_l * n_r;
    const double r10 = -corr + n_l * (1.0 - n_r);
    const double r01 = -corr + n_r * (1.0 - n_l);
    const double r00 = 1.0 - r01 - r10 - r11; // trace closure

    const std::array<double, 4> populations{r00, r01, r10, r11};
    static const char* names[] = {"r00", "r01", "r10", "r11"};
    for (int i = 0; i < 4; ++i) {
        const double r = populations[static_cast<std::size_t>(i)];
        if (r < -kPopulationTol || r > 1.0 + kPopulationTol)
            flag(warnings, std::string("inconsistent transport data: population ")
                               + names[i] + " = " + describe(r));
    }
    return populations;
}

CoherencePair reconstruct_im_coherences(const ReconstructionInput& input) {
    if (!input.has_first)
        throw ConfigError("imaginary-coherence reconstruction needs first derivatives");
    const double phi_l = phi_combination(input.i_l, input.di_l, input.rates_l.total());
    const double phi_r = phi_combination(input.i_r, input.di_r, input.rates_r.total());

    CoherencePair out;
    if (input.g_res == 0.0) {
        out.alpha.status = ElementStatus::unidentifiable;
        out.alpha.residual = std::abs(phi_l - phi_r);
        if (std::abs(phi_l - phi_r) > kConservationTol)
            out.warnings.push_back("inconsistent data: resonant escape combination "
                                   + describe(phi_l - phi_r)
                                   + " should vanish without exchange coupling");
    } else {
        out.alpha = ReconstructedElement{-(phi_l - phi_r) / (4.0 * input.g_res),
                                         ElementStatus::reconstructed};
    }
    if (input.g_off == 0.0) {
        out.beta.status = ElementStatus::unidentifiable;
        out.beta.residual = std::abs(phi_l + phi_r);
        if (std::abs(phi_l + phi_r) > kConservationTol)
            out.warnings.push_back("inconsistent data: total escape combination "
                                   + describe(phi_l + phi_r)
                                   + " violates current conservation");
    } else {
        out.beta = ReconstructedElement{-(phi_l + phi_r) / (4.0 * input.g_off),
                                        ElementStatus::reconstructed};
    }
    return out;
}

CoherencePair reconstruct_re_coherences(const ReconstructionInput& input) {
    if (!input.has_first || !input.has_second)
        throw ConfigError("real-coherence reconstruction needs two derivative orders");
    if (!input.gamma_tilde)
        throw ConfigError("real-coherence reconstruction needs the total width");
    const double gt = *input.gamma_tilde;
    const double gamma_l = input.rates_l.total();
    const double gamma_r = input.rates_r.total();

    const double phi_l = phi_combination(input.i_l, input.di_l, gamma_l);
    const double phi_r = phi_combination(input.i_r, input.di_r, gamma_r);
    const double dphi_l = phi_combination(input.di_l, input.d2i_l, gamma_l);
    const double dphi_r = phi_combination(input.di_r, input.d2i_r, gamma_r);
    const double chi_l = chi_combination(input.i_l, input.rates_l.plus, gamma_l);
    const double chi_r = chi_combination(input.i_r, input.rates_r.plus, gamma_r);

    CoherencePair out;
    if (input.g_res == 0.0) {
        out.alpha.status = ElementStatus::not_generated;
    } else {
        const double rhs = (dphi_l - dphi_r) + 0.5 * gt * (phi_l - phi_r)
                         + 4.0 * input.g_res * input.g_res * (chi_l - chi_r);
        if (input.delta == 0.0) {
            out.alpha.status = ElementStatus::unidentifiable;
            out.alpha.residual = std::abs(rhs);
            if (std::abs(rhs) > kVanishingRhsTol)
                out.warnings.push_back("inconsistent data: degenerate register leaves "
                                       "a finite resonant residual " + describe(rhs));
        } else {
            out.alpha = ReconstructedElement{-rhs / (4.0 * input.g_res * input.delta),
                                             ElementStatus::reconstructed};
        }
    }
    if (input.g_off == 0.0) {
        out.beta.status = ElementStatus::not_generated;
    } else {
        const double rhs = (dphi_l + dphi_r) + 0.5 * gt * (phi_l + phi_r)
                         + 4.0 * input.g_off * input.g_off * (chi_l + chi_r + 1.0);
        if (input.pair_energy == 0.0) {
            out.beta.status = ElementStatus::unidentifiable;
            out.beta.residual = std::abs(rhs);
            if (std::abs(rhs) > kVanishingRhsTol)
                out.warnings.push_back("inconsistent data: vanishing pair energy leaves "
                                       "a finite pair residual " + describe(rhs));
        } else {
            out.beta =
                ReconstructedElement{-rhs / (4.0 * input.g_off * input.pair_energy),
                                     ElementStatus::reconstructed};
        }
    }
    return out;
}

ReconstructedState reconstruct_state(const ReconstructionInput& input) {
    ReconstructedState state;
    const std::array<double, 4> r = reconstruct_populations(input, &state.warnings);
    state.r00 = ReconstructedElement{r[0], ElementStatus::reconstructed, range_residual(r[0])};
    state.r01 = ReconstructedElement{r[1], ElementStatus::reconstructed, range_residual(r[1])};
    state.r10 = ReconstructedElement{r[2], ElementStatus::reconstructed, range_residual(r[2])};
    state.r11 = ReconstructedElement{r[3], ElementStatus::reconstructed, range_residual(r[3])};

    const CoherencePair im = reconstruct_im_coherences(input);
    state.im_alpha = im.alpha;
    state.im_beta = im.beta;
    state.warnings.insert(state.warnings.end(), im.warnings.begin(), im.warnings.end());

    const CoherencePair re = reconstruct_re_coherences(input);
    state.re_alpha = re.alpha;
    state.re_beta = re.beta;
    state.warnings.insert(state.warnings.end(), re.warnings.begin(), re.warnings.end());
    return state;
}

Eigen::MatrixXcd ReconstructedState::matrix() const {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(4, 4);
    m(0, 0) = r00.value;
    m(1, 1) = r01.value;
    m(2, 2) = r10.value;
    m(3, 3) = r11.value;
    m(1, 2) = std::complex<double>(re_alpha.value, im_alpha.value);
    m(2, 1) = std::conj(m(1, 2));
    m(0, 3) = std::complex<double>(re_beta.value, im_beta.value);
    m(3, 0) = std::conj(m(0, 3));
    return m;
}

bool ReconstructedState::physical() const {
    try {
        DensityOperator probe(matrix());
        return true;
    } catch (const NumericError&) {
        return false;
    }
}

ReconstructedState steady_state_qst(const SteadyInput& input) {
    ReconstructedState state;

    ReconstructionInput pop;
    pop.i_l = input.i_l;
    pop.i_r = input.i_r;
    pop.s_lr = input.s_lr;
    pop.rates_l = input.rates_l;
    pop.rates_r = input.rates_r;
    const std::array<double, 4> r = reconstruct_populations(pop, &state.warnings);
    state.r00 = ReconstructedElement{r[0], ElementStatus::reconstructed, range_residual(r[0])};
    state.r01 = ReconstructedElement{r[1], ElementStatus::reconstructed, range_residual(r[1])};
    state.r10 = ReconstructedElement{r[2], ElementStatus::reconstructed, range_residual(r[2])};
    state.r11 = ReconstructedElement{r[3], ElementStatus::reconstructed, range_residual(r[3])};

    const double scale = std::max({1.0, std::abs(input.i_l), std::abs(input.i_r)});
    if (std::abs(input.i_l + input.i_r) > kConservationTol * scale)
        state.warnings.push_back("inconsistent data: steady currents do not balance, "
                                 "sum = " + describe(input.i_l + input.i_r));
    const double i_ss = 0.5 * (input.i_l - input.i_r);

    // Without the pair coupling the pair coherence is never generated.
    state.im_beta.status = ElementStatus::not_generated;
    state.re_beta.status = ElementStatus::not_generated;

    if (input.g_res == 0.0) {
        state.im_alpha.status = ElementStatus::unidentifiable;
        state.im_alpha.residual = std::abs(i_ss);
        state.re_alpha.status = ElementStatus::not_generated;
        if (std::abs(i_ss) > kConservationTol)
            state.warnings.push_back("inconsistent data: steady current "
                                     + describe(i_ss) + " without exchange coupling");
        return state;
    }
    state.im_alpha =
        ReconstructedElement{-i_ss / (2.0 * input.g_res), ElementStatus::reconstructed};

    const double gamma_l = input.rates_l.total();
    const double gamma_r = input.rates_r.total();
    const double gamma = gamma_l + gamma_r;
    const double g2 = input.g_res * input.g_res;
    const double bias = input.rates_l.plus / gamma_l - input.rates_r.plus / gamma_r;

    double gt = 0.0;
    bool have_gt = false;
    if (input.gamma_tilde) {
        gt = *input.gamma_tilde;
        have_gt = true;
    } else if (std::abs(i_ss) > 1e-12) {
        // ((gt/2)^2 + g^2 Gamma gt/(Gamma_L Gamma_R) + delta^2) I_ss
        //   = g^2 gt (gamma_L^+/Gamma_L - gamma_R^+/Gamma_R), quadratic in gt.
        const double qa = 0.25 * i_ss;
        const double qb = g2 * gamma * i_ss / (gamma_l * gamma_r) - g2 * bias;
        const double qc = input.delta * input.delta * i_ss;
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc < 0.0)
            throw NumericError("parameters inconsistent with steady current: "
                               "no real solution for the total width");
        const double sq = std::sqrt(disc);
        const double floor = gamma - 1e-9 * std::max(1.0, gamma);
        std::vector<double> admissible;
        for (double root : {(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)})
            if (root >= floor)
                admissible.push_back(root);
        if (admissible.empty())
            throw NumericError("parameters inconsistent with steady current: "
                               "no admissible total width at or above the bare rates");
        if (admissible.size() == 2
            && std::abs(admissible[0] - admissible[1])
                   > 1e-9 * std::max({1.0, admissible[0], admissible[1]}))
            throw NumericError("total width is ambiguous: two admissible solutions "
                               + describe(admissible[0]) + " and "
                               + describe(admissible[1]));
        gt = admissible.front();
        have_gt = true;
        state.gamma_tilde_estimate = gt;
    }

    const bool rhs_known = have_gt || std::abs(i_ss) < 1e-12;
    const double rhs = 2.0 * g2 * bias
                     - (0.5 * gt + 2.0 * g2 * gamma / (gamma_l * gamma_r)) * i_ss;
    if (input.delta == 0.0) {
        state.re_alpha.status = ElementStatus::unidentifiable;
        state.re_alpha.residual = rhs_known ? std::abs(rhs) : 0.0;
        if (rhs_known && std::abs(rhs) > kVanishingRhsTol)
            state.warnings.push_back("inconsistent data: degenerate register leaves a "
                                     "finite steady residual " + describe(rhs));
    } else if (!rhs_known) {
        state.re_alpha.status = ElementStatus::unidentifiable;
        state.warnings.push_back("total width unknown and not recoverable from the "
                                 "steady current");
    } else {
        state.re_alpha = ReconstructedElement{rhs / (2.0 * input.g_res * input.delta),
                                              ElementStatus::reconstructed};
    }
    return state;
}

CompletenessReport completeness_report(const SystemConfig& config) {
    const ObservableSpace space =
        assemble_observable_space(standard_krylov_bases(config));
    CompletenessReport report;
    report.dimension = space.dimension();
    report.directions = classify_directions(space);
    return report;
}

} // namespace tqst
