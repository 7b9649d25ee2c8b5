// estimation.hpp — Dynamics-parameter recovery from current-derivative probes
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tqst/lindblad.hpp"
#include "tqst/model.hpp"
#include "tqst/transport.hpp"

namespace tqst {

// Affine closure of the occupation-moment hierarchy: the smallest order m with
// p_{P,m}(t) = offset + sum_{k<m} c_k p_{P,k}(t) along every trajectory, found
// from the adjoint-generator iterates of the projector seed.
struct ClosureCoefficients {
    int order{0};                 // closure order m
    double offset{0.0};           // constant (identity-component) term
    std::vector<double> c;        // coefficients of p_{P,0} .. p_{P,m-1}
    double residual{0.0};         // relative operator-space fit residual
    bool ill_conditioned{false};  // iterate basis nearly rank-deficient
};

ClosureCoefficients krylov_closure_coefficients(const Superoperator& l,
                                                const std::vector<int>& subset,
                                                double tol = 1e-10);

// Declared estimation case; fixes which couplings are assumed absent and how
// many probe times a well-posed problem statement needs.
enum class EstimationCase {
    general,        // nothing assumed about the couplings
    degenerate,     // detuning and pair energy assumed zero
    exchange_only,  // pair coupling assumed zero
};

int minimum_probe_count(EstimationCase declared_case);

struct EstimationResult {
    std::optional<double> g_res;        // exchange coupling, reported nonnegative
    std::optional<double> g_off;        // pair coupling, reported nonnegative
    std::optional<double> delta;        // detuning magnitude
    std::optional<double> pair_energy;  // pair-energy magnitude
    std::optional<double> gamma_tilde;  // total coherence-decay width
    double residual{0.0};               // rms residual of the defining equations
    double condition{0.0};              // design-matrix condition number
    bool family_a_active{false};        // difference (exchange) equations used
    bool family_b_active{false};        // sum (pair) equations used
    std::vector<std::string> notes;     // dropped families, case assumptions
};

// Special case detuning = 0, pair coupling = 0: one linear equation per probe
// in the unknowns (width/2, 2 g^2). Needs at least two probes.
EstimationResult estimate_g_res_gamma_tilde(const std::vector<TransportSample>& probes,
                                            const Rates& rates_l,
                                            const Rates& rates_r);

// General case: lifted linear solve over both equation families followed by a
// Gauss-Newton polish of the structured parameters. Needs at least five probe
// times, or four when the total width is supplied.
EstimationResult estimate_general(const std::vector<TransportSample>& probes,
                                  const Rates& rates_l, const Rates& rates_r,
                                  std::optional<double> gamma_tilde = std::nullopt);

// A full problem statement: probes, known rates, declared case and optionally
// the known total width. solve() dispatches to the matching estimator.
struct EstimationProblem {
    std::vector<TransportSample> probes;
    Rates rates_l;
    Rates rates_r;
    EstimationCase declared_case{EstimationCase::general};
    std::optional<double> gamma_tilde;  // known total width, if any

    void validate() const;
    EstimationResult solve() const;
};

// Log-spaced schedule over [0.1, 5] / gamma_total, endpoints included.
std::vector<double> suggested_probe_times(double gamma_total, int count);

// Residuals of the two defining equation families at every probe, evaluated at
// the fitted parameter values. Reports attach one row per probe; a family the
// fit never used evaluates with its coupling at zero.
struct EquationResiduals {
    std::vector<double> family_a; // difference-combination equation per probe
    std::vector<double> family_b; // sum-combination equation per probe
};

EquationResiduals equation_residuals(const EstimationResult& fit,
                                     const std::vector<TransportSample>& probes,
                                     const Rates& rates_l, const Rates& rates_r);

} // namespace tqst
