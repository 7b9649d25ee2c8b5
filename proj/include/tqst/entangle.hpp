// entangle.hpp — Concurrence from states and from transport data
#pragma once

#include <string>
#include <vector>

#include "tqst/model.hpp"
#include "tqst/qst.hpp"
#include "tqst/transport.hpp"

namespace tqst {

enum class ConcurrenceMethod {
    x_state,            // two-branch formula for X-shaped density matrices
    wootters_full,      // spin-flip eigenvalue construction, any two-qubit state
    transport_special,  // current formula for the degenerate exchange-only case
    transport_general,  // two-branch transport formula with real parts resolved
};

enum class ConcurrenceBranch {
    none,       // the max is clamped at zero
    exchange,   // the single-excitation coherence branch won
    pair,       // the pair-coherence branch won
    spin_flip,  // full spin-flip construction (no branch structure)
};

struct ConcurrenceResult {
    double value{0.0};
    ConcurrenceBranch branch{ConcurrenceBranch::none};
    ConcurrenceMethod method{ConcurrenceMethod::x_state};
    bool partial{false};             // imaginary-part-only lower bound
    std::vector<std::string> notes;  // fallbacks and case assumptions
};

// X-state branch formula; rejects states with coherences outside the two
// anti-diagonal blocks and points the caller to wootters_full.
ConcurrenceResult concurrence_x_state(const DensityOperator& rho);

// Spin-flip construction: sorted square roots of the eigenvalues of
// rho (y x y) rho* (y x y). Valid for any two-qubit state.
ConcurrenceResult wootters_full(const DensityOperator& rho);

// Degenerate exchange-only case (no detuning, no pair coupling, ground-state
// start): concurrence from one lead's current, its derivative, and the
// cross-correlation alone.
ConcurrenceResult concurrence_transport_special(const TransportSample& sample,
                                                const Rates& rates_l,
                                                const Rates& rates_r, double g_res);

// General X-shaped evolution: both coherence branches with the real parts
// resolved through the second-derivative combinations. Falls back to an
// imaginary-part-only lower bound (flagged partial) when a generating energy
// is too small to divide by or second derivatives are missing.
ConcurrenceResult concurrence_transport_general(const ReconstructionInput& input);

// Convenience overload: gates on an X-shaped evolution (no drive), then
// measures the sample against the configuration's couplings.
ConcurrenceResult concurrence_transport_general(const TransportSample& sample,
                                                const SystemConfig& config);

} // namespace tqst
