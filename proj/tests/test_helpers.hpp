// test_helpers.hpp — Shared fixtures: seeded RNG, random configs and states

#pragma once

#include <random>
#include <vector>

#include "tqst/model.hpp"

namespace tqst::testing {

// Deterministic engine; every test that samples randomness derives from a fixed seed.
inline std::mt19937_64 make_rng(std::uint64_t seed = 0x5eed51a7ull) {
    return std::mt19937_64(seed);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Random density matrix from a Ginibre draw (full rank, strictly positive).
inline Eigen::MatrixXcd random_density_matrix(std::mt19937_64& rng, int dim = 4) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXcd a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a(i, j) = std::complex<double>(normal(rng), normal(rng));
    Eigen::MatrixXcd m = a * a.adjoint();
    return m / m.trace();
}

struct RandomConfigOptions {
    bool zero_g_off{false};
    bool zero_delta{false};
    bool zero_pair_energy{false};
    bool with_dephasing{true};
    bool with_drive{false};
};

// Random two-qubit config with explicit rate overrides, spanning generic
// parameter ranges used across the suites.
inline SystemConfig random_config(std::mt19937_64& rng, const RandomConfigOptions& opt = {}) {
    SystemConfig config;
    config.n_qubits = 2;
    const double eps_l = uniform(rng, 0.5, 2.0);
    const double eps_r = opt.zero_delta ? eps_l : uniform(rng, 0.5, 2.0);
    config.eps = {eps_l, eps_r};
    config.u_int = opt.zero_pair_energy ? -(eps_l + eps_r) : uniform(rng, 0.0, 1.0);
    config.g_res = uniform(rng, 0.02, 0.1);
    config.g_off = opt.zero_g_off ? 0.0 : uniform(rng, 0.02, 0.1);
    if (opt.with_drive) config.drive = {uniform(rng, 0.02, 0.08), uniform(rng, 0.02, 0.08)};
    if (opt.with_dephasing) config.gamma_z = {uniform(rng, 0.0, 0.05), uniform(rng, 0.0, 0.05)};
    for (int j = 0; j < 2; ++j) {
        BathSpec bath;
        bath.qubit = j;
        bath.override_rates = Rates{uniform(rng, 0.01, 0.2), uniform(rng, 0.01, 0.2)};
        config.baths.push_back(bath);
    }
    return config;
}

} // namespace tqst::testing
