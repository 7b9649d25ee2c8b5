// test_estimation.cpp — Closure coefficients and parameter-recovery loops

#include <doctest.h>

#include <cmath>
#include <vector>

#include "test_helpers.hpp"
#include "tqst/estimation.hpp"
#include "tqst/qst.hpp"

using namespace tqst;
using tqst::testing::make_rng;
using tqst::testing::random_density_matrix;

namespace {

SystemConfig generic_config() {
    SystemConfig config;
    config.n_qubits = 2;
    config.eps = {1.3, 0.9};
    config.u_int = 0.25;
    config.g_res = 0.06;
    config.g_off = 0.03;
    config.gamma_z = {0.01, 0.015};
    config.baths.push_back(BathSpec{0, BathStatistics::fermionic, 0.0, 1.0, 0.0,
                                    Rates{0.08, 0.12}});
    config.baths.push_back(BathSpec{1, BathStatistics::fermionic, 0.0, 1.0, 0.0,
                                    Rates{0.05, 0.11}});
    return config;
}

SystemConfig degenerate_config() {
    SystemConfig config = generic_config();
    config.eps = {1.1, 1.1}; // no detuning
    config.g_off = 0.0;      // no pair coupling
    return config;
}

std::vector<TransportSample> make_probes(const SystemConfig& config,
                                         const DensityOperator& rho0,
                                         const std::vector<double>& times) {
    const Superoperator l = build_lindbladian(config);
    const Propagator prop(l);
    std::vector<TransportSample> probes;
    for (double t : times)
        probes.push_back(measure_transport(t, prop.evolve(rho0, t), l, config));
    return probes;
}

double closure_residual(const ClosureCoefficients& closure,
                        const std::vector<int>& subset, const Eigen::MatrixXcd& rho,
                        const Superoperator& l) {
    double value = occupation_moment(subset, closure.order, rho, l) - closure.offset;
    for (int k = 0; k < closure.order; ++k)
        value -= closure.c[static_cast<std::size_t>(k)]
               * occupation_moment(subset, k, rho, l);
    return std::abs(value);
}

} // namespace

TEST_SUITE("estimation") {

TEST_CASE("single-qubit closure is the rate equation") {
    SystemConfig config;
    config.n_qubits = 1;
    config.eps = {0.7};
    config.baths.push_back(BathSpec{0, BathStatistics::fermionic, 0.0, 1.0, 0.0,
                                    Rates{0.08, 0.12}});
    const Superoperator l = build_lindbladian(config);
    const ClosureCoefficients closure = krylov_closure_coefficients(l, {0});

    CHECK(closure.order == 1);
    CHECK(closure.offset == doctest::Approx(0.08).epsilon(1e-12));
    REQUIRE(closure.c.size() == 1);
    CHECK(closure.c[0] == doctest::Approx(-0.20).epsilon(1e-12));
    CHECK(closure.residual < 1e-12);
    CHECK(!closure.ill_conditioned);
}

TEST_CASE("closures annihilate occupation moments along trajectories") {
    std::mt19937_64 rng = make_rng();
    const SystemConfig config = generic_config();
    const Superoperator l = build_lindbladian(config);
    const Propagator prop(l);
    const DensityOperator rho0(random_density_matrix(rng));

    for (const std::vector<int>& subset :
         {std::vector<int>{0}, std::vector<int>{1}, std::vector<int>{0, 1}}) {
        const ClosureCoefficients closure = krylov_closure_coefficients(l, subset);
        CHECK(closure.order >= 1);
        CHECK(closure.order <= 16);
        CHECK(closure.residual < 1e-10);
        for (int i = 0; i < 100; ++i) {
            const double t = 0.05 * std::pow(1.06, i); // covers ~0.05 to ~16
            const Eigen::MatrixXcd rho = prop.evolve(rho0, t).matrix();
            CHECK(closure_residual(closure, subset, rho, l) < 1e-8);
        }
    }
}

TEST_CASE("closure balances exactly at the steady state") {
    const SystemConfig config = generic_config();
    const Superoperator l = build_lindbladian(config);
    const Eigen::MatrixXcd ss = steady_state(l).matrix();
    for (const std::vector<int>& subset : {std::vector<int>{0}, std::vector<int>{0, 1}}) {
        const ClosureCoefficients closure = krylov_closure_coefficients(l, subset);
        CHECK(closure_residual(closure, subset, ss, l) < 1e-10);
    }
}

TEST_CASE("closure search is deterministic") {
    const SystemConfig config = generic_config();
    const Superoperator l = build_lindbladian(config);
    const ClosureCoefficients a = krylov_closure_coefficients(l, {0});
    const ClosureCoefficients b = krylov_closure_coefficients(l, {0});
    CHECK(a.order == b.order);
    CHECK(a.offset == b.offset);
    for (std::size_t k = 0; k < a.c.size(); ++k)
        CHECK(a.c[k] == b.c[k]);
}

TEST_CASE("suggested probe schedule is log-spaced over the transport window") {
    const std::vector<double> times = suggested_probe_times(0.4, 5);
    REQUIRE(times.size() == 5);
    CHECK(times.front() == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(times.back() == doctest::Approx(12.5).epsilon(1e-12));
    for (std::size_t i = 0; i + 2 < times.size(); ++i)
        CHECK(times[i + 1] / times[i]
              == doctest::Approx(times[i + 2] / times[i + 1]).epsilon(1e-12));

    CHECK_THROWS_AS((void)suggested_probe_times(0.0, 3), ConfigError);
    CHECK_THROWS_AS((void)suggested_probe_times(0.4, 1), ConfigError);
}

TEST_CASE("degenerate-case estimator recovers coupling and width") {
    const SystemConfig config = degenerate_config();
    const std::vector<TransportSample> probes =
        make_probes(config, DensityOperator::ground_state(2), {0.8, 2.2});
    const EstimationResult result =
        estimate_g_res_gamma_tilde(probes, config.rates(0), config.rates(1));

    REQUIRE(result.g_res.has_value());
    REQUIRE(result.gamma_tilde.has_value());
    CHECK(std::abs(*result.g_res - config.g_res) < 1e-6 * config.g_res);
    CHECK(std::abs(*result.gamma_tilde - config.Gamma_tilde())
          < 1e-6 * config.Gamma_tilde());
    CHECK(result.condition > 1.0);

    SUBCASE("overdetermined probes agree and leave no residual") {
        const std::vector<TransportSample> more =
            make_probes(config, DensityOperator::ground_state(2),
                        {0.5, 0.8, 1.4, 2.2, 3.5});
        const EstimationResult wide =
            estimate_g_res_gamma_tilde(more, config.rates(0), config.rates(1));
        CHECK(wide.residual < 1e-9);
        CHECK(std::abs(*wide.g_res - *result.g_res) < 1e-9);
        CHECK(std::abs(*wide.gamma_tilde - *result.gamma_tilde) < 1e-9);
    }
}

TEST_CASE("repeated steady-state probes make a singular design") {
    const SystemConfig config = degenerate_config();
    const Superoperator l = build_lindbladian(config);
    const DensityOperator ss = steady_state(l);
    const TransportSample sample = measure_transport(0.0, ss, l, config);
    const std::vector<TransportSample> probes{sample, sample};
    CHECK_THROWS_WITH_AS(
        (void)estimate_g_res_gamma_tilde(probes, config.rates(0), config.rates(1)),
        doctest::Contains("singular"), NumericError);
}

TEST_CASE("fabricated probes violating the case assumption are rejected") {
    const Rates rates_l{0.08, 0.12};
    const Rates rates_r{0.05, 0.15};
    TransportSample p1;
    p1.current_l = {0.2, 0.16, -0.232, 0.0};  // phi = 1, dphi = -1
    p1.current_r = {0.17, 0.0, 0.0, 0.0};     // matches chi_L, so dchi = 0
    TransportSample p2;
    p2.current_l = {0.1, -0.02, 0.104, 0.0};  // phi = 0, dphi = 0.5
    p2.current_r = {-0.13, 0.0, 0.0, 0.0};    // dchi = 1
    CHECK_THROWS_WITH_AS(
        (void)estimate_g_res_gamma_tilde({p1, p2}, rates_l, rates_r),
        doctest::Contains("case assumption violated"), NumericError);
}

TEST_CASE("general estimator closes the loop on all parameters") {
    std::mt19937_64 rng = make_rng();
    const SystemConfig config = generic_config();
    const std::vector<double> times = suggested_probe_times(config.Gamma_total(), 5);
    const std::vector<TransportSample> probes =
        make_probes(config, DensityOperator(random_density_matrix(rng)), times);
    const EstimationResult result =
        estimate_general(probes, config.rates(0), config.rates(1));

    CHECK(result.family_a_active);
    CHECK(result.family_b_active);
    REQUIRE(result.g_res.has_value());
    REQUIRE(result.g_off.has_value());
    REQUIRE(result.delta.has_value());
    REQUIRE(result.pair_energy.has_value());
    REQUIRE(result.gamma_tilde.has_value());
    CHECK(std::abs(*result.g_res - config.g_res) < 1e-5 * config.g_res);
    CHECK(std::abs(*result.g_off - config.g_off) < 1e-5 * config.g_off);
    CHECK(std::abs(*result.delta - std::abs(config.delta()))
          < 1e-5 * std::abs(config.delta()));
    CHECK(std::abs(*result.pair_energy - std::abs(config.pair_energy()))
          < 1e-5 * std::abs(config.pair_energy()));
    CHECK(std::abs(*result.gamma_tilde - config.Gamma_tilde())
          < 1e-5 * config.Gamma_tilde());
    CHECK(result.residual < 1e-8);
    CHECK(std::isfinite(result.condition));

    SUBCASE("estimates are invariant under a uniform time shift") {
        std::vector<TransportSample> shifted = probes;
        for (TransportSample& p : shifted)
            p.time += 7.0;
        const EstimationResult again =
            estimate_general(shifted, config.rates(0), config.rates(1));
        CHECK(*again.g_res == *result.g_res);
        CHECK(*again.gamma_tilde == *result.gamma_tilde);
    }

    SUBCASE("adding probe times never worsens the residual") {
        std::mt19937_64 rng2 = make_rng();
        const DensityOperator rho0(random_density_matrix(rng2));
        std::vector<double> more_times = times;
        more_times.insert(more_times.end(), {0.9, 1.7, 4.1});
        const EstimationResult base =
            estimate_general(make_probes(config, rho0, times),
                             config.rates(0), config.rates(1));
        const EstimationResult wide =
            estimate_general(make_probes(config, rho0, more_times),
                             config.rates(0), config.rates(1));
        CHECK(wide.residual <= base.residual + 1e-12);
    }
}

TEST_CASE("general estimator degrades gracefully without pair coupling") {
    std::mt19937_64 rng = make_rng();
    SystemConfig config = generic_config();
    config.g_off = 0.0;
    const std::vector<double> times = suggested_probe_times(config.Gamma_total(), 5);
    const std::vector<TransportSample> probes =
        make_probes(config, DensityOperator(random_density_matrix(rng)), times);
    const EstimationResult result =
        estimate_general(probes, config.rates(0), config.rates(1));

    CHECK(!result.family_b_active);
    REQUIRE(result.g_off.has_value());
    CHECK(*result.g_off < 1e-7);
    CHECK(!result.pair_energy.has_value());
    REQUIRE(!result.notes.empty());
    CHECK(std::abs(*result.g_res - config.g_res) < 1e-5 * config.g_res);
    CHECK(std::abs(*result.delta - std::abs(config.delta()))
          < 1e-5 * std::abs(config.delta()));
    CHECK(std::abs(*result.gamma_tilde - config.Gamma_tilde())
          < 1e-5 * config.Gamma_tilde());
}

TEST_CASE("known width reduces the probe requirement to four") {
    std::mt19937_64 rng = make_rng();
    const SystemConfig config = generic_config();
    const std::vector<TransportSample> probes =
        make_probes(config, DensityOperator(random_density_matrix(rng)),
                    {0.4, 1.1, 2.6, 5.0});
    const EstimationResult result = estimate_general(
        probes, config.rates(0), config.rates(1), config.Gamma_tilde());

    CHECK(std::abs(*result.g_res - config.g_res) < 1e-5 * config.g_res);
    CHECK(std::abs(*result.g_off - config.g_off) < 1e-5 * config.g_off);
    CHECK(std::abs(*result.delta - std::abs(config.delta()))
          < 1e-5 * std::abs(config.delta()));
    CHECK(std::abs(*result.pair_energy - std::abs(config.pair_energy()))
          < 1e-5 * std::abs(config.pair_energy()));
    CHECK(*result.gamma_tilde == config.Gamma_tilde());
}

TEST_CASE("probe-count minimums are enforced") {
    std::mt19937_64 rng = make_rng();
    const SystemConfig config = generic_config();
    const DensityOperator rho0(random_density_matrix(rng));
    const std::vector<TransportSample> four =
        make_probes(config, rho0, {0.4, 1.1, 2.6, 5.0});
    const std::vector<TransportSample> three =
        make_probes(config, rho0, {0.4, 1.1, 2.6});

    CHECK_THROWS_AS((void)estimate_general(four, config.rates(0), config.rates(1)),
                    ConfigError);
    CHECK_THROWS_AS((void)estimate_general(three, config.rates(0), config.rates(1),
                                           config.Gamma_tilde()),
                    ConfigError);
    CHECK_THROWS_AS((void)estimate_g_res_gamma_tilde({four[0]}, config.rates(0),
                                                     config.rates(1)),
                    ConfigError);

    EstimationProblem problem;
    problem.probes = four;
    problem.rates_l = config.rates(0);
    problem.rates_r = config.rates(1);
    problem.declared_case = EstimationCase::general;
    CHECK_THROWS_AS((void)problem.solve(), ConfigError);

    problem.probes = {four[0], four[1]};
    problem.declared_case = EstimationCase::degenerate;
    CHECK_THROWS_AS((void)problem.solve(), ConfigError);

    problem.probes = three;
    problem.declared_case = EstimationCase::exchange_only;
    CHECK_THROWS_WITH_AS((void)problem.solve(), doctest::Contains("4"), ConfigError);
}

TEST_CASE("declared exchange-only problem solves with three probes and known width") {
    std::mt19937_64 rng = make_rng();
    SystemConfig config = generic_config();
    config.g_off = 0.0;
    EstimationProblem problem;
    problem.probes = make_probes(config, DensityOperator(random_density_matrix(rng)),
                                 {0.6, 1.8, 3.9});
    problem.rates_l = config.rates(0);
    problem.rates_r = config.rates(1);
    problem.declared_case = EstimationCase::exchange_only;
    problem.gamma_tilde = config.Gamma_tilde();

    const EstimationResult result = problem.solve();
    CHECK(std::abs(*result.g_res - config.g_res) < 1e-6 * config.g_res);
    CHECK(std::abs(*result.delta - std::abs(config.delta()))
          < 1e-6 * std::abs(config.delta()));
    CHECK(*result.g_off == 0.0);
    REQUIRE(!result.notes.empty());
    CHECK(result.notes.front().find("assumed zero") != std::string::npos);
}

TEST_CASE("problem dispatch matches the direct estimator calls") {
    const SystemConfig config = degenerate_config();
    EstimationProblem problem;
    problem.probes = make_probes(config, DensityOperator::ground_state(2),
                                 {0.5, 1.3, 2.9});
    problem.rates_l = config.rates(0);
    problem.rates_r = config.rates(1);
    problem.declared_case = EstimationCase::degenerate;

    const EstimationResult via_problem = problem.solve();
    const EstimationResult direct = estimate_g_res_gamma_tilde(
        problem.probes, problem.rates_l, problem.rates_r);
    CHECK(*via_problem.g_res == *direct.g_res);
    CHECK(*via_problem.gamma_tilde == *direct.gamma_tilde);
}

} // TEST_SUITE
