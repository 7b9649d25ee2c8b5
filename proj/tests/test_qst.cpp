// test_qst.cpp — Reconstruction formulas, statuses, steady-state route

#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "test_helpers.hpp"
#include "tqst/qst.hpp"

using namespace tqst;
using tqst::testing::make_rng;
using tqst::testing::random_config;
using tqst::testing::random_density_matrix;
using tqst::testing::RandomConfigOptions;

namespace {

SystemConfig base_config() {
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
                                    Rates{0.05, 0.15}});
    return config;
}

struct Pipeline {
    SystemConfig config;
    Superoperator l;
    Propagator prop;

    explicit Pipeline(const SystemConfig& c)
        : config(c), l(build_lindbladian(c)), prop(l) {}

    DensityOperator state(const DensityOperator& rho0, double t) const {
        return prop.evolve(rho0, t);
    }
    ReconstructionInput input(const DensityOperator& rho0, double t) const {
        return ReconstructionInput::from_sample(
            measure_transport(t, state(rho0, t), l, config), config);
    }
};

const std::vector<double>& sample_times() {
    static const std::vector<double> times{0.0, 0.3, 0.7, 1.2, 1.9, 2.8, 4.0,
                                           6.5, 9.0, 14.0};
    return times;
}

} // namespace

TEST_SUITE("qst") {

TEST_CASE("occupation projections read the state directly") {
    std::mt19937_64 rng = make_rng();
    const SystemConfig config = base_config();
    const Superoperator l = build_lindbladian(config);

    CHECK(occupation_moment({0}, 0, DensityOperator::basis_state(2, 2).matrix(), l)
          == doctest::Approx(1.0).epsilon(1e-14));

    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::MatrixXcd rho = random_density_matrix(rng);
        CHECK(std::abs(occupation_moment({0, 1}, 0, rho, l) - rho(3, 3).real()) < 1e-14);
    }

    // First derivative against central differences along a trajectory.
    const Propagator prop(l);
    const DensityOperator rho0(random_density_matrix(rng));
    const double h = 5e-4;
    for (double t : {0.5, 2.0}) {
        const double fd = (occupation_moment({0}, 0, prop.evolve(rho0, t + h).matrix(), l)
                           - occupation_moment({0}, 0, prop.evolve(rho0, t - h).matrix(), l))
                          / (2.0 * h);
        const double analytic =
            occupation_moment({0}, 1, prop.evolve(rho0, t).matrix(), l);
        CHECK(std::abs(fd - analytic) < 1e-6);
    }
}

TEST_CASE("population inversion from worked transport values") {
    const SystemConfig config = base_config();
    ReconstructionInput in;
    in.rates_l = config.rates(0);
    in.rates_r = config.rates(1);
    in.i_l = in.rates_l.plus; // vacuum draws the bare injection rates
    in.i_r = in.rates_r.plus;
    in.s_lr = 0.0;

    std::vector<std::string> warnings;
    const std::array<double, 4> r = reconstruct_populations(in, &warnings);
    CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(r[1]) < 1e-14);
    CHECK(std::abs(r[2]) < 1e-14);
    CHECK(std::abs(r[3]) < 1e-14);
    CHECK(warnings.empty());
}

TEST_CASE("population round trip over random states and configurations") {
    std::mt19937_64 rng = make_rng();
    for (int cfg = 0; cfg < 20; ++cfg) {
        const SystemConfig config = random_config(rng);
        const Superoperator l = build_lindbladian(config);
        for (int s = 0; s < 25; ++s) {
            const Eigen::MatrixXcd rho = (s == 0)
                ? Eigen::MatrixXcd(0.25 * Eigen::MatrixXcd::Identity(4, 4))
                : random_density_matrix(rng);
            const TransportSample sample =
                measure_transport(0.0, DensityOperator(rho), l, config);
            const std::array<double, 4> r = reconstruct_populations(
                ReconstructionInput::from_sample(sample, config));
            CHECK(std::abs(r[0] - rho(0, 0).real()) < 1e-10);
            CHECK(std::abs(r[1] - rho(1, 1).real()) < 1e-10);
            CHECK(std::abs(r[2] - rho(2, 2).real()) < 1e-10);
            CHECK(std::abs(r[3] - rho(3, 3).real()) < 1e-10);
        }
    }
}

TEST_CASE("out-of-range populations are flagged, not clipped") {
    const SystemConfig config = base_config();
    ReconstructionInput in;
    in.rates_l = config.rates(0);
    in.rates_r = config.rates(1);
    in.i_l = in.rates_l.plus + 2.0 * in.rates_l.total(); // implies n_L = -2
    in.i_r = in.rates_r.plus;
    in.s_lr = 0.0;

    std::vector<std::string> warnings;
    const std::array<double, 4> r = reconstruct_populations(in, &warnings);
    CHECK(r[2] < -1e-6);
    REQUIRE(!warnings.empty());
    CHECK(warnings.front().find("inconsistent transport data") != std::string::npos);
}

TEST_CASE("population inversion ignores coherences") {
    std::mt19937_64 rng = make_rng();
    const Pipeline pipe(base_config());
    const Eigen::MatrixXcd rho = random_density_matrix(rng);
    const Eigen::MatrixXcd diag = rho.diagonal().asDiagonal();

    const auto from = [&](const Eigen::MatrixXcd& m) {
        return reconstruct_populations(ReconstructionInput::from_sample(
            measure_transport(0.0, DensityOperator(m), pipe.l, pipe.config), pipe.config));
    };
    const std::array<double, 4> a = from(rho);
    const std::array<double, 4> b = from(diag);
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)])
              < 1e-12);
}

TEST_CASE("imaginary coherences round-trip along trajectories") {
    std::mt19937_64 rng = make_rng();
    const Pipeline pipe(base_config());
    const DensityOperator rho0(random_density_matrix(rng));
    for (double t : sample_times()) {
        const DensityOperator rho = pipe.state(rho0, t);
        const CoherencePair im = reconstruct_im_coherences(pipe.input(rho0, t));
        REQUIRE(im.alpha.status == ElementStatus::reconstructed);
        REQUIRE(im.beta.status == ElementStatus::reconstructed);
        CHECK(std::abs(im.alpha.value - rho.alpha().imag()) < 1e-9);
        CHECK(std::abs(im.beta.value - rho.beta().imag()) < 1e-9);
        CHECK(im.warnings.empty());
    }
}

TEST_CASE("real-valued states give vanishing imaginary coherences") {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(4, 4);
    m(0, 0) = 0.4; m(1, 1) = 0.3; m(2, 2) = 0.2; m(3, 3) = 0.1;
    m(1, 2) = 0.05; m(2, 1) = 0.05;
    m(0, 3) = 0.03; m(3, 0) = 0.03;
    const Pipeline pipe(base_config());
    const CoherencePair im = reconstruct_im_coherences(ReconstructionInput::from_sample(
        measure_transport(0.0, DensityOperator(m), pipe.l, pipe.config), pipe.config));
    CHECK(std::abs(im.alpha.value) < 1e-12);
    CHECK(std::abs(im.beta.value) < 1e-12);
}

TEST_CASE("vanishing couplings leave imaginary parts unidentifiable but consistent") {
    std::mt19937_64 rng = make_rng();

    SystemConfig no_res = base_config();
    no_res.g_res = 0.0;
    const Pipeline pipe_res(no_res);
    const DensityOperator rho0(random_density_matrix(rng));
    for (double t : {0.5, 3.0}) {
        const CoherencePair im = reconstruct_im_coherences(pipe_res.input(rho0, t));
        CHECK(im.alpha.status == ElementStatus::unidentifiable);
        CHECK(im.beta.status == ElementStatus::reconstructed);
        CHECK(im.warnings.empty()); // the resonant combination vanishes by itself
    }

    SystemConfig no_off = base_config();
    no_off.g_off = 0.0;
    const Pipeline pipe_off(no_off);
    for (double t : {0.5, 3.0}) {
        const CoherencePair im = reconstruct_im_coherences(pipe_off.input(rho0, t));
        CHECK(im.beta.status == ElementStatus::unidentifiable);
        CHECK(im.alpha.status == ElementStatus::reconstructed);
        CHECK(im.warnings.empty()); // current conservation holds along the trajectory
    }

    // Corrupted data: a finite combination where conservation demands zero.
    ReconstructionInput bad = pipe_off.input(rho0, 0.5);
    bad.di_l += 0.01 * bad.rates_l.total();
    const CoherencePair im = reconstruct_im_coherences(bad);
    REQUIRE(!im.warnings.empty());
    CHECK(im.warnings.front().find("inconsistent data") != std::string::npos);
}

TEST_CASE("real coherences round-trip along trajectories") {
    std::mt19937_64 rng = make_rng();
    const Pipeline pipe(base_config());
    const DensityOperator rho0(random_density_matrix(rng));
    for (double t : sample_times()) {
        const DensityOperator rho = pipe.state(rho0, t);
        const CoherencePair re = reconstruct_re_coherences(pipe.input(rho0, t));
        REQUIRE(re.alpha.status == ElementStatus::reconstructed);
        REQUIRE(re.beta.status == ElementStatus::reconstructed);
        CHECK(std::abs(re.alpha.value - rho.alpha().real()) < 1e-8);
        CHECK(std::abs(re.beta.value - rho.beta().real()) < 1e-8);
        CHECK(re.warnings.empty());
    }
}

TEST_CASE("degenerate register: real parts unidentifiable, inversion source vanishes") {
    std::mt19937_64 rng = make_rng();
    SystemConfig config = base_config();
    config.eps = {1.1, 1.1};
    config.u_int = -2.2; // detuning and pair energy both vanish
    const Pipeline pipe(config);
    const DensityOperator rho0(random_density_matrix(rng));

    for (double t : sample_times()) {
        const ReconstructionInput in = pipe.input(rho0, t);
        const CoherencePair re = reconstruct_re_coherences(in);
        CHECK(re.alpha.status == ElementStatus::unidentifiable);
        CHECK(re.beta.status == ElementStatus::unidentifiable);
        CHECK(re.warnings.empty());

        // The inverting right-hand sides evaluate to numerical zero.
        const double gamma_l = in.rates_l.total();
        const double gamma_r = in.rates_r.total();
        const double phi_l = phi_combination(in.i_l, in.di_l, gamma_l);
        const double phi_r = phi_combination(in.i_r, in.di_r, gamma_r);
        const double dphi_l = phi_combination(in.di_l, in.d2i_l, gamma_l);
        const double dphi_r = phi_combination(in.di_r, in.d2i_r, gamma_r);
        const double chi_l = chi_combination(in.i_l, in.rates_l.plus, gamma_l);
        const double chi_r = chi_combination(in.i_r, in.rates_r.plus, gamma_r);
        const double gt = *in.gamma_tilde;
        const double rhs_alpha = (dphi_l - dphi_r) + 0.5 * gt * (phi_l - phi_r)
                               + 4.0 * in.g_res * in.g_res * (chi_l - chi_r);
        const double rhs_beta = (dphi_l + dphi_r) + 0.5 * gt * (phi_l + phi_r)
                              + 4.0 * in.g_off * in.g_off * (chi_l + chi_r + 1.0);
        CHECK(std::abs(rhs_alpha) < 1e-10);
        CHECK(std::abs(rhs_beta) < 1e-10);
    }
}

TEST_CASE("pure exchange coupling marks the pair coherence as never generated") {
    std::mt19937_64 rng = make_rng();
    SystemConfig config = base_config();
    config.g_off = 0.0;
    const Pipeline pipe(config);
    const DensityOperator rho0(random_density_matrix(rng));
    const CoherencePair re = reconstruct_re_coherences(pipe.input(rho0, 1.0));
    CHECK(re.alpha.status == ElementStatus::reconstructed);
    CHECK(re.beta.status == ElementStatus::not_generated);
}

TEST_CASE("vanishing pair energy with finite detuning") {
    std::mt19937_64 rng = make_rng();
    SystemConfig config = base_config();
    config.u_int = -(config.eps[0] + config.eps[1]); // pair energy zero, detuning 0.4
    const Pipeline pipe(config);
    const DensityOperator rho0(random_density_matrix(rng));
    for (double t : {0.5, 2.0}) {
        const DensityOperator rho = pipe.state(rho0, t);
        const CoherencePair re = reconstruct_re_coherences(pipe.input(rho0, t));
        CHECK(re.alpha.status == ElementStatus::reconstructed);
        CHECK(std::abs(re.alpha.value - rho.alpha().real()) < 1e-8);
        CHECK(re.beta.status == ElementStatus::unidentifiable);
        CHECK(re.warnings.empty());
    }
}

TEST_CASE("derivative bundles are required explicitly") {
    const Pipeline pipe(base_config());
    ReconstructionInput in = pipe.input(DensityOperator::ground_state(2), 1.0);
    in.has_first = false;
    CHECK_THROWS_AS((void)reconstruct_im_coherences(in), ConfigError);
    in.has_first = true;
    in.has_second = false;
    CHECK_THROWS_AS((void)reconstruct_re_coherences(in), ConfigError);
    in.has_second = true;
    in.gamma_tilde.reset();
    CHECK_THROWS_AS((void)reconstruct_re_coherences(in), ConfigError);
}

TEST_CASE("full reconstruction closes end-to-end across the case taxonomy") {
    std::mt19937_64 rng = make_rng();

    std::vector<SystemConfig> taxonomy;
    taxonomy.push_back(base_config()); // generic
    {
        SystemConfig degenerate = base_config();
        degenerate.eps = {1.1, 1.1};
        degenerate.u_int = -2.2;
        taxonomy.push_back(degenerate);
    }
    {
        SystemConfig exchange_only = base_config();
        exchange_only.g_off = 0.0;
        taxonomy.push_back(exchange_only);
    }

    for (const SystemConfig& config : taxonomy) {
        const Pipeline pipe(config);
        const DensityOperator rho0(random_density_matrix(rng));
        for (double t : sample_times()) {
            const DensityOperator rho = pipe.state(rho0, t);
            const ReconstructedState rec = reconstruct_state(pipe.input(rho0, t));
            CHECK(rec.warnings.empty());

            CHECK(std::abs(rec.r00.value - rho.r00()) < 1e-8);
            CHECK(std::abs(rec.r01.value - rho.r01()) < 1e-8);
            CHECK(std::abs(rec.r10.value - rho.r10()) < 1e-8);
            CHECK(std::abs(rec.r11.value - rho.r11()) < 1e-8);
            if (rec.im_alpha.status == ElementStatus::reconstructed)
                CHECK(std::abs(rec.im_alpha.value - rho.alpha().imag()) < 1e-8);
            if (rec.re_alpha.status == ElementStatus::reconstructed)
                CHECK(std::abs(rec.re_alpha.value - rho.alpha().real()) < 1e-8);
            if (rec.im_beta.status == ElementStatus::reconstructed)
                CHECK(std::abs(rec.im_beta.value - rho.beta().imag()) < 1e-8);
            if (rec.re_beta.status == ElementStatus::reconstructed)
                CHECK(std::abs(rec.re_beta.value - rho.beta().real()) < 1e-8);
        }
    }
}

TEST_CASE("reconstructed matrix assembles into the coherence-sparse state") {
    const Pipeline pipe(base_config());
    // Mixture of exchange and pair coherent states: v, x, y, z stay zero in the
    // undriven dynamics, so the assembled matrix is the whole story.
    const Eigen::MatrixXcd mix = 0.55 * DensityOperator::bell_psi_plus().matrix()
                               + 0.45 * DensityOperator::bell_phi_minus().matrix();
    const DensityOperator rho0(mix);
    for (double t : {0.8, 3.2}) {
        const DensityOperator rho = pipe.state(rho0, t);
        const ReconstructedState rec = reconstruct_state(pipe.input(rho0, t));
        CHECK((rec.matrix() - rho.matrix()).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(rec.physical());
    }
}

TEST_CASE("first derivative of the pair occupation is redundant information") {
    std::mt19937_64 rng = make_rng();
    const SystemConfig config = base_config();
    const Superoperator l = build_lindbladian(config);
    const Rates rl = config.rates(0);
    const Rates rr = config.rates(1);
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::MatrixXcd rho = random_density_matrix(rng);
        const double i_l = current_moment({0}, 0, rho, l, config);
        const double i_r = current_moment({1}, 0, rho, l, config);
        const double di_l = current_moment({0}, 1, rho, l, config);
        const double di_r = current_moment({1}, 1, rho, l, config);
        const double di_lr = current_moment({0, 1}, 1, rho, l, config);

        const double n_l = (rl.plus - i_l) / rl.total();
        const double n_r = (rr.plus - i_r) / rr.total();
        const double ds = di_lr - di_l * i_r - i_l * di_r;
        const double dr11 = ds / (rl.total() * rr.total())
                          + (-di_l / rl.total()) * n_r + n_l * (-di_r / rr.total());
        CHECK(std::abs(dr11 - occupation_moment({0, 1}, 1, rho, l)) < 1e-12);
    }
}

TEST_CASE("steady-state reconstruction matches the null-space state") {
    SystemConfig config = base_config();
    config.g_off = 0.0;       // steady-state route needs balanced lead currents
    config.eps = {1.0, 0.9};  // small detuning keeps the width quadratic unambiguous
    const Superoperator l = build_lindbladian(config);
    const DensityOperator ss = steady_state(l);
    const TransportSample sample = measure_transport(0.0, ss, l, config);

    SteadyInput in;
    in.i_l = sample.current_l[0];
    in.i_r = sample.current_r[0];
    in.s_lr = sample.s_lr;
    in.rates_l = config.rates(0);
    in.rates_r = config.rates(1);
    in.g_res = config.g_res;
    in.delta = config.delta();

    SUBCASE("with the total width known") {
        in.gamma_tilde = config.Gamma_tilde();
        const ReconstructedState rec = steady_state_qst(in);
        CHECK(rec.warnings.empty());
        CHECK(std::abs(rec.r00.value - ss.r00()) < 1e-9);
        CHECK(std::abs(rec.r01.value - ss.r01()) < 1e-9);
        CHECK(std::abs(rec.r10.value - ss.r10()) < 1e-9);
        CHECK(std::abs(rec.r11.value - ss.r11()) < 1e-9);
        CHECK(rec.im_alpha.status == ElementStatus::reconstructed);
        CHECK(std::abs(rec.im_alpha.value - ss.alpha().imag()) < 1e-9);
        CHECK(rec.re_alpha.status == ElementStatus::reconstructed);
        CHECK(std::abs(rec.re_alpha.value - ss.alpha().real()) < 1e-9);
        CHECK(rec.im_beta.status == ElementStatus::not_generated);
        CHECK(rec.re_beta.status == ElementStatus::not_generated);
        CHECK(!rec.gamma_tilde_estimate);
    }

    SUBCASE("with the total width recovered from the current") {
        const ReconstructedState rec = steady_state_qst(in);
        REQUIRE(rec.gamma_tilde_estimate.has_value());
        CHECK(std::abs(*rec.gamma_tilde_estimate - config.Gamma_tilde())
              < 1e-8 * config.Gamma_tilde());
        CHECK(std::abs(rec.re_alpha.value - ss.alpha().real()) < 1e-8);
    }
}

TEST_CASE("unbiased steady state carries no current and no imaginary coherence") {
    SystemConfig config = base_config();
    config.g_off = 0.0;
    config.baths[0].override_rates = Rates{0.08, 0.12};
    config.baths[1].override_rates = Rates{0.04, 0.06}; // same occupation bias 0.4
    const Superoperator l = build_lindbladian(config);
    const DensityOperator ss = steady_state(l);
    const TransportSample sample = measure_transport(0.0, ss, l, config);

    SteadyInput in;
    in.i_l = sample.current_l[0];
    in.i_r = sample.current_r[0];
    in.s_lr = sample.s_lr;
    in.rates_l = config.rates(0);
    in.rates_r = config.rates(1);
    in.g_res = config.g_res;
    in.delta = config.delta();
    in.gamma_tilde = config.Gamma_tilde();

    CHECK(std::abs(in.i_l) < 1e-12);
    const ReconstructedState rec = steady_state_qst(in);
    CHECK(std::abs(rec.im_alpha.value) < 1e-12);
    CHECK(rec.warnings.empty());
}

TEST_CASE("steady-state diagnostics") {
    const SystemConfig config = base_config();
    SteadyInput in;
    in.rates_l = config.rates(0);
    in.rates_r = config.rates(1);
    in.g_res = config.g_res;
    in.delta = config.delta();

    SUBCASE("unbalanced currents are flagged") {
        in.i_l = 0.1;
        in.i_r = 0.0;
        in.gamma_tilde = config.Gamma_tilde();
        const ReconstructedState rec = steady_state_qst(in);
        bool flagged = false;
        for (const std::string& w : rec.warnings)
            flagged = flagged || w.find("do not balance") != std::string::npos;
        CHECK(flagged);
    }

    SUBCASE("current incompatible with any admissible width") {
        // Equal occupation bias on both leads cannot drive a finite current.
        in.rates_r = in.rates_l;
        in.i_l = 0.01;
        in.i_r = -0.01;
        CHECK_THROWS_WITH_AS((void)steady_state_qst(in),
                             doctest::Contains("inconsistent with steady current"),
                             NumericError);
    }

    SUBCASE("two admissible widths cannot be told apart") {
        // Large detuning pushes the partner root above the bare width.
        in.delta = 1.3;
        const double g2 = in.g_res * in.g_res;
        const double gamma = in.rates_l.total() + in.rates_r.total();
        const double bias = in.rates_l.plus / in.rates_l.total()
                          - in.rates_r.plus / in.rates_r.total();
        const double gt = gamma; // no dephasing
        const double i_ss = g2 * gt * bias
                          / (0.25 * gt * gt
                             + g2 * gamma * gt / (in.rates_l.total() * in.rates_r.total())
                             + in.delta * in.delta);
        in.i_l = i_ss;
        in.i_r = -i_ss;
        CHECK_THROWS_WITH_AS((void)steady_state_qst(in), doctest::Contains("ambiguous"),
                             NumericError);
    }
}

TEST_CASE("completeness report follows the reachable directions") {
    SUBCASE("generic undriven register") {
        const CompletenessReport report = completeness_report(base_config());
        CHECK(report.dimension == 8);
        int inside = 0;
        for (const DirectionMembership& m : report.directions)
            if (m.membership == Membership::inside)
                ++inside;
        CHECK(inside == 8);
    }

    SUBCASE("driven register reaches everything") {
        SystemConfig config = base_config();
        config.drive = {0.04, 0.03};
        const CompletenessReport report = completeness_report(config);
        CHECK(report.dimension == 16);
        for (const DirectionMembership& m : report.directions)
            CHECK(m.membership == Membership::inside);
    }

    SUBCASE("frozen dynamics leaves only the projector span") {
        SystemConfig config;
        config.n_qubits = 2;
        config.eps = {0.0, 0.0};
        config.baths.push_back(BathSpec{0, BathStatistics::fermionic, 0.0, 1.0, 0.0,
                                        Rates{0.0, 0.0}});
        config.baths.push_back(BathSpec{1, BathStatistics::fermionic, 0.0, 1.0, 0.0,
                                        Rates{0.0, 0.0}});
        const CompletenessReport report = completeness_report(config);
        CHECK(report.dimension == 4);
        for (const DirectionMembership& m : report.directions) {
            const bool population = m.label.front() == 'r';
            CHECK(m.membership
                  == (population ? Membership::inside : Membership::outside));
        }
    }
}

} // TEST_SUITE
