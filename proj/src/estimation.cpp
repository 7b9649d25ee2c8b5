// estimation.cpp — Lifted linear solves and Gauss-Newton polish on probe data

#include "tqst/estimation.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "tqst/qst.hpp"

namespace tqst {

namespace {

constexpr double kConditionLimit = 1e10;  // beyond this the probe design is singular
constexpr double kActivityFloor = 1e-9;   // relative signal needed to keep a family
constexpr double kNegativeTol = 1e-8;     // tolerated negative square from the lift
constexpr int kMaxPolishSteps = 50;
constexpr double kGradientTol = 1e-12;

std::string describe(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

std::string probe_suggestion(double gamma_total) {
    if (!(gamma_total > 0.0))
        return "";
    const std::vector<double> times = suggested_probe_times(gamma_total, 3);
    return "; suggested extra probe times: t = " + describe(times[0]) + ", "
         + describe(times[1]) + ", " + describe(times[2]);
}

// Per-probe combinations entering the two equation families. The difference
// stack (d*) drives the exchange coupling, the sum stack (s*) the pair one.
struct ProbeData {
    std::vector<double> dphi, dphi1, dphi2;  // phi_L - phi_R and derivatives
    std::vector<double> dchi, dchi1;
    std::vector<double> sphi, sphi1, sphi2;  // phi_L + phi_R and derivatives
    std::vector<double> schi, schi1;         // X = chi_L + chi_R; rows use X + 1
    double gamma_total{0.0};

    std::size_t size() const { return dphi.size(); }
};

ProbeData build_probe_data(const std::vector<TransportSample>& probes,
                           const Rates& rates_l, const Rates& rates_r) {
    const double gl = rates_l.total();
    const double gr = rates_r.total();
    if (!(gl > 0.0) || !(gr > 0.0))
        throw ConfigError("estimation requires strictly positive total rates on both leads");

    ProbeData data;
    data.gamma_total = gl + gr;
    for (const TransportSample& p : probes) {
        double phi_l[3];
        double phi_r[3];
        for (int k = 0; k < 3; ++k) {
            phi_l[k] = phi_combination(p.current_l[k], p.current_l[k + 1], gl);
            phi_r[k] = phi_combination(p.current_r[k], p.current_r[k + 1], gr);
        }
        const double chi_l = chi_combination(p.current_l[0], rates_l.plus, gl);
        const double chi_r = chi_combination(p.current_r[0], rates_r.plus, gr);
        const double dchi_l = p.current_l[1] / gl;
        const double dchi_r = p.current_r[1] / gr;

        data.dphi.push_back(phi_l[0] - phi_r[0]);
        data.dphi1.push_back(phi_l[1] - phi_r[1]);
        data.dphi2.push_back(phi_l[2] - phi_r[2]);
        data.dchi.push_back(chi_l - chi_r);
        data.dchi1.push_back(dchi_l - dchi_r);
        data.sphi.push_back(phi_l[0] + phi_r[0]);
        data.sphi1.push_back(phi_l[1] + phi_r[1]);
        data.sphi2.push_back(phi_l[2] + phi_r[2]);
        data.schi.push_back(chi_l + chi_r);
        data.schi1.push_back(dchi_l + dchi_r);
    }
    return data;
}

double stack_scale(const std::vector<double>& a, const std::vector<double>& b,
                   const std::vector<double>& c) {
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    for (double v : b) scale = std::max(scale, std::abs(v));
    for (double v : c) scale = std::max(scale, std::abs(v));
    return scale;
}

// Least squares with a condition check; throws when the design is singular.
Eigen::VectorXd checked_solve(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs,
                              double gamma_total, double* condition) {
    if (design.rows() < design.cols())
        throw ConfigError("probe design is underdetermined: "
                          + std::to_string(design.rows()) + " equations for "
                          + std::to_string(design.cols()) + " unknowns");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design,
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    const double cond = (smin > 0.0) ? smax / smin
                                     : std::numeric_limits<double>::infinity();
    if (condition)
        *condition = cond;
    if (!(smax > 0.0) || cond > kConditionLimit)
        throw NumericError("probe design is singular: condition number "
                           + describe(cond) + " exceeds " + describe(kConditionLimit)
                           + probe_suggestion(gamma_total));
    return svd.solve(rhs);
}

struct FamilyChoice {
    bool a{false};
    bool b{false};
    int count() const { return (a ? 1 : 0) + (b ? 1 : 0); }
};

// Structured residuals and Jacobian for the polish step. Parameter layout:
// [width (if fitted)], then (delta^2, g_res^2) when family A is active, then
// (pair_energy^2, g_off^2) when family B is.
struct Structured {
    const ProbeData& data;
    FamilyChoice families;
    bool fit_width;
    double fixed_width;

    int parameter_count() const {
        return (fit_width ? 1 : 0) + 2 * families.count();
    }
    int row_count() const {
        return static_cast<int>(data.size()) * families.count();
    }

    void evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd& r,
                  Eigen::MatrixXd& j) const {
        const int n = static_cast<int>(data.size());
        r.resize(row_count());
        j.setZero(row_count(), parameter_count());

        int p = fit_width ? 1 : 0;
        const double gt = fit_width ? theta(0) : fixed_width;
        int row = 0;
        if (families.a) {
            const double d2 = theta(p);
            const double g2 = theta(p + 1);
            for (int i = 0; i < n; ++i, ++row) {
                r(row) = data.dphi2[i] + gt * data.dphi1[i]
                       + (0.25 * gt * gt + d2) * data.dphi[i]
                       + 4.0 * g2 * data.dchi1[i] + 2.0 * gt * g2 * data.dchi[i];
                if (fit_width)
                    j(row, 0) = data.dphi1[i] + 0.5 * gt * data.dphi[i]
                              + 2.0 * g2 * data.dchi[i];
                j(row, p) = data.dphi[i];
                j(row, p + 1) = 4.0 * data.dchi1[i] + 2.0 * gt * data.dchi[i];
            }
            p += 2;
        }
        if (families.b) {
            const double e2 = theta(p);
            const double g2 = theta(p + 1);
            for (int i = 0; i < n; ++i, ++row) {
                const double xp1 = data.schi[i] + 1.0;
                r(row) = data.sphi2[i] + gt * data.sphi1[i]
                       + (0.25 * gt * gt + e2) * data.sphi[i]
                       + 4.0 * g2 * data.schi1[i] + 2.0 * gt * g2 * xp1;
                if (fit_width)
                    j(row, 0) = data.sphi1[i] + 0.5 * gt * data.sphi[i] + 2.0 * g2 * xp1;
                j(row, p) = data.sphi[i];
                j(row, p + 1) = 4.0 * data.schi1[i] + 2.0 * gt * xp1;
            }
        }
    }
};

// Lifted linear solve: families share the width column; the quadratic width
// terms enter through free lifted coefficients that the polish re-ties.
struct LiftedSolution {
    double width{0.0};
    double delta_sq{0.0}, g_res_sq{0.0};
    double pair_sq{0.0}, g_off_sq{0.0};
    double condition{0.0};
};

LiftedSolution lifted_solve(const ProbeData& data, FamilyChoice families,
                            std::optional<double> known_width) {
    const int n = static_cast<int>(data.size());
    LiftedSolution out;

    Eigen::MatrixXd design;
    Eigen::VectorXd rhs;
    if (known_width) {
        const double gt = *known_width;
        const int cols = 2 * families.count();
        design.setZero(n * families.count(), cols);
        rhs.resize(n * families.count());
        int row = 0;
        int p = 0;
        if (families.a) {
            for (int i = 0; i < n; ++i, ++row) {
                design(row, p) = data.dphi[i];
                design(row, p + 1) = 4.0 * data.dchi1[i] + 2.0 * gt * data.dchi[i];
                rhs(row) = -data.dphi2[i] - gt * data.dphi1[i]
                         - 0.25 * gt * gt * data.dphi[i];
            }
            p += 2;
        }
        if (families.b) {
            for (int i = 0; i < n; ++i, ++row) {
                design(row, p) = data.sphi[i];
                design(row, p + 1) = 4.0 * data.schi1[i]
                                   + 2.0 * gt * (data.schi[i] + 1.0);
                rhs(row) = -data.sphi2[i] - gt * data.sphi1[i]
                         - 0.25 * gt * gt * data.sphi[i];
            }
        }
        const Eigen::VectorXd x =
            checked_solve(design, rhs, data.gamma_total, &out.condition);
        out.width = gt;
        int q = 0;
        if (families.a) {
            out.delta_sq = x(q);
            out.g_res_sq = 0.25 * x(q + 1);
            q += 2;
        }
        if (families.b) {
            out.pair_sq = x(q);
            out.g_off_sq = 0.25 * x(q + 1);
        }
        return out;
    }

    // Joint mode: columns [width, a2, a3, a4 | b2, b3, b4] as present.
    const int cols = 1 + 3 * families.count();
    design.setZero(n * families.count(), cols);
    rhs.resize(n * families.count());
    int row = 0;
    int p = 1;
    if (families.a) {
        for (int i = 0; i < n; ++i, ++row) {
            design(row, 0) = data.dphi1[i];
            design(row, p) = data.dphi[i];
            design(row, p + 1) = data.dchi1[i];
            design(row, p + 2) = data.dchi[i];
            rhs(row) = -data.dphi2[i];
        }
        p += 3;
    }
    if (families.b) {
        for (int i = 0; i < n; ++i, ++row) {
            design(row, 0) = data.sphi1[i];
            design(row, p) = data.sphi[i];
            design(row, p + 1) = data.schi1[i];
            design(row, p + 2) = data.schi[i] + 1.0;
            rhs(row) = -data.sphi2[i];
        }
    }
    const Eigen::VectorXd x = checked_solve(design, rhs, data.gamma_total, &out.condition);
    out.width = x(0);
    int q = 1;
    if (families.a) {
        out.delta_sq = x(q) - 0.25 * out.width * out.width;
        out.g_res_sq = 0.25 * x(q + 1); // a4 = width * a3 / 2 is re-tied by the polish
        q += 3;
    }
    if (families.b) {
        out.pair_sq = x(q) - 0.25 * out.width * out.width;
        out.g_off_sq = 0.25 * x(q + 1);
    }
    return out;
}

void check_square(double value, double scale, const char* name) {
    if (value < -kNegativeTol * scale)
        throw NumericError(std::string("inconsistent probe data: lifted solution gives ")
                           + name + " = " + describe(value) + " < 0");
}

double clipped_sqrt(double value) { return std::sqrt(std::max(value, 0.0)); }

EstimationResult solve_structured(const ProbeData& data, FamilyChoice families,
                                  std::optional<double> known_width) {
    LiftedSolution lift = lifted_solve(data, families, known_width);
    const double scale = std::max({1.0, lift.width * lift.width,
                                   std::abs(lift.delta_sq), std::abs(lift.pair_sq),
                                   std::abs(lift.g_res_sq), std::abs(lift.g_off_sq)});
    if (families.a) {
        check_square(lift.delta_sq, scale, "detuning^2");
        check_square(lift.g_res_sq, scale, "g_res^2");
    }
    if (families.b) {
        check_square(lift.pair_sq, scale, "pair_energy^2");
        check_square(lift.g_off_sq, scale, "g_off^2");
    }

    const Structured model{data, families, !known_width.has_value(),
                           known_width.value_or(0.0)};
    Eigen::VectorXd theta(model.parameter_count());
    int p = 0;
    if (!known_width)
        theta(p++) = lift.width;
    if (families.a) {
        theta(p++) = std::max(lift.delta_sq, 0.0);
        theta(p++) = std::max(lift.g_res_sq, 0.0);
    }
    if (families.b) {
        theta(p++) = std::max(lift.pair_sq, 0.0);
        theta(p++) = std::max(lift.g_off_sq, 0.0);
    }

    Eigen::VectorXd r;
    Eigen::MatrixXd j;
    for (int step = 0; step < kMaxPolishSteps; ++step) {
        model.evaluate(theta, r, j);
        if ((j.transpose() * r).cwiseAbs().maxCoeff() < kGradientTol)
            break;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd delta = svd.solve(-r);
        if (!delta.allFinite() || delta.norm() < 1e-15 * (1.0 + theta.norm()))
            break;
        theta += delta;
    }
    model.evaluate(theta, r, j);

    EstimationResult result;
    result.condition = lift.condition;
    result.residual = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
    result.family_a_active = families.a;
    result.family_b_active = families.b;
    p = 0;
    const double width = known_width ? *known_width : theta(p++);
    result.gamma_tilde = width;
    if (families.a) {
        result.delta = clipped_sqrt(theta(p++));
        result.g_res = clipped_sqrt(theta(p++));
    }
    if (families.b) {
        result.pair_energy = clipped_sqrt(theta(p++));
        result.g_off = clipped_sqrt(theta(p++));
    }
    return result;
}

} // namespace

ClosureCoefficients krylov_closure_coefficients(const Superoperator& l,
                                                const std::vector<int>& subset,
                                                double tol) {
    const Eigen::Index super_dim = l.matrix.rows();
    const int dim = static_cast<int>(std::llround(std::sqrt(double(super_dim))));
    if (Eigen::Index(dim) * dim != super_dim)
        throw ConfigError("generator matrix is not a square superoperator");
    int n_qubits = 0;
    while ((1 << n_qubits) < dim)
        ++n_qubits;
    if ((1 << n_qubits) != dim)
        throw ConfigError("generator dimension is not a power of two");

    const Eigen::MatrixXcd a = adjoint(l).matrix;
    const Eigen::VectorXcd identity_vec =
        vectorize(Eigen::MatrixXcd::Identity(dim, dim));
    const Eigen::VectorXcd seed = vectorize(occupation_projector(subset, n_qubits));

    std::vector<Eigen::VectorXcd> iterates{seed};  // raw powers a^k seed
    std::vector<Eigen::VectorXcd> basis;           // orthonormal span incl. identity
    const auto absorb = [&basis](const Eigen::VectorXcd& vec) {
        Eigen::VectorXcd v = vec;
        for (int pass = 0; pass < 2; ++pass)
            for (const Eigen::VectorXcd& b : basis)
                v -= b.dot(v) * b;
        if (v.norm() > 1e-12 * std::max(1.0, vec.norm()))
            basis.push_back(v.normalized());
    };
    absorb(identity_vec);
    absorb(seed);

    for (int order = 1; order <= static_cast<int>(super_dim); ++order) {
        Eigen::VectorXcd w = a * iterates.back();
        Eigen::VectorXcd residual_vec = w;
        for (int pass = 0; pass < 2; ++pass)
            for (const Eigen::VectorXcd& b : basis)
                residual_vec -= b.dot(residual_vec) * b;
        if (residual_vec.norm() > tol * std::max(1.0, w.norm())) {
            basis.push_back(residual_vec.normalized());
            iterates.push_back(std::move(w));
            continue;
        }

        // Closed: expand a^order seed over {identity, lower raw iterates}.
        Eigen::MatrixXcd span(super_dim, order + 1);
        span.col(0) = identity_vec;
        for (int k = 0; k < order; ++k)
            span.col(k + 1) = iterates[static_cast<std::size_t>(k)];
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(span,
            Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double smax = svd.singularValues()(0);
        const double smin = svd.singularValues()(svd.singularValues().size() - 1);
        const Eigen::VectorXcd x = svd.solve(w);

        ClosureCoefficients out;
        out.order = order;
        out.offset = x(0).real();
        out.c.resize(static_cast<std::size_t>(order));
        for (int k = 0; k < order; ++k)
            out.c[static_cast<std::size_t>(k)] = x(k + 1).real();
        out.residual = (span * x - w).norm() / std::max(1.0, w.norm());
        out.ill_conditioned = !(smin > 0.0) || smax / smin > kConditionLimit;
        return out;
    }
    throw NumericError("closure search exceeded the operator-space dimension");
}

int minimum_probe_count(EstimationCase declared_case) {
    switch (declared_case) {
        case EstimationCase::general: return 5;
        case EstimationCase::degenerate: return 3;
        case EstimationCase::exchange_only: return 3;
    }
    throw ConfigError("unknown estimation case");
}

EstimationResult estimate_g_res_gamma_tilde(const std::vector<TransportSample>& probes,
                                            const Rates& rates_l,
                                            const Rates& rates_r) {
    if (probes.size() < 2)
        throw ConfigError("at least two probe times are required for the "
                          "degenerate-case estimator");
    const double gl = rates_l.total();
    const double gr = rates_r.total();
    if (!(gl > 0.0) || !(gr > 0.0))
        throw ConfigError("estimation requires strictly positive total rates on both leads");

    const int n = static_cast<int>(probes.size());
    Eigen::MatrixXd design(n, 2);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
        const TransportSample& p = probes[static_cast<std::size_t>(i)];
        design(i, 0) = phi_combination(p.current_l[0], p.current_l[1], gl);
        design(i, 1) = chi_combination(p.current_l[0], rates_l.plus, gl)
                     - chi_combination(p.current_r[0], rates_r.plus, gr);
        rhs(i) = -phi_combination(p.current_l[1], p.current_l[2], gl);
    }

    EstimationResult result;
    const Eigen::VectorXd u = checked_solve(design, rhs, gl + gr, &result.condition);
    const double scale = std::max(1.0, u(0) * u(0));
    if (u(1) < -kNegativeTol * scale)
        throw NumericError("case assumption violated: the probes imply a negative "
                           "exchange coupling (2 g^2 = " + describe(u(1)) + ")");
    if (u(0) < -kNegativeTol * std::max(1.0, std::abs(u(1))))
        throw NumericError("case assumption violated: the probes imply a negative "
                           "total width (" + describe(2.0 * u(0)) + ")");

    result.gamma_tilde = 2.0 * std::max(u(0), 0.0);
    result.g_res = std::sqrt(std::max(u(1), 0.0) / 2.0);
    result.residual = std::sqrt((design * u - rhs).squaredNorm() / n);
    result.family_a_active = true;
    return result;
}

EstimationResult estimate_general(const std::vector<TransportSample>& probes,
                                  const Rates& rates_l, const Rates& rates_r,
                                  std::optional<double> gamma_tilde) {
    const std::size_t min_probes = gamma_tilde ? 4 : 5;
    if (probes.size() < min_probes)
        throw ConfigError("the general estimator needs at least "
                          + std::to_string(min_probes) + " probe times"
                          + (gamma_tilde ? " when the total width is known"
                                         : " when the total width is unknown"));

    const ProbeData data = build_probe_data(probes, rates_l, rates_r);
    const double scale_a = stack_scale(data.dphi, data.dphi1, data.dphi2);
    const double scale_b = stack_scale(data.sphi, data.sphi1, data.sphi2);
    const double overall = std::max({scale_a, scale_b, 1e-12});

    FamilyChoice families;
    families.a = scale_a > kActivityFloor * overall;
    families.b = scale_b > kActivityFloor * overall;
    if (!families.a && !families.b)
        throw NumericError("probe data shows no coherent transport response; "
                           "the couplings cannot be estimated");

    EstimationResult result = solve_structured(data, families, gamma_tilde);
    if (!families.a) {
        result.g_res = 0.0; // the difference combinations vanish identically
        result.notes.push_back("difference equations carry no signal: exchange "
                               "coupling fixed to zero, detuning not identifiable");
    }
    if (!families.b) {
        result.g_off = 0.0; // the sum combinations vanish identically
        result.notes.push_back("sum equations carry no signal: pair coupling "
                               "fixed to zero, pair energy not identifiable");
    }
    return result;
}

void EstimationProblem::validate() const {
    const int minimum = minimum_probe_count(declared_case);
    if (static_cast<int>(probes.size()) < minimum)
        throw ConfigError("the declared case needs at least "
                          + std::to_string(minimum) + " probe times, got "
                          + std::to_string(probes.size()));
    if (!(rates_l.total() > 0.0) || !(rates_r.total() > 0.0))
        throw ConfigError("estimation requires strictly positive total rates on both leads");
}

EstimationResult EstimationProblem::solve() const {
    validate();
    switch (declared_case) {
        case EstimationCase::general:
            return estimate_general(probes, rates_l, rates_r, gamma_tilde);
        case EstimationCase::degenerate:
            return estimate_g_res_gamma_tilde(probes, rates_l, rates_r);
        case EstimationCase::exchange_only: {
            // One more probe pays for the unknown width in the joint mode.
            if (!gamma_tilde && probes.size() < 4)
                throw ConfigError("the exchange-only case needs at least 4 probe "
                                  "times when the total width is unknown; 3 "
                                  "suffice when it is known");
            const ProbeData data = build_probe_data(probes, rates_l, rates_r);
            FamilyChoice families;
            families.a = true;
            EstimationResult result = solve_structured(data, families, gamma_tilde);
            result.g_off = 0.0;
            result.notes.push_back("pair coupling assumed zero for the declared case");
            return result;
        }
    }
    throw ConfigError("unknown estimation case");
}

std::vector<double> suggested_probe_times(double gamma_total, int count) {
    if (!(gamma_total > 0.0))
        throw ConfigError("probe-time suggestion needs a positive total rate");
    if (count < 2)
        throw ConfigError("a probe schedule needs at least two times");
    std::vector<double> times(static_cast<std::size_t>(count));
    const double lo = 0.1 / gamma_total;
    for (int i = 0; i < count; ++i)
        times[static_cast<std::size_t>(i)] =
            lo * std::pow(50.0, double(i) / double(count - 1));
    return times;
}

EquationResiduals equation_residuals(const EstimationResult& fit,
                                     const std::vector<TransportSample>& probes,
                                     const Rates& rates_l, const Rates& rates_r) {
    const ProbeData data = build_probe_data(probes, rates_l, rates_r);
    const double gt = fit.gamma_tilde.value_or(0.0);
    const double ga = fit.g_res.value_or(0.0);
    const double gb = fit.g_off.value_or(0.0);
    const double d2 = [&] { double d = fit.delta.value_or(0.0); return d * d; }();
    const double e2 = [&] { double e = fit.pair_energy.value_or(0.0); return e * e; }();

    EquationResiduals out;
    out.family_a.reserve(data.size());
    out.family_b.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        out.family_a.push_back(data.dphi2[i] + gt * data.dphi1[i]
                               + (0.25 * gt * gt + d2) * data.dphi[i]
                               + 4.0 * ga * ga * data.dchi1[i]
                               + 2.0 * gt * ga * ga * data.dchi[i]);
        out.family_b.push_back(data.sphi2[i] + gt * data.sphi1[i]
                               + (0.25 * gt * gt + e2) * data.sphi[i]
                               + 4.0 * gb * gb * data.schi1[i]
                               + 2.0 * gt * gb * gb * (data.schi[i] + 1.0));
    }
    return out;
}

} // namespace tqst
