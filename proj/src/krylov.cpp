// krylov.cpp — Arnoldi iteration, subspace assembly, spectral observability

#include "tqst/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tqst {

namespace {

constexpr double kAssemblyTol    = 1e-8;  // acceptance threshold for new directions
constexpr double kClusterGap     = 1e-9;  // eigenvalues closer than this coincide
constexpr double kOverlapFloor   = 1e-9;  // smaller overlaps count as unreachable
constexpr double kConditionLimit = 1e8;

void project_out(const std::vector<Eigen::MatrixXcd>& basis, Eigen::MatrixXcd& w) {
    for (const Eigen::MatrixXcd& v : basis)
        w -= hs_inner(v, w) * v;
}

std::vector<std::vector<int>> occupation_subsets(int n_qubits) {
    std::vector<std::vector<int>> subsets;
    for (int mask = 0; mask < (1 << n_qubits); ++mask) {
        std::vector<int> subset;
        for (int j = 0; j < n_qubits; ++j)
            if (mask & (1 << j))
                subset.push_back(j);
        subsets.push_back(std::move(subset));
    }
    return subsets;
}

std::string subset_label(const std::vector<int>& subset, int n_qubits) {
    if (subset.empty())
        return "identity";
    std::string label;
    for (int j : subset) {
        if (!label.empty())
            label += ' ';
        if (n_qubits == 2)
            label += (j == 0) ? "n_L" : "n_R";
        else
            label += "n_" + std::to_string(j);
    }
    return label;
}

double matrix_condition(const Eigen::MatrixXcd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    return (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();
}

} // namespace

KrylovBasis arnoldi(const Superoperator& l_adjoint, const Eigen::MatrixXcd& seed,
                    const std::string& seed_label, double tol) {
    const double seed_norm = hs_norm(seed);
    if (seed_norm < 1e-300)
        throw ConfigError("Krylov seed operator is zero");

    KrylovBasis basis;
    basis.seed_label = seed_label;
    basis.vectors.push_back(seed / seed_norm);

    const int cap = static_cast<int>(seed.rows() * seed.cols());
    while (basis.dimension() < cap) {
        Eigen::MatrixXcd w = devectorize(l_adjoint.matrix * vectorize(basis.vectors.back()));
        project_out(basis.vectors, w);
        project_out(basis.vectors, w); // full second pass keeps orthogonality tight
        const double r = hs_norm(w);
        basis.residuals.push_back(r);
        if (r <= tol * seed_norm)
            break;
        basis.vectors.push_back(w / r);
    }
    return basis;
}

std::vector<KrylovBasis> standard_krylov_bases(const SystemConfig& config, double tol) {
    const Superoperator ld = adjoint(build_lindbladian(config));
    std::vector<KrylovBasis> bases;
    for (const std::vector<int>& subset : occupation_subsets(config.n_qubits))
        bases.push_back(arnoldi(ld, occupation_projector(subset, config.n_qubits),
                                subset_label(subset, config.n_qubits), tol));
    return bases;
}

Eigen::MatrixXcd ObservableSpace::projector() const {
    if (basis.empty())
        throw ConfigError("observable space is empty");
    const Eigen::Index d2 = basis.front().rows() * basis.front().cols();
    Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(d2, d2);
    for (const Eigen::MatrixXcd& v : basis) {
        const Eigen::VectorXcd vv = vectorize(v);
        p += vv * vv.adjoint();
    }
    return p;
}

ObservableSpace assemble_observable_space(const std::vector<KrylovBasis>& bases) {
    if (bases.empty())
        throw ConfigError("observable space needs at least one Krylov basis");
    ObservableSpace space;
    for (const KrylovBasis& kb : bases) {
        int contributed = 0;
        for (const Eigen::MatrixXcd& v : kb.vectors) {
            Eigen::MatrixXcd w = v;
            project_out(space.basis, w);
            project_out(space.basis, w);
            const double r = hs_norm(w);
            if (r > kAssemblyTol) {
                space.basis.push_back(w / r);
                ++contributed;
            }
        }
        space.seed_budget.push_back(contributed);
    }
    return space;
}

std::vector<DirectionMembership> classify_directions(const ObservableSpace& space) {
    if (space.basis.empty() || space.basis.front().rows() != 4)
        throw ConfigError("direction classification is defined for two-qubit spaces");
    std::vector<DirectionMembership> result;
    const std::vector<std::string>& labels = state_component_labels();
    const std::vector<Eigen::MatrixXcd>& dirs = state_directions();
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        double captured = 0.0;
        for (const Eigen::MatrixXcd& v : space.basis)
            captured += std::norm(hs_inner(v, dirs[i]));
        DirectionMembership m;
        m.label = labels[i];
        m.overlap = captured;
        if (captured >= 1.0 - 1e-9)
            m.membership = Membership::inside;
        else if (captured <= 1e-9)
            m.membership = Membership::outside;
        else
            m.membership = Membership::partial;
        result.push_back(std::move(m));
    }
    return result;
}

SpectralReport spectral_analysis(const Superoperator& l) {
    SpectralReport report;
    const int d2 = l.dim();
    int d = 0;
    while (d * d < d2)
        ++d;
    int n_qubits = 0;
    while ((1 << n_qubits) < d)
        ++n_qubits;

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(l.matrix);
    if (solver.info() != Eigen::Success)
        throw NumericError("eigendecomposition of the generator failed");
    report.eigenvalues = solver.eigenvalues();

    const Eigen::MatrixXcd v = solver.eigenvectors();
    report.eigenvector_condition = matrix_condition(v);

    Eigen::MatrixXcd vandermonde(d2, d2);
    for (int k = 0; k < d2; ++k)
        for (int i = 0; i < d2; ++i)
            vandermonde(k, i) = std::pow(report.eigenvalues(i), k);
    report.vandermonde_condition = matrix_condition(vandermonde);

    if (!std::isfinite(report.eigenvector_condition)
        || report.eigenvector_condition > kConditionLimit) {
        report.near_defective = true;
        report.status = "detected, not analyzed";
        return report;
    }
    report.status = "analyzed";

    const Eigen::MatrixXcd vinv = v.partialPivLu().inverse();
    report.biorthogonality_residual =
        (vinv * v - Eigen::MatrixXcd::Identity(d2, d2)).cwiseAbs().maxCoeff();
    for (int i = 0; i < d2; ++i) {
        report.right_ops.push_back(devectorize(v.col(i)));
        report.left_ops.push_back(devectorize(vinv.row(i).adjoint()));
    }

    const std::vector<std::vector<int>> subsets = occupation_subsets(n_qubits);
    const int n_seeds = static_cast<int>(subsets.size());
    report.overlaps.resize(d2, n_seeds);
    for (int s = 0; s < n_seeds; ++s) {
        report.seed_labels.push_back(subset_label(subsets[static_cast<std::size_t>(s)],
                                                  n_qubits));
        const Eigen::MatrixXcd n_p =
            occupation_projector(subsets[static_cast<std::size_t>(s)], n_qubits);
        for (int i = 0; i < d2; ++i)
            report.overlaps(i, s) = hs_inner(report.right_ops[static_cast<std::size_t>(i)],
                                             n_p);
    }

    // Transitive clustering of coinciding eigenvalues.
    std::vector<int> cluster_of(static_cast<std::size_t>(d2), -1);
    std::vector<std::vector<int>> groups;
    for (int i = 0; i < d2; ++i) {
        if (cluster_of[static_cast<std::size_t>(i)] >= 0)
            continue;
        std::vector<int> group{i};
        cluster_of[static_cast<std::size_t>(i)] = static_cast<int>(groups.size());
        for (std::size_t head = 0; head < group.size(); ++head) {
            for (int j = 0; j < d2; ++j) {
                if (cluster_of[static_cast<std::size_t>(j)] >= 0)
                    continue;
                if (std::abs(report.eigenvalues(group[head]) - report.eigenvalues(j))
                    < kClusterGap) {
                    cluster_of[static_cast<std::size_t>(j)] = static_cast<int>(groups.size());
                    group.push_back(j);
                }
            }
        }
        groups.push_back(std::move(group));
    }

    int reachable_dim = 0;
    for (const std::vector<int>& group : groups) {
        std::vector<Eigen::MatrixXcd> reachable;
        Eigen::MatrixXcd span(d2, n_seeds);
        for (int s = 0; s < n_seeds; ++s) {
            Eigen::MatrixXcd dir = Eigen::MatrixXcd::Zero(d, d);
            for (int i : group)
                dir += report.overlaps(i, s) * report.left_ops[static_cast<std::size_t>(i)];
            span.col(s) = vectorize(dir);
            reachable.push_back(std::move(dir));
        }
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(span);
        const double smax = svd.singularValues().maxCoeff();
        if (smax > 1e-12)
            for (int k = 0; k < svd.singularValues().size(); ++k)
                if (svd.singularValues()(k) > kOverlapFloor * smax)
                    ++reachable_dim;
        if (group.size() > 1)
            report.clusters.push_back(DegeneracyCluster{group, std::move(reachable)});
    }
    report.observable_dimension = reachable_dim;
    return report;
}

} // namespace tqst
