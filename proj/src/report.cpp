// report.cpp — Serialization of result structs into the line-oriented report format

#include "tqst/report.hpp"

#include <cstdio>

namespace tqst {

namespace {

void append_key(std::string& out, const std::string& key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
}

void append_notes(ReportWriter& w, const char* stem,
                  const std::vector<std::string>& notes) {
    w.add(std::string(stem) + "_count", static_cast<int>(notes.size()));
    for (std::size_t i = 0; i < notes.size(); ++i)
        w.add(std::string(stem) + "_" + std::to_string(i), notes[i]);
}

struct NamedElement {
    const char* label;
    const ReconstructedElement* element;
};

} // namespace

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::string format_complex(std::complex<double> value) {
    std::string out = format_double(value.real());
    out += (value.imag() < 0.0) ? '-' : '+';
    out += format_double(std::abs(value.imag()));
    out += 'i';
    return out;
}

void ReportWriter::add(const std::string& key, const std::string& value) {
    if (in_table_)
        throw ConfigError("report key added inside an open table");
    append_key(text_, key, value);
}

void ReportWriter::add(const std::string& key, const char* value) {
    add(key, std::string(value));
}

void ReportWriter::add(const std::string& key, double value) {
    add(key, format_double(value));
}

void ReportWriter::add(const std::string& key, int value) {
    add(key, std::to_string(value));
}

void ReportWriter::add(const std::string& key, bool value) {
    add(key, std::string(value ? "true" : "false"));
}

void ReportWriter::begin_table(const std::string& name,
                               const std::vector<std::string>& columns) {
    if (in_table_)
        throw ConfigError("report table opened inside an open table");
    if (columns.empty())
        throw ConfigError("report table needs at least one column");
    in_table_ = true;
    columns_ = columns.size();
    text_ += "[table " + name + "]\n";
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i)
            text_ += ',';
        text_ += columns[i];
    }
    text_ += '\n';
}

void ReportWriter::row(const std::vector<std::string>& cells) {
    if (!in_table_)
        throw ConfigError("report row added outside a table");
    if (cells.size() != columns_)
        throw ConfigError("report row has " + std::to_string(cells.size())
                          + " cells for " + std::to_string(columns_) + " columns");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i)
            text_ += ',';
        text_ += cells[i];
    }
    text_ += '\n';
}

void ReportWriter::end_table() {
    if (!in_table_)
        throw ConfigError("report table closed without being open");
    in_table_ = false;
    text_ += "[/table]\n";
}

void ReportWriter::matrix_block(const Eigen::MatrixXcd& m) {
    if (in_table_)
        throw ConfigError("matrix block opened inside an open table");
    text_ += "[matrix]\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j)
                text_ += ' ';
            text_ += format_complex(m(i, j));
        }
        text_ += '\n';
    }
    text_ += "[/matrix]\n";
}

std::string to_string(ElementStatus status) {
    switch (status) {
        case ElementStatus::reconstructed: return "reconstructed";
        case ElementStatus::unidentifiable: return "unidentifiable";
        case ElementStatus::not_generated: return "not_generated";
    }
    throw NumericError("unknown element status");
}

std::string to_string(Membership membership) {
    switch (membership) {
        case Membership::inside: return "inside";
        case Membership::outside: return "outside";
        case Membership::partial: return "partial";
    }
    throw NumericError("unknown membership");
}

std::string to_string(EstimationCase declared_case) {
    switch (declared_case) {
        case EstimationCase::general: return "general";
        case EstimationCase::degenerate: return "degenerate";
        case EstimationCase::exchange_only: return "exchange_only";
    }
    throw NumericError("unknown estimation case");
}

std::string to_string(ConcurrenceMethod method) {
    switch (method) {
        case ConcurrenceMethod::x_state: return "x_state";
        case ConcurrenceMethod::wootters_full: return "wootters_full";
        case ConcurrenceMethod::transport_special: return "transport_special";
        case ConcurrenceMethod::transport_general: return "transport_general";
    }
    throw NumericError("unknown concurrence method");
}

std::string to_string(ConcurrenceBranch branch) {
    switch (branch) {
        case ConcurrenceBranch::none: return "none";
        case ConcurrenceBranch::exchange: return "exchange";
        case ConcurrenceBranch::pair: return "pair";
        case ConcurrenceBranch::spin_flip: return "spin_flip";
    }
    throw NumericError("unknown concurrence branch");
}

std::string to_report(const ReconstructedState& state) {
    const NamedElement elements[] = {
        {"r00", &state.r00},           {"r01", &state.r01},
        {"r10", &state.r10},           {"r11", &state.r11},
        {"Im_alpha", &state.im_alpha}, {"Re_alpha", &state.re_alpha},
        {"Im_beta", &state.im_beta},   {"Re_beta", &state.re_beta},
    };

    ReportWriter w;
    w.add("type", "reconstructed_state");
    w.begin_table("elements", {"element", "value", "status", "residual"});
    for (const NamedElement& e : elements)
        w.row({e.label, format_double(e.element->value), to_string(e.element->status),
               format_double(e.element->residual)});
    w.end_table();
    if (state.gamma_tilde_estimate)
        w.add("gamma_tilde_estimate", *state.gamma_tilde_estimate);
    w.add("physical", state.physical());
    append_notes(w, "warning", state.warnings);
    w.matrix_block(state.matrix());
    return w.str();
}

std::string to_report(const EstimationResult& result) {
    ReportWriter w;
    w.add("type", "estimation");
    if (result.g_res)
        w.add("g_res", *result.g_res);
    if (result.g_off)
        w.add("g_off", *result.g_off);
    if (result.delta)
        w.add("delta", *result.delta);
    if (result.pair_energy)
        w.add("pair_energy", *result.pair_energy);
    if (result.gamma_tilde)
        w.add("gamma_tilde", *result.gamma_tilde);
    w.add("residual", result.residual);
    w.add("condition", result.condition);
    w.add("family_a_active", result.family_a_active);
    w.add("family_b_active", result.family_b_active);
    append_notes(w, "note", result.notes);
    return w.str();
}

std::string to_report(const ConcurrenceResult& result) {
    ReportWriter w;
    w.add("type", "concurrence");
    w.add("value", result.value);
    w.add("branch", to_string(result.branch));
    w.add("method", to_string(result.method));
    w.add("partial", result.partial);
    append_notes(w, "note", result.notes);
    return w.str();
}

std::string to_report(const CompletenessReport& report) {
    ReportWriter w;
    w.add("type", "completeness");
    w.add("dimension", report.dimension);
    w.begin_table("directions", {"direction", "membership", "overlap"});
    for (const DirectionMembership& d : report.directions)
        w.row({d.label, to_string(d.membership), format_double(d.overlap)});
    w.end_table();
    return w.str();
}

std::string to_report(const SpectralReport& report) {
    ReportWriter w;
    w.add("type", "spectral");
    w.add("status", report.status);
    w.add("near_defective", report.near_defective);
    w.add("eigenvector_condition", report.eigenvector_condition);
    if (report.status != "analyzed")
        return w.str();

    w.add("vandermonde_condition", report.vandermonde_condition);
    w.add("biorthogonality_residual", report.biorthogonality_residual);
    w.add("observable_dimension", report.observable_dimension);

    w.begin_table("eigenvalues", {"index", "re", "im"});
    for (Eigen::Index i = 0; i < report.eigenvalues.size(); ++i)
        w.row({std::to_string(i), format_double(report.eigenvalues(i).real()),
               format_double(report.eigenvalues(i).imag())});
    w.end_table();

    std::vector<std::string> columns = {"eigenvalue"};
    columns.insert(columns.end(), report.seed_labels.begin(), report.seed_labels.end());
    w.begin_table("overlaps", columns);
    for (Eigen::Index i = 0; i < report.overlaps.rows(); ++i) {
        std::vector<std::string> cells = {std::to_string(i)};
        for (Eigen::Index s = 0; s < report.overlaps.cols(); ++s)
            cells.push_back(format_complex(report.overlaps(i, s)));
        w.row(cells);
    }
    w.end_table();

    w.begin_table("clusters", {"cluster", "size", "members", "reachable"});
    for (std::size_t c = 0; c < report.clusters.size(); ++c) {
        const DegeneracyCluster& cluster = report.clusters[c];
        std::string members;
        for (std::size_t k = 0; k < cluster.members.size(); ++k) {
            if (k)
                members += ' ';
            members += std::to_string(cluster.members[k]);
        }
        int reachable = 0;
        for (const Eigen::MatrixXcd& op : cluster.reachable)
            if (op.norm() > 1e-12)
                ++reachable;
        w.row({std::to_string(c), std::to_string(static_cast<int>(cluster.members.size())),
               members, std::to_string(reachable)});
    }
    w.end_table();
    return w.str();
}

} // namespace tqst
