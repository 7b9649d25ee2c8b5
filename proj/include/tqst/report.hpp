// report.hpp — Machine-readable key-value and table serialization of results

#pragma once

#include <string>
#include <vector>

#include "tqst/entangle.hpp"
#include "tqst/estimation.hpp"
#include "tqst/krylov.hpp"
#include "tqst/qst.hpp"

namespace tqst {

// Report files are line oriented. Scalar facts appear as `key = value` pairs in
// emission order; tabular facts sit between `[table name]` and `[/table]` with a
// comma-separated header row; complex matrices between `[matrix]` and
// `[/matrix]` as rows of re+imi entries. Floats always carry 17 significant
// digits so a reader can round-trip them exactly.
std::string format_double(double value);
std::string format_complex(std::complex<double> value);

class ReportWriter {
public:
    void add(const std::string& key, const std::string& value);
    void add(const std::string& key, const char* value);
    void add(const std::string& key, double value);
    void add(const std::string& key, int value);
    void add(const std::string& key, bool value);

    void begin_table(const std::string& name, const std::vector<std::string>& columns);
    void row(const std::vector<std::string>& cells);
    void end_table();

    void matrix_block(const Eigen::MatrixXcd& m);

    const std::string& str() const { return text_; }

private:
    std::string text_;
    bool in_table_{false};
    std::size_t columns_{0};
};

// Names used in report and CSV cells.
std::string to_string(ElementStatus status);
std::string to_string(Membership membership);
std::string to_string(EstimationCase declared_case);
std::string to_string(ConcurrenceMethod method);
std::string to_string(ConcurrenceBranch branch);

// One self-contained report per result type; each opens with a `type =` line.
std::string to_report(const ReconstructedState& state);
std::string to_report(const EstimationResult& result);
std::string to_report(const ConcurrenceResult& result);
std::string to_report(const CompletenessReport& report);
std::string to_report(const SpectralReport& report);

} // namespace tqst
