// scenario.hpp — Scenario configs, measurement pipelines, and the command-line driver

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tqst/estimation.hpp"
#include "tqst/transport.hpp"

namespace tqst {

enum class GridSpacing { linear, log };

struct TimeGrid {
    double t_start{0.0};
    double t_end{10.0};
    int n_points{101};
    GridSpacing spacing{GridSpacing::linear};

    // Validating expansion; log spacing needs t_start > 0, a single-point grid
    // needs t_start == t_end.
    std::vector<double> times() const;
};

enum class PipelineMode { exact, noisy };

// White Gaussian noise on each sampled transport trace: a grid point averages
// samples_per_point draws of standard deviation current_std, so the recorded
// value carries current_std/sqrt(samples_per_point). Deliberately the simplest
// measurement model; correlated or non-Gaussian detector noise is out of scope.
struct NoiseSpec {
    double current_std{0.0};
    long long samples_per_point{1};
    std::uint64_t seed{0};
};

enum class ReconstructMode {
    automatic,  // steady for a single-row derivative-free table, else trajectory
    trajectory, // reconstruct at every grid time from derivatives
    steady,     // currents only, at the last grid time
};

struct EstimationSpec {
    EstimationCase declared_case{EstimationCase::general};
    std::vector<double> probe_times;   // empty: log-spaced schedule
    std::optional<double> gamma_tilde; // supplied total width, when known
};

struct ScenarioConfig {
    SystemConfig system;
    std::string initial_state{"ground"}; // named state or "matrix"
    Eigen::MatrixXcd initial_matrix;     // used when initial_state == "matrix"
    TimeGrid time_grid;
    PipelineMode pipeline{PipelineMode::exact};
    NoiseSpec noise;
    EstimationSpec estimation;
    ReconstructMode reconstruct_mode{ReconstructMode::automatic};
    std::string transport_csv;        // reconstruct from this file instead of simulating
    std::vector<std::string> outputs; // artifact stems to keep, empty = all

    DensityOperator initial_density() const;

    // Strict JSON parsing: unknown keys anywhere are config errors, as are
    // type mismatches and explicit matrices failing density-operator validation.
    static ScenarioConfig from_json_text(const std::string& text);
    static ScenarioConfig from_json_file(const std::string& path);
};

// Sliding-window local-polynomial fits, the classic smoothing-filter route to
// derivatives of a noisy trace. Every grid point gets a least-squares polynomial
// over a window of neighbours (shifted, never shrunk, at the edges); the fitted
// polynomial's derivatives at the point are the estimates. Non-uniform grids are
// handled by fitting in the shifted time variable.
struct DerivativeEstimate {
    std::vector<std::array<double, 4>> derivatives;   // orders 0..3 per grid point
    std::vector<std::array<double, 4>> variance_gain; // output var per unit input var
};

struct NoisyDerivativeEstimator {
    int window{9};     // odd, at least 5, larger than poly_order
    int poly_order{3}; // 3 or 4; third derivatives need at least a cubic

    DerivativeEstimate fit(const std::vector<double>& times,
                           const std::vector<double>& values) const;
};

// One simulated scenario, ready for the runners: the measured record (exact, or
// noisy with window-fit derivatives), the exact reference, and the exact states.
// Internal currents are diagnostics rather than lead measurements and pass
// through the noisy pipeline unchanged. All randomness comes from one seed,
// split into an independent stream per grid point in a fixed draw order.
struct PipelineResult {
    TransportRecord record;              // what the runners consume
    TransportRecord truth;               // exact reference at the same times
    std::vector<DensityOperator> states; // exact evolved states, one per time
    bool noisy{false};
    std::vector<std::array<double, 4>> sigma_l; // std estimate per derivative order
    std::vector<std::array<double, 4>> sigma_r;
    std::vector<double> sigma_s;                // std estimate of the smoothed S_LR
};

PipelineResult run_pipeline(const ScenarioConfig& config);

// Reader for externally supplied transport tables. Column names must come from
// the writer's header set; reconstruction modes report missing required columns
// by name.
struct TransportTable {
    TransportRecord record;
    std::vector<std::string> columns;

    bool has(const std::string& name) const;
};

TransportTable parse_transport_csv(const std::string& text);
TransportTable read_transport_csv(const std::string& path);

// A runner's outputs: file name (within the output directory) plus content.
struct Artifact {
    std::string name;
    std::string content;
};

// Subcommand runners. Each accepts the output format it treats as secondary:
// simulate and concurrence always emit their CSV artifacts and add a report
// under "report"; reconstruct, estimate, and analyze always emit their report
// artifacts and add a CSV view under "csv".
std::vector<Artifact> run_simulate(const ScenarioConfig& config,
                                   const std::string& format = "csv");
std::vector<Artifact> run_reconstruct(const ScenarioConfig& config,
                                      const std::string& format = "report");
std::vector<Artifact> run_estimate(const ScenarioConfig& config,
                                   const std::string& format = "report");
std::vector<Artifact> run_analyze(const ScenarioConfig& config,
                                  const std::string& format = "report");
std::vector<Artifact> run_concurrence(const ScenarioConfig& config,
                                      const std::string& format = "csv");

// Creates the directory if needed and writes every artifact, throwing IoError
// on filesystem failures.
void write_artifacts(const std::vector<Artifact>& artifacts, const std::string& out_dir);

// Full command-line driver (arguments without the program name). Returns 0 on
// success, 1 for config problems, 2 for numeric failures, 3 for I/O failures.
int cli_main(const std::vector<std::string>& args);

} // namespace tqst
