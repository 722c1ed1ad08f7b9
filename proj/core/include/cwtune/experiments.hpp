#pragma once

// Experiment harness: window sweeps, exhaustive calibration, training-speed
// simulation, longitudinal policy comparison and the statistics they report.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cwtune/controller.hpp"
#include "cwtune/mac_sim.hpp"
#include "cwtune/online_learner.hpp"
#include "cwtune/workload.hpp"

namespace cwtune::bench {

/// (sum x)^2 / (n sum x^2). Throws std::invalid_argument on empty input and
/// std::domain_error on negative or all-zero input.
double jain_index(std::span<const double> throughputs);

struct AvgSigl {
    double avg_pct = 0.0;
    int sigl = 0;
    /// Periods dropped because the reference value was zero.
    std::size_t excluded = 0;
    bool flagged = false;
};

/// avg_pct = mean of 100 (a - b) / b; sigl = percentage of periods with
/// a <= b rounded up to a multiple of 5. Periods with b == 0 are excluded and
/// flagged. Throws std::invalid_argument on a length mismatch and
/// std::domain_error when no period is comparable.
AvgSigl avg_sigl(std::span<const double> a, std::span<const double> b);

/// Mean and half-width of the 95% normal band, mean +- 1.96 sd / sqrt(n).
std::pair<double, double> normal_band(std::span<const double> values);

// ------------------------------------------------------------------- sweep

struct SweepSpec {
    std::vector<int> n_aps{2, 4, 8};
    std::vector<int> cw_grid{1, 3, 7, 15, 31, 63, 127, 255, 511, 1023};
    int repetitions = 3;
    double burst_s = 10.0;
    bool rtscts = false;
    /// Share of stations that take the swept window; the rest keep BEB(15, 63).
    double controlled_fraction = 1.0;
    bool include_beb_baselines = true;
    mac::SimConfig sim;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SweepCell {
    int n = 0;
    std::string policy;
    /// Swept window; 0 for the BEB baselines.
    int cw = 0;
    int controlled = 0;
    double median_tp_bps = 0.0;
    double median_latency_us = 0.0;
    double retry_fraction = 0.0;
    double jain = 0.0;
    std::vector<double> rep_tp_bps;
};

/// Medians over repetitions per (n, policy) cell. Repetition r of every cell
/// with the same n shares one random stream.
std::vector<SweepCell> opportunity_sweep(const SweepSpec& spec);
std::string sweep_csv(const std::vector<SweepCell>& cells);

// ------------------------------------------------------------- calibration

struct CalibrationRow {
    std::int64_t period = 0;
    int actives = 0;
    /// Oracle throughput of the previous period (0 for the first).
    double tplast = 0.0;
    std::vector<double> tp_by_cw;
    double tp_beb = 0.0;
    int aba_cw = 1;
    double tp_aba = 0.0;
    int cwopt = 1;
    double tpopt = 0.0;
};

struct CalibrationData {
    std::vector<int> cw_grid;
    std::vector<CalibrationRow> rows;

    std::size_t index_of(int cw) const;
    std::string csv() const;
};

/// Every period is simulated once per grid window (and for BEB and ABA) from
/// the same seed and station activity. cwopt is the argmax, ties toward the
/// smaller window. ABA sees the previous period's actives. With
/// `replay_volumes` each station delivers at most its trace volume.
CalibrationData exhaustive_calibration(const workload::Trace& trace, const std::vector<int>& cw_grid,
                                       const mac::SimConfig& sim, std::uint64_t seed,
                                       bool replay_volumes = false);

/// R^2 of ln(cwopt) and of cwopt regressed on raw (actives, tplast).
struct FitComparison {
    double r2_log = 0.0;
    double r2_linear = 0.0;
    models::ModelCoefficients log_fit;
    std::size_t rows = 0;
};
FitComparison compare_log_fit(const CalibrationData& data);

// ---------------------------------------------------------- training speed

struct TrainSpeedPoint {
    std::string algorithm;
    int train_s = 0;
    /// Achieved / oracle throughput over the periods after warmup.
    double ratio = 0.0;
};

/// Algorithms: OPT, BEB, ABA, MLBA-LR, MLBA-NB, MLBA-DNN. MLBA runs pick
/// uniform random grid windows for train_s periods, then predict (with
/// exploration and online refits) through the rest of the data.
std::vector<TrainSpeedPoint> training_speed_sim(const CalibrationData& data,
                                                const std::vector<std::string>& algorithms,
                                                const std::vector<int>& train_times,
                                                const learner::LearnerConfig& config,
                                                std::uint64_t seed);
std::string trainspeed_csv(const std::vector<TrainSpeedPoint>& points);

// ------------------------------------------------------------ longitudinal

struct Window {
    std::size_t begin = 0;
    std::size_t length = 0;
};

struct ComparisonResult {
    std::vector<std::string> algorithms;
    std::vector<Window> windows;
    /// series[alg][window][t], aggregate bits/s per period.
    std::vector<std::vector<std::vector<double>>> series;
    /// avg[a][b] = Avg(a > b): equal-weight mean of the per-window values.
    std::vector<std::vector<double>> avg;
    /// sigl[a][b] over all windows' periods pooled.
    std::vector<std::vector<int>> sigl;
    std::vector<std::vector<std::vector<double>>> window_avg;
    std::vector<std::vector<std::vector<int>>> window_sigl;
    /// Median aggregate throughput per algorithm over all periods.
    std::vector<double> medians;
    /// Mean actives per window.
    std::vector<double> window_actives;

    std::size_t index_of(const std::string& algorithm) const;
    std::string csv() const;
    std::string series_ndjson() const;
};

/// Replays each window once per algorithm with matched seeds.
ComparisonResult longitudinal_benchmark(const workload::Trace& trace,
                                        const std::vector<Window>& windows,
                                        const std::vector<std::string>& algorithms,
                                        const control::ControllerConfig& base);

/// Learner benchmark scenario: saturated 802.11ac stations sending 64 KiB
/// aggregates (about 1.2 ms, 134 slots, at 433 Mb/s) without RTS/CTS, so a
/// collision costs a full frame.
control::ControllerConfig bench_scenario();

/// Windows of `length` seconds starting at the first second of each block of
/// `stride` seconds after `skip`.
std::vector<Window> strided_windows(std::size_t trace_seconds, std::size_t skip, std::size_t stride,
                                    std::size_t length, std::size_t count);

} // namespace cwtune::bench
