#pragma once

// Replay controller for simulated access points.
//
// Every period the controller activates stations per the trace, lets the
// channel run for one period under the current window assignment, collects
// per-AP throughput, asks the policy for the next window and records the
// period. A window decided from period t is first enforced in period t + 1.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cwtune/mac_sim.hpp"
#include "cwtune/online_learner.hpp"
#include "cwtune/workload.hpp"

namespace cwtune::control {

inline constexpr int kRunLogSchemaVersion = 1;
/// Default cw_min used by the closed-form policy.
inline constexpr int kAbaCwMin = 15;

struct PolicySpec {
    enum class Kind { Beb, Fixed, Aba, Mlba };

    Kind kind = Kind::Beb;
    int fixed_cw = 15;
    learner::EstimatorKind estimator = learner::EstimatorKind::LR;

    /// Accepts BEB, ABA, FixedCW(<w>), MLBA-LR, MLBA-NB, MLBA-DNN.
    static PolicySpec parse(const std::string& text);
    std::string label() const;

    friend bool operator==(const PolicySpec&, const PolicySpec&) = default;
};

struct SimulatedAp {
    int id = 0;
    std::vector<std::size_t> stations;
    int cw_min = 15;
    int cw_max = 63;
    bool controlled = true;
};

/// One AP per simulated station; the first `controlled` APs take part in
/// window control, the rest stay on BEB(15, 63).
std::vector<SimulatedAp> make_aps(int n, int controlled);

struct ApLoad {
    int id = 0;
    double tp_bps = 0.0;
    bool active = false;

    friend bool operator==(const ApLoad&, const ApLoad&) = default;
};

struct PeriodStats {
    int actives = 0;
    double aggregate_tp_bps = 0.0;
    std::vector<ApLoad> per_ap;

    friend bool operator==(const PeriodStats&, const PeriodStats&) = default;
};

/// An AP counts as active when it delivered any bits in the period.
PeriodStats collect_stats(const std::vector<SimulatedAp>& aps, const mac::PeriodMetrics& metrics);

/// Sets (cw, cw) on every controlled AP. Rejects an out-of-range window with
/// std::out_of_range before touching any AP. Returns the number changed.
std::size_t set_cw_all(std::vector<SimulatedAp>& aps, int cw);

struct ControllerConfig {
    int period_s = 1;
    PolicySpec policy;
    learner::LearnerConfig learner;
    mac::SimConfig sim;
    /// Trace CSV; empty means a synthetic trace from `synthetic`.
    std::string trace_path;
    workload::GenParams synthetic;
    std::string output_path;
    std::string bind = "127.0.0.1:8080";
    /// Number of controlled APs; negative means all.
    int controlled_aps = -1;
    /// Cap each station's period at its trace volume. Off by default: active
    /// stations are saturated.
    bool replay_volumes = false;
    std::uint64_t seed = 1;

    void validate() const;
};

void to_json(nlohmann::json& j, const ControllerConfig& c);
void from_json(const nlohmann::json& j, ControllerConfig& c);
ControllerConfig load_controller_config(const std::filesystem::path& path);

/// Trace named by the config, or the synthetic one.
workload::Trace resolve_trace(const ControllerConfig& config);

struct PeriodRecord {
    std::int64_t period = 0;
    std::int64_t timestamp = 0;
    int actives = 0;
    std::vector<double> ap_tp_bps;
    double aggregate_tp_bps = 0.0;
    double median_latency_us = 0.0;
    int cwenf = 0;
    /// calibration | explore | predict | static | override
    std::string decision;
    double retry_fraction = 0.0;

    friend bool operator==(const PeriodRecord&, const PeriodRecord&) = default;
};

void to_json(nlohmann::json& j, const PeriodRecord& r);

struct RunLog {
    nlohmann::json config;
    std::vector<PeriodRecord> records;
    nlohmann::json model;
    /// Trace too short to leave the learner's calibration phase.
    bool calibration_only = false;

    std::vector<double> aggregate_series() const;
    /// Header line, one line per period, closing model line.
    std::string to_ndjson() const;
    void write(const std::filesystem::path& path) const;
};

class Controller {
public:
    Controller(ControllerConfig config, workload::Trace trace);

    bool done() const noexcept;
    std::int64_t periods_total() const noexcept;
    /// Runs one period. Throws std::logic_error once the trace is exhausted.
    const PeriodRecord& step();
    /// Runs the remaining periods and returns the complete log.
    RunLog run();
    RunLog log() const;

    /// One-shot window override applied at the next period boundary. Throws
    /// std::out_of_range for a window outside [1, 1023]. Thread-safe.
    void request_cw(int cw);

    /// Throws std::logic_error before the first period.
    PeriodStats last_stats() const;

    // Thread-safe JSON views for the status surface.
    nlohmann::json status_json() const;
    nlohmann::json load_json() const;
    nlohmann::json metrics_json() const;

    const std::vector<SimulatedAp>& aps() const noexcept { return aps_; }
    const ControllerConfig& config() const noexcept { return config_; }
    const learner::OnlineLearner* learner() const noexcept { return learner_.get(); }

private:
    std::vector<bool> period_activity(std::int64_t period) const;
    std::vector<double> period_bits(std::int64_t period) const;
    void apply_assignment(int cw);
    void decide_next(const PeriodStats& stats);
    void publish(const mac::PeriodMetrics& metrics);

    ControllerConfig config_;
    workload::Trace trace_;
    std::vector<SimulatedAp> aps_;
    std::unique_ptr<mac::Channel> channel_;
    std::unique_ptr<learner::OnlineLearner> learner_;

    std::int64_t period_ = 0;
    int next_cw_ = 15;
    std::string next_kind_ = "static";
    learner::Choice next_choice_;
    double tplast_ = 0.0;
    std::vector<PeriodRecord> records_;
    std::optional<PeriodStats> last_stats_;

    mutable std::mutex mutex_;
    std::optional<int> pending_cw_;
    nlohmann::json status_;
    nlohmann::json load_;
    nlohmann::json metrics_;
};

/// Convenience wrapper: resolve, construct and run to completion.
RunLog run_replay(const ControllerConfig& config, const workload::Trace& trace);

} // namespace cwtune::control
