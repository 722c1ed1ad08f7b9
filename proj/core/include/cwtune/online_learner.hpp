#pragma once

// Online contention-window learner.
//
// Each period the learner is asked for the window to enforce next. It keeps a
// bounded history of (tplast, actives, cwenf, tp) observations split into a
// calibration and a predicted FIFO, folds them into a per-level best-window
// table and refits the configured estimator on that table.

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cwtune/backoff_models.hpp"
#include "cwtune/rng.hpp"

namespace cwtune::learner {

using models::Levels;
using models::QuantScheme;

enum class ObsKind { Calibration, Predicted };
enum class DecisionKind { Calibration, Explore, Predict };
enum class EstimatorKind { LR, NB, DNN };

std::string to_string(ObsKind k);
std::string to_string(DecisionKind k);
std::string to_string(EstimatorKind k);
/// Accepts "LR", "NB", "DNN" (case-insensitive). Throws std::invalid_argument.
EstimatorKind parse_estimator(const std::string& name);

struct Observation {
    double tplast = 0.0;
    int actives = 0;
    int cwenf = 15;
    double tp = 0.0;
    ObsKind kind = ObsKind::Calibration;
    /// Period in which cwenf was enforced; drives age-based eviction.
    std::int64_t period = 0;

    /// Throws std::invalid_argument on a window outside [1, 1023] or a
    /// negative throughput.
    void validate() const;

    friend bool operator==(const Observation&, const Observation&) = default;
};

class CwObsQueue {
public:
    explicit CwObsQueue(std::size_t capacity = 600);

    /// Appends to the FIFO matching obs.kind, evicting its oldest entry when
    /// full.
    void record(const Observation& obs);
    /// Drops every observation enforced before `period`.
    void evict_before(std::int64_t period);

    const std::deque<Observation>& calibration() const noexcept { return calib_; }
    const std::deque<Observation>& predicted() const noexcept { return pred_; }
    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return calib_.size() + pred_.size(); }
    bool empty() const noexcept { return size() == 0; }
    std::size_t distinct_windows() const;
    /// Calibration entries followed by predicted ones, each oldest first.
    std::vector<Observation> all() const;

private:
    std::size_t capacity_;
    std::deque<Observation> calib_;
    std::deque<Observation> pred_;
};

struct CwMaxEntry {
    Levels key;
    double mtp = 0.0;
    int cwopt = 1;

    friend bool operator==(const CwMaxEntry&, const CwMaxEntry&) = default;
};

struct CwMaxTable {
    /// Scheme with tlevel boundaries recomputed from the folded observations.
    QuantScheme scheme;
    /// Sorted by key.
    std::vector<CwMaxEntry> entries;

    bool empty() const noexcept { return entries.empty(); }
    std::size_t size() const noexcept { return entries.size(); }
    const CwMaxEntry* find(Levels key) const;

    friend bool operator==(const CwMaxTable&, const CwMaxTable&) = default;
};

/// Keys each observation on (alevel of actives, tlevel of tplast) and keeps
/// the highest tp per key, ties toward the smaller window. tlevel boundaries
/// are the percentiles of the folded tplast values. Order-independent.
CwMaxTable rebuild_cwmax(std::span<const Observation> observations, const QuantScheme& base);
CwMaxTable rebuild_cwmax(const CwObsQueue& queue, const QuantScheme& base);

/// Training rows (alevel, tlevel, cwopt) of a table.
std::vector<models::TrainingSample> table_samples(const CwMaxTable& table);

struct LearnerConfig {
    int history_s = 600;
    double explore_prob = 0.01;
    int calibration_period_s = 30;
    int period_s = 1;
    std::vector<int> cw_grid{1, 3, 7, 15, 31, 63, 127, 255, 511, 1023};
    EstimatorKind estimator = EstimatorKind::LR;
    QuantScheme quant;
    int dnn_epochs = 400;
    std::size_t dnn_batch = 4;

    void validate() const;
    int history_periods() const noexcept { return history_s / period_s; }
    int calibration_periods() const noexcept { return calibration_period_s / period_s; }
};

void to_json(nlohmann::json& j, const LearnerConfig& c);
void from_json(const nlohmann::json& j, LearnerConfig& c);

/// Immutable fitted model handed to readers.
struct ModelSnapshot {
    EstimatorKind kind = EstimatorKind::LR;
    bool fitted = false;
    bool degenerate = false;
    std::size_t training_rows = 0;
    QuantScheme scheme;
    models::ModelCoefficients lr;
    models::NbModel nb;
    std::optional<models::DnnParams> dnn;

    /// Throws std::logic_error when not fitted.
    int predict(Levels levels) const;
};

void to_json(nlohmann::json& j, const ModelSnapshot& s);

struct Choice {
    int cw = 1;
    DecisionKind kind = DecisionKind::Calibration;
    /// Prediction was requested but no model was available.
    bool fallback = false;
};

class OnlineLearner {
public:
    OnlineLearner(LearnerConfig config, std::uint64_t seed);

    /// Decides the window for the next period from the features observed in
    /// the period that just ended. Exactly one call per period.
    Choice next_cw(int observed_actives, double observed_tp);
    Choice next_cw(int observed_actives, double observed_tp, Rng& rng);

    /// Files an outcome, applies the history bound and refits.
    void record(const Observation& obs);
    /// Convenience: records the outcome of a decision returned by next_cw.
    void record_outcome(const Choice& choice, double tplast, int actives, double tp);

    /// Refits on the current table. A no-op when the table is unchanged.
    void refit();

    std::shared_ptr<const ModelSnapshot> snapshot() const;
    const CwObsQueue& queue() const noexcept { return queue_; }
    const CwMaxTable& table() const noexcept { return table_; }
    const LearnerConfig& config() const noexcept { return config_; }
    /// Number of decisions taken so far.
    std::int64_t periods() const noexcept { return period_; }
    std::optional<DecisionKind> last_decision() const noexcept { return last_; }
    std::int64_t fallbacks() const noexcept { return fallbacks_; }

    nlohmann::json state_json() const;

private:
    int calibration_step();

    LearnerConfig config_;
    std::uint64_t seed_;
    Rng rng_;
    CwObsQueue queue_;
    CwMaxTable table_;
    std::optional<CwMaxTable> fitted_table_;
    std::int64_t period_ = 0;
    std::size_t rr_index_ = 0;
    std::int64_t fitted_count_ = 0;
    std::int64_t fallbacks_ = 0;
    std::optional<DecisionKind> last_;

    mutable std::mutex snapshot_mutex_;
    std::shared_ptr<const ModelSnapshot> snapshot_;
};

} // namespace cwtune::learner
