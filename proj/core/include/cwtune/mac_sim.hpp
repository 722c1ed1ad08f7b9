#pragma once

// Slotted CSMA/CA contention simulator.
//
// Time advances in backoff slots. A station whose backoff counter is zero
// transmits; a lone transmitter succeeds and occupies the medium for
// frame_slots + success_overhead_slots, two or more transmitters collide and
// occupy it for the configured collision cost. Counters only decrement on
// idle slots (they freeze while the medium is busy).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cwtune/rng.hpp"

namespace cwtune::mac {

inline constexpr int kMinCw = 1;
inline constexpr int kMaxCw = 1023;

inline constexpr bool valid_cw(int cw) noexcept { return cw >= kMinCw && cw <= kMaxCw; }

struct SimConfig {
    int n_stations = 8;
    double slot_us = 9.0;
    int frame_slots = 50;
    int collision_slots_rtscts = 4;
    int collision_slots_basic = 50;
    int success_overhead_slots = 6;
    bool rtscts_enabled = false;
    double payload_bits_per_frame = 150000.0;
    int max_retries = 7;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument on a violated invariant.
    void validate() const;

    int success_slots() const noexcept { return frame_slots + success_overhead_slots; }
    int collision_slots() const noexcept
    {
        return rtscts_enabled ? collision_slots_rtscts : collision_slots_basic;
    }
    /// Slots in `seconds` of simulated time.
    std::int64_t slots_per(double seconds) const;
};

void to_json(nlohmann::json& j, const SimConfig& c);
void from_json(const nlohmann::json& j, SimConfig& c);

struct BackoffPolicy {
    enum class Kind { Beb, Fixed };

    Kind kind = Kind::Beb;
    int cw_min = 15;
    int cw_max = 63;

    static BackoffPolicy beb(int cw_min, int cw_max);
    static BackoffPolicy fixed(int cw);

    bool is_fixed() const noexcept { return kind == Kind::Fixed; }
    std::string label() const;

    friend bool operator==(const BackoffPolicy&, const BackoffPolicy&) = default;
};

/// Default best-effort EDCA tuple.
inline BackoffPolicy default_beb() { return BackoffPolicy::beb(15, 63); }

struct StationStats {
    std::int64_t attempts = 0;
    std::int64_t retry_attempts = 0;
    std::int64_t frames_ok = 0;
    std::int64_t frames_collided = 0;
    std::int64_t frames_dropped = 0;
    std::int64_t eligible_slots = 0;
    double bits_delivered = 0.0;
    std::vector<double> latency_us;
};

struct StationState {
    int id = 0;
    BackoffPolicy policy = default_beb();
    int current_cw = 15;
    std::int64_t backoff_counter = 0;
    bool active = true;
    int retries = 0;
    std::int64_t head_of_line_age = 0;
    /// Remaining bits this station may deliver; unset means saturated.
    std::optional<double> budget_bits;
    StationStats stats;

    bool contending() const noexcept
    {
        return active && (!budget_bits || *budget_bits > 0.0);
    }
};

struct StationPeriod {
    double tp_bps = 0.0;
    double bits = 0.0;
    std::int64_t attempts = 0;
    std::int64_t retry_attempts = 0;
    std::int64_t successes = 0;
    std::int64_t collisions = 0;
    std::int64_t drops = 0;
    std::int64_t eligible_slots = 0;

    friend bool operator==(const StationPeriod&, const StationPeriod&) = default;
};

struct PeriodMetrics {
    std::vector<double> per_station_tp_bps;
    std::vector<StationPeriod> per_station;
    double aggregate_tp_bps = 0.0;
    double median_latency_us = 0.0;
    double retry_fraction = 0.0;
    std::int64_t attempts = 0;
    std::int64_t successes = 0;
    /// Collision events (each involves two or more attempts).
    std::int64_t collisions = 0;
    std::int64_t drops = 0;
    std::int64_t busy_slots = 0;
    std::int64_t idle_slots = 0;
    std::int64_t duration_slots = 0;
    /// Latency samples of the period, in microseconds.
    std::vector<double> latency_us;

    friend bool operator==(const PeriodMetrics&, const PeriodMetrics&) = default;
};

/// Uniform draw on [0, cw]. Throws std::domain_error unless 1 <= cw <= 1023.
std::int64_t sample_backoff(int cw, Rng& rng);

enum class Outcome { Success, Failure };

/// BEB window update: failure doubles along the 2^k-1 ladder (2cw+1) up to
/// cw_max, success resets to cw_min.
int beb_next_cw(int current_cw, Outcome outcome, int cw_min, int cw_max);

/// Builds `n` saturated, active stations sharing one policy.
std::vector<StationState> make_stations(int n, const BackoffPolicy& policy);

/// Stateful medium: owns the stations and the random stream so that
/// consecutive periods continue where the previous one stopped. A busy
/// interval that crosses a period boundary is carried into the next period.
class Channel {
public:
    Channel(SimConfig config, std::vector<StationState> stations);

    PeriodMetrics run(std::int64_t duration_slots);

    const SimConfig& config() const noexcept { return config_; }
    const std::vector<StationState>& stations() const noexcept { return stations_; }

    /// Replaces a station's policy at a period boundary: the window resets to
    /// the new cw_min and the counter is redrawn.
    void set_policy(std::size_t station, const BackoffPolicy& policy);
    /// Toggling a station on starts a fresh head-of-line frame.
    void set_active(std::size_t station, bool active);
    void set_budget(std::size_t station, std::optional<double> bits);

private:
    void redraw(StationState& s);
    void on_success(StationState& s);
    void on_collision(StationState& s);

    SimConfig config_;
    std::vector<StationState> stations_;
    Rng rng_;
    std::int64_t carry_busy_ = 0;
};

/// One-shot period from a fresh random stream seeded by config.seed.
PeriodMetrics simulate_period(const SimConfig& config, std::vector<StationState>& stations,
                              std::int64_t duration_slots);

/// attempts / contention-eligible slots (idle slots spent contending plus own
/// attempts). Throws std::domain_error when the station had no eligible slot.
double measured_attempt_probability(const PeriodMetrics& metrics, std::size_t station);

double median(std::vector<double> values);

} // namespace cwtune::mac
