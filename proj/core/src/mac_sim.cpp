#include "cwtune/mac_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cwtune::mac {

void SimConfig::validate() const
{
    if (n_stations < 1) {
        throw std::invalid_argument("SimConfig: n_stations must be >= 1");
    }
    if (!(slot_us > 0.0)) {
        throw std::invalid_argument("SimConfig: slot_us must be > 0");
    }
    if (frame_slots < 1) {
        throw std::invalid_argument("SimConfig: frame_slots must be >= 1");
    }
    if (collision_slots_rtscts < 1 || collision_slots_rtscts > collision_slots_basic) {
        throw std::invalid_argument(
            "SimConfig: need 1 <= collision_slots_rtscts <= collision_slots_basic");
    }
    if (success_overhead_slots < 0) {
        throw std::invalid_argument("SimConfig: success_overhead_slots must be >= 0");
    }
    if (!(payload_bits_per_frame > 0.0)) {
        throw std::invalid_argument("SimConfig: payload_bits_per_frame must be > 0");
    }
    if (max_retries < 0) {
        throw std::invalid_argument("SimConfig: max_retries must be >= 0");
    }
}

std::int64_t SimConfig::slots_per(double seconds) const
{
    return static_cast<std::int64_t>(std::llround(seconds * 1e6 / slot_us));
}

void to_json(nlohmann::json& j, const SimConfig& c)
{
    j = nlohmann::json{{"n_stations", c.n_stations},
                       {"slot_us", c.slot_us},
                       {"frame_slots", c.frame_slots},
                       {"collision_slots_rtscts", c.collision_slots_rtscts},
                       {"collision_slots_basic", c.collision_slots_basic},
                       {"success_overhead_slots", c.success_overhead_slots},
                       {"rtscts_enabled", c.rtscts_enabled},
                       {"payload_bits_per_frame", c.payload_bits_per_frame},
                       {"max_retries", c.max_retries},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SimConfig& c)
{
    SimConfig d;
    c.n_stations = j.value("n_stations", d.n_stations);
    c.slot_us = j.value("slot_us", d.slot_us);
    c.frame_slots = j.value("frame_slots", d.frame_slots);
    c.collision_slots_rtscts = j.value("collision_slots_rtscts", d.collision_slots_rtscts);
    c.collision_slots_basic = j.value("collision_slots_basic", d.collision_slots_basic);
    c.success_overhead_slots = j.value("success_overhead_slots", d.success_overhead_slots);
    c.rtscts_enabled = j.value("rtscts_enabled", d.rtscts_enabled);
    c.payload_bits_per_frame = j.value("payload_bits_per_frame", d.payload_bits_per_frame);
    c.max_retries = j.value("max_retries", d.max_retries);
    c.seed = j.value("seed", d.seed);
}

BackoffPolicy BackoffPolicy::beb(int cw_min, int cw_max)
{
    if (!valid_cw(cw_min) || !valid_cw(cw_max) || cw_min > cw_max) {
        throw std::domain_error("BEB window must satisfy 1 <= cw_min <= cw_max <= 1023");
    }
    return {Kind::Beb, cw_min, cw_max};
}

BackoffPolicy BackoffPolicy::fixed(int cw)
{
    if (!valid_cw(cw)) {
        throw std::domain_error("fixed CW must lie in [1, 1023]");
    }
    return {Kind::Fixed, cw, cw};
}

std::string BackoffPolicy::label() const
{
    if (is_fixed()) {
        return "fixed(" + std::to_string(cw_min) + ")";
    }
    return "beb(" + std::to_string(cw_min) + "," + std::to_string(cw_max) + ")";
}

std::int64_t sample_backoff(int cw, Rng& rng)
{
    if (!valid_cw(cw)) {
        throw std::domain_error("sample_backoff: cw must lie in [1, 1023], got " +
                                std::to_string(cw));
    }
    return uniform_int(rng, 0, cw);
}

int beb_next_cw(int current_cw, Outcome outcome, int cw_min, int cw_max)
{
    if (!valid_cw(cw_min) || !valid_cw(cw_max) || cw_min > cw_max || current_cw < cw_min ||
        current_cw > cw_max) {
        throw std::domain_error("beb_next_cw: need cw_min <= current_cw <= cw_max");
    }
    if (outcome == Outcome::Success) {
        return cw_min;
    }
    return std::min(2 * current_cw + 1, cw_max);
}

std::vector<StationState> make_stations(int n, const BackoffPolicy& policy)
{
    std::vector<StationState> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto& s = out[static_cast<std::size_t>(i)];
        s.id = i;
        s.policy = policy;
        s.current_cw = policy.cw_min;
    }
    return out;
}

Channel::Channel(SimConfig config, std::vector<StationState> stations)
    : config_(config), stations_(std::move(stations)), rng_(config.seed)
{
    config_.validate();
    if (stations_.empty()) {
        throw std::domain_error("Channel: station list is empty");
    }
    for (auto& s : stations_) {
        (void)BackoffPolicy::beb(s.policy.cw_min, s.policy.cw_max);
        s.current_cw = std::clamp(s.current_cw, s.policy.cw_min, s.policy.cw_max);
        redraw(s);
    }
}

void Channel::redraw(StationState& s)
{
    s.backoff_counter = sample_backoff(s.current_cw, rng_);
}

void Channel::set_policy(std::size_t station, const BackoffPolicy& policy)
{
    auto& s = stations_.at(station);
    if (policy.is_fixed()) {
        (void)BackoffPolicy::fixed(policy.cw_min);
    } else {
        (void)BackoffPolicy::beb(policy.cw_min, policy.cw_max);
    }
    if (s.policy == policy) {
        return;
    }
    s.policy = policy;
    s.current_cw = policy.cw_min;
    redraw(s);
}

void Channel::set_active(std::size_t station, bool active)
{
    auto& s = stations_.at(station);
    if (active && !s.active) {
        s.head_of_line_age = 0;
        s.retries = 0;
        s.current_cw = s.policy.cw_min;
        redraw(s);
    }
    s.active = active;
}

void Channel::set_budget(std::size_t station, std::optional<double> bits)
{
    stations_.at(station).budget_bits = bits;
}

void Channel::on_success(StationState& s)
{
    double bits = config_.payload_bits_per_frame;
    if (s.budget_bits) {
        bits = std::min(bits, *s.budget_bits);
        *s.budget_bits -= bits;
    }
    s.stats.frames_ok += 1;
    s.stats.bits_delivered += bits;
    s.stats.latency_us.push_back(static_cast<double>(s.head_of_line_age) * config_.slot_us);
    s.head_of_line_age = 0;
    s.retries = 0;
    if (!s.policy.is_fixed()) {
        s.current_cw = beb_next_cw(s.current_cw, Outcome::Success, s.policy.cw_min,
                                   s.policy.cw_max);
    }
    redraw(s);
}

void Channel::on_collision(StationState& s)
{
    s.stats.frames_collided += 1;
    s.retries += 1;
    if (s.retries > config_.max_retries) {
        s.stats.frames_dropped += 1;
        s.retries = 0;
        s.head_of_line_age = 0;
        s.current_cw = s.policy.cw_min;
    } else if (!s.policy.is_fixed()) {
        s.current_cw = beb_next_cw(s.current_cw, Outcome::Failure, s.policy.cw_min,
                                   s.policy.cw_max);
    }
    redraw(s);
}

PeriodMetrics Channel::run(std::int64_t duration_slots)
{
    if (duration_slots < 1) {
        throw std::domain_error("Channel::run: duration_slots must be >= 1");
    }
    const std::size_t n = stations_.size();

    // Snapshot cumulative counters; the period reports deltas.
    std::vector<StationStats> before(n);
    for (std::size_t i = 0; i < n; ++i) {
        before[i] = stations_[i].stats;
        before[i].latency_us.clear();
        stations_[i].stats.latency_us.clear();
    }

    PeriodMetrics m;
    m.duration_slots = duration_slots;
    std::int64_t t = 0;
    std::vector<std::size_t> contenders;
    std::vector<std::size_t> transmitters;
    contenders.reserve(n);
    transmitters.reserve(n);

    auto age_all = [&](std::int64_t slots) {
        for (auto i : contenders) {
            stations_[i].head_of_line_age += slots;
        }
    };

    auto refresh_contenders = [&] {
        contenders.clear();
        for (std::size_t i = 0; i < n; ++i) {
            if (stations_[i].contending()) {
                contenders.push_back(i);
            }
        }
    };

    refresh_contenders();
    if (carry_busy_ > 0) {
        const std::int64_t used = std::min(carry_busy_, duration_slots);
        m.busy_slots += used;
        t += used;
        carry_busy_ -= used;
        age_all(used);
    }

    while (t < duration_slots) {
        refresh_contenders();
        if (contenders.empty()) {
            m.idle_slots += duration_slots - t;
            t = duration_slots;
            break;
        }

        std::int64_t min_counter = stations_[contenders.front()].backoff_counter;
        for (auto i : contenders) {
            min_counter = std::min(min_counter, stations_[i].backoff_counter);
        }

        if (min_counter > 0) {
            const std::int64_t step = std::min(min_counter, duration_slots - t);
            for (auto i : contenders) {
                auto& s = stations_[i];
                s.backoff_counter -= step;
                s.stats.eligible_slots += step;
                s.head_of_line_age += step;
            }
            m.idle_slots += step;
            t += step;
            continue;
        }

        transmitters.clear();
        for (auto i : contenders) {
            auto& s = stations_[i];
            if (s.backoff_counter == 0) {
                transmitters.push_back(i);
                s.stats.attempts += 1;
                s.stats.eligible_slots += 1;
                if (s.retries > 0) {
                    s.stats.retry_attempts += 1;
                }
            }
        }

        const bool success = transmitters.size() == 1;
        const std::int64_t cost = success ? config_.success_slots() : config_.collision_slots();
        age_all(cost);
        if (success) {
            on_success(stations_[transmitters.front()]);
        } else {
            m.collisions += 1;
            for (auto i : transmitters) {
                on_collision(stations_[i]);
            }
        }

        const std::int64_t used = std::min(cost, duration_slots - t);
        m.busy_slots += used;
        t += used;
        carry_busy_ = cost - used;
    }

    const double seconds = static_cast<double>(duration_slots) * config_.slot_us * 1e-6;
    m.per_station.resize(n);
    m.per_station_tp_bps.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& now = stations_[i].stats;
        const auto& was = before[i];
        auto& p = m.per_station[i];
        p.bits = now.bits_delivered - was.bits_delivered;
        p.tp_bps = p.bits / seconds;
        p.attempts = now.attempts - was.attempts;
        p.retry_attempts = now.retry_attempts - was.retry_attempts;
        p.successes = now.frames_ok - was.frames_ok;
        p.collisions = now.frames_collided - was.frames_collided;
        p.drops = now.frames_dropped - was.frames_dropped;
        p.eligible_slots = now.eligible_slots - was.eligible_slots;
        m.per_station_tp_bps[i] = p.tp_bps;
        m.aggregate_tp_bps += p.tp_bps;
        m.attempts += p.attempts;
        m.successes += p.successes;
        m.drops += p.drops;
        m.latency_us.insert(m.latency_us.end(), now.latency_us.begin(), now.latency_us.end());
    }
    std::int64_t retry_attempts = 0;
    for (const auto& p : m.per_station) {
        retry_attempts += p.retry_attempts;
    }
    m.retry_fraction = m.attempts > 0
                           ? static_cast<double>(retry_attempts) / static_cast<double>(m.attempts)
                           : 0.0;
    m.median_latency_us = m.latency_us.empty() ? 0.0 : median(m.latency_us);
    return m;
}

PeriodMetrics simulate_period(const SimConfig& config, std::vector<StationState>& stations,
                              std::int64_t duration_slots)
{
    Channel channel(config, std::move(stations));
    auto m = channel.run(duration_slots);
    stations = channel.stations();
    return m;
}

double measured_attempt_probability(const PeriodMetrics& metrics, std::size_t station)
{
    const auto& p = metrics.per_station.at(station);
    if (p.eligible_slots == 0) {
        throw std::domain_error("attempt probability undefined: no eligible slots");
    }
    return static_cast<double>(p.attempts) / static_cast<double>(p.eligible_slots);
}

double median(std::vector<double> values)
{
    if (values.empty()) {
        throw std::domain_error("median of empty sample");
    }
    const auto mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                     values.end());
    const double hi = values[mid];
    if (values.size() % 2 == 1) {
        return hi;
    }
    const double lo = *std::max_element(values.begin(),
                                        values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

} // namespace cwtune::mac
