#pragma once

// Per-second, per-station traffic traces.
//
// CSV layout (UTF-8, LF):
//   t,station_0,...,station_{N-1}
//   0,1200,0,...
// One row per second, strictly increasing timestamps, non-negative byte
// volumes. A station is active in a second iff its volume is > 0.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cwtune::workload {

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line)
    {
    }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class Trace {
public:
    Trace() = default;
    /// volumes[t][i] in bytes/s; throws std::invalid_argument on ragged rows,
    /// non-increasing times or a size mismatch.
    Trace(std::vector<std::string> station_ids, std::vector<std::int64_t> times,
          std::vector<std::vector<std::uint64_t>> volumes);

    std::size_t seconds() const noexcept { return times_.size(); }
    std::size_t stations() const noexcept { return station_ids_.size(); }
    const std::vector<std::string>& station_ids() const noexcept { return station_ids_; }
    const std::vector<std::int64_t>& times() const noexcept { return times_; }
    std::uint64_t volume(std::size_t t, std::size_t station) const { return volumes_.at(t).at(station); }
    const std::vector<std::uint64_t>& row(std::size_t t) const { return volumes_.at(t); }
    bool active(std::size_t t, std::size_t station) const { return volume(t, station) > 0; }
    std::vector<bool> activity_row(std::size_t t) const;

    /// Rows [begin, begin + count).
    Trace slice(std::size_t begin, std::size_t count) const;

    friend bool operator==(const Trace&, const Trace&) = default;

private:
    std::vector<std::string> station_ids_;
    std::vector<std::int64_t> times_;
    std::vector<std::vector<std::uint64_t>> volumes_;
};

Trace parse_trace(const std::string& text);
Trace load_trace(const std::filesystem::path& path);
std::string serialize_trace(const Trace& trace);
void save_trace(const Trace& trace, const std::filesystem::path& path);

struct OnOffParams {
    double p_on_to_off = 0.03;
    double p_off_to_on = 0.07;
    /// Initial state; drawn from the chain's stationary law when unset.
    std::optional<bool> start_on;
};

struct GenParams {
    std::size_t n_stations = 8;
    std::size_t duration_s = 3600;
    /// One entry per station, or a single entry shared by all.
    std::vector<OnOffParams> chains{OnOffParams{}};
    /// Log-normal on-second volume, parameters of ln(bytes/s).
    double volume_mu = 15.0;
    double volume_sigma = 1.0;
    std::uint64_t seed = 7;

    void validate() const;
};

/// Independent two-state Markov on/off chains, one per station.
Trace generate_trace(const GenParams& params);

/// Number of active stations at second t. Throws std::out_of_range.
int active_count(const Trace& trace, std::size_t t);
std::vector<double> active_count_series(const Trace& trace);

/// Sample autocorrelation for lags 0..max_lag. Throws std::domain_error for a
/// zero-variance series or when size() <= max_lag.
std::vector<double> acf(std::span<const double> series, std::size_t max_lag);

/// Means of consecutive non-overlapping blocks of `width` samples.
std::vector<double> block_means(std::span<const double> series, std::size_t width);

} // namespace cwtune::workload
