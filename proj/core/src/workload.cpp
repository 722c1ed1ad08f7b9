#include "cwtune/workload.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "cwtune/rng.hpp"

namespace cwtune::workload {

namespace {

std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view cell, std::size_t line, std::size_t column)
{
    T value{};
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    if (!cell.empty() && cell.front() == '-' && std::is_unsigned_v<T>) {
        throw ParseError(line, "negative volume in column " + std::to_string(column) + " ('" +
                                   std::string(cell) + "')");
    }
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw ParseError(line, "malformed number in column " + std::to_string(column) + " ('" +
                                   std::string(cell) + "')");
    }
    return value;
}

} // namespace

Trace::Trace(std::vector<std::string> station_ids, std::vector<std::int64_t> times,
             std::vector<std::vector<std::uint64_t>> volumes)
    : station_ids_(std::move(station_ids)), times_(std::move(times)), volumes_(std::move(volumes))
{
    if (times_.size() != volumes_.size()) {
        throw std::invalid_argument("Trace: times and volume rows differ in length");
    }
    for (std::size_t t = 0; t < volumes_.size(); ++t) {
        if (volumes_[t].size() != station_ids_.size()) {
            throw std::invalid_argument("Trace: ragged row at t=" + std::to_string(t));
        }
        if (t > 0 && times_[t] <= times_[t - 1]) {
            throw std::invalid_argument("Trace: timestamps must be strictly increasing");
        }
    }
}

std::vector<bool> Trace::activity_row(std::size_t t) const
{
    const auto& r = row(t);
    std::vector<bool> out(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        out[i] = r[i] > 0;
    }
    return out;
}

Trace Trace::slice(std::size_t begin, std::size_t count) const
{
    if (begin + count > seconds()) {
        throw std::out_of_range("Trace::slice beyond end of trace");
    }
    const auto b = static_cast<std::ptrdiff_t>(begin);
    const auto e = static_cast<std::ptrdiff_t>(begin + count);
    return Trace(station_ids_, {times_.begin() + b, times_.begin() + e},
                 {volumes_.begin() + b, volumes_.begin() + e});
}

Trace parse_trace(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;

    std::vector<std::string> ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto cells = split_commas(line);
        if (cells.front() != "t" || cells.size() < 2) {
            throw ParseError(line_no, "expected header 't,station_0,...'");
        }
        for (std::size_t i = 1; i < cells.size(); ++i) {
            if (cells[i].empty()) {
                throw ParseError(line_no, "empty station id in column " + std::to_string(i));
            }
            ids.emplace_back(cells[i]);
        }
        break;
    }
    if (ids.empty()) {
        throw ParseError(line_no, "empty trace");
    }

    std::vector<std::int64_t> times;
    std::vector<std::vector<std::uint64_t>> volumes;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto cells = split_commas(line);
        if (cells.size() != ids.size() + 1) {
            throw ParseError(line_no, "expected " + std::to_string(ids.size() + 1) +
                                          " columns, found " + std::to_string(cells.size()));
        }
        const auto t = parse_number<std::int64_t>(cells[0], line_no, 0);
        if (!times.empty() && t <= times.back()) {
            throw ParseError(line_no, "timestamp " + std::to_string(t) +
                                          " does not increase (previous " +
                                          std::to_string(times.back()) + ")");
        }
        std::vector<std::uint64_t> row(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            row[i] = parse_number<std::uint64_t>(cells[i + 1], line_no, i + 1);
        }
        times.push_back(t);
        volumes.push_back(std::move(row));
    }
    if (times.empty()) {
        throw ParseError(line_no, "trace has a header but no rows");
    }
    return Trace(std::move(ids), std::move(times), std::move(volumes));
}

Trace load_trace(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open trace " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_trace(buf.str());
}

std::string serialize_trace(const Trace& trace)
{
    std::string out = "t";
    for (const auto& id : trace.station_ids()) {
        out += ',';
        out += id;
    }
    out += '\n';
    for (std::size_t t = 0; t < trace.seconds(); ++t) {
        out += std::to_string(trace.times()[t]);
        for (auto v : trace.row(t)) {
            out += ',';
            out += std::to_string(v);
        }
        out += '\n';
    }
    return out;
}

void save_trace(const Trace& trace, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write trace " + path.string());
    }
    out << serialize_trace(trace);
}

void GenParams::validate() const
{
    if (n_stations == 0 || duration_s == 0) {
        throw std::invalid_argument("GenParams: need n_stations >= 1 and duration_s >= 1");
    }
    if (chains.size() != 1 && chains.size() != n_stations) {
        throw std::invalid_argument("GenParams: chains must hold 1 or n_stations entries");
    }
    for (const auto& c : chains) {
        const bool ok = c.p_on_to_off >= 0.0 && c.p_on_to_off <= 1.0 && c.p_off_to_on >= 0.0 &&
                        c.p_off_to_on <= 1.0;
        if (!ok) {
            throw std::invalid_argument("GenParams: transition probabilities must lie in [0,1]");
        }
    }
    if (!std::isfinite(volume_mu) || !std::isfinite(volume_sigma) || volume_sigma < 0.0) {
        throw std::invalid_argument("GenParams: need finite mu and sigma >= 0");
    }
}

Trace generate_trace(const GenParams& params)
{
    params.validate();
    Rng rng(params.seed);
    std::normal_distribution<double> normal(params.volume_mu, params.volume_sigma);

    std::vector<std::string> ids;
    std::vector<bool> on(params.n_stations);
    for (std::size_t i = 0; i < params.n_stations; ++i) {
        ids.push_back("station_" + std::to_string(i));
        const auto& c = params.chains.size() == 1 ? params.chains.front() : params.chains[i];
        if (c.start_on) {
            on[i] = *c.start_on;
        } else {
            const double total = c.p_on_to_off + c.p_off_to_on;
            const double stationary_on = total > 0.0 ? c.p_off_to_on / total : 0.0;
            on[i] = uniform01(rng) < stationary_on;
        }
    }

    std::vector<std::int64_t> times(params.duration_s);
    std::vector<std::vector<std::uint64_t>> volumes(params.duration_s,
                                                    std::vector<std::uint64_t>(params.n_stations));
    for (std::size_t t = 0; t < params.duration_s; ++t) {
        times[t] = static_cast<std::int64_t>(t);
        for (std::size_t i = 0; i < params.n_stations; ++i) {
            const auto& c = params.chains.size() == 1 ? params.chains.front() : params.chains[i];
            if (t > 0) {
                const double u = uniform01(rng);
                on[i] = on[i] ? !(u < c.p_on_to_off) : (u < c.p_off_to_on);
            }
            if (on[i]) {
                const double bytes = params.volume_sigma > 0.0 ? std::exp(normal(rng))
                                                               : std::exp(params.volume_mu);
                volumes[t][i] = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(bytes)));
            }
        }
    }
    return Trace(std::move(ids), std::move(times), std::move(volumes));
}

int active_count(const Trace& trace, std::size_t t)
{
    if (t >= trace.seconds()) {
        throw std::out_of_range("active_count: second " + std::to_string(t) + " outside trace");
    }
    int count = 0;
    for (auto v : trace.row(t)) {
        count += v > 0 ? 1 : 0;
    }
    return count;
}

std::vector<double> active_count_series(const Trace& trace)
{
    std::vector<double> out(trace.seconds());
    for (std::size_t t = 0; t < trace.seconds(); ++t) {
        out[t] = active_count(trace, t);
    }
    return out;
}

std::vector<double> acf(std::span<const double> series, std::size_t max_lag)
{
    if (max_lag < 1 || series.size() <= max_lag) {
        throw std::domain_error("acf: need series length > max_lag >= 1");
    }
    double mean = 0.0;
    for (double x : series) {
        mean += x;
    }
    mean /= static_cast<double>(series.size());
    double denom = 0.0;
    for (double x : series) {
        denom += (x - mean) * (x - mean);
    }
    if (!(denom > 0.0)) {
        throw std::domain_error("acf: zero-variance series");
    }
    std::vector<double> out(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        double num = 0.0;
        for (std::size_t t = 0; t + k < series.size(); ++t) {
            num += (series[t] - mean) * (series[t + k] - mean);
        }
        out[k] = num / denom;
    }
    return out;
}

std::vector<double> block_means(std::span<const double> series, std::size_t width)
{
    if (width == 0) {
        throw std::invalid_argument("block_means: width must be >= 1");
    }
    std::vector<double> out;
    for (std::size_t b = 0; b + width <= series.size(); b += width) {
        double sum = 0.0;
        for (std::size_t k = 0; k < width; ++k) {
            sum += series[b + k];
        }
        out.push_back(sum / static_cast<double>(width));
    }
    return out;
}

} // namespace cwtune::workload
