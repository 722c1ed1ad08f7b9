#include "cwtune/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cwtune::bench {

namespace {

std::string num(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

double mean(std::span<const double> v)
{
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

double jain_index(std::span<const double> x)
{
    if (x.empty()) {
        throw std::invalid_argument("jain_index: empty input");
    }
    double sum = 0.0;
    double sq = 0.0;
    for (double v : x) {
        if (!(v >= 0.0)) {
            throw std::domain_error("jain_index: throughputs must be >= 0");
        }
        sum += v;
        sq += v * v;
    }
    if (!(sq > 0.0)) {
        throw std::domain_error("jain_index: undefined for all-zero input");
    }
    return sum * sum / (static_cast<double>(x.size()) * sq);
}

AvgSigl avg_sigl(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) {
        throw std::invalid_argument("avg_sigl: series differ in length");
    }
    AvgSigl r;
    double total = 0.0;
    std::size_t used = 0;
    std::size_t not_better = 0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        if (b[t] == 0.0) {
            ++r.excluded;
            continue;
        }
        total += 100.0 * (a[t] - b[t]) / b[t];
        not_better += a[t] <= b[t] ? 1 : 0;
        ++used;
    }
    if (used == 0) {
        throw std::domain_error("avg_sigl: no period with a nonzero reference");
    }
    r.flagged = r.excluded > 0;
    r.avg_pct = total / static_cast<double>(used);
    r.sigl = static_cast<int>(5 * ((20 * not_better + used - 1) / used));
    return r;
}

std::pair<double, double> normal_band(std::span<const double> values)
{
    if (values.empty()) {
        throw std::invalid_argument("normal_band: empty input");
    }
    const double m = mean(values);
    if (values.size() < 2) {
        return {m, 0.0};
    }
    double ss = 0.0;
    for (double v : values) {
        ss += (v - m) * (v - m);
    }
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return {m, 1.96 * sd / std::sqrt(static_cast<double>(values.size()))};
}

// ------------------------------------------------------------------- sweep

void SweepSpec::validate() const
{
    if (n_aps.empty() || cw_grid.empty()) {
        throw std::invalid_argument("SweepSpec: n_aps and cw_grid must be nonempty");
    }
    for (int n : n_aps) {
        if (n < 1) {
            throw std::invalid_argument("SweepSpec: n_aps entries must be >= 1");
        }
    }
    for (int cw : cw_grid) {
        if (!mac::valid_cw(cw)) {
            throw std::invalid_argument("SweepSpec: grid window outside [1, 1023]");
        }
    }
    if (repetitions < 1 || !(burst_s > 0.0)) {
        throw std::invalid_argument("SweepSpec: need repetitions >= 1 and burst_s > 0");
    }
    if (!(controlled_fraction >= 0.0 && controlled_fraction <= 1.0)) {
        throw std::invalid_argument("SweepSpec: controlled_fraction must lie in [0, 1]");
    }
}

std::vector<SweepCell> opportunity_sweep(const SweepSpec& spec)
{
    spec.validate();
    struct Variant {
        std::string label;
        int cw;
        mac::BackoffPolicy policy;
        bool partial;
    };
    std::vector<Variant> variants;
    for (int cw : spec.cw_grid) {
        variants.push_back({"FixedCW", cw, mac::BackoffPolicy::fixed(cw), true});
    }
    if (spec.include_beb_baselines) {
        variants.push_back({"BEB(15,63)", 0, mac::BackoffPolicy::beb(15, 63), false});
        variants.push_back({"BEB(1,1023)", 0, mac::BackoffPolicy::beb(1, 1023), false});
    }

    std::vector<SweepCell> cells;
    for (int n : spec.n_aps) {
        auto cfg = spec.sim;
        cfg.n_stations = n;
        cfg.rtscts_enabled = spec.rtscts;
        const auto slots = cfg.slots_per(spec.burst_s);
        const int k = static_cast<int>(std::lround(spec.controlled_fraction * n));

        for (const auto& v : variants) {
            SweepCell cell;
            cell.n = n;
            cell.policy = v.label;
            cell.cw = v.cw;
            cell.controlled = v.partial ? k : n;
            std::vector<double> lat;
            std::vector<double> retry;
            std::vector<double> jain;
            for (int r = 0; r < spec.repetitions; ++r) {
                auto stations = mac::make_stations(n, mac::default_beb());
                for (int i = 0; i < cell.controlled; ++i) {
                    stations[static_cast<std::size_t>(i)].policy = v.policy;
                    stations[static_cast<std::size_t>(i)].current_cw = v.policy.cw_min;
                }
                cfg.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(n),
                                       static_cast<std::uint64_t>(r));
                const auto m = mac::simulate_period(cfg, stations, slots);
                cell.rep_tp_bps.push_back(m.aggregate_tp_bps);
                lat.push_back(m.median_latency_us);
                retry.push_back(m.retry_fraction);
                jain.push_back(m.aggregate_tp_bps > 0.0 ? jain_index(m.per_station_tp_bps) : 0.0);
            }
            cell.median_tp_bps = mac::median(cell.rep_tp_bps);
            cell.median_latency_us = mac::median(lat);
            cell.retry_fraction = mac::median(retry);
            cell.jain = mac::median(jain);
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

std::string sweep_csv(const std::vector<SweepCell>& cells)
{
    std::string out = "n,policy,cw,controlled,median_tp_bps,median_latency_us,retry_fraction,jain\n";
    for (const auto& c : cells) {
        out += std::to_string(c.n) + ',' + c.policy + ',' + std::to_string(c.cw) + ',' +
               std::to_string(c.controlled) + ',' + num(c.median_tp_bps) + ',' +
               num(c.median_latency_us) + ',' + num(c.retry_fraction) + ',' + num(c.jain) + '\n';
    }
    return out;
}

// ------------------------------------------------------------- calibration

std::size_t CalibrationData::index_of(int cw) const
{
    const auto it = std::find(cw_grid.begin(), cw_grid.end(), cw);
    if (it == cw_grid.end()) {
        throw std::out_of_range("window " + std::to_string(cw) + " is not on the calibration grid");
    }
    return static_cast<std::size_t>(it - cw_grid.begin());
}

std::string CalibrationData::csv() const
{
    std::string out = "period,actives,tplast";
    for (int cw : cw_grid) {
        out += ",tp_cw" + std::to_string(cw);
    }
    out += ",tp_beb,aba_cw,tp_aba,cwopt,tpopt\n";
    for (const auto& r : rows) {
        out += std::to_string(r.period) + ',' + std::to_string(r.actives) + ',' + num(r.tplast);
        for (double tp : r.tp_by_cw) {
            out += ',' + num(tp);
        }
        out += ',' + num(r.tp_beb) + ',' + std::to_string(r.aba_cw) + ',' + num(r.tp_aba) + ',' +
               std::to_string(r.cwopt) + ',' + num(r.tpopt) + '\n';
    }
    return out;
}

namespace {

double simulate_with(const mac::SimConfig& cfg, const std::vector<bool>& activity,
                     const std::vector<std::optional<double>>& budgets,
                     const mac::BackoffPolicy& policy, std::int64_t slots)
{
    auto stations = mac::make_stations(cfg.n_stations, policy);
    for (std::size_t i = 0; i < stations.size(); ++i) {
        stations[i].active = activity[i];
        stations[i].budget_bits = budgets[i];
    }
    return mac::simulate_period(cfg, stations, slots).aggregate_tp_bps;
}

} // namespace

CalibrationData exhaustive_calibration(const workload::Trace& trace, const std::vector<int>& cw_grid,
                                       const mac::SimConfig& sim, std::uint64_t seed,
                                       bool replay_volumes)
{
    if (cw_grid.empty()) {
        throw std::invalid_argument("exhaustive_calibration: empty grid");
    }
    for (std::size_t i = 0; i < cw_grid.size(); ++i) {
        if (!mac::valid_cw(cw_grid[i]) || (i > 0 && cw_grid[i] <= cw_grid[i - 1])) {
            throw std::invalid_argument(
                "exhaustive_calibration: grid must strictly increase within [1, 1023]");
        }
    }
    CalibrationData data;
    data.cw_grid = cw_grid;
    auto cfg = sim;
    cfg.n_stations = static_cast<int>(trace.stations());
    const auto slots = cfg.slots_per(1.0);

    double tplast = 0.0;
    int actives_last = -1;
    for (std::size_t t = 0; t < trace.seconds(); ++t) {
        const auto activity = trace.activity_row(t);
        std::vector<std::optional<double>> budgets(trace.stations());
        if (replay_volumes) {
            for (std::size_t i = 0; i < budgets.size(); ++i) {
                budgets[i] = 8.0 * static_cast<double>(trace.volume(t, i));
            }
        }
        cfg.seed = derive_seed(seed, t);

        CalibrationRow row;
        row.period = static_cast<std::int64_t>(t);
        row.actives = workload::active_count(trace, t);
        row.tplast = tplast;
        for (int cw : cw_grid) {
            row.tp_by_cw.push_back(simulate_with(cfg, activity, budgets, mac::BackoffPolicy::fixed(cw), slots));
        }
        row.tp_beb = simulate_with(cfg, activity, budgets, mac::default_beb(), slots);
        const int aba_actives = actives_last < 0 ? row.actives : actives_last;
        row.aba_cw = models::aba_cw(control::kAbaCwMin, aba_actives).value_or(1);
        row.tp_aba = simulate_with(cfg, activity, budgets, mac::BackoffPolicy::fixed(row.aba_cw), slots);

        std::size_t best = 0;
        for (std::size_t k = 1; k < row.tp_by_cw.size(); ++k) {
            if (row.tp_by_cw[k] > row.tp_by_cw[best]) {
                best = k;
            }
        }
        row.cwopt = cw_grid[best];
        row.tpopt = row.tp_by_cw[best];
        tplast = row.tpopt;
        actives_last = row.actives;
        data.rows.push_back(std::move(row));
    }
    return data;
}

FitComparison compare_log_fit(const CalibrationData& data)
{
    std::vector<std::array<double, 2>> x;
    std::vector<double> y_log;
    std::vector<double> y_lin;
    for (const auto& r : data.rows) {
        x.push_back({static_cast<double>(r.actives), r.tplast});
        y_log.push_back(std::log(static_cast<double>(r.cwopt)));
        y_lin.push_back(static_cast<double>(r.cwopt));
    }
    if (x.empty()) {
        throw std::invalid_argument("compare_log_fit: empty calibration data");
    }
    const auto log_fit = models::ols_fit(x, y_log);
    const auto lin_fit = models::ols_fit(x, y_lin);
    FitComparison out;
    out.r2_log = log_fit.r_squared;
    out.r2_linear = lin_fit.r_squared;
    out.log_fit = {log_fit.coefficients[0], log_fit.coefficients[1], log_fit.coefficients[2],
                   log_fit.degenerate};
    out.rows = x.size();
    return out;
}

// ---------------------------------------------------------- training speed

namespace {

/// Grid window nearest to `cw` in log space, ties toward the smaller one.
std::size_t snap_to_grid(const std::vector<int>& grid, int cw)
{
    std::size_t best = 0;
    double best_d = std::abs(std::log(static_cast<double>(grid[0])) - std::log(static_cast<double>(cw)));
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double d =
            std::abs(std::log(static_cast<double>(grid[k])) - std::log(static_cast<double>(cw)));
        if (d < best_d - 1e-12) {
            best = k;
            best_d = d;
        }
    }
    return best;
}

double mlba_ratio(const CalibrationData& data, learner::EstimatorKind kind, int train_s,
                  learner::LearnerConfig config, std::uint64_t seed)
{
    config.estimator = kind;
    config.calibration_period_s = 0;
    config.cw_grid = data.cw_grid;
    learner::OnlineLearner learner(config, seed);
    Rng rng(derive_seed(seed, 7));

    const auto n = static_cast<std::int64_t>(data.rows.size());
    const auto warm = std::min<std::int64_t>(train_s, n);
    double achieved = 0.0;
    double oracle = 0.0;
    double tplast = 0.0;
    for (std::int64_t t = 0; t < n; ++t) {
        const auto& row = data.rows[static_cast<std::size_t>(t)];
        learner::Observation obs;
        obs.tplast = tplast;
        obs.actives = row.actives;
        obs.period = t;
        std::size_t k = 0;
        if (t < warm) {
            k = static_cast<std::size_t>(
                uniform_int(rng, 0, static_cast<std::int64_t>(data.cw_grid.size()) - 1));
            obs.kind = learner::ObsKind::Calibration;
        } else {
            const int prev_actives = t > 0 ? data.rows[static_cast<std::size_t>(t - 1)].actives : 0;
            const auto choice = learner.next_cw(prev_actives, tplast);
            k = snap_to_grid(data.cw_grid, choice.cw);
            obs.kind = choice.kind == learner::DecisionKind::Predict ? learner::ObsKind::Predicted
                                                                     : learner::ObsKind::Calibration;
            achieved += row.tp_by_cw[k];
            oracle += row.tpopt;
        }
        obs.cwenf = data.cw_grid[k];
        obs.tp = row.tp_by_cw[k];
        learner.record(obs);
        tplast = obs.tp;
    }
    return oracle > 0.0 ? achieved / oracle : 0.0;
}

double static_ratio(const CalibrationData& data, int train_s, double CalibrationRow::*field)
{
    double achieved = 0.0;
    double oracle = 0.0;
    for (std::size_t t = static_cast<std::size_t>(std::max(train_s, 0)); t < data.rows.size(); ++t) {
        achieved += data.rows[t].*field;
        oracle += data.rows[t].tpopt;
    }
    return oracle > 0.0 ? achieved / oracle : 0.0;
}

} // namespace

std::vector<TrainSpeedPoint> training_speed_sim(const CalibrationData& data,
                                                const std::vector<std::string>& algorithms,
                                                const std::vector<int>& train_times,
                                                const learner::LearnerConfig& config,
                                                std::uint64_t seed)
{
    if (data.rows.empty()) {
        throw std::invalid_argument("training_speed_sim: empty calibration data");
    }
    std::vector<TrainSpeedPoint> out;
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        const auto& alg = algorithms[a];
        for (std::size_t i = 0; i < train_times.size(); ++i) {
            const int k = train_times[i];
            double ratio = 0.0;
            if (alg == "OPT") {
                ratio = static_ratio(data, k, &CalibrationRow::tpopt);
            } else if (alg == "BEB") {
                ratio = static_ratio(data, k, &CalibrationRow::tp_beb);
            } else if (alg == "ABA") {
                ratio = static_ratio(data, k, &CalibrationRow::tp_aba);
            } else if (alg.rfind("MLBA-", 0) == 0) {
                ratio = mlba_ratio(data, learner::parse_estimator(alg.substr(5)), k, config,
                                   derive_seed(seed, a, static_cast<std::uint64_t>(k)));
            } else {
                throw std::invalid_argument("training_speed_sim: unknown algorithm " + alg);
            }
            out.push_back({alg, k, ratio});
        }
    }
    return out;
}

std::string trainspeed_csv(const std::vector<TrainSpeedPoint>& points)
{
    std::string out = "algorithm,train_s,ratio\n";
    for (const auto& p : points) {
        out += p.algorithm + ',' + std::to_string(p.train_s) + ',' + num(p.ratio) + '\n';
    }
    return out;
}

// ------------------------------------------------------------ longitudinal

std::size_t ComparisonResult::index_of(const std::string& algorithm) const
{
    const auto it = std::find(algorithms.begin(), algorithms.end(), algorithm);
    if (it == algorithms.end()) {
        throw std::out_of_range("algorithm " + algorithm + " not in comparison");
    }
    return static_cast<std::size_t>(it - algorithms.begin());
}

std::string ComparisonResult::csv() const
{
    std::string out = "a,b,avg_pct,sigl";
    for (std::size_t w = 0; w < windows.size(); ++w) {
        out += ",avg_w" + std::to_string(w) + ",sigl_w" + std::to_string(w);
    }
    out += '\n';
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        for (std::size_t b = 0; b < algorithms.size(); ++b) {
            out += algorithms[a] + ',' + algorithms[b] + ',' + num(avg[a][b]) + ',' +
                   std::to_string(sigl[a][b]);
            for (std::size_t w = 0; w < windows.size(); ++w) {
                out += ',' + num(window_avg[w][a][b]) + ',' + std::to_string(window_sigl[w][a][b]);
            }
            out += '\n';
        }
    }
    return out;
}

std::string ComparisonResult::series_ndjson() const
{
    std::string out;
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        for (std::size_t w = 0; w < windows.size(); ++w) {
            nlohmann::json j = {{"algorithm", algorithms[a]},
                                {"window", w},
                                {"begin", windows[w].begin},
                                {"length", windows[w].length},
                                {"mean_actives", window_actives[w]},
                                {"aggregate_tp_bps", series[a][w]}};
            out += j.dump() + '\n';
        }
    }
    return out;
}

control::ControllerConfig bench_scenario()
{
    control::ControllerConfig cfg;
    cfg.sim.frame_slots = 134;
    cfg.sim.collision_slots_basic = 134;
    cfg.sim.payload_bits_per_frame = 65536.0 * 8.0;
    cfg.sim.rtscts_enabled = false;
    cfg.replay_volumes = false;
    cfg.synthetic.duration_s = 6 * 3600;
    return cfg;
}

std::vector<Window> strided_windows(std::size_t trace_seconds, std::size_t skip, std::size_t stride,
                                    std::size_t length, std::size_t count)
{
    if (length == 0 || stride < length) {
        throw std::invalid_argument("strided_windows: need 0 < length <= stride");
    }
    std::vector<Window> out;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t begin = skip + i * stride;
        if (begin + length > trace_seconds) {
            throw std::out_of_range("strided_windows: window " + std::to_string(i) +
                                    " runs past the end of the trace");
        }
        out.push_back({begin, length});
    }
    return out;
}

ComparisonResult longitudinal_benchmark(const workload::Trace& trace,
                                        const std::vector<Window>& windows,
                                        const std::vector<std::string>& algorithms,
                                        const control::ControllerConfig& base)
{
    if (windows.empty() || algorithms.empty()) {
        throw std::invalid_argument("longitudinal_benchmark: need windows and algorithms");
    }
    ComparisonResult res;
    res.algorithms = algorithms;
    res.windows = windows;
    const auto na = algorithms.size();
    const auto nw = windows.size();
    res.series.assign(na, std::vector<std::vector<double>>(nw));

    for (std::size_t w = 0; w < nw; ++w) {
        const auto slice = trace.slice(windows[w].begin, windows[w].length);
        const auto actives = workload::active_count_series(slice);
        res.window_actives.push_back(mean(actives));
        for (std::size_t a = 0; a < na; ++a) {
            auto cfg = base;
            cfg.policy = control::PolicySpec::parse(algorithms[a]);
            // Matched seeds: every algorithm sees the same medium in a window.
            cfg.seed = derive_seed(base.seed, w);
            res.series[a][w] = control::run_replay(cfg, slice).aggregate_series();
        }
    }

    res.avg.assign(na, std::vector<double>(na, 0.0));
    res.sigl.assign(na, std::vector<int>(na, 0));
    res.window_avg.assign(nw, std::vector<std::vector<double>>(na, std::vector<double>(na, 0.0)));
    res.window_sigl.assign(nw, std::vector<std::vector<int>>(na, std::vector<int>(na, 0)));
    for (std::size_t a = 0; a < na; ++a) {
        std::vector<double> pooled_a;
        for (const auto& s : res.series[a]) {
            pooled_a.insert(pooled_a.end(), s.begin(), s.end());
        }
        res.medians.push_back(mac::median(pooled_a));
        for (std::size_t b = 0; b < na; ++b) {
            std::vector<double> pooled_b;
            double avg_sum = 0.0;
            for (std::size_t w = 0; w < nw; ++w) {
                const auto r = avg_sigl(res.series[a][w], res.series[b][w]);
                res.window_avg[w][a][b] = r.avg_pct;
                res.window_sigl[w][a][b] = r.sigl;
                avg_sum += r.avg_pct;
                pooled_b.insert(pooled_b.end(), res.series[b][w].begin(), res.series[b][w].end());
            }
            res.avg[a][b] = avg_sum / static_cast<double>(nw);
            res.sigl[a][b] = avg_sigl(pooled_a, pooled_b).sigl;
        }
    }
    return res;
}

} // namespace cwtune::bench
