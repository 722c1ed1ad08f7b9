#include "cwtune/controller.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace cwtune::control {

// ------------------------------------------------------------------ policy

PolicySpec PolicySpec::parse(const std::string& text)
{
    static const std::regex fixed_re(R"(FixedCW\((\d+)\))", std::regex::icase);
    std::smatch m;
    PolicySpec p;
    if (text == "BEB" || text == "beb") {
        p.kind = Kind::Beb;
    } else if (text == "ABA" || text == "aba") {
        p.kind = Kind::Aba;
    } else if (std::regex_match(text, m, fixed_re)) {
        p.kind = Kind::Fixed;
        p.fixed_cw = std::stoi(m[1].str());
        if (!mac::valid_cw(p.fixed_cw)) {
            throw std::invalid_argument("policy " + text + ": window outside [1, 1023]");
        }
    } else if (text.size() > 5 && (text.rfind("MLBA-", 0) == 0 || text.rfind("mlba-", 0) == 0)) {
        p.kind = Kind::Mlba;
        p.estimator = learner::parse_estimator(text.substr(5));
    } else {
        throw std::invalid_argument("unknown policy '" + text +
                                    "' (BEB, ABA, FixedCW(w), MLBA-LR, MLBA-NB, MLBA-DNN)");
    }
    return p;
}

std::string PolicySpec::label() const
{
    switch (kind) {
    case Kind::Beb:
        return "BEB";
    case Kind::Fixed:
        return "FixedCW(" + std::to_string(fixed_cw) + ")";
    case Kind::Aba:
        return "ABA";
    case Kind::Mlba:
        return "MLBA-" + learner::to_string(estimator);
    }
    return "unknown";
}

// --------------------------------------------------------------------- APs

std::vector<SimulatedAp> make_aps(int n, int controlled)
{
    if (n < 1) {
        throw std::invalid_argument("make_aps: need at least one AP");
    }
    const int k = controlled < 0 ? n : std::min(controlled, n);
    std::vector<SimulatedAp> aps(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto& ap = aps[static_cast<std::size_t>(i)];
        ap.id = i;
        ap.stations = {static_cast<std::size_t>(i)};
        ap.controlled = i < k;
    }
    return aps;
}

PeriodStats collect_stats(const std::vector<SimulatedAp>& aps, const mac::PeriodMetrics& metrics)
{
    PeriodStats s;
    for (const auto& ap : aps) {
        ApLoad load;
        load.id = ap.id;
        for (auto st : ap.stations) {
            load.tp_bps += metrics.per_station.at(st).tp_bps;
            load.active = load.active || metrics.per_station.at(st).bits > 0.0;
        }
        s.actives += load.active ? 1 : 0;
        s.aggregate_tp_bps += load.tp_bps;
        s.per_ap.push_back(load);
    }
    return s;
}

std::size_t set_cw_all(std::vector<SimulatedAp>& aps, int cw)
{
    if (!mac::valid_cw(cw)) {
        throw std::out_of_range("set_cw_all: window " + std::to_string(cw) + " outside [1, 1023]");
    }
    std::size_t changed = 0;
    for (auto& ap : aps) {
        if (ap.controlled) {
            ap.cw_min = cw;
            ap.cw_max = cw;
            ++changed;
        }
    }
    return changed;
}

// ------------------------------------------------------------------ config

void ControllerConfig::validate() const
{
    if (period_s < 1 || period_s > 10) {
        throw std::invalid_argument("ControllerConfig: period_s must lie in [1, 10]");
    }
    if (policy.kind == PolicySpec::Kind::Fixed && !mac::valid_cw(policy.fixed_cw)) {
        throw std::invalid_argument("ControllerConfig: fixed window outside [1, 1023]");
    }
    learner.validate();
    sim.validate();
    if (trace_path.empty()) {
        synthetic.validate();
    }
}

namespace {

nlohmann::json gen_json(const workload::GenParams& g)
{
    auto chains = nlohmann::json::array();
    for (const auto& c : g.chains) {
        nlohmann::json cj = {{"p_on_to_off", c.p_on_to_off}, {"p_off_to_on", c.p_off_to_on}};
        if (c.start_on) {
            cj["start_on"] = *c.start_on;
        }
        chains.push_back(cj);
    }
    return {{"n_stations", g.n_stations}, {"duration_s", g.duration_s}, {"chains", chains},
            {"volume_mu", g.volume_mu},   {"volume_sigma", g.volume_sigma}, {"seed", g.seed}};
}

workload::GenParams gen_from(const nlohmann::json& j)
{
    workload::GenParams g;
    g.n_stations = j.value("n_stations", g.n_stations);
    g.duration_s = j.value("duration_s", g.duration_s);
    if (j.contains("chains")) {
        g.chains.clear();
        for (const auto& cj : j.at("chains")) {
            workload::OnOffParams c;
            c.p_on_to_off = cj.value("p_on_to_off", c.p_on_to_off);
            c.p_off_to_on = cj.value("p_off_to_on", c.p_off_to_on);
            if (cj.contains("start_on")) {
                c.start_on = cj.at("start_on").get<bool>();
            }
            g.chains.push_back(c);
        }
    }
    g.volume_mu = j.value("volume_mu", g.volume_mu);
    g.volume_sigma = j.value("volume_sigma", g.volume_sigma);
    g.seed = j.value("seed", g.seed);
    return g;
}

} // namespace

void to_json(nlohmann::json& j, const ControllerConfig& c)
{
    j = {{"period_s", c.period_s},
         {"policy", c.policy.label()},
         {"learner", c.learner},
         {"sim", c.sim},
         {"trace_path", c.trace_path},
         {"synthetic", gen_json(c.synthetic)},
         {"output_path", c.output_path},
         {"bind", c.bind},
         {"controlled_aps", c.controlled_aps},
         {"replay_volumes", c.replay_volumes},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ControllerConfig& c)
{
    ControllerConfig d;
    c.period_s = j.value("period_s", d.period_s);
    c.policy = j.contains("policy") ? PolicySpec::parse(j.at("policy").get<std::string>()) : d.policy;
    c.learner = j.contains("learner") ? j.at("learner").get<learner::LearnerConfig>() : d.learner;
    c.sim = j.contains("sim") ? j.at("sim").get<mac::SimConfig>() : d.sim;
    c.trace_path = j.value("trace_path", d.trace_path);
    c.synthetic = j.contains("synthetic") ? gen_from(j.at("synthetic")) : d.synthetic;
    c.output_path = j.value("output_path", d.output_path);
    c.bind = j.value("bind", d.bind);
    c.controlled_aps = j.value("controlled_aps", d.controlled_aps);
    c.replay_volumes = j.value("replay_volumes", d.replay_volumes);
    c.seed = j.value("seed", d.seed);
    c.validate();
}

ControllerConfig load_controller_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config " + path.string());
    }
    return nlohmann::json::parse(in).get<ControllerConfig>();
}

workload::Trace resolve_trace(const ControllerConfig& config)
{
    if (!config.trace_path.empty()) {
        return workload::load_trace(config.trace_path);
    }
    return workload::generate_trace(config.synthetic);
}

// ----------------------------------------------------------------- run log

void to_json(nlohmann::json& j, const PeriodRecord& r)
{
    j = {{"type", "period"},
         {"period", r.period},
         {"timestamp", r.timestamp},
         {"actives", r.actives},
         {"ap_tp_bps", r.ap_tp_bps},
         {"aggregate_tp_bps", r.aggregate_tp_bps},
         {"median_latency_us", r.median_latency_us},
         {"cwenf", r.cwenf},
         {"decision", r.decision},
         {"retry_fraction", r.retry_fraction}};
}

std::vector<double> RunLog::aggregate_series() const
{
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(r.aggregate_tp_bps);
    }
    return out;
}

std::string RunLog::to_ndjson() const
{
    std::string out;
    nlohmann::json header = {{"type", "header"},
                             {"schema_version", kRunLogSchemaVersion},
                             {"config", config},
                             {"calibration_only", calibration_only}};
    out += header.dump() + '\n';
    for (const auto& r : records) {
        out += nlohmann::json(r).dump() + '\n';
    }
    nlohmann::json tail = {{"type", "model"}, {"model", model}};
    out += tail.dump() + '\n';
    return out;
}

void RunLog::write(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write run log " + path.string());
    }
    out << to_ndjson();
}

// -------------------------------------------------------------- controller

Controller::Controller(ControllerConfig config, workload::Trace trace)
    : config_(std::move(config)), trace_(std::move(trace))
{
    config_.validate();
    if (trace_.seconds() == 0 || trace_.stations() == 0) {
        throw std::invalid_argument("Controller: empty trace");
    }
    // The trace decides the population; the channel and learner streams are
    // derived from the run seed so that every policy sees the same medium.
    config_.sim.n_stations = static_cast<int>(trace_.stations());
    config_.sim.seed = derive_seed(config_.seed, 1);
    config_.learner.period_s = config_.period_s;

    aps_ = make_aps(config_.sim.n_stations, config_.controlled_aps);
    channel_ = std::make_unique<mac::Channel>(
        config_.sim, mac::make_stations(config_.sim.n_stations, mac::default_beb()));
    if (config_.policy.kind == PolicySpec::Kind::Mlba) {
        auto lc = config_.learner;
        lc.estimator = config_.policy.estimator;
        learner_ = std::make_unique<learner::OnlineLearner>(lc, derive_seed(config_.seed, 2));
    }

    // Before the first period the controller probes the activity of the
    // upcoming period; throughput is not yet known.
    const auto activity = period_activity(0);
    PeriodStats probe;
    probe.actives = static_cast<int>(std::count(activity.begin(), activity.end(), true));
    decide_next(probe);
    publish(mac::PeriodMetrics{});
}

std::int64_t Controller::periods_total() const noexcept
{
    return static_cast<std::int64_t>(trace_.seconds()) / config_.period_s;
}

bool Controller::done() const noexcept
{
    return period_ >= periods_total();
}

std::vector<bool> Controller::period_activity(std::int64_t period) const
{
    std::vector<bool> active(trace_.stations(), false);
    const auto first = static_cast<std::size_t>(period * config_.period_s);
    for (std::size_t s = first; s < first + static_cast<std::size_t>(config_.period_s); ++s) {
        if (s >= trace_.seconds()) {
            break;
        }
        const auto row = trace_.activity_row(s);
        for (std::size_t i = 0; i < row.size(); ++i) {
            active[i] = active[i] || row[i];
        }
    }
    return active;
}

std::vector<double> Controller::period_bits(std::int64_t period) const
{
    std::vector<double> bits(trace_.stations(), 0.0);
    const auto first = static_cast<std::size_t>(period * config_.period_s);
    for (std::size_t s = first; s < first + static_cast<std::size_t>(config_.period_s); ++s) {
        if (s >= trace_.seconds()) {
            break;
        }
        for (std::size_t i = 0; i < bits.size(); ++i) {
            bits[i] += 8.0 * static_cast<double>(trace_.volume(s, i));
        }
    }
    return bits;
}

void Controller::apply_assignment(int cw)
{
    if (config_.policy.kind == PolicySpec::Kind::Beb) {
        for (auto& ap : aps_) {
            ap.cw_min = 15;
            ap.cw_max = 63;
        }
    } else {
        set_cw_all(aps_, cw);
    }
    for (const auto& ap : aps_) {
        const auto policy = ap.controlled && config_.policy.kind != PolicySpec::Kind::Beb
                                ? mac::BackoffPolicy::fixed(ap.cw_min)
                                : mac::default_beb();
        for (auto st : ap.stations) {
            channel_->set_policy(st, policy);
        }
    }
}

void Controller::decide_next(const PeriodStats& stats)
{
    switch (config_.policy.kind) {
    case PolicySpec::Kind::Beb:
        next_cw_ = 15;
        next_kind_ = "static";
        break;
    case PolicySpec::Kind::Fixed:
        next_cw_ = config_.policy.fixed_cw;
        next_kind_ = "static";
        break;
    case PolicySpec::Kind::Aba:
        next_cw_ = models::aba_cw(kAbaCwMin, stats.actives).value_or(1);
        next_kind_ = "static";
        break;
    case PolicySpec::Kind::Mlba:
        next_choice_ = learner_->next_cw(stats.actives, stats.aggregate_tp_bps);
        next_cw_ = next_choice_.cw;
        next_kind_ = learner::to_string(next_choice_.kind);
        break;
    }
}

const PeriodRecord& Controller::step()
{
    if (done()) {
        throw std::logic_error("Controller::step: trace exhausted");
    }
    int cw = next_cw_;
    std::string kind = next_kind_;
    learner::Choice choice = next_choice_;
    {
        std::lock_guard lock(mutex_);
        if (pending_cw_) {
            cw = *pending_cw_;
            kind = "override";
            choice = {cw, learner::DecisionKind::Calibration, false};
            pending_cw_.reset();
        }
    }

    const auto activity = period_activity(period_);
    for (std::size_t i = 0; i < activity.size(); ++i) {
        channel_->set_active(i, activity[i]);
    }
    if (config_.replay_volumes) {
        // Undelivered volume is not carried into the next period.
        const auto bits = period_bits(period_);
        for (std::size_t i = 0; i < bits.size(); ++i) {
            channel_->set_budget(i, bits[i]);
        }
    }
    apply_assignment(cw);

    const auto metrics = channel_->run(config_.sim.slots_per(config_.period_s));
    const auto stats = collect_stats(aps_, metrics);

    PeriodRecord rec;
    rec.period = period_;
    rec.timestamp = trace_.times().at(static_cast<std::size_t>(period_ * config_.period_s));
    rec.actives = stats.actives;
    for (const auto& ap : stats.per_ap) {
        rec.ap_tp_bps.push_back(ap.tp_bps);
    }
    rec.aggregate_tp_bps = stats.aggregate_tp_bps;
    rec.median_latency_us = metrics.median_latency_us;
    rec.cwenf = config_.policy.kind == PolicySpec::Kind::Beb && kind != "override" ? 15 : cw;
    rec.decision = kind;
    rec.retry_fraction = metrics.retry_fraction;

    if (learner_) {
        learner_->record_outcome(choice, tplast_, stats.actives, stats.aggregate_tp_bps);
    }
    tplast_ = stats.aggregate_tp_bps;
    last_stats_ = stats;
    records_.push_back(rec);
    ++period_;
    if (!done()) {
        decide_next(stats);
    }
    publish(metrics);
    return records_.back();
}

RunLog Controller::run()
{
    while (!done()) {
        step();
    }
    return log();
}

RunLog Controller::log() const
{
    RunLog log;
    log.config = config_;
    log.records = records_;
    if (learner_) {
        log.model = learner_->state_json();
        log.calibration_only = periods_total() <= config_.learner.calibration_periods();
    }
    return log;
}

void Controller::request_cw(int cw)
{
    if (!mac::valid_cw(cw)) {
        throw std::out_of_range("window " + std::to_string(cw) + " outside [1, 1023]");
    }
    std::lock_guard lock(mutex_);
    pending_cw_ = cw;
    status_["pending_cw"] = cw;
}

PeriodStats Controller::last_stats() const
{
    if (!last_stats_) {
        throw std::logic_error("no period has completed yet");
    }
    return *last_stats_;
}

void Controller::publish(const mac::PeriodMetrics& metrics)
{
    nlohmann::json status = {{"period", period_},
                             {"total_periods", periods_total()},
                             {"done", done()},
                             {"policy", config_.policy.label()},
                             {"current_cw", records_.empty() ? nlohmann::json() : nlohmann::json(records_.back().cwenf)},
                             {"last_decision", records_.empty() ? nlohmann::json() : nlohmann::json(records_.back().decision)},
                             {"next_cw", next_cw_},
                             {"next_decision", next_kind_}};
    if (learner_) {
        status["model"] = *learner_->snapshot();
        status["queue"] = {{"calibration", learner_->queue().calibration().size()},
                           {"predicted", learner_->queue().predicted().size()}};
        status["cwmax_entries"] = learner_->table().size();
    } else {
        status["model"] = nullptr;
    }

    nlohmann::json load = {{"period", period_}, {"aps", nlohmann::json::array()}};
    if (last_stats_) {
        for (const auto& ap : last_stats_->per_ap) {
            load["aps"].push_back({{"id", ap.id}, {"tp_bps", ap.tp_bps}, {"active", ap.active}});
        }
    }

    nlohmann::json m = {{"period", period_},
                        {"aggregate_tp_bps", metrics.aggregate_tp_bps},
                        {"median_latency_us", metrics.median_latency_us},
                        {"retry_fraction", metrics.retry_fraction},
                        {"attempts", metrics.attempts},
                        {"successes", metrics.successes},
                        {"collisions", metrics.collisions},
                        {"drops", metrics.drops}};

    std::lock_guard lock(mutex_);
    status["pending_cw"] = pending_cw_ ? nlohmann::json(*pending_cw_) : nlohmann::json();
    status_ = std::move(status);
    load_ = std::move(load);
    metrics_ = std::move(m);
}

nlohmann::json Controller::status_json() const
{
    std::lock_guard lock(mutex_);
    return status_;
}

nlohmann::json Controller::load_json() const
{
    std::lock_guard lock(mutex_);
    return load_;
}

nlohmann::json Controller::metrics_json() const
{
    std::lock_guard lock(mutex_);
    return metrics_;
}

RunLog run_replay(const ControllerConfig& config, const workload::Trace& trace)
{
    Controller c(config, trace);
    return c.run();
}

} // namespace cwtune::control
