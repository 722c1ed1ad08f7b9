#include "cwtune/online_learner.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <stdexcept>

namespace cwtune::learner {

std::string to_string(ObsKind k)
{
    return k == ObsKind::Calibration ? "calibration" : "predicted";
}

std::string to_string(DecisionKind k)
{
    switch (k) {
    case DecisionKind::Calibration:
        return "calibration";
    case DecisionKind::Explore:
        return "explore";
    case DecisionKind::Predict:
        return "predict";
    }
    return "unknown";
}

std::string to_string(EstimatorKind k)
{
    switch (k) {
    case EstimatorKind::LR:
        return "LR";
    case EstimatorKind::NB:
        return "NB";
    case EstimatorKind::DNN:
        return "DNN";
    }
    return "unknown";
}

EstimatorKind parse_estimator(const std::string& name)
{
    std::string upper;
    for (char c : name) {
        upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    if (upper == "LR") {
        return EstimatorKind::LR;
    }
    if (upper == "NB") {
        return EstimatorKind::NB;
    }
    if (upper == "DNN") {
        return EstimatorKind::DNN;
    }
    throw std::invalid_argument("unknown estimator '" + name + "' (expected LR, NB or DNN)");
}

void Observation::validate() const
{
    if (cwenf < models::kMinCw || cwenf > models::kMaxCw) {
        throw std::invalid_argument("Observation: cwenf " + std::to_string(cwenf) +
                                    " outside [1, 1023]");
    }
    if (!(tplast >= 0.0) || !(tp >= 0.0) || actives < 0) {
        throw std::invalid_argument("Observation: throughputs and actives must be >= 0");
    }
}

// ------------------------------------------------------------------- queue

CwObsQueue::CwObsQueue(std::size_t capacity) : capacity_(capacity)
{
    if (capacity_ == 0) {
        throw std::invalid_argument("CwObsQueue: capacity must be >= 1");
    }
}

void CwObsQueue::record(const Observation& obs)
{
    obs.validate();
    auto& fifo = obs.kind == ObsKind::Calibration ? calib_ : pred_;
    fifo.push_back(obs);
    while (fifo.size() > capacity_) {
        fifo.pop_front();
    }
}

void CwObsQueue::evict_before(std::int64_t period)
{
    for (auto* fifo : {&calib_, &pred_}) {
        while (!fifo->empty() && fifo->front().period < period) {
            fifo->pop_front();
        }
    }
}

std::size_t CwObsQueue::distinct_windows() const
{
    std::set<int> seen;
    for (const auto* fifo : {&calib_, &pred_}) {
        for (const auto& o : *fifo) {
            seen.insert(o.cwenf);
        }
    }
    return seen.size();
}

std::vector<Observation> CwObsQueue::all() const
{
    std::vector<Observation> out(calib_.begin(), calib_.end());
    out.insert(out.end(), pred_.begin(), pred_.end());
    return out;
}

// ------------------------------------------------------------------- table

const CwMaxEntry* CwMaxTable::find(Levels key) const
{
    const auto it = std::lower_bound(entries.begin(), entries.end(), key,
                                     [](const CwMaxEntry& e, Levels k) { return e.key < k; });
    return it != entries.end() && it->key == key ? &*it : nullptr;
}

CwMaxTable rebuild_cwmax(std::span<const Observation> observations, const QuantScheme& base)
{
    CwMaxTable table;
    table.scheme = base;
    if (observations.empty()) {
        return table;
    }
    std::vector<double> tplast;
    tplast.reserve(observations.size());
    for (const auto& o : observations) {
        tplast.push_back(o.tplast);
    }
    table.scheme.tlevel_boundaries = models::percentile_boundaries(tplast, base.tlevel_count);

    std::map<Levels, CwMaxEntry> fold;
    for (const auto& o : observations) {
        const auto key = models::quantize(o.actives, o.tplast, table.scheme);
        auto [it, inserted] = fold.try_emplace(key, CwMaxEntry{key, o.tp, o.cwenf});
        if (inserted) {
            continue;
        }
        auto& e = it->second;
        if (o.tp > e.mtp || (o.tp == e.mtp && o.cwenf < e.cwopt)) {
            e.mtp = o.tp;
            e.cwopt = o.cwenf;
        }
    }
    for (auto& [key, entry] : fold) {
        table.entries.push_back(entry);
    }
    return table;
}

CwMaxTable rebuild_cwmax(const CwObsQueue& queue, const QuantScheme& base)
{
    const auto obs = queue.all();
    return rebuild_cwmax(std::span<const Observation>(obs), base);
}

std::vector<models::TrainingSample> table_samples(const CwMaxTable& table)
{
    std::vector<models::TrainingSample> out;
    out.reserve(table.size());
    for (const auto& e : table.entries) {
        out.push_back({static_cast<double>(e.key.alevel), static_cast<double>(e.key.tlevel),
                       static_cast<double>(e.cwopt)});
    }
    return out;
}

// ------------------------------------------------------------------ config

void LearnerConfig::validate() const
{
    if (period_s < 1 || period_s > 10) {
        throw std::invalid_argument("LearnerConfig: period_s must lie in [1, 10]");
    }
    if (history_s < period_s) {
        throw std::invalid_argument("LearnerConfig: history_s must cover at least one period");
    }
    if (!(explore_prob >= 0.0 && explore_prob <= 1.0)) {
        throw std::invalid_argument("LearnerConfig: explore_prob must lie in [0, 1]");
    }
    if (calibration_period_s < 0) {
        throw std::invalid_argument("LearnerConfig: calibration_period_s must be >= 0");
    }
    if (cw_grid.empty()) {
        throw std::invalid_argument("LearnerConfig: cw_grid is empty");
    }
    for (std::size_t i = 0; i < cw_grid.size(); ++i) {
        if (cw_grid[i] < models::kMinCw || cw_grid[i] > models::kMaxCw ||
            (i > 0 && cw_grid[i] <= cw_grid[i - 1])) {
            throw std::invalid_argument(
                "LearnerConfig: cw_grid must strictly increase within [1, 1023]");
        }
    }
    if (dnn_epochs < 1 || dnn_batch < 1) {
        throw std::invalid_argument("LearnerConfig: dnn_epochs and dnn_batch must be >= 1");
    }
    quant.validate();
}

void to_json(nlohmann::json& j, const LearnerConfig& c)
{
    j = {{"history_s", c.history_s},
         {"explore_prob", c.explore_prob},
         {"calibration_period_s", c.calibration_period_s},
         {"period_s", c.period_s},
         {"cw_grid", c.cw_grid},
         {"estimator", to_string(c.estimator)},
         {"quant", c.quant},
         {"dnn_epochs", c.dnn_epochs},
         {"dnn_batch", c.dnn_batch}};
}

void from_json(const nlohmann::json& j, LearnerConfig& c)
{
    LearnerConfig d;
    c.history_s = j.value("history_s", d.history_s);
    c.explore_prob = j.value("explore_prob", d.explore_prob);
    c.calibration_period_s = j.value("calibration_period_s", d.calibration_period_s);
    c.period_s = j.value("period_s", d.period_s);
    c.cw_grid = j.value("cw_grid", d.cw_grid);
    c.estimator = parse_estimator(j.value("estimator", to_string(d.estimator)));
    c.quant = j.contains("quant") ? j.at("quant").get<QuantScheme>() : d.quant;
    c.dnn_epochs = j.value("dnn_epochs", d.dnn_epochs);
    c.dnn_batch = j.value("dnn_batch", d.dnn_batch);
    c.validate();
}

// ---------------------------------------------------------------- snapshot

int ModelSnapshot::predict(Levels levels) const
{
    if (!fitted) {
        throw std::logic_error("ModelSnapshot::predict: no fitted model");
    }
    const double x1 = levels.alevel;
    const double x2 = levels.tlevel;
    switch (kind) {
    case EstimatorKind::LR:
        return models::lr_predict(lr, x1, x2);
    case EstimatorKind::NB: {
        const int a = std::clamp(levels.alevel, 1, nb.n_alevels);
        const int t = std::clamp(levels.tlevel, 1, nb.n_tlevels);
        return models::nb_predict(nb, a, t);
    }
    case EstimatorKind::DNN:
        return models::dnn_predict(*dnn, x1, x2);
    }
    throw std::logic_error("ModelSnapshot::predict: unknown estimator");
}

void to_json(nlohmann::json& j, const ModelSnapshot& s)
{
    j = {{"estimator", to_string(s.kind)},
         {"fitted", s.fitted},
         {"degenerate", s.degenerate},
         {"training_rows", s.training_rows},
         {"quant", s.scheme}};
    if (!s.fitted) {
        return;
    }
    switch (s.kind) {
    case EstimatorKind::LR:
        j["coefficients"] = s.lr;
        break;
    case EstimatorKind::NB:
        j["nb"] = s.nb;
        break;
    case EstimatorKind::DNN:
        j["dnn"] = *s.dnn;
        break;
    }
}

// ----------------------------------------------------------------- learner

OnlineLearner::OnlineLearner(LearnerConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed), rng_(derive_seed(seed, 0)),
      queue_(static_cast<std::size_t>(config_.history_periods()))
{
    config_.validate();
    table_.scheme = config_.quant;
    auto empty = std::make_shared<ModelSnapshot>();
    empty->kind = config_.estimator;
    empty->scheme = config_.quant;
    snapshot_ = std::move(empty);
}

int OnlineLearner::calibration_step()
{
    const int cw = config_.cw_grid[rr_index_ % config_.cw_grid.size()];
    ++rr_index_;
    return cw;
}

Choice OnlineLearner::next_cw(int observed_actives, double observed_tp)
{
    return next_cw(observed_actives, observed_tp, rng_);
}

Choice OnlineLearner::next_cw(int observed_actives, double observed_tp, Rng& rng)
{
    Choice c;
    const bool calibrating =
        period_ < config_.calibration_periods() || queue_.distinct_windows() < 2;
    if (calibrating) {
        c = {calibration_step(), DecisionKind::Calibration, false};
    } else if (config_.explore_prob > 0.0 && uniform01(rng) < config_.explore_prob) {
        const auto k = uniform_int(rng, 0, static_cast<std::int64_t>(config_.cw_grid.size()) - 1);
        c = {config_.cw_grid[static_cast<std::size_t>(k)], DecisionKind::Explore, false};
    } else {
        const auto snap = snapshot();
        if (snap->fitted) {
            const auto levels = models::quantize(observed_actives, observed_tp, snap->scheme);
            c = {snap->predict(levels), DecisionKind::Predict, false};
        } else {
            c = {calibration_step(), DecisionKind::Calibration, true};
            ++fallbacks_;
        }
    }
    ++period_;
    last_ = c.kind;
    return c;
}

void OnlineLearner::record(const Observation& obs)
{
    queue_.record(obs);
    queue_.evict_before(obs.period - config_.history_periods() + 1);
    table_ = rebuild_cwmax(queue_, config_.quant);
    refit();
}

void OnlineLearner::record_outcome(const Choice& choice, double tplast, int actives, double tp)
{
    Observation obs;
    obs.tplast = tplast;
    obs.actives = actives;
    obs.cwenf = choice.cw;
    obs.tp = tp;
    obs.kind = choice.kind == DecisionKind::Predict ? ObsKind::Predicted : ObsKind::Calibration;
    obs.period = period_ - 1;
    record(obs);
}

void OnlineLearner::refit()
{
    if (table_.empty()) {
        return;
    }
    if (fitted_table_ && *fitted_table_ == table_) {
        return;
    }
    auto snap = std::make_shared<ModelSnapshot>();
    snap->kind = config_.estimator;
    snap->scheme = table_.scheme;
    const auto samples = table_samples(table_);
    snap->training_rows = samples.size();

    switch (config_.estimator) {
    case EstimatorKind::LR:
        snap->lr = models::lr_fit(samples);
        snap->degenerate = snap->lr.degenerate;
        break;
    case EstimatorKind::NB:
        snap->nb = models::nb_fit(samples, table_.scheme.alevel_count(), table_.scheme.tlevel_count);
        snap->degenerate = snap->nb.classes.size() < 2;
        break;
    case EstimatorKind::DNN: {
        // Re-initialised from the seed every time so an identical table
        // always yields an identical network.
        auto params = models::dnn_init({2, 10, 10, 1}, derive_seed(seed_, 1));
        Rng fit_rng(derive_seed(seed_, 2));
        models::dnn_fit(params, samples, config_.dnn_epochs, config_.dnn_batch, fit_rng);
        snap->degenerate = samples.size() < 2 || params.diverged;
        snap->dnn = std::move(params);
        break;
    }
    }
    snap->fitted = true;
    fitted_table_ = table_;
    ++fitted_count_;

    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(snap);
}

std::shared_ptr<const ModelSnapshot> OnlineLearner::snapshot() const
{
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
}

nlohmann::json OnlineLearner::state_json() const
{
    auto obs_json = [](const std::deque<Observation>& fifo) {
        auto arr = nlohmann::json::array();
        for (const auto& o : fifo) {
            arr.push_back({{"tplast", o.tplast},
                           {"actives", o.actives},
                           {"cwenf", o.cwenf},
                           {"tp", o.tp},
                           {"kind", to_string(o.kind)},
                           {"period", o.period}});
        }
        return arr;
    };
    auto table_json = nlohmann::json::array();
    for (const auto& e : table_.entries) {
        table_json.push_back(
            {{"alevel", e.key.alevel}, {"tlevel", e.key.tlevel}, {"mtp", e.mtp}, {"cwopt", e.cwopt}});
    }
    return {{"config", config_},
            {"periods", period_},
            {"fits", fitted_count_},
            {"fallbacks", fallbacks_},
            {"queue", {{"calibration", obs_json(queue_.calibration())},
                       {"predicted", obs_json(queue_.predicted())}}},
            {"cwmax", table_json},
            {"model", *snapshot()}};
}

} // namespace cwtune::learner
