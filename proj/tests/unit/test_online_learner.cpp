#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cwtune/online_learner.hpp"

using namespace cwtune;
using namespace cwtune::learner;

namespace {

Observation obs(double tplast, int actives, int cw, double tp, std::int64_t period,
                ObsKind kind = ObsKind::Calibration)
{
    return {tplast, actives, cw, tp, kind, period};
}

// Synthetic channel: the best window grows with the number of active
// stations, throughput falls off in |log2(cw) - log2(best)|.
double synthetic_tp(int cw, int actives)
{
    const double best = 8.0 * std::max(actives, 1) - 1.0;
    const double d = std::log2(cw + 1.0) - std::log2(best + 1.0);
    return 3e8 * std::exp(-0.1 * d * d);
}

} // namespace

TEST(CwObsQueue, FifoBound)
{
    CwObsQueue q(600);
    q.record(obs(0, 1, 15, 1, 0));
    EXPECT_EQ(q.size(), 1u);
    for (int i = 1; i <= 700; ++i) q.record(obs(0, 1, 15, i, i));
    EXPECT_EQ(q.calibration().size(), 600u);
    EXPECT_EQ(q.calibration().front().period, 101);
    q.record(obs(0, 1, 31, 5, 701, ObsKind::Predicted));
    EXPECT_EQ(q.predicted().size(), 1u);
    EXPECT_EQ(q.distinct_windows(), 2u);
    EXPECT_THROW(CwObsQueue(0), std::invalid_argument);
    EXPECT_THROW(q.record(obs(0, 1, 0, 5, 1)), std::invalid_argument);
    EXPECT_THROW(q.record(obs(0, 1, 15, -1, 1)), std::invalid_argument);
}

TEST(CwObsQueue, ExampleRowsRetrievable)
{
    CwObsQueue q;
    const auto a = obs(123489331, 20, 15, 223489331, 0);
    const auto b = obs(123489331, 20, 31, 323489331, 1);
    q.record(a);
    q.record(b);
    ASSERT_EQ(q.calibration().size(), 2u);
    EXPECT_EQ(q.calibration()[0], a);
    EXPECT_EQ(q.calibration()[1], b);
}

TEST(CwObsQueue, EvictByAge)
{
    CwObsQueue q(10);
    for (int i = 0; i < 8; ++i) q.record(obs(0, 1, 15, 1, i, i % 2 ? ObsKind::Predicted : ObsKind::Calibration));
    q.evict_before(5);
    EXPECT_EQ(q.size(), 3u);
    for (const auto& o : q.all()) EXPECT_GE(o.period, 5);
}

TEST(CwMax, MaxFoldOfExampleRows)
{
    const std::vector<Observation> rows{obs(123489331, 20, 15, 223489331, 0),
                                        obs(123489331, 20, 31, 323489331, 1)};
    const auto t = rebuild_cwmax(std::span<const Observation>(rows), QuantScheme{});
    ASSERT_EQ(t.size(), 1u);
    EXPECT_DOUBLE_EQ(t.entries[0].mtp, 323489331);
    EXPECT_EQ(t.entries[0].cwopt, 31);
    EXPECT_EQ(t.entries[0].key.alevel, 2);
}

TEST(CwMax, SingleAndPartitioned)
{
    const std::vector<Observation> one{obs(5e7, 3, 63, 1e8, 0)};
    const auto t = rebuild_cwmax(std::span<const Observation>(one), QuantScheme{});
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t.entries[0].cwopt, 63);
    EXPECT_DOUBLE_EQ(t.entries[0].mtp, 1e8);

    const std::vector<Observation> two{obs(5e7, 3, 63, 1e8, 0), obs(5e7, 6, 15, 1e8, 1)};
    EXPECT_GE(rebuild_cwmax(std::span<const Observation>(two), QuantScheme{}).size(), 2u);
    EXPECT_TRUE(rebuild_cwmax(std::span<const Observation>(), QuantScheme{}).empty());
}

TEST(CwMax, TiesAndOrderIndependence)
{
    std::vector<Observation> rows;
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        const int a = static_cast<int>(uniform_int(rng, 1, 8));
        const int cw = (1 << uniform_int(rng, 1, 10)) - 1;
        rows.push_back(obs(1e6 * uniform_int(rng, 0, 20), a, cw, 1e6 * uniform_int(rng, 0, 5), i));
    }
    const auto base = rebuild_cwmax(std::span<const Observation>(rows), QuantScheme{});
    for (int k = 0; k < 10; ++k) {
        std::shuffle(rows.begin(), rows.end(), rng);
        EXPECT_EQ(rebuild_cwmax(std::span<const Observation>(rows), QuantScheme{}), base);
    }
    // Oracle: per key, the highest tp and among equals the smallest window.
    std::map<Levels, std::pair<double, int>> best;
    for (const auto& o : rows) {
        const auto key = models::quantize(o.actives, o.tplast, base.scheme);
        auto it = best.find(key);
        if (it == best.end() || o.tp > it->second.first ||
            (o.tp == it->second.first && o.cwenf < it->second.second)) {
            best[key] = {o.tp, o.cwenf};
        }
    }
    ASSERT_EQ(base.size(), best.size());
    for (const auto& e : base.entries) {
        EXPECT_DOUBLE_EQ(e.mtp, best.at(e.key).first);
        EXPECT_EQ(e.cwopt, best.at(e.key).second);
    }
}

TEST(Learner, CalibrationIsRoundRobin)
{
    LearnerConfig c;
    OnlineLearner l(c, 1);
    for (int round = 0; round < 3; ++round) {
        for (int cw : c.cw_grid) {
            const auto ch = l.next_cw(4, 1e8);
            EXPECT_EQ(ch.cw, cw);
            EXPECT_EQ(ch.kind, DecisionKind::Calibration);
            l.record_outcome(ch, 1e8, 4, synthetic_tp(ch.cw, 4));
        }
    }
    EXPECT_EQ(l.periods(), 30);
    const auto next = l.next_cw(4, 1e8);
    EXPECT_NE(next.kind, DecisionKind::Calibration);
}

TEST(Learner, StaysCalibratingWithOneWindow)
{
    LearnerConfig c;
    c.calibration_period_s = 0;
    c.cw_grid = {15, 31};
    OnlineLearner l(c, 1);
    const auto first = l.next_cw(2, 0);
    EXPECT_EQ(first.kind, DecisionKind::Calibration);
    EXPECT_EQ(first.cw, 15);
    l.record_outcome(first, 0, 2, 1e8);
    const auto second = l.next_cw(2, 1e8);
    EXPECT_EQ(second.kind, DecisionKind::Calibration);
    EXPECT_EQ(second.cw, 31);
}

TEST(Learner, OneEntryTablePredictsThatWindow)
{
    LearnerConfig c;
    OnlineLearner l(c, 1);
    l.record(obs(1e8, 4, 63, 2e8, 0));
    ASSERT_EQ(l.table().size(), 1u);
    const auto snap = l.snapshot();
    ASSERT_TRUE(snap->fitted);
    EXPECT_TRUE(snap->degenerate);
    EXPECT_EQ(snap->predict({2, 1}), 63);
}

TEST(Learner, ExploreUniformWhenAlwaysExploring)
{
    LearnerConfig c;
    c.explore_prob = 1.0;
    c.calibration_period_s = 10;
    OnlineLearner l(c, 9);
    for (int i = 0; i < 10; ++i) {
        const auto ch = l.next_cw(4, 1e8);
        l.record_outcome(ch, 1e8, 4, synthetic_tp(ch.cw, 4));
    }
    const int n = 20000;
    std::map<int, int> counts;
    for (int i = 0; i < n; ++i) {
        const auto ch = l.next_cw(4, 1e8);
        ASSERT_EQ(ch.kind, DecisionKind::Explore);
        counts[ch.cw] += 1;
    }
    const double p = 1.0 / static_cast<double>(c.cw_grid.size());
    const double sigma = std::sqrt(n * p * (1 - p));
    for (int cw : c.cw_grid) {
        EXPECT_NEAR(counts[cw], n * p, 3 * sigma) << "cw " << cw;
    }
}

TEST(Learner, NoExplorationWhenDisabled)
{
    LearnerConfig c;
    c.explore_prob = 0.0;
    OnlineLearner l(c, 2);
    for (int i = 0; i < 200; ++i) {
        const auto ch = l.next_cw(4, 1e8);
        if (i >= 30) {
            EXPECT_EQ(ch.kind, DecisionKind::Predict);
        }
        l.record_outcome(ch, 1e8, 4, synthetic_tp(ch.cw, 4));
    }
}

TEST(Learner, NoLockIn)
{
    LearnerConfig c;
    OnlineLearner l(c, 3);
    Rng env(8);
    std::set<int> enforced_after_calibration;
    double tplast = 0.0;
    int actives = 4;
    for (int t = 0; t < 10000; ++t) {
        const auto ch = l.next_cw(actives, tplast);
        if (t >= c.calibration_periods()) enforced_after_calibration.insert(ch.cw);
        const int now = static_cast<int>(uniform_int(env, 1, 8));
        const double tp = synthetic_tp(ch.cw, now);
        l.record_outcome(ch, tplast, now, tp);
        tplast = tp;
        actives = now;
    }
    // Predictions may fall between grid points; every grid window must still recur.
    for (int cw : c.cw_grid) EXPECT_TRUE(enforced_after_calibration.count(cw)) << "cw " << cw;
}

TEST(Learner, HistoryBound)
{
    LearnerConfig c;
    c.history_s = 100;
    OnlineLearner l(c, 4);
    double tplast = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const auto ch = l.next_cw(4, tplast);
        const double tp = synthetic_tp(ch.cw, 4);
        l.record_outcome(ch, tplast, 4, tp);
        tplast = tp;
        EXPECT_LE(l.queue().size(), 100u);
        for (const auto& o : l.queue().all()) EXPECT_GT(o.period, t - 100);
    }
}

TEST(Learner, LearnsBestWindowPerLevel)
{
    LearnerConfig c;
    c.explore_prob = 0.0;
    OnlineLearner l(c, 5);
    Rng env(6);
    double tplast = 0.0;
    int actives = 2;
    for (int t = 0; t < 400; ++t) {
        const auto ch = l.next_cw(actives, tplast);
        const int now = uniform_int(env, 0, 1) ? 2 : 8;
        const double tp = synthetic_tp(ch.cw, now);
        l.record_outcome(ch, tplast, now, tp);
        tplast = tp;
        actives = now;
    }
    const auto snap = l.snapshot();
    ASSERT_TRUE(snap->fitted);
    // More actives never asks for a smaller window.
    EXPECT_GE(snap->predict({2, 3}), snap->predict({1, 3}));
}

TEST(Learner, RefitIsDeterministicAndIdempotent)
{
    LearnerConfig c;
    c.estimator = EstimatorKind::DNN;
    c.dnn_epochs = 30;
    OnlineLearner a(c, 7);
    OnlineLearner b(c, 7);
    double tplast = 0.0;
    for (int t = 0; t < 60; ++t) {
        const auto ca = a.next_cw(3, tplast);
        const auto cb = b.next_cw(3, tplast);
        ASSERT_EQ(ca.cw, cb.cw);
        const double tp = synthetic_tp(ca.cw, t % 2 ? 3 : 6);
        a.record_outcome(ca, tplast, t % 2 ? 3 : 6, tp);
        b.record_outcome(cb, tplast, t % 2 ? 3 : 6, tp);
        tplast = tp;
    }
    EXPECT_EQ(nlohmann::json(*a.snapshot()).dump(), nlohmann::json(*b.snapshot()).dump());
    const auto before = a.snapshot();
    a.refit();
    EXPECT_EQ(a.snapshot(), before);
    EXPECT_EQ(a.state_json().dump(), b.state_json().dump());
}

TEST(Learner, ConfigValidationAndJson)
{
    LearnerConfig c;
    c.explore_prob = 1.5;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.cw_grid = {15, 7};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.estimator = EstimatorKind::NB;
    c.history_s = 120;
    const auto d = nlohmann::json(c).get<LearnerConfig>();
    EXPECT_EQ(d.estimator, EstimatorKind::NB);
    EXPECT_EQ(d.history_s, 120);
    EXPECT_EQ(parse_estimator("dnn"), EstimatorKind::DNN);
    EXPECT_THROW(parse_estimator("svm"), std::invalid_argument);
}

TEST(Learner, UnfittedSnapshotRejectsPredict)
{
    OnlineLearner l(LearnerConfig{}, 1);
    EXPECT_FALSE(l.snapshot()->fitted);
    EXPECT_THROW(l.snapshot()->predict({1, 1}), std::logic_error);
}
