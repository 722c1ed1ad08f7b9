#include <gtest/gtest.h>

#include <cmath>

#include "cwtune/experiments.hpp"

using namespace cwtune;
using namespace cwtune::bench;

TEST(Jain, Examples)
{
    EXPECT_DOUBLE_EQ(jain_index(std::vector<double>{5, 5, 5, 5}), 1.0);
    EXPECT_DOUBLE_EQ(jain_index(std::vector<double>{9, 0, 0, 0, 0, 0, 0, 0}), 0.125);
    EXPECT_NEAR(jain_index(std::vector<double>{1, 2, 3, 4}), 100.0 / 120.0, 1e-15);
    EXPECT_THROW(jain_index(std::vector<double>{}), std::invalid_argument);
    EXPECT_THROW(jain_index(std::vector<double>{0, 0}), std::domain_error);
    EXPECT_THROW(jain_index(std::vector<double>{1, -1}), std::domain_error);
}

TEST(Jain, BoundsOnRandomInputs)
{
    Rng rng(12);
    for (int k = 0; k < 10000; ++k) {
        const auto n = static_cast<std::size_t>(uniform_int(rng, 1, 16));
        std::vector<double> x(n);
        for (auto& v : x) v = uniform_int(rng, 0, 3) == 0 ? 0.0 : uniform01(rng) * 1e9;
        x[0] += 1.0;
        const double j = jain_index(x);
        EXPECT_GE(j, 1.0 / static_cast<double>(n) - 1e-12);
        EXPECT_LE(j, 1.0 + 1e-12);
    }
}

TEST(AvgSigl, Examples)
{
    const std::vector<double> b{1e8, 2e8, 3e8, 4e8};
    std::vector<double> a;
    for (double v : b) a.push_back(1.35 * v);
    auto r = avg_sigl(a, b);
    EXPECT_NEAR(r.avg_pct, 35.0, 1e-9);
    EXPECT_EQ(r.sigl, 0);

    const std::vector<double> d{99, 101, 101, 101};
    const std::vector<double> ref{100, 100, 100, 100};
    r = avg_sigl(d, ref);
    EXPECT_EQ(r.sigl, 25);
    EXPECT_NEAR(r.avg_pct, 0.5, 1e-12);

    r = avg_sigl(b, b);
    EXPECT_DOUBLE_EQ(r.avg_pct, 0.0);
    EXPECT_EQ(r.sigl, 100);
}

TEST(AvgSigl, RoundsUpToFive)
{
    // 1 losing period in 30 is 3.3%, reported as 5.
    std::vector<double> a(30, 2.0), b(30, 1.0);
    a[7] = 1.0;
    EXPECT_EQ(avg_sigl(a, b).sigl, 5);
}

TEST(AvgSigl, ZeroReferenceExcluded)
{
    const std::vector<double> a{1, 2, 3};
    const std::vector<double> b{0, 1, 3};
    const auto r = avg_sigl(a, b);
    EXPECT_EQ(r.excluded, 1u);
    EXPECT_TRUE(r.flagged);
    EXPECT_DOUBLE_EQ(r.avg_pct, 50.0);
    EXPECT_THROW(avg_sigl(std::vector<double>{1}, std::vector<double>{0}), std::domain_error);
    EXPECT_THROW(avg_sigl(std::vector<double>{1}, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST(AvgSigl, SelfComparisonOnRandomSeries)
{
    Rng rng(3);
    for (int k = 0; k < 100; ++k) {
        std::vector<double> a(50);
        for (auto& v : a) v = 1.0 + uniform01(rng) * 1e8;
        const auto r = avg_sigl(a, a);
        EXPECT_DOUBLE_EQ(r.avg_pct, 0.0);
        EXPECT_EQ(r.sigl, 100);
    }
}

TEST(Sweep, SingleStationAndShape)
{
    SweepSpec s;
    s.n_aps = {1, 4};
    s.cw_grid = {7, 63};
    s.burst_s = 1.0;
    s.repetitions = 3;
    const auto cells = opportunity_sweep(s);
    ASSERT_EQ(cells.size(), 2u * 4u);
    for (const auto& c : cells) {
        EXPECT_EQ(c.rep_tp_bps.size(), 3u);
        if (c.n == 1) {
            EXPECT_DOUBLE_EQ(c.retry_fraction, 0.0) << c.policy;
        }
        EXPECT_GT(c.median_tp_bps, 0.0);
        EXPECT_LE(c.jain, 1.0 + 1e-12);
    }
    EXPECT_EQ(sweep_csv(cells), sweep_csv(opportunity_sweep(s)));
    s.repetitions = 0;
    EXPECT_THROW(opportunity_sweep(s), std::invalid_argument);
}

TEST(Sweep, BestFixedWindowGrowsWithContenders)
{
    SweepSpec s;
    s.n_aps = {2, 4, 8};
    s.include_beb_baselines = false;
    s.burst_s = 2.0;
    const auto cells = opportunity_sweep(s);
    int previous = 0;
    for (int n : s.n_aps) {
        int best_cw = 0;
        double best_tp = -1.0;
        for (const auto& c : cells) {
            if (c.n == n && c.median_tp_bps > best_tp) {
                best_tp = c.median_tp_bps;
                best_cw = c.cw;
            }
        }
        EXPECT_GE(best_cw, previous) << "n=" << n;
        previous = best_cw;
    }
}

TEST(Calibration, SinglePeriod)
{
    const auto tr = workload::parse_trace("t,a,b,c\n0,10,10,0\n");
    mac::SimConfig sim;
    const auto data = exhaustive_calibration(tr, {15, 31}, sim, 4);
    ASSERT_EQ(data.rows.size(), 1u);
    EXPECT_TRUE(data.rows[0].cwopt == 15 || data.rows[0].cwopt == 31);
    EXPECT_EQ(data.rows[0].actives, 2);
    EXPECT_EQ(data.rows[0].aba_cw, 14);
    EXPECT_DOUBLE_EQ(data.rows[0].tplast, 0.0);
    EXPECT_EQ(data.index_of(31), 1u);
    EXPECT_THROW(data.index_of(63), std::out_of_range);
    EXPECT_THROW(exhaustive_calibration(tr, {31, 15}, sim, 4), std::invalid_argument);
}

TEST(Calibration, OracleDominates)
{
    workload::GenParams g;
    g.duration_s = 40;
    const auto tr = workload::generate_trace(g);
    mac::SimConfig sim;
    const std::vector<int> grid{1, 3, 7, 15, 31, 63, 127, 255, 511, 1023};
    const auto data = exhaustive_calibration(tr, grid, sim, 9);
    ASSERT_EQ(data.rows.size(), 40u);
    for (std::size_t t = 0; t < data.rows.size(); ++t) {
        const auto& r = data.rows[t];
        for (double tp : r.tp_by_cw) EXPECT_GE(r.tpopt, tp);
        EXPECT_DOUBLE_EQ(r.tpopt, r.tp_by_cw[data.index_of(r.cwopt)]);
        if (t > 0) {
            EXPECT_DOUBLE_EQ(r.tplast, data.rows[t - 1].tpopt);
        }
    }
    EXPECT_EQ(data.csv(), exhaustive_calibration(tr, grid, sim, 9).csv());

    const auto points = training_speed_sim(data, {"OPT", "BEB", "ABA", "MLBA-LR", "MLBA-NB"},
                                           {5, 10}, learner::LearnerConfig{}, 1);
    for (const auto& p : points) {
        EXPECT_LE(p.ratio, 1.0 + 1e-12) << p.algorithm;
        EXPECT_GT(p.ratio, 0.0) << p.algorithm;
        if (p.algorithm == "OPT") {
            EXPECT_DOUBLE_EQ(p.ratio, 1.0);
        }
    }
    EXPECT_THROW(training_speed_sim(data, {"SVM"}, {5}, learner::LearnerConfig{}, 1),
                 std::invalid_argument);
}

TEST(Calibration, FitComparisonRecoversNoiselessLogLinear)
{
    CalibrationData d;
    d.cw_grid = {1, 3, 7, 15, 31, 63, 127, 255, 511, 1023};
    int period = 0;
    for (int a = 1; a <= 8; ++a) {
        for (int k = 0; k < 5; ++k) {
            CalibrationRow r;
            r.period = period++;
            r.actives = a;
            r.tplast = 1e8 + 1e7 * k;
            r.cwopt = d.cw_grid[static_cast<std::size_t>(a)];
            d.rows.push_back(r);
        }
    }
    const auto f = compare_log_fit(d);
    EXPECT_EQ(f.rows, 40u);
    // ln(2^(a+1) - 1) is nearly linear in a, the raw window is not.
    EXPECT_GT(f.r2_log, f.r2_linear);
    EXPECT_GT(f.r2_log, 0.95);
}

TEST(Longitudinal, SelfComparisonAndSwapAlgebra)
{
    auto base = bench_scenario();
    base.synthetic.duration_s = 120;
    base.sim.frame_slots = 50;
    base.sim.collision_slots_basic = 50;
    const auto trace = control::resolve_trace(base);
    const auto windows = strided_windows(trace.seconds(), 0, 60, 30, 2);
    const auto res = longitudinal_benchmark(trace, windows, {"BEB", "FixedCW(63)", "BEB"}, base);
    ASSERT_EQ(res.series.size(), 3u);
    EXPECT_EQ(res.series[0], res.series[2]);
    EXPECT_DOUBLE_EQ(res.avg[0][0], 0.0);
    EXPECT_EQ(res.sigl[0][0], 100);
    EXPECT_DOUBLE_EQ(res.avg[0][2], 0.0);

    const double ab = res.avg[1][0];
    const double ba = res.avg[0][1];
    EXPECT_NEAR(ab, -ba / (1.0 + ba / 100.0), 0.1 * std::abs(ab) + 0.5);
    EXPECT_EQ(res.csv(), longitudinal_benchmark(trace, windows, {"BEB", "FixedCW(63)", "BEB"}, base).csv());
}

TEST(Windows, Strided)
{
    const auto w = strided_windows(6 * 3600, 3600, 3600, 900, 5);
    ASSERT_EQ(w.size(), 5u);
    EXPECT_EQ(w[0].begin, 3600u);
    EXPECT_EQ(w[4].begin, 5u * 3600);
    EXPECT_EQ(w[4].length, 900u);
    EXPECT_THROW(strided_windows(3600, 0, 900, 900, 5), std::out_of_range);
    EXPECT_THROW(strided_windows(3600, 0, 10, 20, 1), std::invalid_argument);
}

TEST(NormalBand, Basics)
{
    const auto [m, h] = normal_band(std::vector<double>{1, 2, 3});
    EXPECT_DOUBLE_EQ(m, 2.0);
    EXPECT_NEAR(h, 1.96 / std::sqrt(3.0), 1e-12);
}
