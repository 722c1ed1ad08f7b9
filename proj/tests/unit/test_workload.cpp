#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "cwtune/rng.hpp"
#include "cwtune/workload.hpp"

using namespace cwtune;
using namespace cwtune::workload;

TEST(Trace, ActivityFromVolumes)
{
    const auto tr = parse_trace("t,a,b,c\n0,1200,0,5\n1,0,0,0\n2,7,7,7\n");
    EXPECT_EQ(tr.seconds(), 3u);
    EXPECT_EQ(tr.stations(), 3u);
    EXPECT_EQ(active_count(tr, 0), 2);
    EXPECT_EQ(active_count(tr, 1), 0);
    EXPECT_EQ(active_count(tr, 2), 3);
    EXPECT_EQ(tr.activity_row(0), (std::vector<bool>{true, false, true}));
    EXPECT_THROW(active_count(tr, 3), std::out_of_range);
    EXPECT_EQ(active_count_series(tr), (std::vector<double>{2, 0, 3}));
}

TEST(Trace, ParseErrors)
{
    EXPECT_THROW(parse_trace(""), ParseError);
    EXPECT_THROW(parse_trace("t,a\n"), ParseError);
    EXPECT_THROW(parse_trace("x,a\n0,1\n"), ParseError);
    try {
        parse_trace("t,a,b\n0,1,2\n1,3,-4\n");
        FAIL() << "negative volume accepted";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("negative volume in column"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_trace("t,a,b\n0,1\n"), ParseError);
    EXPECT_THROW(parse_trace("t,a\n0,1\n0,2\n"), ParseError);
    EXPECT_THROW(parse_trace("t,a\n1,1\n0,2\n"), ParseError);
    EXPECT_THROW(parse_trace("t,a\n0,abc\n"), ParseError);
    EXPECT_THROW(parse_trace("t,a\n0,1.5\n"), ParseError);
}

TEST(Trace, RoundTrip)
{
    GenParams p;
    p.n_stations = 5;
    p.duration_s = 300;
    p.seed = 3;
    const auto tr = generate_trace(p);
    EXPECT_EQ(parse_trace(serialize_trace(tr)), tr);

    const auto path = std::filesystem::temp_directory_path() / "cwtune_trace_roundtrip.csv";
    save_trace(tr, path);
    EXPECT_EQ(load_trace(path), tr);
    std::filesystem::remove(path);
    EXPECT_THROW(load_trace(path), std::runtime_error);
}

TEST(Trace, Slice)
{
    const auto tr = parse_trace("t,a\n0,1\n1,0\n2,3\n");
    const auto s = tr.slice(1, 2);
    EXPECT_EQ(s.seconds(), 2u);
    EXPECT_EQ(s.volume(1, 0), 3u);
    EXPECT_THROW(tr.slice(2, 2), std::out_of_range);
}

TEST(Generator, AbsorbingAndAlternating)
{
    GenParams p;
    p.n_stations = 2;
    p.duration_s = 100;
    p.chains = {OnOffParams{0.0, 0.5, true}};
    const auto on = generate_trace(p);
    for (std::size_t t = 0; t < on.seconds(); ++t) EXPECT_EQ(active_count(on, t), 2);

    p.chains = {OnOffParams{1.0, 1.0, true}};
    const auto alt = generate_trace(p);
    for (std::size_t t = 0; t < alt.seconds(); ++t) {
        EXPECT_EQ(alt.active(t, 0), t % 2 == 0);
    }
}

TEST(Generator, Deterministic)
{
    GenParams p;
    p.duration_s = 200;
    EXPECT_EQ(generate_trace(p), generate_trace(p));
    auto q = p;
    q.seed = p.seed + 1;
    EXPECT_NE(generate_trace(p), generate_trace(q));
}

TEST(Generator, ValidatesParams)
{
    GenParams p;
    p.chains = {OnOffParams{1.5, 0.1, {}}};
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p.chains = {OnOffParams{}, OnOffParams{}};
    p.n_stations = 3;
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Generator, OnOffLagOneAutocorrelation)
{
    // For a two-state chain the lag-k autocorrelation is (1 - p01 - p10)^k.
    for (auto [p_off, p_on] : {std::pair{0.1, 0.1}, std::pair{0.03, 0.07}, std::pair{0.2, 0.3}}) {
        GenParams p;
        p.n_stations = 1;
        p.duration_s = 200000;
        p.chains = {OnOffParams{p_off, p_on, {}}};
        p.seed = 11;
        const auto series = active_count_series(generate_trace(p));
        const auto r = acf(series, 3);
        const double lambda = 1.0 - p_off - p_on;
        for (std::size_t k = 1; k <= 3; ++k) {
            EXPECT_NEAR(r[k], std::pow(lambda, static_cast<double>(k)), 0.02)
                << p_off << "," << p_on << " lag " << k;
        }
    }
}

TEST(Acf, WhiteNoiseAndAr1)
{
    Rng rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> noise(100000);
    for (auto& x : noise) x = g(rng);
    const auto rn = acf(noise, 5);
    EXPECT_DOUBLE_EQ(rn[0], 1.0);
    const double band = 3.0 / std::sqrt(static_cast<double>(noise.size()));
    for (std::size_t k = 1; k <= 5; ++k) EXPECT_LT(std::abs(rn[k]), band);

    std::vector<double> ar(100000);
    ar[0] = 0.0;
    for (std::size_t t = 1; t < ar.size(); ++t) ar[t] = 0.7 * ar[t - 1] + g(rng);
    const auto ra = acf(ar, 2);
    EXPECT_NEAR(ra[1], 0.7, 0.02);
    EXPECT_NEAR(ra[2], 0.49, 0.02);

    const std::vector<double> flat(10, 2.0);
    EXPECT_THROW(acf(flat, 1), std::domain_error);
    EXPECT_THROW(acf(noise, noise.size()), std::domain_error);
}

TEST(Acf, DefaultWorkloadIsPersistent)
{
    GenParams p;
    p.duration_s = 6 * 3600;
    const auto series = active_count_series(generate_trace(p));
    EXPECT_GT(acf(series, 1)[1], 0.3);
    const auto tens = block_means(series, 10);
    EXPECT_GT(acf(tens, 1)[1], 0.3);
}

TEST(BlockMeans, Basics)
{
    const std::vector<double> v{1, 2, 3, 4, 5, 6, 7};
    EXPECT_EQ(block_means(v, 3), (std::vector<double>{2, 5}));
    EXPECT_EQ(block_means(v, 1), v);
}
