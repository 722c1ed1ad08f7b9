#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cwtune/backoff_models.hpp"

using namespace cwtune;
using namespace cwtune::models;

TEST(ClampCw, Rounding)
{
    EXPECT_EQ(clamp_cw(0.2), 1);
    EXPECT_EQ(clamp_cw(14.5), 15);
    EXPECT_EQ(clamp_cw(5000.0), 1023);
    EXPECT_EQ(clamp_cw(std::numeric_limits<double>::infinity()), 1023);
    EXPECT_EQ(clamp_cw(std::numeric_limits<double>::quiet_NaN()), 1023);
    EXPECT_EQ(clamp_cw(-3.0), 1);
}

TEST(Aba, ClosedForm)
{
    EXPECT_EQ(aba_cw(15, 2), 14);
    EXPECT_EQ(aba_cw(15, 3), 21);
    EXPECT_EQ(aba_cw(15, 8), 59);
    EXPECT_EQ(aba_cw(15, 200), 1023);
    EXPECT_EQ(aba_cw(16, 4), 31);
    EXPECT_FALSE(aba_cw(15, 1).has_value());
    EXPECT_FALSE(aba_cw(15, 0).has_value());
    EXPECT_THROW(aba_cw(1, 4), std::domain_error);
}

TEST(Quantize, InclusiveUpperBounds)
{
    QuantScheme q;
    q.tlevel_boundaries = {10.0, 20.0, 30.0};
    EXPECT_EQ(quantize(0, 0.0, q), (Levels{1, 1}));
    EXPECT_EQ(quantize(3, 10.0, q), (Levels{1, 1}));
    EXPECT_EQ(quantize(4, 10.5, q), (Levels{2, 2}));
    EXPECT_EQ(quantize(8, 30.0, q), (Levels{2, 3}));
    EXPECT_EQ(quantize(9, 1e9, q), (Levels{2, 3}));
    QuantScheme bad;
    bad.alevel_boundaries = {5, 3};
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Quantize, Percentiles)
{
    EXPECT_EQ(percentile_boundaries({1, 2, 3, 4, 5}, 4), (std::vector<double>{2, 3, 4, 5}));
    EXPECT_EQ(percentile_boundaries({7, 7, 7}, 5), (std::vector<double>{7}));
    EXPECT_TRUE(percentile_boundaries({}, 5).empty());
    const auto b = percentile_boundaries({0, 10}, 4);
    ASSERT_EQ(b.size(), 4u);
    EXPECT_DOUBLE_EQ(b[0], 2.5);
    EXPECT_DOUBLE_EQ(b[3], 10.0);
}

TEST(Ols, NoiselessRecovery)
{
    Rng rng(3);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<std::array<double, 2>> x;
    std::vector<double> y;
    for (int i = 0; i < 40; ++i) {
        const double a = u(rng);
        const double b = u(rng) * 1e8; // raw throughput scale
        x.push_back({a, b});
        y.push_back(1.5 + 0.25 * a - 3e-9 * b);
    }
    const auto fit = ols_fit(x, y);
    EXPECT_FALSE(fit.degenerate);
    EXPECT_NEAR(fit.coefficients[0], 1.5, 1e-9);
    EXPECT_NEAR(fit.coefficients[1], 0.25, 1e-10);
    EXPECT_NEAR(fit.coefficients[2], -3e-9, 1e-17);
    EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
}

TEST(Ols, CollinearFallsBackToIntercept)
{
    std::vector<std::array<double, 2>> x{{1, 2}, {2, 4}, {3, 6}, {4, 8}};
    std::vector<double> y{1, 2, 3, 6};
    const auto fit = ols_fit(x, y);
    EXPECT_TRUE(fit.degenerate);
    EXPECT_DOUBLE_EQ(fit.coefficients[0], 3.0);
    EXPECT_DOUBLE_EQ(fit.coefficients[1], 0.0);
    EXPECT_DOUBLE_EQ(fit.coefficients[2], 0.0);
    EXPECT_THROW(ols_fit(std::span<const std::array<double, 2>>{}, std::span<const double>{}),
                 std::invalid_argument);
}

TEST(Lr, LogLinearTargets)
{
    std::vector<TrainingSample> s;
    for (int a = 1; a <= 2; ++a) {
        for (int t = 1; t <= 5; ++t) {
            s.push_back({double(a), double(t), std::exp(2.0 + 0.6 * a - 0.2 * t)});
        }
    }
    const auto c = lr_fit(s);
    EXPECT_FALSE(c.degenerate);
    EXPECT_NEAR(c.theta0, 2.0, 1e-9);
    EXPECT_NEAR(c.theta1, 0.6, 1e-9);
    EXPECT_NEAR(c.theta2, -0.2, 1e-9);
    EXPECT_EQ(lr_predict(c, 2, 1), clamp_cw(std::exp(3.0)));
}

TEST(Lr, FewSamplesAreDegenerate)
{
    std::vector<TrainingSample> one{{1, 1, 31}};
    const auto c = lr_fit(one);
    EXPECT_TRUE(c.degenerate);
    EXPECT_EQ(lr_predict(c, 2, 5), 31);
    std::vector<TrainingSample> none;
    EXPECT_THROW(lr_fit(none), std::invalid_argument);
    std::vector<TrainingSample> bad{{1, 1, 0.5}};
    EXPECT_THROW(lr_fit(bad), std::domain_error);
}

namespace {

// Posterior numerator as an exact fraction: count_c (n_ac + 1) (n_tc + 1) /
// (N (n_c + A) (n_c + T)). N is common to all classes and dropped.
struct Fraction {
    long long num;
    long long den;
};

int brute_force_nb(const std::vector<TrainingSample>& s, int A, int T, int a, int t)
{
    std::vector<int> classes;
    for (const auto& x : s) classes.push_back(static_cast<int>(x.cwopt));
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    int best = -1;
    Fraction best_f{0, 1};
    for (int cw : classes) {
        long long n_c = 0, n_ac = 0, n_tc = 0;
        for (const auto& x : s) {
            if (static_cast<int>(x.cwopt) != cw) continue;
            ++n_c;
            if (static_cast<int>(x.x1) == a) ++n_ac;
            if (static_cast<int>(x.x2) == t) ++n_tc;
        }
        const Fraction f{n_c * (n_ac + 1) * (n_tc + 1), (n_c + A) * (n_c + T)};
        if (best < 0 || f.num * best_f.den > best_f.num * f.den) {
            best = cw;
            best_f = f;
        }
    }
    return best;
}

} // namespace

TEST(NaiveBayes, MatchesEnumeration)
{
    const std::vector<int> grid{1, 3, 7, 15, 31, 63};
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        Rng rng(seed);
        const int A = 2;
        const int T = 5;
        std::vector<TrainingSample> s;
        const auto n = uniform_int(rng, 1, 25);
        for (int i = 0; i < n; ++i) {
            s.push_back({double(uniform_int(rng, 1, A)), double(uniform_int(rng, 1, T)),
                         double(grid[static_cast<std::size_t>(uniform_int(rng, 0, 5))])});
        }
        const auto m = nb_fit(s, A, T);
        for (int a = 1; a <= A; ++a) {
            for (int t = 1; t <= T; ++t) {
                EXPECT_EQ(nb_predict(m, a, t), brute_force_nb(s, A, T, a, t))
                    << "seed " << seed << " a " << a << " t " << t;
            }
        }
    }
}

TEST(NaiveBayes, TiesGoToSmallerWindow)
{
    std::vector<TrainingSample> s{{1, 1, 63}, {1, 1, 15}};
    EXPECT_EQ(nb_predict(nb_fit(s, 2, 5), 1, 1), 15);
    EXPECT_THROW(nb_fit(s, 2, 5).likelihood_alevel(0, 3), std::out_of_range);
    std::vector<TrainingSample> outside{{3, 1, 15}};
    EXPECT_THROW(nb_fit(outside, 2, 5), std::out_of_range);
    EXPECT_THROW(nb_predict(NbModel{}, 1, 1), std::logic_error);
}

namespace {

std::vector<TrainingSample> dnn_samples()
{
    std::vector<TrainingSample> s;
    for (int a = 1; a <= 2; ++a)
        for (int t = 1; t <= 5; ++t) s.push_back({double(a), double(t), std::exp(1.0 + a + 0.3 * t)});
    return s;
}

} // namespace

TEST(Dnn, GradientMatchesFiniteDifferences)
{
    auto p = dnn_init({2, 10, 10, 1}, 17);
    p.feature_mean = {1.5, 3.0};
    p.feature_scale = {0.5, 1.4};
    p.weights.b1.setConstant(0.05);
    p.weights.b2.setConstant(0.05);
    const auto s = dnn_samples();
    const auto analytic = dnn_gradient(p, s).flatten();
    auto theta = p.weights.flatten();
    ASSERT_EQ(analytic.size(), theta.size());
    const double h = 1e-6;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        auto q = p;
        auto plus = theta;
        auto minus = theta;
        plus[k] += h;
        minus[k] -= h;
        q.weights.assign(plus);
        const double lp = dnn_loss(q, s);
        q.weights.assign(minus);
        const double lm = dnn_loss(q, s);
        const double numeric = (lp - lm) / (2 * h);
        EXPECT_NEAR(analytic[k], numeric, 1e-5 * std::max(1.0, std::abs(numeric))) << "param " << k;
    }
}

TEST(Dnn, FitReducesLossAndIsDeterministic)
{
    const auto s = dnn_samples();
    auto p = dnn_init({2, 10, 10, 1}, 5);
    auto q = p;
    Rng r1(9), r2(9);
    const double before = dnn_loss(p, s);
    const double after = dnn_fit(p, s, 300, 4, r1);
    EXPECT_LT(after, before);
    EXPECT_LT(after, 0.05);
    EXPECT_DOUBLE_EQ(dnn_fit(q, s, 300, 4, r2), after);
    EXPECT_EQ(p.weights.flatten(), q.weights.flatten());
}

TEST(Dnn, DivergenceRestoresAndHalvesRate)
{
    const auto s = dnn_samples();
    auto p = dnn_init({2, 10, 10, 1}, 5);
    auto flat = p.weights.flatten();
    for (auto& v : flat) v = 1e200;
    p.weights.assign(flat);
    const auto before = p.weights.flatten();
    const double lr = p.adam.learning_rate;
    Rng rng(1);
    const auto r = dnn_train_epoch(p, s, 4, rng);
    EXPECT_TRUE(r.diverged);
    EXPECT_TRUE(p.diverged);
    EXPECT_DOUBLE_EQ(p.adam.learning_rate, lr / 2);
    EXPECT_EQ(p.weights.flatten(), before);
}

TEST(Dnn, InitShapesAndSerialization)
{
    const auto p = dnn_init({2, 10, 10, 1}, 3);
    EXPECT_EQ(p.weights.size(), 2u * 10 + 10 + 10 * 10 + 10 + 10 + 1);
    EXPECT_DOUBLE_EQ(p.weights.b1.norm(), 0.0);
    EXPECT_THROW(dnn_init({3, 10, 10, 1}, 3), std::invalid_argument);
    nlohmann::json j = p;
    const auto q = j.get<DnnParams>();
    EXPECT_EQ(q.weights.flatten(), p.weights.flatten());
    EXPECT_EQ(q.layer_sizes, p.layer_sizes);
    EXPECT_DOUBLE_EQ(dnn_forward(q, 1.0, 2.0), dnn_forward(p, 1.0, 2.0));
}

TEST(Serialization, RoundTrips)
{
    QuantScheme q;
    q.tlevel_boundaries = {1.0, 2.5};
    EXPECT_EQ(nlohmann::json(q).get<QuantScheme>(), q);

    ModelCoefficients c{1.0, -2.0, 3e-8, true};
    const auto c2 = nlohmann::json(c).get<ModelCoefficients>();
    EXPECT_EQ(c2.theta0, c.theta0);
    EXPECT_EQ(c2.theta2, c.theta2);
    EXPECT_EQ(c2.degenerate, true);

    std::vector<TrainingSample> s{{1, 2, 15}, {2, 3, 63}, {2, 3, 63}};
    const auto m = nb_fit(s, 2, 5);
    const auto m2 = nlohmann::json(m).get<NbModel>();
    for (int a = 1; a <= 2; ++a)
        for (int t = 1; t <= 5; ++t) EXPECT_EQ(nb_predict(m2, a, t), nb_predict(m, a, t));
}

TEST(Theory, ProductForm)
{
    const std::vector<double> p{0.5, 0.25, 0.125};
    EXPECT_DOUBLE_EQ(expected_throughput_share(p, 0), 0.5 * 0.75 * 0.875);
    EXPECT_DOUBLE_EQ(expected_throughput_share(p, 2), 0.125 * 0.5 * 0.75);
    EXPECT_THROW(expected_throughput_share(p, 3), std::out_of_range);
    const std::vector<double> bad{0.5, 1.5};
    EXPECT_THROW(expected_throughput_share(bad, 0), std::domain_error);
    EXPECT_DOUBLE_EQ(approx_attempt_probability(7), 0.25);
}
