#pragma once

// Contention-window predictors.
//
// All learned predictors regress or classify the optimal window from two
// features, (activity, load). Regression-style estimators work on ln(cw) and
// map back with round(exp(.)) clamped to [1, 1023].

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cwtune/rng.hpp"

namespace cwtune::models {

inline constexpr int kMinCw = 1;
inline constexpr int kMaxCw = 1023;

/// round(value) clamped to [1, 1023]; +inf and NaN map to 1023.
int clamp_cw(double value);

/// Closed-form adaptive backoff: floor(cw_min_default / 2 * actives - 1),
/// clamped to [1, 1023]. Returns nullopt for actives < 2 (no contention, the
/// caller should use cw = 1). Throws std::domain_error if cw_min_default < 2.
std::optional<int> aba_cw(int cw_min_default, int actives);

// ---------------------------------------------------------------- quantizer

/// Both boundary lists hold the inclusive upper bound of each level; a value
/// beyond the last bound lands in the top level. Levels are 1-based.
struct QuantScheme {
    std::vector<int> alevel_boundaries{3, 8};
    int tlevel_count = 5;
    std::vector<double> tlevel_boundaries;

    void validate() const;
    int alevel_count() const noexcept { return static_cast<int>(alevel_boundaries.size()); }

    friend bool operator==(const QuantScheme&, const QuantScheme&) = default;
};

struct Levels {
    int alevel = 1;
    int tlevel = 1;

    friend auto operator<=>(const Levels&, const Levels&) = default;
};

Levels quantize(int actives, double tp, const QuantScheme& scheme);

/// Quantiles at k/count (k = 1..count, linear interpolation), duplicates
/// removed so the result is strictly increasing.
std::vector<double> percentile_boundaries(std::vector<double> values, int count);

// ---------------------------------------------------------- training data

struct TrainingSample {
    double x1 = 0.0; // alevel, or raw actives
    double x2 = 0.0; // tlevel, or raw throughput in bits/s
    double cwopt = 1.0;

    double log_target() const;
};

// ----------------------------------------------------------------- OLS / LR

struct OlsFit {
    std::array<double, 3> coefficients{}; // intercept, x1, x2
    double r_squared = 0.0;
    bool degenerate = false;
};

/// Ordinary least squares of targets on [1, x1, x2]. A rank-deficient design
/// falls back to the intercept-only model and sets `degenerate`.
OlsFit ols_fit(std::span<const std::array<double, 2>> features, std::span<const double> targets);

struct ModelCoefficients {
    double theta0 = 0.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
    bool degenerate = false;
};

/// OLS of ln(cwopt) on (x1, x2). Fewer than three samples or collinear
/// features yield an intercept-only model flagged degenerate. Throws
/// std::invalid_argument on an empty sample.
ModelCoefficients lr_fit(std::span<const TrainingSample> samples);
double lr_log_cw(const ModelCoefficients& c, double x1, double x2);
int lr_predict(const ModelCoefficients& c, double x1, double x2);

// --------------------------------------------------------------- Naive Bayes

/// Classes are the distinct calibration windows seen in training. Feature
/// likelihoods are Laplace-smoothed over the full level domains.
struct NbModel {
    double alpha = 1.0;
    int n_alevels = 0;
    int n_tlevels = 0;
    std::vector<int> classes;                   // ascending
    std::vector<int> class_counts;              // per class
    std::vector<std::vector<int>> alevel_counts; // [class][alevel - 1]
    std::vector<std::vector<int>> tlevel_counts; // [class][tlevel - 1]
    int total = 0;

    double prior(std::size_t c) const;
    double likelihood_alevel(std::size_t c, int alevel) const;
    double likelihood_tlevel(std::size_t c, int tlevel) const;
    /// log P(s | CW) + log P(CW); the evidence P(s) is constant in CW.
    double log_score(std::size_t c, int alevel, int tlevel) const;
};

NbModel nb_fit(std::span<const TrainingSample> samples, int n_alevels, int n_tlevels,
               double alpha = 1.0);
/// Arg-max of the posterior numerator, ties toward the smaller window.
int nb_predict(const NbModel& model, int alevel, int tlevel);

// ----------------------------------------------------------------------- DNN

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Weights of out = b3 + w^T relu(b2 + W2 relu(b1 + W1 x)).
struct DnnWeights {
    Eigen::MatrixXd W1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd W2;
    Eigen::VectorXd b2;
    Eigen::VectorXd w;
    double b3 = 0.0;

    static DnnWeights zeros(int input, int hidden1, int hidden2);
    std::vector<double> flatten() const;
    void assign(std::span<const double> flat);
    std::size_t size() const;
    bool finite() const;
};

struct DnnParams {
    std::array<int, 4> layer_sizes{2, 10, 10, 1};
    DnnWeights weights;
    DnnWeights first_moment;
    DnnWeights second_moment;
    std::int64_t step = 0;
    AdamConfig adam;
    /// z-score applied to inputs before the first layer.
    std::array<double, 2> feature_mean{0.0, 0.0};
    std::array<double, 2> feature_scale{1.0, 1.0};
    bool diverged = false;
};

/// He-normal weights, zero biases and zero optimizer state.
DnnParams dnn_init(std::array<int, 4> layer_sizes, std::uint64_t seed);
/// Network output (ln cw) for raw features.
double dnn_forward(const DnnParams& params, double x1, double x2);
/// Mean squared error of the ln-cw regression.
double dnn_loss(const DnnParams& params, std::span<const TrainingSample> samples);
/// Backpropagated gradient of dnn_loss with respect to the weights.
DnnWeights dnn_gradient(const DnnParams& params, std::span<const TrainingSample> samples);

struct EpochResult {
    double loss = 0.0;
    bool diverged = false;
};

/// One shuffled pass of mini-batch adam. A non-finite loss aborts the epoch,
/// restores the weights, halves the learning rate and reports divergence.
EpochResult dnn_train_epoch(DnnParams& params, std::span<const TrainingSample> samples,
                            std::size_t batch_size, Rng& rng);
/// Sets the feature z-score from `samples` and the output bias to the mean
/// target, then runs `epochs` epochs. Returns the final training MSE.
double dnn_fit(DnnParams& params, std::span<const TrainingSample> samples, int epochs,
               std::size_t batch_size, Rng& rng);
int dnn_predict(const DnnParams& params, double x1, double x2);

// -------------------------------------------------------------------- theory

/// p_i * prod_{j != i} (1 - p_j). Throws std::out_of_range for a bad index
/// and std::domain_error for probabilities outside [0, 1].
double expected_throughput_share(std::span<const double> p, std::size_t i);

/// Attempt probability approximation 2 / (cw + 1).
inline double approx_attempt_probability(int cw) { return 2.0 / (cw + 1.0); }

// ------------------------------------------------------------ serialization

void to_json(nlohmann::json& j, const QuantScheme& q);
void from_json(const nlohmann::json& j, QuantScheme& q);
void to_json(nlohmann::json& j, const ModelCoefficients& c);
void from_json(const nlohmann::json& j, ModelCoefficients& c);
void to_json(nlohmann::json& j, const NbModel& m);
void from_json(const nlohmann::json& j, NbModel& m);
void to_json(nlohmann::json& j, const DnnParams& p);
void from_json(const nlohmann::json& j, DnnParams& p);

} // namespace cwtune::models
