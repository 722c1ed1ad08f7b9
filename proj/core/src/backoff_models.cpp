#include "cwtune/backoff_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cwtune::models {

int clamp_cw(double value)
{
    if (std::isnan(value) || value >= static_cast<double>(kMaxCw)) {
        return kMaxCw;
    }
    const double r = std::round(value);
    if (r <= static_cast<double>(kMinCw)) {
        return kMinCw;
    }
    return static_cast<int>(r);
}

std::optional<int> aba_cw(int cw_min_default, int actives)
{
    if (cw_min_default < 2) {
        throw std::domain_error("aba_cw: cw_min_default must be >= 2");
    }
    if (actives < 2) {
        return std::nullopt;
    }
    const double cw = std::floor(cw_min_default / 2.0 * actives - 1.0);
    return std::clamp(static_cast<int>(cw), kMinCw, kMaxCw);
}

// ---------------------------------------------------------------- quantizer

void QuantScheme::validate() const
{
    if (alevel_boundaries.empty()) {
        throw std::invalid_argument("QuantScheme: need at least one alevel boundary");
    }
    if (!std::is_sorted(alevel_boundaries.begin(), alevel_boundaries.end(), std::less_equal<>{}) ||
        std::adjacent_find(alevel_boundaries.begin(), alevel_boundaries.end()) !=
            alevel_boundaries.end()) {
        throw std::invalid_argument("QuantScheme: alevel boundaries must strictly increase");
    }
    if (tlevel_count < 1) {
        throw std::invalid_argument("QuantScheme: tlevel_count must be >= 1");
    }
    if (static_cast<int>(tlevel_boundaries.size()) > tlevel_count) {
        throw std::invalid_argument("QuantScheme: more tlevel boundaries than levels");
    }
    for (std::size_t i = 1; i < tlevel_boundaries.size(); ++i) {
        if (!(tlevel_boundaries[i] > tlevel_boundaries[i - 1])) {
            throw std::invalid_argument("QuantScheme: tlevel boundaries must strictly increase");
        }
    }
}

namespace {

template <typename T, typename V>
int level_of(const std::vector<T>& bounds, V value)
{
    if (bounds.empty()) {
        return 1;
    }
    const auto it = std::lower_bound(bounds.begin(), bounds.end(), static_cast<T>(value));
    const auto idx = std::min<std::ptrdiff_t>(it - bounds.begin(),
                                              static_cast<std::ptrdiff_t>(bounds.size()) - 1);
    return static_cast<int>(idx) + 1;
}

} // namespace

Levels quantize(int actives, double tp, const QuantScheme& scheme)
{
    return {level_of(scheme.alevel_boundaries, std::max(actives, 0)),
            level_of(scheme.tlevel_boundaries, std::max(tp, 0.0))};
}

std::vector<double> percentile_boundaries(std::vector<double> values, int count)
{
    if (values.empty() || count < 1) {
        return {};
    }
    std::sort(values.begin(), values.end());
    std::vector<double> out;
    const double last = static_cast<double>(values.size() - 1);
    for (int k = 1; k <= count; ++k) {
        const double pos = last * k / count;
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        const double q = values[lo] + frac * (values[hi] - values[lo]);
        if (out.empty() || q > out.back()) {
            out.push_back(q);
        }
    }
    return out;
}

double TrainingSample::log_target() const
{
    if (!(cwopt >= kMinCw && cwopt <= kMaxCw)) {
        throw std::domain_error("training target cwopt must lie in [1, 1023]");
    }
    return std::log(cwopt);
}

// ----------------------------------------------------------------- OLS / LR

OlsFit ols_fit(std::span<const std::array<double, 2>> features, std::span<const double> targets)
{
    if (features.size() != targets.size() || targets.empty()) {
        throw std::invalid_argument("ols_fit: need equal, non-empty feature and target lists");
    }
    const auto n = static_cast<Eigen::Index>(targets.size());
    Eigen::VectorXd y(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        y(r) = targets[static_cast<std::size_t>(r)];
    }
    const double mean_y = y.mean();
    const double ss_tot = (y.array() - mean_y).square().sum();

    OlsFit fit;
    auto intercept_only = [&] {
        fit.coefficients = {mean_y, 0.0, 0.0};
        fit.degenerate = true;
        fit.r_squared = ss_tot > 0.0 ? 0.0 : 1.0;
        return fit;
    };
    if (n < 3) {
        return intercept_only();
    }

    // Columns are scaled to unit max-norm so the rank test is unit-free.
    Eigen::MatrixXd X(n, 3);
    std::array<double, 3> scale{1.0, 0.0, 0.0};
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& f = features[static_cast<std::size_t>(r)];
        X(r, 0) = 1.0;
        X(r, 1) = f[0];
        X(r, 2) = f[1];
        scale[1] = std::max(scale[1], std::abs(f[0]));
        scale[2] = std::max(scale[2], std::abs(f[1]));
    }
    if (scale[1] == 0.0 || scale[2] == 0.0) {
        return intercept_only();
    }
    X.col(1) /= scale[1];
    X.col(2) /= scale[2];

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < 3) {
        return intercept_only();
    }
    const Eigen::VectorXd beta = qr.solve(y);
    fit.coefficients = {beta(0), beta(1) / scale[1], beta(2) / scale[2]};
    const double ss_res = (y - X * beta).squaredNorm();
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

ModelCoefficients lr_fit(std::span<const TrainingSample> samples)
{
    if (samples.empty()) {
        throw std::invalid_argument("lr_fit: no samples");
    }
    std::vector<std::array<double, 2>> x;
    std::vector<double> y;
    x.reserve(samples.size());
    y.reserve(samples.size());
    for (const auto& s : samples) {
        x.push_back({s.x1, s.x2});
        y.push_back(s.log_target());
    }
    const auto fit = ols_fit(x, y);
    return {fit.coefficients[0], fit.coefficients[1], fit.coefficients[2], fit.degenerate};
}

double lr_log_cw(const ModelCoefficients& c, double x1, double x2)
{
    return c.theta0 + c.theta1 * x1 + c.theta2 * x2;
}

int lr_predict(const ModelCoefficients& c, double x1, double x2)
{
    if (!std::isfinite(c.theta0) || !std::isfinite(c.theta1) || !std::isfinite(c.theta2)) {
        throw std::domain_error("lr_predict: non-finite coefficients");
    }
    return clamp_cw(std::exp(lr_log_cw(c, x1, x2)));
}

// --------------------------------------------------------------- Naive Bayes

double NbModel::prior(std::size_t c) const
{
    return static_cast<double>(class_counts.at(c)) / static_cast<double>(total);
}

double NbModel::likelihood_alevel(std::size_t c, int alevel) const
{
    if (alevel < 1 || alevel > n_alevels) {
        throw std::out_of_range("NbModel: alevel outside the fitted domain");
    }
    return (alevel_counts.at(c)[static_cast<std::size_t>(alevel - 1)] + alpha) /
           (class_counts.at(c) + alpha * n_alevels);
}

double NbModel::likelihood_tlevel(std::size_t c, int tlevel) const
{
    if (tlevel < 1 || tlevel > n_tlevels) {
        throw std::out_of_range("NbModel: tlevel outside the fitted domain");
    }
    return (tlevel_counts.at(c)[static_cast<std::size_t>(tlevel - 1)] + alpha) /
           (class_counts.at(c) + alpha * n_tlevels);
}

double NbModel::log_score(std::size_t c, int alevel, int tlevel) const
{
    return std::log(prior(c)) + std::log(likelihood_alevel(c, alevel)) +
           std::log(likelihood_tlevel(c, tlevel));
}

NbModel nb_fit(std::span<const TrainingSample> samples, int n_alevels, int n_tlevels, double alpha)
{
    if (samples.empty()) {
        throw std::invalid_argument("nb_fit: no samples");
    }
    if (n_alevels < 1 || n_tlevels < 1 || !(alpha > 0.0)) {
        throw std::invalid_argument("nb_fit: need level domains >= 1 and alpha > 0");
    }
    NbModel m;
    m.alpha = alpha;
    m.n_alevels = n_alevels;
    m.n_tlevels = n_tlevels;
    for (const auto& s : samples) {
        m.classes.push_back(clamp_cw(s.cwopt));
    }
    std::sort(m.classes.begin(), m.classes.end());
    m.classes.erase(std::unique(m.classes.begin(), m.classes.end()), m.classes.end());
    const auto k = m.classes.size();
    m.class_counts.assign(k, 0);
    m.alevel_counts.assign(k, std::vector<int>(static_cast<std::size_t>(n_alevels), 0));
    m.tlevel_counts.assign(k, std::vector<int>(static_cast<std::size_t>(n_tlevels), 0));
    for (const auto& s : samples) {
        const int a = static_cast<int>(std::lround(s.x1));
        const int t = static_cast<int>(std::lround(s.x2));
        if (a < 1 || a > n_alevels || t < 1 || t > n_tlevels) {
            throw std::out_of_range("nb_fit: sample level outside the declared domain");
        }
        const auto c = static_cast<std::size_t>(
            std::lower_bound(m.classes.begin(), m.classes.end(), clamp_cw(s.cwopt)) -
            m.classes.begin());
        m.class_counts[c] += 1;
        m.alevel_counts[c][static_cast<std::size_t>(a - 1)] += 1;
        m.tlevel_counts[c][static_cast<std::size_t>(t - 1)] += 1;
        m.total += 1;
    }
    return m;
}

int nb_predict(const NbModel& model, int alevel, int tlevel)
{
    if (model.classes.empty()) {
        throw std::logic_error("nb_predict: model is not fitted");
    }
    std::size_t best = 0;
    double best_score = model.log_score(0, alevel, tlevel);
    for (std::size_t c = 1; c < model.classes.size(); ++c) {
        const double score = model.log_score(c, alevel, tlevel);
        if (score > best_score + 1e-12) {
            best = c;
            best_score = score;
        }
    }
    return model.classes[best];
}

// ----------------------------------------------------------------------- DNN

DnnWeights DnnWeights::zeros(int input, int hidden1, int hidden2)
{
    DnnWeights w;
    w.W1 = Eigen::MatrixXd::Zero(hidden1, input);
    w.b1 = Eigen::VectorXd::Zero(hidden1);
    w.W2 = Eigen::MatrixXd::Zero(hidden2, hidden1);
    w.b2 = Eigen::VectorXd::Zero(hidden2);
    w.w = Eigen::VectorXd::Zero(hidden2);
    w.b3 = 0.0;
    return w;
}

std::size_t DnnWeights::size() const
{
    return static_cast<std::size_t>(W1.size() + b1.size() + W2.size() + b2.size() + w.size() + 1);
}

std::vector<double> DnnWeights::flatten() const
{
    std::vector<double> out;
    out.reserve(size());
    auto push = [&out](const auto& m) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                out.push_back(m(r, c));
            }
        }
    };
    push(W1);
    push(b1);
    push(W2);
    push(b2);
    push(w);
    out.push_back(b3);
    return out;
}

void DnnWeights::assign(std::span<const double> flat)
{
    if (flat.size() != size()) {
        throw std::invalid_argument("DnnWeights::assign: size mismatch");
    }
    std::size_t k = 0;
    auto pull = [&](auto& m) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                m(r, c) = flat[k++];
            }
        }
    };
    pull(W1);
    pull(b1);
    pull(W2);
    pull(b2);
    pull(w);
    b3 = flat[k];
}

bool DnnWeights::finite() const
{
    return W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite() &&
           w.allFinite() && std::isfinite(b3);
}

DnnParams dnn_init(std::array<int, 4> layer_sizes, std::uint64_t seed)
{
    if (layer_sizes[0] != 2 || layer_sizes[3] != 1 || layer_sizes[1] < 1 || layer_sizes[2] < 1) {
        throw std::invalid_argument("dnn_init: layer sizes must be [2, H1, H2, 1]");
    }
    DnnParams p;
    p.layer_sizes = layer_sizes;
    const int h1 = layer_sizes[1];
    const int h2 = layer_sizes[2];
    p.weights = DnnWeights::zeros(2, h1, h2);
    p.first_moment = DnnWeights::zeros(2, h1, h2);
    p.second_moment = DnnWeights::zeros(2, h1, h2);

    Rng rng(seed);
    auto he = [&rng](Eigen::MatrixXd& m, int fan_in) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                m(r, c) = dist(rng);
            }
        }
    };
    he(p.weights.W1, 2);
    he(p.weights.W2, h1);
    Eigen::MatrixXd out(h2, 1);
    he(out, h2);
    p.weights.w = out.col(0);
    return p;
}

namespace {

struct Activations {
    Eigen::Vector2d x;
    Eigen::VectorXd z1, h1, z2, h2;
    double out = 0.0;
};

Activations forward_pass(const DnnParams& p, double x1, double x2)
{
    Activations a;
    a.x << (x1 - p.feature_mean[0]) / p.feature_scale[0],
        (x2 - p.feature_mean[1]) / p.feature_scale[1];
    const auto& w = p.weights;
    a.z1 = w.b1 + w.W1 * a.x;
    a.h1 = a.z1.cwiseMax(0.0);
    a.z2 = w.b2 + w.W2 * a.h1;
    a.h2 = a.z2.cwiseMax(0.0);
    a.out = w.b3 + w.w.dot(a.h2);
    return a;
}

void accumulate_gradient(const DnnParams& p, const Activations& a, double dout, DnnWeights& g)
{
    const auto& w = p.weights;
    g.b3 += dout;
    g.w += dout * a.h2;
    const Eigen::VectorXd dz2 = (dout * w.w).cwiseProduct((a.z2.array() > 0.0).cast<double>().matrix());
    g.W2 += dz2 * a.h1.transpose();
    g.b2 += dz2;
    const Eigen::VectorXd dz1 =
        (w.W2.transpose() * dz2).cwiseProduct((a.z1.array() > 0.0).cast<double>().matrix());
    g.W1 += dz1 * a.x.transpose();
    g.b1 += dz1;
}

DnnWeights batch_gradient(const DnnParams& p, std::span<const TrainingSample> batch, double& loss)
{
    auto g = DnnWeights::zeros(2, p.layer_sizes[1], p.layer_sizes[2]);
    loss = 0.0;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (const auto& s : batch) {
        const auto a = forward_pass(p, s.x1, s.x2);
        const double err = a.out - s.log_target();
        loss += err * err * inv;
        accumulate_gradient(p, a, 2.0 * err * inv, g);
    }
    return g;
}

void adam_step(DnnParams& p, const DnnWeights& grad)
{
    p.step += 1;
    auto theta = p.weights.flatten();
    auto m = p.first_moment.flatten();
    auto v = p.second_moment.flatten();
    const auto g = grad.flatten();
    const auto& cfg = p.adam;
    const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step));
    const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step));
    for (std::size_t k = 0; k < theta.size(); ++k) {
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
        const double m_hat = m[k] / bias1;
        const double v_hat = v[k] / bias2;
        theta[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
    p.weights.assign(theta);
    p.first_moment.assign(m);
    p.second_moment.assign(v);
}

} // namespace

double dnn_forward(const DnnParams& params, double x1, double x2)
{
    return forward_pass(params, x1, x2).out;
}

double dnn_loss(const DnnParams& params, std::span<const TrainingSample> samples)
{
    if (samples.empty()) {
        throw std::invalid_argument("dnn_loss: no samples");
    }
    double loss = 0.0;
    for (const auto& s : samples) {
        const double err = dnn_forward(params, s.x1, s.x2) - s.log_target();
        loss += err * err;
    }
    return loss / static_cast<double>(samples.size());
}

DnnWeights dnn_gradient(const DnnParams& params, std::span<const TrainingSample> samples)
{
    if (samples.empty()) {
        throw std::invalid_argument("dnn_gradient: no samples");
    }
    double loss = 0.0;
    return batch_gradient(params, samples, loss);
}

EpochResult dnn_train_epoch(DnnParams& params, std::span<const TrainingSample> samples,
                            std::size_t batch_size, Rng& rng)
{
    if (samples.empty() || batch_size == 0) {
        throw std::invalid_argument("dnn_train_epoch: need samples and batch_size >= 1");
    }
    const DnnParams snapshot = params;

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
        std::swap(order[i - 1], order[j]);
    }

    EpochResult result;
    std::vector<TrainingSample> batch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        batch.clear();
        for (std::size_t k = start; k < std::min(order.size(), start + batch_size); ++k) {
            batch.push_back(samples[order[k]]);
        }
        double loss = 0.0;
        const auto grad = batch_gradient(params, batch, loss);
        if (!std::isfinite(loss) || !grad.finite()) {
            params = snapshot;
            params.adam.learning_rate *= 0.5;
            params.diverged = true;
            return {std::numeric_limits<double>::quiet_NaN(), true};
        }
        adam_step(params, grad);
        if (!params.weights.finite()) {
            params = snapshot;
            params.adam.learning_rate *= 0.5;
            params.diverged = true;
            return {std::numeric_limits<double>::quiet_NaN(), true};
        }
        result.loss += loss;
        ++batches;
    }
    result.loss /= static_cast<double>(batches);
    return result;
}

double dnn_fit(DnnParams& params, std::span<const TrainingSample> samples, int epochs,
               std::size_t batch_size, Rng& rng)
{
    if (samples.empty()) {
        throw std::invalid_argument("dnn_fit: no samples");
    }
    const auto n = static_cast<double>(samples.size());
    std::array<double, 2> mean{0.0, 0.0};
    double target_mean = 0.0;
    for (const auto& s : samples) {
        mean[0] += s.x1 / n;
        mean[1] += s.x2 / n;
        target_mean += s.log_target() / n;
    }
    std::array<double, 2> var{0.0, 0.0};
    for (const auto& s : samples) {
        var[0] += (s.x1 - mean[0]) * (s.x1 - mean[0]) / n;
        var[1] += (s.x2 - mean[1]) * (s.x2 - mean[1]) / n;
    }
    params.feature_mean = mean;
    for (int k = 0; k < 2; ++k) {
        const double sd = std::sqrt(var[static_cast<std::size_t>(k)]);
        params.feature_scale[static_cast<std::size_t>(k)] = sd > 0.0 ? sd : 1.0;
    }
    params.weights.b3 = target_mean;

    for (int e = 0; e < epochs; ++e) {
        (void)dnn_train_epoch(params, samples, batch_size, rng);
    }
    return dnn_loss(params, samples);
}

int dnn_predict(const DnnParams& params, double x1, double x2)
{
    return clamp_cw(std::exp(dnn_forward(params, x1, x2)));
}

// -------------------------------------------------------------------- theory

double expected_throughput_share(std::span<const double> p, std::size_t i)
{
    if (i >= p.size()) {
        throw std::out_of_range("expected_throughput_share: station index out of range");
    }
    double share = 1.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        if (!(p[j] >= 0.0 && p[j] <= 1.0)) {
            throw std::domain_error("expected_throughput_share: probabilities must lie in [0,1]");
        }
        share *= j == i ? p[j] : 1.0 - p[j];
    }
    return share;
}

// ------------------------------------------------------------ serialization

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m)
{
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from(const nlohmann::json& j)
{
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = j.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
        }
    }
    return m;
}

nlohmann::json vector_json(const Eigen::VectorXd& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from(const nlohmann::json& j)
{
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

nlohmann::json weights_json(const DnnWeights& w)
{
    return {{"W1", matrix_json(w.W1)}, {"b1", vector_json(w.b1)}, {"W2", matrix_json(w.W2)},
            {"b2", vector_json(w.b2)}, {"w", vector_json(w.w)},   {"b3", w.b3}};
}

DnnWeights weights_from(const nlohmann::json& j)
{
    DnnWeights w;
    w.W1 = matrix_from(j.at("W1"));
    w.b1 = vector_from(j.at("b1"));
    w.W2 = matrix_from(j.at("W2"));
    w.b2 = vector_from(j.at("b2"));
    w.w = vector_from(j.at("w"));
    w.b3 = j.at("b3").get<double>();
    return w;
}

} // namespace

void to_json(nlohmann::json& j, const QuantScheme& q)
{
    j = {{"alevel_boundaries", q.alevel_boundaries},
         {"tlevel_count", q.tlevel_count},
         {"tlevel_boundaries", q.tlevel_boundaries}};
}

void from_json(const nlohmann::json& j, QuantScheme& q)
{
    QuantScheme d;
    q.alevel_boundaries = j.value("alevel_boundaries", d.alevel_boundaries);
    q.tlevel_count = j.value("tlevel_count", d.tlevel_count);
    q.tlevel_boundaries = j.value("tlevel_boundaries", d.tlevel_boundaries);
    q.validate();
}

void to_json(nlohmann::json& j, const ModelCoefficients& c)
{
    j = {{"theta0", c.theta0}, {"theta1", c.theta1}, {"theta2", c.theta2}, {"degenerate", c.degenerate}};
}

void from_json(const nlohmann::json& j, ModelCoefficients& c)
{
    c.theta0 = j.at("theta0").get<double>();
    c.theta1 = j.at("theta1").get<double>();
    c.theta2 = j.at("theta2").get<double>();
    c.degenerate = j.value("degenerate", false);
}

void to_json(nlohmann::json& j, const NbModel& m)
{
    j = {{"alpha", m.alpha},
         {"n_alevels", m.n_alevels},
         {"n_tlevels", m.n_tlevels},
         {"classes", m.classes},
         {"class_counts", m.class_counts},
         {"alevel_counts", m.alevel_counts},
         {"tlevel_counts", m.tlevel_counts},
         {"total", m.total}};
}

void from_json(const nlohmann::json& j, NbModel& m)
{
    m.alpha = j.at("alpha").get<double>();
    m.n_alevels = j.at("n_alevels").get<int>();
    m.n_tlevels = j.at("n_tlevels").get<int>();
    m.classes = j.at("classes").get<std::vector<int>>();
    m.class_counts = j.at("class_counts").get<std::vector<int>>();
    m.alevel_counts = j.at("alevel_counts").get<std::vector<std::vector<int>>>();
    m.tlevel_counts = j.at("tlevel_counts").get<std::vector<std::vector<int>>>();
    m.total = j.at("total").get<int>();
}

void to_json(nlohmann::json& j, const DnnParams& p)
{
    j = {{"layer_sizes", p.layer_sizes},
         {"weights", weights_json(p.weights)},
         {"first_moment", weights_json(p.first_moment)},
         {"second_moment", weights_json(p.second_moment)},
         {"step", p.step},
         {"adam",
          {{"learning_rate", p.adam.learning_rate},
           {"beta1", p.adam.beta1},
           {"beta2", p.adam.beta2},
           {"epsilon", p.adam.epsilon}}},
         {"feature_mean", p.feature_mean},
         {"feature_scale", p.feature_scale},
         {"diverged", p.diverged}};
}

void from_json(const nlohmann::json& j, DnnParams& p)
{
    p.layer_sizes = j.at("layer_sizes").get<std::array<int, 4>>();
    p.weights = weights_from(j.at("weights"));
    p.first_moment = weights_from(j.at("first_moment"));
    p.second_moment = weights_from(j.at("second_moment"));
    p.step = j.at("step").get<std::int64_t>();
    const auto& a = j.at("adam");
    p.adam = {a.at("learning_rate").get<double>(), a.at("beta1").get<double>(),
              a.at("beta2").get<double>(), a.at("epsilon").get<double>()};
    p.feature_mean = j.at("feature_mean").get<std::array<double, 2>>();
    p.feature_scale = j.at("feature_scale").get<std::array<double, 2>>();
    p.diverged = j.value("diverged", false);
}

} // namespace cwtune::models
