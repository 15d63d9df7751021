#include "hsi/linear_svm.hpp"

#include <cmath>
#include <numeric>

#include "hsi/error.hpp"
#include "hsi/rng.hpp"

namespace hsi {

namespace {

// Training accumulates in double; the published model is float.
LinearModel finish(const std::vector<double>& w, double b) {
    LinearModel model;
    model.weights.resize(w.size());
    for (size_t i = 0; i < w.size(); ++i) model.weights[i] = static_cast<float>(w[i]);
    model.bias = static_cast<float>(b);
    for (float v : model.weights)
        if (!std::isfinite(v)) fail(errc::non_finite, "trained weights are not finite");
    if (!std::isfinite(model.bias)) fail(errc::non_finite, "trained bias is not finite");
    return model;
}

}  // namespace

LinearModel train_binary_hinge(const float* features, const int8_t* labels, size_t n, size_t dim,
                               double lambda, uint32_t epochs, uint64_t seed) {
    if (n == 0) fail(errc::empty_input, "no training samples");
    if (!(lambda > 0.0)) fail(errc::bad_argument, "lambda must be > 0");

    std::vector<double> w(dim, 0.0);
    double b = 0.0;
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(seed);

    // The published model averages the iterates over the second half of the
    // schedule: the last iterate alone carries one full eta_t * x step of
    // noise, which for small lambda dwarfs the margin structure.
    const uint64_t total = static_cast<uint64_t>(epochs) * n;
    const uint64_t tail_start = total / 2 + 1;
    std::vector<double> w_sum(dim, 0.0);
    double b_sum = 0.0;
    uint64_t averaged = 0;

    uint64_t t = 0;
    for (uint32_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t idx : order) {
            ++t;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            const float* x = features + idx * dim;
            const double y = labels[idx] > 0 ? 1.0 : -1.0;
            double score = b;
            for (size_t d = 0; d < dim; ++d) score += w[d] * static_cast<double>(x[d]);
            // The bias is treated as the weight of a constant-1 feature and
            // shares the shrink. Left unshrunk, the first step (eta = 1/lambda)
            // throws it to +-1/lambda, which the 1/t-decaying corrections can
            // never pull back once the data stops producing violations.
            const double shrink = 1.0 - eta * lambda;
            if (y * score < 1.0) {
                const double step = eta * y;
                for (size_t d = 0; d < dim; ++d)
                    w[d] = shrink * w[d] + step * static_cast<double>(x[d]);
                b = shrink * b + step;
            } else {
                for (size_t d = 0; d < dim; ++d) w[d] = shrink * w[d];
                b = shrink * b;
            }
            if (t >= tail_start) {
                for (size_t d = 0; d < dim; ++d) w_sum[d] += w[d];
                b_sum += b;
                ++averaged;
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(averaged);
    for (double& v : w_sum) v *= inv;
    return finish(w_sum, b_sum * inv);
}

LinearModel train_epsilon_regression(const float* features, const float* targets, size_t n,
                                     size_t dim, double lambda, double epsilon_tube,
                                     uint32_t epochs, uint64_t seed) {
    if (n == 0) fail(errc::empty_input, "no training samples");
    if (!(lambda > 0.0)) fail(errc::bad_argument, "lambda must be > 0");
    if (!(epsilon_tube > 0.0)) fail(errc::bad_argument, "epsilon_tube must be > 0");

    std::vector<double> w(dim, 0.0);
    double b = 0.0;
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(seed);

    // Same second-half iterate averaging as the hinge trainer.
    const uint64_t total = static_cast<uint64_t>(epochs) * n;
    const uint64_t tail_start = total / 2 + 1;
    std::vector<double> w_sum(dim, 0.0);
    double b_sum = 0.0;
    uint64_t averaged = 0;

    uint64_t t = 0;
    for (uint32_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t idx : order) {
            ++t;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            const float* x = features + idx * dim;
            double pred = b;
            for (size_t d = 0; d < dim; ++d) pred += w[d] * static_cast<double>(x[d]);
            const double residual = static_cast<double>(targets[idx]) - pred;
            // Same constant-feature treatment of the bias as the classifier.
            const double shrink = 1.0 - eta * lambda;
            if (std::abs(residual) > epsilon_tube) {
                const double step = eta * (residual > 0.0 ? 1.0 : -1.0);
                for (size_t d = 0; d < dim; ++d)
                    w[d] = shrink * w[d] + step * static_cast<double>(x[d]);
                b = shrink * b + step;
            } else {
                for (size_t d = 0; d < dim; ++d) w[d] = shrink * w[d];
                b = shrink * b;
            }
            if (t >= tail_start) {
                for (size_t d = 0; d < dim; ++d) w_sum[d] += w[d];
                b_sum += b;
                ++averaged;
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(averaged);
    for (double& v : w_sum) v *= inv;
    return finish(w_sum, b_sum * inv);
}

double hinge_objective(const float* features, const int8_t* labels, size_t n, size_t dim,
                       const LinearModel& model, double lambda) {
    if (n == 0) fail(errc::empty_input, "no samples");
    double norm_sq = 0.0;
    for (float v : model.weights) norm_sq += static_cast<double>(v) * v;
    double hinge = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double y = labels[i] > 0 ? 1.0 : -1.0;
        const double margin = y * linear_score(features + i * dim, dim, model);
        hinge += std::max(0.0, 1.0 - margin);
    }
    return 0.5 * lambda * norm_sq + hinge / static_cast<double>(n);
}

double linear_score(const float* x, size_t dim, const LinearModel& model) {
    double score = model.bias;
    for (size_t d = 0; d < dim; ++d)
        score += static_cast<double>(model.weights[d]) * static_cast<double>(x[d]);
    return score;
}

}  // namespace hsi
