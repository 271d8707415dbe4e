#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "synthdet/core/errors.hpp"
#include "synthdet/core/image.hpp"
#include "synthdet/core/random.hpp"
#include "synthdet/corpus/preprocess.hpp"

namespace synthdet::metrics {

using Scorer = std::function<double(const Image&)>;

struct LogisticFit {
    double slope = 0.0;
    double bias = 0.0;
    int iterations = 0;
};

namespace detail {

inline double lsigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double logistic_nll(const std::vector<double>& x, const std::vector<int>& y, double a,
                           double b, double ridge) {
    double nll = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double eta = a * x[i] + b;
        nll += std::max(eta, 0.0) - eta * y[i] + std::log1p(std::exp(-std::abs(eta)));
    }
    return nll + 0.5 * ridge * (a * a + b * b);
}

}  // namespace detail

// Damped Newton (IRLS) fit of P(fake|z) = sigmoid(slope*z + bias) with a tiny
// ridge that keeps separable inputs finite.
inline LogisticFit logistic_fit(const std::vector<double>& logits, const std::vector<int>& labels,
                                int max_iter = 100, double tol = 1e-10) {
    if (logits.size() != labels.size())
        throw ValidationError("logistic_fit: logit/label count mismatch");
    if (logits.size() < 2) throw ValidationError("logistic_fit: need at least two points");

    const double ridge = 1e-8;
    double a = 0.0, b = 0.0;
    double nll = detail::logistic_nll(logits, labels, a, b, ridge);
    int it = 0;
    for (; it < max_iter; ++it) {
        double g0 = ridge * a, g1 = ridge * b;
        double h00 = ridge, h01 = 0.0, h11 = ridge;
        for (size_t i = 0; i < logits.size(); ++i) {
            const double z = logits[i];
            const double p = detail::lsigmoid(a * z + b);
            const double r = p - labels[i];
            const double w = std::max(p * (1.0 - p), 1e-12);
            g0 += r * z;
            g1 += r;
            h00 += w * z * z;
            h01 += w * z;
            h11 += w;
        }
        Eigen::Matrix2d h;
        h << h00, h01, h01, h11;
        Eigen::Vector2d g(g0, g1);
        Eigen::Vector2d step = h.ldlt().solve(g);
        double scale = 1.0;
        double next_nll = nll;
        double na = a, nb = b;
        for (int half = 0; half < 30; ++half) {
            na = a - scale * step[0];
            nb = b - scale * step[1];
            next_nll = detail::logistic_nll(logits, labels, na, nb, ridge);
            if (next_nll <= nll) break;
            scale *= 0.5;
        }
        const double delta = std::abs(na - a) + std::abs(nb - b);
        a = na;
        b = nb;
        nll = next_nll;
        if (delta < tol) break;
    }
    return {a, b, it};
}

struct CalibrationResult {
    double bias = 0.0;          // applied as sigmoid(logit + bias)
    double fitted_slope = 0.0;  // diagnostic only
    double fitted_bias = 0.0;   // diagnostic only
    int n_crops = 128;
    std::string real_id;
    std::string fake_id;
};

// Platt-style fit from the raw fitted pair (slope a, bias b). The applied bias
// is the decision-boundary shift b/a so that sigmoid(logit + bias) crosses 0.5
// exactly where the fitted regression does.
inline CalibrationResult calibration_from_logits(const std::vector<double>& logits,
                                                 const std::vector<int>& labels, int n_crops,
                                                 const std::string& real_id,
                                                 const std::string& fake_id) {
    double lo = logits[0], hi = logits[0];
    for (double z : logits) {
        lo = std::min(lo, z);
        hi = std::max(hi, z);
    }
    if (!(hi - lo > 1e-9))
        throw ValidationError("two-shot calibration pair is non-informative: all logits equal");
    const LogisticFit fit = logistic_fit(logits, labels);
    if (!(std::abs(fit.slope) > 1e-9))
        throw ValidationError("two-shot calibration pair is non-informative: flat logistic fit");
    return {fit.bias / fit.slope, fit.slope, fit.bias, n_crops, real_id, fake_id};
}

inline CalibrationResult two_shot_calibrate(const Scorer& scorer, const Image& real_image,
                                            const Image& fake_image, int n_crops,
                                            RandomStream& rng, const std::string& real_id = "real",
                                            const std::string& fake_id = "fake") {
    if (n_crops < 1) throw ValidationError("two_shot_calibrate: n_crops must be >= 1");
    if (real_image.h < 224 || real_image.w < 224 || fake_image.h < 224 || fake_image.w < 224)
        throw ValidationError("two_shot_calibrate: both images must be at least 224 per side");
    std::vector<double> logits;
    std::vector<int> labels;
    logits.reserve(2 * static_cast<size_t>(n_crops));
    for (int i = 0; i < n_crops; ++i) {
        logits.push_back(scorer(crop(real_image, 224, CropMode::random, &rng)));
        labels.push_back(0);
    }
    for (int i = 0; i < n_crops; ++i) {
        logits.push_back(scorer(crop(fake_image, 224, CropMode::random, &rng)));
        labels.push_back(1);
    }
    return calibration_from_logits(logits, labels, n_crops, real_id, fake_id);
}

}  // namespace synthdet::metrics
