#ifndef DBTKIT_LOSSES_HPP
#define DBTKIT_LOSSES_HPP

#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace dbtkit {

/// Objectness-loss parameters; defaults are the conventional ones.
struct LossParams {
    double gamma = 2.0;      // focal exponent, >= 0
    double threshold = 0.5;  // reduced-focal knee, in (0,1)
    double w_pos = 1.0;
    double w_neg = 1.0;
};

namespace detail {

inline void check_prob(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("predicted probability must be in (0,1)");
}

inline double p_t(double p, int y) { return y == 1 ? p : 1.0 - p; }

// d(p_t)/dp
inline double dpt_dp(int y) { return y == 1 ? 1.0 : -1.0; }

}  // namespace detail

inline constexpr double kProbEpsilon = 1e-7;

/// Clamp a saturated prediction into the open interval the losses require.
inline double clamp_probability(double p) {
    if (p < kProbEpsilon) return kProbEpsilon;
    if (p > 1.0 - kProbEpsilon) return 1.0 - kProbEpsilon;
    return p;
}

inline double bce(double p, int y) {
    detail::check_prob(p);
    return -std::log(detail::p_t(p, y));
}

inline double bce_grad(double p, int y) {
    detail::check_prob(p);
    return -1.0 / detail::p_t(p, y) * detail::dpt_dp(y);
}

inline double weighted_bce(double p, int y, double w_pos, double w_neg) {
    if (w_pos <= 0.0 || w_neg <= 0.0) throw std::invalid_argument("weights must be positive");
    return (y == 1 ? w_pos : w_neg) * bce(p, y);
}

inline double weighted_bce_grad(double p, int y, double w_pos, double w_neg) {
    if (w_pos <= 0.0 || w_neg <= 0.0) throw std::invalid_argument("weights must be positive");
    return (y == 1 ? w_pos : w_neg) * bce_grad(p, y);
}

/// Class-prevalence weights from labeled cell counts: w_pos = N_neg/N_pos.
inline std::pair<double, double> prevalence_weights(std::size_t n_pos, std::size_t n_neg) {
    if (n_pos == 0) throw std::invalid_argument("no positive cells; weights undefined");
    return {static_cast<double>(n_neg) / static_cast<double>(n_pos), 1.0};
}

inline double focal(double p, int y, double gamma) {
    detail::check_prob(p);
    if (gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
    const double pt = detail::p_t(p, y);
    return -std::pow(1.0 - pt, gamma) * std::log(pt);
}

inline double focal_grad(double p, int y, double gamma) {
    detail::check_prob(p);
    if (gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
    const double pt = detail::p_t(p, y);
    double d = -std::pow(1.0 - pt, gamma) / pt;
    if (gamma > 0.0) d += gamma * std::pow(1.0 - pt, gamma - 1.0) * std::log(pt);
    return d * detail::dpt_dp(y);
}

/// Cross-entropy below the knee; above it the loss decays toward focal with
/// a factor normalized to 1 at the knee, so the function is continuous.
inline double reduced_focal(double p, int y, double gamma, double threshold) {
    detail::check_prob(p);
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("threshold must be in (0,1)");
    const double pt = detail::p_t(p, y);
    if (pt < threshold) return -std::log(pt);
    return -std::log(pt) * std::pow((1.0 - pt) / (1.0 - threshold), gamma);
}

inline double reduced_focal_grad(double p, int y, double gamma, double threshold) {
    detail::check_prob(p);
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("threshold must be in (0,1)");
    const double pt = detail::p_t(p, y);
    if (pt < threshold) return -1.0 / pt * detail::dpt_dp(y);
    const double u = std::pow((1.0 - pt) / (1.0 - threshold), gamma);
    double d = -u / pt;
    if (gamma > 0.0) d += gamma * u / (1.0 - pt) * std::log(pt);
    return d * detail::dpt_dp(y);
}

/// Localization target vector: (dx, dy, sw, sh) of an encoded box.
using LocTarget = std::array<double, 4>;

/// Mean squared error over the four localization components; applied only to
/// cells that contain a ground-truth center.
inline double localization_mse(const LocTarget& pred, const LocTarget& gt) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const double d = pred[i] - gt[i];
        sum += d * d;
    }
    return sum / 4.0;
}

inline LocTarget localization_mse_grad(const LocTarget& pred, const LocTarget& gt) {
    LocTarget g{};
    for (std::size_t i = 0; i < 4; ++i) g[i] = 2.0 * (pred[i] - gt[i]) / 4.0;
    return g;
}

}  // namespace dbtkit

#endif  // DBTKIT_LOSSES_HPP
