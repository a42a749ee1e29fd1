#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "tinydet/box.hpp"

namespace tinydet {

// Mixing and scaling knobs of the position loss. alpha blends the L1 term
// with the scale-adaptive term; beta scales the per-object ln(2-s) weight.
struct LossConfig {
    static double default_beta() { return 2.0 / std::log(2.0); }

    double alpha = 1.0;
    double beta = default_beta();
};

struct PositionLoss {
    double l1 = 0.0;
    double sfl = 0.0;
    double pos = 0.0; // l1 + alpha * sfl
};

struct LossBreakdown {
    double cls = 0.0;
    double obj = 0.0;
    double l1 = 0.0;
    double sfl = 0.0;
    double pos = 0.0;
    double total = 0.0;
};

// Partial derivatives of a scalar loss with respect to one predicted
// box's (x, y, w, h).
struct BoxGradient {
    double d_x = 0.0;
    double d_y = 0.0;
    double d_w = 0.0;
    double d_h = 0.0;
};

// Binary cross-entropy on a logit, in the stable log-sum-exp form:
// max(z,0) - z*t + log(1 + exp(-|z|)).
inline double bce(double logit, double target) {
    if (target < 0.0 || target > 1.0)
        throw std::invalid_argument("bce: target outside [0,1]");
    return std::max(logit, 0.0) - logit * target +
           std::log1p(std::exp(-std::abs(logit)));
}

inline double bce_mean(std::span<const double> logits, std::span<const double> targets) {
    if (logits.empty() || logits.size() != targets.size())
        throw std::invalid_argument("bce_mean: empty or mismatched batch");
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i)
        sum += bce(logits[i], targets[i]);
    return sum / static_cast<double>(logits.size());
}

// L1 position loss: per coordinate channel (x, y, w, h) the mean absolute
// deviation over the batch, then the four channel means summed.
inline double l1_loss(std::span<const MatchedPair> pairs) {
    if (pairs.empty())
        throw std::invalid_argument("l1_loss: empty pair batch");
    double dx = 0.0, dy = 0.0, dw = 0.0, dh = 0.0;
    for (const MatchedPair& p : pairs) {
        dx += std::abs(p.pred.x - p.gt.x);
        dy += std::abs(p.pred.y - p.gt.y);
        dw += std::abs(p.pred.w - p.gt.w);
        dh += std::abs(p.pred.h - p.gt.h);
    }
    const double n = static_cast<double>(pairs.size());
    return (dx + dy + dw + dh) / n;
}

// Per-object weight beta * ln(2 - s_i) from the batch-normalized
// ground-truth areas. 2.0 exactly at s=0 when beta = 2/ln 2; 0 at s=1.
inline std::vector<double> sfl_weights(std::span<const Box> gts, double beta) {
    if (beta <= 0.0)
        throw std::invalid_argument("sfl_weights: beta must be positive");
    std::vector<double> w = normalized_areas(gts);
    for (double& s : w)
        s = beta * std::log(2.0 - s);
    return w;
}

// Scale-adaptive regression loss: sum of beta * ln(2 - s_i) * (1 - IoU_i^2)
// over the batch. s_i is normalized over the supplied ground truths.
inline double sfl(std::span<const MatchedPair> pairs, double beta) {
    if (pairs.empty())
        throw std::invalid_argument("sfl: empty pair batch");
    std::vector<Box> gts;
    gts.reserve(pairs.size());
    for (const MatchedPair& p : pairs)
        gts.push_back(p.gt);
    const std::vector<double> w = sfl_weights(gts, beta);
    double sum = 0.0;
    for (size_t i = 0; i < pairs.size(); ++i) {
        const double v = iou(pairs[i].gt, pairs[i].pred);
        sum += w[i] * (1.0 - v * v);
    }
    return sum;
}

inline PositionLoss position_loss(std::span<const MatchedPair> pairs, const LossConfig& cfg) {
    PositionLoss p;
    p.l1 = l1_loss(pairs);
    p.sfl = sfl(pairs, cfg.beta);
    p.pos = p.l1 + cfg.alpha * p.sfl;
    return p;
}

// Multi-task composition: total = cls + obj + pos.
inline LossBreakdown total_loss(double cls, double obj, const PositionLoss& pos) {
    if (cls < 0.0 || obj < 0.0 || pos.pos < 0.0)
        throw std::invalid_argument("total_loss: negative component");
    LossBreakdown b;
    b.cls = cls;
    b.obj = obj;
    b.l1 = pos.l1;
    b.sfl = pos.sfl;
    b.pos = pos.pos;
    b.total = cls + obj + pos.pos;
    return b;
}

// Scalar form for a pre-aggregated position loss; the split is not known,
// so the whole value is carried in the l1 slot.
inline LossBreakdown total_loss(double cls, double obj, double pos) {
    return total_loss(cls, obj, PositionLoss{pos, 0.0, pos});
}

namespace detail {

// d IoU / d pred for the clamped overlap. Interval-endpoint ties and the
// zero-overlap clamp both take the locally-constant branch (subgradient 0);
// ties resolve as if the ground-truth edge bounds the intersection.
inline BoxGradient iou_gradient(const Box& gt, const Box& pred) {
    const double iw = std::min(gt.x + gt.w, pred.x + pred.w) - std::max(gt.x, pred.x);
    const double ih = std::min(gt.y + gt.h, pred.y + pred.h) - std::max(gt.y, pred.y);
    if (iw <= 0.0 || ih <= 0.0) return {};

    const double inter = iw * ih;
    const double uni = gt.area() + pred.area() - inter;

    const double right_pred = (pred.x + pred.w < gt.x + gt.w) ? 1.0 : 0.0;
    const double left_pred = (pred.x > gt.x) ? 1.0 : 0.0;
    const double top_pred = (pred.y > gt.y) ? 1.0 : 0.0;
    const double bot_pred = (pred.y + pred.h < gt.y + gt.h) ? 1.0 : 0.0;

    const double diw_dx = right_pred - left_pred;
    const double diw_dw = right_pred;
    const double dih_dy = bot_pred - top_pred;
    const double dih_dh = bot_pred;

    const double di_dx = diw_dx * ih;
    const double di_dy = dih_dy * iw;
    const double di_dw = diw_dw * ih;
    const double di_dh = dih_dh * iw;

    // dU = dA_pred - dI, so dIoU = (dI * (U + I) - I * dA_pred) / U^2.
    const double u2 = uni * uni;
    BoxGradient g;
    g.d_x = di_dx * (uni + inter) / u2;
    g.d_y = di_dy * (uni + inter) / u2;
    g.d_w = (di_dw * (uni + inter) - inter * pred.h) / u2;
    g.d_h = (di_dh * (uni + inter) - inter * pred.w) / u2;
    return g;
}

} // namespace detail

// Gradient of the plain quadratic IoU loss (1 - IoU^2) w.r.t. the
// predicted box: -2 * IoU * dIoU.
inline BoxGradient iou_sq_loss_gradient(const MatchedPair& pair) {
    const double v = iou(pair.gt, pair.pred);
    BoxGradient g = detail::iou_gradient(pair.gt, pair.pred);
    const double f = -2.0 * v;
    return {f * g.d_x, f * g.d_y, f * g.d_w, f * g.d_h};
}

// Gradient of the scale-adaptive loss sum w.r.t. the predicted box of one
// pair. s_i depends only on ground truths, so the weight is a constant
// factor under this derivative.
inline BoxGradient sfl_gradient(std::span<const MatchedPair> pairs, double beta, size_t index) {
    if (index >= pairs.size())
        throw std::out_of_range("sfl_gradient: pair index out of range");
    std::vector<Box> gts;
    gts.reserve(pairs.size());
    for (const MatchedPair& p : pairs)
        gts.push_back(p.gt);
    const double w = sfl_weights(gts, beta)[index];
    BoxGradient g = iou_sq_loss_gradient(pairs[index]);
    return {w * g.d_x, w * g.d_y, w * g.d_w, w * g.d_h};
}

// Central-difference check of an analytic gradient. Returns the worst
// relative error over coordinates, with denominator
// max(|analytic|, |numeric|, 1e-8).
inline double finite_diff_check(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> point,
                                std::span<const double> analytic,
                                double step) {
    if (step <= 0.0)
        throw std::invalid_argument("finite_diff_check: step must be positive");
    if (point.size() != analytic.size())
        throw std::invalid_argument("finite_diff_check: gradient size mismatch");
    std::vector<double> x(point.begin(), point.end());
    double worst = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + step;
        const double fp = f(x);
        x[i] = saved - step;
        const double fm = f(x);
        x[i] = saved;
        const double numeric = (fp - fm) / (2.0 * step);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

} // namespace tinydet
