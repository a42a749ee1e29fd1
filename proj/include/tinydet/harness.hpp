#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tinydet/box.hpp"
#include "tinydet/errors.hpp"
#include "tinydet/eval.hpp"
#include "tinydet/loss.hpp"
#include "tinydet/rng.hpp"

namespace tinydet {

// Synthetic stand-in for an aerial scene: square objects drawn per size
// bucket, predictions derived from the ground truths by a bounded jitter.
// A pure-axis translation of fraction f of the side gives every object an
// initial IoU of (1-f)/(1+f) regardless of its size, which isolates the
// loss-weighting effect from IoU differences.
struct SceneConfig {
    double extent = 256.0;
    std::array<int, 4> bucket_counts = {4, 4, 4, 4}; // vt, t, s, m
    std::array<std::pair<double, double>, 4> size_ranges = {
        std::pair<double, double>{2.0, 8.0},
        {8.0, 16.0},
        {16.0, 32.0},
        {32.0, 64.0},
    };
    double translation_jitter = 0.25; // single-axis shift, fraction of the side
    double scale_jitter = 0.0;        // per-dimension scale, fraction
    uint64_t seed = 42;
};

struct Scene {
    std::vector<Box> gts;
    std::vector<Box> preds;
    std::vector<int> bucket; // index into SceneConfig buckets, per object
};

inline void validate_scene_config(const SceneConfig& cfg) {
    int total = 0;
    for (int c : cfg.bucket_counts) {
        if (c < 0) throw config_error("scene: negative bucket count");
        total += c;
    }
    if (total < 1)
        throw config_error("scene: at least one object required");
    if (cfg.translation_jitter < 0.0 || cfg.translation_jitter >= 1.0 ||
        cfg.scale_jitter < 0.0 || cfg.scale_jitter >= 1.0)
        throw config_error("scene: jitter fractions must lie in [0,1)");
    for (const auto& [lo, hi] : cfg.size_ranges)
        if (!(lo > 0.0) || !(hi > lo))
            throw config_error("scene: malformed size range");
}

inline Scene gen_scene(const SceneConfig& cfg) {
    validate_scene_config(cfg);
    SplitRng rng = SplitRng(cfg.seed).split("scene");
    Scene scene;
    for (int b = 0; b < 4; ++b) {
        const auto [lo, hi] = cfg.size_ranges[b];
        for (int i = 0; i < cfg.bucket_counts[b]; ++i) {
            double side = 0.0;
            bool placed = false;
            for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
                side = rng.uniform(lo, hi);
                placed = side <= cfg.extent;
            }
            if (!placed)
                throw config_error("scene: bucket " + std::to_string(b) +
                                   " does not fit extent " + std::to_string(cfg.extent));
            Box gt;
            gt.w = side;
            gt.h = side;
            gt.x = rng.uniform(0.0, cfg.extent - side);
            gt.y = rng.uniform(0.0, cfg.extent - side);

            Box pred = gt;
            const double shift = cfg.translation_jitter * side * (rng.coin() ? 1.0 : -1.0);
            if (rng.coin())
                pred.x += shift;
            else
                pred.y += shift;
            if (cfg.scale_jitter > 0.0) {
                pred.w *= 1.0 + rng.uniform(-cfg.scale_jitter, cfg.scale_jitter);
                pred.h *= 1.0 + rng.uniform(-cfg.scale_jitter, cfg.scale_jitter);
            }
            scene.gts.push_back(gt);
            scene.preds.push_back(pred);
            scene.bucket.push_back(b);
        }
    }
    return scene;
}

enum class LossVariant { plain_iou_sq, sfl, l1_sfl };

inline const char* variant_name(LossVariant v) {
    switch (v) {
        case LossVariant::plain_iou_sq: return "plain";
        case LossVariant::sfl: return "sfl";
        case LossVariant::l1_sfl: return "l1+sfl";
    }
    return "?";
}

// One step's per-object records, taken before the parameter update.
struct StepRecord {
    double total_loss = 0.0;
    std::vector<double> share;
    std::vector<double> grad_norm;
    std::vector<double> iou;
};

struct RegressionTrace {
    LossVariant variant = LossVariant::plain_iou_sq;
    std::vector<Box> gts;
    std::vector<Box> final_preds;
    std::vector<StepRecord> steps;
    std::optional<int> diverged_at;
    std::map<int, double> bucket_mean_iou; // SizeBucket index -> mean final IoU
};

namespace detail {

struct ObjectEval {
    double contribution = 0.0;
    BoxGradient grad; // w.r.t. (x, y, w, h)
};

inline std::vector<ObjectEval> eval_objects(std::span<const Box> gts,
                                            std::span<const Box> preds,
                                            LossVariant variant,
                                            const LossConfig& cfg,
                                            std::span<const double> weights) {
    const size_t n = gts.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<ObjectEval> out(n);
    for (size_t i = 0; i < n; ++i) {
        const MatchedPair pair{gts[i], preds[i]};
        const double v = iou(pair.gt, pair.pred);
        const double u = 1.0 - v * v;
        BoxGradient g = iou_sq_loss_gradient(pair);
        double scale = 1.0;
        double contribution = u;
        if (variant == LossVariant::sfl) {
            scale = weights[i];
            contribution = weights[i] * u;
        } else if (variant == LossVariant::l1_sfl) {
            scale = cfg.alpha * weights[i];
            contribution = cfg.alpha * weights[i] * u;
        }
        g.d_x *= scale;
        g.d_y *= scale;
        g.d_w *= scale;
        g.d_h *= scale;
        if (variant == LossVariant::l1_sfl) {
            const double dx = preds[i].x - gts[i].x;
            const double dy = preds[i].y - gts[i].y;
            const double dw = preds[i].w - gts[i].w;
            const double dh = preds[i].h - gts[i].h;
            auto sgn = [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); };
            g.d_x += sgn(dx) * inv_n;
            g.d_y += sgn(dy) * inv_n;
            g.d_w += sgn(dw) * inv_n;
            g.d_h += sgn(dh) * inv_n;
            contribution += (std::abs(dx) + std::abs(dy) + std::abs(dw) + std::abs(dh)) * inv_n;
        }
        out[i].contribution = contribution;
        out[i].grad = g;
    }
    return out;
}

} // namespace detail

// Plain gradient descent on the predicted boxes. Width and height are
// optimized in log space so boxes stay valid without projection steps.
// Per-object loss shares, gradient norms (in optimization space), and
// IoUs are recorded at every step.
inline RegressionTrace regress(std::span<const Box> gts, std::span<const Box> preds,
                               LossVariant variant, const LossConfig& cfg,
                               int steps, double learning_rate) {
    if (gts.empty() || gts.size() != preds.size())
        throw std::invalid_argument("regress: empty or mismatched scene");
    if (steps < 1 || learning_rate <= 0.0)
        throw std::invalid_argument("regress: steps >= 1 and learning rate > 0 required");

    const size_t n = gts.size();
    std::vector<double> weights(n, 1.0);
    if (variant != LossVariant::plain_iou_sq) {
        std::vector<Box> gt_boxes(gts.begin(), gts.end());
        weights = sfl_weights(gt_boxes, cfg.beta);
    }

    RegressionTrace trace;
    trace.variant = variant;
    trace.gts.assign(gts.begin(), gts.end());

    std::vector<Box> cur(preds.begin(), preds.end());
    for (int step = 0; step < steps; ++step) {
        const std::vector<detail::ObjectEval> evals =
            detail::eval_objects(gts, cur, variant, cfg, weights);

        StepRecord rec;
        rec.share.resize(n);
        rec.grad_norm.resize(n);
        rec.iou.resize(n);
        double total = 0.0;
        for (const auto& e : evals)
            total += e.contribution;
        rec.total_loss = total;
        bool finite = std::isfinite(total);
        for (size_t i = 0; i < n; ++i) {
            rec.share[i] = total > 0.0 ? evals[i].contribution / total : 0.0;
            const double gx = evals[i].grad.d_x;
            const double gy = evals[i].grad.d_y;
            const double gw = evals[i].grad.d_w * cur[i].w; // d/d log w
            const double gh = evals[i].grad.d_h * cur[i].h;
            rec.grad_norm[i] = std::sqrt(gx * gx + gy * gy + gw * gw + gh * gh);
            rec.iou[i] = iou(gts[i], cur[i]);
            finite = finite && std::isfinite(rec.grad_norm[i]);
        }
        trace.steps.push_back(std::move(rec));
        if (!finite) {
            trace.diverged_at = step;
            break;
        }

        for (size_t i = 0; i < n; ++i) {
            cur[i].x -= learning_rate * evals[i].grad.d_x;
            cur[i].y -= learning_rate * evals[i].grad.d_y;
            cur[i].w = std::exp(std::log(cur[i].w) - learning_rate * evals[i].grad.d_w * cur[i].w);
            cur[i].h = std::exp(std::log(cur[i].h) - learning_rate * evals[i].grad.d_h * cur[i].h);
            finite = finite && cur[i].valid();
        }
        if (!finite) {
            trace.diverged_at = step;
            break;
        }
    }

    trace.final_preds = cur;
    std::map<int, std::pair<double, int>> acc; // bucket -> (iou sum, count)
    const std::array<double, 5> edges = {2.0, 8.0, 16.0, 32.0, 64.0};
    for (size_t i = 0; i < n; ++i) {
        const SizeBucket b = size_bucket(gts[i], edges);
        if (b == SizeBucket::out_of_range) continue;
        auto& slot = acc[static_cast<int>(b)];
        slot.first += iou(gts[i], cur[i]);
        slot.second += 1;
    }
    for (const auto& [b, slot] : acc)
        trace.bucket_mean_iou[b] = slot.first / slot.second;
    return trace;
}

// Initial loss shares and gradient norms aggregated per area tercile,
// for the same scene regressed under the plain and scale-adaptive
// variants. `rebalanced` says whether the smallest tercile's share grew
// strictly under the scale-adaptive weighting.
struct TercileStat {
    double area_min = 0.0;
    double area_max = 0.0;
    int count = 0;
    double share_plain = 0.0;
    double share_sfl = 0.0;
    double grad_norm_plain = 0.0; // mean over objects, initial step
    double grad_norm_sfl = 0.0;
};

struct LossShareReport {
    std::vector<TercileStat> terciles; // ascending area, empty terciles dropped
    bool rebalanced = false;
    bool degenerate = false; // all areas equal: shares provably coincide
};

inline LossShareReport loss_share_report(const RegressionTrace& plain,
                                         const RegressionTrace& sfl_trace) {
    if (plain.variant != LossVariant::plain_iou_sq || sfl_trace.variant != LossVariant::sfl)
        throw std::invalid_argument("loss_share_report: expected a plain trace and an sfl trace");
    if (plain.gts != sfl_trace.gts)
        throw std::invalid_argument("loss_share_report: traces come from different scenes");
    if (plain.steps.empty() || sfl_trace.steps.empty())
        throw std::invalid_argument("loss_share_report: empty traces");

    const size_t n = plain.gts.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return plain.gts[a].area() < plain.gts[b].area();
    });

    LossShareReport report;
    const size_t t1 = n / 3;
    const size_t t2 = 2 * n / 3;
    for (int t = 0; t < 3; ++t) {
        const size_t lo = t == 0 ? 0 : (t == 1 ? t1 : t2);
        const size_t hi = t == 0 ? t1 : (t == 1 ? t2 : n);
        if (lo >= hi) continue;
        TercileStat stat;
        stat.count = static_cast<int>(hi - lo);
        stat.area_min = plain.gts[order[lo]].area();
        stat.area_max = plain.gts[order[hi - 1]].area();
        for (size_t r = lo; r < hi; ++r) {
            const size_t i = order[r];
            stat.share_plain += plain.steps[0].share[i];
            stat.share_sfl += sfl_trace.steps[0].share[i];
            stat.grad_norm_plain += plain.steps[0].grad_norm[i];
            stat.grad_norm_sfl += sfl_trace.steps[0].grad_norm[i];
        }
        stat.grad_norm_plain /= stat.count;
        stat.grad_norm_sfl /= stat.count;
        report.terciles.push_back(stat);
    }

    report.degenerate =
        plain.gts[order[0]].area() == plain.gts[order[n - 1]].area();
    const TercileStat& smallest = report.terciles.front();
    report.rebalanced = smallest.share_sfl > smallest.share_plain;
    return report;
}

struct CurvePoint {
    double side = 0.0;
    double shift = 0.0;
    double iou = 0.0;
    double loss = 0.0; // 1 - IoU^2
};

// Grid evaluation of the closed-form single-axis IoU decay, showing how
// much faster small boxes lose IoU under the same absolute shift.
inline std::vector<CurvePoint> iou_decay_curve(std::span<const double> sides,
                                               std::span<const double> shifts) {
    std::vector<CurvePoint> rows;
    rows.reserve(sides.size() * shifts.size());
    for (double side : sides) {
        for (double shift : shifts) {
            CurvePoint p;
            p.side = side;
            p.shift = shift;
            p.iou = axis_shift_iou(side, shift);
            p.loss = 1.0 - p.iou * p.iou;
            rows.push_back(p);
        }
    }
    return rows;
}

struct SweepRow {
    double beta = 0.0;
    double mean_iou = 0.0; // over all objects
    std::map<int, double> bucket_mean_iou; // SizeBucket index -> final mean IoU
    std::optional<int> diverged_at;
};

inline std::vector<double> default_sweep_betas() {
    return {1.0, 1.0 / std::log(2.0), 2.0 / std::log(2.0)};
}

// Re-runs the same seeded scene under the scale-adaptive loss for each
// beta and reports the final per-bucket mean IoU.
inline std::vector<SweepRow> beta_sweep(const SceneConfig& scene_cfg,
                                        std::span<const double> betas,
                                        int steps, double learning_rate) {
    if (betas.empty())
        throw config_error("beta_sweep: empty beta list");
    const Scene scene = gen_scene(scene_cfg);
    std::vector<SweepRow> rows;
    for (double beta : betas) {
        LossConfig cfg;
        cfg.beta = beta;
        const RegressionTrace trace = regress(scene.gts, scene.preds, LossVariant::sfl,
                                              cfg, steps, learning_rate);
        SweepRow row;
        row.beta = beta;
        double sum = 0.0;
        for (size_t i = 0; i < scene.gts.size(); ++i)
            sum += iou(scene.gts[i], trace.final_preds[i]);
        row.mean_iou = sum / static_cast<double>(scene.gts.size());
        row.bucket_mean_iou = trace.bucket_mean_iou;
        row.diverged_at = trace.diverged_at;
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace tinydet
