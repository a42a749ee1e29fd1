#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tinydet/box.hpp"
#include "tinydet/errors.hpp"

namespace tinydet {

struct Detection {
    int64_t image_id = 0;
    int64_t category_id = 0;
    Box box;
    double score = 0.0;
};

struct GtAnnotation {
    int64_t image_id = 0;
    int64_t category_id = 0;
    Box box;
};

struct GroundTruthSet {
    std::set<int64_t> image_ids;
    std::map<int64_t, std::string> categories; // id -> name
    std::vector<GtAnnotation> annotations;
};

struct EvalConfig {
    std::vector<double> iou_thresholds = default_iou_thresholds();
    int recall_points = 101;
    int max_dets_per_image = 100;
    std::vector<double> size_bucket_edges = {2.0, 8.0, 16.0, 32.0, 64.0};

    static std::vector<double> default_iou_thresholds() {
        std::vector<double> t;
        for (int i = 0; i <= 9; ++i)
            t.push_back(0.5 + 0.05 * i);
        return t;
    }
};

inline void validate_config(const EvalConfig& cfg) {
    if (cfg.iou_thresholds.empty())
        throw config_error("eval: no IoU thresholds");
    for (size_t i = 0; i < cfg.iou_thresholds.size(); ++i) {
        const double t = cfg.iou_thresholds[i];
        if (t <= 0.0 || t > 1.0)
            throw config_error("eval: IoU threshold outside (0,1]");
        if (i > 0 && t <= cfg.iou_thresholds[i - 1])
            throw config_error("eval: IoU thresholds must be strictly increasing");
    }
    if (cfg.recall_points < 2)
        throw config_error("eval: need at least 2 recall points");
    if (cfg.max_dets_per_image < 1)
        throw config_error("eval: max detections per image must be >= 1");
    if (cfg.size_bucket_edges.size() != 5)
        throw config_error("eval: expected 5 size bucket edges");
    for (size_t i = 1; i < cfg.size_bucket_edges.size(); ++i)
        if (cfg.size_bucket_edges[i] <= cfg.size_bucket_edges[i - 1])
            throw config_error("eval: size bucket edges must be strictly increasing");
}

// AP, the two fixed-threshold APs, and the size-restricted APs. A metric
// is absent when no ground truth feeds it (e.g. an empty size bucket).
struct EvalReport {
    std::optional<double> ap;
    std::optional<double> ap50;
    std::optional<double> ap75;
    std::optional<double> ap_vt;
    std::optional<double> ap_t;
    std::optional<double> ap_s;
    std::optional<double> ap_m;
    std::map<int64_t, double> per_category;
};

enum class SizeBucket { very_tiny = 0, tiny = 1, small = 2, medium = 3, out_of_range = 4 };

// Object size is sqrt(w*h) in pixels, classified against half-open
// intervals [e0,e1), [e1,e2), [e2,e3), [e3,e4).
inline SizeBucket size_bucket(const Box& b, std::span<const double> edges) {
    const double size = std::sqrt(b.area());
    for (int k = 0; k < 4; ++k)
        if (size >= edges[k] && size < edges[k + 1])
            return static_cast<SizeBucket>(k);
    return SizeBucket::out_of_range;
}

// Greedy single-image, single-category matching. Detections must already
// be sorted by descending score (ties kept in input order). Each detection
// takes the unmatched ground truth of highest IoU >= threshold; IoU ties
// go to the earlier ground truth. Returns the matched gt index per
// detection, -1 for false positives.
inline std::vector<int> match_detections(std::span<const Box> det_boxes,
                                         std::span<const Box> gt_boxes,
                                         double iou_threshold) {
    std::vector<int> matches(det_boxes.size(), -1);
    std::vector<char> taken(gt_boxes.size(), 0);
    for (size_t d = 0; d < det_boxes.size(); ++d) {
        int best = -1;
        double best_iou = iou_threshold;
        for (size_t g = 0; g < gt_boxes.size(); ++g) {
            if (taken[g]) continue;
            const double v = iou(det_boxes[d], gt_boxes[g]);
            if (v > best_iou || (best < 0 && v == best_iou)) {
                best = static_cast<int>(g);
                best_iou = v;
            }
        }
        if (best >= 0) {
            taken[best] = 1;
            matches[d] = best;
        }
    }
    return matches;
}

// Interpolated AP from a TP/FP sequence in descending-score order:
// precision envelope sampled at `recall_points` equally spaced recalls
// in [0,1]. Zero when there is no ground truth (callers report that case
// as an absent metric).
inline double average_precision(std::span<const char> tp_flags, size_t total_gt,
                                int recall_points) {
    if (total_gt == 0) return 0.0;
    const size_t n = tp_flags.size();
    std::vector<double> precision(n), recall(n);
    size_t tp_cum = 0;
    for (size_t i = 0; i < n; ++i) {
        tp_cum += tp_flags[i] ? 1 : 0;
        precision[i] = static_cast<double>(tp_cum) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp_cum) / static_cast<double>(total_gt);
    }
    for (size_t i = n; i-- > 1;)
        precision[i - 1] = std::max(precision[i - 1], precision[i]);

    double sum = 0.0;
    size_t idx = 0;
    for (int j = 0; j < recall_points; ++j) {
        const double r = static_cast<double>(j) / static_cast<double>(recall_points - 1);
        while (idx < n && recall[idx] < r)
            ++idx;
        if (idx < n)
            sum += precision[idx];
    }
    return sum / static_cast<double>(recall_points);
}

namespace detail {

// Kept detection, globally ordered by (score desc, input index asc).
struct OrderedDet {
    size_t input_index;
    int64_t image_id;
    Box box;
};

inline std::vector<size_t> sort_by_score_desc(const std::vector<Detection>& dets,
                                              const std::vector<size_t>& indices) {
    std::vector<size_t> order = indices;
    std::stable_sort(order.begin(), order.end(), [&dets](size_t a, size_t b) {
        return dets[a].score > dets[b].score;
    });
    return order;
}

} // namespace detail

// Full evaluation: AP averaged over thresholds then categories, the fixed
// AP50/AP75 slices, and per-size-bucket APs. Matching runs once per
// (image, category, threshold) over all ground truths; a bucket metric
// then keeps detections matched inside the bucket as TPs, drops
// detections matched outside it, and counts unmatched detections as FPs.
inline EvalReport evaluate(const GroundTruthSet& gts, const std::vector<Detection>& dets,
                           const EvalConfig& cfg) {
    validate_config(cfg);

    // Reject detections pointing at unregistered ids, listing every
    // offending record.
    std::ostringstream bad;
    int bad_count = 0;
    for (size_t i = 0; i < dets.size(); ++i) {
        const bool img_ok = gts.image_ids.count(dets[i].image_id) > 0;
        const bool cat_ok = gts.categories.count(dets[i].category_id) > 0;
        if (img_ok && cat_ok) continue;
        if (bad_count++ > 0) bad << "; ";
        bad << "detection " << i;
        if (!img_ok) bad << ": unknown image_id " << dets[i].image_id;
        if (!cat_ok) bad << (img_ok ? ": " : ", ") << "unknown category_id " << dets[i].category_id;
    }
    if (bad_count > 0)
        throw parse_error("evaluate: " + std::to_string(bad_count) +
                          " detection(s) with unknown ids: " + bad.str());

    // Per-image score truncation, before any per-category split.
    std::map<int64_t, std::vector<size_t>> by_image;
    for (size_t i = 0; i < dets.size(); ++i)
        by_image[dets[i].image_id].push_back(i);
    std::vector<char> kept(dets.size(), 0);
    for (auto& [img, indices] : by_image) {
        std::vector<size_t> order = detail::sort_by_score_desc(dets, indices);
        const size_t keep = std::min(order.size(), static_cast<size_t>(cfg.max_dets_per_image));
        for (size_t k = 0; k < keep; ++k)
            kept[order[k]] = 1;
    }

    const size_t n_thr = cfg.iou_thresholds.size();
    const int n_buckets = 4;

    std::map<int64_t, double> per_category;                    // mean AP over thresholds
    std::vector<std::vector<double>> per_cat_thr;              // [cat][thr]
    std::vector<std::vector<double>> bucket_cat_ap(n_buckets); // [bucket] -> per-cat mean AP

    for (const auto& [cat_id, cat_name] : gts.categories) {
        (void)cat_name;
        std::vector<size_t> cat_gt;
        for (size_t g = 0; g < gts.annotations.size(); ++g)
            if (gts.annotations[g].category_id == cat_id)
                cat_gt.push_back(g);
        if (cat_gt.empty())
            continue; // no ground truth: category excluded from every mean

        std::vector<SizeBucket> gt_bucket(cat_gt.size());
        std::vector<size_t> bucket_total(n_buckets, 0);
        for (size_t g = 0; g < cat_gt.size(); ++g) {
            gt_bucket[g] = size_bucket(gts.annotations[cat_gt[g]].box, cfg.size_bucket_edges);
            if (gt_bucket[g] != SizeBucket::out_of_range)
                ++bucket_total[static_cast<int>(gt_bucket[g])];
        }

        std::vector<size_t> cat_det;
        for (size_t i = 0; i < dets.size(); ++i)
            if (kept[i] && dets[i].category_id == cat_id)
                cat_det.push_back(i);
        cat_det = detail::sort_by_score_desc(dets, cat_det);

        // Group the ordered detections and the ground truths by image.
        std::map<int64_t, std::vector<size_t>> det_pos_by_image; // positions into cat_det
        for (size_t p = 0; p < cat_det.size(); ++p)
            det_pos_by_image[dets[cat_det[p]].image_id].push_back(p);
        std::map<int64_t, std::vector<size_t>> gt_pos_by_image; // positions into cat_gt
        for (size_t g = 0; g < cat_gt.size(); ++g)
            gt_pos_by_image[gts.annotations[cat_gt[g]].image_id].push_back(g);

        std::vector<double> thr_ap(n_thr, 0.0);
        std::vector<std::vector<double>> thr_bucket_ap(n_thr,
                                                       std::vector<double>(n_buckets, -1.0));
        for (size_t ti = 0; ti < n_thr; ++ti) {
            std::vector<int> matched(cat_det.size(), -1); // position into cat_gt
            for (const auto& [img, det_positions] : det_pos_by_image) {
                std::vector<Box> det_boxes;
                det_boxes.reserve(det_positions.size());
                for (size_t p : det_positions)
                    det_boxes.push_back(dets[cat_det[p]].box);
                std::vector<Box> gt_boxes;
                const auto git = gt_pos_by_image.find(img);
                if (git != gt_pos_by_image.end())
                    for (size_t g : git->second)
                        gt_boxes.push_back(gts.annotations[cat_gt[g]].box);
                const std::vector<int> local =
                    match_detections(det_boxes, gt_boxes, cfg.iou_thresholds[ti]);
                for (size_t k = 0; k < local.size(); ++k)
                    if (local[k] >= 0)
                        matched[det_positions[k]] =
                            static_cast<int>(git->second[static_cast<size_t>(local[k])]);
            }

            std::vector<char> flags(cat_det.size());
            for (size_t p = 0; p < cat_det.size(); ++p)
                flags[p] = matched[p] >= 0 ? 1 : 0;
            thr_ap[ti] = average_precision(flags, cat_gt.size(), cfg.recall_points);

            for (int b = 0; b < n_buckets; ++b) {
                if (bucket_total[b] == 0) continue;
                std::vector<char> bflags;
                bflags.reserve(cat_det.size());
                for (size_t p = 0; p < cat_det.size(); ++p) {
                    if (matched[p] < 0) {
                        bflags.push_back(0);
                    } else if (gt_bucket[static_cast<size_t>(matched[p])] ==
                               static_cast<SizeBucket>(b)) {
                        bflags.push_back(1);
                    } // matched outside the bucket: ignored
                }
                thr_bucket_ap[ti][b] =
                    average_precision(bflags, bucket_total[b], cfg.recall_points);
            }
        }

        const double cat_ap =
            std::accumulate(thr_ap.begin(), thr_ap.end(), 0.0) / static_cast<double>(n_thr);
        per_category[cat_id] = cat_ap;
        per_cat_thr.push_back(thr_ap);
        for (int b = 0; b < n_buckets; ++b) {
            if (bucket_total[b] == 0) continue;
            double sum = 0.0;
            for (size_t ti = 0; ti < n_thr; ++ti)
                sum += thr_bucket_ap[ti][b];
            bucket_cat_ap[b].push_back(sum / static_cast<double>(n_thr));
        }
    }

    EvalReport report;
    report.per_category = per_category;
    if (per_category.empty())
        return report; // no ground truth at all: every metric absent

    auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };

    {
        std::vector<double> cat_aps;
        for (const auto& [id, v] : per_category) {
            (void)id;
            cat_aps.push_back(v);
        }
        report.ap = mean(cat_aps);
    }
    for (size_t ti = 0; ti < n_thr; ++ti) {
        const double t = cfg.iou_thresholds[ti];
        const bool is50 = std::abs(t - 0.50) < 1e-9;
        const bool is75 = std::abs(t - 0.75) < 1e-9;
        if (!is50 && !is75) continue;
        std::vector<double> vals;
        for (const auto& row : per_cat_thr)
            vals.push_back(row[ti]);
        if (is50) report.ap50 = mean(vals);
        if (is75) report.ap75 = mean(vals);
    }
    std::optional<double>* bucket_fields[n_buckets] = {&report.ap_vt, &report.ap_t,
                                                       &report.ap_s, &report.ap_m};
    for (int b = 0; b < n_buckets; ++b)
        if (!bucket_cat_ap[b].empty())
            *bucket_fields[b] = mean(bucket_cat_ap[b]);
    return report;
}

} // namespace tinydet
