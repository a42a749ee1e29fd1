#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace tinydet {

// Axis-aligned box in pixel units, top-left corner plus width/height.
// Valid boxes have w > 0 and h > 0; coordinates are real-valued.
struct Box {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }

    bool valid() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) &&
               std::isfinite(h) && w > 0.0 && h > 0.0;
    }

    bool operator==(const Box&) const = default;
};

// One ground-truth box paired with the prediction regressed onto it.
struct MatchedPair {
    Box gt;
    Box pred;
};

// Clamped interval overlap; zero for disjoint or touching boxes.
inline double intersection_area(const Box& a, const Box& b) {
    const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
    const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    return iw * ih;
}

inline double iou(const Box& a, const Box& b) {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    return inter / uni;
}

// Min-max normalization of ground-truth areas over one batch. The
// smallest-area box maps to 0 and the largest to 1; a batch where all
// areas coincide maps every entry to the neutral midpoint 0.5.
inline std::vector<double> normalized_areas(std::span<const Box> gts) {
    if (gts.empty())
        throw std::invalid_argument("normalized_areas: empty ground-truth batch");
    double lo = gts[0].area();
    double hi = lo;
    for (const Box& b : gts) {
        lo = std::min(lo, b.area());
        hi = std::max(hi, b.area());
    }
    std::vector<double> s;
    s.reserve(gts.size());
    const double range = hi - lo;
    for (const Box& b : gts)
        s.push_back(range > 0.0 ? (b.area() - lo) / range : 0.5);
    return s;
}

inline std::vector<double> normalized_areas(const std::vector<Box>& gts) {
    return normalized_areas(std::span<const Box>(gts));
}

// IoU of a square of the given side translated by `shift` along one axis:
// (side - shift) / (side + shift). Shifts past the side give 0.
inline double axis_shift_iou(double side, double shift) {
    if (shift > side) return 0.0;
    return (side - shift) / (side + shift);
}

} // namespace tinydet
