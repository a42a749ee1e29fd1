#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tinydet/errors.hpp"
#include "tinydet/rng.hpp"

namespace tinydet {

// Dense channels x height x width tensor, row-major within a channel.
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w),
          data(static_cast<size_t>(c) * h * w, fill) {}

    double& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }

    bool shape_valid() const {
        return channels >= 1 && height >= 1 && width >= 1 &&
               data.size() == static_cast<size_t>(channels) * height * width;
    }
};

// Finest level first; each successive level halves height and width.
struct Pyramid {
    std::vector<FeatureMap> levels;
};

inline void validate_pyramid(const Pyramid& p) {
    if (p.levels.size() < 2)
        throw std::invalid_argument("pyramid: needs at least 2 levels");
    for (size_t i = 0; i < p.levels.size(); ++i) {
        if (!p.levels[i].shape_valid())
            throw std::invalid_argument("pyramid: malformed level " + std::to_string(i));
        if (i > 0 && (p.levels[i].height * 2 != p.levels[i - 1].height ||
                      p.levels[i].width * 2 != p.levels[i - 1].width))
            throw std::invalid_argument("pyramid: level " + std::to_string(i) +
                                        " does not halve the previous level");
    }
}

// Row-major matrix small enough for plain loops.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

// Parameters of one pyramid level's attention pair: a 1x1 projection from
// the semantic (adjacent higher) level's channels onto this level's, a
// two-layer channel bottleneck, and a spatial kernel over the pooled
// average/max planes.
struct RelayLevelParams {
    Matrix proj;              // channels x semantic_channels
    std::vector<double> proj_bias;
    Matrix reduce;            // channels/r x channels
    std::vector<double> reduce_bias;
    Matrix expand;            // channels x channels/r
    std::vector<double> expand_bias;
    int spatial_kernel_size = 7;
    std::vector<double> spatial_kernel; // 2 * k * k, avg plane then max plane
    double spatial_bias = 0.0;
};

struct RelayParams {
    std::vector<RelayLevelParams> levels;
    int reduction = 16;
    uint64_t seed = 0;
};

inline std::vector<double> global_avg_pool(const FeatureMap& f) {
    std::vector<double> out(f.channels, 0.0);
    const double inv = 1.0 / (static_cast<double>(f.height) * f.width);
    for (int c = 0; c < f.channels; ++c) {
        double sum = 0.0;
        const size_t base = static_cast<size_t>(c) * f.height * f.width;
        for (size_t i = 0; i < static_cast<size_t>(f.height) * f.width; ++i)
            sum += f.data[base + i];
        out[c] = sum * inv;
    }
    return out;
}

namespace detail {

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline std::vector<double> affine(const Matrix& w, std::span<const double> bias,
                                  std::span<const double> v) {
    if (w.cols != static_cast<int>(v.size()) || w.rows != static_cast<int>(bias.size()))
        throw std::invalid_argument("relay: weight shape mismatch");
    std::vector<double> out(w.rows, 0.0);
    for (int r = 0; r < w.rows; ++r) {
        double sum = bias[r];
        for (int c = 0; c < w.cols; ++c)
            sum += w.at(r, c) * v[c];
        out[r] = sum;
    }
    return out;
}

} // namespace detail

// Per-channel gate in (0,1) for a level, driven by the semantic map:
// sigmoid(expand(relu(reduce(proj(gap(semantic)))))).
inline std::vector<double> channel_attention(const FeatureMap& semantic,
                                             const RelayLevelParams& params,
                                             int target_channels) {
    if (params.proj.cols != semantic.channels || params.proj.rows != target_channels)
        throw std::invalid_argument("channel_attention: projection shape mismatch");
    std::vector<double> v = detail::affine(params.proj, params.proj_bias,
                                           global_avg_pool(semantic));
    v = detail::affine(params.reduce, params.reduce_bias, v);
    for (double& z : v)
        z = std::max(z, 0.0);
    v = detail::affine(params.expand, params.expand_bias, v);
    for (double& z : v)
        z = detail::sigmoid(z);
    return v;
}

// Per-pixel gate in (0,1): channel-wise average and max planes, one
// zero-padded k x k convolution over the two planes, sigmoid.
inline FeatureMap spatial_attention(const FeatureMap& f, const RelayLevelParams& params) {
    const int k = params.spatial_kernel_size;
    if (static_cast<int>(params.spatial_kernel.size()) != 2 * k * k)
        throw std::invalid_argument("spatial_attention: kernel size mismatch");
    const int h = f.height, w = f.width;

    std::vector<double> avg(static_cast<size_t>(h) * w, 0.0);
    std::vector<double> mx(static_cast<size_t>(h) * w, 0.0);
    const double inv_c = 1.0 / f.channels;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            double best = f.at(0, y, x);
            for (int c = 0; c < f.channels; ++c) {
                const double v = f.at(c, y, x);
                sum += v;
                best = std::max(best, v);
            }
            avg[static_cast<size_t>(y) * w + x] = sum * inv_c;
            mx[static_cast<size_t>(y) * w + x] = best;
        }
    }

    FeatureMap out(1, h, w);
    const int pad = k / 2;
    const double* k_avg = params.spatial_kernel.data();
    const double* k_max = params.spatial_kernel.data() + static_cast<size_t>(k) * k;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double z = params.spatial_bias;
            for (int dy = 0; dy < k; ++dy) {
                const int sy = y + dy - pad;
                if (sy < 0 || sy >= h) continue;
                for (int dx = 0; dx < k; ++dx) {
                    const int sx = x + dx - pad;
                    if (sx < 0 || sx >= w) continue;
                    const size_t si = static_cast<size_t>(sy) * w + sx;
                    z += k_avg[dy * k + dx] * avg[si] + k_max[dy * k + dx] * mx[si];
                }
            }
            out.at(0, y, x) = detail::sigmoid(z);
        }
    }
    return out;
}

// Kaiming-style uniform init, [-1/sqrt(fan_in), 1/sqrt(fan_in)], from a
// seeded substream per level so parameter layout is reproducible.
inline RelayParams init_relay_params(std::span<const int> channel_counts,
                                     int reduction, uint64_t seed,
                                     int spatial_kernel_size = 7) {
    if (channel_counts.size() < 2)
        throw config_error("init_relay_params: need at least 2 levels");
    if (reduction < 1)
        throw config_error("init_relay_params: reduction must be >= 1");
    RelayParams params;
    params.reduction = reduction;
    params.seed = seed;
    SplitRng root(seed);
    for (size_t l = 0; l < channel_counts.size(); ++l) {
        const int c = channel_counts[l];
        if (c < 1 || c % reduction != 0)
            throw config_error("init_relay_params: reduction " + std::to_string(reduction) +
                               " does not divide channel count " + std::to_string(c));
        const int c_sem = channel_counts[std::min(l + 1, channel_counts.size() - 1)];
        const int hidden = c / reduction;

        SplitRng rng = root.split(l);
        auto fill = [&rng](std::vector<double>& dst, int fan_in) {
            const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (double& v : dst)
                v = rng.uniform(-k, k);
        };

        RelayLevelParams lp;
        lp.proj = Matrix(c, c_sem);
        lp.proj_bias.assign(c, 0.0);
        fill(lp.proj.data, c_sem);
        fill(lp.proj_bias, c_sem);
        lp.reduce = Matrix(hidden, c);
        lp.reduce_bias.assign(hidden, 0.0);
        fill(lp.reduce.data, c);
        fill(lp.reduce_bias, c);
        lp.expand = Matrix(c, hidden);
        lp.expand_bias.assign(c, 0.0);
        fill(lp.expand.data, hidden);
        fill(lp.expand_bias, hidden);
        lp.spatial_kernel_size = spatial_kernel_size;
        lp.spatial_kernel.assign(2 * static_cast<size_t>(spatial_kernel_size) * spatial_kernel_size, 0.0);
        fill(lp.spatial_kernel, 2 * spatial_kernel_size * spatial_kernel_size);
        const double kb = 1.0 / std::sqrt(2.0 * spatial_kernel_size * spatial_kernel_size);
        lp.spatial_bias = rng.uniform(-kb, kb);
        params.levels.push_back(std::move(lp));
    }
    return params;
}

// Zero-filled parameters of the same layout; both attention branches then
// sit at sigmoid(0) = 0.5 and the layer acts as x -> 1.25 x.
inline RelayParams zero_relay_params(std::span<const int> channel_counts,
                                     int reduction, int spatial_kernel_size = 7) {
    RelayParams params = init_relay_params(channel_counts, reduction, 0, spatial_kernel_size);
    for (RelayLevelParams& lp : params.levels) {
        std::fill(lp.proj.data.begin(), lp.proj.data.end(), 0.0);
        std::fill(lp.proj_bias.begin(), lp.proj_bias.end(), 0.0);
        std::fill(lp.reduce.data.begin(), lp.reduce.data.end(), 0.0);
        std::fill(lp.reduce_bias.begin(), lp.reduce_bias.end(), 0.0);
        std::fill(lp.expand.data.begin(), lp.expand.data.end(), 0.0);
        std::fill(lp.expand_bias.begin(), lp.expand_bias.end(), 0.0);
        std::fill(lp.spatial_kernel.begin(), lp.spatial_kernel.end(), 0.0);
        lp.spatial_bias = 0.0;
    }
    return params;
}

// Refine each level in place: gate by channel attention from the adjacent
// higher (more semantic) level and spatial attention from the level
// itself, then add the residual. The top level self-attends.
//
//   out_l = x_l * A_c(x_{l+1}) * A_s(x_l) + x_l
inline Pyramid relay_forward(const Pyramid& p, const RelayParams& params) {
    validate_pyramid(p);
    if (params.levels.size() != p.levels.size())
        throw std::invalid_argument("relay_forward: params cover " +
                                    std::to_string(params.levels.size()) + " levels, pyramid has " +
                                    std::to_string(p.levels.size()));
    Pyramid out;
    out.levels.reserve(p.levels.size());
    const size_t top = p.levels.size() - 1;
    for (size_t l = 0; l < p.levels.size(); ++l) {
        const FeatureMap& x = p.levels[l];
        const FeatureMap& semantic = p.levels[std::min(l + 1, top)];
        const std::vector<double> ac = channel_attention(semantic, params.levels[l], x.channels);
        const FeatureMap as = spatial_attention(x, params.levels[l]);

        FeatureMap o(x.channels, x.height, x.width);
        for (int c = 0; c < x.channels; ++c) {
            const double gate_c = ac[c];
            for (int y = 0; y < x.height; ++y) {
                for (int xx = 0; xx < x.width; ++xx) {
                    const double v = x.at(c, y, xx);
                    o.at(c, y, xx) = v * gate_c * as.at(0, y, xx) + v;
                }
            }
        }
        out.levels.push_back(std::move(o));
    }
    return out;
}

} // namespace tinydet
