#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace srocr {

enum class ResampleKernel { bicubic, bilinear, nearest, box };

/// Keys cubic convolution kernel; a = -0.5 gives Catmull-Rom.
inline double cubic_weight(double t, double a = -0.5) {
    t = std::fabs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

inline double kernel_support(ResampleKernel k) {
    switch (k) {
        case ResampleKernel::bicubic: return 2.0;
        case ResampleKernel::bilinear: return 1.0;
        case ResampleKernel::nearest:
        case ResampleKernel::box: return 0.5;
    }
    return 0.0;
}

inline double kernel_weight(ResampleKernel k, double t) {
    switch (k) {
        case ResampleKernel::bicubic: return cubic_weight(t);
        case ResampleKernel::bilinear: {
            const double a = std::fabs(t);
            return a < 1.0 ? 1.0 - a : 0.0;
        }
        case ResampleKernel::nearest:
        case ResampleKernel::box: return (t >= -0.5 && t < 0.5) ? 1.0 : 0.0;
    }
    return 0.0;
}

/// Normalized taps for one output coordinate: source indices (already edge
/// clamped) and their weights.
struct Taps {
    std::vector<std::int64_t> index;
    std::vector<double> weight;
};

/// Tap table mapping `in_extent` samples onto `out_extent` samples with
/// centre-aligned coordinates. When shrinking, the kernel is stretched by
/// the inverse ratio so it integrates over the source footprint.
/// Nearest-neighbour is never stretched.
inline std::vector<Taps> make_taps(std::int64_t in_extent, std::int64_t out_extent, ResampleKernel kernel) {
    std::vector<Taps> table(static_cast<std::size_t>(out_extent));
    const double ratio = static_cast<double>(in_extent) / static_cast<double>(out_extent);
    const double stretch = (kernel == ResampleKernel::nearest) ? 1.0 : std::max(1.0, ratio);
    const double support = kernel_support(kernel) * stretch;
    for (std::int64_t o = 0; o < out_extent; ++o) {
        const double centre = (static_cast<double>(o) + 0.5) * ratio;
        Taps& taps = table[static_cast<std::size_t>(o)];
        if (kernel == ResampleKernel::nearest) {
            const auto i = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(centre)), 0, in_extent - 1);
            taps.index.push_back(i);
            taps.weight.push_back(1.0);
            continue;
        }
        const double src = centre - 0.5;
        const auto lo = static_cast<std::int64_t>(std::floor(src - support)) + 1;
        const auto hi = static_cast<std::int64_t>(std::ceil(src + support)) - 1;
        double total = 0.0;
        for (std::int64_t i = lo; i <= hi; ++i) {
            const double w = kernel_weight(kernel, (static_cast<double>(i) - src) / stretch);
            if (w == 0.0) continue;
            taps.index.push_back(std::clamp<std::int64_t>(i, 0, in_extent - 1));
            taps.weight.push_back(w);
            total += w;
        }
        for (double& w : taps.weight) w /= total;
    }
    return table;
}

}  // namespace srocr
