#pragma once

#include <cstdint>

#include "srocr/degrade/image.hpp"
#include "srocr/resample_kernels.hpp"

namespace srocr::degrade {

/// Resamples to exactly `width` x `height`. Centre-aligned coordinates,
/// edge clamping; when shrinking, the kernel widens by the reduction ratio
/// (antialiasing). Results are rounded half away from zero and clamped.
Image resize(const Image& img, int width, int height, ResampleKernel kernel);

/// Output dimensions floor(w * factor) x floor(h * factor). Throws
/// std::invalid_argument for factor <= 0 or an output extent below 1.
Image resample(const Image& img, double factor, ResampleKernel kernel = ResampleKernel::bicubic);

/// Separable Gaussian, radius ceil(3 sigma), clamped edges; sigma 0 is the
/// identity. Throws std::invalid_argument for negative sigma.
Image gaussian_blur(const Image& img, double sigma);

/// Adds N(0, sigma^2) to every sample from a seeded generator, then rounds
/// and clamps. sigma 0 is the identity.
Image add_noise(const Image& img, double sigma, std::uint64_t seed);

struct DegradeSpec {
    double scale = 1.0;
    double blur_sigma = 0.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument unless scale is in (0, 1] and the
    /// sigmas are finite and non-negative.
    void validate() const;
};

/// blur -> bicubic downscale -> noise. The output keeps the input dpi.
Image degrade_pipeline(const Image& img, const DegradeSpec& spec);

}  // namespace srocr::degrade
