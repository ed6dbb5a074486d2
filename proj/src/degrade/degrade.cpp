#include "srocr/degrade/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "srocr/random.hpp"

namespace srocr::degrade {

namespace {

// Applies 1-D tap tables along x then y; intermediates stay in double and
// are rounded once.
Image separable(const Image& img, int out_w, int out_h, const std::vector<Taps>& tx, const std::vector<Taps>& ty) {
    const int ch = img.channels;
    std::vector<double> rows(static_cast<std::size_t>(img.height) * static_cast<std::size_t>(out_w) *
                             static_cast<std::size_t>(ch));
    auto row_at = [&](int x, int y, int c) -> double& {
        return rows[(static_cast<std::size_t>(y) * static_cast<std::size_t>(out_w) + static_cast<std::size_t>(x)) *
                        static_cast<std::size_t>(ch) +
                    static_cast<std::size_t>(c)];
    };
    for (int y = 0; y < img.height; ++y)
        for (int ox = 0; ox < out_w; ++ox) {
            const Taps& t = tx[static_cast<std::size_t>(ox)];
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (std::size_t i = 0; i < t.index.size(); ++i)
                    acc += t.weight[i] * img.at(static_cast<int>(t.index[i]), y, c);
                row_at(ox, y, c) = acc;
            }
        }
    Image out(out_w, out_h, ch);
    out.dpi = img.dpi;
    for (int oy = 0; oy < out_h; ++oy) {
        const Taps& t = ty[static_cast<std::size_t>(oy)];
        for (int ox = 0; ox < out_w; ++ox)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (std::size_t i = 0; i < t.index.size(); ++i)
                    acc += t.weight[i] * row_at(ox, static_cast<int>(t.index[i]), c);
                out.at(ox, oy, c) = to_u8(acc);
            }
    }
    return out;
}

std::vector<Taps> gaussian_taps(int extent, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel;
    double total = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel.push_back(std::exp(-(k * k) / (2.0 * sigma * sigma)));
        total += kernel.back();
    }
    for (double& w : kernel) w /= total;
    std::vector<Taps> table(static_cast<std::size_t>(extent));
    for (int o = 0; o < extent; ++o) {
        Taps& t = table[static_cast<std::size_t>(o)];
        for (int k = -radius; k <= radius; ++k) {
            t.index.push_back(std::clamp(o + k, 0, extent - 1));
            t.weight.push_back(kernel[static_cast<std::size_t>(k + radius)]);
        }
    }
    return table;
}

}  // namespace

Image resize(const Image& img, int width, int height, ResampleKernel kernel) {
    img.validate();
    if (width < 1 || height < 1)
        throw std::invalid_argument("resize: output " + std::to_string(width) + "x" + std::to_string(height) +
                                    " is degenerate");
    return separable(img, width, height, make_taps(img.width, width, kernel), make_taps(img.height, height, kernel));
}

Image resample(const Image& img, double factor, ResampleKernel kernel) {
    if (!(factor > 0.0) || !std::isfinite(factor)) throw std::invalid_argument("resample: factor must be > 0");
    // The tolerance keeps products such as 100 * 0.29 from flooring one short.
    const int w = static_cast<int>(std::floor(img.width * factor + 1e-9));
    const int h = static_cast<int>(std::floor(img.height * factor + 1e-9));
    return resize(img, w, h, kernel);
}

Image gaussian_blur(const Image& img, double sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("gaussian_blur: sigma must be >= 0");
    img.validate();
    if (sigma == 0.0) return img;
    return separable(img, img.width, img.height, gaussian_taps(img.width, sigma), gaussian_taps(img.height, sigma));
}

Image add_noise(const Image& img, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("add_noise: sigma must be >= 0");
    img.validate();
    if (sigma == 0.0) return img;
    Rng rng(seed);
    Image out = img;
    for (auto& v : out.data) v = to_u8(v + sigma * rng.normal());
    return out;
}

void DegradeSpec::validate() const {
    if (!(scale > 0.0 && scale <= 1.0)) throw std::invalid_argument("degrade: scale must be in (0, 1]");
    if (!(blur_sigma >= 0.0) || !std::isfinite(blur_sigma))
        throw std::invalid_argument("degrade: blur sigma must be finite and >= 0");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
        throw std::invalid_argument("degrade: noise sigma must be finite and >= 0");
}

Image degrade_pipeline(const Image& img, const DegradeSpec& spec) {
    spec.validate();
    Image out = gaussian_blur(img, spec.blur_sigma);
    if (spec.scale != 1.0) out = resample(out, spec.scale, ResampleKernel::bicubic);
    return add_noise(out, spec.noise_sigma, spec.seed);
}

}  // namespace srocr::degrade
