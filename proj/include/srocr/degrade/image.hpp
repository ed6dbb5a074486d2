#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "srocr/errors.hpp"

namespace srocr::degrade {

/// 8-bit raster, row-major with interleaved channels (1 = gray, 3 = RGB).
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> data;
    std::optional<int> dpi;

    Image() = default;
    Image(int w, int h, int ch, std::uint8_t fill = 255) : width(w), height(h), channels(ch) {
        validate_geometry();
        data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(ch), fill);
    }

    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(c);
    }
    std::uint8_t& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    std::uint8_t at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

    /// Throws ShapeError unless dimensions are positive, channels is 1 or 3
    /// and the data length matches.
    void validate() const {
        validate_geometry();
        if (data.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                               static_cast<std::size_t>(channels))
            throw ShapeError("image data length does not match " + std::to_string(width) + "x" +
                             std::to_string(height) + "x" + std::to_string(channels));
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    void validate_geometry() const {
        if (width < 1 || height < 1) throw ShapeError("image dimensions must be positive");
        if (channels != 1 && channels != 3) throw ShapeError("image channels must be 1 or 3");
    }
};

/// Round half away from zero, then clamp to [0, 255].
inline std::uint8_t to_u8(double v) {
    if (!(v > 0.0)) return 0;  // also maps NaN to 0
    if (v >= 255.0) return 255;
    return static_cast<std::uint8_t>(std::floor(v + 0.5));
}

/// Integer round half away from zero.
inline long round_half_away(double v) { return std::lround(v); }

/// ITU-R BT.601 luma for RGB input; gray input is returned unchanged.
Image to_gray(const Image& img);

/// Gray replicated into three channels; RGB input is returned unchanged.
Image to_rgb(const Image& img);

/// 8-bit gray or RGB PNG. Palette, 16-bit and alpha inputs are converted on
/// read. The pHYs chunk carries dpi when present.
Image read_png(const std::filesystem::path& path);
void write_png(const Image& img, const std::filesystem::path& path);

/// ASCII PGM (P2), gray only. A "# dpi N" comment round-trips the dpi.
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const Image& img, const std::filesystem::path& path);

/// Dispatches on the extension: .png or .pgm.
Image read_image(const std::filesystem::path& path);
void write_image(const Image& img, const std::filesystem::path& path);

}  // namespace srocr::degrade
