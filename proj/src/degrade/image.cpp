#include "srocr/degrade/image.hpp"

#include <png.h>

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

namespace srocr::degrade {

Image to_gray(const Image& img) {
    if (img.channels == 1) return img;
    Image out(img.width, img.height, 1);
    out.dpi = img.dpi;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.at(x, y) = to_u8(0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2));
    return out;
}

Image to_rgb(const Image& img) {
    if (img.channels == 3) return img;
    Image out(img.width, img.height, 3);
    out.dpi = img.dpi;
    for (std::size_t i = 0; i < img.data.size(); ++i)
        for (std::size_t c = 0; c < 3; ++c) out.data[i * 3 + c] = img.data[i];
    return out;
}

namespace {

std::uint32_t be32(const unsigned char* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

// Walks the chunk list for pHYs; returns dpi when the unit is metres.
std::optional<int> png_dpi(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = be32(&bytes[pos]);
        const std::string type(bytes.begin() + static_cast<std::ptrdiff_t>(pos + 4),
                               bytes.begin() + static_cast<std::ptrdiff_t>(pos + 8));
        if (type == "IDAT" || type == "IEND") break;
        if (type == "pHYs" && len == 9 && pos + 8 + 9 <= bytes.size()) {
            const unsigned char* d = &bytes[pos + 8];
            if (d[8] != 1) return std::nullopt;
            return static_cast<int>(std::lround(be32(d) * 0.0254));
        }
        pos += 12 + static_cast<std::size_t>(len);
    }
    return std::nullopt;
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw FormatError("cannot read PNG " + path.string() + ": " + image.message);
    }
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    Image out(static_cast<int>(image.width), static_cast<int>(image.height), color ? 3 : 1);
    png_color white{255, 255, 255};
    if (!png_image_finish_read(&image, &white, out.data.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw FormatError("cannot decode PNG " + path.string() + ": " + msg);
    }
    out.dpi = png_dpi(path);
    return out;
}

void write_png(const Image& img, const std::filesystem::path& path) {
    img.validate();
    std::FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (fp == nullptr) throw FormatError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(img.data.data() + img.index(0, y));
    if (png == nullptr || info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw FormatError("PNG encoding failed for " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    if (img.dpi) {
        const auto ppm = static_cast<png_uint_32>(std::lround(*img.dpi / 0.0254));
        png_set_pHYs(png, info, ppm, ppm, PNG_RESOLUTION_METER);
    }
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fclose(fp) != 0) throw FormatError("failed writing " + path.string());
}

Image read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::optional<int> dpi;
    std::vector<long> tokens;
    std::string line;
    bool magic_seen = false;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            std::istringstream comment(line.substr(hash + 1));
            std::string key;
            int value = 0;
            if (comment >> key >> value && key == "dpi") dpi = value;
            line.resize(hash);
        }
        std::istringstream words(line);
        std::string word;
        while (words >> word) {
            if (!magic_seen) {
                if (word != "P2") throw FormatError(path.string() + ": not an ASCII PGM (P2) file");
                magic_seen = true;
                continue;
            }
            try {
                tokens.push_back(std::stol(word));
            } catch (const std::exception&) {
                throw FormatError(path.string() + ": bad PGM token '" + word + "'");
            }
        }
    }
    if (!magic_seen || tokens.size() < 3) throw FormatError(path.string() + ": truncated PGM header");
    const long w = tokens[0], h = tokens[1], maxval = tokens[2];
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255) throw FormatError(path.string() + ": unsupported PGM header");
    if (tokens.size() != 3 + static_cast<std::size_t>(w * h)) throw FormatError(path.string() + ": PGM sample count mismatch");
    Image out(static_cast<int>(w), static_cast<int>(h), 1);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const long v = tokens[3 + i];
        if (v < 0 || v > maxval) throw FormatError(path.string() + ": PGM sample out of range");
        out.data[i] = static_cast<std::uint8_t>(maxval == 255 ? v : round_half_away(v * 255.0 / static_cast<double>(maxval)));
    }
    out.dpi = dpi;
    return out;
}

void write_pgm(const Image& img, const std::filesystem::path& path) {
    img.validate();
    if (img.channels != 1) throw ShapeError("PGM output needs a gray image");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "P2\n";
    if (img.dpi) out << "# dpi " << *img.dpi << "\n";
    out << img.width << ' ' << img.height << "\n255\n";
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) out << (x ? " " : "") << static_cast<int>(img.at(x, y));
        out << '\n';
    }
    if (!out) throw FormatError("failed writing " + path.string());
}

namespace {

std::string lower_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
    const auto ext = lower_extension(path);
    if (ext == ".png") return read_png(path);
    if (ext == ".pgm") return read_pgm(path);
    throw FormatError("unsupported image extension '" + ext + "' (expected .png or .pgm)");
}

void write_image(const Image& img, const std::filesystem::path& path) {
    const auto ext = lower_extension(path);
    if (ext == ".png") return write_png(img, path);
    if (ext == ".pgm") return write_pgm(img, path);
    throw FormatError("unsupported image extension '" + ext + "' (expected .png or .pgm)");
}

}  // namespace srocr::degrade
