#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "srocr/degrade/degrade.hpp"
#include "srocr/degrade/render.hpp"
#include "srocr/hash.hpp"

namespace srocr::degrade {
namespace {

namespace fs = std::filesystem;

fs::path temp_path(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / "srocr_degrade_test";
    fs::create_directories(dir);
    return dir / leaf;
}

Image gray(int w, int h, std::uint8_t v = 0) { return Image(w, h, 1, v); }

const FontSpec kLarge{2, false};

TEST(Render, PageDimensionsFollowDpi) {
    const auto r = render_text_page("Hello", 200, kLarge);
    EXPECT_EQ(r.image.width, 1700);
    EXPECT_EQ(r.image.height, 2200);
    EXPECT_EQ(r.image.channels, 1);
    EXPECT_EQ(r.image.dpi, 200);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Render, EmptyTextIsAnError) {
    EXPECT_THROW(render_text_page("", 200, kLarge), std::invalid_argument);
    EXPECT_THROW(render_text_page(" \n\t\r\n  ", 200, kLarge), std::invalid_argument);
    EXPECT_THROW(render_text_page("x", 71, kLarge), std::invalid_argument);
    EXPECT_THROW(render_text_page("x", 601, kLarge), std::invalid_argument);
}

TEST(Render, GlyphMatchesHandDrawnBitmap) {
    // Capital A of the embedded font, drawn by hand.
    const char* expected[8] = {"..##....", ".####...", "##..##..", "##..##..",
                               "######..", "##..##..", "##..##..", "........"};
    const FontSpec font{1, false};
    const PageLayout l = page_layout(72, font);
    ASSERT_EQ(l.cell, 8);
    const Image img = render_text_page("A", 72, font).image;
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            EXPECT_EQ(img.at(l.margin + x, l.margin + y), expected[y][x] == '#' ? 0 : 255) << x << "," << y;
}

TEST(Render, DoubleDpiIsNearestNeighbourDoubling) {
    const Image small = render_text_page("AB", 72, kLarge).image;
    const Image big = render_text_page("AB", 144, kLarge).image;
    ASSERT_EQ(big.width, 2 * small.width);
    ASSERT_EQ(big.height, 2 * small.height);
    for (int y = 0; y < big.height; ++y)
        for (int x = 0; x < big.width; ++x) ASSERT_EQ(big.at(x, y), small.at(x / 2, y / 2)) << x << "," << y;
}

TEST(Render, BoldThickensStrokes) {
    const GlyphRows plain = glyph_rows(U'l');
    const GlyphRows bold = glyph_rows(U'l', true);
    for (std::size_t r = 0; r < 8; ++r) EXPECT_EQ(bold[r], static_cast<std::uint8_t>(plain[r] | (plain[r] << 1)));
    const Image a = render_text_page("l", 200, FontSpec{2, false}).image;
    const Image b = render_text_page("l", 200, FontSpec{2, true}).image;
    const auto ink = [](const Image& i) { return std::count(i.data.begin(), i.data.end(), 0); };
    EXPECT_GT(ink(b), ink(a));
}

TEST(Render, UnsupportedCodePointsBecomeBoxesWithWarning) {
    const auto r = render_text_page("caf\xC3\xA9", 72, FontSpec{1, false});
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find("U+00E9"), std::string::npos);
    const PageLayout l = page_layout(72, FontSpec{1, false});
    const GlyphRows box = replacement_glyph();
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            const bool on = (box[static_cast<std::size_t>(y)] >> x) & 1;
            EXPECT_EQ(r.image.at(l.cell_x(3) + x, l.margin + y), on ? 0 : 255);
        }
}

TEST(Render, WrapsAndTruncates) {
    const PageLayout l = page_layout(200, kLarge);
    EXPECT_EQ(l.cell, 44);
    EXPECT_EQ(l.line_pitch, 66);
    EXPECT_EQ(l.columns, 29);
    EXPECT_EQ(l.rows, 27);

    const std::string long_line(35, 'x');
    EXPECT_EQ(rendered_text(long_line, 200, kLarge), std::string(29, 'x') + "\n" + std::string(6, 'x'));

    std::string many;
    for (int i = 0; i < 30; ++i) many += "line\n";
    const auto r = render_text_page(many, 200, kLarge);
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find("truncated"), std::string::npos);
    const std::string placed = rendered_text(many, 200, kLarge);
    EXPECT_EQ(std::count(placed.begin(), placed.end(), '\n'), 26);
}

TEST(Render, TextLinesNormalization) {
    const auto lines = text_lines("\n\na\tb  \r\nc\rd\n\n");
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0], U"a   b");
    EXPECT_EQ(lines[1], U"c");
    EXPECT_EQ(lines[2], U"d");
}

TEST(Resample, OutputDimensions) {
    EXPECT_EQ(resample(gray(100, 200), 0.5).width, 50);
    EXPECT_EQ(resample(gray(100, 200), 0.5).height, 100);
    EXPECT_EQ(resample(gray(100, 100), 0.29).width, 29);
    EXPECT_EQ(resample(gray(1700, 2200), 0.35).width, 595);
    EXPECT_THROW(resample(gray(5, 5), 0.1), std::invalid_argument);
    EXPECT_THROW(resample(gray(5, 5), 0.0), std::invalid_argument);
    EXPECT_THROW(resample(gray(5, 5), -1.0), std::invalid_argument);
}

TEST(Resample, ConstantImagesStayConstant) {
    for (const auto k : {ResampleKernel::bicubic, ResampleKernel::bilinear, ResampleKernel::nearest, ResampleKernel::box})
        for (const double f : {0.1, 0.35, 0.5, 1.0, 2.0, 3.0}) {
            const Image out = resample(Image(40, 30, 3, 137), f, k);
            for (const auto v : out.data) ASSERT_EQ(v, 137);
        }
}

TEST(Resample, FactorOneIsIdentity) {
    Image img = gray(9, 7);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>((i * 37) % 256);
    for (const auto k : {ResampleKernel::bicubic, ResampleKernel::bilinear, ResampleKernel::nearest, ResampleKernel::box})
        EXPECT_EQ(resample(img, 1.0, k), img);
}

// Direct evaluation of the cubic convolution kernel (a = -0.5) at each
// output pixel, two-dimensional sum with clamped source indices.
double keys(double t) {
    t = std::abs(t);
    if (t <= 1) return 1.5 * t * t * t - 2.5 * t * t + 1;
    if (t < 2) return -0.5 * t * t * t + 2.5 * t * t - 4 * t + 2;
    return 0;
}

TEST(Resample, BicubicUpscaleMatchesKernelFormula) {
    Image ramp = gray(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) ramp.at(x, y) = static_cast<std::uint8_t>(20 + 24 * x + 3 * y * y);
    const Image up = resample(ramp, 2.0, ResampleKernel::bicubic);
    ASSERT_EQ(up.width, 16);
    int max_diff = 0;
    for (int oy = 0; oy < 16; ++oy)
        for (int ox = 0; ox < 16; ++ox) {
            const double sx = (ox + 0.5) / 2 - 0.5, sy = (oy + 0.5) / 2 - 0.5;
            double acc = 0;
            for (int j = static_cast<int>(std::floor(sy)) - 1; j <= static_cast<int>(std::floor(sy)) + 2; ++j)
                for (int i = static_cast<int>(std::floor(sx)) - 1; i <= static_cast<int>(std::floor(sx)) + 2; ++i)
                    acc += keys(sx - i) * keys(sy - j) * ramp.at(std::clamp(i, 0, 7), std::clamp(j, 0, 7));
            const long expect = std::clamp(std::lround(acc), 0L, 255L);
            max_diff = std::max(max_diff, static_cast<int>(std::abs(expect - up.at(ox, oy))));
        }
    EXPECT_EQ(max_diff, 0);
}

TEST(Resample, DownscaleAveragesFootprint) {
    // A 2x2 checkerboard of 0/200 shrunk by half lands on the mean under
    // the box kernel.
    Image img = gray(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) img.at(x, y) = ((x + y) % 2) ? 200 : 0;
    for (const auto v : resample(img, 0.5, ResampleKernel::box).data) EXPECT_EQ(v, 100);
}

TEST(Blur, IdentityCases) {
    Image img = gray(12, 10);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>(i * 13 % 256);
    EXPECT_EQ(gaussian_blur(img, 0.0), img);
    const Image flat(20, 20, 1, 77);
    EXPECT_EQ(gaussian_blur(flat, 2.5), flat);
    EXPECT_THROW(gaussian_blur(img, -1.0), std::invalid_argument);
}

TEST(Blur, SinglePixelMatchesSampledGaussian) {
    Image img = gray(21, 21, 0);
    img.at(10, 10) = 255;
    const Image out = gaussian_blur(img, 1.0);
    double norm = 0;
    for (int k = -3; k <= 3; ++k) norm += std::exp(-k * k / 2.0);
    for (int y = 0; y < 21; ++y)
        for (int x = 0; x < 21; ++x) {
            const int dx = x - 10, dy = y - 10;
            double expect = 0;
            if (std::abs(dx) <= 3 && std::abs(dy) <= 3)
                expect = 255 * std::exp(-(dx * dx + dy * dy) / 2.0) / (norm * norm);
            EXPECT_NEAR(out.at(x, y), expect, 1.0) << x << "," << y;
        }
}

TEST(Noise, IdentityAndDeterminism) {
    const Image img(30, 30, 1, 128);
    EXPECT_EQ(add_noise(img, 0.0, 5), img);
    EXPECT_EQ(add_noise(img, 10.0, 5), add_noise(img, 10.0, 5));
    EXPECT_NE(add_noise(img, 10.0, 5), add_noise(img, 10.0, 6));
}

TEST(Noise, SampleStandardDeviation) {
    const Image img(1000, 1000, 1, 128);
    const Image out = add_noise(img, 10.0, 42);
    double sum = 0, sq = 0;
    for (const auto v : out.data) {
        sum += v;
        sq += static_cast<double>(v) * v;
    }
    const double n = static_cast<double>(out.data.size());
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    EXPECT_GE(sd, 9.5);
    EXPECT_LE(sd, 10.5);
    EXPECT_NEAR(sum / n, 128.0, 0.1);
}

TEST(Pipeline, IdentityAndDimensions) {
    const Image page = render_text_page("Pipeline", 200, kLarge).image;
    EXPECT_EQ(degrade_pipeline(page, DegradeSpec{1.0, 0.0, 0.0, 0}), page);
    const Image half = degrade_pipeline(page, DegradeSpec{0.5, 0.0, 0.0, 0});
    EXPECT_EQ(half.width, 850);
    EXPECT_EQ(half.height, 1100);
    EXPECT_EQ(half.dpi, 200);
    EXPECT_THROW(degrade_pipeline(page, DegradeSpec{1.5, 0, 0, 0}), std::invalid_argument);
    EXPECT_THROW(degrade_pipeline(page, DegradeSpec{0.5, -1, 0, 0}), std::invalid_argument);
}

TEST(Pipeline, RoundTripDimensions) {
    const Image img(1700, 2200, 1, 255);
    for (const double s : {0.1, 0.2, 0.3, 0.35, 0.4, 0.45, 0.5}) {
        const Image lr = degrade_pipeline(img, DegradeSpec{s, 0, 0, 0});
        const Image back = resample(lr, 1.0 / s);
        EXPECT_LE(std::abs(back.width - img.width), 1 + static_cast<int>(1 / s)) << s;
        EXPECT_LE(std::abs(back.height - img.height), 1 + static_cast<int>(1 / s)) << s;
    }
}

TEST(Pipeline, CanonicalGolden) {
    const std::string text = "The quick brown fox\njumps over the lazy dog.\n0123456789 !?";
    const Image page = render_text_page(text, 200, kLarge).image;
    const Image lr = degrade_pipeline(page, DegradeSpec{0.3, 0.5, 2.0, 7});
    EXPECT_EQ(lr.width, 510);
    EXPECT_EQ(lr.height, 660);
    const std::string digest = sha256_hex(lr.data);
    const fs::path golden = fs::path(SROCR_DATA_DIR) / "golden" / "degrade_canonical.sha256";
    if (std::getenv("SROCR_UPDATE_GOLDEN") != nullptr) {
        std::ofstream(golden) << digest << "\n";
        GTEST_SKIP() << "golden updated";
    }
    std::ifstream in(golden);
    std::string expected;
    ASSERT_TRUE(in >> expected) << "missing " << golden;
    EXPECT_EQ(digest, expected);
    EXPECT_EQ(sha256_hex(degrade_pipeline(page, DegradeSpec{0.3, 0.5, 2.0, 7}).data), digest);
}

TEST(ImageIo, PngRoundTrip) {
    Image g = gray(13, 7);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = static_cast<std::uint8_t>(i * 29 % 256);
    g.dpi = 220;
    write_png(g, temp_path("g.png"));
    EXPECT_EQ(read_png(temp_path("g.png")), g);

    Image rgb(5, 4, 3);
    for (std::size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = static_cast<std::uint8_t>(i * 11 % 256);
    write_image(rgb, temp_path("c.png"));
    EXPECT_EQ(read_image(temp_path("c.png")), rgb);
}

TEST(ImageIo, PgmRoundTripAndErrors) {
    Image g = gray(6, 3);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = static_cast<std::uint8_t>(i * 40 % 256);
    g.dpi = 96;
    write_pgm(g, temp_path("g.pgm"));
    EXPECT_EQ(read_pgm(temp_path("g.pgm")), g);

    std::ofstream(temp_path("bad.pgm")) << "P5\n2 2\n255\n";
    EXPECT_THROW(read_pgm(temp_path("bad.pgm")), FormatError);
    std::ofstream(temp_path("short.pgm")) << "P2\n2 2\n255\n1 2 3\n";
    EXPECT_THROW(read_pgm(temp_path("short.pgm")), FormatError);
    std::ofstream(temp_path("bad.png")) << "not a png";
    EXPECT_THROW(read_png(temp_path("bad.png")), FormatError);
    EXPECT_THROW(read_image(temp_path("x.bmp")), FormatError);
}

TEST(ImageIo, GrayConversion) {
    Image rgb(1, 1, 3);
    rgb.data = {255, 0, 0};
    EXPECT_EQ(to_gray(rgb).data[0], 76);
    EXPECT_EQ(to_rgb(to_gray(rgb)).data, (std::vector<std::uint8_t>{76, 76, 76}));
}

}  // namespace
}  // namespace srocr::degrade
