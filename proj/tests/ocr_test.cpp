#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "srocr/degrade/degrade.hpp"
#include "srocr/errors.hpp"
#include "srocr/metrics/metrics.hpp"
#include "srocr/ocr/ocr.hpp"

namespace srocr::ocr {
namespace {

namespace fs = std::filesystem;
using degrade::render_text_page;

std::string printable_ascii_lines(int width) {
    std::string all;
    for (char c = 0x21; c <= 0x7E; ++c) all += c;
    std::string out;
    for (std::size_t i = 0; i < all.size(); i += static_cast<std::size_t>(width)) out += all.substr(i, static_cast<std::size_t>(width)) + "\n";
    return out;
}

TEST(MockOcr, ReadsCleanRender) {
    EXPECT_EQ(mock_ocr(render_text_page("HELLO", 200, FontSpec{}).image, FontSpec{}), "HELLO");
    const std::string text = "The quick brown fox\n\njumps over  the lazy dog.";
    EXPECT_EQ(mock_ocr(render_text_page(text, 220, FontSpec{}).image, FontSpec{}), text);
}

TEST(MockOcr, EveryPrintableGlyphRoundTrips) {
    for (const int dpi : {200, 260}) {
        const std::string text = printable_ascii_lines(20);
        const std::string got = mock_ocr(render_text_page(text, dpi, FontSpec{}).image, FontSpec{});
        EXPECT_EQ(metrics::normalize_text(got), metrics::normalize_text(text)) << dpi;
    }
    const FontSpec bold{2, true};
    const std::string text = printable_ascii_lines(25);
    EXPECT_EQ(metrics::normalize_text(mock_ocr(render_text_page(text, 200, bold).image, bold)),
              metrics::normalize_text(text));
}

TEST(MockOcr, BlankPageAndErrors) {
    Image blank(1700, 2200, 1, 255);
    blank.dpi = 200;
    EXPECT_EQ(mock_ocr(blank, FontSpec{}), "");
    Image no_dpi = blank;
    no_dpi.dpi.reset();
    EXPECT_THROW(mock_ocr(no_dpi, FontSpec{}), std::invalid_argument);
    Image wrong(850, 1100, 1, 255);
    wrong.dpi = 200;
    EXPECT_THROW(mock_ocr(wrong, FontSpec{}), ShapeError);
}

TEST(MockOcr, ToleratesSmallGridOffset) {
    const Image page = render_text_page("Offset grid 123", 200, FontSpec{}).image;
    Image shifted(page.width, page.height, 1, 255);
    shifted.dpi = page.dpi;
    for (int y = 0; y < page.height; ++y)
        for (int x = 0; x < page.width; ++x)
            if (x >= 4 && y >= 9) shifted.at(x, y) = page.at(x - 4, y - 9);
    EXPECT_EQ(mock_ocr(shifted, FontSpec{}), "Offset grid 123");
}

TEST(MockOcr, DegradationLowersAccuracy) {
    const std::string text = "Pack my box with\nfive dozen liquor jugs.\nSphinx of black quartz,\njudge my vow 0123456789";
    const Image page = render_text_page(text, 200, FontSpec{}).image;
    const auto restored_fuzz = [&](double scale) {
        const Image lr = degrade::degrade_pipeline(page, degrade::DegradeSpec{scale, 0.0, 0.0, 0});
        const Image back = degrade::resize(lr, page.width, page.height, ResampleKernel::bicubic);
        return metrics::fuzz_ratio(metrics::normalize_text(text), metrics::normalize_text(mock_ocr(back, FontSpec{})));
    };
    EXPECT_EQ(restored_fuzz(0.5), 100);
    EXPECT_LT(restored_fuzz(0.1), 50);
}

TEST(Binarize, MapsToTwoLevels) {
    Image img(4, 1, 1);
    img.data = {0, 159, 160, 255};
    EXPECT_EQ(binarize(img, 160).data, (std::vector<std::uint8_t>{0, 0, 255, 255}));
}

class ExternalOcr : public ::testing::Test {
protected:
    void SetUp() override {
        ::unsetenv("SROCR_TESSERACT");
        page_ = render_text_page("ab", 72, FontSpec{1, false}).image;
        scratch_ = fs::temp_directory_path() / "srocr_ocr_test";
        fs::create_directories(scratch_);
    }
    OcrEngineSpec spec(const std::string& command, double timeout = 10.0) const {
        OcrEngineSpec s;
        s.kind = EngineKind::external;
        s.command_template = command;
        s.timeout_s = timeout;
        return s;
    }
    Image page_;
    fs::path scratch_;
};

TEST_F(ExternalOcr, ReturnsEngineTextWithNormalizedNewlines) {
    EXPECT_EQ(run_external_ocr(page_, spec("printf 'hello\\r\\nworld\\r' > {output}.txt")), "hello\nworld\n");
    EXPECT_EQ(run_ocr(page_, spec("printf fixed > {output}.txt")), "fixed");
}

TEST_F(ExternalOcr, InputIsBinarizedPng) {
    const fs::path copy = scratch_ / "seen.png";
    Image gray(20, 20, 1);
    for (std::size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = static_cast<std::uint8_t>(i % 256);
    run_external_ocr(gray, spec("cp {input} '" + copy.string() + "' && : > {output}.txt"));
    const Image seen = degrade::read_png(copy);
    EXPECT_EQ(seen, binarize(gray, 160));
}

TEST_F(ExternalOcr, ErrorsAreClassified) {
    EXPECT_THROW(run_external_ocr(page_, spec("/nonexistent/srocr-engine {input} {output}")), EngineNotInstalled);
    try {
        run_external_ocr(page_, spec("echo boom >&2; exit 3"));
        FAIL() << "expected EngineFailed";
    } catch (const EngineFailed& e) {
        EXPECT_EQ(e.exit_code(), 3);
        EXPECT_NE(e.stderr_text().find("boom"), std::string::npos);
    }
    EXPECT_THROW(run_external_ocr(page_, spec("true")), OcrError);  // no output file
    EXPECT_THROW(run_external_ocr(page_, spec("")), ConfigError);
    EXPECT_THROW(run_external_ocr(page_, spec("true", 0.0)), ConfigError);
}

TEST_F(ExternalOcr, TimeoutKillsTheEngine) {
    const auto start = std::chrono::steady_clock::now();
    EXPECT_THROW(run_external_ocr(page_, spec("sleep 5; sleep 5", 0.3)), EngineTimeout);
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(3));
}

TEST_F(ExternalOcr, TemporaryDirectoryIsRemoved) {
    const fs::path record = scratch_ / "where.txt";
    const std::string log = " && echo {input} > '" + record.string() + "'";
    run_external_ocr(page_, spec(": > {output}.txt" + log));
    std::string input;
    std::ifstream(record) >> input;
    ASSERT_FALSE(input.empty());
    EXPECT_FALSE(fs::exists(fs::path(input).parent_path()));

    EXPECT_THROW(run_external_ocr(page_, spec("echo {input} > '" + record.string() + "'; exit 9")), EngineFailed);
    std::ifstream(record) >> input;
    EXPECT_FALSE(fs::exists(fs::path(input).parent_path()));
}

TEST_F(ExternalOcr, EnvironmentOverridesTesseractBinary) {
    const fs::path fake = scratch_ / "fake-tesseract";
    std::ofstream(fake) << "#!/bin/sh\nif [ \"$1\" = --version ]; then echo 'fake 9.9'; exit 0; fi\nprintf 'from fake' > \"$2.txt\"\n";
    fs::permissions(fake, fs::perms::owner_all);
    ::setenv("SROCR_TESSERACT", fake.c_str(), 1);
    EXPECT_EQ(expand_command("tesseract {input} {output} --psm 6", "in.png", "out"),
              "'" + fake.string() + "' 'in.png' 'out' --psm 6");
    EXPECT_EQ(expand_command("tesseractx {input}", "a", "b"), "tesseractx 'a'");
    EXPECT_EQ(run_external_ocr(page_, spec(kDefaultCommand)), "from fake");
    const EngineProbe p = engine_probe(spec(kDefaultCommand));
    EXPECT_TRUE(p.available);
    EXPECT_EQ(p.version, "fake 9.9");
    ::unsetenv("SROCR_TESSERACT");
}

TEST_F(ExternalOcr, ProbeReportsUnavailableEngines) {
    EXPECT_TRUE(engine_probe(OcrEngineSpec{}).available);
    const EngineProbe missing = engine_probe(spec("/nonexistent/srocr-engine {input} {output}"));
    EXPECT_FALSE(missing.available);
    EXPECT_TRUE(missing.version.empty());
    EXPECT_FALSE(missing.detail.empty());
}

TEST(EngineKindNames, ParseAndPrint) {
    EXPECT_EQ(parse_engine_kind("mock"), EngineKind::mock);
    EXPECT_EQ(parse_engine_kind(to_string(EngineKind::external)), EngineKind::external);
    EXPECT_THROW(parse_engine_kind("tess"), ConfigError);
}

}  // namespace
}  // namespace srocr::ocr
