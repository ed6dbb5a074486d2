#pragma once

#include <stdexcept>
#include <string>

#include "srocr/degrade/image.hpp"
#include "srocr/degrade/render.hpp"

namespace srocr::ocr {

using degrade::FontSpec;
using degrade::Image;

enum class EngineKind { external, mock };

std::string to_string(EngineKind k);
/// "external" | "mock"; throws ConfigError otherwise.
EngineKind parse_engine_kind(const std::string& s);

inline constexpr const char* kDefaultCommand = "tesseract {input} {output} --psm 6";

struct OcrEngineSpec {
    EngineKind kind = EngineKind::mock;
    /// Shell command run through /bin/sh. {input} expands to the quoted PNG
    /// path, {output} to the quoted output base; text is read from
    /// {output}.txt. A leading `tesseract` word is replaced by the
    /// SROCR_TESSERACT environment variable when set.
    std::string command_template = kDefaultCommand;
    double timeout_s = 120.0;
    int binarize_threshold = 160;  // engine input; the mock binarizes at kMockThreshold
    FontSpec font;                 // mock only

    /// Throws ConfigError.
    void validate() const;
};

class OcrError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shell exit status 127: the engine binary could not be found.
class EngineNotInstalled : public OcrError {
public:
    using OcrError::OcrError;
};

class EngineTimeout : public OcrError {
public:
    using OcrError::OcrError;
};

class EngineFailed : public OcrError {
public:
    EngineFailed(int exit_code, std::string stderr_text)
        : OcrError("OCR engine exited with status " + std::to_string(exit_code) + ": " + stderr_text),
          exit_code_(exit_code),
          stderr_(std::move(stderr_text)) {}
    int exit_code() const noexcept { return exit_code_; }
    const std::string& stderr_text() const noexcept { return stderr_; }

private:
    int exit_code_;
    std::string stderr_;
};

/// Gray image with every sample mapped to 0 (below threshold) or 255.
Image binarize(const Image& img, int threshold);

/// Mid-gray: a bicubic-restored edge crosses it where the original edge was,
/// so restored strokes keep the template widths.
inline constexpr int kMockThreshold = 128;

/// Template-matching reader for pages drawn by render_text_page with the
/// same font. Needs img.dpi; throws std::invalid_argument without it and
/// ShapeError when the image is not a page at that dpi. Returns "" when no
/// ink is found.
std::string mock_ocr(const Image& img, const FontSpec& font, int threshold = kMockThreshold);

/// Runs the external engine on a binarized copy of the image inside a
/// private temporary directory that is removed on every exit path. Line
/// endings of the result are normalized to '\n'.
std::string run_external_ocr(const Image& img, const OcrEngineSpec& spec);

/// Dispatches on spec.kind.
std::string run_ocr(const Image& img, const OcrEngineSpec& spec);

struct EngineProbe {
    bool available = false;
    std::string version;  // first non-empty line of the version output
    std::string detail;   // why it is unavailable
};

/// Never throws; the mock is always available.
EngineProbe engine_probe(const OcrEngineSpec& spec);

/// The command line run_external_ocr executes, after the SROCR_TESSERACT
/// substitution and placeholder expansion.
std::string expand_command(const std::string& command_template, const std::string& input, const std::string& output);

}  // namespace srocr::ocr
