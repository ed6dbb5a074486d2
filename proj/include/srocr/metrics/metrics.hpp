#pragma once

#include <string>
#include <string_view>

#include "srocr/degrade/image.hpp"

namespace srocr::metrics {

using degrade::Image;

// ---------------------------------------------------------------------------
// Image fidelity

/// Mean squared error over all samples. Throws ShapeError on mismatched
/// dimensions or channel counts.
double mse(const Image& a, const Image& b);

/// 10 log10(255^2 / MSE); +infinity when the images are identical.
double psnr(const Image& a, const Image& b);

/// Mean local SSIM over every pixel: 11x11 Gaussian window (sigma 1.5,
/// edge clamped), C1 = (0.01 * 255)^2, C2 = (0.03 * 255)^2. RGB inputs are
/// converted to luma first. Throws ShapeError when either side is below 11
/// pixels or the dimensions differ.
double ssim(const Image& a, const Image& b);

struct ImageScore {
    double psnr_db = 0.0;
    double ssim = 0.0;
    double mse = 0.0;
};
ImageScore score_image(const Image& reference, const Image& candidate);

// ---------------------------------------------------------------------------
// Text similarity

struct EditWeights {
    int insert = 1;
    int remove = 1;
    int substitute = 1;
};

/// Weighted edit distance between the Unicode scalar sequences of two
/// UTF-8 strings (invalid bytes decode to U+FFFD). Throws
/// std::invalid_argument for weights below 1.
long levenshtein(std::string_view a, std::string_view b, EditWeights w = {});

/// round(100 (T - L) / T) with L the edit distance under substitution cost
/// 2 and T the summed code point lengths; 100 when both are empty.
int fuzz_ratio(std::string_view a, std::string_view b);

/// NFC, then CR/LF/TAB and other white space collapsed to single spaces,
/// then trimmed.
std::string normalize_text(std::string_view s);

/// Number of Unicode scalar values.
long code_point_length(std::string_view s);

struct TextScore {
    int fuzz = 0;
    long levenshtein = 0;  // substitution cost 2, matching fuzz
    long len_ref = 0;
    long len_hyp = 0;
};

/// Scores normalized reference against normalized hypothesis.
TextScore score_text(std::string_view reference, std::string_view hypothesis);

}  // namespace srocr::metrics
