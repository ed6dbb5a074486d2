#include "srocr/metrics/metrics.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace srocr::metrics {

namespace {

void require_same(const Image& a, const Image& b, const char* op) {
    a.validate();
    b.validate();
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw ShapeError(std::string(op) + ": images differ in size or channels");
}

// Clamped 11-tap Gaussian along a row. Taps run in the outer loop so the
// inner loop vectorizes; each output still sums its taps in index order.
void filter_row(const double* src, int w, const double* k, double* out) {
    constexpr int r = 5;
    std::fill(out, out + w, 0.0);
    for (int i = -r; i <= r; ++i) {
        const double kv = k[i + r];
        const int lo = std::clamp(-i, 0, w), hi = std::clamp(w - i, 0, w);
        for (int x = 0; x < lo; ++x) out[x] += kv * src[std::clamp(x + i, 0, w - 1)];
        for (int x = lo; x < hi; ++x) out[x] += kv * src[x + i];
        for (int x = hi; x < w; ++x) out[x] += kv * src[std::clamp(x + i, 0, w - 1)];
    }
}

std::vector<UChar32> code_points(std::string_view s) {
    std::vector<UChar32> out;
    const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
    const auto n = static_cast<std::int32_t>(s.size());
    std::int32_t i = 0;
    while (i < n) {
        UChar32 c = 0;
        U8_NEXT(p, i, n, c);
        out.push_back(c < 0 ? 0xFFFD : c);
    }
    return out;
}

}  // namespace

double mse(const Image& a, const Image& b) {
    require_same(a, b, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        s += d * d;
    }
    return s / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / m);
}

double ssim(const Image& a, const Image& b) {
    require_same(a, b, "ssim");
    if (a.width < 11 || a.height < 11) throw ShapeError("ssim: images must be at least 11x11");
    const Image ga = degrade::to_gray(a), gb = degrade::to_gray(b);
    const int w = ga.width, h = ga.height;

    std::vector<double> k;
    double total = 0.0;
    for (int i = -5; i <= 5; ++i) {
        k.push_back(std::exp(-(i * i) / (2.0 * 1.5 * 1.5)));
        total += k.back();
    }
    for (double& v : k) v /= total;

    const double c1 = (0.01 * 255) * (0.01 * 255);
    const double c2 = (0.03 * 255) * (0.03 * 255);

    // Ring of horizontally filtered rows for x, y, xx, yy, xy; row y of the
    // source lives in slot y mod 11.
    constexpr int kTaps = 11, r = 5;
    const auto width = static_cast<std::size_t>(w);
    std::vector<double> ring(5 * kTaps * width);
    const auto row_ptr = [&](int q, int src_row) { return ring.data() + (static_cast<std::size_t>(q) * kTaps + static_cast<std::size_t>(src_row % kTaps)) * width; };
    std::vector<double> src(5 * width);
    const auto fill = [&](int src_row) {
        const std::uint8_t* pa = ga.data.data() + static_cast<std::size_t>(src_row) * width;
        const std::uint8_t* pb = gb.data.data() + static_cast<std::size_t>(src_row) * width;
        for (std::size_t x = 0; x < width; ++x) {
            const double a = pa[x], b = pb[x];
            src[x] = a;
            src[width + x] = b;
            src[2 * width + x] = a * a;
            src[3 * width + x] = b * b;
            src[4 * width + x] = a * b;
        }
        for (int q = 0; q < 5; ++q) filter_row(src.data() + static_cast<std::size_t>(q) * width, w, k.data(), row_ptr(q, src_row));
    };

    std::vector<double> m(5 * width);
    std::array<const double*, kTaps> rows{};
    double sum = 0.0;
    int filled = -1;
    for (int y = 0; y < h; ++y) {
        for (; filled < std::min(y + r, h - 1); ) fill(++filled);
        for (int q = 0; q < 5; ++q) {
            for (int i = -r; i <= r; ++i) rows[static_cast<std::size_t>(i + r)] = row_ptr(q, std::clamp(y + i, 0, h - 1));
            double* out = m.data() + static_cast<std::size_t>(q) * width;
            std::fill(out, out + width, 0.0);
            for (int i = 0; i < kTaps; ++i) {
                const double kv = k[static_cast<std::size_t>(i)];
                const double* row = rows[static_cast<std::size_t>(i)];
                for (std::size_t x = 0; x < width; ++x) out[x] += kv * row[x];
            }
        }
        const double* mx = m.data();
        const double* my = mx + width;
        const double* exx = my + width;
        const double* eyy = exx + width;
        const double* exy = eyy + width;
        for (std::size_t x = 0; x < width; ++x) {
            const double vx = exx[x] - mx[x] * mx[x];
            const double vy = eyy[x] - my[x] * my[x];
            const double cxy = exy[x] - mx[x] * my[x];
            sum += ((2 * mx[x] * my[x] + c1) * (2 * cxy + c2)) / ((mx[x] * mx[x] + my[x] * my[x] + c1) * (vx + vy + c2));
        }
    }
    const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    return sum / static_cast<double>(n);
}

ImageScore score_image(const Image& reference, const Image& candidate) {
    ImageScore s;
    s.mse = mse(reference, candidate);
    s.psnr_db = s.mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(255.0 * 255.0 / s.mse);
    s.ssim = ssim(reference, candidate);
    return s;
}

long levenshtein(std::string_view a, std::string_view b, EditWeights w) {
    if (w.insert < 1 || w.remove < 1 || w.substitute < 1)
        throw std::invalid_argument("levenshtein: weights must be >= 1");
    const auto s = code_points(a), t = code_points(b);
    std::vector<long> prev(t.size() + 1), cur(t.size() + 1);
    for (std::size_t j = 0; j <= t.size(); ++j) prev[j] = static_cast<long>(j) * w.insert;
    for (std::size_t i = 1; i <= s.size(); ++i) {
        cur[0] = static_cast<long>(i) * w.remove;
        for (std::size_t j = 1; j <= t.size(); ++j) {
            const long sub = prev[j - 1] + (s[i - 1] == t[j - 1] ? 0 : w.substitute);
            cur[j] = std::min({prev[j] + w.remove, cur[j - 1] + w.insert, sub});
        }
        std::swap(prev, cur);
    }
    return prev[t.size()];
}

long code_point_length(std::string_view s) { return static_cast<long>(code_points(s).size()); }

int fuzz_ratio(std::string_view a, std::string_view b) {
    const long total = code_point_length(a) + code_point_length(b);
    if (total == 0) return 100;
    const long dist = levenshtein(a, b, EditWeights{1, 1, 2});
    // Integer round-half-up of 100 (T - L) / T; the quotient is never negative.
    return static_cast<int>((200 * (total - dist) + total) / (2 * total));
}

std::string normalize_text(std::string_view s) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
    const icu::UnicodeString src = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<std::int32_t>(s.size())));
    const icu::UnicodeString composed = nfc->normalize(src, status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalization failed");

    icu::UnicodeString out;
    bool pending_space = false;
    for (std::int32_t i = 0; i < composed.length();) {
        const UChar32 c = composed.char32At(i);
        i += U16_LENGTH(c);
        if (c == '\r' || c == '\n' || c == '\t' || u_isUWhiteSpace(c)) {
            pending_space = !out.isEmpty();
            continue;
        }
        if (pending_space) out.append(static_cast<UChar>(' '));
        pending_space = false;
        out.append(c);
    }
    std::string utf8;
    out.toUTF8String(utf8);
    return utf8;
}

TextScore score_text(std::string_view reference, std::string_view hypothesis) {
    const std::string ref = normalize_text(reference), hyp = normalize_text(hypothesis);
    TextScore s;
    s.fuzz = fuzz_ratio(ref, hyp);
    s.levenshtein = levenshtein(ref, hyp, EditWeights{1, 1, 2});
    s.len_ref = code_point_length(ref);
    s.len_hyp = code_point_length(hyp);
    return s;
}

}  // namespace srocr::metrics
