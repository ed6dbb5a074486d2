#include "srocr/degrade/render.hpp"

#include <unicode/utf8.h>

#include <cstdio>
#include <set>
#include <stdexcept>

namespace srocr::degrade {

namespace {

#include "font8x8_basic.inc"

constexpr GlyphRows kReplacement{0x7F, 0x41, 0x41, 0x41, 0x41, 0x41, 0x7F, 0x00};
constexpr int kTabWidth = 4;

std::string code_point_name(char32_t cp) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cp));
    return buf;
}

std::string encode_utf8(const std::u32string& s) {
    std::string out;
    for (const char32_t cp : s) {
        char buf[U8_MAX_LENGTH];
        std::int32_t len = 0;
        U8_APPEND_UNSAFE(buf, len, static_cast<UChar32>(cp));
        out.append(buf, static_cast<std::size_t>(len));
    }
    return out;
}

void rstrip(std::u32string& s) {
    while (!s.empty() && s.back() == U' ') s.pop_back();
}

struct Placement {
    std::vector<std::u32string> lines;  // at most layout.rows, each at most layout.columns
    std::size_t dropped = 0;
};

Placement place(std::string_view utf8, const PageLayout& layout) {
    Placement p;
    for (const auto& line : text_lines(utf8)) {
        if (line.empty()) {
            p.lines.emplace_back();
            continue;
        }
        for (std::size_t at = 0; at < line.size(); at += static_cast<std::size_t>(layout.columns))
            p.lines.push_back(line.substr(at, static_cast<std::size_t>(layout.columns)));
    }
    for (auto& l : p.lines) rstrip(l);
    if (p.lines.size() > static_cast<std::size_t>(layout.rows)) {
        p.dropped = p.lines.size() - static_cast<std::size_t>(layout.rows);
        p.lines.resize(static_cast<std::size_t>(layout.rows));
    }
    while (!p.lines.empty() && p.lines.back().empty()) p.lines.pop_back();
    return p;
}

}  // namespace

void FontSpec::validate() const {
    if (magnification < 1 || magnification > 16) throw std::invalid_argument("font magnification must be in [1, 16]");
}

bool has_glyph(char32_t cp) { return cp >= 0x20 && cp <= 0x7E; }

GlyphRows replacement_glyph() { return kReplacement; }

GlyphRows glyph_rows(char32_t cp, bool bold) {
    GlyphRows rows = kReplacement;
    if (has_glyph(cp)) {
        for (int r = 0; r < 8; ++r) rows[static_cast<std::size_t>(r)] = kFont8x8Basic[cp - 0x20][r];
    }
    if (bold)
        for (auto& r : rows) r = static_cast<std::uint8_t>(r | ((r << 1) & 0xFF));
    return rows;
}

PageLayout page_layout(int dpi, const FontSpec& font) {
    if (dpi < 72 || dpi > 600) throw std::invalid_argument("dpi must be in [72, 600], got " + std::to_string(dpi));
    font.validate();
    PageLayout l;
    l.width = static_cast<int>(round_half_away(8.5 * dpi));
    l.height = 11 * dpi;
    l.margin = dpi;
    l.cell = static_cast<int>(round_half_away(8.0 * font.magnification * dpi / 72.0));
    l.line_pitch = l.cell + static_cast<int>(round_half_away(l.cell / 2.0));
    l.columns = (l.width - 2 * l.margin) / l.cell;
    l.rows = (l.height - 2 * l.margin - l.cell) / l.line_pitch + 1;
    if (l.columns < 1 || l.rows < 1) throw std::invalid_argument("font too large for the page");
    return l;
}

std::vector<std::u32string> text_lines(std::string_view utf8) {
    std::vector<std::u32string> lines(1);
    const auto* s = reinterpret_cast<const std::uint8_t*>(utf8.data());
    const auto length = static_cast<std::int32_t>(utf8.size());
    std::int32_t i = 0;
    bool after_cr = false;
    while (i < length) {
        UChar32 cp = 0;
        U8_NEXT(s, i, length, cp);
        if (cp < 0) cp = 0xFFFD;
        if (cp == '\n' && after_cr) {
            after_cr = false;
            continue;
        }
        after_cr = cp == '\r';
        if (cp == '\n' || cp == '\r') {
            lines.emplace_back();
        } else if (cp == '\t') {
            auto& l = lines.back();
            do l.push_back(U' ');
            while (l.size() % kTabWidth != 0);
        } else {
            lines.back().push_back(static_cast<char32_t>(cp));
        }
    }
    for (auto& l : lines) rstrip(l);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    std::size_t first = 0;
    while (first < lines.size() && lines[first].empty()) ++first;
    lines.erase(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(first));
    return lines;
}

RenderResult render_text_page(std::string_view utf8, int dpi, const FontSpec& font) {
    const PageLayout layout = page_layout(dpi, font);
    const Placement placed = place(utf8, layout);
    if (placed.lines.empty()) throw std::invalid_argument("text is empty after normalization");

    RenderResult result;
    Image& page = result.image;
    page = Image(layout.width, layout.height, 1, 255);
    page.dpi = dpi;
    std::set<char32_t> missing;
    for (std::size_t row = 0; row < placed.lines.size(); ++row) {
        const auto& line = placed.lines[row];
        for (std::size_t col = 0; col < line.size(); ++col) {
            const char32_t cp = line[col];
            if (cp == U' ') continue;
            if (!has_glyph(cp)) missing.insert(cp);
            const GlyphRows g = glyph_rows(cp, font.bold);
            const int x0 = layout.cell_x(static_cast<int>(col));
            const int y0 = layout.cell_y(static_cast<int>(row));
            for (int gy = 0; gy < 8; ++gy) {
                const int ya = y0 + gy * layout.cell / 8, yb = y0 + (gy + 1) * layout.cell / 8;
                for (int gx = 0; gx < 8; ++gx) {
                    if (((g[static_cast<std::size_t>(gy)] >> gx) & 1) == 0) continue;
                    const int xa = x0 + gx * layout.cell / 8, xb = x0 + (gx + 1) * layout.cell / 8;
                    for (int y = ya; y < yb; ++y)
                        for (int x = xa; x < xb; ++x) page.at(x, y) = 0;
                }
            }
        }
    }
    for (const char32_t cp : missing)
        result.warnings.push_back(code_point_name(cp) + " has no glyph; rendered as a box");
    if (placed.dropped > 0)
        result.warnings.push_back("text truncated: " + std::to_string(placed.dropped) +
                                  " line(s) beyond the page's " + std::to_string(layout.rows) + " rows dropped");
    return result;
}

std::string rendered_text(std::string_view utf8, int dpi, const FontSpec& font) {
    const Placement placed = place(utf8, page_layout(dpi, font));
    std::string out;
    for (std::size_t i = 0; i < placed.lines.size(); ++i) {
        if (i) out += '\n';
        out += encode_utf8(placed.lines[i]);
    }
    return out;
}

}  // namespace srocr::degrade
