#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "srocr/degrade/image.hpp"

namespace srocr::degrade {

/// Embedded 8x8 bitmap font: `magnification` multiplies the 8 px base
/// cell (at 72 dpi); bold ORs each glyph row with itself shifted one font
/// pixel to the right.
struct FontSpec {
    int magnification = 1;
    bool bold = false;

    void validate() const;
    friend bool operator==(const FontSpec&, const FontSpec&) = default;
};

using GlyphRows = std::array<std::uint8_t, 8>;

/// Printable ASCII (U+0020..U+007E) is covered.
bool has_glyph(char32_t cp);
/// Rows of the glyph (bit 0 = leftmost pixel) with bold applied; the
/// replacement box for unsupported code points.
GlyphRows glyph_rows(char32_t cp, bool bold = false);
GlyphRows replacement_glyph();

/// Page geometry at a dpi: US Letter, one inch margins, monospaced cells.
struct PageLayout {
    int width = 0;
    int height = 0;
    int margin = 0;
    int cell = 0;        // glyph cell edge, round(8 * magnification * dpi / 72)
    int line_pitch = 0;  // cell + round(cell / 2)
    int columns = 0;     // cells that fit between the margins
    int rows = 0;        // lines that fit between the margins

    int cell_x(int column) const { return margin + column * cell; }
    int cell_y(int row) const { return margin + row * line_pitch; }
};

/// Throws std::invalid_argument for dpi outside [72, 600].
PageLayout page_layout(int dpi, const FontSpec& font);

/// Source text split into display lines: CRLF/CR become LF, tabs expand to
/// the next multiple of four columns, trailing whitespace is dropped and
/// leading/trailing blank lines are removed. Invalid UTF-8 decodes to
/// U+FFFD.
std::vector<std::u32string> text_lines(std::string_view utf8);

struct RenderResult {
    Image image;
    std::vector<std::string> warnings;
};

/// Black glyphs on a white gray page with image.dpi set. Lines longer than
/// the page hard-wrap; lines beyond the last row are dropped with a
/// warning; unsupported code points render as a box with a warning.
/// Throws std::invalid_argument for empty text or an invalid dpi.
RenderResult render_text_page(std::string_view utf8, int dpi, const FontSpec& font);

/// Text exactly as placed on the page by render_text_page (after wrapping
/// and truncation), lines joined with '\n'. Unsupported code points are
/// kept as-is.
std::string rendered_text(std::string_view utf8, int dpi, const FontSpec& font);

}  // namespace srocr::degrade
