#include <algorithm>
#include <bit>
#include <cstdint>
#include <vector>

#include "srocr/errors.hpp"
#include "srocr/ocr/ocr.hpp"

namespace srocr::ocr {

namespace {

// One cell as packed bit rows; bit x of row y is ink.
struct CellBits {
    int words = 0;
    std::vector<std::uint64_t> bits;  // cell * words

    std::uint64_t* row(int y) { return bits.data() + static_cast<std::size_t>(y * words); }
    const std::uint64_t* row(int y) const { return bits.data() + static_cast<std::size_t>(y * words); }
};

CellBits empty_cell(int cell) {
    CellBits c;
    c.words = (cell + 63) / 64;
    c.bits.assign(static_cast<std::size_t>(cell * c.words), 0);
    return c;
}

void set_bit(CellBits& c, int x, int y) { c.row(y)[x / 64] |= std::uint64_t{1} << (x % 64); }

int hamming(const CellBits& a, const CellBits& b) {
    int d = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) d += std::popcount(a.bits[i] ^ b.bits[i]);
    return d;
}

struct Template {
    char ch;
    CellBits bits;
};

// Same pixel mapping as the renderer: font pixel g covers [g*cell/8, (g+1)*cell/8).
std::vector<Template> make_templates(int cell, bool bold) {
    std::vector<Template> out;
    for (char32_t cp = 0x20; cp <= 0x7E; ++cp) {
        Template t{static_cast<char>(cp), empty_cell(cell)};
        const auto rows = degrade::glyph_rows(cp, bold);
        for (int gy = 0; gy < 8; ++gy)
            for (int gx = 0; gx < 8; ++gx) {
                if (((rows[static_cast<std::size_t>(gy)] >> gx) & 1) == 0) continue;
                for (int y = gy * cell / 8; y < (gy + 1) * cell / 8; ++y)
                    for (int x = gx * cell / 8; x < (gx + 1) * cell / 8; ++x) set_bit(t.bits, x, y);
            }
        out.push_back(std::move(t));
    }
    return out;
}

class InkMap {
public:
    InkMap(const Image& gray, int threshold) : w_(gray.width), h_(gray.height), ink_(gray.data.size()) {
        for (std::size_t i = 0; i < ink_.size(); ++i) ink_[i] = gray.data[i] < threshold;
    }
    bool at(int x, int y) const {
        return x >= 0 && y >= 0 && x < w_ && y < h_ && ink_[static_cast<std::size_t>(y * w_ + x)];
    }
    int width() const { return w_; }
    int height() const { return h_; }

    CellBits cell(int x0, int y0, int cell, int* count) const {
        CellBits c = empty_cell(cell);
        int n = 0;
        for (int y = 0; y < cell; ++y)
            for (int x = 0; x < cell; ++x)
                if (at(x0 + x, y0 + y)) {
                    set_bit(c, x, y);
                    ++n;
                }
        *count = n;
        return c;
    }

private:
    int w_, h_;
    std::vector<char> ink_;
};

struct Match {
    char ch = ' ';
    int distance = 0;
};

Match classify(const CellBits& c, const std::vector<Template>& templates) {
    Match best{templates.front().ch, hamming(c, templates.front().bits)};
    for (std::size_t i = 1; i < templates.size(); ++i) {
        const int d = hamming(c, templates[i].bits);
        if (d < best.distance) best = {templates[i].ch, d};
    }
    return best;
}

// Offsets 0, -1, 1, -2, 2, ... so ties keep the nominal grid.
std::vector<int> offsets(int radius) {
    std::vector<int> out{0};
    for (int d = 1; d <= radius; ++d) {
        out.push_back(-d);
        out.push_back(d);
    }
    return out;
}

}  // namespace

std::string mock_ocr(const Image& img, const FontSpec& font, int threshold) {
    if (!img.dpi) throw std::invalid_argument("mock OCR needs the image dpi");
    const degrade::PageLayout layout = degrade::page_layout(*img.dpi, font);
    if (img.width != layout.width || img.height != layout.height)
        throw ShapeError("mock OCR: " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                         " is not a page at " + std::to_string(*img.dpi) + " dpi");
    const InkMap ink(degrade::to_gray(img), threshold);
    const int cell = layout.cell;

    // Row phase from the horizontal projection profile: line bands are
    // separated by blank leading, so the best offset captures most ink.
    std::vector<long> profile(static_cast<std::size_t>(ink.height()), 0);
    for (int y = 0; y < ink.height(); ++y)
        for (int x = 0; x < ink.width(); ++x) profile[static_cast<std::size_t>(y)] += ink.at(x, y);
    const auto band_ink = [&](int row, int dy) {
        long s = 0;
        for (int y = layout.cell_y(row) + dy; y < layout.cell_y(row) + dy + cell; ++y)
            if (y >= 0 && y < ink.height()) s += profile[static_cast<std::size_t>(y)];
        return s;
    };
    int dy = 0;
    long best_rows = -1;
    for (const int d : offsets(layout.line_pitch / 2)) {
        long s = 0;
        for (int r = 0; r < layout.rows; ++r) s += band_ink(r, d);
        if (s > best_rows) {
            best_rows = s;
            dy = d;
        }
    }
    if (best_rows <= 0) return "";

    std::vector<int> text_rows;
    for (int r = 0; r < layout.rows; ++r)
        if (band_ink(r, dy) > 0) text_rows.push_back(r);

    const auto templates = make_templates(cell, font.bold);

    // Column phase: cells abut, so score candidate offsets by how well a
    // sample of inked cells matches the font.
    int dx = 0;
    {
        std::vector<std::pair<int, int>> sample;
        for (const int r : text_rows)
            for (int c = 0; c < layout.columns && sample.size() < 64; ++c) {
                int n = 0;
                ink.cell(layout.cell_x(c), layout.cell_y(r) + dy, cell, &n);
                if (n > 0) sample.emplace_back(r, c);
            }
        long best_cost = -1;
        for (const int d : offsets(cell / 4)) {
            long cost = 0;
            for (const auto& [r, c] : sample) {
                int n = 0;
                cost += classify(ink.cell(layout.cell_x(c) + d, layout.cell_y(r) + dy, cell, &n), templates).distance;
            }
            if (best_cost < 0 || cost < best_cost) {
                best_cost = cost;
                dx = d;
            }
        }
    }

    std::vector<std::string> lines(static_cast<std::size_t>(layout.rows));
    for (const int r : text_rows) {
        std::string& line = lines[static_cast<std::size_t>(r)];
        for (int c = 0; c < layout.columns; ++c) {
            int n = 0;
            const CellBits bits = ink.cell(layout.cell_x(c) + dx, layout.cell_y(r) + dy, cell, &n);
            line += n == 0 ? ' ' : classify(bits, templates).ch;
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    std::size_t first = 0;
    while (first < lines.size() && lines[first].empty()) ++first;
    std::string out;
    for (std::size_t i = first; i < lines.size(); ++i) {
        if (i > first) out += '\n';
        out += lines[i];
    }
    return out;
}

}  // namespace srocr::ocr
