#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "srocr/bench/bench.hpp"
#include "srocr/errors.hpp"

namespace srocr::bench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string shortest(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fixed(double v, int digits) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// Splits one CSV record; quoted fields may contain separators and newlines.
bool read_record(std::istream& is, std::vector<std::string>& fields) {
    fields.clear();
    if (is.peek() == std::char_traits<char>::eof()) return false;
    std::string field;
    bool quoted = false;
    for (int ch = is.get(); ch != std::char_traits<char>::eof(); ch = is.get()) {
        const char c = static_cast<char>(ch);
        if (quoted) {
            if (c == '"') {
                if (is.peek() == '"') {
                    field += '"';
                    is.get();
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (quoted) throw FormatError("csv: unterminated quoted field");
    fields.push_back(std::move(field));
    return true;
}

template <typename T>
T parse_number(const std::string& s, const char* column) {
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw FormatError(std::string("csv: bad ") + column + " value '" + s + "'");
    return v;
}

double parse_real(const std::string& s, const char* column) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    return parse_number<double>(s, column);
}

json optional_real(const std::optional<double>& v) {
    if (!v) return nullptr;
    if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
    return *v;
}

std::optional<double> real_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw FormatError("records: bad number '" + s + "'");
    }
    return j.get<double>();
}

}  // namespace

std::string to_string(CellStatus s) {
    switch (s) {
        case CellStatus::ok: return "OK";
        case CellStatus::skipped: return "SKIPPED";
        case CellStatus::error: return "ERROR";
    }
    return "ERROR";
}

CellStatus parse_status(const std::string& s) {
    if (s == "OK") return CellStatus::ok;
    if (s == "SKIPPED") return CellStatus::skipped;
    if (s == "ERROR") return CellStatus::error;
    throw FormatError("unknown status '" + s + "'");
}

void write_csv(const std::vector<ScoreRecord>& records, std::ostream& os) {
    os << kCsvHeader << "\n";
    for (const auto& r : records) {
        os << csv_field(r.text_id) << ',' << r.dpi << ',' << shortest(r.scale) << ',' << csv_field(r.model_id) << ',';
        if (r.fuzz) os << *r.fuzz;
        os << ',';
        if (r.levenshtein) os << *r.levenshtein;
        os << ',';
        if (r.psnr_db) os << fixed(*r.psnr_db, 4);
        os << ',';
        if (r.ssim) os << fixed(*r.ssim, 6);
        os << ',' << to_string(r.status) << "\n";
    }
}

std::vector<ScoreRecord> parse_csv(std::istream& is) {
    std::vector<std::string> f;
    if (!read_record(is, f)) throw FormatError("csv: empty input");
    std::string header;
    for (std::size_t i = 0; i < f.size(); ++i) header += (i ? "," : "") + f[i];
    if (header != kCsvHeader) throw FormatError("csv: unexpected header '" + header + "'");
    std::vector<ScoreRecord> out;
    while (read_record(is, f)) {
        if (f.size() == 1 && f[0].empty()) continue;
        if (f.size() != 9) throw FormatError("csv: expected 9 fields, got " + std::to_string(f.size()));
        ScoreRecord r;
        r.text_id = f[0];
        r.dpi = parse_number<int>(f[1], "dpi");
        r.scale = parse_number<double>(f[2], "scale");
        r.model_id = f[3];
        if (!f[4].empty()) r.fuzz = parse_number<int>(f[4], "fuzz");
        if (!f[5].empty()) r.levenshtein = parse_number<long>(f[5], "levenshtein");
        if (!f[6].empty()) r.psnr_db = parse_real(f[6], "psnr_db");
        if (!f[7].empty()) r.ssim = parse_real(f[7], "ssim");
        r.status = parse_status(f[8]);
        out.push_back(std::move(r));
    }
    return out;
}

json records_to_json(const std::vector<ScoreRecord>& records) {
    json arr = json::array();
    for (const auto& r : records) {
        arr.push_back({{"text_id", r.text_id},
                       {"dpi", r.dpi},
                       {"scale", r.scale},
                       {"model", r.model_id},
                       {"status", to_string(r.status)},
                       {"fuzz", r.fuzz ? json(*r.fuzz) : json(nullptr)},
                       {"levenshtein", r.levenshtein ? json(*r.levenshtein) : json(nullptr)},
                       {"psnr_db", optional_real(r.psnr_db)},
                       {"ssim", optional_real(r.ssim)},
                       {"message", r.message},
                       {"sr_factor", r.sr_factor},
                       {"cache_hit", r.cache_hit},
                       {"wall_ms",
                        {{"render", r.wall_ms.render},
                         {"degrade", r.wall_ms.degrade},
                         {"sr", r.wall_ms.sr},
                         {"ocr", r.wall_ms.ocr},
                         {"score", r.wall_ms.score}}}});
    }
    return {{"records", arr}};
}

std::vector<ScoreRecord> records_from_json(const json& j) {
    std::vector<ScoreRecord> out;
    try {
        for (const auto& e : j.at("records")) {
            ScoreRecord r;
            r.text_id = e.at("text_id").get<std::string>();
            r.dpi = e.at("dpi").get<int>();
            r.scale = e.at("scale").get<double>();
            r.model_id = e.at("model").get<std::string>();
            r.status = parse_status(e.at("status").get<std::string>());
            if (!e.at("fuzz").is_null()) r.fuzz = e["fuzz"].get<int>();
            if (!e.at("levenshtein").is_null()) r.levenshtein = e["levenshtein"].get<long>();
            r.psnr_db = real_from_json(e.at("psnr_db"));
            r.ssim = real_from_json(e.at("ssim"));
            r.message = e.value("message", "");
            r.sr_factor = e.value("sr_factor", 0);
            r.cache_hit = e.value("cache_hit", false);
            if (e.contains("wall_ms")) {
                const json& w = e["wall_ms"];
                r.wall_ms = {w.value("render", 0.0), w.value("degrade", 0.0), w.value("sr", 0.0), w.value("ocr", 0.0),
                             w.value("score", 0.0)};
            }
            out.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("records: ") + e.what());
    }
    return out;
}

std::string markdown_report(const std::vector<ScoreRecord>& records) {
    std::vector<int> dpis;
    std::vector<double> scales;
    std::vector<std::string> models;
    struct Acc {
        long sum = 0;
        long count = 0;
    };
    std::map<std::tuple<int, double, std::string>, Acc> cells;
    for (const auto& r : records) {
        if (std::find(dpis.begin(), dpis.end(), r.dpi) == dpis.end()) dpis.push_back(r.dpi);
        if (std::find(scales.begin(), scales.end(), r.scale) == scales.end()) scales.push_back(r.scale);
        if (std::find(models.begin(), models.end(), r.model_id) == models.end()) models.push_back(r.model_id);
        Acc& a = cells[{r.dpi, r.scale, r.model_id}];
        if (r.status == CellStatus::ok && r.fuzz) {
            a.sum += *r.fuzz;
            ++a.count;
        }
    }
    std::sort(dpis.begin(), dpis.end());
    std::sort(scales.begin(), scales.end());

    std::ostringstream os;
    os << "# OCR accuracy (fuzz ratio, %)\n";
    for (const int dpi : dpis) {
        os << "\n## " << dpi << " dpi\n\n| scale |";
        for (const auto& m : models) os << ' ' << m << " |";
        os << "\n|---:|";
        for (std::size_t i = 0; i < models.size(); ++i) os << "---:|";
        os << "\n";
        for (const double s : scales) {
            os << "| " << shortest(s) << " |";
            for (const auto& m : models) {
                const auto it = cells.find({dpi, s, m});
                if (it == cells.end() || it->second.count == 0) {
                    os << " n/a |";
                    continue;
                }
                // Mean rounded half up, in integers.
                const long v = (2 * it->second.sum + it->second.count) / (2 * it->second.count);
                if (v == 100)
                    os << " **100** |";
                else
                    os << ' ' << v << " |";
            }
            os << "\n";
        }
    }
    return os.str();
}

void emit_reports(const std::vector<ScoreRecord>& records, const fs::path& dir) {
    fs::create_directories(dir);
    const auto write = [&](const fs::path& name, const std::string& content) {
        const fs::path tmp = dir / (name.string() + ".tmp");
        {
            std::ofstream out(tmp, std::ios::binary);
            out << content;
            if (!out) throw std::runtime_error("cannot write " + tmp.string());
        }
        fs::rename(tmp, dir / name);
    };
    write("records.json", records_to_json(records).dump(2) + "\n");
    std::ostringstream csv;
    write_csv(records, csv);
    write("results.csv", csv.str());
    write("results.md", markdown_report(records));
}

}  // namespace srocr::bench
