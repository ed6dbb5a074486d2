#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "srocr/bench/bench.hpp"
#include "srocr/errors.hpp"

namespace srocr::bench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
    for (const auto& [k, v] : obj.items()) {
        bool ok = false;
        for (const char* name : known) ok = ok || k == name;
        if (!ok) throw ConfigError(join(path, k), "unknown field");
    }
}

const json& require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    return j;
}

const json& require_array(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array");
    if (j.empty()) throw ConfigError(path, "must not be empty");
    return j;
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    return j.get<double>();
}

long long integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
    return j.get<long long>();
}

std::string str(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

bool boolean(const json& j, const std::string& path) {
    if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
    return j.get<bool>();
}

std::string read_text_file(const fs::path& p, const std::string& path) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError(path, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

TextSource parse_text(const json& j, const std::string& path, const fs::path& base, std::size_t i) {
    if (j.is_string()) {
        const fs::path file = resolve(base, j.get<std::string>());
        return {file.stem().string(), read_text_file(file, path)};
    }
    require_object(j, path);
    reject_unknown(j, path, {"id", "text", "path"});
    const bool inline_text = j.contains("text"), file = j.contains("path");
    if (inline_text == file) throw ConfigError(path, "needs exactly one of \"text\" or \"path\"");
    TextSource t;
    if (inline_text) {
        t.text = str(j["text"], join(path, "text"));
        t.id = "text" + std::to_string(i);
    } else {
        const fs::path p = resolve(base, str(j["path"], join(path, "path")));
        t.text = read_text_file(p, join(path, "path"));
        t.id = p.stem().string();
    }
    if (j.contains("id")) t.id = str(j["id"], join(path, "id"));
    return t;
}

ModelSpec parse_model(const json& j, const std::string& path, const fs::path& base) {
    ModelSpec m;
    if (j.is_string()) {
        if (j.get<std::string>() != "bicubic")
            throw ConfigError(path, "a bare string model must be \"bicubic\"; use an object for learned models");
        m.id = "bicubic";
        return m;
    }
    require_object(j, path);
    reject_unknown(j, path, {"id", "preset", "miniature", "scale", "weights"});
    if (!j.contains("preset")) throw ConfigError(join(path, "preset"), "required");
    const std::string preset = str(j["preset"], join(path, "preset"));
    try {
        m.preset = models::parse_preset(preset);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(join(path, "preset"), e.what());
    }
    if (m.preset != models::PresetId::bicubic && !models::is_generator(m.preset))
        throw ConfigError(join(path, "preset"), "\"" + preset + "\" is not a generator");
    if (j.contains("miniature")) m.miniature = boolean(j["miniature"], join(path, "miniature"));
    if (j.contains("scale")) {
        const json& s = j["scale"];
        if (s.is_string()) {
            if (s.get<std::string>() != "auto") throw ConfigError(join(path, "scale"), "expected 2, 3, 4 or \"auto\"");
        } else {
            m.scale = static_cast<int>(integer(s, join(path, "scale")));
        }
    }
    if (j.contains("weights")) {
        const std::string w = str(j["weights"], join(path, "weights"));
        if (w == "bicubic") {
            if (m.preset != models::PresetId::bicubic)
                throw ConfigError(join(path, "weights"), "\"bicubic\" weights only apply to the bicubic preset");
        } else if (w.rfind("untrained", 0) == 0) {
            m.weights = w;
        } else {
            m.weights = resolve(base, w).string();
        }
    } else if (m.preset != models::PresetId::bicubic) {
        m.weights = "untrained";
    }
    if (j.contains("id")) {
        m.id = str(j["id"], join(path, "id"));
    } else {
        m.id = std::string(models::to_string(m.preset));
        if (m.miniature) m.id += "-mini";
        if (m.scale) m.id += "-x" + std::to_string(*m.scale);
    }
    return m;
}

}  // namespace

int upsample_factor(double scale) {
    const long r = std::lround(1.0 / scale);
    return static_cast<int>(std::clamp(r, 2L, 4L));
}

void BenchConfig::validate() const {
    if (texts.empty()) throw ConfigError("texts", "required");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].id.empty()) throw ConfigError(index("texts", i) + ".id", "must not be empty");
        if (!ids.insert(texts[i].id).second) throw ConfigError(index("texts", i) + ".id", "duplicate id " + texts[i].id);
    }
    if (dpis.empty()) throw ConfigError("dpis", "must not be empty");
    for (std::size_t i = 0; i < dpis.size(); ++i)
        if (dpis[i] < 72 || dpis[i] > 600) throw ConfigError(index("dpis", i), "must be in [72, 600]");
    if (scales.empty()) throw ConfigError("scales", "must not be empty");
    for (std::size_t i = 0; i < scales.size(); ++i)
        if (!(scales[i] > 0.0 && scales[i] <= 1.0)) throw ConfigError(index("scales", i), "must be in (0, 1]");
    if (models.empty()) throw ConfigError("models", "must not be empty");
    ids.clear();
    for (std::size_t i = 0; i < models.size(); ++i) {
        const ModelSpec& m = models[i];
        const std::string p = index("models", i);
        if (!ids.insert(m.id).second) throw ConfigError(p + ".id", "duplicate id " + m.id);
        if (m.scale && (*m.scale < 2 || *m.scale > 4)) throw ConfigError(p + ".scale", "must be 2, 3, 4 or \"auto\"");
        if (m.preset != models::PresetId::bicubic && m.weights.empty())
            throw ConfigError(p + ".weights", "required for learned models");
        if (m.weights.rfind("untrained", 0) == 0 && m.weights != "untrained") {
            const std::string seed = m.weights.substr(std::string("untrained").size());
            if (seed.size() < 2 || seed[0] != ':' || seed.find_first_not_of("0123456789", 1) != std::string::npos)
                throw ConfigError(p + ".weights", "expected \"untrained:<seed>\"");
        }
    }
    if (!(blur_sigma >= 0.0) || !std::isfinite(blur_sigma)) throw ConfigError("degrade.blur_sigma", "must be >= 0");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("degrade.noise_sigma", "must be >= 0");
    if (workers < 1) throw ConfigError("workers", "must be >= 1");
    if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
    try {
        font.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("font", e.what());
    }
    engine.validate();
}

BenchConfig parse_config(const json& j, const fs::path& base_dir) {
    BenchConfig c;
    if (j.is_null()) throw ConfigError("texts", "required");
    require_object(j, "");
    reject_unknown(j, "", {"texts", "dpis", "scales", "models", "engine", "font", "degrade", "seed", "output_dir",
                           "cache", "workers"});
    if (!j.contains("texts")) throw ConfigError("texts", "required");
    const json& texts = require_array(j["texts"], "texts");
    for (std::size_t i = 0; i < texts.size(); ++i) c.texts.push_back(parse_text(texts[i], index("texts", i), base_dir, i));

    if (j.contains("dpis")) {
        c.dpis.clear();
        const json& a = require_array(j["dpis"], "dpis");
        for (std::size_t i = 0; i < a.size(); ++i) c.dpis.push_back(static_cast<int>(integer(a[i], index("dpis", i))));
    }
    if (j.contains("scales")) {
        c.scales.clear();
        const json& a = require_array(j["scales"], "scales");
        for (std::size_t i = 0; i < a.size(); ++i) c.scales.push_back(number(a[i], index("scales", i)));
    }
    if (j.contains("models")) {
        c.models.clear();
        const json& a = require_array(j["models"], "models");
        for (std::size_t i = 0; i < a.size(); ++i) c.models.push_back(parse_model(a[i], index("models", i), base_dir));
    }
    if (j.contains("seed")) c.seed = static_cast<std::uint64_t>(integer(j["seed"], "seed"));
    if (j.contains("font")) {
        const json& f = require_object(j["font"], "font");
        reject_unknown(f, "font", {"magnification", "bold"});
        if (f.contains("magnification"))
            c.font.magnification = static_cast<int>(integer(f["magnification"], "font.magnification"));
        if (f.contains("bold")) c.font.bold = boolean(f["bold"], "font.bold");
    }
    if (j.contains("engine")) {
        const json& e = require_object(j["engine"], "engine");
        reject_unknown(e, "engine", {"kind", "command", "timeout_s", "binarize_threshold"});
        if (e.contains("kind")) c.engine.kind = ocr::parse_engine_kind(str(e["kind"], "engine.kind"));
        if (e.contains("command")) c.engine.command_template = str(e["command"], "engine.command");
        if (e.contains("timeout_s")) c.engine.timeout_s = number(e["timeout_s"], "engine.timeout_s");
        if (e.contains("binarize_threshold"))
            c.engine.binarize_threshold = static_cast<int>(integer(e["binarize_threshold"], "engine.binarize_threshold"));
    }
    c.engine.font = c.font;
    if (j.contains("degrade")) {
        const json& d = require_object(j["degrade"], "degrade");
        reject_unknown(d, "degrade", {"blur_sigma", "noise_sigma", "seed"});
        if (d.contains("blur_sigma")) c.blur_sigma = number(d["blur_sigma"], "degrade.blur_sigma");
        if (d.contains("noise_sigma")) c.noise_sigma = number(d["noise_sigma"], "degrade.noise_sigma");
        // Overrides the top-level seed for the noise stage.
        if (d.contains("seed")) c.seed = static_cast<std::uint64_t>(integer(d["seed"], "degrade.seed"));
    }
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, str(j["output_dir"], "output_dir"));
    else c.output_dir = base_dir / "bench_out";
    for (auto& m : c.models)
        if (m.weights == "untrained") m.weights = "untrained:" + std::to_string(c.seed);
    if (j.contains("cache")) c.cache = boolean(j["cache"], "cache");
    if (j.contains("workers")) c.workers = static_cast<int>(integer(j["workers"], "workers"));
    c.validate();
    return c;
}

BenchConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("", "cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string content = ss.str();
    json j;
    if (content.find_first_not_of(" \t\r\n") != std::string::npos) {
        try {
            j = json::parse(content);
        } catch (const json::parse_error& e) {
            throw ConfigError("", path.string() + ": invalid JSON: " + e.what());
        }
    }
    return parse_config(j, path.parent_path());
}

}  // namespace srocr::bench
