#include <unistd.h>

#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "srocr/bench/bench.hpp"
#include "srocr/errors.hpp"
#include "srocr/hash.hpp"
#include "srocr/metrics/metrics.hpp"

namespace srocr::bench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Runs fn(i) for i in [0, n) on `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
    std::atomic<std::size_t> next{0};
    auto loop = [&] {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
    };
    const int extra = std::min<int>(workers, static_cast<int>(n)) - 1;
    std::vector<std::thread> pool;
    for (int t = 0; t < extra; ++t) pool.emplace_back(loop);
    loop();
    for (auto& t : pool) t.join();
}

struct Page {
    Image image;
    std::string truth;
    double render_ms = 0;
    std::string error;
};

std::string unique_suffix() {
    static std::atomic<unsigned long> counter{0};
    std::ostringstream ss;
    ss << ::getpid() << "-" << std::this_thread::get_id() << "-" << counter++;
    return ss.str();
}

// Degraded image, read from or written to output_dir/<key>/lr.png.
Image degraded(const BenchConfig& cfg, const TextSource& text, const Page& page, int dpi, double scale, bool* hit) {
    const degrade::DegradeSpec spec{scale, cfg.blur_sigma, cfg.noise_sigma, cfg.seed};
    *hit = false;
    if (!cfg.cache) return degrade::degrade_pipeline(page.image, spec);
    const json inputs = {{"text", text.text},
                         {"dpi", dpi},
                         {"font", {{"magnification", cfg.font.magnification}, {"bold", cfg.font.bold}}},
                         {"scale", scale},
                         {"blur_sigma", cfg.blur_sigma},
                         {"noise_sigma", cfg.noise_sigma},
                         {"seed", cfg.seed}};
    const fs::path dir = cfg.output_dir / cache_key("degrade", inputs);
    const fs::path file = dir / "lr.png";
    if (fs::exists(file)) {
        try {
            Image img = degrade::read_png(file);
            *hit = true;
            return img;
        } catch (const FormatError&) {
            // Corrupt entry: recompute and overwrite below.
        }
    }
    Image img = degrade::degrade_pipeline(page.image, spec);
    fs::create_directories(dir);
    const fs::path tmp = dir / ("lr.png.tmp-" + unique_suffix());
    degrade::write_png(img, tmp);
    fs::rename(tmp, file);
    return img;
}

}  // namespace

std::string cache_key(const std::string& stage, const json& inputs) {
    return sha256_hex(stage + "\n" + inputs.dump());
}

CellScore score_cell(const Image& restored, const Image& reference, const std::string& ocr_text,
                     const std::string& truth) {
    if (restored.width != reference.width || restored.height != reference.height)
        throw ShapeError("score_cell: restored " + std::to_string(restored.width) + "x" +
                         std::to_string(restored.height) + " vs reference " + std::to_string(reference.width) + "x" +
                         std::to_string(reference.height));
    CellScore s;
    const metrics::TextScore t = metrics::score_text(truth, ocr_text);
    s.fuzz = t.fuzz;
    s.levenshtein = t.levenshtein;
    const metrics::ImageScore i = metrics::score_image(reference, restored);
    s.psnr_db = i.psnr_db;
    s.ssim = i.ssim;
    return s;
}

std::vector<ScoreRecord> run_matrix(const BenchConfig& config, const RunOptions& options) {
    config.validate();
    BenchConfig cfg = config;
    cfg.engine.font = cfg.font;

    const ocr::EngineProbe probe = ocr::engine_probe(cfg.engine);

    // Models per distinct factor, built up front so workers share them read-only.
    std::map<std::pair<std::size_t, int>, SrModel> instances;
    std::map<std::size_t, std::string> model_errors;
    for (std::size_t m = 0; m < cfg.models.size(); ++m)
        for (const double s : cfg.scales) {
            const int f = upsample_factor(s);
            if (instances.contains({m, f}) || model_errors.contains(m)) continue;
            try {
                instances.emplace(std::pair{m, f}, instantiate(cfg.models[m], f));
            } catch (const std::exception& e) {
                model_errors[m] = e.what();
            }
        }

    std::vector<Page> pages(cfg.texts.size() * cfg.dpis.size());
    parallel_for(pages.size(), cfg.workers, [&](std::size_t i) {
        const TextSource& t = cfg.texts[i / cfg.dpis.size()];
        const int dpi = cfg.dpis[i % cfg.dpis.size()];
        const auto t0 = Clock::now();
        try {
            pages[i].image = degrade::render_text_page(t.text, dpi, cfg.font).image;
            pages[i].truth = degrade::rendered_text(t.text, dpi, cfg.font);
        } catch (const std::exception& e) {
            pages[i].error = e.what();
        }
        pages[i].render_ms = ms_since(t0);
    });

    const std::size_t n_scales = cfg.scales.size(), n_models = cfg.models.size();
    // Cell index order is text, dpi, scale, model, matching config order.
    const std::size_t total = pages.size() * n_scales * n_models;
    std::vector<ScoreRecord> records(total);
    std::mutex progress_mutex;
    std::size_t done = 0;

    parallel_for(total, cfg.workers, [&](std::size_t i) {
        const std::size_t m = i % n_models;
        const std::size_t s = (i / n_models) % n_scales;
        const std::size_t p = i / (n_models * n_scales);
        const TextSource& text = cfg.texts[p / cfg.dpis.size()];
        const Page& page = pages[p];
        ScoreRecord& r = records[i];
        r.text_id = text.id;
        r.dpi = cfg.dpis[p % cfg.dpis.size()];
        r.scale = cfg.scales[s];
        r.model_id = cfg.models[m].id;
        r.sr_factor = upsample_factor(r.scale);
        r.wall_ms.render = page.render_ms;

        auto fail = [&](CellStatus st, const std::string& msg) {
            r.status = st;
            r.message = msg;
        };
        try {
            if (!page.error.empty()) throw std::runtime_error("render: " + page.error);
            if (auto it = model_errors.find(m); it != model_errors.end()) throw std::runtime_error("model: " + it->second);
            const SrModel& model = instances.at({m, r.sr_factor});
            r.sr_factor = model.graph.scale;

            auto t0 = Clock::now();
            const Image lr = degraded(cfg, text, page, r.dpi, r.scale, &r.cache_hit);
            r.wall_ms.degrade = ms_since(t0);

            t0 = Clock::now();
            const Image restored = super_resolve(model, lr, page.image.width, page.image.height, page.image.dpi);
            r.wall_ms.sr = ms_since(t0);

            t0 = Clock::now();
            const metrics::ImageScore img = metrics::score_image(page.image, restored);
            r.psnr_db = img.psnr_db;
            r.ssim = img.ssim;
            r.wall_ms.score = ms_since(t0);

            if (!probe.available) {
                fail(CellStatus::skipped, "OCR engine unavailable: " + probe.detail);
            } else {
                t0 = Clock::now();
                std::string text_out;
                try {
                    text_out = ocr::run_ocr(restored, cfg.engine);
                } catch (...) {
                    r.wall_ms.ocr = ms_since(t0);
                    throw;
                }
                r.wall_ms.ocr = ms_since(t0);
                t0 = Clock::now();
                const metrics::TextScore ts = metrics::score_text(page.truth, text_out);
                r.fuzz = ts.fuzz;
                r.levenshtein = ts.levenshtein;
                r.wall_ms.score += ms_since(t0);
                r.status = CellStatus::ok;
            }
        } catch (const ocr::EngineNotInstalled& e) {
            fail(CellStatus::skipped, e.what());
        } catch (const std::exception& e) {
            fail(CellStatus::error, e.what());
        }
        if (options.progress) {
            const std::lock_guard lock(progress_mutex);
            options.progress(r, ++done, total);
        }
    });

    return records;
}

int exit_code(const std::vector<ScoreRecord>& records) {
    for (const auto& r : records)
        if (r.status != CellStatus::ok) return 2;
    return 0;
}

}  // namespace srocr::bench
