#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "srocr/bench/bench.hpp"
#include "srocr/errors.hpp"
#include "srocr/metrics/metrics.hpp"
#include "srocr/training/training.hpp"

namespace {

namespace fs = std::filesystem;
using namespace srocr;
using nlohmann::json;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> output_dir;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("", "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

degrade::FontSpec font_from(int magnification, bool bold) {
    degrade::FontSpec f{magnification, bold};
    f.validate();
    return f;
}

json score_json(double v) {
    if (std::isinf(v)) return "inf";
    return v;
}

bench::ModelSpec model_spec(const std::string& preset, const std::string& weights, bool miniature, std::uint64_t seed) {
    bench::ModelSpec m;
    m.preset = models::parse_preset(preset);
    m.miniature = miniature;
    m.id = preset;
    if (m.preset != models::PresetId::bicubic) m.weights = weights.empty() ? "untrained:" + std::to_string(seed) : weights;
    return m;
}

void print_progress(const bench::ScoreRecord& r, std::size_t done, std::size_t total) {
    std::fprintf(stderr, "[%zu/%zu] %s dpi=%d scale=%g %s %s%s%s\n", done, total, r.text_id.c_str(), r.dpi, r.scale,
                 r.model_id.c_str(), bench::to_string(r.status).c_str(),
                 r.fuzz ? (" fuzz=" + std::to_string(*r.fuzz)).c_str() : "",
                 r.message.empty() ? "" : (" (" + r.message + ")").c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Super-resolution and OCR benchmark toolkit"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "RNG seed (overrides config seeds)");
    app.add_option("--workers", g.workers, "Worker threads for bench run")->check(CLI::PositiveNumber);
    app.add_option("--output-dir", g.output_dir, "Directory for outputs and cache");
    const auto seed = [&] { return g.seed.value_or(0); };

    // render
    auto* render = app.add_subcommand("render", "Render a text file to a page image");
    std::string text_path, out_path;
    int dpi = 200, magnification = 1;
    bool bold = false;
    render->add_option("text", text_path, "UTF-8 text file")->required()->check(CLI::ExistingFile);
    render->add_option("-o,--out", out_path, "Output .png or .pgm")->required();
    render->add_option("--dpi", dpi, "Page resolution")->capture_default_str();
    render->add_option("--magnification", magnification, "Font magnification")->capture_default_str();
    render->add_flag("--bold", bold, "Bold glyphs");
    render->callback([&] {
        const auto r = degrade::render_text_page(read_file(text_path), dpi, font_from(magnification, bold));
        for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
        degrade::write_image(r.image, out_path);
    });

    // degrade
    auto* deg = app.add_subcommand("degrade", "Blur, downscale and add noise");
    std::string in_path;
    double scale = 0.5, blur = 0.0, noise = 0.0;
    deg->add_option("image", in_path, "Input image")->required()->check(CLI::ExistingFile);
    deg->add_option("-o,--out", out_path, "Output image")->required();
    deg->add_option("--scale", scale, "Downscale factor in (0, 1]")->capture_default_str();
    deg->add_option("--blur", blur, "Gaussian blur sigma")->capture_default_str();
    deg->add_option("--noise", noise, "Gaussian noise sigma (0-255 units)")->capture_default_str();
    deg->callback([&] {
        const degrade::Image img = degrade::read_image(in_path);
        degrade::write_image(degrade::degrade_pipeline(img, {scale, blur, noise, seed()}), out_path);
    });

    // sr
    auto* sr = app.add_subcommand("sr", "Super-resolve an image");
    std::string preset = "bicubic", weights;
    int factor = 2, width = 0, height = 0;
    bool miniature = false;
    sr->add_option("image", in_path, "Low-resolution image")->required()->check(CLI::ExistingFile);
    sr->add_option("-o,--out", out_path, "Output image")->required();
    sr->add_option("--model", preset, "bicubic, srgan_gen, esrgan_gen, edsr or edsr_base")->capture_default_str();
    sr->add_option("--weights", weights, "Weight file (default: untrained with --seed)");
    sr->add_flag("--miniature", miniature, "Use the miniature architecture");
    sr->add_option("--factor", factor, "Upsampling factor")->check(CLI::Range(2, 4))->capture_default_str();
    sr->add_option("--width", width, "Resize the result to this width");
    sr->add_option("--height", height, "Resize the result to this height");
    sr->callback([&] {
        const degrade::Image lr = degrade::read_image(in_path);
        const bench::SrModel m = bench::instantiate(model_spec(preset, weights, miniature, seed()), factor);
        const int f = m.graph.scale;
        const int w = width > 0 ? width : lr.width * f, h = height > 0 ? height : lr.height * f;
        // Degraded images keep the dpi of the page they came from.
        degrade::write_image(bench::super_resolve(m, lr, w, h, lr.dpi), out_path);
    });

    // ocr
    auto* ocr_cmd = app.add_subcommand("ocr", "Recognize text in a page image");
    std::string engine = "mock", command = ocr::kDefaultCommand;
    std::optional<int> page_dpi;
    ocr_cmd->add_option("image", in_path, "Page image")->required()->check(CLI::ExistingFile);
    ocr_cmd->add_option("--engine", engine, "mock or external")->capture_default_str();
    ocr_cmd->add_option("--command", command, "External command template")->capture_default_str();
    ocr_cmd->add_option("--dpi", page_dpi, "Page dpi when the image does not record one");
    ocr_cmd->add_option("--magnification", magnification, "Font magnification (mock)")->capture_default_str();
    ocr_cmd->add_flag("--bold", bold, "Bold glyphs (mock)");
    ocr_cmd->callback([&] {
        degrade::Image img = degrade::read_image(in_path);
        if (page_dpi) img.dpi = page_dpi;
        ocr::OcrEngineSpec spec;
        spec.kind = ocr::parse_engine_kind(engine);
        spec.command_template = command;
        spec.font = font_from(magnification, bold);
        spec.validate();
        std::cout << ocr::run_ocr(img, spec) << "\n";
    });

    // score
    auto* score = app.add_subcommand("score", "Compare OCR text and images with their references");
    std::string truth_path, hyp_path, ref_image, restored_image;
    score->add_option("truth", truth_path, "Ground-truth text file")->required()->check(CLI::ExistingFile);
    score->add_option("hypothesis", hyp_path, "OCR output text file")->required()->check(CLI::ExistingFile);
    score->add_option("--reference", ref_image, "Pristine image")->check(CLI::ExistingFile);
    score->add_option("--restored", restored_image, "Restored image")->check(CLI::ExistingFile);
    score->callback([&] {
        const auto t = metrics::score_text(read_file(truth_path), read_file(hyp_path));
        json out = {{"fuzz", t.fuzz}, {"levenshtein", t.levenshtein}, {"len_ref", t.len_ref}, {"len_hyp", t.len_hyp}};
        if (ref_image.empty() != restored_image.empty())
            throw ConfigError("score", "--reference and --restored go together");
        if (!ref_image.empty()) {
            const auto s = metrics::score_image(degrade::read_image(ref_image), degrade::read_image(restored_image));
            out["psnr_db"] = score_json(s.psnr_db);
            out["ssim"] = s.ssim;
            out["mse"] = s.mse;
        }
        std::cout << out.dump(2) << "\n";
    });

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Run or report the benchmark matrix");
    bench_cmd->require_subcommand(1);
    auto* run = bench_cmd->add_subcommand("run", "Run every cell of a config");
    std::string config_path;
    bool quiet = false;
    int bench_status = 0;
    run->add_option("config", config_path, "Config JSON")->required()->check(CLI::ExistingFile);
    run->add_flag("-q,--quiet", quiet, "No per-cell progress");
    run->callback([&] {
        bench::BenchConfig cfg = bench::load_config(config_path);
        if (g.seed) cfg.seed = *g.seed;
        if (g.workers) cfg.workers = *g.workers;
        if (g.output_dir) cfg.output_dir = *g.output_dir;
        for (auto& m : cfg.models)
            if (g.seed && m.weights.rfind("untrained:", 0) == 0) m.weights = "untrained:" + std::to_string(*g.seed);
        bench::RunOptions opts;
        if (!quiet) opts.progress = print_progress;
        const auto records = bench::run_matrix(cfg, opts);
        bench::emit_reports(records, cfg.output_dir);
        std::cout << bench::markdown_report(records);
        bench_status = bench::exit_code(records);
    });
    auto* report = bench_cmd->add_subcommand("report", "Rebuild CSV and markdown from records.json");
    std::string records_path;
    report->add_option("records", records_path, "records.json")->required()->check(CLI::ExistingFile);
    report->callback([&] {
        json j;
        try {
            j = json::parse(read_file(records_path));
        } catch (const json::parse_error& e) {
            throw FormatError(records_path + ": " + e.what());
        }
        const auto records = bench::records_from_json(j);
        const fs::path dir = g.output_dir ? fs::path(*g.output_dir) : fs::path(records_path).parent_path();
        bench::emit_reports(records, dir);
        std::cout << bench::markdown_report(records);
        bench_status = bench::exit_code(records);
    });

    // train
    auto* train = app.add_subcommand("train", "Train a generator on crops of a rendered text");
    std::string mode = "l1_only", loss_csv;
    int steps = 200, crop = 32, crops = 4, train_dpi = 72;
    double lr = 1e-3;
    train->add_option("text", text_path, "UTF-8 text to render")->required()->check(CLI::ExistingFile);
    train->add_option("-o,--out", out_path, "Output weight file")->required();
    train->add_option("--model", preset, "Generator preset")->capture_default_str();
    train->add_flag("--miniature", miniature, "Use the miniature architecture");
    train->add_option("--mode", mode, "l1_only, gan or ragan")->capture_default_str();
    train->add_option("--factor", factor, "Upsampling factor")->check(CLI::Range(2, 4))->capture_default_str();
    train->add_option("--steps", steps, "Maximum steps")->capture_default_str();
    train->add_option("--lr", lr, "Learning rate")->capture_default_str();
    train->add_option("--crop", crop, "High-resolution crop edge")->capture_default_str();
    train->add_option("--crops", crops, "Number of crops along the first text line")->capture_default_str();
    train->add_option("--dpi", train_dpi, "Render dpi")->capture_default_str();
    train->add_option("--loss-csv", loss_csv, "Write the loss history here");
    train->callback([&] {
        const auto id = models::parse_preset(preset);
        if (!models::is_generator(id) || id == models::PresetId::bicubic)
            throw ConfigError("model", preset + " is not a trainable generator");
        const auto arch = miniature ? models::ArchPreset::miniature(id) : models::ArchPreset::defaults(id);
        const models::LayerGraph gen = models::build_model(arch, factor);
        const degrade::FontSpec font{};
        const degrade::Image page = degrade::render_text_page(read_file(text_path), train_dpi, font).image;
        const degrade::PageLayout layout = degrade::page_layout(train_dpi, font);
        training::Dataset data;
        for (int i = 0; i < crops; ++i) {
            auto p = bench::crop_pair(page, layout.margin + i * crop, layout.margin, crop, factor, arch.colors);
            data.push_back({std::move(p.lr), std::move(p.hr)});
        }
        training::TrainConfig tc;
        tc.steps_max = steps;
        tc.learning_rate = lr;
        tc.seed = seed();
        tc.mode = training::parse_mode(mode);
        tc.validate();
        std::optional<models::LayerGraph> disc;
        if (tc.mode != training::TrainMode::l1_only) {
            const auto darch = models::ArchPreset::miniature(models::PresetId::srgan_disc);
            disc = models::build_model(darch, factor);
        }
        const training::TrainGraphs graphs{&gen, disc ? &*disc : nullptr};
        const auto result = training::train_loop(graphs, training::initial_state(graphs, tc.seed), data, tc);
        const auto& first = result.history.front();
        const auto& last = result.history.back();
        std::printf("steps %zu  l1 %.6f -> %.6f%s\n", result.history.size(), first.l1, last.l1,
                    result.converged ? "  (converged)" : "");
        models::save_weights(gen, result.state.generator, out_path);
        if (!loss_csv.empty()) training::write_loss_csv(loss_csv, result.history);
    });

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
    int probes = 64;
    gc->add_option("--model", preset, "Preset")->required();
    gc->add_flag("--miniature", miniature, "Use the miniature architecture");
    gc->add_option("--factor", factor, "Upsampling factor")->check(CLI::Range(2, 4))->capture_default_str();
    gc->add_option("--probes", probes, "Probe count")->capture_default_str();
    gc->callback([&] {
        const auto id = models::parse_preset(preset);
        const auto arch = miniature ? models::ArchPreset::miniature(id) : models::ArchPreset::defaults(id);
        const models::LayerGraph graph = models::build_model(arch, factor);
        training::GradCheckOptions opt;
        opt.probes = probes;
        opt.seed = seed();
        const auto r = training::grad_check(graph, models::init_weights(graph, seed()), opt);
        std::printf("%s: max relative error %.3e over %d probes (%d redrawn)\n", graph.name.c_str(), r.max_rel_error,
                    r.probes, r.rejected);
        if (!(r.max_rel_error < 1e-3)) bench_status = 2;
    });

    // describe
    auto* describe = app.add_subcommand("describe", "Print a model's layers and parameter count");
    describe->add_option("--model", preset, "Preset")->required();
    describe->add_flag("--miniature", miniature, "Use the miniature architecture");
    describe->add_option("--factor", factor, "Upsampling factor")->check(CLI::Range(2, 4))->capture_default_str();
    describe->callback([&] {
        const auto id = models::parse_preset(preset);
        const auto arch = miniature ? models::ArchPreset::miniature(id) : models::ArchPreset::defaults(id);
        std::cout << models::describe(models::build_model(arch, factor));
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return bench_status;
}
