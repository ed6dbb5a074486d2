#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "srocr/degrade/degrade.hpp"
#include "srocr/degrade/render.hpp"
#include "srocr/models/graph.hpp"
#include "srocr/models/weights.hpp"
#include "srocr/ocr/ocr.hpp"

namespace srocr::bench {

using degrade::FontSpec;
using degrade::Image;

// ---------------------------------------------------------------------------
// Configuration

struct TextSource {
    std::string id;
    std::string text;
};

/// One super-resolution model column of the matrix.
struct ModelSpec {
    std::string id;
    models::PresetId preset = models::PresetId::bicubic;
    bool miniature = false;
    std::optional<int> scale;  // nullopt = per-cell factor from the degradation scale
    /// Empty for the bicubic preset, "untrained:<seed>", or an SRWT path.
    std::string weights;
};

struct BenchConfig {
    std::vector<TextSource> texts;
    std::vector<int> dpis{200, 220, 230, 240, 250, 260};
    std::vector<double> scales{0.1, 0.2, 0.3, 0.35, 0.4, 0.45, 0.5};
    std::vector<ModelSpec> models{ModelSpec{"bicubic", models::PresetId::bicubic, false, std::nullopt, ""}};
    ocr::OcrEngineSpec engine;
    FontSpec font;
    double blur_sigma = 0.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "bench_out";
    bool cache = true;
    int workers = 1;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Parses the JSON schema documented in README.md. Relative text and
/// weight paths resolve against `base_dir`. Throws ConfigError.
BenchConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
BenchConfig load_config(const std::filesystem::path& path);

/// round(1 / scale) clamped to [2, 4].
int upsample_factor(double scale);

// ---------------------------------------------------------------------------
// Super-resolution stage

/// A model instantiated at one upsampling factor.
struct SrModel {
    models::LayerGraph graph;
    models::WeightStore weights;
};

/// Builds the graph for `spec` at `factor` (ignored when spec.scale is set
/// or a weight file fixes it) and loads or initializes its weights.
SrModel instantiate(const ModelSpec& spec, int factor);

/// Gray or RGB image -> N=1 float tensor in [0, 1] with the model's color
/// count (gray is replicated). The inverse maps back to gray through luma.
tensor::Tensor image_to_tensor(const Image& img, int colors);
Image tensor_to_gray(const tensor::Tensor& t);

/// Runs the model on `lr`, then closes any size gap to width x height with
/// bicubic resampling. The result carries `dpi`.
Image super_resolve(const SrModel& model, const Image& lr, int width, int height, std::optional<int> dpi);

struct TrainingPair {
    tensor::Tensor lr;
    tensor::Tensor hr;
};

/// Square `hr_extent` crop of `page` at (x, y) and its bicubic downscale by
/// `factor`, both as (1, colors, h, w) tensors. Throws ShapeError when the
/// crop leaves the page or hr_extent is not a multiple of factor.
TrainingPair crop_pair(const Image& page, int x, int y, int hr_extent, int factor, int colors);

// ---------------------------------------------------------------------------
// Records

enum class CellStatus { ok, skipped, error };
std::string to_string(CellStatus s);
CellStatus parse_status(const std::string& s);

struct StageTimes {
    double render = 0, degrade = 0, sr = 0, ocr = 0, score = 0;
};

struct ScoreRecord {
    std::string text_id;
    int dpi = 0;
    double scale = 0;
    std::string model_id;
    CellStatus status = CellStatus::ok;
    std::optional<int> fuzz;  // present iff status == ok
    std::optional<long> levenshtein;
    std::optional<double> psnr_db;
    std::optional<double> ssim;
    std::string message;
    int sr_factor = 0;
    bool cache_hit = false;
    StageTimes wall_ms;
};

struct CellScore {
    int fuzz = 0;
    long levenshtein = 0;
    double psnr_db = 0;
    double ssim = 0;
};

/// Text scores on normalized strings, image scores vs the pristine page.
/// Throws ShapeError when the images differ in size.
CellScore score_cell(const Image& restored, const Image& reference, const std::string& ocr_text,
                     const std::string& truth);

/// Content digest over the stage name and a canonical JSON dump of inputs.
std::string cache_key(const std::string& stage, const nlohmann::json& inputs);

struct RunOptions {
    /// Called after each finished cell (from worker threads, serialized).
    std::function<void(const ScoreRecord&, std::size_t done, std::size_t total)> progress;
};

/// Every (text, dpi, scale, model) cell in config order. Per-cell failures
/// are recorded, never thrown.
std::vector<ScoreRecord> run_matrix(const BenchConfig& config, const RunOptions& options = {});

// ---------------------------------------------------------------------------
// Reports

inline constexpr const char* kCsvHeader = "text_id,dpi,scale,model,fuzz,levenshtein,psnr_db,ssim,status";

void write_csv(const std::vector<ScoreRecord>& records, std::ostream& os);
/// Parses what write_csv produces; throws FormatError.
std::vector<ScoreRecord> parse_csv(std::istream& is);

nlohmann::json records_to_json(const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> records_from_json(const nlohmann::json& j);

/// One table per dpi: rows are scales ascending, columns are models in
/// first-seen order, cells the corpus-mean fuzz rounded to an integer
/// (bold at 100, "n/a" when no cell succeeded).
std::string markdown_report(const std::vector<ScoreRecord>& records);

/// Writes records.json, results.csv and results.md under `dir`.
void emit_reports(const std::vector<ScoreRecord>& records, const std::filesystem::path& dir);

/// 0 when every cell is OK, 2 otherwise.
int exit_code(const std::vector<ScoreRecord>& records);

}  // namespace srocr::bench
