#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "srocr/bench/bench.hpp"
#include "srocr/errors.hpp"
#include "srocr/hash.hpp"

namespace srocr::bench {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kData = SROCR_DATA_DIR;

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("srocr-bench-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string csv(const std::vector<ScoreRecord>& records) {
    std::ostringstream os;
    write_csv(records, os);
    return os.str();
}

std::string config_error_path(const json& j, const fs::path& base = ".") {
    try {
        parse_config(j, base);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<no error>";
}

// Small, fast matrix: low-dpi pages keep each cell cheap.
BenchConfig small_config(const fs::path& out) {
    BenchConfig c;
    c.texts = {{"t", "Small page\nfor tests."}};
    c.dpis = {72};
    c.scales = {0.5};
    c.output_dir = out;
    return c;
}

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, EmptyFileNeedsTexts) {
    TempDir dir;
    write_file(dir.path() / "empty.json", "");
    try {
        load_config(dir.path() / "empty.json");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.path(), "texts");
    }
    EXPECT_EQ(config_error_path(json::object()), "texts");
}

TEST(Config, MinimalConfigGetsDefaultMatrix) {
    const BenchConfig c = parse_config(json::parse(R"({"texts": [{"text": "hi"}], "engine": {"kind": "mock"}})"), "/base");
    EXPECT_EQ(c.dpis, (std::vector<int>{200, 220, 230, 240, 250, 260}));
    EXPECT_EQ(c.scales, (std::vector<double>{0.1, 0.2, 0.3, 0.35, 0.4, 0.45, 0.5}));
    ASSERT_EQ(c.models.size(), 1u);
    EXPECT_EQ(c.models[0].id, "bicubic");
    EXPECT_EQ(c.texts[0].id, "text0");
    EXPECT_EQ(c.engine.kind, ocr::EngineKind::mock);
    EXPECT_EQ(c.output_dir, fs::path("/base/bench_out"));
    EXPECT_TRUE(c.cache);
    EXPECT_EQ(c.workers, 1);
}

TEST(Config, RejectsOutOfRangeAndUnknownFields) {
    const json base = json::parse(R"({"texts": [{"text": "hi"}]})");
    json j = base;
    j["scales"] = {1.5};
    EXPECT_EQ(config_error_path(j), "scales[0]");
    j = base;
    j["scales"] = {0.5, 0.0};
    EXPECT_EQ(config_error_path(j), "scales[1]");
    j = base;
    j["dpis"] = json::array();
    EXPECT_EQ(config_error_path(j), "dpis");
    j = base;
    j["colour"] = true;
    EXPECT_EQ(config_error_path(j), "colour");
    j = base;
    j["engine"] = {{"kind", "ocrad"}};
    EXPECT_NE(config_error_path(j), "<no error>");
    j = base;
    j["models"] = {{{"preset", "srgan_disc"}}};
    EXPECT_EQ(config_error_path(j), "models[0].preset");
    j = base;
    j["models"] = {{{"preset", "edsr"}, {"scale", 5}}};
    EXPECT_EQ(config_error_path(j), "models[0].scale");
    j = base;
    j["models"] = {"bicubic", "bicubic"};
    EXPECT_EQ(config_error_path(j), "models[1].id");
    j = base;
    j["texts"] = {{{"text", "a"}, {"path", "b"}}};
    EXPECT_EQ(config_error_path(j), "texts[0]");
    j = base;
    j["workers"] = 0;
    EXPECT_EQ(config_error_path(j), "workers");
}

TEST(Config, TextFilesAndModels) {
    TempDir dir;
    write_file(dir.path() / "memo.txt", "Memo body");
    const json j = json::parse(R"({
        "texts": ["memo.txt", {"id": "x", "text": "inline"}],
        "models": ["bicubic", {"preset": "edsr", "miniature": true, "scale": 2},
                   {"preset": "esrgan_gen", "weights": "untrained:7", "scale": "auto"}],
        "seed": 11,
        "degrade": {"noise_sigma": 2.0},
        "output_dir": "out"
    })");
    const BenchConfig c = parse_config(j, dir.path());
    ASSERT_EQ(c.texts.size(), 2u);
    EXPECT_EQ(c.texts[0].id, "memo");
    EXPECT_EQ(c.texts[0].text, "Memo body");
    EXPECT_EQ(c.texts[1].id, "x");
    ASSERT_EQ(c.models.size(), 3u);
    EXPECT_EQ(c.models[1].id, "edsr-mini-x2");
    EXPECT_EQ(c.models[1].weights, "untrained:11");
    EXPECT_EQ(c.models[1].scale, 2);
    EXPECT_EQ(c.models[2].weights, "untrained:7");
    EXPECT_FALSE(c.models[2].scale.has_value());
    EXPECT_EQ(c.noise_sigma, 2.0);
    EXPECT_EQ(c.output_dir, dir.path() / "out");

    json missing = j;
    missing["texts"] = {"nope.txt"};
    EXPECT_EQ(config_error_path(missing, dir.path()), "texts[0]");
}

TEST(Config, UpsampleFactorTable) {
    const std::vector<std::pair<double, int>> table = {{0.1, 4}, {0.2, 4}, {0.25, 4}, {0.3, 3}, {0.35, 3},
                                                       {0.4, 3}, {0.45, 2}, {0.5, 2},  {1.0, 2}};
    for (const auto& [s, f] : table) EXPECT_EQ(upsample_factor(s), f) << s;
}

// ---------------------------------------------------------------------------
// SR stage

TEST(SrStage, TensorConversions) {
    degrade::Image g(3, 2, 1);
    g.data = {0, 51, 102, 153, 204, 255};
    const tensor::Tensor t1 = image_to_tensor(g, 1);
    EXPECT_EQ(t1.shape(), (tensor::Shape{1, 1, 2, 3}));
    EXPECT_FLOAT_EQ(t1[1], 0.2f);
    const tensor::Tensor t3 = image_to_tensor(g, 3);
    EXPECT_EQ(t3.shape(), (tensor::Shape{1, 3, 2, 3}));
    EXPECT_FLOAT_EQ(t3[6 + 5], 1.0f);
    EXPECT_EQ(tensor_to_gray(t1).data, g.data);
    EXPECT_EQ(tensor_to_gray(t3).data, g.data);
    EXPECT_THROW(image_to_tensor(g, 2), ShapeError);
    EXPECT_THROW(tensor_to_gray(tensor::Tensor(tensor::Shape{2, 1, 2, 2})), ShapeError);
}

TEST(SrStage, OutputMatchesReferenceSize) {
    const degrade::Image page = degrade::render_text_page("Size check", 72, {}).image;
    const degrade::Image lr = degrade::degrade_pipeline(page, {0.35});
    ModelSpec bicubic;
    const Image up = super_resolve(instantiate(bicubic, upsample_factor(0.35)), lr, page.width, page.height, 72);
    EXPECT_EQ(up.width, page.width);
    EXPECT_EQ(up.height, page.height);
    EXPECT_EQ(up.dpi, std::optional<int>(72));

    ModelSpec edsr{"e", models::PresetId::edsr, true, std::nullopt, "untrained:3"};
    const degrade::Image small = degrade::resize(lr, 20, 26, ResampleKernel::bicubic);
    const Image out = super_resolve(instantiate(edsr, 3), small, 61, 77, std::nullopt);
    EXPECT_EQ(out.width, 61);
    EXPECT_EQ(out.height, 77);
}

TEST(SrStage, WeightFilesAreChecked) {
    TempDir dir;
    const auto arch = models::ArchPreset::miniature(models::PresetId::edsr);
    const auto graph = models::build_model(arch, 2);
    models::save_weights(graph, models::init_weights(graph, 1), dir.path() / "edsr.srwt");
    ModelSpec spec{"e", models::PresetId::edsr, true, std::nullopt, (dir.path() / "edsr.srwt").string()};
    EXPECT_EQ(instantiate(spec, 4).graph.scale, 2);  // the file fixes the factor
    spec.scale = 3;
    EXPECT_THROW(instantiate(spec, 3), ConfigError);
    spec.scale.reset();
    spec.preset = models::PresetId::srgan_gen;
    spec.miniature = true;
    EXPECT_THROW(instantiate(spec, 2), ConfigError);
}

TEST(SrStage, CropPair) {
    const degrade::Image page = degrade::render_text_page("Crop", 72, {}).image;
    const TrainingPair p = crop_pair(page, 72, 72, 32, 2, 3);
    EXPECT_EQ(p.hr.shape(), (tensor::Shape{1, 3, 32, 32}));
    EXPECT_EQ(p.lr.shape(), (tensor::Shape{1, 3, 16, 16}));
    float lo = 1.0f;
    for (const float v : p.hr.data()) lo = std::min(lo, v);
    EXPECT_EQ(lo, 0.0f);  // ink inside the crop
    EXPECT_THROW(crop_pair(page, 72, 72, 30, 4, 3), ShapeError);
    EXPECT_THROW(crop_pair(page, page.width - 10, 0, 32, 2, 3), ShapeError);
}

// ---------------------------------------------------------------------------
// Scoring and cache keys

TEST(ScoreCell, IdentityAndMismatch) {
    const degrade::Image page = degrade::render_text_page("Score", 72, {}).image;
    const CellScore s = score_cell(page, page, "Score", "Score");
    EXPECT_EQ(s.fuzz, 100);
    EXPECT_EQ(s.levenshtein, 0);
    EXPECT_TRUE(std::isinf(s.psnr_db));
    EXPECT_DOUBLE_EQ(s.ssim, 1.0);
    EXPECT_EQ(score_cell(page, page, "  Score\r\n", "Score").fuzz, 100);
    EXPECT_LT(score_cell(page, page, "Scone", "Score").fuzz, 100);
    const degrade::Image other = degrade::resize(page, page.width - 1, page.height, ResampleKernel::bicubic);
    EXPECT_THROW(score_cell(other, page, "a", "a"), ShapeError);
}

TEST(CacheKey, ContentAddressed) {
    const json base = {{"text", "abc"}, {"dpi", 200}, {"scale", 0.5}, {"seed", 0}};
    const std::string k = cache_key("degrade", base);
    EXPECT_EQ(k.size(), 64u);
    EXPECT_EQ(k.find_first_not_of("0123456789abcdef"), std::string::npos);
    EXPECT_EQ(k, cache_key("degrade", json::parse(base.dump())));
    EXPECT_EQ(k, sha256_hex("degrade\n" + base.dump()));
    EXPECT_NE(k, cache_key("sr", base));
    for (const auto& [field, value] : base.items()) {
        json changed = base;
        changed[field] = value.is_string() ? json("abd") : json(value.get<double>() + 1);
        EXPECT_NE(k, cache_key("degrade", changed)) << field;
    }
}

// ---------------------------------------------------------------------------
// Matrix runs

TEST(RunMatrix, CardinalityAndOrder) {
    TempDir dir;
    BenchConfig c = small_config(dir.path());
    c.dpis = {72, 73, 74, 75, 76, 77};
    c.scales = {0.1, 0.2, 0.3, 0.35, 0.4, 0.45, 0.5};
    c.models.push_back({"edsr-mini", models::PresetId::edsr, true, std::nullopt, "untrained:0"});
    c.cache = false;
    std::size_t calls = 0;
    RunOptions opts;
    opts.progress = [&](const ScoreRecord&, std::size_t done, std::size_t total) {
        EXPECT_EQ(done, ++calls);
        EXPECT_EQ(total, 84u);
    };
    const auto records = run_matrix(c, opts);
    ASSERT_EQ(records.size(), 84u);
    EXPECT_EQ(calls, 84u);
    std::size_t i = 0;
    for (const int dpi : c.dpis)
        for (const double s : c.scales)
            for (const auto& m : c.models) {
                const ScoreRecord& r = records[i++];
                EXPECT_EQ(r.dpi, dpi);
                EXPECT_EQ(r.scale, s);
                EXPECT_EQ(r.model_id, m.id);
                EXPECT_EQ(r.status, CellStatus::ok) << r.message;
                EXPECT_EQ(r.fuzz.has_value(), r.status == CellStatus::ok);
                EXPECT_EQ(r.sr_factor, upsample_factor(s));
            }
}

TEST(RunMatrix, IdentityScaleReadsPerfectly) {
    TempDir dir;
    BenchConfig c = small_config(dir.path());
    c.texts = {{"t", "Identity path: 1.0 scale, bicubic model."}};
    c.dpis = {200};
    c.scales = {1.0};
    const auto records = run_matrix(c);
    ASSERT_EQ(records.size(), 1u);
    EXPECT_EQ(records[0].status, CellStatus::ok) << records[0].message;
    EXPECT_EQ(records[0].fuzz, 100);
    EXPECT_EQ(records[0].levenshtein, 0);
    EXPECT_GT(*records[0].ssim, 0.9);
    EXPECT_EQ(exit_code(records), 0);
}

TEST(RunMatrix, FailuresAreRecordedNotThrown) {
    TempDir dir;
    BenchConfig c = small_config(dir.path());
    c.models.push_back({"broken", models::PresetId::edsr, true, std::nullopt, (dir.path() / "missing.srwt").string()});
    c.engine.kind = ocr::EngineKind::external;
    c.engine.command_template = "srocr-no-such-engine {input} {output}";
    const auto records = run_matrix(c);
    ASSERT_EQ(records.size(), 2u);
    EXPECT_EQ(records[0].status, CellStatus::skipped);
    EXPECT_FALSE(records[0].fuzz.has_value());
    EXPECT_TRUE(records[0].psnr_db.has_value());  // image metrics do not need OCR
    EXPECT_EQ(records[1].status, CellStatus::error);
    EXPECT_NE(records[1].message.find("missing.srwt"), std::string::npos);
    EXPECT_EQ(exit_code(records), 2);
}

TEST(RunMatrix, CacheHitGivesIdenticalRecords) {
    TempDir dir;
    BenchConfig c = small_config(dir.path());
    c.scales = {0.3, 0.5};
    c.noise_sigma = 4.0;
    const auto first = run_matrix(c);
    for (const auto& r : first) EXPECT_FALSE(r.cache_hit);
    std::size_t entries = 0;
    for (const auto& e : fs::directory_iterator(dir.path())) {
        EXPECT_TRUE(fs::exists(e.path() / "lr.png"));
        EXPECT_EQ(e.path().filename().string().size(), 64u);
        ++entries;
    }
    EXPECT_EQ(entries, 2u);
    const auto second = run_matrix(c);
    for (const auto& r : second) EXPECT_TRUE(r.cache_hit);
    EXPECT_EQ(csv(first), csv(second));

    c.seed = 1;  // new noise, new entries
    const auto third = run_matrix(c);
    for (const auto& r : third) EXPECT_FALSE(r.cache_hit);
}

TEST(RunMatrix, DeterministicAcrossWorkerCounts) {
    TempDir dir;
    BenchConfig c = small_config(dir.path());
    c.texts.push_back({"u", "Another page"});
    c.scales = {0.2, 0.5};
    c.noise_sigma = 3.0;
    c.cache = false;
    const std::string one = csv(run_matrix(c));
    c.workers = 3;
    EXPECT_EQ(one, csv(run_matrix(c)));
}

TEST(RunMatrix, UntrainedMiniatureSmoke) {
    TempDir dir;
    BenchConfig c = small_config(dir.path());
    c.models = {{"srgan-mini", models::PresetId::srgan_gen, true, std::nullopt, "untrained:5"},
                {"esrgan-mini", models::PresetId::esrgan_gen, true, 4, "untrained:5"}};
    const auto records = run_matrix(c);
    ASSERT_EQ(records.size(), 2u);
    for (const auto& r : records) {
        EXPECT_EQ(r.status, CellStatus::ok) << r.message;
        EXPECT_TRUE(r.fuzz.has_value());
        EXPECT_TRUE(std::isfinite(*r.psnr_db));
    }
    EXPECT_EQ(records[0].sr_factor, 2);
    EXPECT_EQ(records[1].sr_factor, 4);
}

// ---------------------------------------------------------------------------
// Reports

std::vector<ScoreRecord> sample_records() {
    std::vector<ScoreRecord> v;
    const auto add = [&](std::string text, int dpi, double scale, std::string model, CellStatus st, std::optional<int> fuzz,
                         std::optional<double> psnr) {
        ScoreRecord r;
        r.text_id = std::move(text);
        r.dpi = dpi;
        r.scale = scale;
        r.model_id = std::move(model);
        r.status = st;
        r.fuzz = fuzz;
        if (fuzz) r.levenshtein = 100 - *fuzz;
        r.psnr_db = psnr;
        if (psnr) r.ssim = 0.123456789;
        r.message = st == CellStatus::ok ? "" : "engine missing";
        r.sr_factor = 2;
        v.push_back(r);
    };
    const double inf = std::numeric_limits<double>::infinity();
    add("a", 200, 0.5, "bicubic", CellStatus::ok, 100, inf);
    add("a", 200, 0.5, "edsr, mini", CellStatus::ok, 99, 31.25);
    add("a", 200, 0.1, "bicubic", CellStatus::ok, 20, 12.0);
    add("a", 200, 0.1, "edsr, mini", CellStatus::skipped, std::nullopt, 11.5);
    add("b\"q", 200, 0.5, "bicubic", CellStatus::ok, 99, 40.0);
    add("b\"q", 200, 0.5, "edsr, mini", CellStatus::ok, 100, 35.0);
    add("b\"q", 200, 0.1, "bicubic", CellStatus::ok, 25, 12.5);
    add("b\"q", 200, 0.1, "edsr, mini", CellStatus::error, std::nullopt, std::nullopt);
    add("a", 260, 0.35, "bicubic", CellStatus::ok, 70, 20.0);
    return v;
}

TEST(Reports, CsvLayoutAndRoundTrip) {
    const auto records = sample_records();
    const std::string text = csv(records);
    std::istringstream lines(text);
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    EXPECT_EQ(header, "text_id,dpi,scale,model,fuzz,levenshtein,psnr_db,ssim,status");
    EXPECT_EQ(first, "a,200,0.5,bicubic,100,0,inf,0.123457,OK");
    EXPECT_NE(text.find("\"b\"\"q\",200,0.1,\"edsr, mini\",,,,,ERROR"), std::string::npos);

    std::istringstream in(text);
    const auto parsed = parse_csv(in);
    ASSERT_EQ(parsed.size(), records.size());
    EXPECT_EQ(parsed[4].text_id, "b\"q");
    EXPECT_EQ(parsed[1].model_id, "edsr, mini");
    EXPECT_EQ(csv(parsed), text);

    std::istringstream bad("text_id,dpi\n");
    EXPECT_THROW(parse_csv(bad), FormatError);
    std::istringstream short_row(std::string(kCsvHeader) + "\na,200\n");
    EXPECT_THROW(parse_csv(short_row), FormatError);
    std::istringstream bad_status(std::string(kCsvHeader) + "\na,200,0.5,m,,,,,MAYBE\n");
    EXPECT_THROW(parse_csv(bad_status), FormatError);
}

TEST(Reports, JsonRoundTrip) {
    auto records = sample_records();
    records[0].wall_ms = {1, 2, 3, 4, 5};
    records[0].cache_hit = true;
    const json j = records_to_json(records);
    EXPECT_EQ(j["records"][0]["psnr_db"], "inf");
    EXPECT_TRUE(j["records"][7]["fuzz"].is_null());
    const auto back = records_from_json(json::parse(j.dump()));
    ASSERT_EQ(back.size(), records.size());
    EXPECT_TRUE(std::isinf(*back[0].psnr_db));
    EXPECT_TRUE(back[0].cache_hit);
    EXPECT_EQ(back[0].wall_ms.ocr, 4.0);
    EXPECT_EQ(back[3].message, "engine missing");
    EXPECT_EQ(csv(back), csv(records));
    EXPECT_THROW(records_from_json(json::parse(R"({"records": [{"dpi": 1}]})")), FormatError);
}

TEST(Reports, MarkdownTables) {
    const std::string md = markdown_report(sample_records());
    const std::string expected =
        "# OCR accuracy (fuzz ratio, %)\n"
        "\n"
        "## 200 dpi\n"
        "\n"
        "| scale | bicubic | edsr, mini |\n"
        "|---:|---:|---:|\n"
        "| 0.1 | 23 | n/a |\n"
        "| 0.35 | n/a | n/a |\n"
        "| 0.5 | **100** | **100** |\n"
        "\n"
        "## 260 dpi\n"
        "\n"
        "| scale | bicubic | edsr, mini |\n"
        "|---:|---:|---:|\n"
        "| 0.1 | n/a | n/a |\n"
        "| 0.35 | 70 | n/a |\n"
        "| 0.5 | n/a | n/a |\n";
    EXPECT_EQ(md, expected);

    std::vector<ScoreRecord> one;
    for (const auto& r : sample_records())
        if (r.dpi == 260) one.push_back(r);
    const std::string single = markdown_report(one);
    std::size_t tables = 0;
    for (std::size_t p = single.find("## "); p != std::string::npos; p = single.find("## ", p + 1)) ++tables;
    EXPECT_EQ(tables, 1u);
}

TEST(Reports, EmitWritesAllFormats) {
    TempDir dir;
    const auto records = sample_records();
    emit_reports(records, dir.path() / "nested");
    EXPECT_EQ(read_file(dir.path() / "nested" / "results.csv"), csv(records));
    EXPECT_EQ(read_file(dir.path() / "nested" / "results.md"), markdown_report(records));
    EXPECT_EQ(records_from_json(json::parse(read_file(dir.path() / "nested" / "records.json"))).size(), records.size());
}

// Golden tables for a slice of the bundled corpus through the default
// (bicubic, mock engine) pipeline.
TEST(Reports, CorpusGoldenMarkdown) {
    TempDir dir;
    const json j = {{"texts", {"corpus/invoice.txt", "corpus/letter.txt", "corpus/notes.txt"}},
                    {"dpis", {200, 260}},
                    {"scales", {0.1, 0.3, 0.5}},
                    {"engine", {{"kind", "mock"}}},
                    {"output_dir", dir.path().string()},
                    {"cache", false}};
    const auto records = run_matrix(parse_config(j, kData));
    EXPECT_EQ(exit_code(records), 0);
    EXPECT_EQ(markdown_report(records), read_file(kData / "golden" / "corpus_subset.md"));
}

}  // namespace
}  // namespace srocr::bench
