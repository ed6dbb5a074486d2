#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string_view>
#include <thread>

#include "srocr/errors.hpp"
#include "srocr/ocr/ocr.hpp"

namespace srocr::ocr {

namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        std::string pattern = (fs::temp_directory_path() / "srocr-ocr-XXXXXX").string();
        if (::mkdtemp(pattern.data()) == nullptr) throw OcrError("cannot create a temporary directory");
        path_ = pattern;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (const char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out += c;
    }
    return out + "'";
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string normalize_newlines(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r') {
            out += '\n';
            if (i + 1 < s.size() && s[i + 1] == '\n') ++i;
        } else {
            out += s[i];
        }
    }
    return out;
}

struct ProcessResult {
    int exit_code = 0;
    bool timed_out = false;
};

// /bin/sh -c command in its own process group; stdout and stderr go to files.
ProcessResult run_shell(const std::string& command, const fs::path& out_file, const fs::path& err_file, double timeout_s) {
    const std::string out_s = out_file.string(), err_s = err_file.string();
    const pid_t pid = ::fork();
    if (pid < 0) throw OcrError("fork failed");
    if (pid == 0) {
        ::setpgid(0, 0);
        const int out_fd = ::open(out_s.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
        const int err_fd = ::open(err_s.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
        const int null_fd = ::open("/dev/null", O_RDONLY);
        if (out_fd < 0 || err_fd < 0 || null_fd < 0) ::_exit(126);
        ::dup2(null_fd, STDIN_FILENO);
        ::dup2(out_fd, STDOUT_FILENO);
        ::dup2(err_fd, STDERR_FILENO);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::setpgid(pid, pid);  // also from the parent, so the kill below cannot race the child
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
    int status = 0;
    for (;;) {
        const pid_t r = ::waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0) throw OcrError("waitpid failed");
        if (std::chrono::steady_clock::now() >= deadline) {
            ::kill(-pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            return {-1, true};
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (WIFEXITED(status)) return {WEXITSTATUS(status), false};
    return {128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0), false};
}

// SROCR_TESSERACT, when set and the template starts with the word "tesseract".
const char* tesseract_override(const std::string& command_template) {
    const char* env = std::getenv("SROCR_TESSERACT");
    if (env == nullptr || *env == '\0') return nullptr;
    constexpr std::string_view word = "tesseract";
    if (command_template.rfind(word, 0) != 0) return nullptr;
    if (command_template.size() > word.size() && command_template[word.size()] != ' ' &&
        command_template[word.size()] != '\t')
        return nullptr;
    return env;
}

std::string engine_binary(const std::string& command_template) {
    if (const char* env = tesseract_override(command_template)) return env;
    return command_template.substr(0, command_template.find_first_of(" \t"));
}

}  // namespace

std::string to_string(EngineKind k) { return k == EngineKind::mock ? "mock" : "external"; }

EngineKind parse_engine_kind(const std::string& s) {
    if (s == "mock") return EngineKind::mock;
    if (s == "external") return EngineKind::external;
    throw ConfigError("engine.kind", "expected \"mock\" or \"external\", got \"" + s + "\"");
}

void OcrEngineSpec::validate() const {
    if (kind == EngineKind::external && command_template.empty())
        throw ConfigError("engine.command", "external engine needs a command template");
    if (!(timeout_s > 0.0)) throw ConfigError("engine.timeout_s", "must be > 0");
    if (binarize_threshold < 0 || binarize_threshold > 255)
        throw ConfigError("engine.binarize_threshold", "must be in [0, 255]");
    try {
        font.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("engine.font", e.what());
    }
}

Image binarize(const Image& img, int threshold) {
    Image g = degrade::to_gray(img);
    for (auto& v : g.data) v = v < threshold ? 0 : 255;
    return g;
}

std::string expand_command(const std::string& command_template, const std::string& input, const std::string& output) {
    std::string cmd = command_template;
    if (const char* env = tesseract_override(cmd)) cmd = shell_quote(env) + cmd.substr(9);
    const auto replace_all = [&](const std::string& key, const std::string& value) {
        for (std::size_t at = cmd.find(key); at != std::string::npos; at = cmd.find(key, at + value.size()))
            cmd.replace(at, key.size(), value);
    };
    replace_all("{input}", shell_quote(input));
    replace_all("{output}", shell_quote(output));
    return cmd;
}

std::string run_external_ocr(const Image& img, const OcrEngineSpec& spec) {
    spec.validate();
    const TempDir dir;
    const fs::path input = dir.path() / "input.png";
    const fs::path output = dir.path() / "output";
    degrade::write_png(binarize(img, spec.binarize_threshold), input);
    const std::string cmd = expand_command(spec.command_template, input.string(), output.string());
    const ProcessResult r = run_shell(cmd, dir.path() / "stdout.log", dir.path() / "stderr.log", spec.timeout_s);
    if (r.timed_out) throw EngineTimeout("OCR engine timed out after " + std::to_string(spec.timeout_s) + " s");
    const std::string err = read_file(dir.path() / "stderr.log");
    if (r.exit_code == 127) throw EngineNotInstalled("OCR engine not installed: " + err);
    if (r.exit_code != 0) throw EngineFailed(r.exit_code, err);
    const fs::path text = output.string() + ".txt";
    if (!fs::exists(text)) throw OcrError("OCR engine produced no " + text.filename().string());
    return normalize_newlines(read_file(text));
}

std::string run_ocr(const Image& img, const OcrEngineSpec& spec) {
    if (spec.kind == EngineKind::mock) return mock_ocr(img, spec.font);
    return run_external_ocr(img, spec);
}

EngineProbe engine_probe(const OcrEngineSpec& spec) {
    EngineProbe p;
    if (spec.kind == EngineKind::mock) {
        p.available = true;
        p.version = "srocr mock OCR 1";
        return p;
    }
    try {
        const TempDir dir;
        const std::string cmd = shell_quote(engine_binary(spec.command_template)) + " --version";
        const ProcessResult r = run_shell(cmd, dir.path() / "stdout.log", dir.path() / "stderr.log", 10.0);
        // Older Tesseract builds print the version on stderr.
        const std::string text = read_file(dir.path() / "stdout.log") + read_file(dir.path() / "stderr.log");
        if (r.timed_out) {
            p.detail = "version query timed out";
        } else if (r.exit_code != 0) {
            p.detail = "version query exited with status " + std::to_string(r.exit_code);
        } else {
            std::istringstream lines(normalize_newlines(text));
            for (std::string line; std::getline(lines, line);)
                if (!line.empty()) {
                    p.version = line;
                    break;
                }
            p.available = !p.version.empty();
            if (!p.available) p.detail = "empty version output";
        }
    } catch (const std::exception& e) {
        p.detail = e.what();
    }
    return p;
}

}  // namespace srocr::ocr
