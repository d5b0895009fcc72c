#include "eeo/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "eeo/errors.hpp"

namespace eeo {

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    std::size_t end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

struct ParseCursor {
    const std::string& origin;
    std::size_t line = 0;

    [[noreturn]] void fail(const std::string& message) const {
        throw ConfigError(origin + ":" + std::to_string(line) + ": " + message);
    }
};

double parse_real(const ParseCursor& at, const std::string& key, const std::string& value) {
    double out = 0.0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size() || value.empty())
        at.fail(key + ": expected a number, got '" + value + "'");
    if (!std::isfinite(out)) at.fail(key + ": value must be finite");
    return out;
}

std::size_t parse_count(const ParseCursor& at, const std::string& key,
                        const std::string& value) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size() || value.empty())
        at.fail(key + ": expected a non-negative integer, got '" + value + "'");
    return static_cast<std::size_t>(out);
}

std::uint64_t parse_seed(const ParseCursor& at, const std::string& key,
                         const std::string& value) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size() || value.empty())
        at.fail(key + ": expected a non-negative integer, got '" + value + "'");
    return out;
}

void apply_ablation(const ParseCursor& at, RunConfig& cfg, const std::string& value) {
    cfg.enable_sam = cfg.enable_escape = cfg.enable_sgld = cfg.enable_ema = false;
    if (value == "none") return;
    if (value.empty()) at.fail("ablation: empty value; use 'none' to disable everything");
    std::set<std::string> seen;
    std::stringstream ss(value);
    std::string token;
    while (std::getline(ss, token, ',')) {
        token = trim(token);
        if (!seen.insert(token).second)
            at.fail("ablation: duplicate mechanism '" + token + "'");
        if (token == "sam") {
            cfg.enable_sam = true;
        } else if (token == "escape") {
            cfg.enable_escape = true;
        } else if (token == "sgld") {
            cfg.enable_sgld = true;
        } else if (token == "ema") {
            cfg.enable_ema = true;
        } else {
            at.fail("ablation: unknown mechanism '" + token +
                    "' (choose from sam, escape, sgld, ema, or none)");
        }
    }
}

std::string ablation_string(const RunConfig& cfg) {
    std::string out;
    const char* names[4] = {"sam", "escape", "sgld", "ema"};
    const bool flags[4] = {cfg.enable_sam, cfg.enable_escape, cfg.enable_sgld,
                           cfg.enable_ema};
    for (std::size_t i = 0; i < 4; ++i) {
        if (!flags[i]) continue;
        if (!out.empty()) out += ',';
        out += names[i];
    }
    return out.empty() ? "none" : out;
}

// Re-validates the whole optimizer block after one field changed, so range
// errors surface on the exact line that introduced them.
void check_optimizer(const ParseCursor& at, const EEOConfig& opt) {
    try {
        opt.validate();
    } catch (const ValidationError& e) {
        at.fail(e.what());
    }
}

}  // namespace

const char* task_name(Task t) {
    switch (t) {
        case Task::kLandscape: return "landscape";
        case Task::kForecast: return "forecast";
        case Task::kAttentionAlign: return "attention_align";
    }
    throw ValidationError("task_name: unreachable");
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    bool have_experiment = false;
    bool have_task = false;
    std::set<std::string> seen_keys;

    ParseCursor at{origin, 0};
    std::stringstream lines(text);
    std::string raw;
    while (std::getline(lines, raw)) {
        ++at.line;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            at.fail("expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) at.fail("missing key before '='");
        if (!seen_keys.insert(key).second) at.fail("duplicate key '" + key + "'");

        if (key == "experiment") {
            if (value.empty()) at.fail("experiment: name must not be empty");
            cfg.experiment = value;
            have_experiment = true;
        } else if (key == "task") {
            if (value == "landscape") {
                cfg.task = Task::kLandscape;
            } else if (value == "forecast") {
                cfg.task = Task::kForecast;
            } else if (value == "attention_align") {
                cfg.task = Task::kAttentionAlign;
            } else {
                at.fail("task: unknown task '" + value +
                        "' (choose from landscape, forecast, attention_align)");
            }
            have_task = true;
        } else if (key == "seed") {
            cfg.seed = parse_seed(at, key, value);
        } else if (key == "out_dir") {
            if (value.empty()) at.fail("out_dir: path must not be empty");
            cfg.out_dir = value;
        } else if (key == "landscape.name") {
            cfg.landscape_name = value;
        } else if (key == "landscape.dim") {
            cfg.landscape_dim = parse_count(at, key, value);
            if (cfg.landscape_dim == 0) at.fail("landscape.dim: must be at least 1");
        } else if (key == "landscape.linear_rows") {
            cfg.linear_rows = parse_count(at, key, value);
            if (cfg.linear_rows == 0) at.fail("landscape.linear_rows: must be at least 1");
        } else if (key == "landscape.linear_in") {
            cfg.linear_in = parse_count(at, key, value);
            if (cfg.linear_in == 0) at.fail("landscape.linear_in: must be at least 1");
        } else if (key == "landscape.linear_out") {
            cfg.linear_out = parse_count(at, key, value);
            if (cfg.linear_out == 0) at.fail("landscape.linear_out: must be at least 1");
        } else if (key == "landscape.linear_noise") {
            cfg.linear_noise = parse_real(at, key, value);
            if (cfg.linear_noise < 0.0) at.fail("landscape.linear_noise: must be >= 0");
        } else if (key == "data.path") {
            cfg.data_path = value;
        } else if (key == "data.synthetic_len") {
            cfg.synthetic_len = parse_count(at, key, value);
            if (cfg.synthetic_len == 0) at.fail("data.synthetic_len: must be at least 1");
        } else if (key == "data.lookback") {
            cfg.lookback = parse_count(at, key, value);
            if (cfg.lookback == 0) at.fail("data.lookback: must be at least 1");
        } else if (key == "data.horizon") {
            cfg.horizon = parse_count(at, key, value);
            if (cfg.horizon == 0) at.fail("data.horizon: must be at least 1");
        } else if (key == "data.split_train") {
            cfg.split[0] = parse_real(at, key, value);
            if (cfg.split[0] < 0.0 || cfg.split[0] > 1.0)
                at.fail("data.split_train: must lie in [0, 1]");
        } else if (key == "data.split_val") {
            cfg.split[1] = parse_real(at, key, value);
            if (cfg.split[1] < 0.0 || cfg.split[1] > 1.0)
                at.fail("data.split_val: must lie in [0, 1]");
        } else if (key == "data.split_test") {
            cfg.split[2] = parse_real(at, key, value);
            if (cfg.split[2] < 0.0 || cfg.split[2] > 1.0)
                at.fail("data.split_test: must lie in [0, 1]");
        } else if (key == "data.stride") {
            cfg.stride = parse_count(at, key, value);
            if (cfg.stride == 0) at.fail("data.stride: must be at least 1");
        } else if (key == "model.d") {
            cfg.model_d = parse_count(at, key, value);
            if (cfg.model_d == 0) at.fail("model.d: must be at least 1");
        } else if (key == "model.d_m") {
            cfg.model_d_m = parse_count(at, key, value);
            if (cfg.model_d_m == 0) at.fail("model.d_m: must be at least 1");
        } else if (key == "model.patch_len") {
            cfg.model_patch_len = parse_count(at, key, value);
        } else if (key == "model.layers") {
            cfg.model_layers = parse_count(at, key, value);
            if (cfg.model_layers < 1 || cfg.model_layers > 4)
                at.fail("model.layers: must lie in [1, 4]");
        } else if (key == "model.align_windows") {
            cfg.align_windows = parse_count(at, key, value);
            if (cfg.align_windows == 0) at.fail("model.align_windows: must be at least 1");
        } else if (key == "model.align_tokens") {
            cfg.align_tokens = parse_count(at, key, value);
            if (cfg.align_tokens == 0) at.fail("model.align_tokens: must be at least 1");
        } else if (key == "optimizer.eta") {
            cfg.optimizer.eta = parse_real(at, key, value);
            check_optimizer(at, cfg.optimizer);
        } else if (key == "optimizer.rho") {
            cfg.optimizer.rho = parse_real(at, key, value);
            check_optimizer(at, cfg.optimizer);
        } else if (key == "optimizer.eps") {
            cfg.optimizer.eps = parse_real(at, key, value);
            check_optimizer(at, cfg.optimizer);
        } else if (key == "optimizer.scaling_mode") {
            cfg.optimizer.scaling_mode = value;
            check_optimizer(at, cfg.optimizer);
        } else if (key == "optimizer.alpha_fd") {
            cfg.optimizer.alpha_fd = parse_real(at, key, value);
            check_optimizer(at, cfg.optimizer);
        } else if (key == "optimizer.negcur_kick") {
            cfg.optimizer.negcur_kick = parse_real(at, key, value);
            check_optimizer(at, cfg.optimizer);
        } else if (key == "optimizer.grad_trigger") {
            cfg.optimizer.grad_trigger = parse_real(at, key, value);
            check_optimizer(at, cfg.optimizer);
        } else if (key == "optimizer.curvature_threshold") {
            cfg.optimizer.curvature_threshold = parse_real(at, key, value);
            check_optimizer(at, cfg.optimizer);
        } else if (key == "optimizer.probe_iters") {
            cfg.optimizer.probe_iters = parse_count(at, key, value);
            check_optimizer(at, cfg.optimizer);
        } else if (key == "optimizer.check_every") {
            cfg.optimizer.check_every = parse_count(at, key, value);
            check_optimizer(at, cfg.optimizer);
        } else if (key == "optimizer.temperature") {
            cfg.optimizer.temperature = parse_real(at, key, value);
            check_optimizer(at, cfg.optimizer);
        } else if (key == "optimizer.temp_decay") {
            cfg.optimizer.temp_decay = parse_real(at, key, value);
            check_optimizer(at, cfg.optimizer);
        } else if (key == "optimizer.beta") {
            cfg.optimizer.beta = parse_real(at, key, value);
            check_optimizer(at, cfg.optimizer);
        } else if (key == "optimizer.max_steps") {
            cfg.optimizer.max_steps = parse_count(at, key, value);
            check_optimizer(at, cfg.optimizer);
        } else if (key == "optimizer.batch_size") {
            cfg.batch_size = parse_count(at, key, value);
        } else if (key == "ablation") {
            apply_ablation(at, cfg, value);
        } else if (key == "diag.every") {
            cfg.diag_every = parse_count(at, key, value);
            if (cfg.diag_every == 0) at.fail("diag.every: must be at least 1");
        } else if (key == "diag.spectrum_every") {
            cfg.spectrum_every = parse_count(at, key, value);
            if (cfg.spectrum_every == 0) at.fail("diag.spectrum_every: must be at least 1");
        } else {
            at.fail("unknown key '" + key + "'");
        }
    }

    std::vector<std::string> missing;
    if (!have_experiment) missing.push_back("experiment");
    if (!have_task) missing.push_back("task");
    if (!missing.empty()) {
        std::string joined;
        for (const std::string& m : missing) {
            if (!joined.empty()) joined += ", ";
            joined += m;
        }
        throw ConfigError(origin + ": missing required keys: " + joined);
    }

    const double frac_sum = cfg.split[0] + cfg.split[1] + cfg.split[2];
    if (std::abs(frac_sum - 1.0) > 1e-9)
        throw ConfigError(origin + ": split fractions sum to " + format_double(frac_sum) +
                          ", expected 1 within 1e-9");

    if (cfg.task == Task::kForecast && !cfg.data_path.empty()) {
        std::ifstream probe(cfg.data_path);
        if (!probe.is_open())
            throw ConfigError(origin + ": data.path '" + cfg.data_path +
                              "' does not exist or is unreadable");
    }

    cfg.optimizer.seed = cfg.seed;
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw IoError("cannot open config " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

std::string echo_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "experiment = " << cfg.experiment << "\n";
    out << "task = " << task_name(cfg.task) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "out_dir = " << cfg.out_dir << "\n";
    out << "landscape.name = " << cfg.landscape_name << "\n";
    out << "landscape.dim = " << cfg.landscape_dim << "\n";
    out << "landscape.linear_rows = " << cfg.linear_rows << "\n";
    out << "landscape.linear_in = " << cfg.linear_in << "\n";
    out << "landscape.linear_out = " << cfg.linear_out << "\n";
    out << "landscape.linear_noise = " << format_double(cfg.linear_noise) << "\n";
    out << "data.path = " << cfg.data_path << "\n";
    out << "data.synthetic_len = " << cfg.synthetic_len << "\n";
    out << "data.lookback = " << cfg.lookback << "\n";
    out << "data.horizon = " << cfg.horizon << "\n";
    out << "data.split_train = " << format_double(cfg.split[0]) << "\n";
    out << "data.split_val = " << format_double(cfg.split[1]) << "\n";
    out << "data.split_test = " << format_double(cfg.split[2]) << "\n";
    out << "data.stride = " << cfg.stride << "\n";
    out << "model.d = " << cfg.model_d << "\n";
    out << "model.d_m = " << cfg.model_d_m << "\n";
    out << "model.patch_len = " << cfg.model_patch_len << "\n";
    out << "model.layers = " << cfg.model_layers << "\n";
    out << "model.align_windows = " << cfg.align_windows << "\n";
    out << "model.align_tokens = " << cfg.align_tokens << "\n";
    out << "optimizer.eta = " << format_double(cfg.optimizer.eta) << "\n";
    out << "optimizer.rho = " << format_double(cfg.optimizer.rho) << "\n";
    out << "optimizer.eps = " << format_double(cfg.optimizer.eps) << "\n";
    out << "optimizer.scaling_mode = " << cfg.optimizer.scaling_mode << "\n";
    out << "optimizer.alpha_fd = " << format_double(cfg.optimizer.alpha_fd) << "\n";
    out << "optimizer.negcur_kick = " << format_double(cfg.optimizer.negcur_kick) << "\n";
    out << "optimizer.grad_trigger = " << format_double(cfg.optimizer.grad_trigger) << "\n";
    out << "optimizer.curvature_threshold = "
        << format_double(cfg.optimizer.curvature_threshold) << "\n";
    out << "optimizer.probe_iters = " << cfg.optimizer.probe_iters << "\n";
    out << "optimizer.check_every = " << cfg.optimizer.check_every << "\n";
    out << "optimizer.temperature = " << format_double(cfg.optimizer.temperature) << "\n";
    out << "optimizer.temp_decay = " << format_double(cfg.optimizer.temp_decay) << "\n";
    out << "optimizer.beta = " << format_double(cfg.optimizer.beta) << "\n";
    out << "optimizer.max_steps = " << cfg.optimizer.max_steps << "\n";
    out << "optimizer.batch_size = " << cfg.batch_size << "\n";
    out << "ablation = " << ablation_string(cfg) << "\n";
    out << "diag.every = " << cfg.diag_every << "\n";
    out << "diag.spectrum_every = " << cfg.spectrum_every << "\n";
    return out.str();
}

}  // namespace eeo
