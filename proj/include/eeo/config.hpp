#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "eeo/optimizer.hpp"

namespace eeo {

enum class Task { kLandscape, kForecast, kAttentionAlign };

const char* task_name(Task t);

// Everything an experiment run needs, assembled from a flat `key = value`
// config file. Every key has a default except `experiment` and `task`; the
// full key list and defaults are what echo_config prints.
struct RunConfig {
    std::string experiment;
    Task task = Task::kLandscape;
    std::uint64_t seed = 42;
    std::string out_dir = "runs";

    // task = landscape
    std::string landscape_name = "saddle";
    std::size_t landscape_dim = 2;
    std::size_t linear_rows = 32;
    std::size_t linear_in = 4;
    std::size_t linear_out = 3;
    double linear_noise = 0.1;

    // task = forecast data plumbing; empty path selects the bundled
    // sine-mixture generator of length synthetic_len.
    std::string data_path;
    std::size_t synthetic_len = 800;
    std::size_t lookback = 32;
    std::size_t horizon = 8;
    std::array<double, 3> split = {0.7, 0.1, 0.2};
    std::size_t stride = 1;

    // encoder hyperparameters; patch_len 0 means "one token per variable"
    // (patch spans the whole lookback).
    std::size_t model_d = 8;
    std::size_t model_d_m = 8;
    std::size_t model_patch_len = 0;
    std::size_t model_layers = 1;
    std::size_t align_windows = 3;
    std::size_t align_tokens = 8;

    EEOConfig optimizer;  // optimizer.seed mirrors the top-level seed
    std::size_t batch_size = 0;

    // Mechanism toggles: the ablation key lists what stays ENABLED.
    bool enable_sam = true;
    bool enable_escape = true;
    bool enable_sgld = true;
    bool enable_ema = true;

    std::size_t diag_every = 1;
    std::size_t spectrum_every = 50;
};

// Parses the documented flat key=value format: one assignment per line,
// `#` starts a comment, dotted keys are plain keys. Unknown keys, type
// mismatches, range violations, and duplicate keys are ConfigErrors carrying
// `origin:line:`. Missing required keys are reported together at the end.
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// Reads the file and delegates to parse_config_text. Unreadable file: IoError.
RunConfig parse_config(const std::string& path);

// Canonical echo: every key in fixed order with shortest round-trip decimal
// values. parse(echo(cfg)) reproduces cfg, and echo is a fixed point:
// echo(parse(echo(cfg))) == echo(cfg) byte for byte.
std::string echo_config(const RunConfig& cfg);

}  // namespace eeo
