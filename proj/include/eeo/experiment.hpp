#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "eeo/config.hpp"
#include "eeo/diagnostics.hpp"
#include "eeo/objective.hpp"

namespace eeo {

// Binary parameter checkpoint: an 8-byte little-endian entry count followed
// by the entries as little-endian IEEE-754 doubles. save -> load round-trips
// bit-exactly.
void checkpoint_save(const std::string& path, const ParamVector& w);

// expected_dim = 0 accepts any dimension. Truncated or oversized payloads
// are IoError; a dimension different from expected_dim is ShapeError;
// non-finite entries are NumericError.
ParamVector checkpoint_load(const std::string& path, std::size_t expected_dim = 0);

struct SplitMetrics {
    double mse = 0.0;
    double mae = 0.0;
};

// Everything one experiment run leaves behind, both on disk and in memory.
// Forecast runs fill the split metrics and the repeat-last baseline; the
// other tasks only have final_loss. Timestamps are the single nondeterministic
// output of a run.
struct RunLog {
    std::string config_echo;         // byte-identical to echo_config(parsed cfg)
    std::string started_at;          // UTC, second resolution
    std::string finished_at;
    std::string run_dir;             // out_dir/experiment
    std::string metrics_path;        // <run_dir>/metrics.csv
    std::string checkpoint_path;     // <run_dir>/checkpoint.bin
    std::string generator_id;        // PRNG scheme identifier
    std::uint64_t seed = 0;
    std::size_t steps_run = 0;
    std::size_t escaped_count = 0;
    double final_loss = 0.0;         // full objective at the returned params
    std::optional<SplitMetrics> train;
    std::optional<SplitMetrics> val;
    std::optional<SplitMetrics> test;
    std::optional<SplitMetrics> baseline_test;  // repeat-last-value forecast
    std::vector<DiagnosticsRecord> history;
    ParamVector final_params;        // EMA shadow (raw iterate when ema is off)
};

// Runs one experiment end to end: builds the task objective, applies the
// ablation toggles to the optimizer (sam off => rho 0, escape off =>
// negcur_kick 0, sgld off => temperature 0, ema off => beta 0), optimizes,
// and writes metrics.csv, spectrum snapshots, checkpoint.bin, and run.json
// into out_dir/experiment. Deterministic given (config, seed) except the
// timestamps. On failure every partial output is removed and the error is
// rethrown with the experiment name prefixed.
RunLog run_experiment(const RunConfig& cfg);

// Verification suite for the optimizer's three supporting bounds. `which` is
// one of lemma2 | lemma3 | lemma4 | all. Writes a human-readable report to
// `out` and returns overall pass. Failures are report content, not errors.
bool lemma_check(const std::string& which, std::uint64_t seed, std::ostream& out);

// Audits every analytic gradient in the library (all builtin landscapes plus
// both encoder objectives) against central differences at 10 seeded points
// each, relative tolerance 1e-4. One report line per objective; returns
// overall pass.
bool gradient_check(std::ostream& out);

// Loads the checkpoint under the config's task objective (dimension-checked)
// and reports loss, gradient norm, the minimum-curvature estimate, and the
// representation/attention statistics where the task has them.
void diagnose_checkpoint(const RunConfig& cfg, const std::string& checkpoint_path,
                         std::ostream& out);

}  // namespace eeo
