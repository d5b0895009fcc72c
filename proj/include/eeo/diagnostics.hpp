#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eeo/matrix.hpp"
#include "eeo/optimizer.hpp"

namespace eeo {

// One step's worth of training telemetry. The four representation fields and
// the spectrum are present only when the run has a model to inspect
// (landscape-only runs leave them empty); lambda_min is present only on steps
// where the curvature probe ran.
struct DiagnosticsRecord {
    std::uint64_t step = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
    std::optional<double> lambda_min;
    bool escape_fired = false;
    std::optional<double> erank_repr;
    std::optional<double> erank_attn;
    std::optional<double> nuclear_attn;
    std::optional<double> attn_entropy;
    std::optional<SingularSpectrum> spectrum_repr;
};

// Mean over rows of the natural-log entropy -sum_j A[i][j] ln A[i][j],
// with 0 ln 0 = 0. Rows must be stochastic: entries >= 0 and sums within
// 1e-9 of 1, else ValidationError. Result lies in [0, ln N].
double attention_entropy(const Matrix& a);

// Assembles the record for one step from the optimizer's report plus the
// model's last-block representation and attention matrices. The singular
// spectrum of z_repr is attached only when full_spectrum is set (SVD cost
// control); the scalar summaries are always computed.
DiagnosticsRecord snapshot(std::uint64_t step, const StepReport& report,
                           const Matrix& z_repr, const Matrix& a, bool full_spectrum);

// True iff the minimum erank_repr over the trailing `window` records falls
// below drop_frac times the maximum erank_repr over the whole history.
// Records without erank_repr are ignored. window >= 1; 0 < drop_frac < 1.
bool rank_collapse_flag(const std::vector<DiagnosticsRecord>& history,
                        std::size_t window = 20, double drop_frac = 0.5);

// Writes metrics.csv (one row per record, columns exactly
// step,loss,grad_norm,lambda_min,escape_fired,erank_repr,erank_attn,
// nuclear_attn,attn_entropy) into out_dir, plus spectrum_<step>.csv
// (columns index,sigma) for every record carrying a spectrum. Numbers are
// printed in shortest round-trip decimal; absent optionals become empty
// fields; flags are 0/1.
void export_diagnostics(const std::vector<DiagnosticsRecord>& history,
                        const std::string& out_dir);

// Reads back a metrics.csv produced by export_diagnostics, exactly
// (spectra travel in their own files and are not re-attached).
std::vector<DiagnosticsRecord> import_metrics(const std::string& path);

// Reads back one spectrum_<step>.csv as the ordered singular values.
std::vector<double> import_spectrum(const std::string& path);

}  // namespace eeo
