#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eeo/objective.hpp"
#include "eeo/param_vector.hpp"

namespace eeo {

// Tunables of the escape-explore optimizer. Immutable once validated; every
// knob is independent so mechanisms can be switched off individually:
// rho = 0 disables the sharpness-seeking perturbation, negcur_kick = 0
// disables curvature probing and escape kicks, temperature = 0 disables
// Langevin noise, beta = 0 disables averaging (the shadow tracks w exactly).
struct EEOConfig {
    double eta = 1e-3;                    // step size, > 0
    double rho = 0.05;                    // perturbation radius, >= 0
    double eps = 1e-12;                   // perturbation denominator guard, > 0
    std::string scaling_mode = "identity";  // identity | abs_param
    double alpha_fd = 1e-3;               // HVP step base, scaled by (1 + ||w||_inf)
    double negcur_kick = 1.0;             // escape kick = negcur_kick * rho, >= 0
    double grad_trigger = 1e-2;           // escape gate on the gradient norm, >= 0
    double curvature_threshold = 1e-3;    // escape gate on lambda_min, >= 0
    std::size_t probe_iters = 20;         // power-iteration budget per phase, >= 1
    std::size_t check_every = 10;         // probe cadence in steps, >= 1
    double temperature = 1e-4;            // initial Langevin temperature, >= 0
    double temp_decay = 0.999;            // per-step temperature factor, in (0, 1]
    double beta = 0.999;                  // averaging coefficient, in [0, 1)
    std::uint64_t seed = 42;
    std::size_t max_steps = 1000;         // >= 1

    void validate() const;  // throws ValidationError naming the bad field
};

// Result of one two-phase curvature probe.
struct CurvatureEstimate {
    double lambda = 0.0;        // smallest-eigenvalue estimate
    ParamVector v;              // unit direction achieving it
    std::size_t probes_used = 0;  // power-iteration steps across both phases
    double alpha_used = 0.0;    // effective finite-difference step
};

// Everything observable about a single optimizer step.
struct StepReport {
    double loss_before = 0.0;   // at the incoming iterate, on this step's batch
    double loss_after = 0.0;    // at the outgoing iterate, same batch
    double grad_norm = 0.0;     // base gradient norm at the incoming iterate
    bool sam_applied = false;
    bool escape_fired = false;
    std::optional<double> lambda_min_est;   // present when the probe ran
    std::optional<double> gate_grad_norm;   // gradient norm at the escape gate
    double noise_norm = 0.0;    // Langevin noise magnitude added this step
};

// Mutable optimizer state.
struct EEOState {
    ParamVector w;      // current iterate
    ParamVector m;      // averaged shadow, warm-started at w0
    std::size_t step = 0;
    std::uint64_t rng_seed = 0;   // base seed; streams derive from (seed, stream, step)
    std::optional<CurvatureEstimate> last_curvature;
    std::size_t escaped_count = 0;
    double temperature_now = 0.0;
};

struct EscapeOutcome {
    ParamVector w;
    bool fired = false;
    double gate_grad_norm = 0.0;
};

struct RunResult {
    ParamVector final;               // the averaged shadow m
    std::vector<StepReport> history;
    EEOState state;
};

// Per-coordinate scaling s(w): ones for "identity", |w_i| + 1e-12 for
// "abs_param". Unknown mode names are rejected.
ParamVector scaling(const std::string& mode, const ParamVector& w);

// Sharpness-seeking offset e_w = rho * (s(w) .* g) / (||s(w) .* g||_2 + eps).
// Norm never exceeds rho; zero when rho = 0 or the scaled gradient vanishes.
ParamVector outer_perturbation(const ParamVector& w, const ParamVector& g,
                               const EEOConfig& cfg);

// Gradient at the perturbed point w + e_w, with e_w built from the base
// gradient at w on the same batch.
ParamVector sam_gradient(const Objective& obj, const ParamVector& w, const EEOConfig& cfg,
                         const BatchHandle& batch = {});

// Two-phase shifted power iteration through finite-difference Hessian
// products: phase one estimates the dominant-magnitude eigenvalue, phase two
// runs on (c I - H) with c = |lambda_top| + 1 so its dominant eigenpair is
// the minimum-curvature one.
CurvatureEstimate estimate_min_curvature(const Objective& obj, const ParamVector& w,
                                         const EEOConfig& cfg, std::uint64_t step = 0,
                                         const BatchHandle& batch = {});

// Kick w along +-v by negcur_kick * rho iff both escape gates pass
// (gradient norm <= grad_trigger and lambda < -curvature_threshold); the sign
// is chosen by two trial evaluations.
EscapeOutcome negcur_escape(const Objective& obj, const ParamVector& w,
                            const CurvatureEstimate& est, const EEOConfig& cfg,
                            const BatchHandle& batch = {});

// Averaged-shadow update m' = beta m + (1 - beta) w.
ParamVector ema_update(const ParamVector& m, const ParamVector& w, double beta);

// Fresh state at w0: shadow warm-started at w0, temperature at its initial
// value, step counter zero.
EEOState init_state(const ParamVector& w0, const EEOConfig& cfg);

// One full optimizer step: batch draw, base gradient, perturbed gradient,
// descent update, periodic curvature probe + escape, Langevin noise, shadow
// update, temperature decay. State is committed only if the step succeeds;
// numeric failures surface with the step index attached.
StepReport eeo_step(const Objective& obj, EEOState& state, const EEOConfig& cfg);

// Runs up to max_steps, stopping early once the gradient norm falls to 1e-10
// with the last curvature estimate clear of the escape threshold. Returns the
// averaged shadow as the final iterate.
RunResult run(const Objective& obj, const ParamVector& w0, const EEOConfig& cfg);

}  // namespace eeo
