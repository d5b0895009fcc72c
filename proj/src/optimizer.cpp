#include "eeo/optimizer.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "eeo/errors.hpp"
#include "eeo/matrix.hpp"
#include "eeo/rng.hpp"

namespace eeo {

// ============================================================================
// Config validation
// ============================================================================

void EEOConfig::validate() const {
    auto fail = [](const std::string& what) { throw ValidationError("config: " + what); };
    if (!(eta > 0.0) || !std::isfinite(eta)) fail("eta must be positive and finite");
    if (!(rho >= 0.0) || !std::isfinite(rho)) fail("rho must be >= 0");
    if (!(eps > 0.0) || !std::isfinite(eps)) fail("eps must be positive");
    if (scaling_mode != "identity" && scaling_mode != "abs_param") {
        fail("scaling_mode must be 'identity' or 'abs_param', got '" + scaling_mode + "'");
    }
    if (!(alpha_fd > 0.0) || !std::isfinite(alpha_fd)) fail("alpha_fd must be positive");
    if (!(negcur_kick >= 0.0) || !std::isfinite(negcur_kick)) fail("negcur_kick must be >= 0");
    if (!(grad_trigger >= 0.0) || !std::isfinite(grad_trigger)) fail("grad_trigger must be >= 0");
    if (!(curvature_threshold >= 0.0) || !std::isfinite(curvature_threshold)) {
        fail("curvature_threshold must be >= 0");
    }
    if (probe_iters == 0) fail("probe_iters must be >= 1");
    if (check_every == 0) fail("check_every must be >= 1");
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) fail("temperature must be >= 0");
    if (!(temp_decay > 0.0) || temp_decay > 1.0) fail("temp_decay must lie in (0, 1]");
    if (!(beta >= 0.0) || beta >= 1.0) fail("beta must lie in [0, 1)");
    if (max_steps == 0) fail("max_steps must be >= 1");
}

// ============================================================================
// Mechanism pieces
// ============================================================================

ParamVector scaling(const std::string& mode, const ParamVector& w) {
    ParamVector s(w.dim());
    if (mode == "identity") {
        for (std::size_t i = 0; i < s.dim(); ++i) s[i] = 1.0;
        return s;
    }
    if (mode == "abs_param") {
        for (std::size_t i = 0; i < s.dim(); ++i) s[i] = std::abs(w[i]) + 1e-12;
        return s;
    }
    throw ValidationError("scaling: unknown mode '" + mode + "'");
}

ParamVector outer_perturbation(const ParamVector& w, const ParamVector& g,
                               const EEOConfig& cfg) {
    check_same_dim(w, g, "outer_perturbation");
    if (cfg.rho == 0.0) return ParamVector(w.dim());
    const ParamVector sg = hadamard(scaling(cfg.scaling_mode, w), g);
    const double denom = norm2(sg) + cfg.eps;
    return (cfg.rho / denom) * sg;
}

ParamVector sam_gradient(const Objective& obj, const ParamVector& w, const EEOConfig& cfg,
                         const BatchHandle& batch) {
    const ParamVector g = obj.grad(w, batch);
    g.ensure_finite("sam_gradient: base gradient");
    const ParamVector e = outer_perturbation(w, g, cfg);
    const ParamVector gs = obj.grad(w + e, batch);
    gs.ensure_finite("sam_gradient: perturbed gradient");
    return gs;
}

CurvatureEstimate estimate_min_curvature(const Objective& obj, const ParamVector& w,
                                         const EEOConfig& cfg, std::uint64_t step,
                                         const BatchHandle& batch) {
    const double alpha = cfg.alpha_fd * (1.0 + norm_inf(w));
    auto apply_h = [&](const std::vector<double>& x) {
        return fd_hvp(obj, w, ParamVector(x), alpha, batch).data();
    };

    // Phase one: dominant-magnitude eigenvalue, used only to build the shift.
    const PowerIterationResult top = power_iteration(
        apply_h, w.dim(), cfg.probe_iters, stream_key(cfg.seed, stream::kProbe, 2 * step));

    // Phase two: on (c I - H) the minimum-curvature eigenpair dominates.
    const double c = std::abs(top.lambda) + 1.0;
    auto apply_shifted = [&](const std::vector<double>& x) {
        std::vector<double> y = apply_h(x);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = c * x[i] - y[i];
        return y;
    };
    const PowerIterationResult shifted = power_iteration(
        apply_shifted, w.dim(), cfg.probe_iters,
        stream_key(cfg.seed, stream::kProbe, 2 * step + 1));

    CurvatureEstimate est;
    est.lambda = c - shifted.lambda;
    est.v = ParamVector(shifted.v);
    est.probes_used = 2 * cfg.probe_iters;
    est.alpha_used = alpha;
    return est;
}

EscapeOutcome negcur_escape(const Objective& obj, const ParamVector& w,
                            const CurvatureEstimate& est, const EEOConfig& cfg,
                            const BatchHandle& batch) {
    const ParamVector g = obj.grad(w, batch);
    g.ensure_finite("negcur_escape: gate gradient");

    EscapeOutcome out;
    out.gate_grad_norm = norm2(g);
    const bool gate = out.gate_grad_norm <= cfg.grad_trigger &&
                      est.lambda < -cfg.curvature_threshold;
    if (!gate) {
        out.w = w;
        return out;
    }

    const double kick = cfg.negcur_kick * cfg.rho;
    const ParamVector plus = axpy(w, kick, est.v);
    const ParamVector minus = axpy(w, -kick, est.v);
    const double lp = obj.eval(plus, batch);
    const double lm = obj.eval(minus, batch);
    if (!std::isfinite(lp) || !std::isfinite(lm)) {
        throw NumericError("negcur_escape: trial evaluation is non-finite");
    }
    out.w = (lp <= lm) ? plus : minus;
    out.fired = true;
    return out;
}

ParamVector ema_update(const ParamVector& m, const ParamVector& w, double beta) {
    check_same_dim(m, w, "ema_update");
    if (beta == 0.0) return w;  // shadow tracks the iterate exactly
    ParamVector out(m.dim());
    for (std::size_t i = 0; i < m.dim(); ++i) out[i] = beta * m[i] + (1.0 - beta) * w[i];
    return out;
}

// ============================================================================
// Step and run
// ============================================================================

EEOState init_state(const ParamVector& w0, const EEOConfig& cfg) {
    cfg.validate();
    w0.ensure_finite("init_state: w0");
    EEOState st;
    st.w = w0;
    st.m = w0;  // warm start: the shadow begins at the initial iterate
    st.step = 0;
    st.rng_seed = cfg.seed;
    st.temperature_now = cfg.temperature;
    return st;
}

StepReport eeo_step(const Objective& obj, EEOState& state, const EEOConfig& cfg) {
    if (state.w.dim() != obj.dim()) {
        throw ShapeError("eeo_step: state dimension " + std::to_string(state.w.dim()) +
                         " does not match objective dimension " + std::to_string(obj.dim()));
    }
    try {
        const BatchHandle batch = obj.sample_batch(cfg.seed, state.step);
        StepReport report;

        // Work on locals; commit to the state only when the step succeeds.
        ParamVector w = state.w;

        report.loss_before = obj.eval(w, batch);
        if (!std::isfinite(report.loss_before)) {
            throw NumericError("loss is non-finite before the update");
        }

        const ParamVector g = obj.grad(w, batch);
        g.ensure_finite("base gradient");
        report.grad_norm = norm2(g);

        ParamVector g_step = g;
        if (cfg.rho > 0.0) {
            const ParamVector e = outer_perturbation(w, g, cfg);
            const ParamVector gs = obj.grad(w + e, batch);
            for (std::size_t i = 0; i < gs.dim(); ++i) {
                if (!std::isfinite(gs[i])) {
                    throw NumericError("perturbed gradient is non-finite (||w|| = " +
                                       std::to_string(norm2(w)) + ", ||e_w|| = " +
                                       std::to_string(norm2(e)) + ")");
                }
            }
            g_step = gs;
            report.sam_applied = true;
        }

        w = axpy(w, -cfg.eta, g_step);

        std::optional<CurvatureEstimate> curvature = state.last_curvature;
        std::size_t escaped = state.escaped_count;
        // A zero kick can never move the iterate, so probing would only burn
        // gradient evaluations; disabling escape disables the probe with it.
        if (cfg.negcur_kick > 0.0 && state.step % cfg.check_every == 0) {
            const CurvatureEstimate est =
                estimate_min_curvature(obj, w, cfg, state.step, batch);
            curvature = est;
            report.lambda_min_est = est.lambda;
            EscapeOutcome esc = negcur_escape(obj, w, est, cfg, batch);
            report.gate_grad_norm = esc.gate_grad_norm;
            if (esc.fired) {
                w = std::move(esc.w);
                ++escaped;
                report.escape_fired = true;
            }
        }

        if (state.temperature_now > 0.0) {
            Rng noise_rng = Rng::stream(cfg.seed, stream::kSgld, state.step);
            const double sigma = std::sqrt(2.0 * cfg.eta * state.temperature_now);
            ParamVector noise(noise_rng.gauss_vector(w.dim()));
            double nn = 0.0;
            for (std::size_t i = 0; i < w.dim(); ++i) {
                noise[i] *= sigma;
                nn += noise[i] * noise[i];
            }
            w = w + noise;
            report.noise_norm = std::sqrt(nn);
        }

        report.loss_after = obj.eval(w, batch);
        if (!std::isfinite(report.loss_after)) {
            throw NumericError("loss is non-finite after the update");
        }

        // Commit.
        state.m = ema_update(state.m, w, cfg.beta);
        state.w = std::move(w);
        state.last_curvature = std::move(curvature);
        state.escaped_count = escaped;
        state.temperature_now *= cfg.temp_decay;
        state.step += 1;
        return report;
    } catch (const NumericError& e) {
        throw NumericError("step " + std::to_string(state.step) + ": " + e.what());
    }
}

RunResult run(const Objective& obj, const ParamVector& w0, const EEOConfig& cfg) {
    EEOState state = init_state(w0, cfg);
    RunResult result;
    result.history.reserve(cfg.max_steps);
    for (std::size_t t = 0; t < cfg.max_steps; ++t) {
        const StepReport report = eeo_step(obj, state, cfg);
        result.history.push_back(report);
        // Stationary enough and provably clear of negative curvature: stop.
        if (report.grad_norm <= 1e-10 && state.last_curvature &&
            state.last_curvature->lambda >= -cfg.curvature_threshold) {
            break;
        }
    }
    result.final = state.m;
    result.state = std::move(state);
    return result;
}

}  // namespace eeo
