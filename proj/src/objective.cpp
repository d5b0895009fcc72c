#include "eeo/objective.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "eeo/errors.hpp"
#include "eeo/rng.hpp"

namespace eeo {

double default_grad_step(const ParamVector& w) { return 1e-5 * (1.0 + norm_inf(w)); }

double default_hvp_step(const ParamVector& w) { return 1e-3 * (1.0 + norm_inf(w)); }

namespace {

void check_point(const Objective& obj, const ParamVector& w, const char* op) {
    if (w.dim() != obj.dim()) {
        throw ShapeError(std::string(op) + ": point has dimension " + std::to_string(w.dim()) +
                         ", objective expects " + std::to_string(obj.dim()));
    }
    w.ensure_finite(op);
}

double checked_eval(const Objective& obj, const ParamVector& w, const BatchHandle& batch,
                    const char* op) {
    const double v = obj.eval(w, batch);
    if (!std::isfinite(v)) {
        throw NumericError(std::string(op) + ": objective evaluated to a non-finite value");
    }
    return v;
}

}  // namespace

ParamVector fd_grad(const Objective& obj, const ParamVector& w, double h,
                    const BatchHandle& batch) {
    check_point(obj, w, "fd_grad");
    if (!(h > 0.0)) throw ValidationError("fd_grad: step h must be positive");

    ParamVector g(w.dim());
    ParamVector probe = w;
    for (std::size_t i = 0; i < w.dim(); ++i) {
        const double wi = w[i];
        probe[i] = wi + h;
        const double fp = checked_eval(obj, probe, batch, "fd_grad");
        probe[i] = wi - h;
        const double fm = checked_eval(obj, probe, batch, "fd_grad");
        probe[i] = wi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

ParamVector fd_hvp(const Objective& obj, const ParamVector& w, const ParamVector& v,
                   double alpha, const BatchHandle& batch) {
    check_point(obj, w, "fd_hvp");
    check_same_dim(w, v, "fd_hvp");
    if (!(alpha > 0.0)) throw ValidationError("fd_hvp: step alpha must be positive");
    if (norm2(v) < 1e-12) {
        throw ValidationError("fd_hvp: direction norm below 1e-12");
    }

    const ParamVector gp = obj.grad(axpy(w, alpha, v), batch);
    const ParamVector gm = obj.grad(axpy(w, -alpha, v), batch);
    gp.ensure_finite("fd_hvp: gradient at w+alpha*v");
    gm.ensure_finite("fd_hvp: gradient at w-alpha*v");
    return (1.0 / (2.0 * alpha)) * (gp - gm);
}

double rayleigh(const Objective& obj, const ParamVector& w, const ParamVector& v,
                double alpha, const BatchHandle& batch) {
    const ParamVector hv = fd_hvp(obj, w, v, alpha, batch);
    return dot(v, hv) / dot(v, v);
}

double robust_objective_estimate(const Objective& obj, const ParamVector& w, double rho,
                                 std::size_t n_samples, std::uint64_t seed,
                                 const BatchHandle& batch) {
    check_point(obj, w, "robust_objective_estimate");
    if (rho < 0.0) throw ValidationError("robust_objective_estimate: rho must be >= 0");
    if (n_samples < 2) {
        throw ValidationError("robust_objective_estimate: need at least 2 samples");
    }

    double best = checked_eval(obj, w, batch, "robust_objective_estimate");
    if (rho == 0.0) return best;

    const std::size_t dim = w.dim();
    const std::size_t structured_budget = (n_samples + 1) / 2;

    std::vector<ParamVector> dirs;
    dirs.reserve(n_samples);

    // Structured probes: the gradient ray both ways, then signed coordinate
    // axes while the budget and a small dimension allow.
    const ParamVector g = obj.grad(w, batch);
    const double gn = norm2(g);
    if (gn > 0.0) {
        dirs.push_back((1.0 / gn) * g);
        if (dirs.size() < structured_budget) dirs.push_back((-1.0 / gn) * g);
    }
    if (2 * dim <= structured_budget) {
        for (std::size_t i = 0; i < dim && dirs.size() + 2 <= structured_budget; ++i) {
            ParamVector e(dim);
            e[i] = 1.0;
            dirs.push_back(e);
            e[i] = -1.0;
            dirs.push_back(e);
        }
    }

    Rng rng = Rng::stream(seed, stream::kRobust, 0);
    while (dirs.size() < n_samples) {
        dirs.push_back(ParamVector(rng.unit_vector(dim)));
    }

    for (const ParamVector& u : dirs) {
        best = std::max(best, checked_eval(obj, axpy(w, rho, u), batch,
                                           "robust_objective_estimate"));
    }
    return best;
}

}  // namespace eeo
