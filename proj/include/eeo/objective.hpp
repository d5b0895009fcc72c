#pragma once

#include <cstdint>
#include <optional>

#include "eeo/param_vector.hpp"

namespace eeo {

// Identifies the minibatch an evaluation should use. Objectives resolve the
// handle deterministically (same handle, same subset); deterministic
// objectives ignore it entirely. Default-constructed handle = full batch.
struct BatchHandle {
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
};

// Contract every trainable objective satisfies: a smooth scalar loss over a
// flat parameter vector with an analytic gradient, plus optional curvature
// metadata used by bound checks.
class Objective {
public:
    virtual ~Objective() = default;

    virtual std::size_t dim() const = 0;
    virtual double eval(const ParamVector& w, const BatchHandle& batch = {}) const = 0;
    virtual ParamVector grad(const ParamVector& w, const BatchHandle& batch = {}) const = 0;

    // Deterministic batch selection keyed by (seed, step).
    virtual BatchHandle sample_batch(std::uint64_t seed, std::uint64_t step) const {
        return BatchHandle{seed, step};
    }

    // Gradient-Lipschitz constant, when known.
    virtual std::optional<double> smoothness() const { return std::nullopt; }
    // Hessian-Lipschitz constant, when known.
    virtual std::optional<double> hessian_lipschitz() const { return std::nullopt; }
};

// Default finite-difference steps, scaled by the iterate's magnitude.
double default_grad_step(const ParamVector& w);  // 1e-5 * (1 + ||w||_inf)
double default_hvp_step(const ParamVector& w);   // 1e-3 * (1 + ||w||_inf)

// Central-difference gradient at a fixed batch; h must be positive.
ParamVector fd_grad(const Objective& obj, const ParamVector& w, double h,
                    const BatchHandle& batch = {});

// Central-difference Hessian-vector product
//   (g(w + alpha v) - g(w - alpha v)) / (2 alpha).
// Requires ||v|| >= 1e-12 and alpha > 0.
ParamVector fd_hvp(const Objective& obj, const ParamVector& w, const ParamVector& v,
                   double alpha, const BatchHandle& batch = {});

// Rayleigh quotient v' H v / v' v through the finite-difference product.
double rayleigh(const Objective& obj, const ParamVector& w, const ParamVector& v,
                double alpha, const BatchHandle& batch = {});

// Sampling estimate of the robust objective max_{||delta|| <= rho} L(w + delta):
// the max of L(w) and L at rho-scaled probe directions. Half the directions
// are structured (+-g/||g||, then +- coordinate axes while they fit), the rest
// uniform on the sphere from the seeded stream. n_samples >= 2, rho >= 0.
double robust_objective_estimate(const Objective& obj, const ParamVector& w, double rho,
                                 std::size_t n_samples, std::uint64_t seed,
                                 const BatchHandle& batch = {});

}  // namespace eeo
