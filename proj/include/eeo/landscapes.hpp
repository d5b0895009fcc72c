#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eeo/matrix.hpp"
#include "eeo/objective.hpp"

namespace eeo {

// Construction recipe for a builtin test landscape. Only the fields relevant
// to the named landscape are consulted.
struct LandscapeSpec {
    std::string name;        // quadratic | saddle | cubic | two_well | toy_linear
    std::uint64_t seed = 0;

    // quadratic / cubic
    std::size_t dim = 2;
    std::optional<Matrix> quadratic_a;   // symmetric; identity(dim) when absent
    std::vector<double> quadratic_b;     // zeros when empty

    // toy_linear
    std::size_t linear_rows = 32;  // sample count n
    std::size_t linear_in = 4;     // regressor columns
    std::size_t linear_out = 3;    // target columns
    double linear_noise = 0.1;     // Gaussian noise scale on the targets
};

// L(w) = 1/2 w'Aw + b'w with symmetric A. Exact Hessian A.
class QuadraticLandscape : public Objective {
public:
    QuadraticLandscape(Matrix a, std::vector<double> b);
    std::size_t dim() const override { return a_.rows(); }
    double eval(const ParamVector& w, const BatchHandle& batch = {}) const override;
    ParamVector grad(const ParamVector& w, const BatchHandle& batch = {}) const override;
    std::optional<double> smoothness() const override { return smoothness_; }
    std::optional<double> hessian_lipschitz() const override { return 0.0; }
    const Matrix& hessian() const { return a_; }

private:
    Matrix a_;
    ParamVector b_;
    double smoothness_ = 0.0;
};

// L(x, y) = x^2 - y^2: the canonical strict saddle at the origin.
class SaddleLandscape : public Objective {
public:
    std::size_t dim() const override { return 2; }
    double eval(const ParamVector& w, const BatchHandle& batch = {}) const override;
    ParamVector grad(const ParamVector& w, const BatchHandle& batch = {}) const override;
    std::optional<double> smoothness() const override { return 2.0; }
    std::optional<double> hessian_lipschitz() const override { return 0.0; }
};

// L(w) = sum_i w_i^3. Hessian 6 diag(w); Hessian-Lipschitz constant 6.
class CubicLandscape : public Objective {
public:
    explicit CubicLandscape(std::size_t dim);
    std::size_t dim() const override { return dim_; }
    double eval(const ParamVector& w, const BatchHandle& batch = {}) const override;
    ParamVector grad(const ParamVector& w, const BatchHandle& batch = {}) const override;
    std::optional<double> hessian_lipschitz() const override { return 6.0; }
    ParamVector hessian_times(const ParamVector& w, const ParamVector& v) const;

private:
    std::size_t dim_;
};

// One-dimensional double well
//   L(x) = (x^2 - 1)^2 - 0.3 exp(-200 (x - 1)^2):
// a sharp, deep minimum at x = +1 (curvature 128) and a flat, shallow one at
// x = -1 (curvature 8).
class TwoWellLandscape : public Objective {
public:
    std::size_t dim() const override { return 1; }
    double eval(const ParamVector& w, const BatchHandle& batch = {}) const override;
    ParamVector grad(const ParamVector& w, const BatchHandle& batch = {}) const override;
    double second_derivative(double x) const;
};

// Linear regression on a seeded synthetic design:
//   L(W) = ||X W - Y||_F^2 / n,  Y = X W_gen + noise.
// Parameters are W flattened row-major (linear_in x linear_out).
class ToyLinearLandscape : public Objective {
public:
    ToyLinearLandscape(std::size_t rows, std::size_t in, std::size_t out, double noise,
                       std::uint64_t seed);
    std::size_t dim() const override { return in_ * out_; }
    double eval(const ParamVector& w, const BatchHandle& batch = {}) const override;
    ParamVector grad(const ParamVector& w, const BatchHandle& batch = {}) const override;
    std::optional<double> smoothness() const override { return smoothness_; }
    std::optional<double> hessian_lipschitz() const override { return 0.0; }

    const Matrix& design() const { return x_; }
    const Matrix& targets() const { return y_; }
    ParamVector generating_params() const;

private:
    Matrix reshape(const ParamVector& w) const;
    std::size_t rows_, in_, out_;
    Matrix x_, y_, w_gen_;
    double smoothness_ = 0.0;
};

// Builds the named landscape after validating its parameters.
std::unique_ptr<Objective> builtin_landscape(const LandscapeSpec& spec);

}  // namespace eeo
