#include "eeo/landscapes.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "eeo/errors.hpp"
#include "eeo/rng.hpp"

namespace eeo {

// ============================================================================
// QuadraticLandscape
// ============================================================================

QuadraticLandscape::QuadraticLandscape(Matrix a, std::vector<double> b)
    : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() != a_.cols()) {
        throw ValidationError("quadratic landscape: A must be square, got " +
                              std::to_string(a_.rows()) + "x" + std::to_string(a_.cols()));
    }
    double scale = 0.0;
    for (double x : a_.data()) scale = std::max(scale, std::abs(x));
    for (std::size_t i = 0; i < a_.rows(); ++i) {
        for (std::size_t j = i + 1; j < a_.cols(); ++j) {
            if (std::abs(a_(i, j) - a_(j, i)) > 1e-12 * std::max(1.0, scale)) {
                throw ValidationError("quadratic landscape: A is not symmetric at (" +
                                      std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
    if (b_.dim() == 0) b_ = ParamVector(a_.rows());
    if (b_.dim() != a_.rows()) {
        throw ValidationError("quadratic landscape: b has dimension " +
                              std::to_string(b_.dim()) + ", A is " + std::to_string(a_.rows()) +
                              "x" + std::to_string(a_.cols()));
    }
    b_.ensure_finite("quadratic landscape b");
    // Gradient-Lipschitz constant: the spectral norm of A.
    smoothness_ = (a_.rows() > 0) ? spectral_norm(a_) : 0.0;
}

double QuadraticLandscape::eval(const ParamVector& w, const BatchHandle&) const {
    check_same_dim(w, b_, "quadratic eval");
    double quad = 0.0;
    for (std::size_t i = 0; i < a_.rows(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < a_.cols(); ++j) row += a_(i, j) * w[j];
        quad += w[i] * row;
    }
    return 0.5 * quad + dot(b_, w);
}

ParamVector QuadraticLandscape::grad(const ParamVector& w, const BatchHandle&) const {
    check_same_dim(w, b_, "quadratic grad");
    ParamVector g(w.dim());
    for (std::size_t i = 0; i < a_.rows(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < a_.cols(); ++j) row += a_(i, j) * w[j];
        g[i] = row + b_[i];
    }
    return g;
}

// ============================================================================
// SaddleLandscape
// ============================================================================

double SaddleLandscape::eval(const ParamVector& w, const BatchHandle&) const {
    if (w.dim() != 2) throw ShapeError("saddle eval: expected dimension 2");
    return w[0] * w[0] - w[1] * w[1];
}

ParamVector SaddleLandscape::grad(const ParamVector& w, const BatchHandle&) const {
    if (w.dim() != 2) throw ShapeError("saddle grad: expected dimension 2");
    ParamVector g(2);
    g[0] = 2.0 * w[0];
    g[1] = -2.0 * w[1];
    return g;
}

// ============================================================================
// CubicLandscape
// ============================================================================

CubicLandscape::CubicLandscape(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) throw ValidationError("cubic landscape: dimension must be positive");
}

double CubicLandscape::eval(const ParamVector& w, const BatchHandle&) const {
    if (w.dim() != dim_) throw ShapeError("cubic eval: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += w[i] * w[i] * w[i];
    return s;
}

ParamVector CubicLandscape::grad(const ParamVector& w, const BatchHandle&) const {
    if (w.dim() != dim_) throw ShapeError("cubic grad: dimension mismatch");
    ParamVector g(dim_);
    for (std::size_t i = 0; i < dim_; ++i) g[i] = 3.0 * w[i] * w[i];
    return g;
}

ParamVector CubicLandscape::hessian_times(const ParamVector& w, const ParamVector& v) const {
    check_same_dim(w, v, "cubic hessian_times");
    ParamVector out(dim_);
    for (std::size_t i = 0; i < dim_; ++i) out[i] = 6.0 * w[i] * v[i];
    return out;
}

// ============================================================================
// TwoWellLandscape
// ============================================================================

namespace {
inline double well_bump(double x) { return std::exp(-200.0 * (x - 1.0) * (x - 1.0)); }
}

double TwoWellLandscape::eval(const ParamVector& w, const BatchHandle&) const {
    if (w.dim() != 1) throw ShapeError("two_well eval: expected dimension 1");
    const double x = w[0];
    const double q = (x * x - 1.0) * (x * x - 1.0);
    return q - 0.3 * well_bump(x);
}

ParamVector TwoWellLandscape::grad(const ParamVector& w, const BatchHandle&) const {
    if (w.dim() != 1) throw ShapeError("two_well grad: expected dimension 1");
    const double x = w[0];
    ParamVector g(1);
    g[0] = 4.0 * x * (x * x - 1.0) + 120.0 * (x - 1.0) * well_bump(x);
    return g;
}

double TwoWellLandscape::second_derivative(double x) const {
    const double u = x - 1.0;
    return 12.0 * x * x - 4.0 + 120.0 * well_bump(x) * (1.0 - 400.0 * u * u);
}

// ============================================================================
// ToyLinearLandscape
// ============================================================================

ToyLinearLandscape::ToyLinearLandscape(std::size_t rows, std::size_t in, std::size_t out,
                                       double noise, std::uint64_t seed)
    : rows_(rows), in_(in), out_(out) {
    if (rows_ == 0 || in_ == 0 || out_ == 0) {
        throw ValidationError("toy_linear landscape: all dimensions must be positive");
    }
    if (noise < 0.0) {
        throw ValidationError("toy_linear landscape: noise scale must be >= 0");
    }
    Rng rx = Rng::stream(seed, stream::kLandscape, 0);
    x_ = Matrix::gaussian(rows_, in_, rx);
    Rng rw = Rng::stream(seed, stream::kLandscape, 1);
    w_gen_ = Matrix::gaussian(in_, out_, rw);
    Rng re = Rng::stream(seed, stream::kLandscape, 2);
    y_ = matmul(x_, w_gen_);
    for (auto& v : y_.data()) v += noise * re.gauss();

    const double sx = spectral_norm(x_);
    smoothness_ = 2.0 * sx * sx / static_cast<double>(rows_);
}

Matrix ToyLinearLandscape::reshape(const ParamVector& w) const {
    if (w.dim() != in_ * out_) {
        throw ShapeError("toy_linear: parameter dimension " + std::to_string(w.dim()) +
                         ", expected " + std::to_string(in_ * out_));
    }
    return Matrix(in_, out_, w.data());
}

double ToyLinearLandscape::eval(const ParamVector& w, const BatchHandle&) const {
    const Matrix r = matmul(x_, reshape(w));
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double d = r.data()[i] - y_.data()[i];
        s += d * d;
    }
    return s / static_cast<double>(rows_);
}

ParamVector ToyLinearLandscape::grad(const ParamVector& w, const BatchHandle&) const {
    Matrix r = matmul(x_, reshape(w));
    for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] -= y_.data()[i];
    const Matrix g = matmul(transpose(x_), r);  // in x out
    ParamVector out(g.data());
    const double scale = 2.0 / static_cast<double>(rows_);
    for (std::size_t i = 0; i < out.dim(); ++i) out[i] *= scale;
    return out;
}

ParamVector ToyLinearLandscape::generating_params() const {
    return ParamVector(w_gen_.data());
}

// ============================================================================
// Factory
// ============================================================================

std::unique_ptr<Objective> builtin_landscape(const LandscapeSpec& spec) {
    if (spec.name == "quadratic") {
        Matrix a = spec.quadratic_a ? *spec.quadratic_a : Matrix::identity(spec.dim);
        return std::make_unique<QuadraticLandscape>(std::move(a), spec.quadratic_b);
    }
    if (spec.name == "saddle") {
        return std::make_unique<SaddleLandscape>();
    }
    if (spec.name == "cubic") {
        return std::make_unique<CubicLandscape>(spec.dim);
    }
    if (spec.name == "two_well") {
        return std::make_unique<TwoWellLandscape>();
    }
    if (spec.name == "toy_linear") {
        return std::make_unique<ToyLinearLandscape>(spec.linear_rows, spec.linear_in,
                                                    spec.linear_out, spec.linear_noise,
                                                    spec.seed);
    }
    throw ValidationError("builtin_landscape: unknown landscape '" + spec.name + "'");
}

}  // namespace eeo
