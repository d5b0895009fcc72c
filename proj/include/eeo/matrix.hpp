#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "eeo/errors.hpp"

namespace eeo {

class Rng;

// ============================================================================
// Dense row-major matrix of doubles. Desk-scale linear algebra: correctness
// and determinism over throughput.
// ============================================================================
class Matrix {
public:
    Matrix() = default;

    // Zero-filled rows x cols matrix.
    Matrix(std::size_t rows, std::size_t cols);

    // Takes ownership of row-major data; validates length and finiteness.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(const std::vector<double>& entries);
    // Entries i.i.d. N(0,1) drawn row-major from rng.
    static Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    // Throws NumericError naming the first non-finite element.
    void ensure_finite(const char* label) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Descending, non-negative singular values together with the source shape.
struct SingularSpectrum {
    std::vector<double> values;
    std::size_t source_rows = 0;
    std::size_t source_cols = 0;

    SingularSpectrum() = default;
    // Validates ordering, non-negativity, and length == min(rows, cols).
    SingularSpectrum(std::vector<double> vals, std::size_t rows, std::size_t cols);
};

struct PowerIterationResult {
    double lambda = 0.0;          // Rayleigh quotient v' * apply(v)
    std::vector<double> v;        // unit 2-norm
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// C = A * B. Throws ShapeError naming both shapes on inner-dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// A + B elementwise; ShapeError on mismatch.
Matrix add(const Matrix& a, const Matrix& b);

// alpha * A.
Matrix scale(const Matrix& a, double alpha);

// Row-wise softmax with per-row max subtraction; rows sum to 1.
Matrix softmax_rows(const Matrix& m);

double frobenius_norm(const Matrix& m);

// Full singular spectrum by cyclic one-sided Jacobi. Requires
// min(rows, cols) <= 512; converges when every column-pair inner product of
// the working matrix falls below 1e-12 * ||M||_F^2, within 30 sweeps,
// otherwise throws ConvergenceError reporting the worst residual.
SingularSpectrum singular_values(const Matrix& m);

// Sum of singular values.
double nuclear_norm(const Matrix& m);

// Largest singular value.
double spectral_norm(const Matrix& m);

// exp(Shannon entropy of the normalized spectrum): S * exp(-sum s_i ln s_i / S)
// with zero singular values skipped. Throws ValidationError when the spectrum
// is all zero. Lies in [1, min(rows, cols)]; scale-invariant.
double effective_rank(const SingularSpectrum& spectrum);

// Power iteration on a matrix-free symmetric operator. The start vector is
// drawn from the seeded stream and redrawn once if its first Rayleigh
// quotient is exactly zero. Runs exactly `iters` multiply-normalize steps.
PowerIterationResult power_iteration(
    const std::function<std::vector<double>(const std::vector<double>&)>& apply,
    std::size_t dim, std::size_t iters, std::uint64_t seed);

}  // namespace eeo
