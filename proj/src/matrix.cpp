#include "eeo/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eeo/rng.hpp"

namespace eeo {

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace

// ============================================================================
// Matrix
// ============================================================================

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("matrix: data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(rows_, cols_));
    }
    ensure_finite("matrix");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(const std::vector<double>& entries) {
    Matrix m(entries.size(), entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) m(i, i) = entries[i];
    m.ensure_finite("diagonal");
    return m;
}

Matrix Matrix::gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (auto& x : m.data()) x = rng.gauss();
    return m;
}

void Matrix::ensure_finite(const char* label) const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw NumericError(std::string(label) + ": non-finite element at (" +
                               std::to_string(i / cols_) + "," + std::to_string(i % cols_) + ")");
        }
    }
}

// ============================================================================
// SingularSpectrum
// ============================================================================

SingularSpectrum::SingularSpectrum(std::vector<double> vals, std::size_t rows, std::size_t cols)
    : values(std::move(vals)), source_rows(rows), source_cols(cols) {
    if (values.size() != std::min(rows, cols)) {
        throw ShapeError("singular spectrum: expected " +
                         std::to_string(std::min(rows, cols)) + " values for source " +
                         shape_str(rows, cols) + ", got " + std::to_string(values.size()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]) || values[i] < 0.0) {
            throw ValidationError("singular spectrum: value " + std::to_string(i) +
                                  " is negative or non-finite");
        }
        if (i > 0 && values[i] > values[i - 1]) {
            throw ValidationError("singular spectrum: values not sorted descending at index " +
                                  std::to_string(i));
        }
    }
}

// ============================================================================
// Basic operations
// ============================================================================

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: dimension mismatch " + shape_str(a.rows(), a.cols()) +
                         " * " + shape_str(b.rows(), b.cols()));
    }
    Matrix c(a.rows(), b.cols());
    // i-k-j order: cache-friendly, and for each (i,j) the k-sum still
    // accumulates in ascending order, so results are deterministic.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) {
                c(i, j) += aik * b(k, j);
            }
        }
    }
    c.ensure_finite("matmul result");
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("add: shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
                         shape_str(b.rows(), b.cols()));
    }
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

Matrix scale(const Matrix& a, double alpha) {
    Matrix c = a;
    for (auto& x : c.data()) x *= alpha;
    return c;
}

Matrix softmax_rows(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) {
        throw ValidationError("softmax_rows: empty matrix");
    }
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double mx = m(i, 0);
        for (std::size_t j = 1; j < m.cols(); ++j) mx = std::max(mx, m(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double e = std::exp(m(i, j) - mx);
            out(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) /= sum;
    }
    return out;
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double x : m.data()) s += x * x;
    return std::sqrt(s);
}

// ============================================================================
// One-sided Jacobi SVD
// ============================================================================

SingularSpectrum singular_values(const Matrix& m) {
    const std::size_t small = std::min(m.rows(), m.cols());
    if (small > 512) {
        throw ValidationError("singular_values: min(rows, cols) = " + std::to_string(small) +
                              " exceeds the supported limit of 512");
    }
    if (small == 0) {
        throw ValidationError("singular_values: empty matrix");
    }

    // Work on a tall copy (rows >= cols); M and M^T share singular values.
    Matrix a = (m.rows() >= m.cols()) ? m : transpose(m);
    const std::size_t nrows = a.rows();
    const std::size_t ncols = a.cols();

    double frob2 = 0.0;
    for (double x : a.data()) frob2 += x * x;

    // Column-major working copy: rotations touch column pairs.
    std::vector<std::vector<double>> col(ncols, std::vector<double>(nrows));
    for (std::size_t i = 0; i < nrows; ++i)
        for (std::size_t j = 0; j < ncols; ++j) col[j][i] = a(i, j);

    const double tol = 1e-12 * frob2;
    const int kMaxSweeps = 30;
    bool converged = (frob2 == 0.0);
    double worst = 0.0;

    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        converged = true;
        worst = 0.0;
        for (std::size_t p = 0; p + 1 < ncols; ++p) {
            for (std::size_t q = p + 1; q < ncols; ++q) {
                const double gamma = dot(col[p], col[q]);
                worst = std::max(worst, std::abs(gamma));
                if (std::abs(gamma) <= tol) continue;
                converged = false;
                const double alpha = dot(col[p], col[p]);
                const double beta = dot(col[q], col[q]);
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0)
                                     ? 1.0 / (zeta + std::sqrt(1.0 + zeta * zeta))
                                     : 1.0 / (zeta - std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < nrows; ++i) {
                    const double vp = col[p][i];
                    const double vq = col[q][i];
                    col[p][i] = c * vp - s * vq;
                    col[q][i] = s * vp + c * vq;
                }
            }
        }
    }
    if (!converged) {
        throw ConvergenceError("singular_values: Jacobi sweeps exhausted (30); worst residual "
                               "column inner product " + std::to_string(worst));
    }

    std::vector<double> sigma(ncols);
    for (std::size_t j = 0; j < ncols; ++j) sigma[j] = norm2(col[j]);
    std::sort(sigma.begin(), sigma.end(), std::greater<double>());
    return SingularSpectrum(std::move(sigma), m.rows(), m.cols());
}

double nuclear_norm(const Matrix& m) {
    const SingularSpectrum s = singular_values(m);
    double sum = 0.0;
    for (double v : s.values) sum += v;
    return sum;
}

double spectral_norm(const Matrix& m) {
    return singular_values(m).values.front();
}

// ============================================================================
// Effective rank
// ============================================================================

double effective_rank(const SingularSpectrum& spectrum) {
    double total = 0.0;
    for (double s : spectrum.values) total += s;
    if (total <= 0.0) {
        throw ValidationError("effective_rank: all singular values are zero");
    }
    // S * exp(-sum s ln s / S) == exp(entropy of s/S); exact n for I_n since
    // ln(1) == 0 contributes nothing.
    double slogs = 0.0;
    for (double s : spectrum.values) {
        if (s > 0.0) slogs += s * std::log(s);
    }
    return total * std::exp(-slogs / total);
}

// ============================================================================
// Power iteration
// ============================================================================

PowerIterationResult power_iteration(
    const std::function<std::vector<double>(const std::vector<double>&)>& apply,
    std::size_t dim, std::size_t iters, std::uint64_t seed) {
    if (dim == 0) throw ValidationError("power_iteration: dimension must be positive");

    Rng rng(seed);
    std::vector<double> v = rng.unit_vector(dim);

    auto checked_apply = [&](const std::vector<double>& x) {
        std::vector<double> y = apply(x);
        if (y.size() != dim) {
            throw ShapeError("power_iteration: operator returned length " +
                             std::to_string(y.size()) + ", expected " + std::to_string(dim));
        }
        for (double e : y) {
            if (!std::isfinite(e)) {
                throw NumericError("power_iteration: operator produced a non-finite value");
            }
        }
        return y;
    };

    // A start vector exactly orthogonal to the image is redrawn once.
    std::vector<double> av = checked_apply(v);
    if (dot(v, av) == 0.0) {
        v = rng.unit_vector(dim);
        av = checked_apply(v);
    }

    for (std::size_t k = 0; k < iters; ++k) {
        std::vector<double> w = (k == 0) ? av : checked_apply(v);
        const double n = norm2(w);
        if (n == 0.0) break;  // operator annihilates v; Rayleigh quotient is 0
        for (auto& x : w) x /= n;
        v = std::move(w);
    }

    PowerIterationResult out;
    out.lambda = dot(v, checked_apply(v));
    out.v = std::move(v);
    return out;
}

}  // namespace eeo
