#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "eeo/errors.hpp"

namespace eeo {

// Flat parameter vector. Plain value semantics; arithmetic helpers keep the
// optimizer code close to the update equations it implements.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::size_t dim) : data_(dim, 0.0) {}
    explicit ParamVector(std::vector<double> data) : data_(std::move(data)) {}

    // Validating factory for externally sourced data (files, configs).
    static ParamVector checked(std::vector<double> data, const char* label) {
        ParamVector p(std::move(data));
        p.ensure_finite(label);
        return p;
    }

    std::size_t dim() const { return data_.size(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool operator==(const ParamVector& o) const { return data_ == o.data_; }

    void ensure_finite(const char* label) const {
        for (std::size_t i = 0; i < data_.size(); ++i) {
            if (!std::isfinite(data_[i])) {
                throw NumericError(std::string(label) + ": non-finite entry at index " +
                                   std::to_string(i));
            }
        }
    }

private:
    std::vector<double> data_;
};

inline void check_same_dim(const ParamVector& a, const ParamVector& b, const char* op) {
    if (a.dim() != b.dim()) {
        throw ShapeError(std::string(op) + ": dimension mismatch " + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()));
    }
}

inline ParamVector operator+(const ParamVector& a, const ParamVector& b) {
    check_same_dim(a, b, "vector add");
    ParamVector c = a;
    for (std::size_t i = 0; i < c.dim(); ++i) c[i] += b[i];
    return c;
}

inline ParamVector operator-(const ParamVector& a, const ParamVector& b) {
    check_same_dim(a, b, "vector subtract");
    ParamVector c = a;
    for (std::size_t i = 0; i < c.dim(); ++i) c[i] -= b[i];
    return c;
}

inline ParamVector operator*(double s, const ParamVector& a) {
    ParamVector c = a;
    for (std::size_t i = 0; i < c.dim(); ++i) c[i] *= s;
    return c;
}

// a + s * b without a temporary per element pair.
inline ParamVector axpy(const ParamVector& a, double s, const ParamVector& b) {
    check_same_dim(a, b, "axpy");
    ParamVector c = a;
    for (std::size_t i = 0; i < c.dim(); ++i) c[i] += s * b[i];
    return c;
}

inline double dot(const ParamVector& a, const ParamVector& b) {
    check_same_dim(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const ParamVector& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const ParamVector& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

inline ParamVector hadamard(const ParamVector& a, const ParamVector& b) {
    check_same_dim(a, b, "hadamard");
    ParamVector c = a;
    for (std::size_t i = 0; i < c.dim(); ++i) c[i] *= b[i];
    return c;
}

}  // namespace eeo
