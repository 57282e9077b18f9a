#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "gpd/common.hpp"
#include "gpd/rng.hpp"

namespace gpd {

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1 matrices.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
    Matrix(int r, int c, double fill) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    size_t size() const { return a.size(); }
    double* data() { return a.data(); }
    const double* data() const { return a.data(); }
    double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v) { std::fill(a.begin(), a.end(), v); }

    bool all_finite() const {
        for (double v : a)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static Matrix gaussian(int r, int c, Rng& rng, double std_dev = 1.0) {
        Matrix m(r, c);
        for (auto& v : m.a) v = rng.gauss() * std_dev;
        return m;
    }

    bool operator==(const Matrix& o) const { return rows == o.rows && cols == o.cols && a == o.a; }
};

inline double dot(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double l2_norm(const std::vector<double>& x) { return std::sqrt(dot(x, x)); }

inline double cosine_similarity(const std::vector<double>& x, const std::vector<double>& y) {
    double nx = l2_norm(x), ny = l2_norm(y);
    if (nx == 0.0 || ny == 0.0) return 0.0;
    return dot(x, y) / (nx * ny);
}

}  // namespace gpd
