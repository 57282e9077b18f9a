#include "gpd/kernels.hpp"

#include <cmath>
#include <cstring>

#include "gpd/common.hpp"

namespace gpd {

namespace {

void check_mm(Matrix& C, int m, int k, int bk, int n) {
    if (k != bk) throw ValidationError("matmul: inner dimensions differ");
    if (C.rows != m || C.cols != n) C = Matrix(m, n);
}

// Work threshold below which spawning threads costs more than it saves.
constexpr long kParallelCutoff = 1 << 16;

}  // namespace

void matmul_serial(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate) {
    check_mm(C, A.rows, A.cols, B.rows, B.cols);
    const int M = A.rows, K = A.cols, N = B.cols;
    for (int i = 0; i < M; ++i) {
        double* ci = C.row(i);
        if (!accumulate) std::memset(ci, 0, sizeof(double) * N);
        const double* ai = A.row(i);
        for (int k = 0; k < K; ++k) {
            const double aik = ai[k];
            const double* bk = B.row(k);
            for (int j = 0; j < N; ++j) ci[j] += aik * bk[j];
        }
    }
}

void matmul(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate) {
    check_mm(C, A.rows, A.cols, B.rows, B.cols);
    const int M = A.rows, K = A.cols, N = B.cols;
    const long work = static_cast<long>(M) * K * N;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int i = 0; i < M; ++i) {
        double* ci = C.row(i);
        if (!accumulate) std::memset(ci, 0, sizeof(double) * N);
        const double* ai = A.row(i);
        for (int k = 0; k < K; ++k) {
            const double aik = ai[k];
            const double* bk = B.row(k);
            for (int j = 0; j < N; ++j) ci[j] += aik * bk[j];
        }
    }
}

void matmul_nt_serial(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate) {
    check_mm(C, A.rows, A.cols, B.cols, B.rows);
    const int M = A.rows, K = A.cols, N = B.rows;
    for (int i = 0; i < M; ++i) {
        const double* ai = A.row(i);
        double* ci = C.row(i);
        for (int j = 0; j < N; ++j) {
            const double* bj = B.row(j);
            double s = 0.0;
            for (int k = 0; k < K; ++k) s += ai[k] * bj[k];
            ci[j] = accumulate ? ci[j] + s : s;
        }
    }
}

void matmul_nt(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate) {
    check_mm(C, A.rows, A.cols, B.cols, B.rows);
    const int M = A.rows, K = A.cols, N = B.rows;
    const long work = static_cast<long>(M) * K * N;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int i = 0; i < M; ++i) {
        const double* ai = A.row(i);
        double* ci = C.row(i);
        for (int j = 0; j < N; ++j) {
            const double* bj = B.row(j);
            double s = 0.0;
            for (int k = 0; k < K; ++k) s += ai[k] * bj[k];
            ci[j] = accumulate ? ci[j] + s : s;
        }
    }
}

void matmul_tn_serial(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate) {
    check_mm(C, A.cols, A.rows, B.rows, B.cols);
    const int M = A.cols, K = A.rows, N = B.cols;
    for (int i = 0; i < M; ++i) {
        double* ci = C.row(i);
        if (!accumulate) std::memset(ci, 0, sizeof(double) * N);
        for (int k = 0; k < K; ++k) {
            const double aki = A(k, i);
            const double* bk = B.row(k);
            for (int j = 0; j < N; ++j) ci[j] += aki * bk[j];
        }
    }
}

void matmul_tn(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate) {
    check_mm(C, A.cols, A.rows, B.rows, B.cols);
    const int M = A.cols, K = A.rows, N = B.cols;
    const long work = static_cast<long>(M) * K * N;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int i = 0; i < M; ++i) {
        double* ci = C.row(i);
        if (!accumulate) std::memset(ci, 0, sizeof(double) * N);
        for (int k = 0; k < K; ++k) {
            const double aki = A(k, i);
            const double* bk = B.row(k);
            for (int j = 0; j < N; ++j) ci[j] += aki * bk[j];
        }
    }
}

namespace {

inline void softmax_row(const double* x, double* y, int n) {
    double mx = x[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        y[j] = std::exp(x[j] - mx);
        sum += y[j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < n; ++j) y[j] *= inv;
}

}  // namespace

void softmax_rows_serial(const Matrix& X, Matrix& Y) {
    if (!Y.same_shape(X)) Y = Matrix(X.rows, X.cols);
    for (int i = 0; i < X.rows; ++i) softmax_row(X.row(i), Y.row(i), X.cols);
}

void softmax_rows(const Matrix& X, Matrix& Y) {
    if (!Y.same_shape(X)) Y = Matrix(X.rows, X.cols);
    const long work = static_cast<long>(X.rows) * X.cols;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int i = 0; i < X.rows; ++i) softmax_row(X.row(i), Y.row(i), X.cols);
}

}  // namespace gpd
