#pragma once

#include "gpd/matrix.hpp"

// Hot inner loops. Each kernel has a serial reference implementation and an
// OpenMP variant; both compute every output element with the same summation
// order, so results are bit-identical and independent of thread count.

namespace gpd {

// C (MxN) = A (MxK) * B (KxN), optionally accumulating into C.
void matmul_serial(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate = false);
void matmul(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate = false);

// C (MxN) = A (MxK) * B^T, with B stored NxK.
void matmul_nt_serial(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate = false);
void matmul_nt(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate = false);

// C (MxN) = A^T * B, with A stored KxM and B stored KxN.
void matmul_tn_serial(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate = false);
void matmul_tn(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate = false);

// Row-wise softmax, numerically stabilized by the row max.
void softmax_rows_serial(const Matrix& X, Matrix& Y);
void softmax_rows(const Matrix& X, Matrix& Y);

}  // namespace gpd
