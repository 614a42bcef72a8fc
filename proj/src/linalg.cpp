#include "deltaif/linalg.hpp"

#include <cassert>

namespace deltaif {

// i-k-j loops with a 4-way unroll over k: each C row stays in registers/L1
// while four A scalars broadcast against four B rows. GCC vectorizes the j
// loops to FMA at -O3. Accumulation order over k is fixed, so outputs are
// deterministic.

void gemm_acc(const Mat& A, const Mat& B, Mat& C) {
    assert(A.cols == B.rows && C.rows == A.rows && C.cols == B.cols);
    const std::size_t m = A.rows, k = A.cols, n = B.cols;
    for (std::size_t i = 0; i < m; ++i) {
        double* c = C.row(i);
        const double* arow = A.row(i);
        std::size_t p = 0;
        for (; p + 4 <= k; p += 4) {
            const double a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
            const double* b0 = B.row(p);
            const double* b1 = B.row(p + 1);
            const double* b2 = B.row(p + 2);
            const double* b3 = B.row(p + 3);
            for (std::size_t j = 0; j < n; ++j) {
                c[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
            }
        }
        for (; p < k; ++p) {
            const double a0 = arow[p];
            const double* b0 = B.row(p);
            for (std::size_t j = 0; j < n; ++j) c[j] += a0 * b0[j];
        }
    }
}

void gemm_at_b_acc(const Mat& A, const Mat& B, Mat& C) {
    assert(A.rows == B.rows && C.rows == A.cols && C.cols == B.cols);
    const std::size_t m = A.rows, k = A.cols, n = B.cols;
    // Summation rows blocked by four so each pass over C does four
    // accumulations per load/store.
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const double* a0 = A.row(i);
        const double* a1 = A.row(i + 1);
        const double* a2 = A.row(i + 2);
        const double* a3 = A.row(i + 3);
        const double* b0 = B.row(i);
        const double* b1 = B.row(i + 1);
        const double* b2 = B.row(i + 2);
        const double* b3 = B.row(i + 3);
        for (std::size_t p = 0; p < k; ++p) {
            const double v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
            double* c = C.row(p);
            for (std::size_t j = 0; j < n; ++j) {
                c[j] += v0 * b0[j] + v1 * b1[j] + v2 * b2[j] + v3 * b3[j];
            }
        }
    }
    for (; i < m; ++i) {
        const double* arow = A.row(i);
        const double* brow = B.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double a0 = arow[p];
            double* c = C.row(p);
            for (std::size_t j = 0; j < n; ++j) c[j] += a0 * brow[j];
        }
    }
}

} // namespace deltaif
