#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace deltaif {

// Dense row-major matrix of doubles. Small and unclever on purpose: every
// kernel below accumulates each output element in a fixed order, so results
// are bit-reproducible run to run.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double* row(std::size_t i) { return a.data() + i * cols; }
    const double* row(std::size_t i) const { return a.data() + i * cols; }
    double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// C += A * B           (A: m x k, B: k x n, C: m x n)
void gemm_acc(const Mat& A, const Mat& B, Mat& C);

// C += A^T * B         (A: m x k, B: m x n, C: k x n)
void gemm_at_b_acc(const Mat& A, const Mat& B, Mat& C);

} // namespace deltaif
