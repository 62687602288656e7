#pragma once

#include <vector>

#include "dmrl/tensor.hpp"

namespace dmrl {

// Arguments of log() are clamped below at this value so that saturated
// probabilities keep every loss finite.
inline constexpr double kLogClampEps = 1e-12;

// Elementwise; binary ops require identical shapes (no broadcasting except
// the explicit *_scalar forms).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& a);      // backward uses subgradient 0 at the origin
Tensor exp_op(const Tensor& a);
Tensor log_op(const Tensor& a);    // log(max(x, kLogClampEps))
Tensor abs_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// Reductions.
Tensor sum_all(const Tensor& a);                 // scalar [1]
Tensor mean_all(const Tensor& a);                // scalar [1]
Tensor mean_axis(const Tensor& a, size_t axis);  // axis removed from the shape

// Shape change with the same element count; data is copied.
Tensor reshape(const Tensor& a, std::vector<size_t> shape);

// a: [m x k], b: [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);

// x: [N x K], bias: [K] -> x + bias per row.
Tensor bias_row(const Tensor& x, const Tensor& bias);

// matmul followed by bias_row.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Valid cross-correlation, stride 1, no padding.
// x: [N x C x H x W], w: [F x C x kh x kw], b: [F] -> [N x F x (H-kh+1) x (W-kw+1)].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);

// 2x2 window, stride 2 max; odd trailing row/column dropped. Backward routes
// the gradient to the argmax position; ties break toward the first element
// in row-major window order.
Tensor maxpool2(const Tensor& x);

// Row-wise log-softmax over [N x K], K >= 2, max-subtraction for stability.
Tensor log_softmax(const Tensor& z);
// exp(log_softmax(z)); rows are probability vectors.
Tensor softmax(const Tensor& z);

// Reorders rows of a [N x ...] tensor: out[i] = t[perm[i]]. Value-level only;
// refuses tensors on the active gradient path.
Tensor permute_rows(const Tensor& t, const std::vector<size_t>& perm);

bool all_finite(const Tensor& t);

namespace detail {
// C[m x n] = A[m x k] * B[k x n]; C must be zero-initialized.
void mm_nn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n);
// C[m x n] = A[m x k] * B[n x k]^T.
void mm_nt(const double* a, const double* b, double* c, size_t m, size_t k, size_t n);
// C[m x n] = A[k x m]^T * B[k x n].
void mm_tn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n);
}  // namespace detail

}  // namespace dmrl
