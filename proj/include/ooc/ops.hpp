#pragma once
// Differentiable tensor operations. Shapes are explicit: apart from
// scalar-tensor arithmetic and row-bias addition nothing broadcasts.
// Shape violations throw ooc::Error with ErrorKind::Dimension.

#include <cstddef>
#include <span>
#include <vector>

#include "ooc/tensor.hpp"

namespace ooc {

// Large negative fill for masked attention scores; exp() of it underflows to
// exactly zero after max-subtraction while keeping every tensor finite.
inline constexpr double kMaskedScore = -1e30;

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
// x[m×n] + bias[n] added to every row.
Tensor add_row(const Tensor& x, const Tensor& bias);

Tensor matmul(const Tensor& a, const Tensor& b);
// a[m×k]·b[n×k]ᵀ without materialising the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

// Rank-1 tensors concatenate along axis 0; rank-2 along rows (0) or columns (1).
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);

// out[r] = table[ids[r]]; backward scatter-adds into the table rows.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);
// out[index[r]] += src[r] over n_rows output rows; backward gathers.
Tensor scatter_add_rows(const Tensor& src, std::span<const std::size_t> index, std::size_t n_rows);
// out[r] = x[r, cols[r]] as an n×1 column.
Tensor pick(const Tensor& x, std::span<const std::size_t> cols);

// Rank-1 along axis 0, rank-2 along rows (axis 1) or columns (axis 0).
Tensor softmax(const Tensor& x, std::size_t axis);
// Row-wise log-softmax of a rank-2 tensor.
Tensor log_softmax(const Tensor& x);
// Row-wise normalisation; the affine variant applies gamma[n], beta[n].
Tensor layer_norm(const Tensor& x, double eps = 1e-5);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor relu(const Tensor& x);
// tanh approximation, as in GPT-2.
Tensor gelu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
// x^p for x ≥ 0; p == 0 gives exactly ones with zero gradient.
Tensor pow_scalar(const Tensor& x, double p);

// Positions where mask[i] is true take `value`; no gradient flows through them.
Tensor masked_fill(const Tensor& x, const std::vector<bool>& mask, double value);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace ooc
