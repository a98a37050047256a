#pragma once

// Differentiable ops over Tensor. Every function records a backward closure
// on its output node; closures accumulate (+=) into parent gradients and the
// heavy lifting runs through the dispatched kernel table.

#include <vector>

#include "amsdb/kernels.hpp"
#include "amsdb/tensor.hpp"

namespace amsdb::ops {

using kern::PadMode;

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);            // [m,k]x[k,n]
Tensor linear(const Tensor& x, const Tensor& w,             // [r,d]x[d,e]+[e]
              const Tensor& b);

// ---- convolution ----
// x [N,C,H,W], w [O,C,kh,kw], b [O]; zero padding, cross-correlation.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, i64 stride,
              i64 pad);
// Depthwise same-size conv: x [N,C,H,W], k [C,kh,kw] (odd dims), stride 1.
Tensor dwconv2d(const Tensor& x, const Tensor& k, PadMode pad_mode);
Tensor bias_add_channel(const Tensor& x, const Tensor& b);  // [N,C,H,W]+[C]

// ---- elementwise (same shape, or scalar broadcast on either side) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_const(const Tensor& a, float c);
Tensor mul_const(const Tensor& a, float c);
Tensor exp(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor softplus(const Tensor& x);

// ---- normalization / reduction / shape ----
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  float eps = 1e-5f);
// axes empty -> reduce everything to shape [1]; otherwise the listed axes
// are removed from the shape ([1] if nothing is left).
Tensor reduce_sum(const Tensor& x, const std::vector<i64>& axes = {});
Tensor reduce_mean(const Tensor& x, const std::vector<i64>& axes = {});
Tensor reshape(const Tensor& x, Shape shape);
// y[r,:] = x[src_row[r],:]; src_row must be a permutation of the row range.
Tensor permute_rows(const Tensor& x, std::vector<i64> src_row);
Tensor nchw_to_tokens(const Tensor& x);                     // -> [N*H*W, C]
Tensor tokens_to_nchw(const Tensor& x, i64 n, i64 c, i64 h, i64 w);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor upsample_nearest2x(const Tensor& x);

// ---- selective scan recurrence ----
// u, delta: [batch*L, D]; bt, ct: [batch*L, S]; A: [D,S]; d_skip: [D].
// Per image, channel d, state s:
//   h_t = exp(delta_t*A) * h_{t-1} + delta_t * bt_t * u_t,   h_0 = 0
//   y_t[d] = sum_s ct_t[s] * h_t[d,s] + d_skip[d] * u_t[d]
// Differentiable in every argument; hidden states are recomputed during
// backward rather than stored.
Tensor scan_core(const Tensor& u, const Tensor& delta, const Tensor& bt,
                 const Tensor& ct, const Tensor& A, const Tensor& d_skip,
                 i64 batch);

}  // namespace amsdb::ops
