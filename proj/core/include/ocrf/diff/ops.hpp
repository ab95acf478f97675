// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "ocrf/diff/tape.hpp"
#include "ocrf/diff/tensor.hpp"

namespace ocrf::diff {

// Elementwise (same shape). Shape mismatches are rejected with both shapes
// named in the message.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);

// Scalar-with-tensor forms; the only broadcasting the layer supports.
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor scale_by(const Tensor& a, const Tensor& s);      // s: scalar tensor
Tensor add_scalar_t(const Tensor& a, const Tensor& s);  // s: scalar tensor

// (m,k) x (k,n) -> (m,n)
Tensor matmul(const Tensor& a, const Tensor& b);
// x:(n,in) w:(in,out) b:(out) -> (n,out); the affine layer.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// x:(Cin,H,W) w:(Cout,Cin,kh,kw) b:(Cout) or null. Zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* b, int stride,
              int pad);
// x:(Cin,h,w) w:(Cin,Cout,kh,kw); out spatial = (in-1)*stride - 2*pad + k + out_pad.
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor* b,
                        int stride, int pad, int out_pad);

// Max over one axis (the max-pool of the suite); gradient routes to the
// argmax element, ties broken toward the lowest index.
Tensor reduce_max_axis(const Tensor& x, int axis);

Tensor slice(const Tensor& x, int axis, int64_t start, int64_t len);
Tensor concat(const std::vector<Tensor>& parts, int axis);

Tensor sum_all(const Tensor& x);   // -> scalar
Tensor mean_all(const Tensor& x);  // -> scalar
Tensor sum_axis(const Tensor& x, int axis);

Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor absval(const Tensor& x);
Tensor square(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

// Numerically stable softmax; outputs along `axis` sum to 1.
Tensor softmax(const Tensor& x, int axis);

// v / (||v|| + 1e-12) along `axis`. A vector with exactly zero norm maps to
// the unit vector e0 of that axis (zero gradient), so the output is always
// unit length.
Tensor l2_normalize(const Tensor& x, int axis);

// Metadata-only; shares storage, no tape record needed.
Tensor reshape(const Tensor& x, Shape new_shape);
// Copying axis permutation.
Tensor permute(const Tensor& x, const std::vector<int>& perm);

}  // namespace ocrf::diff
