// SPDX-License-Identifier: Apache-2.0
#include "ocrf/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "ocrf/util/check.hpp"

namespace ocrf::diff {

namespace {

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (!active_tape()) return false;
  for (const Tensor* t : inputs) {
    if (t && t->has_grad()) return true;
  }
  return false;
}

// Allocates the output gradient and registers every involved buffer for
// zeroing at backward time. Call only when tracking() is true.
void register_io(Tensor& out, std::initializer_list<const Tensor*> inputs) {
  out.ensure_grad();
  Tape* tape = active_tape();
  tape->register_grad(out.grad_buffer());
  for (const Tensor* t : inputs) {
    if (t && t->has_grad()) tape->register_grad(t->grad_buffer());
  }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    util::fail_invalid(std::string(op) + ": shape mismatch " + util::shape_str(a.shape()) +
                       " vs " + util::shape_str(b.shape()));
  }
}

void require_scalar(const char* op, const Tensor& s) {
  if (s.numel() != 1) {
    util::fail_invalid(std::string(op) + ": expected scalar, got " + util::shape_str(s.shape()));
  }
}

void require_rank(const char* op, const Tensor& t, int rank) {
  if (t.rank() != rank) {
    util::fail_invalid(std::string(op) + ": expected rank " + std::to_string(rank) +
                       " tensor, got " + util::shape_str(t.shape()));
  }
}

struct AxisSplit {
  int64_t outer;
  int64_t n;
  int64_t inner;
};

AxisSplit split_axis(const char* op, const Shape& shape, int axis) {
  if (axis < 0 || axis >= static_cast<int>(shape.size())) {
    util::fail_invalid(std::string(op) + ": axis " + std::to_string(axis) +
                       " out of range for " + util::shape_str(shape));
  }
  AxisSplit s{1, shape[static_cast<std::size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  for (int i = axis + 1; i < static_cast<int>(shape.size()); ++i) {
    s.inner *= shape[static_cast<std::size_t>(i)];
  }
  return s;
}

using UnaryValue = double (*)(double);

template <typename DfFn>
Tensor unary_op(const Tensor& x, UnaryValue f, DfFn df) {
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = f(px[i]);
  if (tracking({&x})) {
    register_io(out, {&x});
    Tensor xc = x, oc = out;
    active_tape()->record([xc, oc, df]() mutable {
      if (!xc.has_grad()) return;
      const double* g = oc.grad();
      const double* xv = xc.data();
      const double* yv = oc.data();
      double* gx = xc.grad();
      const int64_t m = xc.numel();
      for (int64_t i = 0; i < m; ++i) gx[i] += g[i] * df(xv[i], yv[i]);
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  if (tracking({&a, &b})) {
    register_io(out, {&a, &b});
    Tensor ac = a, bc = b, oc = out;
    active_tape()->record([ac, bc, oc]() mutable {
      const double* g = oc.grad();
      const int64_t m = oc.numel();
      if (ac.has_grad()) {
        double* ga = ac.grad();
        for (int64_t i = 0; i < m; ++i) ga[i] += g[i];
      }
      if (bc.has_grad()) {
        double* gb = bc.grad();
        for (int64_t i = 0; i < m; ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
  if (tracking({&a, &b})) {
    register_io(out, {&a, &b});
    Tensor ac = a, bc = b, oc = out;
    active_tape()->record([ac, bc, oc]() mutable {
      const double* g = oc.grad();
      const int64_t m = oc.numel();
      if (ac.has_grad()) {
        double* ga = ac.grad();
        for (int64_t i = 0; i < m; ++i) ga[i] += g[i];
      }
      if (bc.has_grad()) {
        double* gb = bc.grad();
        for (int64_t i = 0; i < m; ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
  if (tracking({&a, &b})) {
    register_io(out, {&a, &b});
    Tensor ac = a, bc = b, oc = out;
    active_tape()->record([ac, bc, oc]() mutable {
      const double* g = oc.grad();
      const double* pa2 = ac.data();
      const double* pb2 = bc.data();
      const int64_t m = oc.numel();
      if (ac.has_grad()) {
        double* ga = ac.grad();
        for (int64_t i = 0; i < m; ++i) ga[i] += g[i] * pb2[i];
      }
      if (bc.has_grad()) {
        double* gb = bc.grad();
        for (int64_t i = 0; i < m; ++i) gb[i] += g[i] * pa2[i];
      }
    });
  }
  return out;
}

Tensor divide(const Tensor& a, const Tensor& b) {
  require_same_shape("divide", a, b);
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] / pb[i];
  if (tracking({&a, &b})) {
    register_io(out, {&a, &b});
    Tensor ac = a, bc = b, oc = out;
    active_tape()->record([ac, bc, oc]() mutable {
      const double* g = oc.grad();
      const double* pa2 = ac.data();
      const double* pb2 = bc.data();
      const int64_t m = oc.numel();
      if (ac.has_grad()) {
        double* ga = ac.grad();
        for (int64_t i = 0; i < m; ++i) ga[i] += g[i] / pb2[i];
      }
      if (bc.has_grad()) {
        double* gb = bc.grad();
        for (int64_t i = 0; i < m; ++i) gb[i] -= g[i] * pa2[i] / (pb2[i] * pb2[i]);
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out(a.shape());
  const double* pa = a.data();
  double* po = out.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * s;
  if (tracking({&a})) {
    register_io(out, {&a});
    Tensor ac = a, oc = out;
    active_tape()->record([ac, oc, s]() mutable {
      const double* g = oc.grad();
      double* ga = ac.grad();
      const int64_t m = oc.numel();
      for (int64_t i = 0; i < m; ++i) ga[i] += g[i] * s;
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  Tensor out(a.shape());
  const double* pa = a.data();
  double* po = out.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + s;
  if (tracking({&a})) {
    register_io(out, {&a});
    Tensor ac = a, oc = out;
    active_tape()->record([ac, oc]() mutable {
      const double* g = oc.grad();
      double* ga = ac.grad();
      const int64_t m = oc.numel();
      for (int64_t i = 0; i < m; ++i) ga[i] += g[i];
    });
  }
  return out;
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  require_scalar("scale_by", s);
  Tensor out(a.shape());
  const double sv = s.data()[0];
  const double* pa = a.data();
  double* po = out.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * sv;
  if (tracking({&a, &s})) {
    register_io(out, {&a, &s});
    Tensor ac = a, sc = s, oc = out;
    active_tape()->record([ac, sc, oc]() mutable {
      const double* g = oc.grad();
      const int64_t m = oc.numel();
      if (ac.has_grad()) {
        double* ga = ac.grad();
        const double sv2 = sc.data()[0];
        for (int64_t i = 0; i < m; ++i) ga[i] += g[i] * sv2;
      }
      if (sc.has_grad()) {
        const double* pa2 = ac.data();
        double acc = 0.0;
        for (int64_t i = 0; i < m; ++i) acc += g[i] * pa2[i];
        sc.grad()[0] += acc;
      }
    });
  }
  return out;
}

Tensor add_scalar_t(const Tensor& a, const Tensor& s) {
  require_scalar("add_scalar_t", s);
  Tensor out(a.shape());
  const double sv = s.data()[0];
  const double* pa = a.data();
  double* po = out.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + sv;
  if (tracking({&a, &s})) {
    register_io(out, {&a, &s});
    Tensor ac = a, sc = s, oc = out;
    active_tape()->record([ac, sc, oc]() mutable {
      const double* g = oc.grad();
      const int64_t m = oc.numel();
      if (ac.has_grad()) {
        double* ga = ac.grad();
        for (int64_t i = 0; i < m; ++i) ga[i] += g[i];
      }
      if (sc.has_grad()) {
        double acc = 0.0;
        for (int64_t i = 0; i < m; ++i) acc += g[i];
        sc.grad()[0] += acc;
      }
    });
  }
  return out;
}

namespace {

// out(m,n) += A(m,k) * B(k,n), cache-friendly i-k-j order.
void matmul_acc(const double* __restrict a, const double* __restrict b,
                double* __restrict out, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* orow = out + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// out(m,k) += G(m,n) * B(k,n)^T  (row-dot form, unit stride on both).
void matmul_bt_acc(const double* __restrict g, const double* __restrict b,
                   double* __restrict out, int64_t m, int64_t n, int64_t k) {
  for (int64_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    double* orow = out + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      orow[p] += acc;
    }
  }
}

// out(k,n) += A(m,k)^T * G(m,n), scatter over rows of G.
void matmul_at_acc(const double* __restrict a, const double* __restrict g,
                   double* __restrict out, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* grow = g + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* orow = out + p * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += av * grow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0)) {
    util::fail_invalid("matmul: inner dims disagree " + util::shape_str(a.shape()) + " x " +
                       util::shape_str(b.shape()));
  }
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  matmul_acc(a.data(), b.data(), out.data(), m, k, n);
  if (tracking({&a, &b})) {
    register_io(out, {&a, &b});
    Tensor ac = a, bc = b, oc = out;
    active_tape()->record([ac, bc, oc, m, k, n]() mutable {
      const double* g = oc.grad();
      if (ac.has_grad()) matmul_bt_acc(g, bc.data(), ac.grad(), m, n, k);
      if (bc.has_grad()) matmul_at_acc(ac.data(), g, bc.grad(), m, k, n);
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank("linear", x, 2);
  require_rank("linear", w, 2);
  require_rank("linear", b, 1);
  if (x.dim(1) != w.dim(0) || w.dim(1) != b.dim(0)) {
    util::fail_invalid("linear: incompatible shapes x" + util::shape_str(x.shape()) + " w" +
                       util::shape_str(w.shape()) + " b" + util::shape_str(b.shape()));
  }
  const int64_t rows = x.dim(0), in = x.dim(1), outdim = w.dim(1);
  Tensor out({rows, outdim});
  double* po = out.data();
  const double* pb = b.data();
  for (int64_t i = 0; i < rows; ++i) {
    double* orow = po + i * outdim;
    for (int64_t j = 0; j < outdim; ++j) orow[j] = pb[j];
  }
  matmul_acc(x.data(), w.data(), po, rows, in, outdim);
  if (tracking({&x, &w, &b})) {
    register_io(out, {&x, &w, &b});
    Tensor xc = x, wc = w, bc = b, oc = out;
    active_tape()->record([xc, wc, bc, oc, rows, in, outdim]() mutable {
      const double* g = oc.grad();
      if (xc.has_grad()) matmul_bt_acc(g, wc.data(), xc.grad(), rows, outdim, in);
      if (wc.has_grad()) matmul_at_acc(xc.data(), g, wc.grad(), rows, in, outdim);
      if (bc.has_grad()) {
        double* gb = bc.grad();
        for (int64_t i = 0; i < rows; ++i) {
          const double* grow = g + i * outdim;
          for (int64_t j = 0; j < outdim; ++j) gb[j] += grow[j];
        }
      }
    });
  }
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* b, int stride, int pad) {
  require_rank("conv2d", x, 3);
  require_rank("conv2d", w, 4);
  if (x.dim(0) != w.dim(1)) {
    util::fail_invalid("conv2d: input channels " + util::shape_str(x.shape()) +
                       " do not match weight " + util::shape_str(w.shape()));
  }
  if (b) {
    require_rank("conv2d", *b, 1);
    if (b->dim(0) != w.dim(0)) {
      util::fail_invalid("conv2d: bias " + util::shape_str(b->shape()) +
                         " does not match weight " + util::shape_str(w.shape()));
    }
  }
  const int64_t ci = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const int64_t co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int64_t oh = (h + 2 * pad - kh) / stride + 1;
  const int64_t ow = (ww + 2 * pad - kw) / stride + 1;
  if (oh <= 0 || ow <= 0) {
    util::fail_invalid("conv2d: empty output for input " + util::shape_str(x.shape()) +
                       " kernel " + util::shape_str(w.shape()));
  }
  Tensor out({co, oh, ow});
  const double* px = x.data();
  const double* pw = w.data();
  double* po = out.data();
  for (int64_t c = 0; c < co; ++c) {
    const double bias = b ? b->data()[c] : 0.0;
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t xo = 0; xo < ow; ++xo) {
        double acc = bias;
        for (int64_t c2 = 0; c2 < ci; ++c2) {
          for (int64_t ky = 0; ky < kh; ++ky) {
            const int64_t iy = y * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int64_t kx = 0; kx < kw; ++kx) {
              const int64_t ix = xo * stride - pad + kx;
              if (ix < 0 || ix >= ww) continue;
              acc += px[(c2 * h + iy) * ww + ix] * pw[((c * ci + c2) * kh + ky) * kw + kx];
            }
          }
        }
        po[(c * oh + y) * ow + xo] = acc;
      }
    }
  }
  const bool track = b ? tracking({&x, &w, b}) : tracking({&x, &w});
  if (track) {
    if (b) {
      register_io(out, {&x, &w, b});
    } else {
      register_io(out, {&x, &w});
    }
    Tensor xc = x, wc = w, oc = out;
    Tensor bcopy = b ? *b : Tensor();
    const bool has_b = b != nullptr;
    active_tape()->record(
        [xc, wc, bcopy, oc, has_b, stride, pad, ci, h, ww, co, kh, kw, oh, ow]() mutable {
          const double* g = oc.grad();
          const double* px2 = xc.data();
          const double* pw2 = wc.data();
          double* gx = xc.has_grad() ? xc.grad() : nullptr;
          double* gw = wc.has_grad() ? wc.grad() : nullptr;
          double* gb = (has_b && bcopy.has_grad()) ? bcopy.grad() : nullptr;
          for (int64_t c = 0; c < co; ++c) {
            for (int64_t y = 0; y < oh; ++y) {
              for (int64_t xo = 0; xo < ow; ++xo) {
                const double go = g[(c * oh + y) * ow + xo];
                if (gb) gb[c] += go;
                if (go == 0.0) continue;
                for (int64_t c2 = 0; c2 < ci; ++c2) {
                  for (int64_t ky = 0; ky < kh; ++ky) {
                    const int64_t iy = y * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int64_t kx = 0; kx < kw; ++kx) {
                      const int64_t ix = xo * stride - pad + kx;
                      if (ix < 0 || ix >= ww) continue;
                      const int64_t xi = (c2 * h + iy) * ww + ix;
                      const int64_t wi = ((c * ci + c2) * kh + ky) * kw + kx;
                      if (gx) gx[xi] += go * pw2[wi];
                      if (gw) gw[wi] += go * px2[xi];
                    }
                  }
                }
              }
            }
          }
        });
  }
  return out;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor* b, int stride, int pad,
                        int out_pad) {
  require_rank("conv_transpose2d", x, 3);
  require_rank("conv_transpose2d", w, 4);
  if (x.dim(0) != w.dim(0)) {
    util::fail_invalid("conv_transpose2d: input channels " + util::shape_str(x.shape()) +
                       " do not match weight " + util::shape_str(w.shape()));
  }
  const int64_t ci = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const int64_t co = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const int64_t oh = (h - 1) * stride - 2 * pad + kh + out_pad;
  const int64_t ow = (ww - 1) * stride - 2 * pad + kw + out_pad;
  if (oh <= 0 || ow <= 0) {
    util::fail_invalid("conv_transpose2d: empty output for input " + util::shape_str(x.shape()));
  }
  Tensor out({co, oh, ow});
  double* po = out.data();
  if (b) {
    for (int64_t c = 0; c < co; ++c) {
      const double bias = b->data()[c];
      double* plane = po + c * oh * ow;
      for (int64_t i = 0; i < oh * ow; ++i) plane[i] = bias;
    }
  }
  const double* px = x.data();
  const double* pw = w.data();
  for (int64_t c2 = 0; c2 < ci; ++c2) {
    for (int64_t iy = 0; iy < h; ++iy) {
      for (int64_t ix = 0; ix < ww; ++ix) {
        const double xv = px[(c2 * h + iy) * ww + ix];
        if (xv == 0.0) continue;
        for (int64_t c = 0; c < co; ++c) {
          for (int64_t ky = 0; ky < kh; ++ky) {
            const int64_t oy = iy * stride - pad + ky;
            if (oy < 0 || oy >= oh) continue;
            for (int64_t kx = 0; kx < kw; ++kx) {
              const int64_t ox = ix * stride - pad + kx;
              if (ox < 0 || ox >= ow) continue;
              po[(c * oh + oy) * ow + ox] += xv * pw[((c2 * co + c) * kh + ky) * kw + kx];
            }
          }
        }
      }
    }
  }
  const bool track = b ? tracking({&x, &w, b}) : tracking({&x, &w});
  if (track) {
    if (b) {
      register_io(out, {&x, &w, b});
    } else {
      register_io(out, {&x, &w});
    }
    Tensor xc = x, wc = w, oc = out;
    Tensor bcopy = b ? *b : Tensor();
    const bool has_b = b != nullptr;
    active_tape()->record(
        [xc, wc, bcopy, oc, has_b, stride, pad, ci, h, ww, co, kh, kw, oh, ow]() mutable {
          const double* g = oc.grad();
          const double* px2 = xc.data();
          const double* pw2 = wc.data();
          double* gx = xc.has_grad() ? xc.grad() : nullptr;
          double* gw = wc.has_grad() ? wc.grad() : nullptr;
          double* gb = (has_b && bcopy.has_grad()) ? bcopy.grad() : nullptr;
          if (gb) {
            for (int64_t c = 0; c < co; ++c) {
              const double* plane = g + c * oh * ow;
              double acc = 0.0;
              for (int64_t i = 0; i < oh * ow; ++i) acc += plane[i];
              gb[c] += acc;
            }
          }
          for (int64_t c2 = 0; c2 < ci; ++c2) {
            for (int64_t iy = 0; iy < h; ++iy) {
              for (int64_t ix = 0; ix < ww; ++ix) {
                const int64_t xi = (c2 * h + iy) * ww + ix;
                for (int64_t c = 0; c < co; ++c) {
                  for (int64_t ky = 0; ky < kh; ++ky) {
                    const int64_t oy = iy * stride - pad + ky;
                    if (oy < 0 || oy >= oh) continue;
                    for (int64_t kx = 0; kx < kw; ++kx) {
                      const int64_t ox = ix * stride - pad + kx;
                      if (ox < 0 || ox >= ow) continue;
                      const double go = g[(c * oh + oy) * ow + ox];
                      const int64_t wi = ((c2 * co + c) * kh + ky) * kw + kx;
                      if (gx) gx[xi] += go * pw2[wi];
                      if (gw) gw[wi] += go * px2[xi];
                    }
                  }
                }
              }
            }
          }
        });
  }
  return out;
}

Tensor reduce_max_axis(const Tensor& x, int axis) {
  const AxisSplit s = split_axis("reduce_max_axis", x.shape(), axis);
  Shape out_shape;
  for (int i = 0; i < x.rank(); ++i) {
    if (i != axis) out_shape.push_back(x.dim(i));
  }
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out(out_shape);
  std::vector<int64_t> argmax(static_cast<std::size_t>(s.outer * s.inner));
  const double* px = x.data();
  double* po = out.data();
  for (int64_t o = 0; o < s.outer; ++o) {
    for (int64_t in = 0; in < s.inner; ++in) {
      const double* lane = px + o * s.n * s.inner + in;
      double best = lane[0];
      int64_t best_i = 0;
      for (int64_t i = 1; i < s.n; ++i) {
        const double v = lane[i * s.inner];
        if (v > best) {  // strict: ties keep the lowest index
          best = v;
          best_i = i;
        }
      }
      po[o * s.inner + in] = best;
      argmax[static_cast<std::size_t>(o * s.inner + in)] = best_i;
    }
  }
  if (tracking({&x})) {
    register_io(out, {&x});
    Tensor xc = x, oc = out;
    active_tape()->record([xc, oc, s, argmax = std::move(argmax)]() mutable {
      const double* g = oc.grad();
      double* gx = xc.grad();
      for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t in = 0; in < s.inner; ++in) {
          const int64_t lane = o * s.inner + in;
          gx[o * s.n * s.inner + argmax[static_cast<std::size_t>(lane)] * s.inner + in] += g[lane];
        }
      }
    });
  }
  return out;
}

Tensor slice(const Tensor& x, int axis, int64_t start, int64_t len) {
  const AxisSplit s = split_axis("slice", x.shape(), axis);
  if (start < 0 || len <= 0 || start + len > s.n) {
    util::fail_invalid("slice: range [" + std::to_string(start) + "," +
                       std::to_string(start + len) + ") out of bounds for axis " +
                       std::to_string(axis) + " of " + util::shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(axis)] = len;
  Tensor out(out_shape);
  const double* px = x.data();
  double* po = out.data();
  for (int64_t o = 0; o < s.outer; ++o) {
    const double* src = px + (o * s.n + start) * s.inner;
    double* dst = po + o * len * s.inner;
    std::copy(src, src + len * s.inner, dst);
  }
  if (tracking({&x})) {
    register_io(out, {&x});
    Tensor xc = x, oc = out;
    active_tape()->record([xc, oc, s, axis, start, len]() mutable {
      (void)axis;
      const double* g = oc.grad();
      double* gx = xc.grad();
      for (int64_t o = 0; o < s.outer; ++o) {
        double* dst = gx + (o * s.n + start) * s.inner;
        const double* src = g + o * len * s.inner;
        for (int64_t i = 0; i < len * s.inner; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) util::fail_invalid("concat: no inputs");
  const Tensor& first = parts.front();
  int64_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != first.rank()) {
      util::fail_invalid("concat: rank mismatch " + util::shape_str(first.shape()) + " vs " +
                         util::shape_str(p.shape()));
    }
    for (int i = 0; i < first.rank(); ++i) {
      if (i != axis && p.dim(i) != first.dim(i)) {
        util::fail_invalid("concat: shape mismatch off-axis " + util::shape_str(first.shape()) +
                           " vs " + util::shape_str(p.shape()));
      }
    }
    total += p.dim(axis);
  }
  Shape out_shape = first.shape();
  out_shape[static_cast<std::size_t>(axis)] = total;
  Tensor out(out_shape);
  const AxisSplit s = split_axis("concat", out_shape, axis);
  double* po = out.data();
  int64_t offset = 0;
  for (const Tensor& p : parts) {
    const int64_t pn = p.dim(axis);
    const double* pp = p.data();
    for (int64_t o = 0; o < s.outer; ++o) {
      std::copy(pp + o * pn * s.inner, pp + (o + 1) * pn * s.inner,
                po + (o * s.n + offset) * s.inner);
    }
    offset += pn;
  }
  bool any = false;
  for (const Tensor& p : parts) any = any || p.has_grad();
  if (active_tape() && any) {
    out.ensure_grad();
    active_tape()->register_grad(out.grad_buffer());
    std::vector<int64_t> extents;
    for (const Tensor& p : parts) {
      if (p.has_grad()) active_tape()->register_grad(p.grad_buffer());
      extents.push_back(p.dim(axis));
    }
    std::vector<Tensor> copies = parts;
    Tensor oc = out;
    active_tape()->record([copies, oc, s, extents = std::move(extents)]() mutable {
      const double* g = oc.grad();
      int64_t off = 0;
      for (std::size_t pi = 0; pi < copies.size(); ++pi) {
        const int64_t pn = extents[pi];
        Tensor& p = copies[pi];
        if (p.has_grad()) {
          double* gp = p.grad();
          for (int64_t o = 0; o < s.outer; ++o) {
            const double* src = g + (o * s.n + off) * s.inner;
            double* dst = gp + o * pn * s.inner;
            for (int64_t i = 0; i < pn * s.inner; ++i) dst[i] += src[i];
          }
        }
        off += pn;
      }
    });
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  const double* px = x.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) acc += px[i];
  Tensor out = Tensor::scalar(acc);
  if (tracking({&x})) {
    register_io(out, {&x});
    Tensor xc = x, oc = out;
    active_tape()->record([xc, oc]() mutable {
      const double g = oc.grad()[0];
      double* gx = xc.grad();
      const int64_t m = xc.numel();
      for (int64_t i = 0; i < m; ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor mean_all(const Tensor& x) {
  const int64_t n = x.numel();
  double acc = 0.0;
  const double* px = x.data();
  for (int64_t i = 0; i < n; ++i) acc += px[i];
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  if (tracking({&x})) {
    register_io(out, {&x});
    Tensor xc = x, oc = out;
    active_tape()->record([xc, oc, n]() mutable {
      const double g = oc.grad()[0] / static_cast<double>(n);
      double* gx = xc.grad();
      for (int64_t i = 0; i < n; ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor sum_axis(const Tensor& x, int axis) {
  const AxisSplit s = split_axis("sum_axis", x.shape(), axis);
  Shape out_shape;
  for (int i = 0; i < x.rank(); ++i) {
    if (i != axis) out_shape.push_back(x.dim(i));
  }
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out(out_shape);
  const double* px = x.data();
  double* po = out.data();
  for (int64_t o = 0; o < s.outer; ++o) {
    for (int64_t in = 0; in < s.inner; ++in) {
      const double* lane = px + o * s.n * s.inner + in;
      double acc = 0.0;
      for (int64_t i = 0; i < s.n; ++i) acc += lane[i * s.inner];
      po[o * s.inner + in] = acc;
    }
  }
  if (tracking({&x})) {
    register_io(out, {&x});
    Tensor xc = x, oc = out;
    active_tape()->record([xc, oc, s]() mutable {
      const double* g = oc.grad();
      double* gx = xc.grad();
      for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t in = 0; in < s.inner; ++in) {
          const double gv = g[o * s.inner + in];
          double* lane = gx + o * s.n * s.inner + in;
          for (int64_t i = 0; i < s.n; ++i) lane[i * s.inner] += gv;
        }
      }
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& x) {
  // log(1+e^x) with the large-argument branch to avoid overflow.
  return unary_op(
      x,
      [](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); },
      [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

Tensor exp(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor absval(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
  return unary_op(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) util::fail_invalid("clamp: lo > hi");
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = std::min(std::max(px[i], lo), hi);
  if (tracking({&x})) {
    register_io(out, {&x});
    Tensor xc = x, oc = out;
    active_tape()->record([xc, oc, lo, hi]() mutable {
      const double* g = oc.grad();
      const double* xv = xc.data();
      double* gx = xc.grad();
      const int64_t m = xc.numel();
      for (int64_t i = 0; i < m; ++i) {
        if (xv[i] >= lo && xv[i] <= hi) gx[i] += g[i];
      }
    });
  }
  return out;
}

Tensor softmax(const Tensor& x, int axis) {
  const AxisSplit s = split_axis("softmax", x.shape(), axis);
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (int64_t o = 0; o < s.outer; ++o) {
    for (int64_t in = 0; in < s.inner; ++in) {
      const double* lane = px + o * s.n * s.inner + in;
      double* olane = po + o * s.n * s.inner + in;
      double mx = lane[0];
      for (int64_t i = 1; i < s.n; ++i) mx = std::max(mx, lane[i * s.inner]);
      double denom = 0.0;
      for (int64_t i = 0; i < s.n; ++i) {
        const double e = std::exp(lane[i * s.inner] - mx);
        olane[i * s.inner] = e;
        denom += e;
      }
      for (int64_t i = 0; i < s.n; ++i) olane[i * s.inner] /= denom;
    }
  }
  if (tracking({&x})) {
    register_io(out, {&x});
    Tensor xc = x, oc = out;
    active_tape()->record([xc, oc, s]() mutable {
      const double* g = oc.grad();
      const double* y = oc.data();
      double* gx = xc.grad();
      for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t in = 0; in < s.inner; ++in) {
          const int64_t base = o * s.n * s.inner + in;
          double dot = 0.0;
          for (int64_t i = 0; i < s.n; ++i) dot += g[base + i * s.inner] * y[base + i * s.inner];
          for (int64_t i = 0; i < s.n; ++i) {
            const int64_t idx = base + i * s.inner;
            gx[idx] += y[idx] * (g[idx] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor l2_normalize(const Tensor& x, int axis) {
  const AxisSplit s = split_axis("l2_normalize", x.shape(), axis);
  constexpr double kEps = 1e-12;
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  std::vector<double> norms(static_cast<std::size_t>(s.outer * s.inner));
  for (int64_t o = 0; o < s.outer; ++o) {
    for (int64_t in = 0; in < s.inner; ++in) {
      const double* lane = px + o * s.n * s.inner + in;
      double* olane = po + o * s.n * s.inner + in;
      double sq = 0.0;
      for (int64_t i = 0; i < s.n; ++i) sq += lane[i * s.inner] * lane[i * s.inner];
      const double n0 = std::sqrt(sq);
      norms[static_cast<std::size_t>(o * s.inner + in)] = n0;
      if (n0 == 0.0) {
        // Degenerate-input guard: emit the canonical unit vector.
        olane[0] = 1.0;
        for (int64_t i = 1; i < s.n; ++i) olane[i * s.inner] = 0.0;
      } else {
        const double inv = 1.0 / (n0 + kEps);
        for (int64_t i = 0; i < s.n; ++i) olane[i * s.inner] = lane[i * s.inner] * inv;
      }
    }
  }
  if (tracking({&x})) {
    register_io(out, {&x});
    Tensor xc = x, oc = out;
    active_tape()->record([xc, oc, s, norms = std::move(norms)]() mutable {
      const double* g = oc.grad();
      const double* xv = xc.data();
      double* gx = xc.grad();
      for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t in = 0; in < s.inner; ++in) {
          const double n0 = norms[static_cast<std::size_t>(o * s.inner + in)];
          if (n0 == 0.0) continue;  // guard branch is constant
          const double n = n0 + kEps;
          const int64_t base = o * s.n * s.inner + in;
          double dot = 0.0;
          for (int64_t i = 0; i < s.n; ++i) dot += g[base + i * s.inner] * xv[base + i * s.inner];
          const double c = dot / (n * n * n0);
          for (int64_t i = 0; i < s.n; ++i) {
            const int64_t idx = base + i * s.inner;
            gx[idx] += g[idx] / n - c * xv[idx];
          }
        }
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape new_shape) { return x.reshaped(std::move(new_shape)); }

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
  const int rank = x.rank();
  if (static_cast<int>(perm.size()) != rank) {
    util::fail_invalid("permute: perm size " + std::to_string(perm.size()) +
                       " does not match rank of " + util::shape_str(x.shape()));
  }
  std::vector<bool> seen(static_cast<std::size_t>(rank), false);
  for (int p : perm) {
    if (p < 0 || p >= rank || seen[static_cast<std::size_t>(p)]) {
      util::fail_invalid("permute: invalid permutation for " + util::shape_str(x.shape()));
    }
    seen[static_cast<std::size_t>(p)] = true;
  }
  Shape out_shape(static_cast<std::size_t>(rank));
  for (int i = 0; i < rank; ++i) out_shape[static_cast<std::size_t>(i)] = x.dim(perm[i]);

  std::vector<int64_t> in_strides(static_cast<std::size_t>(rank), 1);
  for (int i = rank - 2; i >= 0; --i) {
    in_strides[static_cast<std::size_t>(i)] =
        in_strides[static_cast<std::size_t>(i + 1)] * x.dim(i + 1);
  }
  // Stride of the output's i-th axis inside the input buffer.
  std::vector<int64_t> gather(static_cast<std::size_t>(rank));
  for (int i = 0; i < rank; ++i) gather[static_cast<std::size_t>(i)] = in_strides[perm[i]];

  Tensor out(out_shape);
  const double* px = x.data();
  double* po = out.data();
  const int64_t n = x.numel();
  std::vector<int64_t> idx(static_cast<std::size_t>(rank), 0);
  int64_t src = 0;
  for (int64_t flat = 0; flat < n; ++flat) {
    po[flat] = px[src];
    for (int a = rank - 1; a >= 0; --a) {
      auto ua = static_cast<std::size_t>(a);
      if (++idx[ua] < out_shape[ua]) {
        src += gather[ua];
        break;
      }
      idx[ua] = 0;
      src -= gather[ua] * (out_shape[ua] - 1);
    }
  }
  if (tracking({&x})) {
    register_io(out, {&x});
    Tensor xc = x, oc = out;
    active_tape()->record([xc, oc, out_shape, gather, rank]() mutable {
      const double* g = oc.grad();
      double* gx = xc.grad();
      const int64_t m = oc.numel();
      std::vector<int64_t> idx2(static_cast<std::size_t>(rank), 0);
      int64_t src2 = 0;
      for (int64_t flat = 0; flat < m; ++flat) {
        gx[src2] += g[flat];
        for (int a = rank - 1; a >= 0; --a) {
          auto ua = static_cast<std::size_t>(a);
          if (++idx2[ua] < out_shape[ua]) {
            src2 += gather[ua];
            break;
          }
          idx2[ua] = 0;
          src2 -= gather[ua] * (out_shape[ua] - 1);
        }
      }
    });
  }
  return out;
}

}  // namespace ocrf::diff
