#include "amsdb/ops.hpp"

#include <algorithm>
#include <cstring>

namespace amsdb::ops {

namespace {

const kern::Kernels& K() { return kern::active(); }

// Gradient target for a parent inside a multi-output backward kernel: the
// real grad buffer when the parent participates, a zeroed scratch otherwise.
float* grad_or_scratch(Node& p, std::vector<float>& scratch) {
    if (p.requires_grad) {
        p.ensure_grad();
        return p.grad.data();
    }
    scratch.assign(p.value.size(), 0.0f);
    return scratch.data();
}

float dot(i64 n, const float* a, const float* b) {
    float s = 0.0f;
    for (i64 i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void require_4d(const Tensor& t, const char* what) {
    if (t.shape().size() != 4)
        throw ShapeError(std::string(what) + " must be 4-D [N,C,H,W], got " +
                         shape_str(t.shape()));
}

}  // namespace

// ---- matmul / linear ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 ||
        a.shape()[1] != b.shape()[0])
        throw ShapeError("matmul shape mismatch: " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
    const i64 m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<float> y(static_cast<std::size_t>(m * n));
    K().gemm(m, k, n, a.data(), b.data(), y.data(), false);
    return make_op({m, n}, std::move(y), {a.node(), b.node()},
                   [m, k, n](Node& out) {
                       Node& A = *out.parents[0];
                       Node& B = *out.parents[1];
                       const float* dy = out.grad.data();
                       if (A.requires_grad) {
                           A.ensure_grad();
                           std::vector<float> bt(static_cast<std::size_t>(n * k));
                           kern::ref::transpose<float>(k, n, B.value.data(), bt.data());
                           K().gemm(m, n, k, dy, bt.data(), A.grad.data(), true);
                       }
                       if (B.requires_grad) {
                           B.ensure_grad();
                           std::vector<float> at(static_cast<std::size_t>(k * m));
                           kern::ref::transpose<float>(m, k, A.value.data(), at.data());
                           K().gemm(k, m, n, at.data(), dy, B.grad.data(), true);
                       }
                   });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.shape().size() != 2 || w.shape().size() != 2 ||
        x.shape()[1] != w.shape()[0])
        throw ShapeError("linear shape mismatch: " + shape_str(x.shape()) +
                         " x " + shape_str(w.shape()));
    const i64 r = x.shape()[0], d = x.shape()[1], e = w.shape()[1];
    if (b.numel() != e)
        throw ShapeError("linear bias length " + shape_str(b.shape()) +
                         " does not match output width " + std::to_string(e));
    std::vector<float> y(static_cast<std::size_t>(r * e));
    K().gemm(r, d, e, x.data(), w.data(), y.data(), false);
    for (i64 i = 0; i < r; ++i)
        K().binary_fwd(kern::Binary::Add, e, y.data() + i * e, b.data(),
                       y.data() + i * e);
    return make_op({r, e}, std::move(y), {x.node(), w.node(), b.node()},
                   [r, d, e](Node& out) {
                       Node& X = *out.parents[0];
                       Node& W = *out.parents[1];
                       Node& B = *out.parents[2];
                       const float* dy = out.grad.data();
                       if (X.requires_grad) {
                           X.ensure_grad();
                           std::vector<float> wt(static_cast<std::size_t>(e * d));
                           kern::ref::transpose<float>(d, e, W.value.data(), wt.data());
                           K().gemm(r, e, d, dy, wt.data(), X.grad.data(), true);
                       }
                       if (W.requires_grad) {
                           W.ensure_grad();
                           std::vector<float> xt(static_cast<std::size_t>(d * r));
                           kern::ref::transpose<float>(r, d, X.value.data(), xt.data());
                           K().gemm(d, r, e, xt.data(), dy, W.grad.data(), true);
                       }
                       if (B.requires_grad) {
                           B.ensure_grad();
                           for (i64 i = 0; i < r; ++i)
                               K().axpy(e, 1.0f, dy + i * e, B.grad.data());
                       }
                   });
}

// ---- conv2d ---------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, i64 stride,
              i64 pad) {
    require_4d(x, "conv2d input");
    if (w.shape().size() != 4)
        throw ShapeError("conv2d kernel must be 4-D [O,C,kh,kw], got " +
                         shape_str(w.shape()));
    if (stride < 1) throw ValueError("conv2d stride must be >= 1");
    if (pad < 0) throw ValueError("conv2d padding must be >= 0");
    const i64 n = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
              wd = x.shape()[3];
    const i64 o = w.shape()[0], kc = w.shape()[1], kh = w.shape()[2],
              kw = w.shape()[3];
    if (kc != c)
        throw ShapeError("conv2d channel mismatch: input " +
                         shape_str(x.shape()) + " vs kernel " +
                         shape_str(w.shape()));
    if (b.numel() != o)
        throw ShapeError("conv2d bias " + shape_str(b.shape()) +
                         " does not match " + std::to_string(o) + " outputs");
    if (h + 2 * pad < kh || wd + 2 * pad < kw)
        throw ShapeError("conv2d kernel " + shape_str(w.shape()) +
                         " larger than padded input " + shape_str(x.shape()) +
                         " (pad " + std::to_string(pad) + ")");
    const i64 oh = (h + 2 * pad - kh) / stride + 1;
    const i64 ow = (wd + 2 * pad - kw) / stride + 1;
    const i64 ckk = c * kh * kw;
    const i64 ohow = oh * ow;

    std::vector<float> y(static_cast<std::size_t>(n * o * ohow));
    std::vector<float> col(static_cast<std::size_t>(ckk * ohow));
    for (i64 img = 0; img < n; ++img) {
        kern::ref::im2col<float>(x.data() + img * c * h * wd, c, h, wd, kh, kw,
                                 stride, pad, col.data());
        float* yimg = y.data() + img * o * ohow;
        K().gemm(o, ckk, ohow, w.data(), col.data(), yimg, false);
        for (i64 oc = 0; oc < o; ++oc)
            K().binary_scalar_fwd(kern::Binary::Add, ohow, yimg + oc * ohow,
                                  b.data()[oc], true, yimg + oc * ohow);
    }
    return make_op(
        {n, o, oh, ow}, std::move(y), {x.node(), w.node(), b.node()},
        [n, c, h, wd, o, kh, kw, stride, pad, oh, ow, ckk, ohow](Node& out) {
            Node& X = *out.parents[0];
            Node& W = *out.parents[1];
            Node& B = *out.parents[2];
            std::vector<float> col(static_cast<std::size_t>(ckk * ohow));
            std::vector<float> wt;
            if (X.requires_grad) {
                X.ensure_grad();
                wt.resize(static_cast<std::size_t>(ckk * o));
                kern::ref::transpose<float>(o, ckk, W.value.data(), wt.data());
            }
            if (W.requires_grad) W.ensure_grad();
            if (B.requires_grad) B.ensure_grad();
            std::vector<float> colt(
                W.requires_grad ? static_cast<std::size_t>(ohow * ckk) : 0);
            std::vector<float> colgrad(
                X.requires_grad ? static_cast<std::size_t>(ckk * ohow) : 0);
            for (i64 img = 0; img < n; ++img) {
                const float* dy = out.grad.data() + img * o * ohow;
                if (W.requires_grad || X.requires_grad)
                    kern::ref::im2col<float>(X.value.data() + img * c * h * wd,
                                             c, h, wd, kh, kw, stride, pad,
                                             col.data());
                if (W.requires_grad) {
                    kern::ref::transpose<float>(ckk, ohow, col.data(),
                                                colt.data());
                    K().gemm(o, ohow, ckk, dy, colt.data(), W.grad.data(),
                             true);
                }
                if (B.requires_grad)
                    for (i64 oc = 0; oc < o; ++oc)
                        B.grad.data()[oc] += K().reduce_sum(ohow, dy + oc * ohow);
                if (X.requires_grad) {
                    K().gemm(ckk, o, ohow, wt.data(), dy, colgrad.data(),
                             false);
                    kern::ref::col2im_add<float>(colgrad.data(), c, h, wd, kh,
                                                 kw, stride, pad,
                                                 X.grad.data() + img * c * h * wd);
                }
            }
        });
}

// ---- depthwise conv -------------------------------------------------------

Tensor dwconv2d(const Tensor& x, const Tensor& k, PadMode pad_mode) {
    require_4d(x, "dwconv2d input");
    if (k.shape().size() != 3)
        throw ShapeError("dwconv2d kernel must be 3-D [C,kh,kw], got " +
                         shape_str(k.shape()));
    const i64 n = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
              w = x.shape()[3];
    const i64 kh = k.shape()[1], kw = k.shape()[2];
    if (k.shape()[0] != c)
        throw ShapeError("dwconv2d channel mismatch: input " +
                         shape_str(x.shape()) + " vs kernel " +
                         shape_str(k.shape()));
    if (kh % 2 == 0 || kw % 2 == 0)
        throw ValueError("dwconv2d kernel dims must be odd, got " +
                         shape_str(k.shape()));
    const i64 pt = kh / 2, pl = kw / 2;
    const i64 ph = h + kh - 1, pw = w + kw - 1;

    std::vector<float> y(static_cast<std::size_t>(n * c * h * w));
    std::vector<float> xpad(static_cast<std::size_t>(c * ph * pw));
    for (i64 img = 0; img < n; ++img) {
        kern::ref::pad_plane<float>(x.data() + img * c * h * w, c, h, w, pt, pt,
                                    pl, pl, pad_mode, xpad.data());
        K().dwconv_valid_fwd(c, ph, pw, kh, kw, xpad.data(), k.data(),
                             y.data() + img * c * h * w);
    }
    return make_op(
        x.shape(), std::move(y), {x.node(), k.node()},
        [n, c, h, w, kh, kw, pt, pl, ph, pw, pad_mode](Node& out) {
            Node& X = *out.parents[0];
            Node& Kk = *out.parents[1];
            std::vector<float> buf(static_cast<std::size_t>(c * ph * pw));
            if (X.requires_grad) X.ensure_grad();
            if (Kk.requires_grad) Kk.ensure_grad();
            for (i64 img = 0; img < n; ++img) {
                const float* dy = out.grad.data() + img * c * h * w;
                if (X.requires_grad) {
                    std::fill(buf.begin(), buf.end(), 0.0f);
                    K().dwconv_valid_bwd_input(c, h, w, kh, kw, dy,
                                               Kk.value.data(), buf.data());
                    kern::ref::pad_plane_adjoint<float>(
                        buf.data(), c, h, w, pt, pt, pl, pl, pad_mode,
                        X.grad.data() + img * c * h * w);
                }
                if (Kk.requires_grad) {
                    kern::ref::pad_plane<float>(
                        X.value.data() + img * c * h * w, c, h, w, pt, pt, pl,
                        pl, pad_mode, buf.data());
                    K().dwconv_valid_bwd_kernel(c, ph, pw, kh, kw, buf.data(),
                                                dy, Kk.grad.data());
                }
            }
        });
}

Tensor bias_add_channel(const Tensor& x, const Tensor& b) {
    require_4d(x, "bias_add_channel input");
    const i64 n = x.shape()[0], c = x.shape()[1];
    const i64 hw = x.shape()[2] * x.shape()[3];
    if (b.numel() != c)
        throw ShapeError("bias " + shape_str(b.shape()) + " does not match " +
                         std::to_string(c) + " channels");
    std::vector<float> y(x.value());
    for (i64 img = 0; img < n; ++img)
        for (i64 ch = 0; ch < c; ++ch) {
            float* plane = y.data() + (img * c + ch) * hw;
            K().binary_scalar_fwd(kern::Binary::Add, hw, plane, b.data()[ch],
                                  true, plane);
        }
    return make_op(x.shape(), std::move(y), {x.node(), b.node()},
                   [n, c, hw](Node& out) {
                       Node& X = *out.parents[0];
                       Node& B = *out.parents[1];
                       if (X.requires_grad) {
                           X.ensure_grad();
                           K().axpy(out.numel(), 1.0f, out.grad.data(),
                                    X.grad.data());
                       }
                       if (B.requires_grad) {
                           B.ensure_grad();
                           for (i64 img = 0; img < n; ++img)
                               for (i64 ch = 0; ch < c; ++ch)
                                   B.grad.data()[ch] += K().reduce_sum(
                                       hw, out.grad.data() + (img * c + ch) * hw);
                       }
                   });
}

// ---- elementwise ----------------------------------------------------------

namespace {

enum class Side { None, Lhs, Rhs };  // which operand is the broadcast scalar

Tensor binary_op(kern::Binary bop, const Tensor& a, const Tensor& b) {
    Side side = Side::None;
    if (a.shape() != b.shape()) {
        if (a.numel() == 1)
            side = Side::Lhs;
        else if (b.numel() == 1)
            side = Side::Rhs;
        else
            throw ShapeError("elementwise shape mismatch beyond scalar "
                             "broadcast: " +
                             shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
    const Shape& out_shape = side == Side::Lhs ? b.shape() : a.shape();
    const i64 n = numel(out_shape);
    std::vector<float> y(static_cast<std::size_t>(n));
    switch (side) {
        case Side::None:
            K().binary_fwd(bop, n, a.data(), b.data(), y.data());
            break;
        case Side::Lhs:
            K().binary_scalar_fwd(bop, n, b.data(), a.data()[0], false, y.data());
            break;
        case Side::Rhs:
            K().binary_scalar_fwd(bop, n, a.data(), b.data()[0], true, y.data());
            break;
    }
    return make_op(out_shape, std::move(y), {a.node(), b.node()},
                   [bop, side, n](Node& out) {
                       Node& A = *out.parents[0];
                       Node& B = *out.parents[1];
                       const float* g = out.grad.data();
                       const float* av = A.value.data();
                       const float* bv = B.value.data();
                       const float* yv = out.value.data();
                       const bool need_a = A.requires_grad;
                       const bool need_b = B.requires_grad;
                       if (need_a) A.ensure_grad();
                       if (need_b) B.ensure_grad();
                       float* da = need_a ? A.grad.data() : nullptr;
                       float* db = need_b ? B.grad.data() : nullptr;
                       std::vector<float> tmp;
                       switch (bop) {
                           case kern::Binary::Add:
                               if (need_a) {
                                   if (side == Side::Lhs)
                                       da[0] += K().reduce_sum(n, g);
                                   else
                                       K().axpy(n, 1.0f, g, da);
                               }
                               if (need_b) {
                                   if (side == Side::Rhs)
                                       db[0] += K().reduce_sum(n, g);
                                   else
                                       K().axpy(n, 1.0f, g, db);
                               }
                               break;
                           case kern::Binary::Sub:
                               if (need_a) {
                                   if (side == Side::Lhs)
                                       da[0] += K().reduce_sum(n, g);
                                   else
                                       K().axpy(n, 1.0f, g, da);
                               }
                               if (need_b) {
                                   if (side == Side::Rhs)
                                       db[0] -= K().reduce_sum(n, g);
                                   else
                                       K().axpy(n, -1.0f, g, db);
                               }
                               break;
                           case kern::Binary::Mul:
                               if (need_a) {
                                   if (side == Side::Lhs)
                                       da[0] += dot(n, g, bv);
                                   else if (side == Side::Rhs)
                                       K().axpy(n, bv[0], g, da);
                                   else
                                       K().addmul(n, g, bv, da);
                               }
                               if (need_b) {
                                   if (side == Side::Rhs)
                                       db[0] += dot(n, g, av);
                                   else if (side == Side::Lhs)
                                       K().axpy(n, av[0], g, db);
                                   else
                                       K().addmul(n, g, av, db);
                               }
                               break;
                           case kern::Binary::Div:
                               // y = a/b: da = g/b, db = -g*y/b
                               if (need_a) {
                                   if (side == Side::Rhs) {
                                       K().axpy(n, 1.0f / bv[0], g, da);
                                   } else {
                                       tmp.resize(static_cast<std::size_t>(n));
                                       K().binary_fwd(kern::Binary::Div, n, g,
                                                      bv, tmp.data());
                                       if (side == Side::Lhs)
                                           da[0] += K().reduce_sum(n, tmp.data());
                                       else
                                           K().axpy(n, 1.0f, tmp.data(), da);
                                   }
                               }
                               if (need_b) {
                                   tmp.resize(static_cast<std::size_t>(n));
                                   K().binary_fwd(kern::Binary::Mul, n, g, yv,
                                                  tmp.data());
                                   if (side == Side::Rhs) {
                                       db[0] -= K().reduce_sum(n, tmp.data()) /
                                                bv[0];
                                   } else {
                                       K().binary_fwd(kern::Binary::Div, n,
                                                      tmp.data(), bv, tmp.data());
                                       K().axpy(n, -1.0f, tmp.data(), db);
                                   }
                               }
                               break;
                       }
                   });
}

Tensor unary_op(kern::Unary uop, const Tensor& x) {
    const i64 n = x.numel();
    std::vector<float> y(static_cast<std::size_t>(n));
    K().unary_fwd(uop, n, x.data(), y.data());
    return make_op(x.shape(), std::move(y), {x.node()}, [uop, n](Node& out) {
        Node& X = *out.parents[0];
        if (!X.requires_grad) return;
        X.ensure_grad();
        K().unary_bwd(uop, n, X.value.data(), out.value.data(),
                      out.grad.data(), X.grad.data());
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(kern::Binary::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(kern::Binary::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(kern::Binary::Mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(kern::Binary::Div, a, b); }

Tensor add_const(const Tensor& a, float c) {
    const i64 n = a.numel();
    std::vector<float> y(static_cast<std::size_t>(n));
    K().binary_scalar_fwd(kern::Binary::Add, n, a.data(), c, true, y.data());
    return make_op(a.shape(), std::move(y), {a.node()}, [n](Node& out) {
        Node& A = *out.parents[0];
        if (!A.requires_grad) return;
        A.ensure_grad();
        K().axpy(n, 1.0f, out.grad.data(), A.grad.data());
    });
}

Tensor mul_const(const Tensor& a, float c) {
    const i64 n = a.numel();
    std::vector<float> y(static_cast<std::size_t>(n));
    K().binary_scalar_fwd(kern::Binary::Mul, n, a.data(), c, true, y.data());
    return make_op(a.shape(), std::move(y), {a.node()}, [n, c](Node& out) {
        Node& A = *out.parents[0];
        if (!A.requires_grad) return;
        A.ensure_grad();
        K().axpy(n, c, out.grad.data(), A.grad.data());
    });
}

Tensor exp(const Tensor& x) { return unary_op(kern::Unary::Exp, x); }
Tensor sigmoid(const Tensor& x) { return unary_op(kern::Unary::Sigmoid, x); }
Tensor silu(const Tensor& x) { return unary_op(kern::Unary::Silu, x); }
Tensor relu(const Tensor& x) { return unary_op(kern::Unary::Relu, x); }
Tensor softplus(const Tensor& x) { return unary_op(kern::Unary::Softplus, x); }

// ---- layer norm -----------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  float eps) {
    const Shape& xs = x.shape();
    const i64 d = xs.back();
    if (gain.numel() != d || bias.numel() != d)
        throw ShapeError("layer_norm gain/bias must have length " +
                         std::to_string(d) + ", got " +
                         shape_str(gain.shape()) + " and " +
                         shape_str(bias.shape()));
    const i64 rows = x.numel() / d;
    std::vector<float> y(static_cast<std::size_t>(x.numel()));
    std::vector<float> mean(static_cast<std::size_t>(rows));
    std::vector<float> rstd(static_cast<std::size_t>(rows));
    kern::ref::layer_norm_fwd<float>(rows, d, x.data(), gain.data(),
                                     bias.data(), eps, y.data(), mean.data(),
                                     rstd.data());
    return make_op(
        xs, std::move(y), {x.node(), gain.node(), bias.node()},
        [rows, d, mean = std::move(mean), rstd = std::move(rstd)](Node& out) {
            Node& X = *out.parents[0];
            Node& G = *out.parents[1];
            Node& B = *out.parents[2];
            std::vector<float> sdx, sdg, sdb;
            float* dx = grad_or_scratch(X, sdx);
            float* dg = grad_or_scratch(G, sdg);
            float* db = grad_or_scratch(B, sdb);
            kern::ref::layer_norm_bwd<float>(rows, d, X.value.data(),
                                             G.value.data(), mean.data(),
                                             rstd.data(), out.grad.data(), dx,
                                             dg, db);
        });
}

// ---- reductions -----------------------------------------------------------

namespace {

Tensor reduce_impl(const Tensor& x, std::vector<i64> axes, bool take_mean) {
    const Shape xs = x.shape();
    const i64 rank = static_cast<i64>(xs.size());
    const i64 total = x.numel();

    if (axes.empty()) {
        const float scale = take_mean ? 1.0f / static_cast<float>(total) : 1.0f;
        const float s = K().reduce_sum(total, x.data()) * scale;
        return make_op({1}, {s}, {x.node()}, [total, scale](Node& out) {
            Node& X = *out.parents[0];
            if (!X.requires_grad) return;
            X.ensure_grad();
            const float g = out.grad[0] * scale;
            float* dx = X.grad.data();
            for (i64 i = 0; i < total; ++i) dx[i] += g;
        });
    }

    std::sort(axes.begin(), axes.end());
    for (std::size_t i = 0; i < axes.size(); ++i) {
        if (axes[i] < 0 || axes[i] >= rank)
            throw ShapeError("reduce axis " + std::to_string(axes[i]) +
                             " out of range for shape " + shape_str(xs));
        if (i > 0 && axes[i] == axes[i - 1])
            throw ShapeError("duplicate reduce axis " + std::to_string(axes[i]));
    }
    std::vector<bool> reduced(static_cast<std::size_t>(rank), false);
    i64 count = 1;
    for (i64 a : axes) {
        reduced[static_cast<std::size_t>(a)] = true;
        count *= xs[static_cast<std::size_t>(a)];
    }
    Shape out_shape;
    for (i64 dim = 0; dim < rank; ++dim)
        if (!reduced[static_cast<std::size_t>(dim)])
            out_shape.push_back(xs[static_cast<std::size_t>(dim)]);
    if (out_shape.empty()) out_shape = {1};
    const i64 out_n = numel(out_shape);
    const float scale = take_mean ? 1.0f / static_cast<float>(count) : 1.0f;

    // Output stride per input dim (0 for reduced dims), for an odometer walk.
    std::vector<i64> ostride(static_cast<std::size_t>(rank), 0);
    {
        i64 s = 1;
        for (i64 dim = rank - 1; dim >= 0; --dim) {
            if (!reduced[static_cast<std::size_t>(dim)]) {
                ostride[static_cast<std::size_t>(dim)] = s;
                s *= xs[static_cast<std::size_t>(dim)];
            }
        }
    }
    std::vector<float> out(static_cast<std::size_t>(out_n), 0.0f);
    {
        std::vector<i64> idx(static_cast<std::size_t>(rank), 0);
        const float* xv = x.data();
        i64 of = 0;
        for (i64 i = 0; i < total; ++i) {
            out[static_cast<std::size_t>(of)] += xv[i];
            for (i64 dim = rank - 1; dim >= 0; --dim) {
                const auto ud = static_cast<std::size_t>(dim);
                ++idx[ud];
                of += ostride[ud];
                if (idx[ud] < xs[ud]) break;
                of -= ostride[ud] * xs[ud];
                idx[ud] = 0;
            }
        }
    }
    if (take_mean)
        for (float& v : out) v *= scale;

    return make_op(std::move(out_shape), std::move(out), {x.node()},
                   [xs, rank, total, ostride, scale](Node& out_node) {
                       Node& X = *out_node.parents[0];
                       if (!X.requires_grad) return;
                       X.ensure_grad();
                       float* dx = X.grad.data();
                       const float* g = out_node.grad.data();
                       std::vector<i64> idx(static_cast<std::size_t>(rank), 0);
                       i64 of = 0;
                       for (i64 i = 0; i < total; ++i) {
                           dx[i] += g[of] * scale;
                           for (i64 dim = rank - 1; dim >= 0; --dim) {
                               const auto ud = static_cast<std::size_t>(dim);
                               ++idx[ud];
                               of += ostride[ud];
                               if (idx[ud] < xs[ud]) break;
                               of -= ostride[ud] * xs[ud];
                               idx[ud] = 0;
                           }
                       }
                   });
}

}  // namespace

Tensor reduce_sum(const Tensor& x, const std::vector<i64>& axes) {
    return reduce_impl(x, axes, false);
}

Tensor reduce_mean(const Tensor& x, const std::vector<i64>& axes) {
    return reduce_impl(x, axes, true);
}

// ---- shape ops ------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.numel())
        throw ShapeError("reshape " + shape_str(x.shape()) + " -> " +
                         shape_str(shape) + " changes element count");
    std::vector<float> y(x.value());
    const i64 n = x.numel();
    return make_op(std::move(shape), std::move(y), {x.node()}, [n](Node& out) {
        Node& X = *out.parents[0];
        if (!X.requires_grad) return;
        X.ensure_grad();
        K().axpy(n, 1.0f, out.grad.data(), X.grad.data());
    });
}

Tensor permute_rows(const Tensor& x, std::vector<i64> src_row) {
    if (x.shape().size() != 2)
        throw ShapeError("permute_rows input must be 2-D, got " +
                         shape_str(x.shape()));
    const i64 r = x.shape()[0], d = x.shape()[1];
    if (static_cast<i64>(src_row.size()) != r)
        throw ShapeError("permute_rows index length " +
                         std::to_string(src_row.size()) +
                         " does not match row count " + std::to_string(r));
    std::vector<bool> seen(static_cast<std::size_t>(r), false);
    for (i64 s : src_row) {
        if (s < 0 || s >= r || seen[static_cast<std::size_t>(s)])
            throw ValueError("permute_rows index is not a permutation of [0," +
                             std::to_string(r) + ")");
        seen[static_cast<std::size_t>(s)] = true;
    }
    std::vector<float> y(static_cast<std::size_t>(r * d));
    for (i64 i = 0; i < r; ++i)
        std::memcpy(y.data() + i * d, x.data() + src_row[static_cast<std::size_t>(i)] * d,
                    sizeof(float) * static_cast<std::size_t>(d));
    return make_op({r, d}, std::move(y), {x.node()},
                   [r, d, src_row = std::move(src_row)](Node& out) {
                       Node& X = *out.parents[0];
                       if (!X.requires_grad) return;
                       X.ensure_grad();
                       for (i64 i = 0; i < r; ++i)
                           K().axpy(d, 1.0f, out.grad.data() + i * d,
                                    X.grad.data() +
                                        src_row[static_cast<std::size_t>(i)] * d);
                   });
}

Tensor nchw_to_tokens(const Tensor& x) {
    require_4d(x, "nchw_to_tokens input");
    const i64 n = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
              w = x.shape()[3];
    const i64 hw = h * w;
    std::vector<float> y(static_cast<std::size_t>(n * hw * c));
    for (i64 img = 0; img < n; ++img)
        for (i64 ch = 0; ch < c; ++ch) {
            const float* src = x.data() + (img * c + ch) * hw;
            float* dst = y.data() + img * hw * c + ch;
            for (i64 p = 0; p < hw; ++p) dst[p * c] = src[p];
        }
    return make_op({n * hw, c}, std::move(y), {x.node()},
                   [n, c, hw](Node& out) {
                       Node& X = *out.parents[0];
                       if (!X.requires_grad) return;
                       X.ensure_grad();
                       for (i64 img = 0; img < n; ++img)
                           for (i64 ch = 0; ch < c; ++ch) {
                               float* dst = X.grad.data() + (img * c + ch) * hw;
                               const float* src =
                                   out.grad.data() + img * hw * c + ch;
                               for (i64 p = 0; p < hw; ++p) dst[p] += src[p * c];
                           }
                   });
}

Tensor tokens_to_nchw(const Tensor& x, i64 n, i64 c, i64 h, i64 w) {
    if (x.shape().size() != 2 || x.shape()[0] != n * h * w || x.shape()[1] != c)
        throw ShapeError("tokens_to_nchw expects [" + std::to_string(n * h * w) +
                         "," + std::to_string(c) + "], got " +
                         shape_str(x.shape()));
    const i64 hw = h * w;
    std::vector<float> y(static_cast<std::size_t>(n * c * hw));
    for (i64 img = 0; img < n; ++img)
        for (i64 ch = 0; ch < c; ++ch) {
            float* dst = y.data() + (img * c + ch) * hw;
            const float* src = x.data() + img * hw * c + ch;
            for (i64 p = 0; p < hw; ++p) dst[p] = src[p * c];
        }
    return make_op({n, c, h, w}, std::move(y), {x.node()},
                   [n, c, hw](Node& out) {
                       Node& X = *out.parents[0];
                       if (!X.requires_grad) return;
                       X.ensure_grad();
                       for (i64 img = 0; img < n; ++img)
                           for (i64 ch = 0; ch < c; ++ch) {
                               const float* src =
                                   out.grad.data() + (img * c + ch) * hw;
                               float* dst = X.grad.data() + img * hw * c + ch;
                               for (i64 p = 0; p < hw; ++p) dst[p * c] += src[p];
                           }
                   });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_4d(a, "concat_channels lhs");
    require_4d(b, "concat_channels rhs");
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as[0] != bs[0] || as[2] != bs[2] || as[3] != bs[3])
        throw ShapeError("concat_channels mismatch: " + shape_str(as) +
                         " vs " + shape_str(bs));
    const i64 n = as[0], c1 = as[1], c2 = bs[1], hw = as[2] * as[3];
    std::vector<float> y(static_cast<std::size_t>(n * (c1 + c2) * hw));
    for (i64 img = 0; img < n; ++img) {
        std::memcpy(y.data() + img * (c1 + c2) * hw, a.data() + img * c1 * hw,
                    sizeof(float) * static_cast<std::size_t>(c1 * hw));
        std::memcpy(y.data() + img * (c1 + c2) * hw + c1 * hw,
                    b.data() + img * c2 * hw,
                    sizeof(float) * static_cast<std::size_t>(c2 * hw));
    }
    return make_op({n, c1 + c2, as[2], as[3]}, std::move(y),
                   {a.node(), b.node()}, [n, c1, c2, hw](Node& out) {
                       Node& A = *out.parents[0];
                       Node& B = *out.parents[1];
                       for (i64 img = 0; img < n; ++img) {
                           const float* g = out.grad.data() + img * (c1 + c2) * hw;
                           if (A.requires_grad) {
                               A.ensure_grad();
                               K().axpy(c1 * hw, 1.0f, g,
                                        A.grad.data() + img * c1 * hw);
                           }
                           if (B.requires_grad) {
                               B.ensure_grad();
                               K().axpy(c2 * hw, 1.0f, g + c1 * hw,
                                        B.grad.data() + img * c2 * hw);
                           }
                       }
                   });
}

Tensor upsample_nearest2x(const Tensor& x) {
    require_4d(x, "upsample_nearest2x input");
    const i64 n = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
              w = x.shape()[3];
    std::vector<float> y(static_cast<std::size_t>(n * c * 4 * h * w));
    const i64 ow = 2 * w;
    for (i64 pc = 0; pc < n * c; ++pc) {
        const float* src = x.data() + pc * h * w;
        float* dst = y.data() + pc * 4 * h * w;
        for (i64 iy = 0; iy < h; ++iy)
            for (i64 ix = 0; ix < w; ++ix) {
                const float v = src[iy * w + ix];
                float* cell = dst + (2 * iy) * ow + 2 * ix;
                cell[0] = v;
                cell[1] = v;
                cell[ow] = v;
                cell[ow + 1] = v;
            }
    }
    return make_op({n, c, 2 * h, 2 * w}, std::move(y), {x.node()},
                   [n, c, h, w, ow](Node& out) {
                       Node& X = *out.parents[0];
                       if (!X.requires_grad) return;
                       X.ensure_grad();
                       for (i64 pc = 0; pc < n * c; ++pc) {
                           float* dst = X.grad.data() + pc * h * w;
                           const float* g = out.grad.data() + pc * 4 * h * w;
                           for (i64 iy = 0; iy < h; ++iy)
                               for (i64 ix = 0; ix < w; ++ix) {
                                   const float* cell = g + (2 * iy) * ow + 2 * ix;
                                   dst[iy * w + ix] += cell[0] + cell[1] +
                                                       cell[ow] + cell[ow + 1];
                               }
                       }
                   });
}

// ---- selective scan -------------------------------------------------------

Tensor scan_core(const Tensor& u, const Tensor& delta, const Tensor& bt,
                 const Tensor& ct, const Tensor& A, const Tensor& d_skip,
                 i64 batch) {
    if (u.shape().size() != 2)
        throw ShapeError("scan_core u must be 2-D [batch*L, D], got " +
                         shape_str(u.shape()));
    const i64 r = u.shape()[0], d = u.shape()[1];
    if (delta.shape() != u.shape())
        throw ShapeError("scan_core delta shape " + shape_str(delta.shape()) +
                         " must match u " + shape_str(u.shape()));
    if (bt.shape().size() != 2 || bt.shape()[0] != r)
        throw ShapeError("scan_core bt must be [" + std::to_string(r) +
                         ",S], got " + shape_str(bt.shape()));
    const i64 s = bt.shape()[1];
    if (ct.shape() != bt.shape())
        throw ShapeError("scan_core ct shape " + shape_str(ct.shape()) +
                         " must match bt " + shape_str(bt.shape()));
    if (A.shape().size() != 2 || A.shape()[0] != d || A.shape()[1] != s)
        throw ShapeError("scan_core A must be [" + std::to_string(d) + "," +
                         std::to_string(s) + "], got " + shape_str(A.shape()));
    if (d_skip.numel() != d)
        throw ShapeError("scan_core d_skip must have length " +
                         std::to_string(d) + ", got " +
                         shape_str(d_skip.shape()));
    if (batch < 1 || r % batch != 0)
        throw ShapeError("scan_core rows " + std::to_string(r) +
                         " not divisible by batch " + std::to_string(batch));
    const i64 l = r / batch;

    std::vector<float> y(static_cast<std::size_t>(r * d));
    {
        std::vector<float> h(static_cast<std::size_t>(l * d * s));
        std::vector<float> abar(static_cast<std::size_t>(l * d * s));
        for (i64 img = 0; img < batch; ++img)
            K().scan_core_fwd(l, d, s, u.data() + img * l * d, A.data(),
                              delta.data() + img * l * d,
                              bt.data() + img * l * s, ct.data() + img * l * s,
                              d_skip.data(), h.data(), abar.data(),
                              y.data() + img * l * d);
    }
    return make_op(
        {r, d}, std::move(y),
        {u.node(), delta.node(), bt.node(), ct.node(), A.node(), d_skip.node()},
        [batch, l, d, s](Node& out) {
            Node& U = *out.parents[0];
            Node& Dl = *out.parents[1];
            Node& B = *out.parents[2];
            Node& C = *out.parents[3];
            Node& Am = *out.parents[4];
            Node& Ds = *out.parents[5];
            std::vector<float> su, sdl, sb, sc, sa, sds;
            float* du = grad_or_scratch(U, su);
            float* ddelta = grad_or_scratch(Dl, sdl);
            float* dbt = grad_or_scratch(B, sb);
            float* dct = grad_or_scratch(C, sc);
            float* da = grad_or_scratch(Am, sa);
            float* dds = grad_or_scratch(Ds, sds);
            // Hidden states are recomputed per image instead of being saved
            // from the forward pass.
            std::vector<float> h(static_cast<std::size_t>(l * d * s));
            std::vector<float> abar(static_cast<std::size_t>(l * d * s));
            std::vector<float> ytmp(static_cast<std::size_t>(l * d));
            for (i64 img = 0; img < batch; ++img) {
                const float* un = U.value.data() + img * l * d;
                const float* dn = Dl.value.data() + img * l * d;
                const float* bn = B.value.data() + img * l * s;
                const float* cn = C.value.data() + img * l * s;
                K().scan_core_fwd(l, d, s, un, Am.value.data(), dn, bn, cn,
                                  Ds.value.data(), h.data(), abar.data(),
                                  ytmp.data());
                K().scan_core_bwd(l, d, s, un, Am.value.data(), dn, bn, cn,
                                  Ds.value.data(), h.data(), abar.data(),
                                  out.grad.data() + img * l * d,
                                  du + img * l * d, da, ddelta + img * l * d,
                                  dbt + img * l * s, dct + img * l * s, dds);
            }
        });
}

}  // namespace amsdb::ops
