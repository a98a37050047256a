#pragma once

// Reference kernels. Templated on the scalar type so the gradient-check
// harness can instantiate them in double precision; the float instantiations
// are the scalar lane of the runtime dispatch table (see kernels.hpp).
//
// All loops use fixed iteration order. Outputs are a pure function of the
// inputs; SIMD variants must agree with these within the tolerances asserted
// by the equivalence tests.

#include <cmath>
#include <cstring>
#include <vector>

#include "amsdb/common.hpp"

namespace amsdb::kern {

enum class Unary { Exp, Sigmoid, Silu, Relu, Softplus };
enum class Binary { Add, Sub, Mul, Div };
enum class PadMode { Zero, Reflect };

// Mirror index into [0, n); reflect-101 folded so arbitrary offsets are safe.
// n == 1 degenerates to replication.
inline i64 reflect_index(i64 i, i64 n) {
    if (n == 1) return 0;
    const i64 period = 2 * (n - 1);
    i64 m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - m;
}

namespace ref {

template <class T>
void gemm(i64 m, i64 k, i64 n, const T* a, const T* b, T* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(T) * static_cast<std::size_t>(m * n));
    for (i64 i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (i64 p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + p * n;
            for (i64 j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <class T>
void transpose(i64 m, i64 n, const T* a, T* b) {
    for (i64 i = 0; i < m; ++i)
        for (i64 j = 0; j < n; ++j) b[j * m + i] = a[i * n + j];
}

template <class T>
T sigmoid_s(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <class T>
T softplus_s(T x) {
    // max(x,0) + log1p(exp(-|x|)), stable in both tails
    const T ax = std::abs(x);
    return (x > T(0) ? x : T(0)) + std::log1p(std::exp(-ax));
}

template <class T>
void unary_fwd(Unary op, i64 n, const T* x, T* y) {
    switch (op) {
        case Unary::Exp:
            for (i64 i = 0; i < n; ++i) y[i] = std::exp(x[i]);
            break;
        case Unary::Sigmoid:
            for (i64 i = 0; i < n; ++i) y[i] = sigmoid_s(x[i]);
            break;
        case Unary::Silu:
            for (i64 i = 0; i < n; ++i) y[i] = x[i] * sigmoid_s(x[i]);
            break;
        case Unary::Relu:
            for (i64 i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
            break;
        case Unary::Softplus:
            for (i64 i = 0; i < n; ++i) y[i] = softplus_s(x[i]);
            break;
    }
}

// dx += dy * f'(x); y is the forward output (reused where it saves an exp)
template <class T>
void unary_bwd(Unary op, i64 n, const T* x, const T* y, const T* dy, T* dx) {
    switch (op) {
        case Unary::Exp:
            for (i64 i = 0; i < n; ++i) dx[i] += dy[i] * y[i];
            break;
        case Unary::Sigmoid:
            for (i64 i = 0; i < n; ++i) dx[i] += dy[i] * y[i] * (T(1) - y[i]);
            break;
        case Unary::Silu:
            for (i64 i = 0; i < n; ++i) {
                const T s = sigmoid_s(x[i]);
                dx[i] += dy[i] * s * (T(1) + x[i] * (T(1) - s));
            }
            break;
        case Unary::Relu:
            for (i64 i = 0; i < n; ++i) dx[i] += x[i] > T(0) ? dy[i] : T(0);
            break;
        case Unary::Softplus:
            for (i64 i = 0; i < n; ++i) dx[i] += dy[i] * sigmoid_s(x[i]);
            break;
    }
}

template <class T>
void binary_fwd(Binary op, i64 n, const T* a, const T* b, T* y) {
    switch (op) {
        case Binary::Add:
            for (i64 i = 0; i < n; ++i) y[i] = a[i] + b[i];
            break;
        case Binary::Sub:
            for (i64 i = 0; i < n; ++i) y[i] = a[i] - b[i];
            break;
        case Binary::Mul:
            for (i64 i = 0; i < n; ++i) y[i] = a[i] * b[i];
            break;
        case Binary::Div:
            for (i64 i = 0; i < n; ++i) y[i] = a[i] / b[i];
            break;
    }
}

// y[i] = a[i] op s (scalar_rhs) or s op a[i]
template <class T>
void binary_scalar_fwd(Binary op, i64 n, const T* a, T s, bool scalar_rhs, T* y) {
    switch (op) {
        case Binary::Add:
            for (i64 i = 0; i < n; ++i) y[i] = a[i] + s;
            break;
        case Binary::Sub:
            if (scalar_rhs)
                for (i64 i = 0; i < n; ++i) y[i] = a[i] - s;
            else
                for (i64 i = 0; i < n; ++i) y[i] = s - a[i];
            break;
        case Binary::Mul:
            for (i64 i = 0; i < n; ++i) y[i] = a[i] * s;
            break;
        case Binary::Div:
            if (scalar_rhs)
                for (i64 i = 0; i < n; ++i) y[i] = a[i] / s;
            else
                for (i64 i = 0; i < n; ++i) y[i] = s / a[i];
            break;
    }
}

template <class T>
void axpy(i64 n, T alpha, const T* x, T* y) {
    for (i64 i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// y += a * b elementwise
template <class T>
void addmul(i64 n, const T* a, const T* b, T* y) {
    for (i64 i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

template <class T>
T reduce_sum(i64 n, const T* x) {
    T s = T(0);
    for (i64 i = 0; i < n; ++i) s += x[i];
    return s;
}

// ---- layer norm over the last dimension ----------------------------------

template <class T>
void layer_norm_fwd(i64 rows, i64 d, const T* x, const T* g, const T* b, T eps,
                    T* y, T* mean, T* rstd) {
    for (i64 r = 0; r < rows; ++r) {
        const T* xr = x + r * d;
        T* yr = y + r * d;
        T mu = T(0);
        for (i64 j = 0; j < d; ++j) mu += xr[j];
        mu /= static_cast<T>(d);
        T var = T(0);
        for (i64 j = 0; j < d; ++j) {
            const T c = xr[j] - mu;
            var += c * c;
        }
        var /= static_cast<T>(d);
        const T rs = T(1) / std::sqrt(var + eps);
        mean[r] = mu;
        rstd[r] = rs;
        for (i64 j = 0; j < d; ++j) yr[j] = (xr[j] - mu) * rs * g[j] + b[j];
    }
}

template <class T>
void layer_norm_bwd(i64 rows, i64 d, const T* x, const T* g, const T* mean,
                    const T* rstd, const T* dy, T* dx, T* dg, T* db) {
    for (i64 r = 0; r < rows; ++r) {
        const T* xr = x + r * d;
        const T* dyr = dy + r * d;
        T* dxr = dx + r * d;
        const T mu = mean[r];
        const T rs = rstd[r];
        // dxhat = dy*g; dx = rs*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
        T s1 = T(0), s2 = T(0);
        for (i64 j = 0; j < d; ++j) {
            const T xhat = (xr[j] - mu) * rs;
            const T dxhat = dyr[j] * g[j];
            s1 += dxhat;
            s2 += dxhat * xhat;
        }
        s1 /= static_cast<T>(d);
        s2 /= static_cast<T>(d);
        for (i64 j = 0; j < d; ++j) {
            const T xhat = (xr[j] - mu) * rs;
            const T dxhat = dyr[j] * g[j];
            dxr[j] += rs * (dxhat - s1 - xhat * s2);
            dg[j] += dyr[j] * xhat;
            db[j] += dyr[j];
        }
    }
}

// ---- dense conv building blocks (im2col route) ---------------------------

// x[c,h,w] -> col[(c*kh*kw) x (oh*ow)], zero padding
template <class T>
void im2col(const T* x, i64 c, i64 h, i64 w, i64 kh, i64 kw, i64 stride,
            i64 pad, T* col) {
    const i64 oh = (h + 2 * pad - kh) / stride + 1;
    const i64 ow = (w + 2 * pad - kw) / stride + 1;
    i64 row = 0;
    for (i64 ch = 0; ch < c; ++ch) {
        for (i64 dy = 0; dy < kh; ++dy) {
            for (i64 dx = 0; dx < kw; ++dx, ++row) {
                T* dst = col + row * oh * ow;
                for (i64 oy = 0; oy < oh; ++oy) {
                    const i64 sy = oy * stride - pad + dy;
                    for (i64 ox = 0; ox < ow; ++ox) {
                        const i64 sx = ox * stride - pad + dx;
                        const bool in = sy >= 0 && sy < h && sx >= 0 && sx < w;
                        dst[oy * ow + ox] = in ? x[(ch * h + sy) * w + sx] : T(0);
                    }
                }
            }
        }
    }
}

// adjoint of im2col: x[c,h,w] += scatter(col)
template <class T>
void col2im_add(const T* col, i64 c, i64 h, i64 w, i64 kh, i64 kw, i64 stride,
                i64 pad, T* x) {
    const i64 oh = (h + 2 * pad - kh) / stride + 1;
    const i64 ow = (w + 2 * pad - kw) / stride + 1;
    i64 row = 0;
    for (i64 ch = 0; ch < c; ++ch) {
        for (i64 dy = 0; dy < kh; ++dy) {
            for (i64 dx = 0; dx < kw; ++dx, ++row) {
                const T* src = col + row * oh * ow;
                for (i64 oy = 0; oy < oh; ++oy) {
                    const i64 sy = oy * stride - pad + dy;
                    if (sy < 0 || sy >= h) continue;
                    for (i64 ox = 0; ox < ow; ++ox) {
                        const i64 sx = ox * stride - pad + dx;
                        if (sx < 0 || sx >= w) continue;
                        x[(ch * h + sy) * w + sx] += src[oy * ow + ox];
                    }
                }
            }
        }
    }
}

// ---- depthwise conv (valid correlation over a caller-padded buffer) ------

// xpad[c, ph, pw], kernel k[c, kh, kw] -> y[c, ph-kh+1, pw-kw+1]
template <class T>
void dwconv_valid_fwd(i64 c, i64 ph, i64 pw, i64 kh, i64 kw, const T* xpad,
                      const T* k, T* y) {
    const i64 oh = ph - kh + 1;
    const i64 ow = pw - kw + 1;
    for (i64 ch = 0; ch < c; ++ch) {
        const T* xc = xpad + ch * ph * pw;
        const T* kc = k + ch * kh * kw;
        T* yc = y + ch * oh * ow;
        for (i64 oy = 0; oy < oh; ++oy) {
            for (i64 ox = 0; ox < ow; ++ox) {
                T acc = T(0);
                for (i64 dy = 0; dy < kh; ++dy) {
                    const T* xrow = xc + (oy + dy) * pw + ox;
                    const T* krow = kc + dy * kw;
                    for (i64 dx = 0; dx < kw; ++dx) acc += xrow[dx] * krow[dx];
                }
                yc[oy * ow + ox] = acc;
            }
        }
    }
}

// dxpad[c, oh+kh-1, ow+kw-1] += full correlation of dy with the flipped
// kernel; the adjoint of dwconv_valid_fwd w.r.t. the padded input.
template <class T>
void dwconv_valid_bwd_input(i64 c, i64 oh, i64 ow, i64 kh, i64 kw, const T* dy,
                            const T* k, T* dxpad) {
    const i64 ph = oh + kh - 1;
    const i64 pw = ow + kw - 1;
    for (i64 ch = 0; ch < c; ++ch) {
        const T* dyc = dy + ch * oh * ow;
        const T* kc = k + ch * kh * kw;
        T* dxc = dxpad + ch * ph * pw;
        for (i64 py = 0; py < ph; ++py) {
            for (i64 px = 0; px < pw; ++px) {
                T acc = T(0);
                // output positions whose window covers (py,px)
                for (i64 dy2 = 0; dy2 < kh; ++dy2) {
                    const i64 oy = py - dy2;
                    if (oy < 0 || oy >= oh) continue;
                    for (i64 dx2 = 0; dx2 < kw; ++dx2) {
                        const i64 ox = px - dx2;
                        if (ox < 0 || ox >= ow) continue;
                        acc += dyc[oy * ow + ox] * kc[dy2 * kw + dx2];
                    }
                }
                dxc[py * pw + px] += acc;
            }
        }
    }
}

// dk[c, kh, kw] += sum over output positions of dy * xpad window
template <class T>
void dwconv_valid_bwd_kernel(i64 c, i64 ph, i64 pw, i64 kh, i64 kw,
                             const T* xpad, const T* dy, T* dk) {
    const i64 oh = ph - kh + 1;
    const i64 ow = pw - kw + 1;
    for (i64 ch = 0; ch < c; ++ch) {
        const T* xc = xpad + ch * ph * pw;
        const T* dyc = dy + ch * oh * ow;
        T* dkc = dk + ch * kh * kw;
        for (i64 dy2 = 0; dy2 < kh; ++dy2) {
            for (i64 dx2 = 0; dx2 < kw; ++dx2) {
                T acc = T(0);
                for (i64 oy = 0; oy < oh; ++oy) {
                    const T* xrow = xc + (oy + dy2) * pw + dx2;
                    const T* dyrow = dyc + oy * ow;
                    for (i64 ox = 0; ox < ow; ++ox) acc += xrow[ox] * dyrow[ox];
                }
                dkc[dy2 * kw + dx2] += acc;
            }
        }
    }
}

// Pad a [c,h,w] plane stack by (pt,pb,pl,pr); Zero or Reflect fill.
template <class T>
void pad_plane(const T* x, i64 c, i64 h, i64 w, i64 pt, i64 pb, i64 pl, i64 pr,
               PadMode mode, T* out) {
    const i64 ph = h + pt + pb;
    const i64 pw = w + pl + pr;
    for (i64 ch = 0; ch < c; ++ch) {
        const T* xc = x + ch * h * w;
        T* oc = out + ch * ph * pw;
        for (i64 y = 0; y < ph; ++y) {
            const i64 sy = y - pt;
            for (i64 x2 = 0; x2 < pw; ++x2) {
                const i64 sx = x2 - pl;
                if (mode == PadMode::Zero) {
                    const bool in = sy >= 0 && sy < h && sx >= 0 && sx < w;
                    oc[y * pw + x2] = in ? xc[sy * w + sx] : T(0);
                } else {
                    oc[y * pw + x2] =
                        xc[reflect_index(sy, h) * w + reflect_index(sx, w)];
                }
            }
        }
    }
}

// Adjoint of pad_plane: fold the padded gradient back onto [c,h,w].
template <class T>
void pad_plane_adjoint(const T* gpad, i64 c, i64 h, i64 w, i64 pt, i64 pb,
                       i64 pl, i64 pr, PadMode mode, T* gx) {
    const i64 ph = h + pt + pb;
    const i64 pw = w + pl + pr;
    for (i64 ch = 0; ch < c; ++ch) {
        const T* gc = gpad + ch * ph * pw;
        T* xc = gx + ch * h * w;
        for (i64 y = 0; y < ph; ++y) {
            const i64 sy = y - pt;
            for (i64 x2 = 0; x2 < pw; ++x2) {
                const i64 sx = x2 - pl;
                if (mode == PadMode::Zero) {
                    if (sy >= 0 && sy < h && sx >= 0 && sx < w)
                        xc[sy * w + sx] += gc[y * pw + x2];
                } else {
                    xc[reflect_index(sy, h) * w + reflect_index(sx, w)] +=
                        gc[y * pw + x2];
                }
            }
        }
    }
}

// ---- selective scan core --------------------------------------------------
//
// Per token t, channel d, state s:
//   abar = exp(delta[t,d] * A[d,s])
//   h[t,d,s] = abar * h[t-1,d,s] + delta[t,d] * Bt[t,s] * u[t,d]
//   y[t,d]   = sum_s Ct[t,s] * h[t,d,s] + Dskip[d] * u[t,d]
// h and abar are written out for the backward pass.

template <class T>
void scan_core_fwd(i64 L, i64 D, i64 S, const T* u, const T* A, const T* delta,
                   const T* Bt, const T* Ct, const T* Dskip, T* h, T* abar,
                   T* y) {
    std::vector<T> hprev(static_cast<std::size_t>(D * S), T(0));
    for (i64 t = 0; t < L; ++t) {
        const T* ut = u + t * D;
        const T* bt = Bt + t * S;
        const T* ct = Ct + t * S;
        T* ht = h + t * D * S;
        T* at = abar + t * D * S;
        T* yt = y + t * D;
        for (i64 d = 0; d < D; ++d) {
            const T dt = delta[t * D + d];
            const T du = dt * ut[d];
            const T* arow = A + d * S;
            T* hrow = ht + d * S;
            T* atrow = at + d * S;
            T* hp = hprev.data() + d * S;
            T acc = T(0);
            for (i64 s = 0; s < S; ++s) {
                const T ab = std::exp(dt * arow[s]);
                const T hv = ab * hp[s] + du * bt[s];
                atrow[s] = ab;
                hrow[s] = hv;
                hp[s] = hv;
                acc += ct[s] * hv;
            }
            yt[d] = acc + Dskip[d] * ut[d];
        }
    }
}

template <class T>
void scan_core_bwd(i64 L, i64 D, i64 S, const T* u, const T* A, const T* delta,
                   const T* Bt, const T* Ct, const T* Dskip, const T* h,
                   const T* abar, const T* dy, T* du, T* dA, T* ddelta, T* dBt,
                   T* dCt, T* dDskip) {
    std::vector<T> dh(static_cast<std::size_t>(D * S), T(0));
    for (i64 t = L - 1; t >= 0; --t) {
        const T* ut = u + t * D;
        const T* bt = Bt + t * S;
        const T* ct = Ct + t * S;
        const T* ht = h + t * D * S;
        const T* hprev = t > 0 ? h + (t - 1) * D * S : nullptr;
        const T* at = abar + t * D * S;
        const T* dyt = dy + t * D;
        for (i64 d = 0; d < D; ++d) {
            const T g = dyt[d];
            const T dt = delta[t * D + d];
            const T* arow = A + d * S;
            const T* hrow = ht + d * S;
            const T* atrow = at + d * S;
            T* dhrow = dh.data() + d * S;
            T ddt = T(0);
            T duv = g * Dskip[d];
            for (i64 s = 0; s < S; ++s) {
                // dh gets the output contribution plus what was carried
                // back from t+1 (already in dhrow)
                const T dhv = dhrow[s] + g * ct[s];
                dCt[t * S + s] += g * hrow[s];
                const T hp = hprev ? hprev[d * S + s] : T(0);
                ddt += dhv * (arow[s] * atrow[s] * hp + bt[s] * ut[d]);
                dA[d * S + s] += dhv * dt * atrow[s] * hp;
                dBt[t * S + s] += dhv * dt * ut[d];
                duv += dhv * dt * bt[s];
                // carry to t-1
                dhrow[s] = dhv * atrow[s];
            }
            ddelta[t * D + d] += ddt;
            du[t * D + d] += duv;
            dDskip[d] += g * ut[d];
        }
    }
}

// ---- adam -----------------------------------------------------------------

// bc1 = 1/(1-b1^t), bc2 = 1/(1-b2^t) precomputed by the caller.
template <class T>
void adam_update(i64 n, T* w, const T* g, T* m, T* v, T lr, T b1, T b2, T eps,
                 T bc1, T bc2) {
    for (i64 i = 0; i < n; ++i) {
        const T gi = g[i];
        m[i] = b1 * m[i] + (T(1) - b1) * gi;
        v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
        const T mhat = m[i] * bc1;
        const T vhat = v[i] * bc2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace ref
}  // namespace amsdb::kern
