#ifdef AMSDB_BUILD_AVX2

// AVX2+FMA lane. This TU is compiled with -mavx2 -mfma and must only be
// entered through the dispatch table after a CPUID check. Scalar remainder
// loops are written out by hand here instead of calling the ref:: templates,
// so no template instantiation from this TU (which the compiler is free to
// auto-vectorize with AVX) can be COMDAT-merged into the scalar lane.

#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "amsdb/kernels.hpp"

namespace amsdb::kern {
namespace {

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

// exp/log polynomial kernels (cephes coefficients), ~1 ulp on float.
inline __m256 exp256(__m256 x) {
    const __m256 hi = _mm256_set1_ps(88.3762626647949f);
    const __m256 lo = _mm256_set1_ps(-88.3762626647949f);
    const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
    const __m256 c1 = _mm256_set1_ps(0.693359375f);
    const __m256 c2 = _mm256_set1_ps(-2.12194440e-4f);
    const __m256 one = _mm256_set1_ps(1.0f);

    x = _mm256_max_ps(_mm256_min_ps(x, hi), lo);
    __m256 fx = _mm256_floor_ps(_mm256_fmadd_ps(x, log2e, _mm256_set1_ps(0.5f)));
    x = _mm256_fnmadd_ps(fx, c1, x);
    x = _mm256_fnmadd_ps(fx, c2, x);
    const __m256 z = _mm256_mul_ps(x, x);
    __m256 y = _mm256_set1_ps(1.9875691500e-4f);
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
    y = _mm256_fmadd_ps(y, z, x);
    y = _mm256_add_ps(y, one);
    __m256i n = _mm256_cvttps_epi32(fx);
    n = _mm256_add_epi32(n, _mm256_set1_epi32(127));
    n = _mm256_slli_epi32(n, 23);
    return _mm256_mul_ps(y, _mm256_castsi256_ps(n));
}

// Requires x > 0 (callers pass 1 + exp(...)).
inline __m256 log256(__m256 x) {
    const __m256 one = _mm256_set1_ps(1.0f);
    x = _mm256_max_ps(x, _mm256_set1_ps(1.17549435e-38f));
    __m256i emm0 = _mm256_srli_epi32(_mm256_castps_si256(x), 23);
    x = _mm256_and_ps(x, _mm256_castsi256_ps(_mm256_set1_epi32(~0x7f800000)));
    x = _mm256_or_ps(x, _mm256_set1_ps(0.5f));
    emm0 = _mm256_sub_epi32(emm0, _mm256_set1_epi32(0x7f));
    __m256 e = _mm256_add_ps(_mm256_cvtepi32_ps(emm0), one);
    const __m256 mask =
        _mm256_cmp_ps(x, _mm256_set1_ps(0.707106781186547524f), _CMP_LT_OQ);
    const __m256 tmp = _mm256_and_ps(x, mask);
    x = _mm256_sub_ps(x, one);
    e = _mm256_sub_ps(e, _mm256_and_ps(one, mask));
    x = _mm256_add_ps(x, tmp);
    const __m256 z = _mm256_mul_ps(x, x);
    __m256 y = _mm256_set1_ps(7.0376836292e-2f);
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(-1.1514610310e-1f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.1676998740e-1f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(-1.2420140846e-1f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.4249322787e-1f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(-1.6668057665e-1f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(2.0000714765e-1f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(-2.4999993993e-1f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(3.3333331174e-1f));
    y = _mm256_mul_ps(y, _mm256_mul_ps(x, z));
    y = _mm256_fmadd_ps(e, _mm256_set1_ps(-2.12194440e-4f), y);
    y = _mm256_fnmadd_ps(_mm256_set1_ps(0.5f), z, y);
    x = _mm256_add_ps(x, y);
    return _mm256_fmadd_ps(e, _mm256_set1_ps(0.693359375f), x);
}

inline __m256 sigmoid256(__m256 x) {
    const __m256 one = _mm256_set1_ps(1.0f);
    const __m256 e = exp256(_mm256_sub_ps(_mm256_setzero_ps(), x));
    return _mm256_div_ps(one, _mm256_add_ps(one, e));
}

inline float sigmoid1(float x) { return 1.0f / (1.0f + std::exp(-x)); }

inline float softplus1(float x) {
    const float ax = std::fabs(x);
    return (x > 0.0f ? x : 0.0f) + std::log1p(std::exp(-ax));
}

// ---- gemm -----------------------------------------------------------------

void gemm(i64 m, i64 k, i64 n, const float* a, const float* b, float* c,
          bool accumulate) {
    for (i64 i = 0; i < m; ++i) {
        const float* arow = a + i * k;
        float* crow = c + i * n;
        if (!accumulate) std::memset(crow, 0, sizeof(float) * static_cast<std::size_t>(n));
        i64 p = 0;
        for (; p + 4 <= k; p += 4) {
            const __m256 a0 = _mm256_set1_ps(arow[p]);
            const __m256 a1 = _mm256_set1_ps(arow[p + 1]);
            const __m256 a2 = _mm256_set1_ps(arow[p + 2]);
            const __m256 a3 = _mm256_set1_ps(arow[p + 3]);
            const float* b0 = b + p * n;
            const float* b1 = b0 + n;
            const float* b2 = b1 + n;
            const float* b3 = b2 + n;
            i64 j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 cv = _mm256_loadu_ps(crow + j);
                cv = _mm256_fmadd_ps(a0, _mm256_loadu_ps(b0 + j), cv);
                cv = _mm256_fmadd_ps(a1, _mm256_loadu_ps(b1 + j), cv);
                cv = _mm256_fmadd_ps(a2, _mm256_loadu_ps(b2 + j), cv);
                cv = _mm256_fmadd_ps(a3, _mm256_loadu_ps(b3 + j), cv);
                _mm256_storeu_ps(crow + j, cv);
            }
            for (; j < n; ++j)
                crow[j] += arow[p] * b0[j] + arow[p + 1] * b1[j] +
                           arow[p + 2] * b2[j] + arow[p + 3] * b3[j];
        }
        for (; p < k; ++p) {
            const __m256 av = _mm256_set1_ps(arow[p]);
            const float* brow = b + p * n;
            i64 j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 cv = _mm256_loadu_ps(crow + j);
                cv = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + j), cv);
                _mm256_storeu_ps(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] += arow[p] * brow[j];
        }
    }
}

// ---- elementwise ----------------------------------------------------------

void unary_fwd(Unary op, i64 n, const float* x, float* y) {
    const __m256 zero = _mm256_setzero_ps();
    const __m256 one = _mm256_set1_ps(1.0f);
    const __m256 absmask =
        _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
    i64 i = 0;
    switch (op) {
        case Unary::Exp:
            for (; i + 8 <= n; i += 8)
                _mm256_storeu_ps(y + i, exp256(_mm256_loadu_ps(x + i)));
            for (; i < n; ++i) y[i] = std::exp(x[i]);
            break;
        case Unary::Sigmoid:
            for (; i + 8 <= n; i += 8)
                _mm256_storeu_ps(y + i, sigmoid256(_mm256_loadu_ps(x + i)));
            for (; i < n; ++i) y[i] = sigmoid1(x[i]);
            break;
        case Unary::Silu:
            for (; i + 8 <= n; i += 8) {
                const __m256 xv = _mm256_loadu_ps(x + i);
                _mm256_storeu_ps(y + i, _mm256_mul_ps(xv, sigmoid256(xv)));
            }
            for (; i < n; ++i) y[i] = x[i] * sigmoid1(x[i]);
            break;
        case Unary::Relu:
            for (; i + 8 <= n; i += 8)
                _mm256_storeu_ps(y + i,
                                 _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
            for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
            break;
        case Unary::Softplus:
            for (; i + 8 <= n; i += 8) {
                const __m256 xv = _mm256_loadu_ps(x + i);
                const __m256 ax = _mm256_and_ps(xv, absmask);
                const __m256 l =
                    log256(_mm256_add_ps(one, exp256(_mm256_sub_ps(zero, ax))));
                _mm256_storeu_ps(y + i,
                                 _mm256_add_ps(_mm256_max_ps(xv, zero), l));
            }
            for (; i < n; ++i) y[i] = softplus1(x[i]);
            break;
    }
}

void unary_bwd(Unary op, i64 n, const float* x, const float* y,
               const float* dy, float* dx) {
    const __m256 zero = _mm256_setzero_ps();
    const __m256 one = _mm256_set1_ps(1.0f);
    i64 i = 0;
    switch (op) {
        case Unary::Exp:
            for (; i + 8 <= n; i += 8) {
                __m256 d = _mm256_loadu_ps(dx + i);
                d = _mm256_fmadd_ps(_mm256_loadu_ps(dy + i),
                                    _mm256_loadu_ps(y + i), d);
                _mm256_storeu_ps(dx + i, d);
            }
            for (; i < n; ++i) dx[i] += dy[i] * y[i];
            break;
        case Unary::Sigmoid:
            for (; i + 8 <= n; i += 8) {
                const __m256 yv = _mm256_loadu_ps(y + i);
                const __m256 g =
                    _mm256_mul_ps(yv, _mm256_sub_ps(one, yv));
                __m256 d = _mm256_loadu_ps(dx + i);
                d = _mm256_fmadd_ps(_mm256_loadu_ps(dy + i), g, d);
                _mm256_storeu_ps(dx + i, d);
            }
            for (; i < n; ++i) dx[i] += dy[i] * y[i] * (1.0f - y[i]);
            break;
        case Unary::Silu:
            for (; i + 8 <= n; i += 8) {
                const __m256 xv = _mm256_loadu_ps(x + i);
                const __m256 s = sigmoid256(xv);
                const __m256 g = _mm256_mul_ps(
                    s, _mm256_fmadd_ps(xv, _mm256_sub_ps(one, s), one));
                __m256 d = _mm256_loadu_ps(dx + i);
                d = _mm256_fmadd_ps(_mm256_loadu_ps(dy + i), g, d);
                _mm256_storeu_ps(dx + i, d);
            }
            for (; i < n; ++i) {
                const float s = sigmoid1(x[i]);
                dx[i] += dy[i] * s * (1.0f + x[i] * (1.0f - s));
            }
            break;
        case Unary::Relu:
            for (; i + 8 <= n; i += 8) {
                const __m256 mask =
                    _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
                const __m256 d = _mm256_add_ps(
                    _mm256_loadu_ps(dx + i),
                    _mm256_and_ps(_mm256_loadu_ps(dy + i), mask));
                _mm256_storeu_ps(dx + i, d);
            }
            for (; i < n; ++i) dx[i] += x[i] > 0.0f ? dy[i] : 0.0f;
            break;
        case Unary::Softplus:
            for (; i + 8 <= n; i += 8) {
                const __m256 s = sigmoid256(_mm256_loadu_ps(x + i));
                __m256 d = _mm256_loadu_ps(dx + i);
                d = _mm256_fmadd_ps(_mm256_loadu_ps(dy + i), s, d);
                _mm256_storeu_ps(dx + i, d);
            }
            for (; i < n; ++i) dx[i] += dy[i] * sigmoid1(x[i]);
            break;
    }
}

void binary_fwd(Binary op, i64 n, const float* a, const float* b, float* y) {
    i64 i = 0;
    switch (op) {
        case Binary::Add:
            for (; i + 8 <= n; i += 8)
                _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(a + i),
                                                      _mm256_loadu_ps(b + i)));
            for (; i < n; ++i) y[i] = a[i] + b[i];
            break;
        case Binary::Sub:
            for (; i + 8 <= n; i += 8)
                _mm256_storeu_ps(y + i, _mm256_sub_ps(_mm256_loadu_ps(a + i),
                                                      _mm256_loadu_ps(b + i)));
            for (; i < n; ++i) y[i] = a[i] - b[i];
            break;
        case Binary::Mul:
            for (; i + 8 <= n; i += 8)
                _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(a + i),
                                                      _mm256_loadu_ps(b + i)));
            for (; i < n; ++i) y[i] = a[i] * b[i];
            break;
        case Binary::Div:
            for (; i + 8 <= n; i += 8)
                _mm256_storeu_ps(y + i, _mm256_div_ps(_mm256_loadu_ps(a + i),
                                                      _mm256_loadu_ps(b + i)));
            for (; i < n; ++i) y[i] = a[i] / b[i];
            break;
    }
}

void binary_scalar_fwd(Binary op, i64 n, const float* a, float s,
                       bool scalar_rhs, float* y) {
    const __m256 sv = _mm256_set1_ps(s);
    i64 i = 0;
    switch (op) {
        case Binary::Add:
            for (; i + 8 <= n; i += 8)
                _mm256_storeu_ps(y + i,
                                 _mm256_add_ps(_mm256_loadu_ps(a + i), sv));
            for (; i < n; ++i) y[i] = a[i] + s;
            break;
        case Binary::Sub:
            if (scalar_rhs) {
                for (; i + 8 <= n; i += 8)
                    _mm256_storeu_ps(y + i,
                                     _mm256_sub_ps(_mm256_loadu_ps(a + i), sv));
                for (; i < n; ++i) y[i] = a[i] - s;
            } else {
                for (; i + 8 <= n; i += 8)
                    _mm256_storeu_ps(y + i,
                                     _mm256_sub_ps(sv, _mm256_loadu_ps(a + i)));
                for (; i < n; ++i) y[i] = s - a[i];
            }
            break;
        case Binary::Mul:
            for (; i + 8 <= n; i += 8)
                _mm256_storeu_ps(y + i,
                                 _mm256_mul_ps(_mm256_loadu_ps(a + i), sv));
            for (; i < n; ++i) y[i] = a[i] * s;
            break;
        case Binary::Div:
            if (scalar_rhs) {
                for (; i + 8 <= n; i += 8)
                    _mm256_storeu_ps(y + i,
                                     _mm256_div_ps(_mm256_loadu_ps(a + i), sv));
                for (; i < n; ++i) y[i] = a[i] / s;
            } else {
                for (; i + 8 <= n; i += 8)
                    _mm256_storeu_ps(y + i,
                                     _mm256_div_ps(sv, _mm256_loadu_ps(a + i)));
                for (; i < n; ++i) y[i] = s / a[i];
            }
            break;
    }
}

void axpy(i64 n, float alpha, const float* x, float* y) {
    const __m256 av = _mm256_set1_ps(alpha);
    i64 i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 yv = _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i),
                                          _mm256_loadu_ps(y + i));
        _mm256_storeu_ps(y + i, yv);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void addmul(i64 n, const float* a, const float* b, float* y) {
    i64 i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 yv =
            _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i),
                            _mm256_loadu_ps(y + i));
        _mm256_storeu_ps(y + i, yv);
    }
    for (; i < n; ++i) y[i] += a[i] * b[i];
}

float reduce_sum(i64 n, const float* x) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    i64 i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_add_ps(acc0, _mm256_loadu_ps(x + i));
        acc1 = _mm256_add_ps(acc1, _mm256_loadu_ps(x + i + 8));
    }
    for (; i + 8 <= n; i += 8) acc0 = _mm256_add_ps(acc0, _mm256_loadu_ps(x + i));
    float s = hsum(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) s += x[i];
    return s;
}

// ---- depthwise conv -------------------------------------------------------

void dwconv_valid_fwd(i64 c, i64 ph, i64 pw, i64 kh, i64 kw, const float* xpad,
                      const float* k, float* y) {
    const i64 oh = ph - kh + 1;
    const i64 ow = pw - kw + 1;
    for (i64 ch = 0; ch < c; ++ch) {
        const float* xc = xpad + ch * ph * pw;
        const float* kc = k + ch * kh * kw;
        float* yc = y + ch * oh * ow;
        for (i64 oy = 0; oy < oh; ++oy) {
            float* yrow = yc + oy * ow;
            i64 ox = 0;
            for (; ox + 8 <= ow; ox += 8) {
                __m256 acc = _mm256_setzero_ps();
                for (i64 dy = 0; dy < kh; ++dy) {
                    const float* xrow = xc + (oy + dy) * pw + ox;
                    const float* krow = kc + dy * kw;
                    for (i64 dx = 0; dx < kw; ++dx)
                        acc = _mm256_fmadd_ps(_mm256_set1_ps(krow[dx]),
                                              _mm256_loadu_ps(xrow + dx), acc);
                }
                _mm256_storeu_ps(yrow + ox, acc);
            }
            for (; ox < ow; ++ox) {
                float acc = 0.0f;
                for (i64 dy = 0; dy < kh; ++dy) {
                    const float* xrow = xc + (oy + dy) * pw + ox;
                    const float* krow = kc + dy * kw;
                    for (i64 dx = 0; dx < kw; ++dx) acc += xrow[dx] * krow[dx];
                }
                yrow[ox] = acc;
            }
        }
    }
}

// Scatter form of the input gradient: for every output element, spread
// dy * k over the window it came from. Same sum as the ref gather, different
// accumulation order.
void dwconv_valid_bwd_input(i64 c, i64 oh, i64 ow, i64 kh, i64 kw,
                            const float* dy, const float* k, float* dxpad) {
    const i64 pw = ow + kw - 1;
    const i64 ph = oh + kh - 1;
    for (i64 ch = 0; ch < c; ++ch) {
        const float* dyc = dy + ch * oh * ow;
        const float* kc = k + ch * kh * kw;
        float* dxc = dxpad + ch * ph * pw;
        for (i64 oy = 0; oy < oh; ++oy) {
            const float* dyrow = dyc + oy * ow;
            for (i64 dy2 = 0; dy2 < kh; ++dy2) {
                float* dxrow = dxc + (oy + dy2) * pw;
                for (i64 dx2 = 0; dx2 < kw; ++dx2) {
                    const float kv = kc[dy2 * kw + dx2];
                    const __m256 kvv = _mm256_set1_ps(kv);
                    float* dst = dxrow + dx2;
                    i64 ox = 0;
                    for (; ox + 8 <= ow; ox += 8) {
                        const __m256 d =
                            _mm256_fmadd_ps(kvv, _mm256_loadu_ps(dyrow + ox),
                                            _mm256_loadu_ps(dst + ox));
                        _mm256_storeu_ps(dst + ox, d);
                    }
                    for (; ox < ow; ++ox) dst[ox] += kv * dyrow[ox];
                }
            }
        }
    }
}

void dwconv_valid_bwd_kernel(i64 c, i64 ph, i64 pw, i64 kh, i64 kw,
                             const float* xpad, const float* dy, float* dk) {
    const i64 oh = ph - kh + 1;
    const i64 ow = pw - kw + 1;
    for (i64 ch = 0; ch < c; ++ch) {
        const float* xc = xpad + ch * ph * pw;
        const float* dyc = dy + ch * oh * ow;
        float* dkc = dk + ch * kh * kw;
        for (i64 dy2 = 0; dy2 < kh; ++dy2) {
            for (i64 dx2 = 0; dx2 < kw; ++dx2) {
                __m256 acc = _mm256_setzero_ps();
                float tail = 0.0f;
                for (i64 oy = 0; oy < oh; ++oy) {
                    const float* xrow = xc + (oy + dy2) * pw + dx2;
                    const float* dyrow = dyc + oy * ow;
                    i64 ox = 0;
                    for (; ox + 8 <= ow; ox += 8)
                        acc = _mm256_fmadd_ps(_mm256_loadu_ps(xrow + ox),
                                              _mm256_loadu_ps(dyrow + ox), acc);
                    for (; ox < ow; ++ox) tail += xrow[ox] * dyrow[ox];
                }
                dkc[dy2 * kw + dx2] += hsum(acc) + tail;
            }
        }
    }
}

// ---- selective scan -------------------------------------------------------
//
// Vectorized over the state dimension; requires S to be a multiple of 8
// (the default S=8 is exactly one vector). Other widths fall back to the
// scalar lane.

void scan_fwd_vec(i64 L, i64 D, i64 S, const float* u, const float* A,
                  const float* delta, const float* Bt, const float* Ct,
                  const float* Dskip, float* h, float* abar, float* y) {
    const i64 vs = S / 8;
    for (i64 t = 0; t < L; ++t) {
        const float* ut = u + t * D;
        const float* bt = Bt + t * S;
        const float* ct = Ct + t * S;
        float* ht = h + t * D * S;
        float* at = abar + t * D * S;
        const float* hp = t > 0 ? h + (t - 1) * D * S : nullptr;
        float* yt = y + t * D;
        for (i64 d = 0; d < D; ++d) {
            const float dt = delta[t * D + d];
            const __m256 dtv = _mm256_set1_ps(dt);
            const __m256 duv = _mm256_set1_ps(dt * ut[d]);
            const float* arow = A + d * S;
            float* hrow = ht + d * S;
            float* atrow = at + d * S;
            const float* hprow = hp ? hp + d * S : nullptr;
            __m256 accv = _mm256_setzero_ps();
            for (i64 v = 0; v < vs; ++v) {
                const i64 s = v * 8;
                const __m256 ab =
                    exp256(_mm256_mul_ps(dtv, _mm256_loadu_ps(arow + s)));
                const __m256 hpv =
                    hprow ? _mm256_loadu_ps(hprow + s) : _mm256_setzero_ps();
                const __m256 hv = _mm256_fmadd_ps(
                    ab, hpv, _mm256_mul_ps(duv, _mm256_loadu_ps(bt + s)));
                _mm256_storeu_ps(atrow + s, ab);
                _mm256_storeu_ps(hrow + s, hv);
                accv = _mm256_fmadd_ps(_mm256_loadu_ps(ct + s), hv, accv);
            }
            yt[d] = hsum(accv) + Dskip[d] * ut[d];
        }
    }
}

void scan_bwd_vec(i64 L, i64 D, i64 S, const float* u, const float* A,
                  const float* delta, const float* Bt, const float* Ct,
                  const float* Dskip, const float* h, const float* abar,
                  const float* dy, float* du, float* dA, float* ddelta,
                  float* dBt, float* dCt, float* dDskip) {
    const i64 vs = S / 8;
    std::vector<float> dh(static_cast<std::size_t>(D * S), 0.0f);
    std::vector<float> acc_ct(static_cast<std::size_t>(S));
    std::vector<float> acc_bt(static_cast<std::size_t>(S));
    for (i64 t = L - 1; t >= 0; --t) {
        const float* ut = u + t * D;
        const float* bt = Bt + t * S;
        const float* ct = Ct + t * S;
        const float* ht = h + t * D * S;
        const float* hparr = t > 0 ? h + (t - 1) * D * S : nullptr;
        const float* at = abar + t * D * S;
        const float* dyt = dy + t * D;
        for (i64 v = 0; v < vs; ++v) {
            _mm256_storeu_ps(acc_ct.data() + v * 8, _mm256_setzero_ps());
            _mm256_storeu_ps(acc_bt.data() + v * 8, _mm256_setzero_ps());
        }
        for (i64 d = 0; d < D; ++d) {
            const float g = dyt[d];
            const float dt = delta[t * D + d];
            const __m256 gv = _mm256_set1_ps(g);
            const __m256 dtv = _mm256_set1_ps(dt);
            const __m256 uv = _mm256_set1_ps(ut[d]);
            const float* arow = A + d * S;
            const float* hrow = ht + d * S;
            const float* hprow = hparr ? hparr + d * S : nullptr;
            const float* atrow = at + d * S;
            float* dhrow = dh.data() + d * S;
            float* darow = dA + d * S;
            __m256 ddt_acc = _mm256_setzero_ps();
            __m256 du_acc = _mm256_setzero_ps();
            for (i64 v = 0; v < vs; ++v) {
                const i64 s = v * 8;
                const __m256 dhv = _mm256_fmadd_ps(gv, _mm256_loadu_ps(ct + s),
                                                   _mm256_loadu_ps(dhrow + s));
                const __m256 hpv =
                    hprow ? _mm256_loadu_ps(hprow + s) : _mm256_setzero_ps();
                const __m256 av = _mm256_loadu_ps(arow + s);
                const __m256 abv = _mm256_loadu_ps(atrow + s);
                const __m256 btv = _mm256_loadu_ps(bt + s);
                // dCt[t,s] += g * h[t,d,s]
                __m256 ac = _mm256_loadu_ps(acc_ct.data() + s);
                ac = _mm256_fmadd_ps(gv, _mm256_loadu_ps(hrow + s), ac);
                _mm256_storeu_ps(acc_ct.data() + s, ac);
                // ddelta += dh * (A*abar*hprev + B*u)
                const __m256 inner = _mm256_fmadd_ps(
                    _mm256_mul_ps(av, abv), hpv, _mm256_mul_ps(btv, uv));
                ddt_acc = _mm256_fmadd_ps(dhv, inner, ddt_acc);
                // dA += dh * dt * abar * hprev
                __m256 dav = _mm256_loadu_ps(darow + s);
                dav = _mm256_fmadd_ps(
                    dhv, _mm256_mul_ps(dtv, _mm256_mul_ps(abv, hpv)), dav);
                _mm256_storeu_ps(darow + s, dav);
                // dBt[t,s] += dh * dt * u
                __m256 ab2 = _mm256_loadu_ps(acc_bt.data() + s);
                ab2 = _mm256_fmadd_ps(dhv, _mm256_mul_ps(dtv, uv), ab2);
                _mm256_storeu_ps(acc_bt.data() + s, ab2);
                // du += dh * dt * B
                du_acc = _mm256_fmadd_ps(dhv, _mm256_mul_ps(dtv, btv), du_acc);
                // carry to t-1
                _mm256_storeu_ps(dhrow + s, _mm256_mul_ps(dhv, abv));
            }
            ddelta[t * D + d] += hsum(ddt_acc);
            du[t * D + d] += g * Dskip[d] + hsum(du_acc);
            dDskip[d] += g * ut[d];
        }
        for (i64 s = 0; s < S; ++s) {
            dCt[t * S + s] += acc_ct[static_cast<std::size_t>(s)];
            dBt[t * S + s] += acc_bt[static_cast<std::size_t>(s)];
        }
    }
}

void scan_core_fwd(i64 L, i64 D, i64 S, const float* u, const float* A,
                   const float* delta, const float* Bt, const float* Ct,
                   const float* Dskip, float* h, float* abar, float* y) {
    if (S % 8 == 0)
        scan_fwd_vec(L, D, S, u, A, delta, Bt, Ct, Dskip, h, abar, y);
    else
        scalar_table().scan_core_fwd(L, D, S, u, A, delta, Bt, Ct, Dskip, h,
                                     abar, y);
}

void scan_core_bwd(i64 L, i64 D, i64 S, const float* u, const float* A,
                   const float* delta, const float* Bt, const float* Ct,
                   const float* Dskip, const float* h, const float* abar,
                   const float* dy, float* du, float* dA, float* ddelta,
                   float* dBt, float* dCt, float* dDskip) {
    if (S % 8 == 0)
        scan_bwd_vec(L, D, S, u, A, delta, Bt, Ct, Dskip, h, abar, dy, du, dA,
                     ddelta, dBt, dCt, dDskip);
    else
        scalar_table().scan_core_bwd(L, D, S, u, A, delta, Bt, Ct, Dskip, h,
                                     abar, dy, du, dA, ddelta, dBt, dCt,
                                     dDskip);
}

// ---- adam -----------------------------------------------------------------

void adam_update(i64 n, float* w, const float* g, float* m, float* v, float lr,
                 float b1, float b2, float eps, float bc1, float bc2) {
    const __m256 b1v = _mm256_set1_ps(b1);
    const __m256 b2v = _mm256_set1_ps(b2);
    const __m256 c1 = _mm256_set1_ps(1.0f - b1);
    const __m256 c2 = _mm256_set1_ps(1.0f - b2);
    const __m256 bc1v = _mm256_set1_ps(bc1);
    const __m256 bc2v = _mm256_set1_ps(bc2);
    const __m256 epsv = _mm256_set1_ps(eps);
    const __m256 lrv = _mm256_set1_ps(lr);
    i64 i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gv = _mm256_loadu_ps(g + i);
        const __m256 mv =
            _mm256_fmadd_ps(b1v, _mm256_loadu_ps(m + i), _mm256_mul_ps(c1, gv));
        const __m256 vv = _mm256_fmadd_ps(
            b2v, _mm256_loadu_ps(v + i), _mm256_mul_ps(c2, _mm256_mul_ps(gv, gv)));
        _mm256_storeu_ps(m + i, mv);
        _mm256_storeu_ps(v + i, vv);
        const __m256 mhat = _mm256_mul_ps(mv, bc1v);
        const __m256 vhat = _mm256_mul_ps(vv, bc2v);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), epsv);
        const __m256 step = _mm256_div_ps(_mm256_mul_ps(lrv, mhat), denom);
        _mm256_storeu_ps(w + i, _mm256_sub_ps(_mm256_loadu_ps(w + i), step));
    }
    for (; i < n; ++i) {
        const float gi = g[i];
        m[i] = b1 * m[i] + (1.0f - b1) * gi;
        v[i] = b2 * v[i] + (1.0f - b2) * gi * gi;
        const float mhat = m[i] * bc1;
        const float vhat = v[i] * bc2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const Kernels& avx2_table() {
    static const Kernels t = {
        "avx2",
        &gemm,
        &unary_fwd,
        &unary_bwd,
        &binary_fwd,
        &binary_scalar_fwd,
        &axpy,
        &addmul,
        &reduce_sum,
        &dwconv_valid_fwd,
        &dwconv_valid_bwd_input,
        &dwconv_valid_bwd_kernel,
        &scan_core_fwd,
        &scan_core_bwd,
        &adam_update,
    };
    return t;
}

}  // namespace amsdb::kern

#endif  // AMSDB_BUILD_AVX2
