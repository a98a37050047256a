#pragma once

// Runtime-dispatched float kernels. The scalar table points at the reference
// implementations in kernels_ref.hpp; the AVX2 table (x86-64 builds only)
// overrides the hot entries. Selection happens once, at first use:
//   - AMSDB_SIMD=scalar|avx2 forces a lane (avx2 errors out if unsupported)
//   - otherwise the best lane the CPU supports wins.
// Both tables stay reachable so the equivalence tests can compare lanes
// directly on the same machine.

#include "amsdb/kernels_ref.hpp"

namespace amsdb::kern {

struct Kernels {
    const char* name;

    void (*gemm)(i64 m, i64 k, i64 n, const float* a, const float* b, float* c,
                 bool accumulate);
    void (*unary_fwd)(Unary op, i64 n, const float* x, float* y);
    void (*unary_bwd)(Unary op, i64 n, const float* x, const float* y,
                      const float* dy, float* dx);
    void (*binary_fwd)(Binary op, i64 n, const float* a, const float* b,
                       float* y);
    void (*binary_scalar_fwd)(Binary op, i64 n, const float* a, float s,
                              bool scalar_rhs, float* y);
    void (*axpy)(i64 n, float alpha, const float* x, float* y);
    void (*addmul)(i64 n, const float* a, const float* b, float* y);
    float (*reduce_sum)(i64 n, const float* x);
    void (*dwconv_valid_fwd)(i64 c, i64 ph, i64 pw, i64 kh, i64 kw,
                             const float* xpad, const float* k, float* y);
    void (*dwconv_valid_bwd_input)(i64 c, i64 oh, i64 ow, i64 kh, i64 kw,
                                   const float* dy, const float* k,
                                   float* dxpad);
    void (*dwconv_valid_bwd_kernel)(i64 c, i64 ph, i64 pw, i64 kh, i64 kw,
                                    const float* xpad, const float* dy,
                                    float* dk);
    void (*scan_core_fwd)(i64 L, i64 D, i64 S, const float* u, const float* A,
                          const float* delta, const float* Bt, const float* Ct,
                          const float* Dskip, float* h, float* abar, float* y);
    void (*scan_core_bwd)(i64 L, i64 D, i64 S, const float* u, const float* A,
                          const float* delta, const float* Bt, const float* Ct,
                          const float* Dskip, const float* h, const float* abar,
                          const float* dy, float* du, float* dA, float* ddelta,
                          float* dBt, float* dCt, float* dDskip);
    void (*adam_update)(i64 n, float* w, const float* g, float* m, float* v,
                        float lr, float b1, float b2, float eps, float bc1,
                        float bc2);
};

const Kernels& scalar_table();
bool avx2_available();          // compiled in *and* supported by this CPU
const Kernels& avx2_table();    // valid only if avx2_available()

// The lane used by everything above the kernel layer. Resolved once.
const Kernels& active();

}  // namespace amsdb::kern
