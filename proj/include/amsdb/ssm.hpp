#pragma once

// Four-direction selective scanning over 2-D feature maps and the gated
// block built around it. Directions are row-major, reversed row-major,
// column-major, reversed column-major; merge inverts each ordering and sums.

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "amsdb/ops.hpp"

namespace amsdb {

// Source row for each output position of direction dir (0..3) over n images
// of h x w tokens; apply with ops::permute_rows.
std::vector<i64> scan_order(i64 n, i64 h, i64 w, int dir);
std::vector<i64> inverse_perm(const std::vector<i64>& perm);

struct DirectionalSequences {
    std::array<Tensor, 4> seq;  // each [n*h*w, D] in its scan order
    i64 n = 0, h = 0, w = 0;
};

DirectionalSequences expand(const Tensor& x);  // x [N,D,H,W]
// Inverse-permute each sequence back to row-major and sum; -> [N,D,H,W].
Tensor merge(const DirectionalSequences& s, i64 d);

struct S6Params {
    Tensor a_log;    // [D,S]; A = -exp(a_log) keeps the recurrence decaying
    Tensor w_delta;  // [D,D]
    Tensor b_delta;  // [D]
    Tensor w_b;      // [D,S]
    Tensor w_c;      // [D,S]
    Tensor d_skip;   // [D]

    static S6Params init(i64 d, i64 s, Rng& rng);
    void collect(const std::string& prefix,
                 std::vector<std::pair<std::string, Tensor>>& out) const;
};

// u: [batch*L, D] token sequence(s). Computes data-dependent delta / B / C
// projections and runs the recurrence (see ops::scan_core).
Tensor selective_scan(const Tensor& u, const S6Params& p, i64 batch);

struct VssBlockParams {
    Tensor ln1_g, ln1_b;            // [D] pre-norm
    Tensor w_in1, b_in1;            // [D,E],[E] branch-1 expand
    Tensor w_in2, b_in2;            // [D,E],[E] branch-2 gate
    Tensor dw_k, dw_b;              // [E,3,3],[E] depthwise conv
    std::array<S6Params, 4> scan;   // independent params per direction
    Tensor ln2_g, ln2_b;            // [E] post-scan norm
    Tensor w_out, b_out;            // [E,D],[D] contraction

    static VssBlockParams init(i64 d, i64 e, i64 s, Rng& rng);
    void collect(const std::string& prefix,
                 std::vector<std::pair<std::string, Tensor>>& out) const;
};

Tensor vss_block(const Tensor& x, const VssBlockParams& p);

}  // namespace amsdb
