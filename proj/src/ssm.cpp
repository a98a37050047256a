#include "amsdb/ssm.hpp"

#include <cmath>

namespace amsdb {

std::vector<i64> scan_order(i64 n, i64 h, i64 w, int dir) {
    if (dir < 0 || dir > 3)
        throw ValueError("scan direction must be 0..3, got " +
                         std::to_string(dir));
    const i64 hw = h * w;
    std::vector<i64> src;
    src.reserve(static_cast<std::size_t>(n * hw));
    for (i64 img = 0; img < n; ++img) {
        const i64 base = img * hw;
        switch (dir) {
            case 0:
                for (i64 t = 0; t < hw; ++t) src.push_back(base + t);
                break;
            case 1:
                for (i64 t = hw - 1; t >= 0; --t) src.push_back(base + t);
                break;
            case 2:
                for (i64 x = 0; x < w; ++x)
                    for (i64 y = 0; y < h; ++y) src.push_back(base + y * w + x);
                break;
            case 3:
                for (i64 x = w - 1; x >= 0; --x)
                    for (i64 y = h - 1; y >= 0; --y)
                        src.push_back(base + y * w + x);
                break;
        }
    }
    return src;
}

std::vector<i64> inverse_perm(const std::vector<i64>& perm) {
    std::vector<i64> inv(perm.size());
    for (std::size_t t = 0; t < perm.size(); ++t)
        inv[static_cast<std::size_t>(perm[t])] = static_cast<i64>(t);
    return inv;
}

DirectionalSequences expand(const Tensor& x) {
    if (x.shape().size() != 4)
        throw ShapeError("expand input must be [N,D,H,W], got " +
                         shape_str(x.shape()));
    DirectionalSequences out;
    out.n = x.shape()[0];
    out.h = x.shape()[2];
    out.w = x.shape()[3];
    Tensor tokens = ops::nchw_to_tokens(x);
    for (int dir = 0; dir < 4; ++dir)
        out.seq[static_cast<std::size_t>(dir)] =
            ops::permute_rows(tokens, scan_order(out.n, out.h, out.w, dir));
    return out;
}

Tensor merge(const DirectionalSequences& s, i64 d) {
    const i64 rows = s.n * s.h * s.w;
    Tensor acc;
    for (int dir = 0; dir < 4; ++dir) {
        const Tensor& zv = s.seq[static_cast<std::size_t>(dir)];
        if (!zv.defined() || zv.shape().size() != 2 || zv.shape()[0] != rows ||
            zv.shape()[1] != d)
            throw ShapeError(
                "merge geometry mismatch: expected [" + std::to_string(rows) +
                "," + std::to_string(d) + "] for direction " +
                std::to_string(dir) +
                (zv.defined() ? ", got " + shape_str(zv.shape()) : ""));
        Tensor back = ops::permute_rows(
            zv, inverse_perm(scan_order(s.n, s.h, s.w, dir)));
        acc = acc.defined() ? ops::add(acc, back) : back;
    }
    return ops::tokens_to_nchw(acc, s.n, d, s.h, s.w);
}

S6Params S6Params::init(i64 d, i64 s, Rng& rng) {
    S6Params p;
    // S4D-real style: A = -exp(a_log) spans -1 .. -S across the state dim.
    std::vector<float> alog(static_cast<std::size_t>(d * s));
    for (i64 ch = 0; ch < d; ++ch)
        for (i64 st = 0; st < s; ++st)
            alog[static_cast<std::size_t>(ch * s + st)] =
                std::log(static_cast<float>(st + 1));
    p.a_log = Tensor::from_data({d, s}, std::move(alog), true);

    auto tn = [&rng](Shape shape) {
        std::vector<float> v(static_cast<std::size_t>(numel(shape)));
        for (float& x : v) x = static_cast<float>(rng.trunc_normal(0.02));
        return Tensor::from_data(std::move(shape), std::move(v), true);
    };
    p.w_delta = tn({d, d});
    // softplus(b_delta) ~= 0.05: small positive step sizes at init.
    p.b_delta = Tensor::full(
        {d}, std::log(std::exp(0.05f) - 1.0f), true);
    p.w_b = tn({d, s});
    p.w_c = tn({d, s});
    p.d_skip = Tensor::full({d}, 1.0f, true);
    return p;
}

void S6Params::collect(const std::string& prefix,
                       std::vector<std::pair<std::string, Tensor>>& out) const {
    out.emplace_back(prefix + ".a_log", a_log);
    out.emplace_back(prefix + ".w_delta", w_delta);
    out.emplace_back(prefix + ".b_delta", b_delta);
    out.emplace_back(prefix + ".w_b", w_b);
    out.emplace_back(prefix + ".w_c", w_c);
    out.emplace_back(prefix + ".d_skip", d_skip);
}

Tensor selective_scan(const Tensor& u, const S6Params& p, i64 batch) {
    Tensor delta = ops::softplus(ops::linear(u, p.w_delta, p.b_delta));
    Tensor bt = ops::matmul(u, p.w_b);
    Tensor ct = ops::matmul(u, p.w_c);
    Tensor a = ops::mul_const(ops::exp(p.a_log), -1.0f);
    return ops::scan_core(u, delta, bt, ct, a, p.d_skip, batch);
}

VssBlockParams VssBlockParams::init(i64 d, i64 e, i64 s, Rng& rng) {
    auto tn = [&rng](Shape shape) {
        std::vector<float> v(static_cast<std::size_t>(numel(shape)));
        for (float& x : v) x = static_cast<float>(rng.trunc_normal(0.02));
        return Tensor::from_data(std::move(shape), std::move(v), true);
    };
    VssBlockParams p;
    p.ln1_g = Tensor::full({d}, 1.0f, true);
    p.ln1_b = Tensor::zeros({d}, true);
    p.w_in1 = tn({d, e});
    p.b_in1 = Tensor::zeros({e}, true);
    p.w_in2 = tn({d, e});
    p.b_in2 = Tensor::zeros({e}, true);
    p.dw_k = tn({e, 3, 3});
    p.dw_b = Tensor::zeros({e}, true);
    for (auto& sp : p.scan) sp = S6Params::init(e, s, rng);
    p.ln2_g = Tensor::full({e}, 1.0f, true);
    p.ln2_b = Tensor::zeros({e}, true);
    p.w_out = tn({e, d});
    p.b_out = Tensor::zeros({d}, true);
    return p;
}

void VssBlockParams::collect(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor>>& out) const {
    out.emplace_back(prefix + ".ln1.g", ln1_g);
    out.emplace_back(prefix + ".ln1.b", ln1_b);
    out.emplace_back(prefix + ".in1.w", w_in1);
    out.emplace_back(prefix + ".in1.b", b_in1);
    out.emplace_back(prefix + ".in2.w", w_in2);
    out.emplace_back(prefix + ".in2.b", b_in2);
    out.emplace_back(prefix + ".dw.k", dw_k);
    out.emplace_back(prefix + ".dw.b", dw_b);
    for (int dir = 0; dir < 4; ++dir)
        scan[static_cast<std::size_t>(dir)].collect(
            prefix + ".scan" + std::to_string(dir), out);
    out.emplace_back(prefix + ".ln2.g", ln2_g);
    out.emplace_back(prefix + ".ln2.b", ln2_b);
    out.emplace_back(prefix + ".out.w", w_out);
    out.emplace_back(prefix + ".out.b", b_out);
}

Tensor vss_block(const Tensor& x, const VssBlockParams& p) {
    if (x.shape().size() != 4)
        throw ShapeError("vss_block input must be [N,D,H,W], got " +
                         shape_str(x.shape()));
    const i64 n = x.shape()[0], d = x.shape()[1], h = x.shape()[2],
              w = x.shape()[3];
    const i64 e = p.w_in1.shape()[1];

    Tensor tokens = ops::nchw_to_tokens(x);                 // [N*HW, D]
    Tensor t1 = ops::layer_norm(tokens, p.ln1_g, p.ln1_b);

    // branch 1: expand, mix locally, scan in four directions
    Tensor b1 = ops::linear(t1, p.w_in1, p.b_in1);          // [N*HW, E]
    Tensor b1img = ops::tokens_to_nchw(b1, n, e, h, w);
    Tensor b1c = ops::bias_add_channel(
        ops::dwconv2d(b1img, p.dw_k, kern::PadMode::Zero), p.dw_b);
    Tensor tk = ops::nchw_to_tokens(ops::silu(b1c));        // [N*HW, E]

    Tensor acc;
    for (int dir = 0; dir < 4; ++dir) {
        const auto perm = scan_order(n, h, w, dir);
        Tensor zv = ops::permute_rows(tk, perm);
        Tensor yv =
            selective_scan(zv, p.scan[static_cast<std::size_t>(dir)], n);
        Tensor back = ops::permute_rows(yv, inverse_perm(perm));
        acc = acc.defined() ? ops::add(acc, back) : back;
    }
    Tensor a2 = ops::layer_norm(acc, p.ln2_g, p.ln2_b);

    // branch 2: gate from the same normalized tokens
    Tensor gate = ops::silu(ops::linear(t1, p.w_in2, p.b_in2));

    Tensor out_tok = ops::linear(ops::mul(a2, gate), p.w_out, p.b_out);
    return ops::add(ops::tokens_to_nchw(out_tok, n, d, h, w), x);
}

}  // namespace amsdb
