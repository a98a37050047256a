// Acceptance gate: eight self-contained release checks, one [PASS]/[FAIL]
// line each. Exits with the number of failed checks so the harness can gate
// on a single status code. Built without a unit-test framework on purpose —
// the output is meant to be read as a checklist.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "amsdb/checkpoint.hpp"
#include "amsdb/dataset.hpp"
#include "amsdb/dog.hpp"
#include "amsdb/image.hpp"
#include "amsdb/kernels_ref.hpp"
#include "amsdb/metrics.hpp"
#include "amsdb/model.hpp"
#include "amsdb/ops.hpp"
#include "amsdb/patches.hpp"
#include "amsdb/skeleton.hpp"
#include "amsdb/ssm.hpp"
#include "amsdb/synth.hpp"
#include "amsdb/threshold.hpp"
#include "amsdb/trainer.hpp"
#include "testutil.hpp"

using namespace amsdb;
using namespace testutil;
namespace rk = amsdb::kern::ref;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

double wsum(const std::vector<double>& w, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * y[i];
    return s;
}

std::string cli_path() {
    const char* p = std::getenv("AMSDB_CLI_PATH");
#ifdef AMSDB_CLI_PATH
    if (p == nullptr) p = AMSDB_CLI_PATH;
#endif
    return p == nullptr ? std::string() : std::string(p);
}

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a == b;
}

// ---- 1: gradient integrity ------------------------------------------------

double double_fd_worst() {
    double worst = 0.0;
    Rng rng(201);

    {  // gemm
        const i64 m = 3, k = 4, n = 2;
        auto A = rand_vec(static_cast<std::size_t>(m * k), rng);
        auto B = rand_vec(static_cast<std::size_t>(k * n), rng);
        const auto wv = rand_vec(static_cast<std::size_t>(m * n), rng);
        const auto loss = [&] {
            std::vector<double> C(static_cast<std::size_t>(m * n));
            rk::gemm<double>(m, k, n, A.data(), B.data(), C.data(), false);
            return wsum(wv, C);
        };
        std::vector<double> BT(B.size()), AT(A.size());
        rk::transpose<double>(k, n, B.data(), BT.data());
        rk::transpose<double>(m, k, A.data(), AT.data());
        std::vector<double> dA(A.size()), dB(B.size());
        rk::gemm<double>(m, n, k, wv.data(), BT.data(), dA.data(), false);
        rk::gemm<double>(k, m, n, AT.data(), wv.data(), dB.data(), false);
        worst = std::max(worst, fd_max_rel(A, dA, loss));
        worst = std::max(worst, fd_max_rel(B, dB, loss));
    }

    for (auto op : {kern::Unary::Exp, kern::Unary::Sigmoid, kern::Unary::Silu,
                    kern::Unary::Softplus, kern::Unary::Relu}) {
        const i64 n = 16;
        auto x = rand_vec(static_cast<std::size_t>(n), rng, 0.2, 2.0);
        for (std::size_t i = 0; i < x.size(); i += 2) x[i] = -x[i];
        const auto wv = rand_vec(static_cast<std::size_t>(n), rng);
        const auto loss = [&] {
            std::vector<double> y(x.size());
            rk::unary_fwd<double>(op, n, x.data(), y.data());
            return wsum(wv, y);
        };
        std::vector<double> y(x.size()), dx(x.size(), 0.0);
        rk::unary_fwd<double>(op, n, x.data(), y.data());
        rk::unary_bwd<double>(op, n, x.data(), y.data(), wv.data(), dx.data());
        worst = std::max(worst, fd_max_rel(x, dx, loss));
    }

    {  // layer norm
        const i64 rows = 3, d = 5;
        auto x = rand_vec(static_cast<std::size_t>(rows * d), rng);
        auto g = rand_vec(static_cast<std::size_t>(d), rng, 0.5, 1.5);
        auto b = rand_vec(static_cast<std::size_t>(d), rng);
        const auto wv = rand_vec(static_cast<std::size_t>(rows * d), rng);
        const double eps = 1e-5;
        const auto loss = [&] {
            std::vector<double> y(x.size()), mu(rows), rs(rows);
            rk::layer_norm_fwd<double>(rows, d, x.data(), g.data(), b.data(),
                                       eps, y.data(), mu.data(), rs.data());
            return wsum(wv, y);
        };
        std::vector<double> y(x.size()), mu(rows), rs(rows);
        rk::layer_norm_fwd<double>(rows, d, x.data(), g.data(), b.data(), eps,
                                   y.data(), mu.data(), rs.data());
        std::vector<double> dx(x.size(), 0.0), dg(g.size(), 0.0),
            db(b.size(), 0.0);
        rk::layer_norm_bwd<double>(rows, d, x.data(), g.data(), mu.data(),
                                   rs.data(), wv.data(), dx.data(), dg.data(),
                                   db.data());
        worst = std::max(worst, fd_max_rel(x, dx, loss));
        worst = std::max(worst, fd_max_rel(g, dg, loss));
        worst = std::max(worst, fd_max_rel(b, db, loss));
    }

    {  // depthwise conv (valid, pre-padded frame)
        const i64 c = 2, ph = 6, pw = 6, kh = 3, kw = 3;
        const i64 oh = ph - kh + 1, ow = pw - kw + 1;
        auto xpad = rand_vec(static_cast<std::size_t>(c * ph * pw), rng);
        auto k = rand_vec(static_cast<std::size_t>(c * kh * kw), rng);
        const auto wv = rand_vec(static_cast<std::size_t>(c * oh * ow), rng);
        const auto loss = [&] {
            std::vector<double> y(wv.size());
            rk::dwconv_valid_fwd<double>(c, ph, pw, kh, kw, xpad.data(),
                                         k.data(), y.data());
            return wsum(wv, y);
        };
        std::vector<double> dx(xpad.size(), 0.0), dk(k.size(), 0.0);
        rk::dwconv_valid_bwd_input<double>(c, oh, ow, kh, kw, wv.data(),
                                           k.data(), dx.data());
        rk::dwconv_valid_bwd_kernel<double>(c, ph, pw, kh, kw, xpad.data(),
                                            wv.data(), dk.data());
        worst = std::max(worst, fd_max_rel(xpad, dx, loss));
        worst = std::max(worst, fd_max_rel(k, dk, loss));
    }

    {  // selective-scan core
        const i64 L = 6, D = 3, S = 4;
        auto u = rand_vec(static_cast<std::size_t>(L * D), rng);
        auto delta = rand_vec(static_cast<std::size_t>(L * D), rng, 0.1, 1.0);
        auto Bt = rand_vec(static_cast<std::size_t>(L * S), rng);
        auto Ct = rand_vec(static_cast<std::size_t>(L * S), rng);
        auto A = rand_vec(static_cast<std::size_t>(D * S), rng, -1.0, -0.1);
        auto Dskip = rand_vec(static_cast<std::size_t>(D), rng);
        const auto wv = rand_vec(static_cast<std::size_t>(L * D), rng);
        const auto loss = [&] {
            std::vector<double> h(static_cast<std::size_t>(L * D * S)),
                ab(h.size()), y(static_cast<std::size_t>(L * D));
            rk::scan_core_fwd<double>(L, D, S, u.data(), A.data(),
                                      delta.data(), Bt.data(), Ct.data(),
                                      Dskip.data(), h.data(), ab.data(),
                                      y.data());
            return wsum(wv, y);
        };
        std::vector<double> h(static_cast<std::size_t>(L * D * S)),
            ab(h.size()), y(static_cast<std::size_t>(L * D));
        rk::scan_core_fwd<double>(L, D, S, u.data(), A.data(), delta.data(),
                                  Bt.data(), Ct.data(), Dskip.data(), h.data(),
                                  ab.data(), y.data());
        std::vector<double> du(u.size(), 0.0), dA(A.size(), 0.0),
            dd(delta.size(), 0.0), dB(Bt.size(), 0.0), dC(Ct.size(), 0.0),
            dD(Dskip.size(), 0.0);
        rk::scan_core_bwd<double>(L, D, S, u.data(), A.data(), delta.data(),
                                  Bt.data(), Ct.data(), Dskip.data(), h.data(),
                                  ab.data(), wv.data(), du.data(), dA.data(),
                                  dd.data(), dB.data(), dC.data(), dD.data());
        worst = std::max(worst, fd_max_rel(u, du, loss));
        worst = std::max(worst, fd_max_rel(delta, dd, loss));
        worst = std::max(worst, fd_max_rel(Bt, dB, loss));
        worst = std::max(worst, fd_max_rel(Ct, dC, loss));
        worst = std::max(worst, fd_max_rel(A, dA, loss));
        worst = std::max(worst, fd_max_rel(Dskip, dD, loss));
    }

    return worst;
}

double float_graph_worst() {
    double worst = 0.0;
    Rng rng(202);

    auto check = [&](const std::function<Tensor()>& build,
                     std::vector<Tensor> leaves, i64 samples) {
        worst = std::max(worst,
                         graph_fd_max_rel(build, std::move(leaves), samples));
    };

    {  // dense ops + activations + scalar broadcasts
        auto a = rand_tensor({3, 4}, rng);
        auto b = rand_tensor({4, 5}, rng);
        auto w = rand_tensor({5, 2}, rng);
        auto bias = rand_tensor({2}, rng);
        auto s = rand_tensor({1}, rng, 0.5f, 1.5f);
        check(
            [&] {
                auto h = ops::silu(ops::matmul(a, b));
                auto z = ops::softplus(ops::linear(h, w, bias));
                auto t = ops::mul(ops::add_const(ops::exp(ops::mul_const(
                                      ops::sigmoid(z), 0.5f)),
                                                 0.1f),
                                  s);
                auto q = ops::div(t, ops::add_const(s, 0.7f));
                return ops::reduce_mean(ops::sub(q, ops::mul_const(t, 0.25f)));
            },
            {a, b, w, bias, s}, 8);
    }

    {  // conv stack with both paddings and the channel helpers
        auto x = rand_tensor({2, 3, 6, 6}, rng);
        auto w1 = rand_tensor({4, 3, 3, 3}, rng);
        auto b1 = rand_tensor({4}, rng);
        auto k = rand_tensor({4, 3, 3}, rng);
        auto b2 = rand_tensor({4}, rng);
        check(
            [&] {
                auto y = ops::relu(ops::add_const(ops::conv2d(x, w1, b1, 1, 1),
                                                  0.3f));
                auto z = ops::dwconv2d(y, k, kern::PadMode::Reflect);
                auto z2 = ops::dwconv2d(y, k, kern::PadMode::Zero);
                auto c = ops::concat_channels(
                    y, ops::bias_add_channel(z, b2));
                // scale before squaring so the loss stays O(1); float FD
                // noise grows with the magnitude of the evaluated loss
                auto cs = ops::mul_const(c, 0.2f);
                auto zs = ops::mul_const(z2, 0.2f);
                return ops::add(ops::reduce_mean(ops::mul(cs, cs)),
                                ops::reduce_mean(ops::mul(zs, zs)));
            },
            {x, w1, b1, k, b2}, 6);
    }

    {  // layer norm + token reshapes + upsample + reductions
        auto x = rand_tensor({1, 4, 4, 4}, rng);
        auto g = rand_tensor({4}, rng, 0.5f, 1.5f);
        auto b = rand_tensor({4}, rng);
        check(
            [&] {
                auto tok = ops::nchw_to_tokens(x);
                auto ln = ops::layer_norm(tok, g, b, 1e-5f);
                std::vector<i64> perm(16);
                for (i64 i = 0; i < 16; ++i) perm[static_cast<std::size_t>(i)] =
                    15 - i;
                auto back =
                    ops::tokens_to_nchw(ops::permute_rows(ln, perm), 1, 4, 4, 4);
                auto up = ops::upsample_nearest2x(back);
                // row means (not sums) keep the loss O(1); float FD noise
                // grows with the magnitude of the evaluated loss
                auto means = ops::reduce_mean(ops::reshape(up, {4, 64}), {1});
                return ops::reduce_mean(ops::mul(means, means));
            },
            {x, g, b}, 8);
    }

    {  // scan core op
        const i64 L = 5, D = 3, S = 4;
        auto u = rand_tensor({L, D}, rng);
        auto delta = rand_tensor({L, D}, rng, 0.2f, 1.0f);
        auto bt = rand_tensor({L, S}, rng);
        auto ct = rand_tensor({L, S}, rng);
        auto A = rand_tensor({D, S}, rng, -1.0f, -0.1f);
        auto dskip = rand_tensor({D}, rng);
        check(
            [&] {
                auto y = ops::scan_core(u, delta, bt, ct, A, dskip, 1);
                return ops::reduce_mean(ops::mul(y, y));
            },
            {u, delta, bt, ct, A, dskip}, 8);
    }

    {  // full selective scan with its projections
        const i64 D = 3, S = 4;
        auto p = S6Params::init(D, S, rng);
        auto u = rand_tensor({6, D}, rng);
        check(
            [&] {
                auto y = selective_scan(u, p, 1);
                return ops::reduce_mean(ops::mul(y, y));
            },
            {u, p.a_log, p.w_delta, p.b_delta, p.w_b, p.w_c, p.d_skip}, 6);
    }

    {  // filter bank
        auto x = rand_tensor({1, 2, 6, 6}, rng, 0.0f, 1.0f);
        DoGBank bank({.scales = 2, .sigma0 = 0.8f});
        std::vector<Tensor> leaves{x};
        for (const auto& w : bank.weights()) leaves.push_back(w);
        check(
            [&] {
                auto y = f_dog(x, bank);
                return ops::reduce_mean(ops::mul(y, y));
            },
            leaves, 6);
    }

    {  // whole model through the composite loss
        ModelConfig cfg;
        cfg.dims = {4, 6};
        cfg.depths = {1, 1};
        cfg.state_dim = 4;
        cfg.dog_scales = 2;
        Rng mrng(203);
        Model model(cfg, mrng);
        auto x = rand_tensor({1, 3, 16, 16}, rng, 0.0f, 1.0f, false);
        std::vector<float> tv(16 * 16, 0.0f);
        for (auto& t : tv) t = rng.bernoulli(0.3) ? 1.0f : 0.0f;
        auto target = Tensor::from_data({1, 1, 16, 16}, tv);
        std::vector<Tensor> leaves;
        for (auto& [name, t] : model.named_parameters())
            if (name == "enc0.embed.w" || name == "enc0.ln.g" ||
                name == "enc0.block0.scan0.a_log" || name == "dog1.w0" ||
                name == "up0.c1.w" || name == "final.head.w")
                leaves.push_back(t);
        check(
            [&] {
                return model.loss(model.forward(x), target).total;
            },
            leaves, 4);
    }

    return worst;
}

Outcome check_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    const double dworst = double_fd_worst();
    const double fworst = float_graph_worst();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    Outcome o;
    o.pass = dworst < 1e-6 && fworst < 1e-3 && secs < 120.0;
    o.detail = "double max rel " + fmt("%.2e", dworst) + ", float max rel " +
               fmt("%.2e", fworst) + ", " + fmt("%.1f", secs) + "s";
    return o;
}

// ---- 2: recurrence oracle -------------------------------------------------

Outcome check_scan_oracle() {
    Outcome o;

    // decay 0, unit step/projections, no passthrough -> running sum
    auto u = Tensor::from_data({3, 1}, {1.0f, 2.0f, 3.0f});
    auto ones = Tensor::from_data({3, 1}, {1.0f, 1.0f, 1.0f});
    auto A = Tensor::from_data({1, 1}, {0.0f});
    auto dskip = Tensor::from_data({1}, {0.0f});
    const Tensor y = ops::scan_core(u, ones, ones, ones, A, dskip, 1);
    const std::vector<float> want{1.0f, 3.0f, 6.0f};
    double cum_err = 0.0;
    for (int i = 0; i < 3; ++i)
        cum_err = std::max(cum_err, std::abs(static_cast<double>(
                                        y.value()[static_cast<std::size_t>(i)] -
                                        want[static_cast<std::size_t>(i)])));
    if (cum_err > 1e-5) {
        o.detail = "running-sum mismatch " + fmt("%.2e", cum_err);
        return o;
    }

    // causality: rewriting the future never changes the past
    Rng rng(204);
    int causal_ok = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const i64 L = 4 + rng.index(10);
        const i64 D = 1 + rng.index(3);
        const i64 S = 1 + rng.index(5);
        const i64 cut = rng.index(L - 1);  // rows [0, cut] must be preserved
        auto uu = rand_tensor({L, D}, rng, -1.0f, 1.0f, false);
        auto delta = rand_tensor({L, D}, rng, 0.05f, 1.0f, false);
        auto bt = rand_tensor({L, S}, rng, -1.0f, 1.0f, false);
        auto ct = rand_tensor({L, S}, rng, -1.0f, 1.0f, false);
        auto Ar = rand_tensor({D, S}, rng, -1.5f, -0.05f, false);
        auto dr = rand_tensor({D}, rng, -1.0f, 1.0f, false);
        const Tensor y1 = ops::scan_core(uu, delta, bt, ct, Ar, dr, 1);
        Tensor u2 = rand_tensor({L, D}, rng, -1.0f, 1.0f, false);
        for (i64 t = 0; t <= cut; ++t)
            for (i64 d = 0; d < D; ++d)
                u2.value()[static_cast<std::size_t>(t * D + d)] =
                    uu.value()[static_cast<std::size_t>(t * D + d)];
        const Tensor y2 = ops::scan_core(u2, delta, bt, ct, Ar, dr, 1);
        bool same = true;
        for (i64 t = 0; t <= cut && same; ++t)
            for (i64 d = 0; d < D; ++d)
                if (y1.value()[static_cast<std::size_t>(t * D + d)] !=
                    y2.value()[static_cast<std::size_t>(t * D + d)]) {
                    same = false;
                    break;
                }
        if (same) ++causal_ok;
    }

    // the data-dependent projections stay causal too
    int proj_ok = 0;
    for (int rep = 0; rep < 5; ++rep) {
        const i64 D = 2 + rng.index(3), L = 6 + rng.index(6);
        const i64 cut = rng.index(L - 1);
        Rng prng(300 + rep);
        auto p = S6Params::init(D, 4, prng);
        auto ua = rand_tensor({L, D}, rng, -1.0f, 1.0f, false);
        Tensor ub = rand_tensor({L, D}, rng, -1.0f, 1.0f, false);
        for (i64 t = 0; t <= cut; ++t)
            for (i64 d = 0; d < D; ++d)
                ub.value()[static_cast<std::size_t>(t * D + d)] =
                    ua.value()[static_cast<std::size_t>(t * D + d)];
        const Tensor ya = selective_scan(ua, p, 1);
        const Tensor yb = selective_scan(ub, p, 1);
        bool same = true;
        for (i64 t = 0; t <= cut && same; ++t)
            for (i64 d = 0; d < D; ++d)
                if (ya.value()[static_cast<std::size_t>(t * D + d)] !=
                    yb.value()[static_cast<std::size_t>(t * D + d)])
                    same = false;
        if (same) ++proj_ok;
    }

    o.pass = causal_ok == 20 && proj_ok == 5;
    o.detail = "running sum err " + fmt("%.1e", cum_err) + ", causality " +
               std::to_string(causal_ok) + "/20 core + " +
               std::to_string(proj_ok) + "/5 projected";
    return o;
}

// ---- 3: difference-of-gaussians bank --------------------------------------

Outcome check_dog() {
    Outcome o;
    std::ostringstream why;

    // kernel normalization
    double norm_err = 0.0;
    for (float sigma : {0.5f, 0.8f, 1.0f, 1.7f, 2.4f})
        for (i64 k : {3, 5, 7, 11}) {
            double s = 0.0;
            for (float wv : gaussian_kernel(sigma, k).weights) s += wv;
            norm_err = std::max(norm_err, std::abs(s - 1.0));
        }
    if (norm_err > 1e-6) why << "kernel sum off by " << norm_err << "; ";

    // impulse response reproduces the kernel exactly
    {
        const auto gk = gaussian_kernel(1.0f, 5);
        Tensor x = Tensor::zeros({1, 1, 9, 9});
        x.value()[4 * 9 + 4] = 1.0f;
        const Tensor y = gaussian_blur(x, gk);
        bool exact = true;
        for (i64 dy = -2; dy <= 2; ++dy)
            for (i64 dx = -2; dx <= 2; ++dx)
                if (y.value()[static_cast<std::size_t>((4 + dy) * 9 + 4 + dx)] !=
                    gk.weights[static_cast<std::size_t>((dy + 2) * 5 + dx + 2)])
                    exact = false;
        if (y.value()[0] != 0.0f) exact = false;  // no long-range leakage
        if (!exact) why << "impulse response differs from the kernel; ";
    }

    // shared schedule boundaries, bitwise
    for (float sigma0 : {0.8f, 1.0f, 0.37f})
        for (int n : {2, 3, 5}) {
            const auto sched = sigma_schedule(sigma0, n);
            for (std::size_t i = 0; i + 1 < sched.size(); ++i)
                if (sched[i].second != sched[i + 1].first)
                    why << "schedule boundary not shared at " << i << "; ";
        }

    // constant annihilation and linearity of the bank
    {
        DoGBank bank({.scales = 3, .sigma0 = 0.8f});
        const Tensor c = Tensor::full({1, 2, 12, 12}, 0.37f);
        const Tensor flat = f_dog(c, bank);
        double ann = 0.0;
        for (float v : flat.value())
            ann = std::max(ann, static_cast<double>(std::abs(v)));
        if (ann > 1e-5) why << "constant not annihilated (" << ann << "); ";

        Rng rng(205);
        auto x1 = rand_tensor({1, 2, 12, 12}, rng, 0.0f, 1.0f, false);
        auto x2 = rand_tensor({1, 2, 12, 12}, rng, 0.0f, 1.0f, false);
        const Tensor sum = ops::add(x1, x2);
        const Tensor lhs = f_dog(sum, bank);
        const Tensor rhs = ops::add(f_dog(x1, bank), f_dog(x2, bank));
        double lin_x = 0.0;
        for (i64 i = 0; i < lhs.numel(); ++i)
            lin_x = std::max(lin_x, static_cast<double>(std::abs(
                                        lhs.value()[i] - rhs.value()[i])));
        if (lin_x > 1e-5) why << "not linear in x (" << lin_x << "); ";

        // linear in the weights: w and 2w differ by exactly the response
        DoGBank twice({.scales = 3, .sigma0 = 0.8f});
        for (auto& w : twice.weights())
            for (auto& v : w.value()) v *= 2.0f;
        const Tensor y1 = f_dog(x1, bank);
        const Tensor y2 = f_dog(x1, twice);
        double lin_w = 0.0;
        for (i64 i = 0; i < y1.numel(); ++i)
            lin_w = std::max(lin_w,
                             static_cast<double>(std::abs(
                                 y2.value()[i] - 2.0f * y1.value()[i])));
        if (lin_w > 1e-5) why << "not linear in w (" << lin_w << "); ";
    }

    o.pass = why.str().empty();
    o.detail = o.pass ? "normalization, impulse, shared boundaries, "
                        "annihilation, linearity all hold"
                      : why.str();
    return o;
}

// ---- 4: skip-mode equivalence ---------------------------------------------

Outcome check_skip_equivalence() {
    Outcome o;
    ModelConfig base;
    base.dims = {4, 6};
    base.depths = {1, 1};
    base.state_dim = 4;
    base.dog_scales = 2;

    ModelConfig plain_cfg = base;
    plain_cfg.skip_mode = SkipMode::Plain;
    ModelConfig res_cfg = base;
    res_cfg.skip_mode = SkipMode::DoGResidual;

    Rng r1(206), r2(206);
    Model plain(plain_cfg, r1);
    Model residual(res_cfg, r2);
    for (auto& [name, t] : residual.named_parameters())
        if (name.rfind("dog", 0) == 0)
            for (auto& v : t.value()) v = 0.0f;

    Rng xr(207);
    const Tensor x = rand_tensor({1, 3, 16, 16}, xr, 0.0f, 1.0f, false);
    const auto ha = plain.forward(x);
    const auto hb = residual.forward(x);
    bool same = ha.size() == hb.size();
    for (std::size_t i = 0; same && i < ha.size(); ++i)
        same = bitwise_equal(ha[i].value(), hb[i].value());

    o.pass = same;
    o.detail = same ? "zero-weight residual bank collapses onto the plain "
                      "skip, bitwise, on every head"
                    : "head outputs differ between the twin models";
    return o;
}

// ---- 5: overfit run through the command line -------------------------------

Outcome check_overfit() {
    Outcome o;
    const std::string cli = cli_path();
    if (cli.empty()) {
        o.detail = "AMSDB_CLI_PATH not set";
        return o;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const std::string root = make_temp_dir("accept_overfit");
    const std::string corpus = root + "/corpus";

    CmdResult r = run_cmd(cli + " synth --out-dir " + corpus +
                          " --count 8 --size 128 --seed 42");
    if (r.exit_code != 0) {
        o.detail = "synth failed: " + r.output;
        return o;
    }
    // Full 500-step budget, every page in the train set (no holdout), no
    // augmentation: the run memorises the eight pages rather than generalise.
    r = run_cmd(cli + " train --manifest " + corpus +
                "/manifest.tsv --out-dir " + root +
                "/run --dims 16,32 --depths 1,1 --state-dim 8 --dog-scales 3"
                " --patch 128 --stride 64 --batch 8 --steps 500 --lr 1e-3"
                " --seed 3 --no-augment --val-every 0 --val-fraction 0");
    if (r.exit_code != 0) {
        o.detail = "train failed: " + r.output;
        return o;
    }

    std::string images;
    for (int i = 0; i < 8; ++i)
        images += " " + corpus + "/synth_" + std::to_string(i) + ".png";
    r = run_cmd(cli + " infer --checkpoint " + root +
                "/run/model.amsdb --images" + images + " --out-dir " + root +
                "/pred --patch 128 --stride 64");
    if (r.exit_code != 0) {
        o.detail = "infer failed: " + r.output;
        return o;
    }

    run_cmd("mkdir -p " + root + "/gt && cp " + corpus + "/*_gt.png " + root +
            "/gt/");
    r = run_cmd(cli + " eval --pred-dir " + root + "/pred --gt-dir " + root +
                "/gt --out-dir " + root + "/eval");
    if (r.exit_code != 0) {
        o.detail = "eval failed: " + r.output;
        return o;
    }

    const auto doc =
        nlohmann::json::parse(read_text(root + "/eval/report.json"));
    const double fm = doc["mean"]["fmeasure"].get<double>();
    const double ps = doc["mean"]["psnr"].get<double>();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    run_cmd("rm -rf " + root);

    o.pass = fm >= 95.0 && ps >= 15.0 && secs < 600.0;
    o.detail = "train-set FM " + fmt("%.2f", fm) + " (need >= 95), PSNR " +
               fmt("%.2f", ps) + " (need >= 15), " + fmt("%.0f", secs) +
               "s of 600";
    return o;
}

// ---- 6: metric oracles -----------------------------------------------------

Outcome check_metric_oracles() {
    Outcome o;
    Rng rng(208);
    auto random_mask = [&](double p) {
        Mask m = make_mask(16, 16);
        for (auto& v : m.ink) v = rng.bernoulli(p) ? 1 : 0;
        return m;
    };

    int pair_ok = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const Mask pred = random_mask(0.4);
        Mask gt = random_mask(0.4);
        if (std::count(gt.ink.begin(), gt.ink.end(), 1) == 0) gt.ink[7] = 1;

        i64 tp = 0, fp = 0, fn = 0, diff = 0;
        for (std::size_t i = 0; i < pred.ink.size(); ++i) {
            if (pred.ink[i] && gt.ink[i]) ++tp;
            if (pred.ink[i] && !gt.ink[i]) ++fp;
            if (!pred.ink[i] && gt.ink[i]) ++fn;
            if (pred.ink[i] != gt.ink[i]) ++diff;
        }
        const double p =
            tp + fp > 0
                ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                : 0.0;
        const double rr = static_cast<double>(tp) / static_cast<double>(tp + fn);
        const double f = p + rr > 0.0 ? 200.0 * p * rr / (p + rr) : 0.0;
        const PRF got = f_measure(pred, gt);
        bool ok = got.defined && got.precision == p && got.recall == rr &&
                  got.f == f;

        Mask skel = skeletonize(gt);
        const Mask& ref =
            std::count(skel.ink.begin(), skel.ink.end(), 1) == 0 ? gt : skel;
        i64 stp = 0, sfn = 0;
        for (std::size_t i = 0; i < pred.ink.size(); ++i) {
            if (pred.ink[i] && ref.ink[i]) ++stp;
            if (!pred.ink[i] && ref.ink[i]) ++sfn;
        }
        const double pr =
            static_cast<double>(stp) / static_cast<double>(stp + sfn);
        const double pf = p + pr > 0.0 ? 200.0 * p * pr / (p + pr) : 0.0;
        const PRF pgot = pseudo_f_measure(pred, gt);
        ok = ok && pgot.recall == pr && pgot.f == pf;

        const double mse = static_cast<double>(diff) / 256.0;
        const double want_psnr =
            diff == 0 ? 100.0
                      : std::min(100.0, 10.0 * std::log10(1.0 / mse));
        ok = ok && psnr(pred, gt) == want_psnr;
        if (ok) ++pair_ok;
    }

    int otsu_ok = 0;
    auto bin_of = [](float v) {
        const long b = std::lround(static_cast<double>(v) * 255.0);
        return static_cast<int>(b < 0 ? 0 : (b > 255 ? 255 : b));
    };
    for (int rep = 0; rep < 50; ++rep) {
        Image img = make_image(16, 16, 1);
        for (auto& v : img.pix) v = static_cast<float>(rng.uniform());
        i64 hist[256] = {};
        for (float v : img.pix) ++hist[bin_of(v)];
        int best_t = -1;
        double best_var = -1.0;
        for (int t = 0; t <= 255; ++t) {
            i64 w0 = 0, w1 = 0;
            double s0 = 0.0, s1 = 0.0;
            for (int b = 0; b < t; ++b) {
                w0 += hist[b];
                s0 += static_cast<double>(b) * static_cast<double>(hist[b]);
            }
            for (int b = t; b < 256; ++b) {
                w1 += hist[b];
                s1 += static_cast<double>(b) * static_cast<double>(hist[b]);
            }
            if (w0 == 0 || w1 == 0) continue;
            const double mu0 = s0 / static_cast<double>(w0);
            const double mu1 = s1 / static_cast<double>(w1);
            const double var = static_cast<double>(w0) *
                               static_cast<double>(w1) * (mu0 - mu1) *
                               (mu0 - mu1);
            if (var > best_var) {
                best_var = var;
                best_t = t;
            }
        }
        const auto [t, mask] = otsu(img);
        bool ok = t == best_t;
        for (std::size_t i = 0; ok && i < img.pix.size(); ++i)
            ok = mask.ink[i] == (bin_of(img.pix[i]) < t ? 1 : 0);
        if (ok) ++otsu_ok;
    }

    // windowed thresholds vs naive double loops (band of 1e-5 around t)
    int local_ok = 0;
    {
        Image img = make_image(20, 14, 1);
        for (auto& v : img.pix) v = static_cast<float>(rng.uniform());
        const i64 window = 5;
        const i64 h = img.h, w = img.w, rr = window / 2;
        std::vector<double> mean(static_cast<std::size_t>(h * w)),
            sq(mean.size());
        for (i64 y = 0; y < h; ++y)
            for (i64 x = 0; x < w; ++x) {
                double s = 0.0, s2 = 0.0;
                for (i64 dy = -rr; dy <= rr; ++dy)
                    for (i64 dx = -rr; dx <= rr; ++dx) {
                        const double v =
                            img.pix[kern::reflect_index(y + dy, h) * w +
                                    kern::reflect_index(x + dx, w)];
                        s += v;
                        s2 += v * v;
                    }
                mean[static_cast<std::size_t>(y * w + x)] =
                    s / static_cast<double>(window * window);
                sq[static_cast<std::size_t>(y * w + x)] =
                    s2 / static_cast<double>(window * window);
            }
        const Mask sv = sauvola(img, window);
        const Mask br = bradley(img, window);
        bool ok = true;
        for (std::size_t i = 0; i < img.pix.size(); ++i) {
            const double m = mean[i];
            const double sd = std::sqrt(std::max(0.0, sq[i] - m * m));
            const double ts = m * (1.0 + 0.2 * (sd / 0.5 - 1.0));
            const double tb = m * 0.85;
            const double v = img.pix[i];
            if (v < ts - 1e-5 && sv.ink[i] != 1) ok = false;
            if (v > ts + 1e-5 && sv.ink[i] != 0) ok = false;
            if (v < tb - 1e-5 && br.ink[i] != 1) ok = false;
            if (v > tb + 1e-5 && br.ink[i] != 0) ok = false;
        }
        if (ok) local_ok = 1;
    }

    o.pass = pair_ok == 100 && otsu_ok == 50 && local_ok == 1;
    o.detail = std::to_string(pair_ok) +
               "/100 metric pairs exact, " + std::to_string(otsu_ok) +
               "/50 otsu exact, local thresholds " +
               (local_ok ? "within 1e-5" : "OUT OF BAND");
    return o;
}

// ---- 7: patch pipeline properties -----------------------------------------

Outcome check_pipeline() {
    Outcome o;
    std::ostringstream why;
    const auto t0 = std::chrono::steady_clock::now();

    if (patch_origins(256, 128, 64) != std::vector<i64>{0, 64, 128})
        why << "origins(256) wrong; ";
    if (patch_origins(200, 128, 64) != std::vector<i64>{0, 64, 72})
        why << "origins(200) wrong; ";
    if (make_grid(256, 256, 128, 64).origins.size() != 9)
        why << "256 grid is not 9 patches; ";
    if (make_grid(200, 200, 128, 64).origins.size() != 9)
        why << "200 grid is not 9 patches; ";

    Rng rng(209);
    Image img = make_image(232, 200, 3);
    for (auto& v : img.pix) v = static_cast<float>(rng.uniform());
    const PatchGrid g = make_grid(img.h, img.w, 128, 64);
    if (stitch(extract_patches(img, g), g).pix != img.pix)
        why << "stitch(extract) is not the identity; ";

    Mask m = make_mask(9, 7);
    for (auto& v : m.ink) v = rng.bernoulli(0.5) ? 1 : 0;
    if (hflip(hflip(img)).pix != img.pix || hflip(hflip(m)).ink != m.ink)
        why << "hflip not an involution; ";
    if (vflip(vflip(img)).pix != img.pix || vflip(vflip(m)).ink != m.ink)
        why << "vflip not an involution; ";
    if (rot90(rot90(rot90(rot90(img)))).pix != img.pix ||
        rot90(rot90(rot90(rot90(m)))).ink != m.ink)
        why << "rot90 does not have order four; ";

    DatasetIndex idx;
    idx.entries = {{"2009", "a", "ag"}, {"2010", "b", "bg"},
                   {"2009", "c", "cg"}, {"2016", "d", "dg"}};
    const auto [train, test] = leave_one_out_split(idx, "2009");
    bool part = train.entries.size() == 2 && test.entries.size() == 2;
    for (const auto& e : train.entries) part = part && e.year != "2009";
    for (const auto& e : test.entries) part = part && e.year == "2009";
    if (!part) why << "leave-one-out is not a partition; ";

    // checkpoint byte round trip + two-run training determinism
    const std::string root = make_temp_dir("accept_ckpt");
    ModelConfig mc;
    mc.dims = {4, 6};
    mc.depths = {1, 1};
    mc.state_dim = 4;
    mc.dog_scales = 2;
    {
        Rng r1(210);
        Model model(mc, r1);
        save_checkpoint(root + "/a.ckpt", checkpoint_from_model(model, 3, 9));
        const Checkpoint back = load_checkpoint(root + "/a.ckpt");
        save_checkpoint(root + "/b.ckpt", back);
        if (read_text(root + "/a.ckpt") != read_text(root + "/b.ckpt"))
            why << "checkpoint round trip not byte-exact; ";
        Rng r2(999);
        Model other(mc, r2);
        apply_to_model(back, other);
        const auto want = model.named_parameters();
        const auto got = other.named_parameters();
        for (std::size_t i = 0; i < want.size(); ++i)
            if (want[i].second.value() != got[i].second.value()) {
                why << "restored parameters differ; ";
                break;
            }
    }
    {
        Rng crng(211);
        std::vector<LoadedPair> data;
        for (int i = 0; i < 2; ++i) {
            SynthPair p = synth_pair(64, crng);
            data.push_back({to_rgb(p.degraded), p.gt, "2009"});
        }
        TrainConfig tc;
        tc.batch = 2;
        tc.steps = 5;
        tc.patch = 32;
        tc.stride = 32;
        tc.jitter = 8;
        tc.val_every = 0;
        for (int run = 0; run < 2; ++run) {
            Rng mr(3);
            Model model(mc, mr);
            Adam adam(model.parameters());
            Rng tr(9);
            train_loop(model, adam, data, tc, tr);
            save_checkpoint(root + "/run" + std::to_string(run) + ".ckpt",
                            checkpoint_from_model(model, 5, 9, &adam));
        }
        if (read_text(root + "/run0.ckpt") != read_text(root + "/run1.ckpt"))
            why << "same-seed training is not byte-deterministic; ";
    }
    run_cmd("rm -rf " + root);

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    o.pass = why.str().empty() && secs < 300.0;
    o.detail = o.pass ? "grids, stitching, flips, split, checkpoints, "
                        "two-run determinism all hold (" +
                            fmt("%.1f", secs) + "s)"
                      : why.str();
    return o;
}

// ---- 8: end-to-end command-line pipeline -----------------------------------

Outcome check_end_to_end() {
    Outcome o;
    const std::string cli = cli_path();
    if (cli.empty()) {
        o.detail = "AMSDB_CLI_PATH not set";
        return o;
    }
    const std::string root = make_temp_dir("accept_e2e");
    const std::string corpus = root + "/corpus";
    std::ostringstream why;

    auto step = [&](const std::string& what, const std::string& cmd) {
        const CmdResult r = run_cmd(cmd);
        if (r.exit_code != 0)
            why << what << " exited " << r.exit_code << "; ";
        return r.exit_code == 0;
    };

    bool ok =
        step("synth", cli + " synth --out-dir " + corpus +
                          " --count 4 --size 64 --seed 11") &&
        step("split", cli + " split --manifest " + corpus +
                          "/manifest.tsv --year 2012 --out-dir " + root +
                          "/split") &&
        step("train", cli + " train --manifest " + root +
                          "/split/train.manifest --out-dir " + root +
                          "/run --dims 8,12 --depths 1,1 --state-dim 4"
                          " --dog-scales 2 --patch 32 --stride 32 --batch 2"
                          " --steps 4 --seed 3 --val-every 0") &&
        step("infer", cli + " infer --checkpoint " + root +
                          "/run/model.amsdb --images " + corpus +
                          "/synth_3.png --out-dir " + root +
                          "/pred --patch 32 --stride 16");
    if (ok) {
        run_cmd("mkdir -p " + root + "/gt && cp " + corpus +
                "/synth_3_gt.png " + root + "/gt/");
        ok = step("eval", cli + " eval --pred-dir " + root +
                              "/pred --gt-dir " + root + "/gt --out-dir " +
                              root + "/eval");
    }

    // ground truth scored against itself must be perfect on every row
    if (ok) {
        run_cmd("mkdir -p " + root + "/gt_pred " + root + "/gt_all");
        for (int i = 0; i < 4; ++i) {
            run_cmd("cp " + corpus + "/synth_" + std::to_string(i) +
                    "_gt.png " + root + "/gt_pred/synth_" + std::to_string(i) +
                    ".png");
            run_cmd("cp " + corpus + "/synth_" + std::to_string(i) +
                    "_gt.png " + root + "/gt_all/");
        }
        ok = step("self-eval", cli + " eval --pred-dir " + root +
                                   "/gt_pred --gt-dir " + root +
                                   "/gt_all --out-dir " + root +
                                   "/eval_self");
        if (ok) {
            const auto doc = nlohmann::json::parse(
                read_text(root + "/eval_self/report.json"));
            if (doc["images"].size() != 4) why << "self-eval row count; ";
            for (const auto& [name, row] : doc["images"].items())
                if (row["fmeasure"].get<double>() != 100.0)
                    why << name << " below 100; ";
        }
    }

    run_cmd("rm -rf " + root);
    o.pass = why.str().empty();
    o.detail = o.pass ? "split, train, infer, eval all exit 0; ground truth "
                        "scores 100 against itself on every page"
                      : why.str();
    return o;
}

}  // namespace

int main() {
    struct Entry {
        const char* name;
        std::function<Outcome()> fn;
    };
    const std::vector<Entry> checks = {
        {"gradients", check_gradients},
        {"scan oracle", check_scan_oracle},
        {"difference-of-gaussians bank", check_dog},
        {"skip-mode equivalence", check_skip_equivalence},
        {"command-line overfit", check_overfit},
        {"metric oracles", check_metric_oracles},
        {"patch pipeline", check_pipeline},
        {"end-to-end pipeline", check_end_to_end},
    };

    int failed = 0;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        Outcome o;
        try {
            o = checks[i].fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) ++failed;
        std::printf("[%s] criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL",
                    i + 1, checks[i].name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/8 criteria passed\n", 8 - failed);
    return failed;
}
