#include "amsdb/model.hpp"

#include <algorithm>
#include <cmath>

namespace amsdb {

namespace {

Tensor tn_leaf(Shape shape, Rng& rng) {
    std::vector<float> v(static_cast<size_t>(::amsdb::numel(shape)));
    for (auto& x : v) x = static_cast<float>(rng.trunc_normal(0.02));
    return Tensor::from_data(std::move(shape), std::move(v), true);
}

ConvParams conv_init(i64 oc, i64 ic, i64 k, Rng& rng) {
    return {tn_leaf({oc, ic, k, k}, rng), Tensor::zeros({oc}, true)};
}

}  // namespace

const char* skip_mode_name(SkipMode mode) {
    switch (mode) {
        case SkipMode::Plain: return "plain";
        case SkipMode::DoG: return "dog";
        case SkipMode::DoGResidual: return "dog_residual";
    }
    return "?";
}

SkipMode skip_mode_from_name(const std::string& name) {
    if (name == "plain") return SkipMode::Plain;
    if (name == "dog") return SkipMode::DoG;
    if (name == "dog_residual") return SkipMode::DoGResidual;
    throw ConfigError("unknown skip mode '" + name +
                      "' (expected plain, dog, or dog_residual)");
}

Tensor skip_transform(const Tensor& feature, SkipMode mode,
                      const DoGBank* bank) {
    if (mode == SkipMode::Plain) return feature;
    if (bank == nullptr)
        throw ConfigError(std::string("skip mode ") + skip_mode_name(mode) +
                          " requires a DoG bank");
    Tensor filtered = f_dog(feature, *bank);
    if (mode == SkipMode::DoG) return filtered;
    return ops::add(feature, filtered);
}

std::pair<Tensor, Tensor> upsample_block(const Tensor& decoder_in,
                                         const Tensor& skip,
                                         const UpBlockParams& p) {
    Tensor up = ops::upsample_nearest2x(decoder_in);
    const Shape& us = up.shape();
    const Shape& ss = skip.shape();
    if (us[0] != ss[0] || us[2] != ss[2] || us[3] != ss[3])
        throw ShapeError("upsample_block: upsampled input " + shape_str(us) +
                         " does not align with skip " + shape_str(ss));
    Tensor cat = ops::concat_channels(up, skip);
    Tensor h = ops::silu(ops::conv2d(cat, p.c1.w, p.c1.b, 1, 1));
    h = ops::silu(ops::conv2d(h, p.c2.w, p.c2.b, 1, 1));
    Tensor out = ops::add(h, ops::conv2d(cat, p.proj.w, p.proj.b, 1, 0));
    Tensor logits = ops::conv2d(out, p.head.w, p.head.b, 1, 0);
    return {out, logits};
}

std::vector<float> downsample_majority(const std::vector<float>& t, i64 n,
                                       i64 h, i64 w, i64 f) {
    if (f <= 0 || h % f != 0 || w % f != 0)
        throw ValueError("downsample factor must divide the mask size");
    const i64 oh = h / f, ow = w / f;
    std::vector<float> out(static_cast<size_t>(n * oh * ow));
    const double cell = static_cast<double>(f * f);
    for (i64 img = 0; img < n; ++img)
        for (i64 oy = 0; oy < oh; ++oy)
            for (i64 ox = 0; ox < ow; ++ox) {
                double s = 0.0;
                for (i64 dy = 0; dy < f; ++dy) {
                    const float* row =
                        t.data() + ((img * h + oy * f + dy) * w + ox * f);
                    for (i64 dx = 0; dx < f; ++dx) s += row[dx];
                }
                out[static_cast<size_t>((img * oh + oy) * ow + ox)] =
                    (s * 2.0 >= cell) ? 1.0f : 0.0f;
            }
    return out;
}

Model::Model(ModelConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    if (cfg_.dims.empty())
        throw ConfigError("model needs at least one encoder stage");
    if (cfg_.dims.size() != cfg_.depths.size())
        throw ConfigError("dims and depths must have the same length");
    for (i64 d : cfg_.dims)
        if (d <= 0) throw ConfigError("stage dims must be positive");
    for (i64 d : cfg_.depths)
        if (d <= 0) throw ConfigError("stage depths must be positive");
    if (cfg_.in_channels <= 0 || cfg_.state_dim <= 0 || cfg_.expand <= 0)
        throw ConfigError("in_channels, state_dim and expand must be positive");
    // The final expansion recovers the patch embed with two fixed 2x steps.
    if (cfg_.patch_embed != 4)
        throw ConfigError("patch embed factor must be 4");
    if (cfg_.skip_mode != SkipMode::Plain && cfg_.dog_scales < 1)
        throw ConfigError("DoG skip modes need at least one scale");

    const i64 n = cfg_.stages();
    stages_.reserve(static_cast<size_t>(n));
    for (i64 i = 0; i < n; ++i) {
        StageParams st;
        if (i == 0) {
            st.embed = conv_init(cfg_.dims[0], cfg_.in_channels,
                                 cfg_.patch_embed, rng);
            st.ln_g = Tensor::full({cfg_.dims[0]}, 1.0f, true);
            st.ln_b = Tensor::zeros({cfg_.dims[0]}, true);
        } else {
            st.embed = conv_init(cfg_.dims[i], cfg_.dims[i - 1], 2, rng);
        }
        for (i64 j = 0; j < cfg_.depths[i]; ++j)
            st.blocks.push_back(VssBlockParams::init(
                cfg_.dims[i], cfg_.expand * cfg_.dims[i], cfg_.state_dim, rng));
        stages_.push_back(std::move(st));
    }

    if (cfg_.skip_mode != SkipMode::Plain) {
        banks_.reserve(static_cast<size_t>(n));
        for (i64 i = 0; i < n; ++i)
            banks_.emplace_back(DoGBankConfig{cfg_.dog_scales, cfg_.dog_sigma0});
    }

    for (i64 s = n - 1; s >= 1; --s) {
        UpBlockParams up;
        const i64 deep = cfg_.dims[s], sk = cfg_.dims[s - 1];
        up.c1 = conv_init(sk, deep + sk, 3, rng);
        up.c2 = conv_init(sk, sk, 3, rng);
        up.proj = conv_init(sk, deep + sk, 1, rng);
        up.head = conv_init(1, sk, 1, rng);
        ups_.push_back(std::move(up));
    }

    const i64 fe = std::max<i64>(4, cfg_.dims[0] / 2);
    final_.c0 = conv_init(fe, cfg_.dims[0], 3, rng);
    final_.c1 = conv_init(fe, fe, 3, rng);
    final_.c2 = conv_init(fe, fe, 3, rng);
    final_.head = conv_init(1, fe, 1, rng);
}

i64 Model::downsample_factor() const {
    return cfg_.patch_embed << (cfg_.stages() - 1);
}

std::vector<Tensor> Model::encoder_forward(const Tensor& x) const {
    if (!x.defined() || x.shape().size() != 4)
        throw ShapeError("encoder input must be a 4-d tensor");
    const Shape& xs = x.shape();
    if (xs[1] != cfg_.in_channels)
        throw ShapeError("encoder input has " + std::to_string(xs[1]) +
                         " channels, config expects " +
                         std::to_string(cfg_.in_channels));
    const i64 div = downsample_factor();
    if (xs[2] % div != 0 || xs[3] % div != 0)
        throw ShapeError("input " + std::to_string(xs[2]) + "x" +
                         std::to_string(xs[3]) + " is not divisible by " +
                         std::to_string(div) + "; pad before the model");

    std::vector<Tensor> feats;
    Tensor f = x;
    for (i64 i = 0; i < cfg_.stages(); ++i) {
        const StageParams& st = stages_[static_cast<size_t>(i)];
        const i64 stride = (i == 0) ? cfg_.patch_embed : 2;
        f = ops::conv2d(f, st.embed.w, st.embed.b, stride, 0);
        if (i == 0) {
            const Shape& fs = f.shape();
            Tensor t = ops::nchw_to_tokens(f);
            t = ops::layer_norm(t, st.ln_g, st.ln_b);
            f = ops::tokens_to_nchw(t, fs[0], fs[1], fs[2], fs[3]);
        }
        for (const VssBlockParams& b : st.blocks) f = vss_block(f, b);
        feats.push_back(f);
    }
    return feats;
}

Tensor Model::skip_transform(const Tensor& feature, i64 stage) const {
    if (stage < 0 || stage >= cfg_.stages())
        throw ValueError("skip stage out of range");
    const DoGBank* bank =
        banks_.empty() ? nullptr : &banks_[static_cast<size_t>(stage)];
    return ::amsdb::skip_transform(feature, cfg_.skip_mode, bank);
}

std::vector<Tensor> Model::forward(const Tensor& x) const {
    std::vector<Tensor> feats = encoder_forward(x);
    const i64 n = cfg_.stages();
    Tensor d = skip_transform(feats[static_cast<size_t>(n - 1)], n - 1);
    std::vector<Tensor> coarse;  // execution order = coarsest first
    for (size_t k = 0; k < ups_.size(); ++k) {
        const i64 s = n - 1 - static_cast<i64>(k);
        auto [f, logits] = upsample_block(
            d, skip_transform(feats[static_cast<size_t>(s - 1)], s - 1),
            ups_[k]);
        d = f;
        coarse.push_back(logits);
    }
    Tensor f = ops::silu(ops::conv2d(d, final_.c0.w, final_.c0.b, 1, 1));
    f = ops::upsample_nearest2x(f);
    f = ops::silu(ops::conv2d(f, final_.c1.w, final_.c1.b, 1, 1));
    f = ops::upsample_nearest2x(f);
    f = ops::silu(ops::conv2d(f, final_.c2.w, final_.c2.b, 1, 1));
    std::vector<Tensor> heads;
    heads.push_back(ops::conv2d(f, final_.head.w, final_.head.b, 1, 0));
    for (auto it = coarse.rbegin(); it != coarse.rend(); ++it)
        heads.push_back(*it);
    return heads;
}

LossTerms Model::loss(const std::vector<Tensor>& heads, const Tensor& target,
                      std::vector<float> scale_weights) const {
    if (heads.empty()) throw ValueError("loss needs at least one head");
    if (!target.defined() || target.shape().size() != 4)
        throw ShapeError("loss target must be a 4-d tensor");
    const Shape& fs = heads[0].shape();
    if (target.shape() != fs)
        throw ShapeError("loss target " + shape_str(target.shape()) +
                         " does not match finest head " + shape_str(fs));
    if (scale_weights.empty()) {
        scale_weights.resize(heads.size());
        float l = 1.0f;
        for (auto& v : scale_weights) {
            v = l;
            l *= 0.5f;
        }
    } else if (scale_weights.size() != heads.size()) {
        throw ValueError("scale_weights length does not match head count");
    }

    const i64 nb = fs[0], H = fs[2], W = fs[3];
    LossTerms out;
    Tensor total;
    for (size_t si = 0; si < heads.size(); ++si) {
        const Tensor& z = heads[si];
        const Shape& hs = z.shape();
        if (hs.size() != 4 || hs[0] != nb || hs[1] != 1)
            throw ShapeError("head " + std::to_string(si) +
                             " must be [N,1,h,w], got " + shape_str(hs));
        if (H % hs[2] != 0 || hs[3] * (H / hs[2]) != W)
            throw ShapeError("head " + std::to_string(si) + " size " +
                             shape_str(hs) +
                             " is not an integer downscale of the target");
        const i64 f = H / hs[2];
        std::vector<float> tvec =
            (f == 1) ? target.value()
                     : downsample_majority(target.value(), nb, H, W, f);
        double tsum = 0.0;
        for (float v : tvec) tsum += v;
        Tensor t = Tensor::from_data(hs, std::move(tvec), false);

        // mean(softplus(z) - z*t) is BCE-with-logits in its stable form.
        Tensor bce =
            ops::reduce_mean(ops::sub(ops::softplus(z), ops::mul(z, t)));
        Tensor p = ops::sigmoid(z);
        Tensor num = ops::add_const(
            ops::mul_const(ops::reduce_sum(ops::mul(p, t)), 2.0f), 1.0f);
        Tensor den =
            ops::add_const(ops::reduce_sum(p), static_cast<float>(tsum) + 1.0f);
        Tensor dice =
            ops::add_const(ops::mul_const(ops::div(num, den), -1.0f), 1.0f);
        out.bce.push_back(bce.item());
        out.dice.push_back(dice.item());
        if (scale_weights[si] != 0.0f) {
            Tensor term = ops::mul_const(ops::add(bce, dice), scale_weights[si]);
            total = total.defined() ? ops::add(total, term) : term;
        }
    }
    out.total = total.defined() ? total : Tensor::zeros({1});
    return out;
}

std::vector<std::pair<std::string, Tensor>> Model::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto conv = [&out](const std::string& prefix, const ConvParams& c) {
        out.emplace_back(prefix + ".w", c.w);
        out.emplace_back(prefix + ".b", c.b);
    };
    for (i64 i = 0; i < cfg_.stages(); ++i) {
        const StageParams& st = stages_[static_cast<size_t>(i)];
        const std::string p = "enc" + std::to_string(i);
        conv(p + ".embed", st.embed);
        if (st.ln_g.defined()) {
            out.emplace_back(p + ".ln.g", st.ln_g);
            out.emplace_back(p + ".ln.b", st.ln_b);
        }
        for (size_t j = 0; j < st.blocks.size(); ++j)
            st.blocks[j].collect(p + ".block" + std::to_string(j), out);
    }
    for (size_t i = 0; i < banks_.size(); ++i) {
        const auto& ws = banks_[i].weights();
        for (size_t t = 0; t < ws.size(); ++t)
            out.emplace_back(
                "dog" + std::to_string(i) + ".w" + std::to_string(t), ws[t]);
    }
    for (size_t k = 0; k < ups_.size(); ++k) {
        const std::string p = "up" + std::to_string(k);
        conv(p + ".c1", ups_[k].c1);
        conv(p + ".c2", ups_[k].c2);
        conv(p + ".proj", ups_[k].proj);
        conv(p + ".head", ups_[k].head);
    }
    conv("final.c0", final_.c0);
    conv("final.c1", final_.c1);
    conv("final.c2", final_.c2);
    conv("final.head", final_.head);
    return out;
}

std::vector<Tensor> Model::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

i64 Model::param_count() const {
    i64 n = 0;
    for (const Tensor& t : parameters()) n += t.numel();
    return n;
}

}  // namespace amsdb
