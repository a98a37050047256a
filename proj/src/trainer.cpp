#include "amsdb/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "amsdb/ops.hpp"

namespace amsdb {

namespace {

struct Sample {
    size_t pair = 0;
    i64 y0 = 0, x0 = 0;
};

PatchPair sample_patch(const std::vector<LoadedPair>& data, const Sample& s,
                       const TrainConfig& cfg, Rng& rng, bool augmented) {
    const LoadedPair& p = data[s.pair];
    if (!augmented)
        return {crop(p.img, s.y0, s.x0, cfg.patch, cfg.patch),
                crop(p.gt, s.y0, s.x0, cfg.patch, cfg.patch)};
    const i64 cy0 = std::max<i64>(0, s.y0 - cfg.jitter);
    const i64 cx0 = std::max<i64>(0, s.x0 - cfg.jitter);
    const i64 cy1 = std::min<i64>(p.img.h, s.y0 + cfg.patch + cfg.jitter);
    const i64 cx1 = std::min<i64>(p.img.w, s.x0 + cfg.patch + cfg.jitter);
    return augment(crop(p.img, cy0, cx0, cy1 - cy0, cx1 - cx0),
                   crop(p.gt, cy0, cx0, cy1 - cy0, cx1 - cx0), cfg.patch,
                   rng);
}

std::pair<Tensor, Tensor> batch_tensors(const std::vector<PatchPair>& ps,
                                        i64 size) {
    const i64 b = static_cast<i64>(ps.size());
    const i64 plane = size * size;
    std::vector<float> xv(static_cast<size_t>(b * 3 * plane));
    std::vector<float> tv(static_cast<size_t>(b * plane));
    for (i64 i = 0; i < b; ++i) {
        const PatchPair& p = ps[static_cast<size_t>(i)];
        std::copy(p.img.pix.begin(), p.img.pix.end(),
                  xv.begin() + i * 3 * plane);
        for (i64 j = 0; j < plane; ++j)
            tv[static_cast<size_t>(i * plane + j)] =
                static_cast<float>(p.gt.ink[static_cast<size_t>(j)]);
    }
    return {Tensor::from_data({b, 3, size, size}, std::move(xv)),
            Tensor::from_data({b, 1, size, size}, std::move(tv))};
}

double micro_fmeasure(i64 tp, i64 fp, i64 fn) {
    if (tp + fn == 0 || tp == 0) return 0.0;
    const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 200.0 * p * r / (p + r);
}

double val_fmeasure(const Model& model, const std::vector<LoadedPair>& data,
                    const std::vector<Sample>& val, const TrainConfig& cfg) {
    i64 tp = 0, fp = 0, fn = 0;
    Rng unused(0);
    for (size_t start = 0; start < val.size();
         start += static_cast<size_t>(cfg.batch)) {
        const size_t end =
            std::min(val.size(), start + static_cast<size_t>(cfg.batch));
        std::vector<PatchPair> ps;
        for (size_t i = start; i < end; ++i)
            ps.push_back(sample_patch(data, val[i], cfg, unused, false));
        auto [x, t] = batch_tensors(ps, cfg.patch);
        const Tensor logits = model.forward(x)[0];
        const std::vector<float>& z = logits.value();
        const std::vector<float>& tv = t.value();
        for (size_t i = 0; i < z.size(); ++i) {
            const bool p = z[i] >= 0.0f, g = tv[i] >= 0.5f;
            if (p && g)
                ++tp;
            else if (p)
                ++fp;
            else if (g)
                ++fn;
        }
    }
    return micro_fmeasure(tp, fp, fn);
}

}  // namespace

std::vector<LoadedPair> load_all(const DatasetIndex& index, i64 patch) {
    std::vector<LoadedPair> out;
    out.reserve(index.entries.size());
    for (const auto& e : index.entries) {
        LoadedPair p = load_pair(e);
        p.img = pad_to_min(p.img, patch, patch);
        p.gt = pad_to_min(p.gt, patch, patch);
        out.push_back(std::move(p));
    }
    return out;
}

TrainStats train_loop(Model& model, Adam& adam,
                      const std::vector<LoadedPair>& data,
                      const TrainConfig& cfg, Rng& rng) {
    if (data.empty()) throw DataError("training set is empty");
    if (cfg.batch <= 0) throw ConfigError("batch size must be positive");
    if (cfg.steps < 0) throw ConfigError("steps must be >= 0");
    if (cfg.patch % model.downsample_factor() != 0)
        throw ConfigError("patch size " + std::to_string(cfg.patch) +
                          " is not divisible by the model downsample factor " +
                          std::to_string(model.downsample_factor()));

    std::vector<Sample> inventory;
    for (size_t i = 0; i < data.size(); ++i) {
        const PatchGrid g =
            make_grid(data[i].img.h, data[i].img.w, cfg.patch, cfg.stride);
        for (auto [y, x] : g.origins) inventory.push_back({i, y, x});
    }
    const i64 n = static_cast<i64>(inventory.size());

    // Held-out validation patches; tiny inventories validate on the train
    // patches themselves rather than dropping training data.
    Rng split_rng = rng.fork(101);
    std::vector<i64> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    split_rng.shuffle(perm);
    i64 val_n = 0;
    if (cfg.val_fraction > 0.0f && n >= 2) {
        val_n = std::llround(static_cast<double>(cfg.val_fraction) *
                             static_cast<double>(n));
        val_n = std::clamp<i64>(val_n, 1, n - 1);
    }
    std::vector<Sample> val_set, train_set;
    for (i64 i = 0; i < val_n; ++i)
        val_set.push_back(inventory[static_cast<size_t>(perm[i])]);
    for (i64 i = val_n; i < n; ++i)
        train_set.push_back(inventory[static_cast<size_t>(perm[i])]);
    if (val_set.empty()) val_set = train_set;

    TrainStats stats;
    stats.train_patches = static_cast<i64>(train_set.size());
    stats.val_patches = static_cast<i64>(val_set.size());

    Rng shuffle_rng = rng.fork(7);
    Rng aug_rng = rng.fork(13);
    std::vector<i64> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    size_t pos = order.size();  // forces a shuffle before the first batch

    for (i64 step = 1; step <= cfg.steps; ++step) {
        std::vector<PatchPair> ps;
        std::vector<i64> batch_ids;
        for (i64 b = 0; b < cfg.batch; ++b) {
            if (pos == order.size()) {
                shuffle_rng.shuffle(order);
                pos = 0;
            }
            const i64 id = order[pos++];
            batch_ids.push_back(id);
            ps.push_back(sample_patch(data, train_set[static_cast<size_t>(id)],
                                      cfg, aug_rng, cfg.augment));
        }
        auto [x, t] = batch_tensors(ps, cfg.patch);
        const std::vector<Tensor> heads = model.forward(x);
        LossTerms lt = model.loss(heads, t);
        const float lv = lt.total.item();
        if (!std::isfinite(lv)) {
            std::string ids;
            for (i64 id : batch_ids)
                ids += (ids.empty() ? "" : ", ") + std::to_string(id);
            throw NumericError("non-finite loss at step " +
                               std::to_string(step) + " (batch patches: " +
                               ids + ")");
        }
        adam.zero_grad();
        backward(lt.total);
        adam.step();

        const bool record =
            step == 1 || step == cfg.steps ||
            (cfg.log_every > 0 && step % cfg.log_every == 0);
        const bool do_val =
            cfg.val_every > 0 && (step % cfg.val_every == 0 ||
                                  step == cfg.steps);
        if (record || do_val) {
            TrainLogRow row;
            row.step = step;
            row.loss = lv;
            if (do_val) {
                row.has_val = true;
                row.val_fm = val_fmeasure(model, data, val_set, cfg);
            }
            stats.rows.push_back(row);
        }
    }
    return stats;
}

Mask infer_image(const Model& model, const Image& rgb, i64 patch,
                 i64 stride) {
    if (patch % model.downsample_factor() != 0)
        throw ConfigError("patch size " + std::to_string(patch) +
                          " is not divisible by the model downsample factor " +
                          std::to_string(model.downsample_factor()));
    const Image src = to_rgb(rgb);
    const i64 H = src.h, W = src.w;
    const Image padded = pad_to_min(src, patch, patch);
    const PatchGrid g = make_grid(padded.h, padded.w, patch, stride);
    std::vector<Image> outs;
    outs.reserve(g.origins.size());
    for (auto [y, x] : g.origins) {
        Image pimg = crop(padded, y, x, patch, patch);
        const Tensor xt =
            Tensor::from_data({1, 3, patch, patch}, std::move(pimg.pix));
        const Tensor prob = ops::sigmoid(model.forward(xt)[0]);
        Image o = make_image(patch, patch, 1);
        std::copy(prob.value().begin(), prob.value().end(), o.pix.begin());
        outs.push_back(std::move(o));
    }
    Mask m = threshold_half(stitch(outs, g));
    if (m.h != H || m.w != W) m = crop(m, 0, 0, H, W);
    return m;
}

}  // namespace amsdb
