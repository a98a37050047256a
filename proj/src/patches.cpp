#include "amsdb/patches.hpp"

#include <cstring>

#include "amsdb/kernels_ref.hpp"

namespace amsdb {

std::vector<i64> patch_origins(i64 dim, i64 size, i64 stride) {
    std::vector<i64> out;
    for (i64 o = 0; o + size <= dim; o += stride) out.push_back(o);
    if (out.empty() || out.back() + size < dim) out.push_back(dim - size);
    return out;
}

PatchGrid make_grid(i64 h, i64 w, i64 size, i64 stride) {
    if (size <= 0) throw ValueError("patch size must be positive");
    if (stride <= 0 || stride > size)
        throw ValueError("stride must be in [1, size], got " +
                         std::to_string(stride));
    if (h < size || w < size)
        throw ShapeError("image " + std::to_string(h) + "x" +
                         std::to_string(w) + " smaller than patch size " +
                         std::to_string(size) + "; pad first");
    PatchGrid g;
    g.src_h = h;
    g.src_w = w;
    g.size = size;
    g.stride = stride;
    for (i64 y : patch_origins(h, size, stride))
        for (i64 x : patch_origins(w, size, stride)) g.origins.emplace_back(y, x);
    return g;
}

namespace {

template <class T>
void crop_planes(const std::vector<T>& src, i64 c, i64 h, i64 w, i64 y0,
                 i64 x0, i64 ch, i64 cw, std::vector<T>& dst) {
    dst.resize(static_cast<size_t>(c * ch * cw));
    for (i64 p = 0; p < c; ++p)
        for (i64 y = 0; y < ch; ++y)
            std::memcpy(dst.data() + (p * ch + y) * cw,
                        src.data() + (p * h + y0 + y) * w + x0,
                        static_cast<size_t>(cw) * sizeof(T));
}

void check_crop(i64 h, i64 w, i64 y0, i64 x0, i64 ch, i64 cw) {
    if (ch <= 0 || cw <= 0 || y0 < 0 || x0 < 0 || y0 + ch > h || x0 + cw > w)
        throw ValueError("crop window out of bounds");
}

template <class T>
std::vector<T> hflip_planes(const std::vector<T>& src, i64 c, i64 h, i64 w) {
    std::vector<T> out(src.size());
    for (i64 p = 0; p < c; ++p)
        for (i64 y = 0; y < h; ++y)
            for (i64 x = 0; x < w; ++x)
                out[(p * h + y) * w + x] = src[(p * h + y) * w + (w - 1 - x)];
    return out;
}

template <class T>
std::vector<T> vflip_planes(const std::vector<T>& src, i64 c, i64 h, i64 w) {
    std::vector<T> out(src.size());
    for (i64 p = 0; p < c; ++p)
        for (i64 y = 0; y < h; ++y)
            std::memcpy(out.data() + (p * h + y) * w,
                        src.data() + (p * h + (h - 1 - y)) * w,
                        static_cast<size_t>(w) * sizeof(T));
    return out;
}

// Clockwise: output is w x h, out(y, x) = in(h - 1 - x, y).
template <class T>
std::vector<T> rot90_planes(const std::vector<T>& src, i64 c, i64 h, i64 w) {
    std::vector<T> out(src.size());
    for (i64 p = 0; p < c; ++p)
        for (i64 y = 0; y < w; ++y)
            for (i64 x = 0; x < h; ++x)
                out[(p * w + y) * h + x] = src[(p * h + (h - 1 - x)) * w + y];
    return out;
}

}  // namespace

Image crop(const Image& img, i64 y0, i64 x0, i64 ch, i64 cw) {
    check_crop(img.h, img.w, y0, x0, ch, cw);
    Image out;
    out.w = cw;
    out.h = ch;
    out.c = img.c;
    crop_planes(img.pix, img.c, img.h, img.w, y0, x0, ch, cw, out.pix);
    return out;
}

Mask crop(const Mask& m, i64 y0, i64 x0, i64 ch, i64 cw) {
    check_crop(m.h, m.w, y0, x0, ch, cw);
    Mask out;
    out.w = cw;
    out.h = ch;
    crop_planes(m.ink, 1, m.h, m.w, y0, x0, ch, cw, out.ink);
    return out;
}

std::vector<Image> extract_patches(const Image& img, const PatchGrid& g) {
    if (img.h != g.src_h || img.w != g.src_w)
        throw ShapeError("grid was built for a different image size");
    std::vector<Image> out;
    out.reserve(g.origins.size());
    for (auto [y, x] : g.origins) out.push_back(crop(img, y, x, g.size, g.size));
    return out;
}

Image stitch(const std::vector<Image>& patches, const PatchGrid& g) {
    if (patches.size() != g.origins.size())
        throw ValueError("stitch: " + std::to_string(patches.size()) +
                         " patches for " + std::to_string(g.origins.size()) +
                         " grid origins");
    const i64 c = patches.empty() ? 1 : patches.front().c;
    std::vector<double> acc(static_cast<size_t>(c * g.src_h * g.src_w), 0.0);
    std::vector<i64> cover(static_cast<size_t>(g.src_h * g.src_w), 0);
    for (size_t i = 0; i < patches.size(); ++i) {
        const Image& p = patches[i];
        if (p.h != g.size || p.w != g.size || p.c != c)
            throw ShapeError("stitch: patch " + std::to_string(i) +
                             " does not match the grid patch size");
        const auto [y0, x0] = g.origins[i];
        for (i64 ch = 0; ch < c; ++ch)
            for (i64 y = 0; y < g.size; ++y)
                for (i64 x = 0; x < g.size; ++x)
                    acc[(ch * g.src_h + y0 + y) * g.src_w + x0 + x] +=
                        static_cast<double>(p.at(ch, y, x));
        for (i64 y = 0; y < g.size; ++y)
            for (i64 x = 0; x < g.size; ++x)
                ++cover[(y0 + y) * g.src_w + x0 + x];
    }
    Image out = make_image(g.src_w, g.src_h, c);
    const i64 n = g.src_h * g.src_w;
    for (i64 ch = 0; ch < c; ++ch)
        for (i64 p = 0; p < n; ++p)
            out.pix[ch * n + p] = static_cast<float>(
                acc[ch * n + p] / static_cast<double>(cover[p]));
    return out;
}

Mask threshold_half(const Image& img) {
    if (img.c != 1) throw ValueError("threshold_half expects 1 channel");
    Mask m = make_mask(img.w, img.h);
    for (size_t i = 0; i < img.pix.size(); ++i)
        m.ink[i] = img.pix[i] >= 0.5f ? 1 : 0;
    return m;
}

Image reflect_pad(const Image& img, i64 top, i64 bottom, i64 left, i64 right) {
    if (top < 0 || bottom < 0 || left < 0 || right < 0)
        throw ValueError("reflect_pad: negative padding");
    Image out = make_image(img.w + left + right, img.h + top + bottom, img.c);
    for (i64 ch = 0; ch < img.c; ++ch)
        for (i64 y = 0; y < out.h; ++y) {
            const i64 sy = kern::reflect_index(y - top, img.h);
            for (i64 x = 0; x < out.w; ++x)
                out.at(ch, y, x) =
                    img.at(ch, sy, kern::reflect_index(x - left, img.w));
        }
    return out;
}

Mask reflect_pad(const Mask& m, i64 top, i64 bottom, i64 left, i64 right) {
    if (top < 0 || bottom < 0 || left < 0 || right < 0)
        throw ValueError("reflect_pad: negative padding");
    Mask out = make_mask(m.w + left + right, m.h + top + bottom);
    for (i64 y = 0; y < out.h; ++y) {
        const i64 sy = kern::reflect_index(y - top, m.h);
        for (i64 x = 0; x < out.w; ++x)
            out.at(y, x) = m.at(sy, kern::reflect_index(x - left, m.w));
    }
    return out;
}

Image pad_to_min(const Image& img, i64 min_h, i64 min_w) {
    const i64 pb = std::max<i64>(0, min_h - img.h);
    const i64 pr = std::max<i64>(0, min_w - img.w);
    if (pb == 0 && pr == 0) return img;
    return reflect_pad(img, 0, pb, 0, pr);
}

Mask pad_to_min(const Mask& m, i64 min_h, i64 min_w) {
    const i64 pb = std::max<i64>(0, min_h - m.h);
    const i64 pr = std::max<i64>(0, min_w - m.w);
    if (pb == 0 && pr == 0) return m;
    return reflect_pad(m, 0, pb, 0, pr);
}

Image hflip(const Image& img) {
    Image out = img;
    out.pix = hflip_planes(img.pix, img.c, img.h, img.w);
    return out;
}

Image vflip(const Image& img) {
    Image out = img;
    out.pix = vflip_planes(img.pix, img.c, img.h, img.w);
    return out;
}

Image rot90(const Image& img) {
    Image out;
    out.w = img.h;
    out.h = img.w;
    out.c = img.c;
    out.pix = rot90_planes(img.pix, img.c, img.h, img.w);
    return out;
}

Mask hflip(const Mask& m) {
    Mask out = m;
    out.ink = hflip_planes(m.ink, 1, m.h, m.w);
    return out;
}

Mask vflip(const Mask& m) {
    Mask out = m;
    out.ink = vflip_planes(m.ink, 1, m.h, m.w);
    return out;
}

Mask rot90(const Mask& m) {
    Mask out;
    out.w = m.h;
    out.h = m.w;
    out.ink = rot90_planes(m.ink, 1, m.h, m.w);
    return out;
}

PatchPair augment(const Image& ctx_img, const Mask& ctx_gt, i64 size,
                  Rng& rng) {
    if (ctx_img.h != ctx_gt.h || ctx_img.w != ctx_gt.w)
        throw ValueError("augment: image and ground truth dims differ");
    if (ctx_img.h < size || ctx_img.w < size)
        throw ValueError("augment: context smaller than the patch size");
    const i64 oy = rng.index(ctx_img.h - size + 1);
    const i64 ox = rng.index(ctx_img.w - size + 1);
    PatchPair p{crop(ctx_img, oy, ox, size, size),
                crop(ctx_gt, oy, ox, size, size)};
    if (rng.bernoulli(0.5)) {
        p.img = hflip(p.img);
        p.gt = hflip(p.gt);
    }
    if (rng.bernoulli(0.5)) {
        p.img = vflip(p.img);
        p.gt = vflip(p.gt);
    }
    const i64 quarter_turns = rng.index(4);
    for (i64 i = 0; i < quarter_turns; ++i) {
        p.img = rot90(p.img);
        p.gt = rot90(p.gt);
    }
    return p;
}

}  // namespace amsdb
