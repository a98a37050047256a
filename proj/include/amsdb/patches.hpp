#pragma once

// Overlapping patch grids and their inverse: origins step by the stride and
// the final origin clamps to dim - size so every pixel is covered; stitching
// averages all covering patches and thresholds at 0.5 for binary output.

#include <utility>
#include <vector>

#include "amsdb/image.hpp"

namespace amsdb {

struct PatchGrid {
    i64 src_h = 0, src_w = 0;
    i64 size = 0, stride = 0;
    std::vector<std::pair<i64, i64>> origins;  // (row, col), row-major order
};

// 0, stride, 2*stride, ... plus a clamped dim-size tail when needed.
std::vector<i64> patch_origins(i64 dim, i64 size, i64 stride);
// ValueError when stride <= 0 or > size; ShapeError when the image is
// smaller than the patch (reflect-pad first).
PatchGrid make_grid(i64 h, i64 w, i64 size, i64 stride);

Image crop(const Image& img, i64 y0, i64 x0, i64 ch, i64 cw);
Mask crop(const Mask& m, i64 y0, i64 x0, i64 ch, i64 cw);
std::vector<Image> extract_patches(const Image& img, const PatchGrid& g);

// Per-pixel mean of every covering patch, accumulated in double.
Image stitch(const std::vector<Image>& patches, const PatchGrid& g);
Mask threshold_half(const Image& img);  // >= 0.5 -> ink

Image reflect_pad(const Image& img, i64 top, i64 bottom, i64 left, i64 right);
Mask reflect_pad(const Mask& m, i64 top, i64 bottom, i64 left, i64 right);
// Reflect-pad on the bottom/right edges until dims reach the minima.
Image pad_to_min(const Image& img, i64 min_h, i64 min_w);
Mask pad_to_min(const Mask& m, i64 min_h, i64 min_w);

Image hflip(const Image& img);
Image vflip(const Image& img);
Image rot90(const Image& img);  // clockwise
Mask hflip(const Mask& m);
Mask vflip(const Mask& m);
Mask rot90(const Mask& m);

struct PatchPair {
    Image img;
    Mask gt;
};

// Crop a size x size window uniformly from the context pair (identity when
// the context is already size x size), then apply the same random flips and
// a uniform multiple-of-90-degree rotation to both halves.
PatchPair augment(const Image& ctx_img, const Mask& ctx_gt, i64 size,
                  Rng& rng);

}  // namespace amsdb
