#pragma once

// Planar float images in [0,1] plus binary ink masks. Masks use 1 = ink
// (foreground) internally; on disk ink is black (0) and background white.

#include <cstdint>
#include <string>
#include <vector>

#include "amsdb/common.hpp"

namespace amsdb {

struct Image {
    i64 w = 0, h = 0, c = 1;  // c: 1 = gray, 3 = rgb
    std::vector<float> pix;   // planar c*h*w

    float& at(i64 ch, i64 y, i64 x) { return pix[(ch * h + y) * w + x]; }
    float at(i64 ch, i64 y, i64 x) const { return pix[(ch * h + y) * w + x]; }
};

struct Mask {
    i64 w = 0, h = 0;
    std::vector<std::uint8_t> ink;  // h*w of {0,1}; 1 = ink

    std::uint8_t& at(i64 y, i64 x) { return ink[y * w + x]; }
    std::uint8_t at(i64 y, i64 x) const { return ink[y * w + x]; }
};

Image make_image(i64 w, i64 h, i64 c, float fill = 0.0f);
Mask make_mask(i64 w, i64 h, std::uint8_t fill = 0);

// Format detected from content: PNG signature, or P5/P6 magic. 8-bit only.
Image read_image(const std::string& path);
// Format chosen from extension: .png, .pgm (c=1), .ppm (c=3).
void write_image(const std::string& path, const Image& img);

Image to_gray(const Image& img);  // BT.601 luma for rgb, copy for gray
Image to_rgb(const Image& img);   // replicates gray to three channels

// Luminance < 0.5 -> ink. Used when reading ground-truth scans.
Mask mask_from_image(const Image& img);
// Gray image with ink black (0) and background white (1).
Image mask_to_image(const Mask& m);

}  // namespace amsdb
