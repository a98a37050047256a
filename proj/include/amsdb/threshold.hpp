#pragma once

// Classical thresholding baselines over gray images in [0,1]. Local
// statistics come from integral images over a reflect-padded frame; dark
// pixels (below threshold) become ink.

#include <utility>

#include "amsdb/image.hpp"

namespace amsdb {

// Maximizes between-class variance over 256 histogram bins; ties pick the
// lower threshold. Pixels with bin < threshold become ink; a constant image
// thresholds at its own bin, leaving everything background.
std::pair<int, Mask> otsu(const Image& gray);

// t = m * (1 + k*(s/R - 1)) over a window x window neighborhood.
Mask sauvola(const Image& gray, i64 window = 25, double k = 0.2,
             double R = 0.5);

// Ink where value < local mean * (1 - t_percent/100).
Mask bradley(const Image& gray, i64 window = 25, double t_percent = 15.0);

}  // namespace amsdb
