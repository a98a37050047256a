#pragma once

// Zhang-Suen iterative thinning to a 1-pixel-wide, 8-connected skeleton.
// Idempotent, and the output is always a subset of the input foreground.

#include "amsdb/image.hpp"

namespace amsdb {

Mask skeletonize(const Mask& m);

}  // namespace amsdb
