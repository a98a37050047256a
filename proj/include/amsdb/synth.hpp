#pragma once

// Deterministic synthetic corpus: dark strokes on a shaded, noisy page with
// an exact ink mask. Used for overfit checks and CLI smoke tests.

#include <cstdint>

#include "amsdb/dataset.hpp"

namespace amsdb {

struct SynthPair {
    Image degraded;  // gray, [0,1]
    Mask gt;         // 1 = ink
};

SynthPair synth_pair(i64 size, Rng& rng);

// Writes size x size pairs (synth_<i>.png / synth_<i>_gt.png) plus
// manifest.tsv into dir; year tags cycle through the corpus years.
DatasetIndex write_synth_corpus(const std::string& dir, i64 count = 8,
                                i64 size = 128, std::uint64_t seed = 42);

}  // namespace amsdb
