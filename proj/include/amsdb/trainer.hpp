#pragma once

// Single-threaded, fully seeded training loop over patch inventories, plus
// patch-based whole-image inference. Patches come from a fixed grid; each
// draw re-crops from a slightly larger context and applies flip/rotation
// augmentation when enabled.

#include <cstdint>

#include "amsdb/adam.hpp"
#include "amsdb/dataset.hpp"
#include "amsdb/model.hpp"
#include "amsdb/patches.hpp"

namespace amsdb {

struct TrainConfig {
    i64 batch = 8;
    i64 steps = 200;
    float lr = 1e-3f;
    std::uint64_t seed = 1;
    i64 patch = 128;
    i64 stride = 64;
    float val_fraction = 0.1f;
    i64 val_every = 50;   // 0 disables periodic validation
    i64 log_every = 10;
    bool augment = true;
    i64 jitter = 16;      // context margin for the random re-crop
};

struct TrainLogRow {
    i64 step = 0;
    float loss = 0.0f;
    bool has_val = false;
    double val_fm = 0.0;  // percent, micro-averaged over val patches
};

struct TrainStats {
    std::vector<TrainLogRow> rows;
    i64 train_patches = 0, val_patches = 0;
};

// Pads every pair up to the patch size so grid extraction is always valid.
std::vector<LoadedPair> load_all(const DatasetIndex& index, i64 patch);

// Mutates the model through the optimizer. NumericError on non-finite loss.
TrainStats train_loop(Model& model, Adam& adam,
                      const std::vector<LoadedPair>& data,
                      const TrainConfig& cfg, Rng& rng);

// Reflect-pad to >= patch size, run every grid patch through the model,
// stitch the sigmoid of the finest logits, threshold at 0.5, crop back.
Mask infer_image(const Model& model, const Image& rgb, i64 patch, i64 stride);

}  // namespace amsdb
