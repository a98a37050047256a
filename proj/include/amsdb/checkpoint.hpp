#pragma once

// Versioned checkpoint container (.amsdb): magic + version, a JSON config
// blob (model config, step, RNG seed), a name/shape/offset table with a
// CRC-32 per array, then raw little-endian float32 payloads. Optimizer
// moment arrays ride along in the same table, tagged by kind.

#include <cstdint>
#include <string>
#include <vector>

#include "amsdb/adam.hpp"
#include "amsdb/model.hpp"

namespace amsdb {

struct CheckpointArray {
    std::uint8_t kind = 0;  // 0 = parameter, 1 = adam m, 2 = adam v
    std::string name;
    Shape shape;
    std::vector<float> data;
};

struct Checkpoint {
    ModelConfig config;
    i64 step = 0;           // completed optimizer steps
    std::uint64_t seed = 0;
    bool has_adam = false;
    i64 adam_step = 0;
    std::vector<CheckpointArray> arrays;
};

Checkpoint checkpoint_from_model(const Model& model, i64 step,
                                 std::uint64_t seed,
                                 const Adam* adam = nullptr);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
// DataError on bad magic, version mismatch, truncation, or CRC mismatch.
Checkpoint load_checkpoint(const std::string& path);

// Strict by-name restore: missing or unknown parameter names and shape
// mismatches raise DataError naming the offender.
void apply_to_model(const Checkpoint& ck, Model& model);
// Restores optimizer moments + step counter; requires has_adam.
void apply_to_adam(const Checkpoint& ck, Adam& adam, const Model& model);

}  // namespace amsdb
