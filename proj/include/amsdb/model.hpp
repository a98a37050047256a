#pragma once

// Staged selective-scan encoder, upsampling decoder with residual conv
// blocks, a segmentation head per decoder scale, and three skip modes
// (plain, DoG-filtered, DoG residual). Skips are counted per stage; the
// deepest stage feeds the decoder through its own transform.

#include <string>
#include <utility>
#include <vector>

#include "amsdb/dog.hpp"
#include "amsdb/ssm.hpp"

namespace amsdb {

enum class SkipMode { Plain, DoG, DoGResidual };

const char* skip_mode_name(SkipMode mode);
SkipMode skip_mode_from_name(const std::string& name);  // ConfigError

struct ModelConfig {
    i64 in_channels = 3;
    std::vector<i64> dims{16, 32};    // channels per encoder stage
    std::vector<i64> depths{1, 1};    // scan blocks per stage
    i64 state_dim = 8;                // S per scan direction
    i64 expand = 2;                   // block inner width = expand * dim
    i64 patch_embed = 4;              // stage-0 spatial reduction
    SkipMode skip_mode = SkipMode::DoGResidual;
    int dog_scales = 3;
    float dog_sigma0 = 0.8f;

    i64 stages() const { return static_cast<i64>(dims.size()); }
};

struct ConvParams {
    Tensor w, b;
};

struct StageParams {
    ConvParams embed;      // 4x4/s4 at stage 0, 2x2/s2 afterwards
    Tensor ln_g, ln_b;     // stage 0 only; undefined elsewhere
    std::vector<VssBlockParams> blocks;
};

struct UpBlockParams {
    ConvParams c1, c2;     // 3x3 conv + SiLU pair
    ConvParams proj;       // 1x1 residual channel alignment
    ConvParams head;       // 1x1 -> 1-channel logits
};

struct FinalExpandParams {
    ConvParams c0, c1, c2;  // 3x3 conv + SiLU around two 2x upsamples
    ConvParams head;
};

struct LossTerms {
    Tensor total;             // scalar; sum of weighted per-scale terms
    std::vector<float> bce;   // per scale, finest first, unweighted
    std::vector<float> dice;
};

// Plain -> feature; DoG -> filter bank output; DoGResidual -> feature +
// bank output. bank may be null only in Plain mode (ConfigError otherwise).
Tensor skip_transform(const Tensor& feature, SkipMode mode,
                      const DoGBank* bank);

// 2x nearest upsample, concat with the transformed skip, two 3x3 conv+SiLU
// with a 1x1-projected residual. Returns {feature, logits}; upsampled input
// and skip must agree spatially (ShapeError).
std::pair<Tensor, Tensor> upsample_block(const Tensor& decoder_in,
                                         const Tensor& skip,
                                         const UpBlockParams& p);

// Majority vote over f x f cells of an [n,1,h,w] mask (ties -> foreground).
std::vector<float> downsample_majority(const std::vector<float>& t, i64 n,
                                       i64 h, i64 w, i64 f);

class Model {
  public:
    Model(ModelConfig cfg, Rng& rng);

    const ModelConfig& config() const { return cfg_; }
    // Input H and W must be multiples of this (patch_embed * 2^(stages-1)).
    i64 downsample_factor() const;
    i64 decoder_scales() const { return cfg_.stages(); }

    // x [N,in_channels,H,W] -> one feature map per stage, shallowest first.
    std::vector<Tensor> encoder_forward(const Tensor& x) const;
    Tensor skip_transform(const Tensor& feature, i64 stage) const;
    // Logit maps, finest (input-resolution) first; one per decoder scale.
    std::vector<Tensor> forward(const Tensor& x) const;

    // Per-scale BCE + Dice against area-majority-downsampled targets.
    // target [N,1,H,W] in {0,1} at the finest head's resolution.
    // scale_weights empty -> 1, 0.5, 0.25, ... finest first.
    LossTerms loss(const std::vector<Tensor>& heads, const Tensor& target,
                   std::vector<float> scale_weights = {}) const;

    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    std::vector<Tensor> parameters() const;
    i64 param_count() const;

  private:
    ModelConfig cfg_;
    std::vector<StageParams> stages_;
    std::vector<DoGBank> banks_;      // one per stage; empty in Plain mode
    std::vector<UpBlockParams> ups_;  // deepest first; stages()-1 entries
    FinalExpandParams final_;
};

}  // namespace amsdb
