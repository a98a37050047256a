#pragma once

// Multiscale Difference-of-Gaussians skip features: a geometric sigma
// schedule, normalized discrete Gaussian kernels, and a per-depth bank of
// learnable scale weights that participate in the autograd graph.

#include <utility>
#include <vector>

#include "amsdb/ops.hpp"

namespace amsdb {

struct GaussianKernel {
    i64 size = 0;
    float sigma = 0.0f;
    std::vector<float> weights;  // size*size grid, sums to 1
};

// Discrete kernel sampled at integer offsets from center, renormalized.
GaussianKernel gaussian_kernel(float sigma, i64 k);

// N pairs (sigma1_i, sigma2_i), i = 1..N:
//   sigma1_i = sigma0 * 2^(i/N),  sigma2_i = sigma1_i * 2^(1/N)
// Consecutive pairs share a boundary: sigma2_i == sigma1_{i+1}.
std::vector<std::pair<float, float>> sigma_schedule(float sigma0, int n);

struct DoGBankConfig {
    int scales = 3;
    float sigma0 = 0.8f;
};

// One bank per encoder depth. The N weight leaves are shared by every
// application of the bank (graph identity, not copies).
class DoGBank {
  public:
    explicit DoGBank(DoGBankConfig cfg);

    int scales() const { return cfg_.scales; }
    float sigma0() const { return cfg_.sigma0; }
    const std::vector<std::pair<float, float>>& pairs() const { return pairs_; }
    const std::vector<Tensor>& weights() const { return w_; }
    std::vector<Tensor>& weights() { return w_; }

  private:
    DoGBankConfig cfg_;
    std::vector<std::pair<float, float>> pairs_;
    std::vector<Tensor> w_;
};

// Depthwise blur with reflect padding; shape-preserving, differentiable in x.
Tensor gaussian_blur(const Tensor& x, const GaussianKernel& kernel);

// G(x; sigma1) - G(x; sigma2), both with k x k kernels.
Tensor dog(const Tensor& x, float sigma1, float sigma2, i64 k);

// sum_i w_i * dog(x, sigma1_i, sigma2_i); kernel size per pair is
// 2*ceil(3*sigma2_i)+1 capped at the largest odd value <= min(H, W).
Tensor f_dog(const Tensor& x, const DoGBank& bank);

}  // namespace amsdb
