#pragma once

// Adam with bias correction over a fixed parameter list. Moment buffers are
// owned here and can be exported/restored for checkpointing.

#include <vector>

#include "amsdb/tensor.hpp"

namespace amsdb {

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

class Adam {
  public:
    explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {});

    void step();       // applies one update from the accumulated grads
    void zero_grad();  // clears every parameter gradient

    i64 step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    const std::vector<Tensor>& params() const { return params_; }
    const std::vector<std::vector<float>>& m_state() const { return m_; }
    const std::vector<std::vector<float>>& v_state() const { return v_; }
    void restore(i64 step_count, std::vector<std::vector<float>> m,
                 std::vector<std::vector<float>> v);

  private:
    std::vector<Tensor> params_;
    AdamConfig cfg_;
    i64 t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

}  // namespace amsdb
