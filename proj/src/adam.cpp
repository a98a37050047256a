#include "amsdb/adam.hpp"

#include <cmath>

#include "amsdb/kernels.hpp"

namespace amsdb {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        if (!p.defined() || !p.requires_grad())
            throw ValueError("adam: every parameter must be a defined "
                             "requires_grad tensor");
        m_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
        v_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
    }
}

void Adam::step() {
    ++t_;
    const double b1t = std::pow(static_cast<double>(cfg_.beta1), t_);
    const double b2t = std::pow(static_cast<double>(cfg_.beta2), t_);
    const float bc1 = static_cast<float>(1.0 / (1.0 - b1t));
    const float bc2 = static_cast<float>(1.0 / (1.0 - b2t));
    const auto& K = kern::active();
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        if (!p.has_grad())
            throw ValueError("adam step: parameter " + std::to_string(i) +
                             " has no accumulated gradient");
        K.adam_update(p.numel(), p.data(), p.grad().data(), m_[i].data(),
                      v_[i].data(), cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.eps,
                      bc1, bc2);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

void Adam::restore(i64 step_count, std::vector<std::vector<float>> m,
                   std::vector<std::vector<float>> v) {
    if (m.size() != params_.size() || v.size() != params_.size())
        throw ShapeError("adam restore: state count mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (static_cast<i64>(m[i].size()) != params_[i].numel() ||
            static_cast<i64>(v[i].size()) != params_[i].numel())
            throw ShapeError("adam restore: state size mismatch at parameter " +
                             std::to_string(i));
    t_ = step_count;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace amsdb
