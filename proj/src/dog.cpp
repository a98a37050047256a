#include "amsdb/dog.hpp"

#include <cmath>

namespace amsdb {

GaussianKernel gaussian_kernel(float sigma, i64 k) {
    if (sigma <= 0.0f)
        throw ValueError("gaussian kernel sigma must be positive, got " +
                         std::to_string(sigma));
    if (k < 1 || k % 2 == 0)
        throw ValueError("gaussian kernel size must be odd and positive, got " +
                         std::to_string(k));
    GaussianKernel gk;
    gk.size = k;
    gk.sigma = sigma;
    gk.weights.resize(static_cast<std::size_t>(k * k));
    const i64 c = k / 2;
    const double inv2s2 = 1.0 / (2.0 * static_cast<double>(sigma) * sigma);
    double sum = 0.0;
    for (i64 y = 0; y < k; ++y)
        for (i64 x = 0; x < k; ++x) {
            const double dy = static_cast<double>(y - c);
            const double dx = static_cast<double>(x - c);
            const double w = std::exp(-(dx * dx + dy * dy) * inv2s2);
            gk.weights[static_cast<std::size_t>(y * k + x)] =
                static_cast<float>(w);
            sum += w;
        }
    const float inv = static_cast<float>(1.0 / sum);
    for (float& w : gk.weights) w *= inv;
    return gk;
}

std::vector<std::pair<float, float>> sigma_schedule(float sigma0, int n) {
    if (sigma0 <= 0.0f)
        throw ValueError("sigma schedule requires sigma0 > 0, got " +
                         std::to_string(sigma0));
    if (n < 1)
        throw ValueError("sigma schedule requires at least one scale, got " +
                         std::to_string(n));
    std::vector<std::pair<float, float>> pairs;
    pairs.reserve(static_cast<std::size_t>(n));
    const double step = std::pow(2.0, 1.0 / n);
    for (int i = 1; i <= n; ++i) {
        const double s1 = sigma0 * std::pow(2.0, static_cast<double>(i) / n);
        pairs.emplace_back(static_cast<float>(s1),
                           static_cast<float>(s1 * step));
    }
    return pairs;
}

DoGBank::DoGBank(DoGBankConfig cfg)
    : cfg_(cfg), pairs_(sigma_schedule(cfg.sigma0, cfg.scales)) {
    w_.reserve(static_cast<std::size_t>(cfg_.scales));
    for (int i = 0; i < cfg_.scales; ++i)
        w_.push_back(Tensor::full({1}, 1.0f / static_cast<float>(cfg_.scales),
                                  /*requires_grad=*/true));
}

Tensor gaussian_blur(const Tensor& x, const GaussianKernel& kernel) {
    if (x.shape().size() != 4)
        throw ShapeError("gaussian_blur input must be [N,C,H,W], got " +
                         shape_str(x.shape()));
    const i64 c = x.shape()[1];
    const i64 k = kernel.size;
    std::vector<float> kdata(static_cast<std::size_t>(c * k * k));
    for (i64 ch = 0; ch < c; ++ch)
        std::copy(kernel.weights.begin(), kernel.weights.end(),
                  kdata.begin() + ch * k * k);
    Tensor kt = Tensor::from_data({c, k, k}, std::move(kdata));
    return ops::dwconv2d(x, kt, kern::PadMode::Reflect);
}

Tensor dog(const Tensor& x, float sigma1, float sigma2, i64 k) {
    return ops::sub(gaussian_blur(x, gaussian_kernel(sigma1, k)),
                    gaussian_blur(x, gaussian_kernel(sigma2, k)));
}

Tensor f_dog(const Tensor& x, const DoGBank& bank) {
    if (x.shape().size() != 4)
        throw ShapeError("f_dog input must be [N,C,H,W], got " +
                         shape_str(x.shape()));
    const i64 h = x.shape()[2], w = x.shape()[3];
    i64 kmax = std::min(h, w);
    if (kmax % 2 == 0) --kmax;
    Tensor acc;
    for (int i = 0; i < bank.scales(); ++i) {
        const auto [s1, s2] = bank.pairs()[static_cast<std::size_t>(i)];
        i64 k = 2 * static_cast<i64>(std::ceil(3.0 * s2)) + 1;
        if (k > kmax) k = kmax;
        if (k < 1) k = 1;
        Tensor term = ops::mul(dog(x, s1, s2, k),
                               bank.weights()[static_cast<std::size_t>(i)]);
        acc = acc.defined() ? ops::add(acc, term) : term;
    }
    return acc;
}

}  // namespace amsdb
