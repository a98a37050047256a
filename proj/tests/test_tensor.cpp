#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "amsdb/adam.hpp"
#include "amsdb/ops.hpp"
#include "testutil.hpp"

using namespace amsdb;
using namespace testutil;
using doctest::Approx;

TEST_CASE("matmul on pinned values") {
    auto a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    auto b = Tensor::from_data({2, 1}, {1, 1});
    auto c = ops::matmul(a, b);
    REQUIRE(c.shape() == Shape{2, 1});
    CHECK(c.value()[0] == Approx(3.0f));
    CHECK(c.value()[1] == Approx(7.0f));

    auto eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    auto ai = ops::matmul(a, eye);
    for (int i = 0; i < 4; ++i) CHECK(ai.value()[i] == a.value()[i]);
}

TEST_CASE("matmul shape mismatch names both operands") {
    auto a = Tensor::zeros({2, 3});
    auto b = Tensor::zeros({4, 2});
    try {
        ops::matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x2]") != std::string::npos);
    }
}

TEST_CASE("conv2d identity kernel reproduces the input") {
    Rng rng(3);
    auto x = rand_tensor({1, 1, 5, 5}, rng, 0.0f, 1.0f, false);
    // 3x3 kernel with a single center 1: same-padding conv must be identity.
    auto w = Tensor::from_data({1, 1, 3, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0});
    auto b = Tensor::zeros({1});
    auto y = ops::conv2d(x, w, b, 1, 1);
    REQUIRE(y.shape() == x.shape());
    for (i64 i = 0; i < x.numel(); ++i)
        CHECK(y.value()[static_cast<std::size_t>(i)] ==
              Approx(x.value()[static_cast<std::size_t>(i)]));
}

TEST_CASE("conv2d zero input produces bias planes") {
    auto x = Tensor::zeros({1, 2, 4, 4});
    Rng rng(4);
    auto w = rand_tensor({3, 2, 3, 3}, rng, -1.0f, 1.0f, false);
    auto b = Tensor::from_data({3}, {0.5f, -1.0f, 2.0f});
    auto y = ops::conv2d(x, w, b, 1, 1);
    REQUIRE(y.shape() == Shape{1, 3, 4, 4});
    for (i64 o = 0; o < 3; ++o)
        for (i64 i = 0; i < 16; ++i)
            CHECK(y.value()[static_cast<std::size_t>(o * 16 + i)] ==
                  Approx(b.value()[static_cast<std::size_t>(o)]));
}

TEST_CASE("conv2d rejects kernels larger than the padded input") {
    auto x = Tensor::zeros({1, 1, 4, 4});
    auto w = Tensor::zeros({1, 1, 7, 7});
    auto b = Tensor::zeros({1});
    CHECK_THROWS_AS(ops::conv2d(x, w, b, 1, 1), ShapeError);
    CHECK_NOTHROW(ops::conv2d(x, w, b, 1, 2));  // 4 + 2*2 >= 7 fits again
}

TEST_CASE("elementwise ops on pinned values") {
    auto a = Tensor::from_data({3}, {1, 2, 3});
    auto b = Tensor::from_data({3}, {4, 5, 6});
    CHECK(ops::add(a, b).value() == std::vector<float>{5, 7, 9});
    CHECK(ops::sub(a, b).value() == std::vector<float>{-3, -3, -3});
    CHECK(ops::mul(a, b).value() == std::vector<float>{4, 10, 18});
    auto d = ops::div(b, a);
    CHECK(d.value()[0] == Approx(4.0f));
    CHECK(d.value()[1] == Approx(2.5f));
    CHECK(d.value()[2] == Approx(2.0f));

    // scalar broadcast from either side
    auto s = Tensor::scalar(2.0f);
    CHECK(ops::mul(a, s).value() == std::vector<float>{2, 4, 6});
    CHECK(ops::sub(s, a).value() == std::vector<float>{1, 0, -1});
    CHECK(ops::add_const(a, 1.0f).value() == std::vector<float>{2, 3, 4});
    CHECK(ops::mul_const(a, -1.0f).value() == std::vector<float>{-1, -2, -3});

    auto z = Tensor::from_data({3}, {-1.0f, 0.0f, 1.0f});
    CHECK(ops::relu(z).value() == std::vector<float>{0, 0, 1});
    CHECK(ops::sigmoid(z).value()[1] == Approx(0.5f));
    CHECK(ops::exp(z).value()[2] == Approx(std::exp(1.0f)));
    CHECK(ops::softplus(z).value()[1] == Approx(std::log(2.0f)));
    CHECK(ops::silu(z).value()[1] == Approx(0.0f));
    CHECK(ops::silu(z).value()[2] == Approx(1.0f / (1.0f + std::exp(-1.0f))));
}

TEST_CASE("elementwise shape mismatch beyond scalar broadcast throws") {
    auto a = Tensor::zeros({3});
    auto b = Tensor::zeros({4});
    CHECK_THROWS_AS(ops::add(a, b), ShapeError);
}

TEST_CASE("layer_norm normalizes a two-point row to [-1, 1]") {
    auto x = Tensor::from_data({1, 2}, {1, 3});
    auto g = Tensor::full({2}, 1.0f);
    auto b = Tensor::zeros({2});
    auto y = ops::layer_norm(x, g, b);
    CHECK(y.value()[0] == Approx(-1.0f).epsilon(1e-4));
    CHECK(y.value()[1] == Approx(1.0f).epsilon(1e-4));
}

TEST_CASE("layer_norm maps constant rows to the bias") {
    auto x = Tensor::from_data({1, 3}, {5, 5, 5});
    auto g = Tensor::full({3}, 1.0f);
    auto b = Tensor::from_data({3}, {0.25f, 0.25f, 0.25f});
    auto y = ops::layer_norm(x, g, b);
    for (int i = 0; i < 3; ++i)
        CHECK(y.value()[i] == Approx(0.25f).epsilon(1e-4));
}

TEST_CASE("reductions on pinned values") {
    auto x = Tensor::from_data({3}, {1, 2, 3});
    CHECK(ops::reduce_sum(x).item() == Approx(6.0f));
    CHECK(ops::reduce_mean(x).item() == Approx(2.0f));

    auto m = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    auto rows = ops::reduce_sum(m, {1});
    REQUIRE(rows.shape() == Shape{2});
    CHECK(rows.value()[0] == Approx(6.0f));
    CHECK(rows.value()[1] == Approx(15.0f));
    auto cols = ops::reduce_mean(m, {0});
    REQUIRE(cols.shape() == Shape{3});
    CHECK(cols.value()[0] == Approx(2.5f));

    CHECK_THROWS_AS(ops::reduce_sum(m, {2}), ShapeError);
    CHECK_THROWS_AS(ops::reduce_sum(m, {0, 0}), ShapeError);
}

TEST_CASE("backward of sum of squares") {
    auto x = Tensor::from_data({3}, {1, 2, 3}, true);
    auto loss = ops::reduce_sum(ops::mul(x, x));
    backward(loss);
    CHECK(x.grad()[0] == Approx(2.0f));
    CHECK(x.grad()[1] == Approx(4.0f));
    CHECK(x.grad()[2] == Approx(6.0f));
}

TEST_CASE("leaves outside the graph keep zero gradients") {
    auto x = Tensor::from_data({2}, {1, 2}, true);
    auto y = Tensor::from_data({2}, {3, 4}, true);
    backward(ops::reduce_sum(ops::mul(x, x)));
    CHECK(y.grad()[0] == 0.0f);
    CHECK(y.grad()[1] == 0.0f);
}

TEST_CASE("backward requires a scalar loss") {
    auto x = Tensor::from_data({3}, {1, 2, 3}, true);
    auto y = ops::mul(x, x);
    CHECK_THROWS_AS(backward(y), ValueError);
}

TEST_CASE("gradients accumulate across backward calls until zero_grad") {
    auto x = Tensor::from_data({1}, {2}, true);
    backward(ops::mul(x, x));
    CHECK(x.grad()[0] == Approx(4.0f));
    backward(ops::mul(x, x));
    CHECK(x.grad()[0] == Approx(8.0f));
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0f);
}

TEST_CASE("retain_graph allows a second sweep over the same graph") {
    auto x = Tensor::from_data({1}, {3}, true);
    auto loss = ops::mul(x, x);
    backward(loss, true);
    backward(loss);
    CHECK(x.grad()[0] == Approx(12.0f));  // 6 + 6
}

TEST_CASE("adam first step moves by roughly lr") {
    auto w = Tensor::from_data({1}, {0.0f}, true);
    Adam opt({w}, {.lr = 0.1f, .beta1 = 0.9f, .beta2 = 0.999f, .eps = 1e-8f});
    w.grad()[0] = 1.0f;
    opt.step();
    // bias correction makes mhat = g and vhat = g^2 on the first step
    CHECK(w.value()[0] == Approx(-0.1f).epsilon(1e-5));
    CHECK(opt.step_count() == 1);
}

TEST_CASE("adam with zero gradient leaves weights unchanged") {
    auto w = Tensor::from_data({1}, {0.75f}, true);
    Adam opt({w});
    opt.zero_grad();
    opt.step();
    CHECK(w.value()[0] == 0.75f);
}

TEST_CASE("adam drives a quadratic objective down") {
    auto w = Tensor::from_data({1}, {1.0f}, true);
    Adam opt({w}, {.lr = 0.1f, .beta1 = 0.9f, .beta2 = 0.999f, .eps = 1e-8f});
    float prev = 1.0f;  // loss = w^2
    for (int i = 0; i < 8; ++i) {
        opt.zero_grad();
        auto loss = ops::mul(w, w);
        backward(loss);
        opt.step();
        const float cur = w.value()[0] * w.value()[0];
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("forward ops are pure and repeatable") {
    Rng rng(9);
    auto x = rand_tensor({2, 8}, rng, -2.0f, 2.0f, false);
    auto g = Tensor::full({8}, 1.0f);
    auto b = Tensor::zeros({8});
    auto y1 = ops::layer_norm(x, g, b);
    auto y2 = ops::layer_norm(x, g, b);
    CHECK(y1.value() == y2.value());  // bitwise

    auto e1 = ops::exp(x);
    auto e2 = ops::exp(x);
    CHECK(e1.value() == e2.value());
}

TEST_CASE("reshape and token round trips preserve data") {
    Rng rng(10);
    auto x = rand_tensor({1, 3, 2, 4}, rng, -1.0f, 1.0f, false);
    auto t = ops::nchw_to_tokens(x);
    REQUIRE(t.shape() == Shape{8, 3});
    auto back = ops::tokens_to_nchw(t, 1, 3, 2, 4);
    CHECK(back.value() == x.value());

    auto r = ops::reshape(x, {3, 8});
    CHECK(r.value() == x.value());
    CHECK_THROWS_AS(ops::reshape(x, {5, 5}), ShapeError);
}

TEST_CASE("concat_channels stacks along the channel axis") {
    auto a = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    auto b = Tensor::from_data({1, 2, 2, 2}, {5, 6, 7, 8, 9, 10, 11, 12});
    auto c = ops::concat_channels(a, b);
    REQUIRE(c.shape() == Shape{1, 3, 2, 2});
    CHECK(c.value()[0] == 1.0f);
    CHECK(c.value()[4] == 5.0f);
    CHECK(c.value()[11] == 12.0f);
}

TEST_CASE("upsample_nearest2x repeats pixels") {
    auto x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    auto y = ops::upsample_nearest2x(x);
    REQUIRE(y.shape() == Shape{1, 1, 4, 4});
    const std::vector<float> want{1, 1, 2, 2, 1, 1, 2, 2,
                                  3, 3, 4, 4, 3, 3, 4, 4};
    CHECK(y.value() == want);
}
