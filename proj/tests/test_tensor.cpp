#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "swt/tensor.hpp"

using swt::Tensor;
using swt::Tensor64;

namespace {

Tensor64 rand64(swt::Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
    swt::Rng rng(seed);
    return swt::rand_uniform<double>(std::move(shape), rng, lo, hi);
}

}  // namespace

TEST_CASE("matmul identity") {
    auto eye = Tensor::from_vector({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    auto x = Tensor::from_vector({3, 2}, {1, 2, 3, 4, 5, 6});
    auto y = swt::matmul(eye, x);
    for (int i = 0; i < 6; ++i) CHECK(y.values()[i] == doctest::Approx(x.values()[i]));
}

TEST_CASE("matmul matches triple-loop oracle") {
    swt::Rng rng(7);
    auto a = swt::rand_uniform<double>({4, 5}, rng, -2, 2);
    auto b = swt::rand_uniform<double>({5, 3}, rng, -2, 2);
    auto c = swt::matmul(a, b);
    auto ref = oracle::matmul(a.values(), b.values(), 4, 5, 3);
    for (int i = 0; i < 12; ++i) CHECK(std::abs(c.values()[i] - ref[i]) < 1e-6);
}

TEST_CASE("matmul zeros annihilate") {
    auto z = Tensor::zeros({2, 4});
    auto x = Tensor::from_vector({4, 3}, std::vector<float>(12, 1.5f));
    auto y = swt::matmul(z, x);
    for (float v : y.values()) CHECK(v == 0.0f);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    auto a = Tensor::zeros({2, 3});
    auto b = Tensor::zeros({4, 2});
    CHECK_THROWS_WITH_AS(swt::matmul(a, b), doctest::Contains("[2x3]"), swt::DimensionError);
}

TEST_CASE("conv2d identity kernel passes input through") {
    auto x = Tensor::from_vector({1, 2, 3}, {1, 2, 3, 4, 5, 6});
    auto w = Tensor::from_vector({1, 1, 1, 1}, {1});
    auto y = swt::conv2d(x, w, 1);
    CHECK(y.shape() == swt::Shape{1, 2, 3});
    for (int i = 0; i < 6; ++i) CHECK(y.values()[i] == doctest::Approx(x.values()[i]));
}

TEST_CASE("conv2d hand cross-correlation") {
    auto x = Tensor::from_vector({1, 2, 2}, {1, 2, 3, 4});
    auto w = Tensor::from_vector({1, 1, 2, 2}, {1, 0, 0, 1});
    auto y = swt::conv2d(x, w, 2);
    CHECK(y.shape() == swt::Shape{1, 1, 1});
    CHECK(y.item() == doctest::Approx(5.0f));
}

TEST_CASE("conv2d zero input gives zero output") {
    swt::Rng rng(3);
    auto w = swt::rand_normal<float>({4, 2, 3, 3}, rng, 0.1);
    auto b = Tensor::zeros({4});
    auto y = swt::conv2d(Tensor::zeros({2, 9, 9}), w, b, 3);
    for (float v : y.values()) CHECK(v == 0.0f);
}

TEST_CASE("conv2d rejects non-dividing stride") {
    auto x = Tensor::zeros({1, 5, 5});
    auto w = Tensor::zeros({1, 1, 2, 2});
    CHECK_THROWS_AS(swt::conv2d(x, w, 2), swt::ConfigError);
}

TEST_CASE("conv2d grouped equals per-group dense conv") {
    swt::Rng rng(11);
    auto x = swt::rand_uniform<double>({4, 6, 6}, rng, -1, 1);
    auto w = swt::rand_uniform<double>({6, 2, 2, 2}, rng, -1, 1);
    auto b = swt::rand_uniform<double>({6}, rng, -1, 1);
    auto y = swt::conv2d(x, w, b, 2, 2);
    CHECK(y.shape() == swt::Shape{6, 3, 3});
    // group g consumes input channels [2g, 2g+2) and fills output channels [3g, 3g+3)
    for (int g = 0; g < 2; ++g) {
        std::vector<double> xg(x.values().begin() + g * 2 * 36, x.values().begin() + (g + 1) * 2 * 36);
        std::vector<double> wg(w.values().begin() + g * 3 * 8, w.values().begin() + (g + 1) * 3 * 8);
        auto yg = swt::conv2d(Tensor64::from_vector({2, 6, 6}, xg), Tensor64::from_vector({3, 2, 2, 2}, wg),
                              Tensor64::from_vector({3}, {b.values()[g * 3], b.values()[g * 3 + 1],
                                                          b.values()[g * 3 + 2]}),
                              2);
        for (int i = 0; i < 27; ++i)
            CHECK(y.values()[g * 27 + i] == doctest::Approx(yg.values()[i]).epsilon(1e-9));
    }
}

TEST_CASE("bilinear_resize preserves constants and identity size") {
    auto x = Tensor::full({2, 3, 3}, 0.7f);
    auto up = swt::bilinear_resize(x, 7, 5);
    for (float v : up.values()) CHECK(v == doctest::Approx(0.7f));
    auto same = swt::bilinear_resize(x, 3, 3);
    for (int i = 0; i < same.size(); ++i) CHECK(same.values()[i] == doctest::Approx(x.values()[i]));
}

TEST_CASE("bilinear_resize matches scalar oracle") {
    auto x = Tensor64::from_vector({1, 2, 2}, {0, 1, 2, 3});
    auto y = swt::bilinear_resize(x, 4, 4);
    auto ref = oracle::bilinear(x.values(), 2, 2, 4, 4);
    for (int i = 0; i < 16; ++i) CHECK(std::abs(y.values()[i] - ref[i]) < 1e-6);

    swt::Rng rng(5);
    auto r = swt::rand_uniform<double>({3, 5, 4}, rng, -2, 2);
    auto ry = swt::bilinear_resize(r, 9, 11);
    for (int c = 0; c < 3; ++c) {
        std::vector<double> plane(r.values().begin() + c * 20, r.values().begin() + (c + 1) * 20);
        auto rref = oracle::bilinear(plane, 5, 4, 9, 11);
        for (int i = 0; i < 99; ++i) CHECK(std::abs(ry.values()[c * 99 + i] - rref[i]) < 1e-6);
    }
}

TEST_CASE("softmax analytic values") {
    auto u = swt::softmax(Tensor::zeros({4}), 0);
    for (float v : u.values()) CHECK(v == doctest::Approx(0.25f));

    auto x = Tensor::from_vector({2}, {0.0f, std::log(2.0f)});
    auto y = swt::softmax(x, 0);
    CHECK(y.values()[0] == doctest::Approx(1.0f / 3.0f));
    CHECK(y.values()[1] == doctest::Approx(2.0f / 3.0f));
}

TEST_CASE("softmax shift invariance and row sums") {
    swt::Rng rng(9);
    auto x = swt::rand_uniform<double>({5, 7}, rng, -3, 3);
    auto y = swt::softmax(x, 1);
    auto shifted = swt::softmax(swt::add_scalar(x, 11.25), 1);
    for (int i = 0; i < x.size(); ++i)
        CHECK(y.values()[i] == doctest::Approx(shifted.values()[i]).epsilon(1e-9));
    for (int i = 0; i < 5; ++i) {
        double s = 0;
        for (int j = 0; j < 7; ++j) s += y.values()[i * 7 + j];
        CHECK(std::abs(s - 1.0) < 1e-6);
    }
}

TEST_CASE("grad of sum is exactly ones") {
    auto rep = swt::grad_check("sum", [](const Tensor64& t) { return swt::sum_all(t); },
                               rand64({3, 4}, 21));
    CHECK(rep.passed);
    CHECK(rep.max_rel_error == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("gradient checks for core ops on random shapes") {
    // every differentiable op, three shapes each, f64, tol 1e-4
    const swt::Shape shapes[3] = {{2, 3}, {4, 4}, {3, 5}};
    for (int si = 0; si < 3; ++si) {
        const auto& sh = shapes[si];
        const uint64_t seed = 100 + si;
        auto x = rand64(sh, seed);

        auto check = [&](const char* name, auto fn) {
            auto rep = swt::grad_check(name, fn, x.detach());
            INFO(name, " shape ", si, " rel err ", rep.max_rel_error);
            CHECK(rep.passed);
        };

        auto other = rand64(sh, seed + 50);
        check("add", [&](const Tensor64& t) { return swt::sum_all(swt::mul(swt::add(t, other), other)); });
        check("sub", [&](const Tensor64& t) { return swt::sum_all(swt::mul(swt::sub(t, other), other)); });
        check("mul", [&](const Tensor64& t) { return swt::sum_all(swt::mul(t, other)); });
        check("div", [&](const Tensor64& t) {
            return swt::sum_all(swt::div(t, swt::add_scalar(swt::mul(other, other), 0.5)));
        });
        check("div_denominator", [&](const Tensor64& t) {
            return swt::sum_all(swt::div(other, swt::add_scalar(swt::mul(t, t), 0.5)));
        });
        check("relu", [&](const Tensor64& t) { return swt::sum_all(swt::mul(swt::relu(t), other)); });
        check("gelu", [&](const Tensor64& t) { return swt::sum_all(swt::mul(swt::gelu(t), other)); });
        check("sigmoid", [&](const Tensor64& t) { return swt::sum_all(swt::mul(swt::sigmoid(t), other)); });
        check("abs", [&](const Tensor64& t) { return swt::sum_all(swt::mul(swt::abs(t), other)); });
        check("log", [&](const Tensor64& t) {
            return swt::sum_all(swt::log(swt::add_scalar(swt::mul(t, t), 1.0)));
        });
        check("sqrt", [&](const Tensor64& t) {
            return swt::sum_all(swt::sqrt(swt::add_scalar(swt::mul(t, t), 0.5)));
        });
        check("clamp", [&](const Tensor64& t) {
            return swt::sum_all(swt::mul(swt::clamp(t, -0.45, 0.45), other));
        });
        check("softmax", [&](const Tensor64& t) {
            return swt::sum_all(swt::mul(swt::softmax(t, 1), other));
        });
        check("softmax_axis0", [&](const Tensor64& t) {
            return swt::sum_all(swt::mul(swt::softmax(t, 0), other));
        });
        check("mean_axis", [&](const Tensor64& t) {
            return swt::sum_all(swt::mul(swt::mean_axis(t, 1), swt::mean_axis(other, 1)));
        });
        check("max_axis", [&](const Tensor64& t) {
            return swt::sum_all(swt::mul(swt::max_axis(t, 0), swt::max_axis(other, 0)));
        });
        check("transpose", [&](const Tensor64& t) {
            return swt::sum_all(swt::mul(swt::transpose(t), swt::transpose(other)));
        });
        check("reshape_concat", [&](const Tensor64& t) {
            auto c = swt::concat<double>({t, other}, 0);
            return swt::mean_all(swt::mul(c, c));
        });
        check("mean_all", [&](const Tensor64& t) { return swt::mean_all(swt::mul(t, t)); });
    }
}

TEST_CASE("gradient checks for matmul, linear algebra helpers") {
    for (uint64_t seed = 1; seed <= 3; ++seed) {
        auto a = rand64({3, 4}, seed);
        auto b = rand64({4, 2}, seed + 10);
        auto v = rand64({2}, seed + 20);
        auto s = rand64({3}, seed + 30, 0.5, 1.5);

        auto rep = swt::grad_check("matmul_lhs", [&](const Tensor64& t) {
            return swt::sum_all(swt::mul(swt::matmul(t, b), swt::matmul(t, b)));
        }, a.detach());
        CHECK(rep.passed);
        rep = swt::grad_check("matmul_rhs", [&](const Tensor64& t) {
            return swt::sum_all(swt::mul(swt::matmul(a, t), swt::matmul(a, t)));
        }, b.detach());
        CHECK(rep.passed);
        rep = swt::grad_check("add_row_vector", [&](const Tensor64& t) {
            auto y = swt::add_row_vector(swt::matmul(a, b), t);
            return swt::sum_all(swt::mul(y, y));
        }, v.detach());
        CHECK(rep.passed);
        rep = swt::grad_check("mul_rows", [&](const Tensor64& t) {
            auto y = swt::mul_rows(swt::matmul(a, b), t);
            return swt::sum_all(swt::mul(y, y));
        }, s.detach());
        CHECK(rep.passed);
        rep = swt::grad_check("div_rows", [&](const Tensor64& t) {
            auto y = swt::div_rows(swt::matmul(a, b), t);
            return swt::sum_all(swt::mul(y, y));
        }, s.detach());
        CHECK(rep.passed);
        rep = swt::grad_check("div_rows_numerator", [&](const Tensor64& t) {
            auto y = swt::div_rows(t, s);
            return swt::sum_all(swt::mul(y, y));
        }, a.detach());
        CHECK(rep.passed);
        rep = swt::grad_check("row_l2_normalize", [&](const Tensor64& t) {
            auto y = swt::row_l2_normalize(t);
            return swt::sum_all(swt::mul(y, swt::add_scalar(y, 0.3)));
        }, a.detach());
        CHECK(rep.passed);
        rep = swt::grad_check("gather", [&](const Tensor64& t) {
            auto y = swt::gather(t, {0, 2, 2, 5, 7, 1}, {2, 3});
            return swt::sum_all(swt::mul(y, y));
        }, rand64({8}, seed + 40));
        CHECK(rep.passed);
    }
}

TEST_CASE("gradient checks for composite graphs (layer norm, conv, bilinear)") {
    for (uint64_t seed = 31; seed <= 33; ++seed) {
        auto x = rand64({4, 6}, seed);
        auto gamma = rand64({6}, seed + 1, 0.5, 1.5);
        auto beta = rand64({6}, seed + 2);
        auto rep = swt::grad_check("layer_norm_x", [&](const Tensor64& t) {
            auto y = swt::layer_norm(t, gamma, beta);
            return swt::sum_all(swt::mul(y, y));
        }, x.detach());
        CHECK(rep.passed);
        rep = swt::grad_check("layer_norm_gamma", [&](const Tensor64& t) {
            auto y = swt::layer_norm(x, t, beta);
            return swt::sum_all(swt::mul(y, y));
        }, gamma.detach());
        CHECK(rep.passed);
        rep = swt::grad_check("layer_norm_beta", [&](const Tensor64& t) {
            auto y = swt::layer_norm(x, gamma, t);
            return swt::sum_all(swt::mul(y, y));
        }, beta.detach());
        CHECK(rep.passed);

        auto img = rand64({2, 6, 6}, seed + 3);
        auto w = rand64({3, 2, 2, 2}, seed + 4);
        auto bias = rand64({3}, seed + 5);
        rep = swt::grad_check("conv2d_x", [&](const Tensor64& t) {
            auto y = swt::conv2d(t, w, bias, 2);
            return swt::sum_all(swt::mul(y, y));
        }, img.detach());
        CHECK(rep.passed);
        rep = swt::grad_check("conv2d_w", [&](const Tensor64& t) {
            auto y = swt::conv2d(img, t, bias, 2);
            return swt::sum_all(swt::mul(y, y));
        }, w.detach());
        CHECK(rep.passed);
        rep = swt::grad_check("conv2d_bias", [&](const Tensor64& t) {
            auto y = swt::conv2d(img, w, t, 2);
            return swt::sum_all(swt::mul(y, y));
        }, bias.detach());
        CHECK(rep.passed);
        rep = swt::grad_check("conv2d_grouped", [&](const Tensor64& t) {
            auto y = swt::conv2d(t, rand64({4, 1, 2, 2}, seed + 6), Tensor64(), 2, 2);
            return swt::sum_all(swt::mul(y, y));
        }, img.detach());
        CHECK(rep.passed);

        rep = swt::grad_check("bilinear_resize", [&](const Tensor64& t) {
            auto y = swt::bilinear_resize(t, 5, 7);
            return swt::sum_all(swt::mul(y, y));
        }, rand64({2, 3, 4}, seed + 7));
        CHECK(rep.passed);
    }
}

TEST_CASE("gradients accumulate across fan-out") {
    auto x = Tensor64::from_vector({2}, {1.0, 2.0});
    x.set_requires_grad(true);
    auto y = swt::add(x, x);       // dy/dx = 2
    auto z = swt::mul(y, x);       // z = 2x^2, dz/dx = 4x
    swt::sum_all(z).backward();
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    CHECK(x.grad()[1] == doctest::Approx(8.0));
}

TEST_CASE("no-grad guard suppresses graph recording") {
    auto x = Tensor64::from_vector({2}, {1.0, 2.0});
    x.set_requires_grad(true);
    swt::autograd::NoGradGuard ng;
    auto y = swt::mul(x, x);
    CHECK_FALSE(y.requires_grad());
}

TEST_CASE("forward evaluation is deterministic") {
    auto run = [] {
        swt::Rng rng(123);
        auto a = swt::rand_trunc_normal<float>({8, 8}, rng, 0.02);
        auto b = swt::rand_trunc_normal<float>({8, 8}, rng, 0.02);
        return swt::matmul(swt::softmax(a, 1), swt::gelu(b)).values();
    };
    auto v1 = run();
    auto v2 = run();
    CHECK(v1 == v2);  // bit-identical
}
