#include <cmath>
#include <random>

#include "doctest.h"
#include "ooc/error.hpp"
#include "ooc/ops.hpp"
#include "../support/gradcheck.hpp"

using namespace ooc;
using ooc::testing::check_gradient;
using ooc::testing::probe;
using ooc::testing::random_param;

namespace {

constexpr double kGradTol = 1e-4;

bool is_error(ErrorKind kind, const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind() == kind;
    }
    return false;
}

}  // namespace

TEST_CASE("matmul examples") {
    Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor ones = Tensor::from({2, 1}, {1, 1});
    Tensor c = matmul(a, ones);
    CHECK(c.shape() == Shape{2, 1});
    CHECK(c[0] == 3.0);
    CHECK(c[1] == 7.0);

    Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor m = Tensor::from({2, 3}, {0.5, -1, 2, 7, 3.25, -4});
    Tensor r = matmul(eye, m);
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(r[i] == m[i]);

    CHECK(is_error(ErrorKind::Dimension, [&] { matmul(m, m); }));
}

TEST_CASE("matmul gradients match finite differences") {
    std::mt19937_64 rng(1);
    Tensor a = random_param({5, 4}, rng);
    Tensor b = random_param({4, 3}, rng);
    auto loss = [&] { return probe(matmul(a, b)); };
    CHECK(check_gradient(loss, a).rel_error < 1e-5);
    CHECK(check_gradient(loss, b).rel_error < 1e-5);

    Tensor bt = random_param({3, 4}, rng);
    auto loss_nt = [&] { return probe(matmul_nt(a, bt)); };
    CHECK(check_gradient(loss_nt, a).rel_error < 1e-5);
    CHECK(check_gradient(loss_nt, bt).rel_error < 1e-5);
}

TEST_CASE("concat") {
    Tensor x = Tensor::from({2}, {1, 2});
    Tensor y = Tensor::from({2}, {2, 3});
    Tensor c = concat({x, y}, 0);
    REQUIRE(c.shape() == Shape{4});
    CHECK(std::vector<double>(c.data().begin(), c.data().end()) == std::vector<double>{1, 2, 2, 3});

    Tensor e = concat({x, Tensor()}, 0);
    CHECK(std::vector<double>(e.data().begin(), e.data().end()) == std::vector<double>{1, 2});

    CHECK(is_error(ErrorKind::Dimension, [] {
        concat({Tensor::zeros({2, 3}), Tensor::zeros({2, 4})}, 0);
    }));

    std::mt19937_64 rng(2);
    Tensor p = random_param({3, 2}, rng);
    Tensor q = random_param({3, 4}, rng);
    Tensor r = random_param({1, 6}, rng);
    auto loss = [&] { return probe(concat({concat({p, q}, 1), r}, 0)); };
    CHECK(check_gradient(loss, p).rel_error < kGradTol);
    CHECK(check_gradient(loss, q).rel_error < kGradTol);
    CHECK(check_gradient(loss, r).rel_error < kGradTol);

    // Upstream gradient slices land on the inputs exactly.
    p.zero_grad();
    q.zero_grad();
    sum(concat({p, q}, 1)).backward();
    for (double g : p.grad()) CHECK(g == 1.0);
    for (double g : q.grad()) CHECK(g == 1.0);
}

TEST_CASE("softmax") {
    Tensor u = softmax(Tensor::from({3}, {0, 0, 0}), 0);
    for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    Tensor big = softmax(Tensor::from({2}, {1000, 0}), 0);
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == doctest::Approx(1.0));
    CHECK(big[1] < 1e-300);

    std::mt19937_64 rng(3);
    Tensor x = random_param({4, 5}, rng, -3, 3);
    for (std::size_t axis : {0u, 1u}) {
        Tensor y = softmax(x, axis);
        const std::size_t groups = axis == 1 ? 4 : 5;
        for (std::size_t g = 0; g < groups; ++g) {
            double total = 0.0;
            for (std::size_t t = 0; t < (axis == 1 ? 5u : 4u); ++t) {
                total += axis == 1 ? y.at(g, t) : y.at(t, g);
            }
            CHECK(std::abs(total - 1.0) < 1e-9);
        }
        auto loss = [&] { return probe(softmax(x, axis)); };
        CHECK(check_gradient(loss, x).rel_error < 1e-5);
    }
    auto loss_ls = [&] { return probe(log_softmax(x)); };
    CHECK(check_gradient(loss_ls, x).rel_error < kGradTol);
}

TEST_CASE("backward examples") {
    Tensor w = Tensor::parameter({3}, {0.5, -2.0, 4.0});
    sum(w).backward();
    for (double g : w.grad()) CHECK(g == 1.0);

    w.zero_grad();
    sum(mul(w, w)).backward();
    for (std::size_t i = 0; i < 3; ++i) CHECK(w.grad()[i] == 2.0 * w[i]);

    CHECK(is_error(ErrorKind::Contract, [&] { mul(w, w).backward(); }));

    // Non-trainable leaves stay untouched.
    Tensor c = Tensor::from({3}, {1, 1, 1});
    w.zero_grad();
    sum(mul(w, c)).backward();
    CHECK_FALSE(c.has_grad());
    CHECK(w.has_grad());
}

TEST_CASE("composite MLP gradients match finite differences") {
    std::mt19937_64 rng(4);
    Tensor x = Tensor::from({6, 5}, ooc::testing::random_values(30, rng));
    Tensor w1 = random_param({5, 8}, rng);
    Tensor b1 = random_param({8}, rng);
    Tensor w2 = random_param({8, 3}, rng);
    Tensor b2 = random_param({3}, rng);
    const std::vector<std::size_t> targets{0, 2, 1, 1, 0, 2};
    auto loss = [&] {
        Tensor h = gelu(add_row(matmul(x, w1), b1));
        Tensor logits = add_row(matmul(h, w2), b2);
        return scale(sum(pick(log_softmax(logits), targets)), -1.0 / 6.0);
    };
    for (Tensor* p : {&w1, &b1, &w2, &b2}) CHECK(check_gradient(loss, *p).rel_error < kGradTol);
}

TEST_CASE("every op's gradient matches finite differences") {
    std::mt19937_64 rng(5);
    Tensor a = random_param({3, 4}, rng);
    Tensor b = random_param({3, 4}, rng);
    Tensor pos = random_param({3, 4}, rng, 0.2, 2.0);
    Tensor bias = random_param({4}, rng);
    Tensor gamma = random_param({4}, rng, 0.5, 1.5);
    Tensor beta = random_param({4}, rng);
    Tensor table = random_param({5, 4}, rng);
    const std::vector<std::size_t> ids{4, 0, 4, 2};
    const std::vector<std::size_t> dst{1, 0, 1};
    const std::vector<bool> mask{true, false, false, false, false, true,
                                 false, false, false, false, true, false};

    struct Case {
        const char* name;
        std::function<Tensor()> loss;
        std::vector<Tensor> params;
    };
    const std::vector<Case> cases{
        {"add", [&] { return probe(add(a, b)); }, {a, b}},
        {"sub", [&] { return probe(sub(a, b)); }, {a, b}},
        {"mul", [&] { return probe(mul(a, b)); }, {a, b}},
        {"scale", [&] { return probe(scale(a, -1.7)); }, {a}},
        {"add_scalar", [&] { return probe(add_scalar(a, 0.3)); }, {a}},
        {"add_row", [&] { return probe(add_row(a, bias)); }, {a, bias}},
        {"transpose", [&] { return probe(transpose(a)); }, {a}},
        {"reshape", [&] { return probe(reshape(a, {2, 6})); }, {a}},
        {"slice_rows", [&] { return probe(slice_rows(a, 1, 2)); }, {a}},
        {"slice_cols", [&] { return probe(slice_cols(a, 1, 2)); }, {a}},
        {"gather_rows", [&] { return probe(gather_rows(table, ids)); }, {table}},
        {"scatter_add_rows", [&] { return probe(scatter_add_rows(a, dst, 2)); }, {a}},
        {"pick", [&] { return probe(pick(a, std::vector<std::size_t>{3, 0, 2})); }, {a}},
        {"layer_norm", [&] { return probe(layer_norm(a)); }, {a}},
        {"layer_norm_affine", [&] { return probe(layer_norm(a, gamma, beta)); }, {a, gamma, beta}},
        {"relu", [&] { return probe(relu(a)); }, {a}},
        {"gelu", [&] { return probe(gelu(a)); }, {a}},
        {"exp", [&] { return probe(exp(a)); }, {a}},
        {"log", [&] { return probe(log(pos)); }, {pos}},
        {"pow", [&] { return probe(pow_scalar(pos, 2.5)); }, {pos}},
        {"masked_fill", [&] { return probe(masked_fill(a, mask, -3.0)); }, {a}},
        {"mean", [&] { return mean(mul(a, a)); }, {a}},
    };
    for (const Case& c : cases) {
        CAPTURE(c.name);
        for (const Tensor& p : c.params) CHECK(check_gradient(c.loss, p).rel_error < kGradTol);
    }
}

TEST_CASE("layer norm statistics") {
    std::mt19937_64 rng(6);
    Tensor x = random_param({7, 16}, rng, -5, 5);
    Tensor y = layer_norm(x, 0.0);
    for (std::size_t r = 0; r < 7; ++r) {
        double mu = 0.0, var = 0.0;
        for (std::size_t c = 0; c < 16; ++c) mu += y.at(r, c);
        mu /= 16.0;
        for (std::size_t c = 0; c < 16; ++c) var += (y.at(r, c) - mu) * (y.at(r, c) - mu);
        var /= 16.0;
        CHECK(std::abs(mu) < 1e-7);
        CHECK(std::abs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("pow with zero exponent is exactly one with zero gradient") {
    Tensor x = Tensor::parameter({3}, {0.0, 0.5, 1.0});
    Tensor y = pow_scalar(x, 0.0);
    for (double v : y.data()) CHECK(v == 1.0);
    sum(mul(y, x)).backward();
    for (double g : x.grad()) CHECK(g == 1.0);  // only the direct path contributes
}

TEST_CASE("forward is deterministic") {
    std::mt19937_64 r1(9), r2(9);
    Tensor a1 = random_param({6, 6}, r1);
    Tensor a2 = random_param({6, 6}, r2);
    Tensor y1 = softmax(gelu(matmul(a1, a1)), 1);
    Tensor y2 = softmax(gelu(matmul(a2, a2)), 1);
    for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);
}

TEST_CASE("no-grad guard skips graph recording") {
    Tensor w = Tensor::parameter({2}, {1, 2});
    {
        NoGradGuard guard;
        Tensor y = sum(mul(w, w));
        CHECK_FALSE(y.requires_grad());
    }
    CHECK(sum(w).requires_grad());
}

TEST_CASE("shape mismatches raise dimension errors") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({3, 2});
    CHECK(is_error(ErrorKind::Dimension, [&] { add(a, b); }));
    CHECK(is_error(ErrorKind::Dimension, [&] { add_row(a, Tensor::zeros({2})); }));
    CHECK(is_error(ErrorKind::Dimension, [&] { slice_rows(a, 1, 2); }));
    CHECK(is_error(ErrorKind::Dimension, [&] { Tensor::from({2, 2}, {1, 2, 3}); }));
    CHECK(is_error(ErrorKind::Dimension, [&] { reshape(a, {4}); }));
}
