#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "doctest.h"
#include "sibe/adam.hpp"
#include "sibe/mlp.hpp"
#include "sibe/rng.hpp"
#include "sibe/tensor.hpp"

using namespace sibe;

namespace {

// Central finite differences on leaf parameters; the oracle re-runs the
// forward function with perturbed values and never touches the tape.
std::vector<std::vector<double>> fd_grads(std::vector<Tensor>& params,
                                          const std::function<Tensor()>& fn, double h = 1e-5) {
    std::vector<std::vector<double>> out;
    for (auto& p : params) {
        std::vector<double> g(static_cast<std::size_t>(p.numel()));
        auto vals = p.value_mut();
        for (std::size_t i = 0; i < g.size(); ++i) {
            double old = vals[i];
            vals[i] = old + h;
            double fp = fn().item();
            vals[i] = old - h;
            double fm = fn().item();
            vals[i] = old;
            g[i] = (fp - fm) / (2.0 * h);
        }
        out.push_back(std::move(g));
    }
    return out;
}

bool grads_match(std::vector<Tensor>& params, const std::function<Tensor()>& fn,
                 double rtol = 1e-4, double atol = 1e-7) {
    auto fd = fd_grads(params, fn);
    Tape tape;
    std::vector<std::span<const double>> ad;
    {
        TapeScope scope(tape);
        Tensor loss = fn();
        tape.backward(loss);
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto g = params[k].grad();
        REQUIRE(g.size() == fd[k].size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            double diff = std::abs(g[i] - fd[k][i]);
            double mag = std::max(std::abs(g[i]), std::abs(fd[k][i]));
            if (diff > atol + rtol * mag) return false;
        }
    }
    return true;
}

}  // namespace

TEST_SUITE_BEGIN("tensor");

TEST_CASE("matmul identity returns the operand") {
    Rng rng(7);
    Tensor eye = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    std::vector<double> xs = rng.normal_vector(3 * 5);
    Tensor x = Tensor::from_data({3, 5}, xs);
    Tensor y = matmul(eye, x);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(y.value()[i] == doctest::Approx(xs[i]).epsilon(1e-15));
}

TEST_CASE("analytic point values") {
    CHECK(softplus(Tensor::scalar(0.0)).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    Tensor z = Tensor::from_data({3}, {0, 0, 0});
    CHECK(logsumexp_last(z).item() == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("shape mismatch diagnostics name both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 5});
    try {
        matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("(2x3)") != std::string::npos);
        CHECK(msg.find("(4x5)") != std::string::npos);
    }
    CHECK_THROWS_AS(add(a, b), ShapeError);
    CHECK_THROWS_AS(concat_last(Tensor::zeros({2, 3}), Tensor::zeros({3, 3})), ShapeError);
}

TEST_CASE("non-finite outputs are rejected at op boundaries") {
    CHECK_THROWS_AS(log(Tensor::scalar(-1.0)), NumericError);
    CHECK_THROWS_AS(exp(Tensor::scalar(1e4)), NumericError);
    CHECK_THROWS_AS(div(Tensor::scalar(1.0), Tensor::scalar(0.0)), NumericError);
}

TEST_CASE("backward of sum of squares") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tape tape;
    {
        TapeScope scope(tape);
        Tensor loss = sum(square(x));
        tape.backward(loss);
    }
    CHECK(x.grad()[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(x.grad()[1] == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("backward requires a scalar and a nonempty tape") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tape tape;
    {
        TapeScope scope(tape);
        Tensor y = square(x);
        CHECK_THROWS_AS(tape.backward(y), ShapeError);
    }
    Tape empty_tape;
    CHECK_THROWS_AS(empty_tape.backward(Tensor::scalar(1.0)), ValueError);
}

TEST_CASE("leaf without requires_grad receives no gradient") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tensor y = Tensor::from_data({2}, {3, 4}, false);
    Tape tape;
    {
        TapeScope scope(tape);
        Tensor loss = sum(mul(x, y));
        tape.backward(loss);
    }
    CHECK(x.has_grad());
    CHECK_FALSE(y.has_grad());
}

TEST_CASE("random relu MLP gradients match central finite differences") {
    Rng rng(123);
    for (int trial = 0; trial < 20; ++trial) {
        Rng trial_rng = rng.fork("trial", static_cast<std::uint64_t>(trial));
        Mlp net({4, 6, 3}, trial_rng);
        Tensor x = Tensor::from_data({2, 4}, trial_rng.normal_vector(8));
        auto params = net.parameters();
        auto fn = [&]() { return mean(square(net.forward(x))); };
        // Keep preactivations away from the relu kink so the stencil is valid.
        bool near_kink = false;
        {
            Tensor h = add(matmul(x, params[0]), params[1]);
            for (double v : h.value())
                if (std::abs(v) < 1e-3) near_kink = true;
        }
        if (near_kink) continue;
        for (auto& p : params) p.zero_grad();
        CHECK(grads_match(params, fn));
    }
}

TEST_CASE("smooth mixed-op graphs match finite differences over 100 trials") {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        Rng r = rng.fork("mix", static_cast<std::uint64_t>(trial));
        std::int64_t b = 2 + static_cast<std::int64_t>(r.uniform_int(3));
        std::int64_t n = 2 + static_cast<std::int64_t>(r.uniform_int(4));
        Tensor w = Tensor::from_data({n, n}, r.normal_vector(static_cast<std::size_t>(n * n)), true);
        Tensor v = Tensor::from_data({n}, r.normal_vector(static_cast<std::size_t>(n)), true);
        Tensor x = Tensor::from_data({b, n}, r.normal_vector(static_cast<std::size_t>(b * n)));
        std::vector<Tensor> params = {w, v};
        auto fn = [&]() {
            Tensor h = tanh(add(matmul(x, w), v));
            Tensor pos = add_scalar(softplus(h), 0.5);          // strictly positive
            Tensor lse = logsumexp_last(concat_last(log(pos), square(h)));
            Tensor ratio = div(sum_last(mul(h, h)), add_scalar(sum_last(pos), 1.0));
            Tensor gram = take_diag(matmul(transpose(h), h));   // (n)
            Tensor tail = exp(scale(slice_last(gram, 0, std::max<std::int64_t>(1, n - 1)), 0.05));
            return add(add(mean(lse), mean(ratio)), add(mean(tail), mean(square(v))));
        };
        for (auto& p : params) p.zero_grad();
        CHECK(grads_match(params, fn));
    }
}

TEST_CASE("kinked ops match finite differences away from their kinks") {
    Rng rng(55);
    for (int trial = 0; trial < 10; ++trial) {
        Rng r = rng.fork("kink", static_cast<std::uint64_t>(trial));
        std::vector<double> xs = r.normal_vector(6);
        for (auto& v : xs) v += (v >= 0 ? 0.05 : -0.05);  // clear of zero
        std::vector<double> ys = r.normal_vector(6);
        for (std::size_t i = 0; i < ys.size(); ++i)
            if (std::abs(ys[i] - xs[i]) < 0.05) ys[i] += 0.2;
        Tensor x = Tensor::from_data({6}, xs, true);
        Tensor y = Tensor::from_data({6}, ys, true);
        std::vector<Tensor> params = {x, y};
        auto fn = [&]() {
            return mean(add(relu(x), add(minimum(x, y), clamp(mul(x, y), -1.5, 1.5))));
        };
        // clamp kink check
        bool near = false;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (std::abs(std::abs(xs[i] * ys[i]) - 1.5) < 1e-3) near = true;
        if (near) continue;
        for (auto& p : params) p.zero_grad();
        CHECK(grads_match(params, fn));
    }
}

TEST_CASE("broadcast bias gradients column-sum over rows") {
    Tensor m = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    Tensor bias = Tensor::from_data({3}, {0.5, -0.5, 1.0}, true);
    Tape tape;
    {
        TapeScope scope(tape);
        tape.backward(sum(add(m, bias)));
    }
    for (double g : bias.grad()) CHECK(g == doctest::Approx(2.0).epsilon(1e-14));
    for (double g : m.grad()) CHECK(g == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("logsumexp is shift-invariant and overflow-safe") {
    Rng rng(99);
    std::vector<double> xs = rng.normal_vector(8);
    Tensor x = Tensor::from_data({8}, xs);
    double base = logsumexp_last(x).item();
    for (double c : {100.0, 500.0, 700.0}) {
        std::vector<double> shifted = xs;
        for (auto& v : shifted) v += c;
        double got = logsumexp_last(Tensor::from_data({8}, shifted)).item();
        CHECK(std::abs(got - (base + c)) < 1e-12 * std::max(1.0, std::abs(base + c)));
    }
}

TEST_CASE("fixed seed gives bit-identical forward and backward results") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Mlp net({5, 8, 4}, rng);
        Tensor x = Tensor::from_data({3, 5}, rng.normal_vector(15));
        Tape tape;
        std::vector<double> out;
        {
            TapeScope scope(tape);
            Tensor y = mean(square(tanh(net.forward(x))));
            tape.backward(y);
            out.push_back(y.item());
        }
        for (auto& p : net.parameters())
            for (double g : p.grad()) out.push_back(g);
        return out;
    };
    auto a = run(42), b = run(42);
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("gaussian_sample contract") {
    SUBCASE("zero noise returns the mean") {
        Tensor mu = Tensor::from_data({4}, {1, -2, 0.5, 3});
        Tensor sigma = Tensor::full({4}, 0.7);
        Tensor eps = Tensor::zeros({4});
        Tensor z = gaussian_sample_with_noise(mu, sigma, eps);
        for (std::size_t i = 0; i < 4; ++i) CHECK(z.value()[i] == mu.value()[i]);
    }
    SUBCASE("nonpositive sigma is rejected") {
        Tensor mu = Tensor::zeros({2});
        CHECK_THROWS_AS(gaussian_sample_with_noise(mu, Tensor::zeros({2}), Tensor::zeros({2})),
                        ValueError);
        CHECK_THROWS_AS(gaussian_sample_with_noise(mu, Tensor::full({2}, -1.0), Tensor::zeros({2})),
                        ValueError);
    }
    SUBCASE("sample moments converge at the Monte-Carlo rate") {
        Rng rng(31337);
        const std::int64_t n = 100000;
        Tensor mu = Tensor::zeros({n});
        Tensor sigma = Tensor::full({n}, 1.0);
        Tensor z = gaussian_sample(mu, sigma, rng);
        double m = 0.0, m2 = 0.0;
        for (double v : z.value()) {
            m += v;
            m2 += v * v;
        }
        m /= static_cast<double>(n);
        m2 /= static_cast<double>(n);
        CHECK(std::abs(m) < 4.0 / std::sqrt(static_cast<double>(n)));
        CHECK(std::abs(m2 - m * m - 1.0) < 4.0 * std::sqrt(2.0 / static_cast<double>(n)));
    }
    SUBCASE("ds/dsigma equals the drawn noise") {
        Rng rng(5);
        Tensor mu = Tensor::zeros({6}, true);
        Tensor sigma = Tensor::full({6}, 0.4, true);
        Tensor eps = Tensor::from_data({6}, rng.normal_vector(6));
        Tape tape;
        {
            TapeScope scope(tape);
            tape.backward(sum(gaussian_sample_with_noise(mu, sigma, eps)));
        }
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(sigma.grad()[i] == doctest::Approx(eps.value()[i]).epsilon(1e-14));
            CHECK(mu.grad()[i] == doctest::Approx(1.0).epsilon(1e-14));
        }
    }
}

TEST_CASE("detach cuts the graph") {
    Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
    Tape tape;
    {
        TapeScope scope(tape);
        Tensor y = square(x);
        Tensor z = sum(mul(y.detach(), x));
        tape.backward(z);
    }
    // d/dx of sum(const * x) = const = x^2 values, not 3x^2.
    CHECK(x.grad()[0] == doctest::Approx(1.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
    CHECK(x.grad()[2] == doctest::Approx(9.0));
}

TEST_SUITE_END();
