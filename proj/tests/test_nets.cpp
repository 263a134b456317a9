#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "sibe/checkpoint.hpp"
#include "sibe/losses.hpp"
#include "sibe/model.hpp"

using namespace sibe;

namespace {

ModelDims tiny_dims() {
    ModelDims d;
    d.obs = 4;
    d.action = 2;
    d.d_c = 3;
    d.d_z = 3;
    d.d_f = 3;
    d.hidden = 4;
    return d;
}

SibeModel make_tiny(std::uint64_t seed = 1) {
    Rng rng(seed);
    return SibeModel(tiny_dims(), ModelCoeffs{}, rng);
}

void fill_params(std::vector<Tensor> params, double v) {
    for (auto& p : params) {
        auto out = p.value_mut();
        std::fill(out.begin(), out.end(), v);
    }
}

// Plain-loop forward through (w1, b1, relu, w2, b2); independent of the
// tensor library.
std::vector<double> manual_two_layer(const std::vector<double>& x, const Tensor& w1,
                                     const Tensor& b1, const Tensor& w2, const Tensor& b2) {
    std::int64_t in = w1.shape()[0], hid = w1.shape()[1], out = w2.shape()[1];
    std::vector<double> h(static_cast<std::size_t>(hid), 0.0);
    for (std::int64_t j = 0; j < hid; ++j) {
        double acc = b1.value()[static_cast<std::size_t>(j)];
        for (std::int64_t i = 0; i < in; ++i)
            acc += x[static_cast<std::size_t>(i)] * w1.value()[static_cast<std::size_t>(i * hid + j)];
        h[static_cast<std::size_t>(j)] = acc > 0 ? acc : 0.0;
    }
    std::vector<double> y(static_cast<std::size_t>(out), 0.0);
    for (std::int64_t j = 0; j < out; ++j) {
        double acc = b2.value()[static_cast<std::size_t>(j)];
        for (std::int64_t i = 0; i < hid; ++i)
            acc += h[static_cast<std::size_t>(i)] * w2.value()[static_cast<std::size_t>(i * out + j)];
        y[static_cast<std::size_t>(j)] = acc;
    }
    return y;
}

}  // namespace

TEST_SUITE_BEGIN("nets");

TEST_CASE("det_encode basics") {
    SibeModel model = make_tiny();
    Rng rng(9);
    std::vector<double> xs = rng.normal_vector(4);
    Tensor s = Tensor::from_data({4}, xs);

    SUBCASE("zero network maps everything to zero") {
        fill_params(model.eta_online(), 0.0);
        Tensor c = model.det_encode(s, Branch::online);
        for (double v : c.value()) CHECK(v == 0.0);
    }
    SUBCASE("deterministic on repeated input") {
        Tensor c1 = model.det_encode(s, Branch::online);
        Tensor c2 = model.det_encode(s, Branch::online);
        for (std::size_t i = 0; i < 3; ++i) CHECK(c1.value()[i] == c2.value()[i]);
    }
    SUBCASE("matches a hand-computed two-layer forward") {
        auto p = model.eta_online();  // w1, b1, w2, b2
        auto expect = manual_two_layer(xs, p[0], p[1], p[2], p[3]);
        Tensor c = model.det_encode(s, Branch::online);
        for (std::size_t i = 0; i < expect.size(); ++i)
            CHECK(c.value()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
    SUBCASE("dim mismatch rejected") {
        CHECK_THROWS_AS(model.det_encode(Tensor::zeros({5}), Branch::online), ShapeError);
    }
}

TEST_CASE("stoch_encode sigma parameterization") {
    SibeModel model = make_tiny();
    SUBCASE("zero raw output gives sigma = log 2 + floor") {
        fill_params(model.theta_online(), 0.0);
        DiagGaussian g = model.stoch_encode(Tensor::zeros({3}), Branch::online);
        for (double m : g.mu.value()) CHECK(m == 0.0);
        for (double s : g.sigma.value())
            CHECK(s == doctest::Approx(std::log(2.0) + 1e-4).epsilon(1e-12));
    }
    SUBCASE("matches hand-computed forward") {
        Rng rng(4);
        std::vector<double> cs = rng.normal_vector(3);
        auto p = model.theta_online();
        auto raw = manual_two_layer(cs, p[0], p[1], p[2], p[3]);  // 2*d_z outputs
        DiagGaussian g = model.stoch_encode(Tensor::from_data({3}, cs), Branch::online);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(g.mu.value()[i] == doctest::Approx(raw[i]).epsilon(1e-12));
            double sp = std::log1p(std::exp(-std::abs(raw[i + 3]))) + std::max(raw[i + 3], 0.0);
            CHECK(g.sigma.value()[i] == doctest::Approx(sp + 1e-4).epsilon(1e-12));
        }
    }
    SUBCASE("sigma floor holds on random inputs") {
        Rng rng(77);
        for (int t = 0; t < 200; ++t) {
            Tensor c = Tensor::from_data({3}, rng.normal_vector(3));
            DiagGaussian g = model.stoch_encode(c, Branch::online);
            for (double s : g.sigma.value()) CHECK(s > 1e-4);
        }
    }
}

TEST_CASE("transition_predict") {
    SibeModel model = make_tiny();
    SUBCASE("zero-initialized final layer gives mu 0, sigma log2 + floor") {
        auto psi = model.psi();  // w1,b1,w2,b2,w3,b3
        fill_params({psi[4], psi[5]}, 0.0);
        DiagGaussian q = model.transition_predict(Tensor::zeros({3}), Tensor::zeros({2}));
        for (double m : q.mu.value()) CHECK(m == 0.0);
        for (double s : q.sigma.value())
            CHECK(s == doctest::Approx(std::log(2.0) + 1e-4).epsilon(1e-12));
    }
    SUBCASE("sigma strictly positive over many random inputs") {
        Rng rng(123);
        for (int t = 0; t < 10000; ++t) {
            Tensor z = Tensor::from_data({3}, rng.normal_vector(3));
            Tensor a = Tensor::from_data({2}, rng.normal_vector(2));
            DiagGaussian q = model.transition_predict(z, a);
            for (double s : q.sigma.value()) {
                if (!(s > 0.0)) {
                    CHECK(s > 0.0);
                    return;
                }
            }
        }
        CHECK(true);
    }
    SUBCASE("matches a hand-computed three-layer forward") {
        Rng rng(15);
        std::vector<double> zs = rng.normal_vector(3), as = rng.normal_vector(2);
        std::vector<double> in(zs);
        in.insert(in.end(), as.begin(), as.end());
        auto p = model.psi();  // w1,b1,w2,b2,w3,b3
        // relu(relu(in w1 + b1) w2 + b2) w3 + b3, by plain loops
        auto layer = [](const std::vector<double>& x, const Tensor& w, const Tensor& b,
                        bool act) {
            std::int64_t in_d = w.shape()[0], out_d = w.shape()[1];
            std::vector<double> y(static_cast<std::size_t>(out_d));
            for (std::int64_t j = 0; j < out_d; ++j) {
                double acc = b.value()[static_cast<std::size_t>(j)];
                for (std::int64_t i = 0; i < in_d; ++i)
                    acc += x[static_cast<std::size_t>(i)] * w.value()[static_cast<std::size_t>(i * out_d + j)];
                y[static_cast<std::size_t>(j)] = act && acc < 0 ? 0.0 : acc;
            }
            return y;
        };
        auto h1 = layer(in, p[0], p[1], true);
        auto h2 = layer(h1, p[2], p[3], true);
        auto raw = layer(h2, p[4], p[5], false);
        DiagGaussian q = model.transition_predict(Tensor::from_data({3}, zs),
                                                  Tensor::from_data({2}, as));
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(q.mu.value()[i] == doctest::Approx(raw[i]).epsilon(1e-12));
            double sp = std::log1p(std::exp(-std::abs(raw[i + 3]))) + std::max(raw[i + 3], 0.0);
            CHECK(q.sigma.value()[i] == doctest::Approx(sp + 1e-4).epsilon(1e-12));
        }
    }
    SUBCASE("dim mismatch rejected") {
        CHECK_THROWS_AS(model.transition_predict(Tensor::zeros({4}), Tensor::zeros({2})),
                        ShapeError);
    }
}

TEST_CASE("score function") {
    SibeModel model = make_tiny();
    SUBCASE("omega = I on equal head outputs gives exp of squared norm") {
        Tensor u = Tensor::from_data({3}, {0.3, -0.7, 1.1});
        Tensor e = model.score_exponents(u, u);  // omega starts as identity
        double norm2 = 0.3 * 0.3 + 0.7 * 0.7 + 1.1 * 1.1;
        CHECK(e.value()[0] == doctest::Approx(norm2).epsilon(1e-12));
        CHECK(std::exp(e.value()[0]) > 1.0);
    }
    SUBCASE("omega = 0 scores 1 everywhere") {
        fill_params({model.omega()}, 0.0);
        Rng rng(3);
        for (int t = 0; t < 10; ++t) {
            Tensor z = Tensor::from_data({3}, rng.normal_vector(3));
            Tensor a = Tensor::from_data({2}, rng.normal_vector(2));
            Tensor zn = Tensor::from_data({3}, rng.normal_vector(3));
            CHECK(model.score(z, a, zn).value()[0] == 1.0);
        }
    }
    SUBCASE("matches hand-computed bilinear form at d_f = 3") {
        Rng rng(8);
        auto wv = rng.normal_vector(9);
        {
            auto w = model.omega().value_mut();
            std::copy(wv.begin(), wv.end(), w.begin());
        }
        std::vector<double> xs = rng.normal_vector(3), ys = rng.normal_vector(3);
        double expo = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) expo += xs[i] * wv[static_cast<std::size_t>(i * 3 + j)] * ys[j];
        Tensor e = model.score_exponents(Tensor::from_data({3}, xs), Tensor::from_data({3}, ys));
        CHECK(e.value()[0] == doctest::Approx(expo).epsilon(1e-12));
    }
    SUBCASE("score symmetry under omega transpose") {
        Rng rng(21);
        auto wv = rng.normal_vector(9);
        std::vector<double> xs = rng.normal_vector(3), ys = rng.normal_vector(3);
        {
            auto w = model.omega().value_mut();
            std::copy(wv.begin(), wv.end(), w.begin());
        }
        double e1 = model.score_exponents(Tensor::from_data({3}, xs), Tensor::from_data({3}, ys))
                        .value()[0];
        {
            auto w = model.omega().value_mut();
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) w[static_cast<std::size_t>(i * 3 + j)] = wv[static_cast<std::size_t>(j * 3 + i)];
        }
        double e2 = model.score_exponents(Tensor::from_data({3}, ys), Tensor::from_data({3}, xs))
                        .value()[0];
        CHECK(std::abs(e1 - e2) < 1e-12);
    }
    SUBCASE("exponent clamp keeps scores finite") {
        auto w = model.omega().value_mut();
        std::fill(w.begin(), w.end(), 1e6);
        Tensor u = Tensor::full({3}, 50.0);
        Tensor e = model.score_exponents(u, u);
        CHECK(e.value()[0] == 30.0);
        CHECK(std::isfinite(model.score(Tensor::zeros({3}), Tensor::zeros({2}), Tensor::zeros({3}))
                                .value()[0]));
    }
    SUBCASE("gradients reach upsilon, rho_o, omega but never rho_m") {
        SibeModel m2 = make_tiny(5);
        Rng rng(6);
        Tensor z = Tensor::from_data({3}, rng.normal_vector(3));
        Tensor a = Tensor::from_data({2}, rng.normal_vector(2));
        Tensor zn = Tensor::from_data({3}, rng.normal_vector(3));
        Tape tape;
        {
            TapeScope scope(tape);
            tape.backward(sum(m2.score(z, a, zn)));
        }
        auto nonzero = [](const std::vector<Tensor>& ts) {
            double acc = 0.0;
            for (const auto& t : ts)
                for (double g : t.grad()) acc += std::abs(g);
            return acc > 0.0;
        };
        CHECK(nonzero(m2.upsilon()));
        CHECK(nonzero(m2.rho_online()));
        CHECK(nonzero({m2.omega()}));
        for (const auto& t : m2.rho_target()) CHECK_FALSE(t.has_grad());
    }
}

TEST_CASE("ema_update") {
    SibeModel model = make_tiny(11);
    SUBCASE("default tau matches the configured coefficient") {
        CHECK(model.coeffs().tau == 0.05);
    }
    SUBCASE("tau = 1 copies online into target") {
        // Drift online away from target first.
        for (auto& p : model.eta_online()) {
            Tensor q = p;
            for (auto& v : q.value_mut()) v += 0.5;
        }
        model.ema_update(1.0);
        auto on = model.eta_online();
        auto tg = model.eta_target();
        for (std::size_t k = 0; k < on.size(); ++k)
            for (std::size_t i = 0; i < on[k].value().size(); ++i)
                CHECK(tg[k].value()[i] == on[k].value()[i]);
    }
    SUBCASE("one-step arithmetic: 0 toward 1 with tau 0.05") {
        fill_params(model.theta_online(), 1.0);
        fill_params(model.theta_target(), 0.0);
        model.ema_update(0.05);
        for (const auto& t : model.theta_target())
            for (double v : t.value()) CHECK(v == doctest::Approx(0.05).epsilon(1e-15));
    }
    SUBCASE("invalid tau rejected") {
        CHECK_THROWS_AS(model.ema_update(0.0), ValueError);
        CHECK_THROWS_AS(model.ema_update(1.5), ValueError);
    }
    SUBCASE("fixed point when online equals target") {
        // Targets start as exact copies.
        std::vector<double> before;
        for (const auto& t : model.theta_target())
            for (double v : t.value()) before.push_back(v);
        model.ema_update(0.05);
        std::size_t i = 0;
        for (const auto& t : model.theta_target())
            for (double v : t.value()) {
                CHECK(std::abs(v - before[i]) <= 1e-15 * std::max(1.0, std::abs(before[i])));
                ++i;
            }
    }
    SUBCASE("geometric convergence at ratio (1 - tau)") {
        fill_params(model.eta_online(), 1.0);
        fill_params(model.eta_target(), 0.0);
        double tau = 0.25;
        double gap = 1.0;
        for (int step = 0; step < 6; ++step) {
            model.ema_update(tau);
            gap *= (1.0 - tau);
            for (const auto& t : model.eta_target())
                for (double v : t.value()) CHECK(std::abs((1.0 - v) - gap) < 1e-12);
        }
    }
    SUBCASE("psi, upsilon, omega are untouched") {
        auto snap = [](const std::vector<Tensor>& ts) {
            std::vector<double> out;
            for (const auto& t : ts) out.insert(out.end(), t.value().begin(), t.value().end());
            return out;
        };
        auto psi0 = snap(model.psi());
        auto ups0 = snap(model.upsilon());
        auto om0 = snap({model.omega()});
        fill_params(model.eta_online(), 2.0);
        model.ema_update(0.5);
        CHECK(snap(model.psi()) == psi0);
        CHECK(snap(model.upsilon()) == ups0);
        CHECK(snap({model.omega()}) == om0);
    }
}

TEST_CASE("target branches never accumulate gradients") {
    SibeModel model = make_tiny(31);
    Rng rng(32);
    Tensor s = Tensor::from_data({2, 4}, rng.normal_vector(8));
    Tape tape;
    {
        TapeScope scope(tape);
        Tensor c_t = model.det_encode(s, Branch::target);
        DiagGaussian g = model.stoch_encode(c_t, Branch::target);
        Tensor c_o = model.det_encode(s, Branch::online);
        DiagGaussian go = model.stoch_encode(c_o, Branch::online);
        Tensor loss = add(mean(g.mu), mean(go.mu));  // touches both branches
        tape.backward(loss);
    }
    for (const auto& t : model.eta_target()) CHECK_FALSE(t.has_grad());
    for (const auto& t : model.theta_target()) CHECK_FALSE(t.has_grad());
    for (const auto& t : model.rho_target()) CHECK_FALSE(t.has_grad());
    double acc = 0.0;
    for (const auto& t : model.eta_online())
        for (double g : t.grad()) acc += std::abs(g);
    CHECK(acc > 0.0);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    namespace fs = std::filesystem;
    SibeModel model = make_tiny(77);
    fs::path path = fs::temp_directory_path() / "sibe_nets_ckpt_test.bin";
    nlohmann::ordered_json meta;
    meta["dims"] = {{"obs", 4}, {"action", 2}};
    save_checkpoint(path.string(), meta, model.named_parameters());

    CheckpointData data = load_checkpoint(path.string());
    CHECK(data.header["format_version"] == 1);
    CHECK(data.header["dims"]["obs"] == 4);
    for (const auto& [name, t] : model.named_parameters()) {
        const auto& vals = data.values(name);
        REQUIRE(vals.size() == static_cast<std::size_t>(t.numel()));
        CHECK(std::memcmp(vals.data(), t.value().data(), vals.size() * sizeof(double)) == 0);
    }

    // Assign back into a differently-seeded model and compare bitwise.
    SibeModel other = make_tiny(78);
    assign_parameters(data, other.named_parameters());
    auto a = model.named_parameters();
    auto b = other.named_parameters();
    for (std::size_t k = 0; k < a.size(); ++k)
        CHECK(std::memcmp(a[k].second.value().data(), b[k].second.value().data(),
                          a[k].second.value().size() * sizeof(double)) == 0);
    fs::remove(path);
}

TEST_SUITE_END();
