#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "vaelab/grad_check.hpp"
#include "vaelab/model.hpp"

using namespace vaelab;

namespace {

template <typename T>
double row_norm(const Tensor<T>& m, int b) {
    double acc = 0;
    for (int d = 0; d < m.dim(1); ++d) {
        double v = m.data()[b * m.dim(1) + d];
        acc += v * v;
    }
    return std::sqrt(acc);
}

}  // namespace

TEST_CASE("latent_clip rescales rows outside the ball") {
    Tensor<double> mu({1, 2}, {3.0, 4.0});  // norm 5
    Tensor<double> out = latent_clip<double>(nullptr, mu, 2.5);
    CHECK(out.data()[0] == doctest::Approx(1.5));
    CHECK(out.data()[1] == doctest::Approx(2.0));
}

TEST_CASE("latent_clip passes rows inside the ball through unchanged") {
    Tensor<double> mu({2, 2}, {1.0, 0.0, 0.0, 0.0});
    Tensor<double> out = latent_clip<double>(nullptr, mu, 3.0);
    CHECK(out.data()[0] == 1.0);
    CHECK(out.data()[1] == 0.0);
    CHECK(out.data()[2] == 0.0);
    CHECK(out.data()[3] == 0.0);
}

TEST_CASE("latent_clip is exactly idempotent") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor<float> mu = Tensor<float>::randn({8, 10}, rng, 4.0);
        Tensor<float> once = latent_clip<float>(nullptr, mu, 9.4868);
        Tensor<float> twice = latent_clip<float>(nullptr, once, 9.4868);
        for (int64_t i = 0; i < once.numel(); ++i) {
            REQUIRE(once.data()[i] == twice.data()[i]);
        }
    }
}

TEST_CASE("latent_clip output norm is min(input norm, C)") {
    Rng rng(37);
    const double C = 2.0;
    for (int trial = 0; trial < 50; ++trial) {
        Tensor<double> mu = Tensor<double>::randn({6, 5}, rng, 1.5);
        Tensor<double> out = latent_clip<double>(nullptr, mu, C);
        for (int b = 0; b < 6; ++b) {
            const double rin = row_norm(mu, b);
            const double rout = row_norm(out, b);
            CHECK(rout == doctest::Approx(std::min(rin, C)).epsilon(1e-9));
        }
    }
}

TEST_CASE("latent_clip gradient matches finite differences on both branches") {
    // rows engineered so none sits near the boundary C=2
    Tensor<double> mu0({2, 3}, {0.3, -0.4, 0.2,    // norm ~0.54, inside
                                2.0, -2.5, 1.5});  // norm ~3.54, clipped
    auto weighted = [](Tape<double>* t, const Tensor<double>& m) {
        Tensor<double> w({2, 3}, {1.0, -2.0, 0.5, 1.5, 0.7, -1.1});
        return sum(t, mul(t, w, latent_clip(t, m, 2.0)));
    };
    CHECK(grad_check<double>(weighted, mu0, 1e-4).max_rel_err < 1e-6);

    // stop-grad variant: scale factor is a constant in backward
    Tape<double> tape;
    Tensor<double> mu({1, 2}, {3.0, 4.0}, true);
    Tensor<double> y = latent_clip(&tape, mu, 2.5, /*stop_grad=*/true);
    tape.backward(sum(&tape, y));
    CHECK(mu.grad_at(0) == doctest::Approx(0.5));  // just C/r
    CHECK(mu.grad_at(1) == doctest::Approx(0.5));
}

TEST_CASE("latent_clip zero vector passes through for any bound") {
    Tensor<double> mu = Tensor<double>::zeros({3, 4});
    Tensor<double> out = latent_clip<double>(nullptr, mu, 0.5);
    for (int64_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == 0.0);
    CHECK_THROWS_AS(latent_clip<double>(nullptr, mu, -1.0), ContractError);
}

TEST_CASE("clip config bound is coefficient * sqrt(z_dim)") {
    ClipConfig c;
    c.enabled = true;
    c.coefficient = 3.0;
    CHECK(c.bound(10) == doctest::Approx(3.0 * std::sqrt(10.0)));
    c.coefficient = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("reparameterize") {
    SUBCASE("zero noise returns mu") {
        LatentStats<double> st{Tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6}),
                               Tensor<double>({2, 3}, {0.3, -0.1, 0.7, 0, 0, 0})};
        Tensor<double> z = reparameterize<double>(nullptr, st, Tensor<double>::zeros({2, 3}));
        for (int i = 0; i < 6; ++i) CHECK(z.data()[i] == doctest::Approx(st.mu.data()[i]));
    }
    SUBCASE("unit sigma adds the noise directly") {
        LatentStats<double> st{Tensor<double>({1, 2}, {1.0, -2.0}),
                               Tensor<double>::zeros({1, 2})};
        Tensor<double> eps({1, 2}, {0.5, -0.25});
        Tensor<double> z = reparameterize<double>(nullptr, st, eps);
        CHECK(z.data()[0] == doctest::Approx(1.5));
        CHECK(z.data()[1] == doctest::Approx(-2.25));
    }
    SUBCASE("empirical mean over many draws approaches mu") {
        const int n = 100000;
        LatentStats<double> st{Tensor<double>({1, 2}, {0.7, -1.3}),
                               Tensor<double>({1, 2}, {0.4, -0.6})};
        Rng rng(4242);
        double acc0 = 0, acc1 = 0;
        for (int i = 0; i < n; ++i) {
            Tensor<double> eps({1, 2}, {rng.normal(), rng.normal()});
            Tensor<double> z = reparameterize<double>(nullptr, st, eps);
            acc0 += z.data()[0];
            acc1 += z.data()[1];
        }
        const double s0 = std::exp(0.5 * 0.4), s1 = std::exp(0.5 * -0.6);
        CHECK(std::fabs(acc0 / n - 0.7) < 3.0 * s0 / std::sqrt(double(n)));
        CHECK(std::fabs(acc1 / n + 1.3) < 3.0 * s1 / std::sqrt(double(n)));
    }
    SUBCASE("gradients reach mu and log_var but not eps") {
        Tape<double> tape;
        LatentStats<double> st{Tensor<double>({1, 2}, {1.0, 2.0}, true),
                               Tensor<double>({1, 2}, {0.2, -0.3}, true)};
        Tensor<double> eps({1, 2}, {0.4, 0.9});
        tape.backward(sum(&tape, reparameterize(&tape, st, eps)));
        CHECK(st.mu.grad_at(0) == doctest::Approx(1.0));
        CHECK(st.log_var.grad_at(0) == doctest::Approx(0.5 * std::exp(0.1) * 0.4));
        CHECK_FALSE(eps.has_grad());
    }
}

TEST_CASE("encoder output contract") {
    for (PresetId id : {PresetId::cnn_main, PresetId::toy_dense_2d}) {
        ModelPreset preset = id == PresetId::cnn_main
                                 ? ModelPreset::cnn_main()
                                 : ModelPreset::toy_dense_2d(Activation::tanh);
        Vae<float> model(preset, 77);
        Rng rng(5);
        Tensor<float> x = Tensor<float>::uniform({3, 1, 28, 28}, rng, 0.0, 1.0);
        auto stats = model.encode(nullptr, x);
        CHECK(stats.mu.shape() == Shape{3, preset.z_dim});
        CHECK(stats.log_var.shape() == Shape{3, preset.z_dim});
        CHECK(all_finite(stats.mu));
        CHECK(all_finite(stats.log_var));

        CHECK_THROWS_AS(model.encode(nullptr, Tensor<float>::zeros({3, 1, 27, 27})), ShapeError);
    }
}

TEST_CASE("zero input with zero heads encodes to mu=0, log_var=0") {
    Vae<float> model(ModelPreset::cnn_main(), 123);
    auto zero_out = [](DenseLayer<float>& l) {
        std::fill(l.W.data(), l.W.data() + l.W.numel(), 0.0f);
        std::fill(l.b.data(), l.b.data() + l.b.numel(), 0.0f);
    };
    zero_out(model.head_mu());
    zero_out(model.head_log_var());
    auto stats = model.encode(nullptr, Tensor<float>::zeros({2, 1, 28, 28}));
    for (auto v : stats.mu.values()) CHECK(v == 0.0f);
    for (auto v : stats.log_var.values()) CHECK(v == 0.0f);
}

TEST_CASE("decoder output contract") {
    for (PresetId id : {PresetId::cnn_main, PresetId::toy_dense_2d}) {
        ModelPreset preset = id == PresetId::cnn_main
                                 ? ModelPreset::cnn_main()
                                 : ModelPreset::toy_dense_2d(Activation::leaky_relu);
        Vae<float> model(preset, 11);
        Rng rng(9);
        Tensor<float> z = Tensor<float>::randn({4, preset.z_dim}, rng, 2.0);
        Tensor<float> a = model.decode(nullptr, z);
        Tensor<float> b = model.decode(nullptr, z);
        REQUIRE(a.shape() == Shape{4, 1, 28, 28});
        for (int64_t i = 0; i < a.numel(); ++i) {
            REQUIRE(a.data()[i] > 0.0f);
            REQUIRE(a.data()[i] < 1.0f);
            REQUIRE(a.data()[i] == b.data()[i]);
        }
        CHECK_THROWS_AS(model.decode(nullptr, Tensor<float>::zeros({4, preset.z_dim + 1})),
                        ShapeError);
    }
}

TEST_CASE("same weight seed builds identical models") {
    Vae<float> a(ModelPreset::cnn_main(), 99);
    Vae<float> b(ModelPreset::cnn_main(), 99);
    auto pa = a.parameters(), pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(std::equal(pa[i].values().begin(), pa[i].values().end(), pb[i].values().begin()));
    }
}
