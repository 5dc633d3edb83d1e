#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>

#include "s5/fft.hpp"
#include "s5/s4.hpp"

using namespace s5;

namespace {

Tensor random_tensor(std::vector<int> dims, Rng& rng, double scale = 1.0) {
    std::vector<double> v(static_cast<size_t>(checked_size(dims)));
    for (double& x : v) {
        x = rng.normal() * scale;
    }
    return Tensor::from_data(std::move(dims), std::move(v));
}

SsmLayerParams scalar_params(double a, double b, double c, double delta) {
    SsmLayerParams p;
    p.a = Tensor::from_data({1, 1}, {a});
    p.b_in = Tensor::from_data({1, 1}, {b});
    p.c_out = Tensor::from_data({1, 1}, {c});
    p.log_delta = Tensor::from_data({1}, {std::log(delta)});
    return p;
}

double rel_inf_error(const Tensor& got, const Tensor& want) {
    double num = 0.0, den = 1.0;
    for (int64_t i = 0; i < got.size(); ++i) {
        num = std::max(num, std::fabs(got[i] - want[i]));
        den = std::max(den, std::fabs(want[i]));
    }
    return num / den;
}

} // namespace

TEST_CASE("hippo_init: N=1, N=3 entries and upper-triangle zeros") {
    Tensor a1 = hippo_init(1);
    CHECK(a1.item() == -1.0);

    Tensor a3 = hippo_init(3);
    CHECK(a3.at2(1, 0) == doctest::Approx(-std::sqrt(3.0)).epsilon(1e-12));
    CHECK(a3.at2(2, 1) == doctest::Approx(-std::sqrt(15.0)).epsilon(1e-12));
    CHECK(a3.at2(2, 2) == -3.0);
    CHECK(a3.at2(0, 2) == 0.0);

    Tensor a8 = hippo_init(8);
    for (int n = 0; n < 8; ++n) {
        for (int k = n + 1; k < 8; ++k) {
            CHECK(a8.at2(n, k) == 0.0);
        }
    }
    CHECK_THROWS_AS(hippo_init(0), ArgError);
}

TEST_CASE("discretize: A=0, hand bilinear values, delta->0 limit") {
    {
        auto [abar, bbar] = discretize(Tensor::from_data({1, 1}, {0.0}),
                                       Tensor::from_data({1}, {1.0}), Tensor::scalar(0.5));
        CHECK(abar.item() == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(bbar.item() == doctest::Approx(0.5).epsilon(1e-15));
    }
    {
        auto [abar, bbar] = discretize(Tensor::from_data({1, 1}, {-1.0}),
                                       Tensor::from_data({1}, {1.0}), Tensor::scalar(0.5));
        CHECK(abar.item() == doctest::Approx(0.6).epsilon(1e-15));
        CHECK(bbar.item() == doctest::Approx(0.4).epsilon(1e-15));
    }
    {
        Tensor a = hippo_init(4);
        auto [abar, bbar] = discretize(a, Tensor::full({4}, 1.0), Tensor::scalar(1e-8));
        double dist = 0.0;
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                dist = std::max(dist, std::fabs(abar.at2(i, j) - (i == j ? 1.0 : 0.0)));
            }
        }
        CHECK(dist < 1e-6); // ||Abar - I|| = O(delta)
        (void)bbar;
    }
}

TEST_CASE("materialize_kernel: nilpotent and geometric hand recursions") {
    // a = -2/delta makes abar = 0; bbar = 0.25, so c = 4 puts a unit impulse
    // in the first tap.
    SsmLayerParams nilpotent = scalar_params(-2.0 / 0.5, 1.0, 4.0, 0.5);
    S4Kernel k1 = materialize_kernel(nilpotent, 4);
    CHECK(k1.kbar.at2(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    for (int i = 1; i < 4; ++i) {
        CHECK(std::fabs(k1.kbar.at2(0, i)) < 1e-15);
    }

    // abar=0.6, bbar=0.4 from the discretize example.
    SsmLayerParams geo = scalar_params(-1.0, 1.0, 1.0, 0.5);
    S4Kernel kg = materialize_kernel(geo, 3);
    CHECK(kg.kbar.at2(0, 0) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(kg.kbar.at2(0, 1) == doctest::Approx(0.24).epsilon(1e-12));
    CHECK(kg.kbar.at2(0, 2) == doctest::Approx(0.144).epsilon(1e-12));

    CHECK_THROWS_AS(materialize_kernel(geo, 0), ArgError);
}

TEST_CASE("materialize_kernel: gradients through the recursion vs finite differences") {
    Rng rng(17, 4);
    SsmLayerParams p = init_ssm_params(4, 2, rng);
    const int len = 6;

    auto loss_with = [&](const SsmLayerParams& q) {
        S4Kernel k = materialize_kernel(q, len);
        return sum(mul(k.kbar, k.kbar));
    };
    double err_a = finite_diff_check(
        [&](const Tensor& t) {
            SsmLayerParams q = p;
            q.a = t;
            return loss_with(q);
        },
        p.a, 1e-6);
    CHECK(err_a < 1e-4);
    double err_b = finite_diff_check(
        [&](const Tensor& t) {
            SsmLayerParams q = p;
            q.b_in = t;
            return loss_with(q);
        },
        p.b_in, 1e-6);
    CHECK(err_b < 1e-4);
    double err_ld = finite_diff_check(
        [&](const Tensor& t) {
            SsmLayerParams q = p;
            q.log_delta = t;
            return loss_with(q);
        },
        p.log_delta, 1e-6);
    CHECK(err_ld < 1e-4);
}

TEST_CASE("fft_conv: unit impulse, unit delay, direct-convolution oracle") {
    Tensor u = Tensor::from_data({3, 1}, {1, 2, 3});
    S4Kernel impulse{Tensor::from_data({1, 3}, {1, 0, 0})};
    Tensor y = fft_conv(u, impulse);
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(y[2] == doctest::Approx(3.0).epsilon(1e-12));

    S4Kernel delay{Tensor::from_data({1, 3}, {0, 1, 0})};
    Tensor yd = fft_conv(u, delay);
    CHECK(std::fabs(yd[0]) < 1e-12);
    CHECK(yd[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(yd[2] == doctest::Approx(2.0).epsilon(1e-12));

    Rng rng(8, 8);
    const int l = 64;
    Tensor ur = random_tensor({l, 1}, rng);
    Tensor kr = random_tensor({1, l}, rng);
    Tensor got = fft_conv(ur, S4Kernel{kr});
    double max_err = 0.0;
    for (int i = 0; i < l; ++i) {
        double direct = 0.0;
        for (int j = 0; j <= i; ++j) {
            direct += kr[j] * ur[i - j];
        }
        max_err = std::max(max_err, std::fabs(got[i] - direct));
    }
    CHECK(max_err < 1e-10);

    CHECK_THROWS_AS(fft_conv(Tensor::zeros({4, 1}), delay), ShapeError);
}

TEST_CASE("fft_conv: gradients for both arguments vs finite differences") {
    Rng rng(9, 9);
    Tensor u = random_tensor({12, 2}, rng);
    Tensor kb = random_tensor({2, 12}, rng);
    Tensor w = random_tensor({12, 2}, rng);
    double err_u = finite_diff_check(
        [&](const Tensor& t) { return sum(mul(fft_conv(t, S4Kernel{kb}), w)); }, u, 1e-6);
    double err_k = finite_diff_check(
        [&](const Tensor& t) { return sum(mul(fft_conv(u, S4Kernel{t}), w)); }, kb, 1e-6);
    CHECK(err_u < 1e-6);
    CHECK(err_k < 1e-6);
}

TEST_CASE("s4_forward: zero input, LTI linearity, recurrence oracle") {
    Rng rng(21, 3);
    SsmLayerParams p = init_ssm_params(8, 2, rng);

    Tensor yz = s4_forward(p, Tensor::zeros({16, 2}));
    for (int64_t i = 0; i < yz.size(); ++i) {
        CHECK(std::fabs(yz[i]) < 1e-14);
    }

    Tensor u = random_tensor({16, 2}, rng);
    Tensor v = random_tensor({16, 2}, rng);
    Tensor lhs = s4_forward(p, add(scale(u, 2.5), scale(v, -1.25)));
    Tensor rhs = add(scale(s4_forward(p, u), 2.5), scale(s4_forward(p, v), -1.25));
    CHECK(rel_inf_error(lhs, rhs) < 1e-10);

    SsmLayerParams big = init_ssm_params(16, 4, rng);
    Tensor ub = random_tensor({256, 4}, rng);
    CHECK(rel_inf_error(s4_forward(big, ub), recurrent_scan(big, ub)) < 1e-8);
}

TEST_CASE("recurrent_scan: single step and impulse response") {
    Rng rng(5, 5);
    SsmLayerParams p = init_ssm_params(4, 3, rng);

    Tensor u1 = random_tensor({1, 3}, rng);
    Tensor y1 = recurrent_scan(p, u1);
    S4Kernel k = materialize_kernel(p, 1);
    for (int ch = 0; ch < 3; ++ch) {
        CHECK(y1.at2(0, ch) ==
              doctest::Approx(k.kbar.at2(ch, 0) * u1.at2(0, ch)).epsilon(1e-12));
    }

    const int l = 12;
    std::vector<double> imp(static_cast<size_t>(l) * 3, 0.0);
    for (int ch = 0; ch < 3; ++ch) {
        imp[static_cast<size_t>(ch)] = 1.0; // e0 in every channel
    }
    Tensor impulse = Tensor::from_data({l, 3}, std::move(imp));
    Tensor resp = recurrent_scan(p, impulse);
    S4Kernel kl = materialize_kernel(p, l);
    for (int ch = 0; ch < 3; ++ch) {
        for (int i = 0; i < l; ++i) {
            CHECK(resp.at2(i, ch) == doctest::Approx(kl.kbar.at2(ch, i)).epsilon(1e-9));
        }
    }
}

TEST_CASE("equivalence: fft path vs recurrent scan across 20 random configs") {
    const int state_dims[] = {2, 8, 32};
    const int channel_counts[] = {1, 4};
    const int lengths[] = {16, 256, 1024};
    for (uint64_t draw = 0; draw < 20; ++draw) {
        const int n = state_dims[draw % 3];
        const int d = channel_counts[(draw / 3) % 2];
        const int l = lengths[(draw / 6) % 3];
        Rng rng(draw + 100, 0);
        SsmLayerParams p = init_ssm_params(n, d, rng);
        Tensor u = random_tensor({l, d}, rng);
        const double err = rel_inf_error(s4_forward(p, u), recurrent_scan(p, u));
        if (err >= 1e-8) {
            FAIL("config N=", n, " D=", d, " L=", l, " err=", err);
        }
    }
    CHECK(true);
}

TEST_CASE("causality: perturbing u_j only changes outputs at k >= j") {
    Rng rng(33, 1);
    SsmLayerParams p = init_ssm_params(8, 2, rng);
    const int l = 32;
    Tensor u = random_tensor({l, 2}, rng);
    Tensor base = s4_forward(p, u);
    const int j = 11;
    std::vector<double> bumped = u.values();
    bumped[static_cast<size_t>(j) * 2 + 1] += 0.75;
    Tensor yb = s4_forward(p, Tensor::from_data({l, 2}, std::move(bumped)));
    for (int k = 0; k < j; ++k) {
        for (int ch = 0; ch < 2; ++ch) {
            CHECK(std::fabs(yb.at2(k, ch) - base.at2(k, ch)) < 1e-12);
        }
    }
    bool changed_after = false;
    for (int k = j; k < l; ++k) {
        changed_after = changed_after || yb.at2(k, 1) != base.at2(k, 1);
    }
    CHECK(changed_after);
}

TEST_CASE("s4_forward: parameter and input gradients vs finite differences") {
    Rng rng(77, 2);
    SsmLayerParams p = init_ssm_params(4, 2, rng);
    Tensor u = random_tensor({10, 2}, rng);
    Tensor w = random_tensor({10, 2}, rng);

    auto loss_with = [&](const SsmLayerParams& q) { return sum(mul(s4_forward(q, u), w)); };
    double err_a = finite_diff_check(
        [&](const Tensor& t) {
            SsmLayerParams q = p;
            q.a = t;
            return loss_with(q);
        },
        p.a, 1e-6);
    double err_b = finite_diff_check(
        [&](const Tensor& t) {
            SsmLayerParams q = p;
            q.b_in = t;
            return loss_with(q);
        },
        p.b_in, 1e-6);
    double err_c = finite_diff_check(
        [&](const Tensor& t) {
            SsmLayerParams q = p;
            q.c_out = t;
            return loss_with(q);
        },
        p.c_out, 1e-6);
    double err_d = finite_diff_check(
        [&](const Tensor& t) {
            SsmLayerParams q = p;
            q.log_delta = t;
            return loss_with(q);
        },
        p.log_delta, 1e-6);
    CHECK(err_a < 1e-4);
    CHECK(err_b < 1e-4);
    CHECK(err_c < 1e-4);
    CHECK(err_d < 1e-4);

    double err_u = finite_diff_check(
        [&](const Tensor& t) { return sum(mul(s4_forward(p, t), w)); }, u, 1e-6);
    CHECK(err_u < 1e-4);
}

TEST_CASE("hippo lower-triangularity preserved exactly at init") {
    Rng rng(3, 3);
    SsmLayerParams p = init_ssm_params(16, 4, rng);
    Tensor ref = hippo_init(16);
    for (int i = 0; i < 16; ++i) {
        for (int j = 0; j < 16; ++j) {
            CHECK(p.a.at2(i, j) == ref.at2(i, j));
        }
    }
}

TEST_CASE("fft primitives: inverse round trip, power-of-two contract") {
    Rng rng(4, 9);
    std::vector<std::complex<double>> buf(64);
    std::vector<std::complex<double>> orig(64);
    for (size_t i = 0; i < 64; ++i) {
        orig[i] = buf[i] = {rng.normal(), rng.normal()};
    }
    fft_inplace(buf, false);
    fft_inplace(buf, true);
    for (size_t i = 0; i < 64; ++i) {
        CHECK(std::abs(buf[i] - orig[i]) < 1e-12);
    }
    std::vector<std::complex<double>> bad(6);
    CHECK_THROWS_AS(fft_inplace(bad, false), ArgError);
}
