#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "ltsm/chaos.hpp"

using namespace ltsm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// He_n / n! written out from the Rodrigues formula.
double hermite_direct(int n, double x) {
    switch (n) {
        case 0: return 1.0;
        case 1: return x;
        case 2: return (x * x - 1.0) / 2.0;
        case 3: return (x * x * x - 3.0 * x) / 6.0;
        case 4: return (std::pow(x, 4) - 6.0 * x * x + 3.0) / 24.0;
        case 5: return (std::pow(x, 5) - 10.0 * std::pow(x, 3) + 15.0 * x) / 120.0;
        case 6: return (std::pow(x, 6) - 15.0 * std::pow(x, 4) + 45.0 * x * x - 15.0) / 720.0;
        default: return std::nan("");
    }
}

// E h_n(0, 1)^2 for Brownian motion and even n: (n-1)!!/n!! * 2 / (pi (n + 1)).
double brownian_second_moment_at_zero(std::size_t n) {
    double r = 1.0;
    for (std::size_t k = 2; k <= n; k += 2) r *= static_cast<double>(k - 1) / static_cast<double>(k);
    return r * 2.0 / (std::numbers::pi * static_cast<double>(n + 1));
}

FbmPath brownian(std::size_t N, std::uint64_t seed, std::uint64_t idx) {
    RngStream rng(seed, idx);
    return generate_fbm_spectral(FbmParams{0.5, 1.0, N, 1.0}, rng);
}

}  // namespace

TEST_CASE("hermite examples", "[chaos]") {
    for (double x : {-3.0, 0.0, 0.7, 10.0}) CHECK(hermite(0, x) == 1.0);
    CHECK(hermite(1, 1.0) == 1.0);
    CHECK(hermite(2, 0.0) == -0.5);
}

TEST_CASE("hermite matches the explicit polynomials and the recurrence", "[chaos]") {
    std::vector<double> all(31);
    for (double x = -2.0; x <= 2.0; x += 0.25) {
        hermite_all(30, x, all.data());
        for (int n = 0; n <= 6; ++n) {
            INFO("n=" << n << " x=" << x);
            CHECK_THAT(hermite(n, x), WithinAbs(hermite_direct(n, x), 1e-10));
        }
        for (std::size_t n = 1; n < 30; ++n) {
            CHECK(all[n + 1] == (x * all[n] - all[n - 1]) / static_cast<double>(n + 1));
            CHECK(all[n + 1] == hermite(n + 1, x));
        }
    }
}

TEST_CASE("expected_local_time examples", "[chaos]") {
    CHECK_THAT(expected_local_time(0.0, 1.0, 0.5), WithinAbs(std::sqrt(2.0 / std::numbers::pi), 1e-10));
    CHECK(expected_local_time(20.0, 1.0, 0.5) < 1e-80);
    CHECK(expected_local_time(8.0, 1.0, 0.3) < 1e-12);
    // Brownian closed form: int_0^t p_s(x) ds = 2 t p_t(x) - 2 |x| (1 - Phi(|x| / sqrt t))
    for (double x : {0.3, 1.0, 2.5}) {
        const double t = 1.7;
        const double pt = std::exp(-x * x / (2 * t)) / std::sqrt(2 * std::numbers::pi * t);
        const double tail = 0.5 * std::erfc(x / std::sqrt(2 * t));
        INFO("x=" << x);
        CHECK_THAT(expected_local_time(x, t, 0.5), WithinRel(2 * t * pt - 2 * x * tail, 1e-9));
    }
    // sigma rescaling: (1/sigma) h_0(x/sigma) with unit sigma
    CHECK_THAT(expected_local_time(0.6, 1.0, 0.7, 2.0), WithinRel(0.5 * expected_local_time(0.3, 1.0, 0.7), 1e-10));
}

TEST_CASE("expected_local_time matches the mean estimated local time", "[chaos]") {
    const std::vector<double> xs{0.0, 0.5, 1.0};
    const double t[1] = {1.0};
    std::vector<double> mean(3, 0.0);
    const int paths = 10000;
    for (int r = 0; r < paths; ++r) {
        // the box estimator is biased by about -eps/2 at the cusp x = 0; a fine grid keeps that small
        const auto path = brownian(65536, 1, static_cast<std::uint64_t>(r));
        for (std::size_t i = 0; i < 3; ++i)
            mean[i] += level_local_time(path, xs[i], t, default_bandwidth(path.params))[0] / paths;
    }
    for (std::size_t i = 0; i < 3; ++i) {
        INFO("x=" << xs[i]);
        CHECK_THAT(mean[i], WithinRel(expected_local_time(xs[i], 1.0, 0.5), 0.03));
    }
}

TEST_CASE("chaos_term of order zero is path free", "[chaos]") {
    const auto path = brownian(256, 2, 0);
    CHECK(chaos_term(path, 0, 0.4, 1.0) == expected_local_time(0.4, 1.0, 0.5));
    CHECK_THAT(chaos_term(path, 0, 0.0, 1.0), WithinAbs(std::sqrt(2.0 / std::numbers::pi), 1e-10));
    CHECK_THROWS_AS(chaos_term(path, 31, 0.0, 1.0), ParameterError);
}

TEST_CASE("h_1 vanishes at x = 0", "[chaos]") {
    for (std::uint64_t r = 0; r < 5; ++r) CHECK(chaos_term(brownian(512, 3, r), 1, 0.0, 1.0) == 0.0);
}

TEST_CASE("chaos_field agrees with chaos_term", "[chaos]") {
    RngStream rng(4, 0);
    const auto path = generate_fbm_spectral(FbmParams{0.7, 1.0, 512, 1.0}, rng);
    const std::vector<double> xg{-0.5, 0.0, 0.25, 1.0};
    const auto f = chaos_field(path, 5, xg, 0.8);
    for (std::size_t n = 0; n <= 5; ++n)
        for (std::size_t i = 0; i < xg.size(); ++i)
            CHECK_THAT(f.h[n][i], WithinAbs(chaos_term(path, n, xg[i], 0.8), 1e-12));
    const auto s = reconstruct_local_time(path, 0, xg, 0.8);
    for (std::size_t i = 0; i < xg.size(); ++i) CHECK(s[i] == expected_local_time(xg[i], 0.8, 0.7));
}

TEST_CASE("second moments at x = 0 match the Brownian closed form", "[chaos]") {
    const auto m = chaos_second_moments(12, 0.0, 1.0, 0.5);
    for (std::size_t n = 0; n <= 12; ++n) {
        INFO("n=" << n);
        if (n % 2)
            CHECK_THAT(m[n], WithinAbs(0.0, 1e-14));
        else
            CHECK_THAT(m[n], WithinRel(brownian_second_moment_at_zero(n), 1e-7));
    }
}

TEST_CASE("tail bound at m = 0 recovers the local time variance", "[chaos]") {
    // sum_{n >= 1} E h_n(0, 1)^2 = Var l(0, 1) = 1 - 2/pi
    const auto b = chaos_tail_bound(0, 0.0, 1.0, 0.5);
    CHECK_THAT(b.delta, WithinRel(1.0 - 2.0 / std::numbers::pi, 0.02));
    CHECK(b.remainder > 0.0);
}

TEST_CASE("tail bound decreases strictly in m", "[chaos]") {
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m <= 12; ++m) {
        const auto b = chaos_tail_bound(m, 0.5, 1.0, 0.5);
        INFO("m=" << m);
        CHECK(b.delta < prev);
        prev = b.delta;
    }
}

TEST_CASE("Monte Carlo moments of chaos terms", "[chaos]") {
    const std::size_t paths = 2000, M = 3;
    const double x = 0.5;
    std::vector<std::vector<double>> h(M + 1, std::vector<double>(paths));
    const std::vector<double> xg{x};
    for (std::size_t r = 0; r < paths; ++r) {
        const auto f = chaos_field(brownian(1024, 5, r), M, xg, 1.0);
        for (std::size_t n = 1; n <= M; ++n) h[n][r] = f.h[n][0];
    }
    const auto exact = chaos_second_moments(M, x, 1.0, 0.5);
    for (std::size_t n = 1; n <= M; ++n) {
        const auto ms = mean_and_se(h[n]);
        INFO("n=" << n << " mean=" << ms.mean << " se=" << ms.se);
        CHECK(std::abs(ms.mean) <= 3.0 * ms.se);
        std::vector<double> sq(paths);
        for (std::size_t r = 0; r < paths; ++r) sq[r] = h[n][r] * h[n][r];
        const auto v = mean_and_se(sq);
        INFO("E h^2 mc=" << v.mean << " se=" << v.se << " quadrature=" << exact[n]);
        CHECK(std::abs(v.mean - exact[n]) <= 3.0 * v.se);
    }
    for (std::size_t a = 1; a <= M; ++a)
        for (std::size_t b = a + 1; b <= M; ++b) {
            std::vector<double> prod(paths);
            for (std::size_t r = 0; r < paths; ++r) prod[r] = h[a][r] * h[b][r];
            const auto c = mean_and_se(prod);
            INFO("cov(" << a << "," << b << ")=" << c.mean << " se=" << c.se);
            CHECK(std::abs(c.mean) <= 3.0 * c.se);
        }
}

TEST_CASE("partial sums far outside the path range stay near zero", "[chaos]") {
    const auto path = brownian(1024, 6, 0);
    const std::vector<double> xg{6.0};
    const auto f = chaos_field(path, 12, xg, 1.0);
    const auto b = chaos_tail_bound(0, 6.0, 1.0, 0.5);
    for (std::size_t m = 0; m <= 12; ++m) CHECK(std::abs(f.partial_sum(m)[0]) < 1e-6 + 10.0 * std::sqrt(b.delta));
}

TEST_CASE("W_0 vanishes at zero and has the quadrature scale", "[chaos]") {
    SeriesConfig cfg;
    cfg.alpha = 1.5;
    cfg.H = 0.5;
    cfg.J = 500;
    cfg.t_grid = {0.0, 0.25, 0.5, 1.0, 2.0};
    cfg.replicates = 2000;
    cfg.fbm = FbmParams{0.5, 1.0, 64, 2.0};
    cfg.seed = 7;
    const auto w = sample_Wn_paths(0, cfg);
    for (std::size_t r = 0; r < w.replicates; ++r) REQUIRE(w.at(r, 0) == 0.0);
    const auto oracle = sas_oracle(1.5, w0_scale(1.5, 1.0, 0.5), 50000, 8);
    const auto ks = ks_two_sample(w.at_time(1.0), oracle);
    INFO("p=" << ks.p_value);
    CHECK(ks.p_value > 0.01);
    const auto ss = self_similarity_check(w, 1.5, hurst_prime(1.5, 0.5), {0.25, 0.5, 1.0, 2.0});
    INFO("slope=" << ss.get("slope"));
    CHECK(ss.pass);
}

TEST_CASE("w0_scale at alpha 1 is t", "[chaos]") {
    CHECK_THAT(w0_scale(1.0, 1.0, 0.5), WithinRel(1.0, 1e-8));
    CHECK_THAT(w0_scale(1.0, 2.0, 0.7), WithinRel(2.0, 1e-8));
}

TEST_CASE("chaos field CSV header", "[chaos]") {
    const auto f = chaos_field(brownian(64, 9, 0), 2, std::vector<double>{0.0, 0.5}, 1.0);
    std::ostringstream os;
    write_csv(os, f);
    CHECK(os.str().rfind("# ltsm chaos-field v1", 0) == 0);
    CHECK(os.str().find("n,x,value\n") != std::string::npos);
}
