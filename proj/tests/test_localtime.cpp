#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "ltsm/localtime.hpp"
#include "ltsm/stats.hpp"

using namespace ltsm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

FbmPath linear_path(std::size_t N) {
    FbmPath p{FbmParams{0.5, 1.0, N, 1.0}, std::vector<double>(N + 1)};
    for (std::size_t j = 0; j <= N; ++j) p.values[j] = static_cast<double>(j) / static_cast<double>(N);
    return p;
}

FbmPath brownian(std::size_t N, std::uint64_t seed, std::uint64_t idx, double T = 1.0) {
    RngStream rng(seed, idx);
    return generate_fbm_spectral(FbmParams{0.5, 1.0, N, T}, rng);
}

}  // namespace

TEST_CASE("linear path has unit local time on its range", "[localtime]") {
    const auto path = linear_path(4096);
    const double eps = 0.01;
    std::vector<double> xg;
    for (int i = -20; i <= 120; ++i) xg.push_back(0.01 * i);
    const double t[1] = {1.0};
    const auto f = estimate_local_time(path, xg, t, eps);
    for (std::size_t i = 0; i < xg.size(); ++i) {
        const double x = xg[i];
        INFO("x=" << x);
        // the box holds 2 eps / dt grid points up to one point either way
        if (x > 2 * eps && x < 1.0 - 2 * eps) CHECK_THAT(f.at(i, 0), WithinAbs(1.0, path.params.dt() / eps));
        if (x < -2 * eps || x > 1.0 + 2 * eps) CHECK(f.at(i, 0) == 0.0);
    }
    CHECK_THAT(alpha_energy(f, 1.5, 0), WithinAbs(1.0, 0.03));
    CHECK_THAT(alpha_energy(f, 0.7, 0), WithinAbs(1.0, 0.03));
}

TEST_CASE("occupation identity on Brownian paths", "[localtime]") {
    const double tg[3] = {0.25, 0.5, 1.0};
    for (std::uint64_t r = 0; r < 10; ++r) {
        const auto path = brownian(16384, 1, r);
        const auto f = estimate_local_time(path, tg);
        for (std::size_t j = 0; j < 3; ++j) {
            INFO("path " << r << " t=" << tg[j]);
            CHECK_THAT(occupation_mass(f, j), WithinRel(tg[j], 0.02));
        }
        CHECK_THAT(alpha_energy(f, 1.0, 2), WithinRel(1.0, 0.02));
    }
}

TEST_CASE("level_local_time matches the field column", "[localtime]") {
    const auto path = brownian(4096, 2, 0);
    const double tg[4] = {0.1, 0.33, 0.5, 1.0};
    const double eps = default_bandwidth(path.params);
    const auto xg = default_x_grid(path.values, eps);
    const auto f = estimate_local_time(path, xg, tg, eps);
    for (std::size_t i = 0; i < xg.size(); i += 3) {
        const auto lv = level_local_time(path, xg[i], tg, eps);
        for (std::size_t j = 0; j < 4; ++j) CHECK_THAT(lv[j], WithinAbs(f.at(i, j), 1e-12));
    }
}

TEST_CASE("local time is monotone in t and supported on the path range", "[localtime]") {
    const auto path = brownian(4096, 3, 0);
    std::vector<double> tg;
    for (int k = 0; k <= 40; ++k) tg.push_back(0.025 * k);
    const auto f = estimate_local_time(path, tg);
    double mx = 0.0;
    for (double v : path.values) mx = std::max(mx, std::abs(v));
    bool monotone = true, nonneg = true, support = true;
    for (std::size_t i = 0; i < f.x_grid.size(); ++i)
        for (std::size_t j = 0; j < tg.size(); ++j) {
            nonneg &= f.at(i, j) >= 0.0;
            if (j + 1 < tg.size()) monotone &= f.at(i, j) <= f.at(i, j + 1);
            if (std::abs(f.x_grid[i]) > mx + f.bandwidth) support &= f.at(i, j) == 0.0;
        }
    CHECK(monotone);
    CHECK(nonneg);
    CHECK(support);
    const double t1[1] = {1.0};
    CHECK(level_local_time(path, mx + 1.0, t1, f.bandwidth)[0] == 0.0);
}

TEST_CASE("Levy identity for l(0, 1)", "[localtime]") {
    const auto rep = levy_check(5000, 4, 16384, 100000, 0.01, 0.02, 1, 0.25);
    INFO("p=" << rep.statistic);
    CHECK(rep.pass);
}

TEST_CASE("default bandwidth biases l(0, 1) low by about eps / 2", "[localtime]") {
    const FbmParams p{0.5, 1.0, 16384, 1.0};
    const double eps = default_bandwidth(p);
    const double t1[1] = {1.0};
    std::vector<double> wide, narrow;
    for (std::uint64_t r = 0; r < 4000; ++r) {
        const auto path = brownian(16384, 14, r);
        wide.push_back(level_local_time(path, 0.0, t1, eps)[0]);
        narrow.push_back(level_local_time(path, 0.0, t1, 0.25 * eps)[0]);
    }
    // same paths, so the difference has little noise
    std::vector<double> d(wide.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = narrow[i] - wide[i];
    const auto m = mean_and_se(d);
    INFO("mean shift=" << m.mean << " se=" << m.se << " expected=" << 0.375 * eps);
    CHECK(std::abs(m.mean - 0.375 * eps) <= 3.0 * m.se + 0.002);
}

TEST_CASE("mean of l(0, t) grows along t", "[localtime]") {
    const double tg[4] = {1.0, 2.0, 4.0, 8.0};
    std::vector<double> mean(4, 0.0);
    const int paths = 400;
    for (int r = 0; r < paths; ++r) {
        const auto path = brownian(8192, 5, static_cast<std::uint64_t>(r), 8.0);
        const auto l = level_local_time(path, 0.0, tg, default_bandwidth(path.params));
        for (int j = 0; j < 4; ++j) mean[j] += l[j] / paths;
    }
    for (int j = 0; j < 3; ++j) CHECK(mean[j] < mean[j + 1]);
    // E l(0, t) = sqrt(2 t / pi) for Brownian motion
    CHECK_THAT(mean[3], WithinRel(std::sqrt(16.0 / std::numbers::pi), 0.1));
}

TEST_CASE("scale_of_Y at alpha 1 equals t", "[localtime]") {
    const double tg[3] = {0.25, 0.5, 1.0};
    for (double H : {0.3, 0.7}) {
        const auto s = scale_of_Y(1.0, FbmParams{H, 1.0, 1024, 1.0}, tg, 50, 6);
        for (const auto& e : s) {
            INFO("H=" << H << " t=" << e.t);
            CHECK_THAT(e.scale, WithinRel(e.t, 0.02));
        }
    }
}

TEST_CASE("scale_of_Y scales with t^H'", "[localtime]") {
    // one horizon per call, so the default bandwidth follows the horizon
    const double alpha = 1.5, H = 0.5;
    const double hp = hurst_prime(alpha, H);
    std::vector<ScaleEstimate> s;
    for (double t : {0.25, 1.0, 4.0}) {
        const double tg[1] = {t};
        s.push_back(scale_of_Y(alpha, FbmParams{H, 1.0, 2048, t}, tg, 2000, 7)[0]);
    }
    for (std::size_t j : {0u, 2u}) {
        const double ratio = s[j].scale / s[1].scale;
        const double se = ratio * std::hypot(s[j].standard_error / s[j].scale, s[1].standard_error / s[1].scale);
        INFO("t=" << s[j].t << " ratio=" << ratio << " se=" << se);
        CHECK(std::abs(ratio - std::pow(s[j].t, hp)) <= 3.0 * se);
    }
}

TEST_CASE("scale_of_Y is reproducible across seeds", "[localtime]") {
    const double tg[1] = {1.0};
    const FbmParams p{0.5, 1.0, 1024, 1.0};
    const auto a = scale_of_Y(1.5, p, tg, 1000, 8);
    const auto b = scale_of_Y(1.5, p, tg, 1000, 9);
    CHECK(a[0].scale > 0.0);
    CHECK(std::abs(a[0].scale - b[0].scale) <= 2.0 * std::hypot(a[0].standard_error, b[0].standard_error));
}

TEST_CASE("scale_of_Y does not depend on the thread count", "[localtime]") {
    const double tg[2] = {0.5, 1.0};
    const FbmParams p{0.7, 1.0, 512, 1.0};
    ScaleOptions one, three;
    three.threads = 3;
    const auto a = scale_of_Y(1.2, p, tg, 31, 10, one);
    const auto b = scale_of_Y(1.2, p, tg, 31, 10, three);
    for (std::size_t j = 0; j < 2; ++j) CHECK(a[j].scale == b[j].scale);
}

TEST_CASE("holder_modulus examples", "[localtime]") {
    std::vector<double> t, l, z;
    for (int k = 0; k <= 50; ++k) {
        t.push_back(0.01 * k);
        l.push_back(0.01 * k);
        z.push_back(0.0);
    }
    const auto st = holder_modulus(t, l, 0.5);
    CHECK(std::isfinite(st.K_hat));
    const double largest = 0.5 / (std::sqrt(0.5) * std::sqrt(std::log(2.0)));
    CHECK_THAT(st.K_hat, WithinRel(largest, 1e-12));
    CHECK(holder_modulus(t, z, 0.5).K_hat == 0.0);
    CHECK_THROWS_AS(holder_modulus(std::vector<double>{0.0, 0.7}, std::vector<double>{0.0, 1.0}, 0.5), ParameterError);
}

TEST_CASE("holder statistic is stable under refinement", "[localtime]") {
    std::vector<double> tg;
    for (int k = 0; k <= 64; ++k) tg.push_back(0.5 * k / 64.0);
    std::vector<double> coarse, fine;
    for (std::uint64_t r = 0; r < 100; ++r) {
        // one Brownian path at two resolutions: the coarse path keeps every other point
        RngStream rng(11, r);
        const FbmParams pf{0.5, 1.0, 8192, 1.0};
        const auto path = generate_fbm_spectral(pf, rng);
        FbmPath half{FbmParams{0.5, 1.0, 4096, 1.0}, std::vector<double>(4097)};
        for (std::size_t j = 0; j <= 4096; ++j) half.values[j] = path.values[2 * j];
        const double x = 0.0;
        const auto lf = level_local_time(path, x, tg, default_bandwidth(pf));
        const auto lc = level_local_time(half, x, tg, default_bandwidth(half.params));
        fine.push_back(holder_modulus(tg, lf, 0.5).K_hat);
        coarse.push_back(holder_modulus(tg, lc, 0.5).K_hat);
    }
    const double mf = median(fine), mc = median(coarse);
    INFO("median fine=" << mf << " coarse=" << mc);
    CHECK(std::abs(mf - mc) / mc < 0.25);
}

TEST_CASE("scaling_check mean ratio at H = 1/2", "[localtime]") {
    const auto rep = scaling_check(0.5, 4.0, 1000, 12, 0.01, 2048);
    INFO("ratio=" << rep.get("mean_ratio") << " z=" << rep.get("mean_ratio_z"));
    CHECK(std::abs(rep.get("mean_ratio_z")) <= 3.0);
    CHECK(rep.pass);
}

TEST_CASE("scaling_check with c = 1 compares equal laws", "[localtime]") {
    const auto rep = scaling_check(0.7, 1.0, 1000, 13, 0.01, 1024);
    CHECK(rep.get("ks_distance") < 0.07);
    CHECK(std::abs(rep.get("mean_ratio_z")) <= 3.0);
}

TEST_CASE("local time CSV header", "[localtime]") {
    const auto path = linear_path(8);
    std::vector<double> xg{0.0, 0.5, 1.0};
    const double t[1] = {1.0};
    std::ostringstream os;
    write_csv(os, estimate_local_time(path, xg, t, 0.25));
    CHECK(os.str().rfind("# ltsm", 0) == 0);
}
