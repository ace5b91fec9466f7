#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "ltsm/fbm.hpp"
#include "ltsm/stats.hpp"

using namespace ltsm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double closed_form_CH(double H) {
    return std::tgamma(H + 0.5) * std::tgamma(2.0 - 2.0 * H) / (2.0 * H * std::tgamma(1.5 - H));
}

struct Moments {
    double var_a = 0.0, var_b = 0.0, cov = 0.0;
};

// Sample second moments of (values[ia], values[ib]) over `paths` spectral draws.
Moments spectral_moments(const FbmParams& p, std::size_t ia, std::size_t ib, std::size_t paths, std::uint64_t seed) {
    SpectralFbmGenerator gen(p);
    std::vector<double> a(p.N + 1), b(p.N + 1);
    Moments m;
    RngStream rng(seed, 0);
    for (std::size_t r = 0; r < paths / 2; ++r) {
        gen.generate_pair(rng, a, b);
        for (const auto* v : {&a, &b}) {
            m.var_a += (*v)[ia] * (*v)[ia];
            m.var_b += (*v)[ib] * (*v)[ib];
            m.cov += (*v)[ia] * (*v)[ib];
        }
    }
    const double n = static_cast<double>(2 * (paths / 2));
    m.var_a /= n;
    m.var_b /= n;
    m.cov /= n;
    return m;
}

}  // namespace

TEST_CASE("fbm_cov examples", "[fbm]") {
    CHECK_THAT(fbm_cov(0.3, 0.8, 0.5), WithinAbs(0.3, 1e-15));
    CHECK_THAT(fbm_cov(0.8, 0.3, 0.5), WithinAbs(0.3, 1e-15));
    CHECK_THAT(fbm_cov(1.0, 1.0, 0.7), WithinAbs(1.0, 1e-15));
    CHECK_THAT(fbm_cov(0.25, 1.0, 0.75), WithinAbs(0.5 * (1.0 + std::pow(0.25, 1.5) - std::pow(0.75, 1.5)), 1e-15));
    CHECK_THAT(fbm_cov(0.25, 1.0, 0.75), WithinAbs(0.23774, 1e-5));
    CHECK_THAT(fbm_cov(1.0, 1.0, 0.3, 2.5), WithinAbs(2.5, 1e-15));
}

TEST_CASE("FbmParams validation", "[fbm]") {
    CHECK_THROWS_AS((FbmParams{1.0, 1.0, 64, 1.0}.validate()), ParameterError);
    CHECK_THROWS_AS((FbmParams{0.5, 0.0, 64, 1.0}.validate()), ParameterError);
    CHECK_THROWS_AS((FbmParams{0.5, 1.0, 100, 1.0}.validate(true)), ParameterError);
    CHECK_NOTHROW((FbmParams{0.5, 1.0, 100, 1.0}.validate()));
}

TEST_CASE("spectral Brownian increments are white", "[fbm]") {
    FbmParams p{0.5, 1.0, 4096, 1.0};
    RngStream rng(1, 0);
    double num = 0.0, den = 0.0;
    for (int r = 0; r < 20; ++r) {
        const auto path = generate_fbm_spectral(p, rng);
        CHECK(path.values[0] == 0.0);
        for (std::size_t j = 1; j < p.N; ++j) {
            const double d0 = path.values[j] - path.values[j - 1];
            const double d1 = path.values[j + 1] - path.values[j];
            num += d0 * d1;
            den += d0 * d0;
        }
    }
    CHECK(std::abs(num / den) < 3.0 / std::sqrt(20.0 * 4096.0));
}

TEST_CASE("spectral covariance at H = 0.7", "[fbm]") {
    FbmParams p{0.7, 1.0, 256, 1.0};
    const auto m = spectral_moments(p, 128, 256, 10000, 2);
    CHECK_THAT(m.cov, WithinRel(fbm_cov(0.5, 1.0, 0.7), 0.05));
    CHECK_THAT(m.var_b, WithinRel(1.0, 0.05));
}

TEST_CASE("spectral terminal variance is sigma2 T^2H", "[fbm]") {
    for (double H : {0.3, 0.5, 0.8}) {
        FbmParams p{H, 2.0, 128, 3.0};
        const auto m = spectral_moments(p, 64, 128, 10000, 3);
        const double target = 2.0 * std::pow(3.0, 2.0 * H);
        INFO("H=" << H);
        // variance of a sample variance of Gaussians is 2 var^2 / n
        CHECK_THAT(m.var_b, WithinAbs(target, 3.0 * target * std::sqrt(2.0 / 10000.0)));
    }
}

TEST_CASE("spectral self-similarity of the variance", "[fbm]") {
    const double H = 0.7;
    FbmParams p{H, 1.0, 256, 1.0};
    // B(1/4), B(1/2), B(1)
    const auto m1 = spectral_moments(p, 64, 128, 20000, 4);
    const auto m2 = spectral_moments(p, 64, 256, 20000, 5);
    const double se = std::sqrt(2.0 / 20000.0);
    CHECK_THAT(m1.var_b / m1.var_a, WithinRel(std::pow(2.0, 2.0 * H), 3.0 * std::sqrt(2.0) * se));
    CHECK_THAT(m2.var_b / m2.var_a, WithinRel(std::pow(4.0, 2.0 * H), 3.0 * std::sqrt(2.0) * se));
}

TEST_CASE("spectral increments are stationary", "[fbm]") {
    FbmParams p{0.7, 1.0, 256, 1.0};
    SpectralFbmGenerator gen(p);
    std::vector<double> a(p.N + 1), b(p.N + 1);
    std::vector<double> inc, base;
    RngStream rng(6, 0);
    for (int r = 0; r < 5000; ++r) {
        gen.generate_pair(rng, a, b);
        inc.push_back(a[192] - a[128]);  // B(0.75) - B(0.5)
        base.push_back(b[64]);           // B(0.25)
    }
    CHECK(ks_two_sample(inc, base).p_value > 0.01);
}

TEST_CASE("kernel_KH examples", "[fbm]") {
    CHECK(kernel_KH(2.0, 0.7, 0.5) == 1.0);
    CHECK(kernel_KH(1.0, 2.0, 0.7) == 0.0);
    CHECK(kernel_KH(1.0, 1.0, 0.7) == 0.0);
    CHECK(kernel_KH(1.0, 0.5, 0.7) > 0.0);
}

TEST_CASE("kernel_KH scaling identity on random triples", "[fbm]") {
    RngStream rng(7, 0);
    for (int i = 0; i < 100; ++i) {
        const double H = 0.05 + 0.9 * rng.uniform();
        const double a = 0.1 + 4.0 * rng.uniform();
        const double u = 0.1 + 2.0 * rng.uniform();
        const double w = a * u * rng.uniform();
        const double lhs = kernel_KH(a * u, w, H);
        const double rhs = std::pow(a, H - 0.5) * kernel_KH(u, w / a, H);
        INFO("H=" << H << " a=" << a << " u=" << u << " w=" << w);
        CHECK_THAT(lhs, WithinAbs(rhs, 1e-8 * std::max(1.0, std::abs(rhs))));
    }
}

TEST_CASE("kernel_norm_constant", "[fbm]") {
    CHECK(kernel_norm_constant(0.5) == 1.0);
    for (double H : {0.3, 0.7}) {
        INFO("H=" << H);
        CHECK_THAT(kernel_norm_constant(H), WithinRel(closed_form_CH(H), 1e-8));
    }
    CHECK_THAT(kernel_norm_constant(0.3), WithinAbs(1.8750709110, 1e-9));
    CHECK_THAT(kernel_norm_constant(0.7), WithinAbs(0.8388929719, 1e-9));
}

TEST_CASE("kernel norm scales as C_H s^2H", "[fbm]") {
    for (double H : {0.3, 0.7}) {
        boost::math::quadrature::tanh_sinh<double> ts;
        const double s = 2.0;
        const double norm2 = ts.integrate(
            [H, s](double w) {
                const double k = kernel_KH(s, w, H);
                return k * k;
            },
            0.0, s, 1e-10);
        INFO("H=" << H);
        CHECK_THAT(norm2, WithinRel(kernel_norm_constant(H) * std::pow(s, 2.0 * H), 1e-6));
    }
}

TEST_CASE("volterra at H = 1/2 is Brownian motion", "[fbm]") {
    FbmParams p{0.5, 1.0, 64, 1.0};
    VolterraGrid grid(p);
    for (std::size_t k = 1; k <= p.N; ++k)
        for (std::size_t i = 0; i < k; ++i) REQUIRE(grid.kernel(k, i) == 1.0);
    RngStream a(8, 0), b(8, 0);
    const auto path = generate_fbm_volterra(grid, a);
    double acc = 0.0;
    const double sd = std::sqrt(p.dt());
    for (std::size_t k = 1; k <= p.N; ++k) {
        acc += sd * b.normal();
        CHECK_THAT(path.values[k], WithinAbs(acc, 1e-12));
    }
}

TEST_CASE("volterra terminal variance at H = 0.7", "[fbm]") {
    FbmParams p{0.7, 1.0, 4096, 1.0};
    VolterraTerminal term(p);
    CHECK_THAT(term.variance(), WithinRel(1.0, 0.03));
    RngStream rng(9, 0);
    double s2 = 0.0;
    for (int r = 0; r < 10000; ++r) {
        const double v = term.draw(rng);
        s2 += v * v;
    }
    CHECK_THAT(s2 / 10000.0, WithinRel(1.0, 0.03 + 3.0 * std::sqrt(2.0 / 10000.0)));
}

TEST_CASE("volterra and spectral terminal laws agree", "[fbm]") {
    for (double H : {0.3, 0.7}) {
        FbmParams p{H, 1.0, 1024, 1.0};
        VolterraTerminal term(p);
        SpectralFbmGenerator gen(p);
        std::vector<double> a(p.N + 1), b(p.N + 1);
        std::vector<double> x, y;
        RngStream r1(10, 0), r2(10, 1);
        for (int r = 0; r < 2500; ++r) {
            x.push_back(term.draw(r1));
            x.push_back(term.draw(r1));
            gen.generate_pair(r2, a, b);
            y.push_back(a[p.N]);
            y.push_back(b[p.N]);
        }
        INFO("H=" << H);
        CHECK(ks_two_sample(x, y).p_value > 0.01);
    }
}

TEST_CASE("volterra path matches its own terminal draw", "[fbm]") {
    FbmParams p{0.3, 1.0, 128, 1.0};
    VolterraGrid grid(p);
    RngStream rng(11, 0);
    std::vector<double> x;
    for (int r = 0; r < 2000; ++r) x.push_back(generate_fbm_volterra(grid, rng).values[p.N]);
    double s2 = 0.0;
    for (double v : x) s2 += v * v;
    CHECK_THAT(s2 / 2000.0, WithinAbs(VolterraTerminal(p).variance(), 3.0 * std::sqrt(2.0 / 2000.0)));
}

TEST_CASE("fbm path CSV has a versioned header", "[fbm]") {
    FbmParams p{0.5, 1.0, 4, 1.0};
    RngStream rng(12, 0);
    std::ostringstream os;
    write_csv(os, generate_fbm_spectral(p, rng));
    const auto s = os.str();
    CHECK(s.rfind("# ltsm fbm-path v1", 0) == 0);
    CHECK(s.find("t,value\n") != std::string::npos);
}
