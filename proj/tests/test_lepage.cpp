#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "ltsm/lepage.hpp"

using namespace ltsm;
using Catch::Matchers::WithinAbs;

namespace {

SeriesConfig small_config(double alpha, double H, std::vector<double> t_grid, std::size_t reps, std::uint64_t seed) {
    SeriesConfig c;
    c.alpha = alpha;
    c.H = H;
    c.J = 200;
    c.t_grid = std::move(t_grid);
    c.replicates = reps;
    c.fbm = FbmParams{H, 1.0, 128, c.t_grid.back()};
    c.seed = seed;
    return c;
}

// Y(t) = t^H' Z with one SaS(1) draw Z per replicate.
YSample synthetic(double alpha, double hp, const std::vector<double>& tg, std::size_t reps, std::uint64_t seed) {
    YSample ys;
    ys.t_grid = tg;
    ys.replicates = reps;
    ys.alpha = alpha;
    ys.values.resize(reps * tg.size());
    RngStream rng(seed, 0);
    for (std::size_t r = 0; r < reps; ++r) {
        const double z = sample_sas_one(alpha, 1.0, rng);
        for (std::size_t k = 0; k < tg.size(); ++k) ys.values[r * tg.size() + k] = std::pow(tg[k], hp) * z;
    }
    return ys;
}

}  // namespace

TEST_CASE("Y vanishes at t = 0", "[lepage]") {
    const auto ys = sample_Y_paths(small_config(1.5, 0.5, {0.0, 0.5, 1.0}, 50, 1));
    for (std::size_t r = 0; r < ys.replicates; ++r) CHECK(ys.at(r, 0) == 0.0);
    CHECK(ys.J == 200);
}

TEST_CASE("a single zero term gives Y identically zero", "[lepage]") {
    auto cfg = small_config(1.5, 0.5, {0.5, 1.0}, 20, 2);
    cfg.J = 1;
    cfg.gaussian_tail = 0;
    auto zero = [](std::span<const double>, double, double, std::span<const double>, std::span<double> out) {
        for (auto& v : out) v = 0.0;
    };
    const auto ys = sample_Y_paths(cfg, zero);
    for (double v : ys.values) CHECK(v == 0.0);
}

TEST_CASE("sampler output does not depend on the thread count", "[lepage]") {
    auto cfg = small_config(1.2, 0.7, {0.25, 0.5, 1.0}, 23, 3);
    const auto a = sample_Y_paths(cfg);
    cfg.threads = 3;
    const auto b = sample_Y_paths(cfg);
    CHECK(a.values == b.values);
}

TEST_CASE("Y(1) is symmetric", "[lepage]") {
    const auto ys = sample_Y_paths(small_config(1.5, 0.5, {0.5, 1.0}, 2000, 4));
    std::vector<double> a, b;
    for (std::size_t r = 0; r < ys.replicates; ++r) (r % 2 ? a : b).push_back(r % 2 ? ys.at(r, 1) : -ys.at(r, 1));
    CHECK(ks_two_sample(a, b).p_value > 0.01);
}

TEST_CASE("indicator kernel gives unit-scale SaS", "[lepage]") {
    const auto rep = lepage_indicator_check(0.75, 5000, 10000, 5);
    INFO("p=" << rep.statistic << " D=" << rep.get("ks_distance"));
    CHECK(rep.pass);
}

TEST_CASE("indicator kernel with a doubled prefactor is rejected", "[lepage]") {
    IndicatorCheckOptions opt;
    opt.prefactor_multiplier = 2.0;
    const auto rep = lepage_indicator_check(0.75, 5000, 10000, 5, opt);
    CHECK_FALSE(rep.pass);
}

TEST_CASE("self-similarity on an exactly scaling sample", "[lepage]") {
    const std::vector<double> tg{0.25, 0.5, 1.0, 2.0};
    for (double alpha : {0.8, 1.0, 1.5}) {
        const double hp = alpha == 1.0 ? 1.0 : hurst_prime(alpha, 0.4);
        const auto ys = synthetic(alpha, hp, tg, 5000, 6);
        const auto rep = self_similarity_check(ys, alpha, hp);
        INFO("alpha=" << alpha << " slope=" << rep.get("slope"));
        CHECK_THAT(rep.get("slope"), WithinAbs(hp, 1e-9));
        CHECK(rep.pass);
    }
}

TEST_CASE("self_similarity_check needs a wide grid", "[lepage]") {
    const auto ys = synthetic(1.5, 0.8, {0.5, 1.0, 2.0}, 100, 7);
    CHECK_THROWS_AS(self_similarity_check(ys, 1.5, 0.8), ParameterError);
}

TEST_CASE("stationary increments and the negative control", "[lepage]") {
    const auto ys = sample_Y_paths(small_config(1.5, 0.5, {0.5, 1.0, 1.5}, 2000, 8));
    const auto zero_lag = stationary_increments_check(ys, 1.0, 0.0);
    CHECK(zero_lag.pass);
    const auto rep = stationary_increments_check(ys, 1.0, 0.5);
    INFO("p=" << rep.statistic);
    CHECK(rep.pass);
    CHECK_FALSE(stationary_increments_check(ys, 1.0, 0.5, 0.01, true).pass);
}

TEST_CASE("holder statistic of a zero replicate is zero", "[lepage]") {
    std::vector<double> tg;
    for (int k = 0; k <= 32; ++k) tg.push_back(k / 64.0);
    YSample ys;
    ys.t_grid = tg;
    ys.replicates = 2;
    ys.values.assign(2 * tg.size(), 0.0);
    for (std::size_t k = 0; k < tg.size(); ++k) ys.values[tg.size() + k] = std::sqrt(tg[k]);
    const auto h = holder_estimate_Y(ys, 0.5);
    CHECK(h.sup_statistic[0] == 0.0);
    CHECK(h.sup_statistic[1] > 0.0);
    CHECK_THAT(h.exponent[1], WithinAbs(0.5, 0.05));
}

TEST_CASE("equal laws are not reported as distinct", "[lepage]") {
    const std::vector<double> tg{1.0, 2.0};
    const auto a = sample_Y_paths(small_config(1.0, 0.5, tg, 1500, 9));
    const auto b = sample_Y_paths(small_config(1.0, 0.5, tg, 1500, 10));
    const auto rep = distinctness_check_alpha1(a, b, 1.0, 2.0);
    INFO("joint z=" << rep.get("max_joint_z") << " marginal z=" << rep.get("max_marginal_z"));
    CHECK(rep.get("distinct") == 0.0);
    CHECK(rep.get("marginal_distinct") == 0.0);
    CHECK_FALSE(rep.pass);
}

TEST_CASE("YSample CSV header", "[lepage]") {
    const auto ys = synthetic(1.5, 0.8, {0.5, 1.0}, 3, 11);
    std::ostringstream os;
    write_csv(os, ys);
    CHECK(os.str().rfind("# ltsm y-sample v1", 0) == 0);
}
