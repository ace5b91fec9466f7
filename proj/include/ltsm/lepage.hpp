#pragma once

// Truncated LePage series for the local-time stable motion and the statistical
// checks on its finite-dimensional laws.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ltsm/error.hpp"
#include "ltsm/fbm.hpp"
#include "ltsm/localtime.hpp"
#include "ltsm/parallel.hpp"
#include "ltsm/rng.hpp"
#include "ltsm/stable.hpp"
#include "ltsm/stats.hpp"

namespace ltsm {

/// sigma dt^H, the smallest bandwidth not flagged as undersmoothed; the per-term
/// bandwidth of the series sampler.
inline double sampler_bandwidth(const FbmParams& p) { return p.sigma() * std::pow(p.dt(), p.H); }

struct SeriesConfig {
    double alpha = 1.5;
    double H = 0.5;
    std::size_t J = 0;  // 0 selects default_series_length(alpha)
    std::vector<double> t_grid{0.25, 0.5, 1.0, 1.5, 2.0};
    std::size_t replicates = 5000;
    FbmParams fbm{0.5, 1.0, 1024, 2.0};
    std::uint64_t seed = 42;
    double bandwidth = 0.0;  // 0 selects sampler_bandwidth(fbm)
    int gaussian_tail = -1;  // -1: on for alpha > 1; 0 off; 1 on
    unsigned threads = 1;

    std::size_t series_length() const { return J ? J : (alpha >= 1.0 ? 2000 : 500); }
    double effective_bandwidth() const { return bandwidth > 0.0 ? bandwidth : sampler_bandwidth(fbm); }
    bool use_gaussian_tail() const { return gaussian_tail < 0 ? alpha > 1.0 : gaussian_tail == 1; }

    void validate() const {
        detail::require_alpha_open(alpha, "SeriesConfig");
        detail::require_hurst(H, "SeriesConfig");
        if (fbm.H != H) throw ParameterError("SeriesConfig: fbm.H must equal H");
        fbm.validate(true);
        if (replicates < 1) throw ParameterError("SeriesConfig: replicates must be >= 1");
        if (t_grid.empty()) throw ParameterError("SeriesConfig: t_grid must be nonempty");
        for (double t : t_grid)
            if (!(t >= 0.0 && t <= fbm.T * (1.0 + 1e-12)))
                throw ParameterError("SeriesConfig: t_grid entries must lie in [0, fbm.T]");
    }
};

struct YSample {
    std::vector<double> t_grid;
    std::size_t replicates = 0;
    std::vector<double> values;  // replicate-major: values[r * t_grid.size() + k]
    double alpha = 0.0;
    double H = 0.0;
    std::size_t J = 0;
    std::uint64_t seed = 0;
    double truncation_share = 0.0;  // mean share of sum|term| from the last decile of terms
    bool under_truncated = false;

    double at(std::size_t r, std::size_t k) const { return values[r * t_grid.size() + k]; }
    std::size_t t_index(double t) const {
        for (std::size_t k = 0; k < t_grid.size(); ++k)
            if (std::abs(t_grid[k] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return k;
        throw ParameterError("YSample: t = " + std::to_string(t) + " is not on the sample grid");
    }
    std::vector<double> column(std::size_t k) const {
        std::vector<double> c(replicates);
        for (std::size_t r = 0; r < replicates; ++r) c[r] = at(r, k);
        return c;
    }
    std::vector<double> at_time(double t) const { return column(t_index(t)); }
    /// Rows [begin, end) as a new sample.
    YSample slice(std::size_t begin, std::size_t end) const {
        YSample s = *this;
        s.replicates = end - begin;
        s.values.assign(values.begin() + static_cast<std::ptrdiff_t>(begin * t_grid.size()),
                        values.begin() + static_cast<std::ptrdiff_t>(end * t_grid.size()));
        return s;
    }
};

/// Kernel evaluating l(x, t_k) at one level on one path.
struct LocalTimeKernel {
    double bandwidth;
    void operator()(std::span<const double> path, double dt, double x, std::span<const double> t_grid,
                    std::span<double> out) const {
        level_local_time(path, dt, x, t_grid, bandwidth, out);
    }
};

/// sum_{j > J} E Gamma_j^(-2/alpha) = Gamma(J + 1 - p) / ((p - 1) Gamma(J)), p = 2/alpha.
inline double lepage_tail_variance(double alpha, std::size_t J) {
    const double p = 2.0 / alpha;
    const double j = static_cast<double>(J);
    return std::exp(std::lgamma(j + 1.0 - p) - std::lgamma(j)) / (p - 1.0);
}

/// Per-replicate LePage sum with a user kernel:
///   Y(t_k) = c_alpha sum_{j<=J} G_j Gamma_j^(-1/alpha) e^(X_j^2 / 2 alpha) k_j(X_j, t_k),
/// with k_j evaluated on independent FBM paths. With the Gaussian tail enabled, the
/// discarded terms j > J are replaced by a conditionally Gaussian remainder built on the
/// same kernels, sum_j xi_j (V_J / J)^(1/2) e^(X_j^2 / 2 alpha) k_j, V_J = lepage_tail_variance.
/// Replicate r consumes RngStream(seed, r) only.
template <class Kernel>
YSample sample_Y_paths(const SeriesConfig& cfg, const Kernel& kernel) {
    cfg.validate();
    const std::size_t J = cfg.series_length();
    const std::size_t nt = cfg.t_grid.size();
    const double alpha = cfg.alpha;
    const double pref = lepage_prefactor(alpha);
    const bool tail = cfg.use_gaussian_tail();
    const double tail_sd = tail ? std::sqrt(lepage_tail_variance(alpha, J) / static_cast<double>(J)) : 0.0;
    const double inv_alpha = 1.0 / alpha;
    const double half_inv_alpha = 0.5 / alpha;
    const double dt = cfg.fbm.dt();
    const std::size_t decile_start = J - J / 10;

    YSample out;
    out.t_grid = cfg.t_grid;
    out.replicates = cfg.replicates;
    out.values.assign(cfg.replicates * nt, 0.0);
    out.alpha = alpha;
    out.H = cfg.H;
    out.J = J;
    out.seed = cfg.seed;
    std::vector<double> share(cfg.replicates, 0.0);

    // Index of the largest t, used for the truncation diagnostic.
    const std::size_t k_last =
        static_cast<std::size_t>(std::max_element(cfg.t_grid.begin(), cfg.t_grid.end()) - cfg.t_grid.begin());

    struct State {
        SpectralFbmGenerator gen;
        std::vector<double> a;
        std::vector<double> b;
        std::vector<double> k;
    };
    parallel_for_with_state(
        cfg.replicates, cfg.threads,
        [&] {
            return State{SpectralFbmGenerator(cfg.fbm), std::vector<double>(cfg.fbm.N + 1),
                         std::vector<double>(cfg.fbm.N + 1), std::vector<double>(nt)};
        },
        [&](State& s, std::size_t r) {
            RngStream rng(cfg.seed, r);
            double* y = out.values.data() + r * nt;
            double gamma = 0.0;
            double abs_all = 0.0;
            double abs_last = 0.0;
            for (std::size_t j = 0; j < J; j += 2) {
                s.gen.generate_pair(rng, s.a, s.b);
                for (std::size_t h = 0; h < 2 && j + h < J; ++h) {
                    gamma += rng.exponential();
                    const double g = rng.normal();
                    const double x = rng.normal();
                    const double xi = tail ? rng.normal() : 0.0;
                    kernel(h == 0 ? std::span<const double>(s.a) : std::span<const double>(s.b), dt, x, cfg.t_grid, s.k);
                    const double weight = std::exp(x * x * half_inv_alpha);
                    const double m = g * std::pow(gamma, -inv_alpha);
                    const double coef = (m + xi * tail_sd) * weight;
                    for (std::size_t k = 0; k < nt; ++k) y[k] += coef * s.k[k];
                    const double a = std::abs(m * weight * s.k[k_last]);
                    abs_all += a;
                    if (j + h >= decile_start) abs_last += a;
                }
            }
            for (std::size_t k = 0; k < nt; ++k) y[k] *= pref;
            share[r] = abs_all > 0.0 ? abs_last / abs_all : 0.0;
        });
    double m = 0.0;
    for (double v : share) m += v;
    out.truncation_share = m / static_cast<double>(cfg.replicates);
    out.under_truncated = out.truncation_share > 0.01;
    return out;
}

inline YSample sample_Y_paths(const SeriesConfig& cfg) {
    return sample_Y_paths(cfg, LocalTimeKernel{cfg.effective_bandwidth()});
}

/// Oracle samples SaS(scale) from the CMS transform on stream (seed, 0).
inline std::vector<double> sas_oracle(double alpha, double scale, std::size_t n, std::uint64_t seed) {
    RngStream rng(seed, 0);
    return sample_sas(StableParams{alpha, scale}, n, rng);
}

struct IndicatorCheckOptions {
    double prefactor_multiplier = 1.0;  // != 1 gives the negative control
    std::size_t oracle_size = 100000;
    double level = 0.01;
    int gaussian_tail = -1;
    unsigned threads = 1;
};

/// c_alpha sum_j G_j Gamma_j^(-1/alpha) e^(X_j^2 / 2 alpha) 1_[0,1](X_j) has the law of
/// the stable integral of 1_[0,1] against Lebesgue control, i.e. SaS with scale 1.
inline StatReport lepage_indicator_check(double alpha, std::size_t J, std::size_t n, std::uint64_t seed,
                                         const IndicatorCheckOptions& opt = {}) {
    detail::require_alpha_open(alpha, "lepage_indicator_check");
    if (J < 1 || n < 2) throw ParameterError("lepage_indicator_check: J >= 1 and n >= 2 required");
    const double pref = lepage_prefactor(alpha) * opt.prefactor_multiplier;
    const bool tail = opt.gaussian_tail < 0 ? alpha > 1.0 : opt.gaussian_tail == 1;
    const double tail_sd = tail ? std::sqrt(lepage_tail_variance(alpha, J) / static_cast<double>(J)) : 0.0;
    std::vector<double> y(n);
    parallel_for(n, opt.threads, [&](std::size_t r) {
        RngStream rng(seed, r);
        double gamma = 0.0;
        double acc = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            gamma += rng.exponential();
            const double g = rng.normal();
            const double x = rng.normal();
            const double xi = tail ? rng.normal() : 0.0;
            if (x < 0.0 || x > 1.0) continue;
            acc += (g * std::pow(gamma, -1.0 / alpha) + xi * tail_sd) * std::exp(x * x / (2.0 * alpha));
        }
        y[r] = pref * acc;
    });
    const auto oracle = sas_oracle(alpha, 1.0, opt.oracle_size, hash_words(seed, 0x0AC1E));
    const auto ks = ks_two_sample(y, oracle);
    StatReport rep;
    rep.name = "lepage_indicator";
    rep.statistic = ks.p_value;
    rep.set("ks_distance", ks.distance);
    rep.threshold = opt.level;
    rep.set("alpha", alpha);
    rep.set("J", static_cast<double>(J));
    rep.set("n", static_cast<double>(n));
    rep.set("prefactor_multiplier", opt.prefactor_multiplier);
    rep.set("ks_p_value", ks.p_value);
    rep.pass = ks.p_value > opt.level;
    return rep;
}

/// Y(t) against SaS(scale) from the CMS oracle.
inline StatReport marginal_check(const YSample& ys, double t, double scale, std::uint64_t oracle_seed,
                                 std::size_t oracle_size = 100000, double level = 0.01) {
    const auto y = ys.at_time(t);
    const auto oracle = sas_oracle(ys.alpha, scale, oracle_size, oracle_seed);
    const auto ks = ks_two_sample(y, oracle);
    StatReport rep;
    rep.name = "marginal";
    rep.statistic = ks.p_value;
    rep.set("ks_distance", ks.distance);
    rep.threshold = level;
    rep.set("alpha", ys.alpha);
    rep.set("H", ys.H);
    rep.set("t", t);
    rep.set("oracle_scale", scale);
    rep.set("ks_p_value", ks.p_value);
    rep.pass = ks.p_value > level;
    return rep;
}

/// ECF scale estimates at each t in `times` (default: every positive grid time)
/// and the log-log slope against H'.
inline StatReport self_similarity_check(const YSample& ys, double alpha, double H_prime, std::vector<double> times = {},
                                        double tolerance = 0.05, const EcfOptions& ecf = {}) {
    if (times.empty())
        for (double t : ys.t_grid)
            if (t > 0.0) times.push_back(t);
    std::sort(times.begin(), times.end());
    if (times.size() < 3) throw ParameterError("self_similarity_check: need at least 3 positive times");
    if (times.back() / times.front() < 8.0 - 1e-12)
        throw ParameterError("self_similarity_check: t grid must span at least a factor of 8");
    std::vector<double> scales;
    StatReport rep;
    rep.name = "self_similarity";
    for (double t : times) {
        const auto col = ys.at_time(t);
        const auto e = ecf_scale(col, alpha, ecf);
        scales.push_back(e.scale);
        rep.set("scale_t" + std::to_string(t).substr(0, 4), e.scale);
        rep.set("scale_se_t" + std::to_string(t).substr(0, 4), e.standard_error);
    }
    const auto fit = loglog_slope(times, scales);
    rep.statistic = std::abs(fit.slope - H_prime);
    rep.threshold = tolerance;
    rep.set("slope", fit.slope);
    rep.set("H_prime", H_prime);
    rep.set("slope_se", fit.standard_error);
    rep.pass = std::abs(fit.slope - H_prime) <= tolerance;
    return rep;
}

/// KS between Y(t + h) - Y(h) (first half of the replicates) and Y(t) (second half).
/// With negative_control the second set is Y(t + h) instead.
inline StatReport stationary_increments_check(const YSample& ys, double t, double h, double level = 0.01,
                                              bool negative_control = false) {
    const std::size_t half = ys.replicates / 2;
    if (half < 2) throw ParameterError("stationary_increments_check: need at least 4 replicates");
    const std::size_t k_th = ys.t_index(t + h);
    std::vector<double> inc(half);
    if (h == 0.0) {
        for (std::size_t r = 0; r < half; ++r) inc[r] = ys.at(r, k_th);
    } else {
        const std::size_t k_h = ys.t_index(h);
        for (std::size_t r = 0; r < half; ++r) inc[r] = ys.at(r, k_th) - ys.at(r, k_h);
    }
    const std::size_t k_ref = negative_control ? k_th : ys.t_index(t);
    std::vector<double> ref(ys.replicates - half);
    for (std::size_t r = half; r < ys.replicates; ++r) ref[r - half] = ys.at(r, k_ref);
    const auto ks = ks_two_sample(inc, ref);
    StatReport rep;
    rep.name = negative_control ? "stationary_increments_negative_control" : "stationary_increments";
    rep.statistic = ks.p_value;
    rep.set("ks_distance", ks.distance);
    rep.threshold = level;
    rep.set("t", t);
    rep.set("h", h);
    rep.set("ks_p_value", ks.p_value);
    rep.pass = ks.p_value > level;
    return rep;
}

struct HolderY {
    std::vector<double> sup_statistic;  // per replicate
    std::vector<double> exponent;       // per replicate, log-log slope of max increments
};

/// Per replicate on an equispaced grid t_k = k delta, k = 0..K (all within [0, 1/2]):
/// sup over pairs of |Y(t) - Y(s)| / ((t-s)^(1-H) (log 1/(t-s))^(H+1/2)), and the slope of
/// log max_t |Y(t + h) - Y(t)| against log h over dyadic lags h.
/// `stride` subsamples the grid (stride 2 gives the half-resolution grid).
inline HolderY holder_estimate_Y(const YSample& ys, double H, std::size_t stride = 1) {
    const auto& tg = ys.t_grid;
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < tg.size(); k += stride) idx.push_back(k);
    if (idx.size() < 8) throw ParameterError("holder_estimate_Y: grid too coarse");
    for (std::size_t k : idx)
        if (!(tg[k] >= 0.0 && tg[k] <= 0.5)) throw ParameterError("holder_estimate_Y: grid must lie in [0, 1/2]");
    const double delta = tg[idx[1]] - tg[idx[0]];
    for (std::size_t i = 1; i < idx.size(); ++i)
        if (std::abs(tg[idx[i]] - tg[idx[i - 1]] - delta) > 1e-9 * delta)
            throw ParameterError("holder_estimate_Y: grid must be equispaced");
    const std::size_t K = idx.size();

    HolderY out;
    out.sup_statistic.resize(ys.replicates);
    out.exponent.resize(ys.replicates);
    std::vector<double> den(K);
    for (std::size_t g = 1; g < K; ++g) {
        const double gap = static_cast<double>(g) * delta;
        den[g] = std::pow(gap, 1.0 - H) * std::pow(std::log(1.0 / gap), H + 0.5);
    }
    std::vector<double> lags;
    for (std::size_t g = 1; g * 4 <= K; g *= 2) lags.push_back(static_cast<double>(g));
    std::vector<double> y(K);
    for (std::size_t r = 0; r < ys.replicates; ++r) {
        for (std::size_t i = 0; i < K; ++i) y[i] = ys.at(r, idx[i]);
        double sup = 0.0;
        for (std::size_t a = 0; a < K; ++a)
            for (std::size_t b = a + 1; b < K; ++b) sup = std::max(sup, std::abs(y[b] - y[a]) / den[b - a]);
        out.sup_statistic[r] = sup;
        std::vector<double> hs;
        std::vector<double> ms;
        for (double lag : lags) {
            const auto g = static_cast<std::size_t>(lag);
            double m = 0.0;
            for (std::size_t a = 0; a + g < K; ++a) m = std::max(m, std::abs(y[a + g] - y[a]));
            if (m > 0.0) {
                hs.push_back(lag * delta);
                ms.push_back(m);
            }
        }
        out.exponent[r] = hs.size() >= 3 ? loglog_slope(hs, ms).slope : 0.0;
    }
    return out;
}

struct DistinctnessOptions {
    std::vector<std::pair<double, double>> joint_probes;  // empty selects the default grid
    std::vector<double> marginal_probes{0.5, 1.0, 1.5};
    std::size_t bootstrap = 200;
    std::uint64_t bootstrap_seed = 0xD157;
    double z = 3.0;
};

inline std::vector<std::pair<double, double>> default_joint_probes() {
    std::vector<std::pair<double, double>> p;
    for (double a : {0.5, 1.0, 1.5, 2.0})
        for (double c : {0.25, 0.5, 0.75}) p.emplace_back(a, -c * a);
    return p;
}

/// Joint ECF of (Y(t1), Y(t2)) for two H values at alpha = 1, each sample scaled to unit
/// ECF scale at t = 1. "Distinct" when some joint probe differs by more than z bootstrap
/// standard errors; the marginal probes (theta2 = 0) should show no such difference.
inline StatReport distinctness_check_alpha1(const YSample& y1, const YSample& y2, double t1, double t2,
                                            const DistinctnessOptions& opt = {}) {
    if (y1.alpha != 1.0 || y2.alpha != 1.0) throw ParameterError("distinctness_check_alpha1: samples must have alpha = 1");
    auto prepare = [&](const YSample& ys, std::vector<double>& a, std::vector<double>& b) {
        const auto one = ys.at_time(1.0);
        EcfOptions e;
        e.bootstrap = 0;
        const double s = ecf_scale(one, 1.0, e).scale;
        a = ys.at_time(t1);
        b = ys.at_time(t2);
        for (auto& v : a) v /= s;
        for (auto& v : b) v /= s;
        return s;
    };
    std::vector<double> a1, b1, a2, b2;
    const double s1 = prepare(y1, a1, b1);
    const double s2 = prepare(y2, a2, b2);
    auto probes = opt.joint_probes.empty() ? default_joint_probes() : opt.joint_probes;
    const std::size_t n_joint = probes.size();
    for (double m : opt.marginal_probes) probes.emplace_back(m, 0.0);
    const std::size_t P = probes.size();

    // Both laws are symmetric, so their characteristic functions are real; the
    // comparison uses the real parts and the imaginary parts are pure noise.
    auto cos_table = [&](const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> c(a.size() * P);
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t p = 0; p < P; ++p) c[i * P + p] = std::cos(probes[p].first * a[i] + probes[p].second * b[i]);
        return c;
    };
    const auto c1 = cos_table(a1, b1);
    const auto c2 = cos_table(a2, b2);
    auto mean_cos = [&](const std::vector<double>& c, std::size_t n, const std::vector<std::size_t>* pick) {
        std::vector<double> m(P, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t r = pick ? (*pick)[i] : i;
            for (std::size_t p = 0; p < P; ++p) m[p] += c[r * P + p];
        }
        for (auto& v : m) v /= static_cast<double>(n);
        return m;
    };
    const auto e1 = mean_cos(c1, a1.size(), nullptr);
    const auto e2 = mean_cos(c2, a2.size(), nullptr);
    std::vector<double> diff(P);
    for (std::size_t p = 0; p < P; ++p) diff[p] = e1[p] - e2[p];

    std::vector<double> sum(P, 0.0), sum2(P, 0.0);
    std::vector<std::size_t> pick1(a1.size()), pick2(a2.size());
    for (std::size_t b = 0; b < opt.bootstrap; ++b) {
        RngStream rng(opt.bootstrap_seed, b);
        for (auto& v : pick1) v = static_cast<std::size_t>(rng.uniform() * static_cast<double>(a1.size())) % a1.size();
        for (auto& v : pick2) v = static_cast<std::size_t>(rng.uniform() * static_cast<double>(a2.size())) % a2.size();
        const auto r1 = mean_cos(c1, a1.size(), &pick1);
        const auto r2 = mean_cos(c2, a2.size(), &pick2);
        for (std::size_t p = 0; p < P; ++p) {
            const double d = r1[p] - r2[p];
            sum[p] += d;
            sum2[p] += d * d;
        }
    }
    StatReport rep;
    rep.name = "distinctness_alpha1";
    rep.threshold = opt.z;
    rep.set("H1", y1.H);
    rep.set("H2", y2.H);
    rep.set("scale1_t1", s1);
    rep.set("scale2_t1", s2);
    double best_joint = 0.0;
    double worst_marginal = 0.0;
    const double B = static_cast<double>(opt.bootstrap);
    for (std::size_t p = 0; p < P; ++p) {
        const double mean = sum[p] / B;
        const double se = std::sqrt(std::max(0.0, sum2[p] / B - mean * mean) * B / (B - 1.0));
        const double zz = se > 0.0 ? std::abs(diff[p]) / se : 0.0;
        const std::string key = "probe(" + std::to_string(probes[p].first).substr(0, 4) + "," +
                                std::to_string(probes[p].second).substr(0, 5) + ")";
        rep.set(key + "_diff", diff[p]);
        rep.set(key + "_se", se);
        if (p < n_joint)
            best_joint = std::max(best_joint, zz);
        else
            worst_marginal = std::max(worst_marginal, zz);
    }
    rep.statistic = best_joint;
    rep.set("max_joint_z", best_joint);
    rep.set("max_marginal_z", worst_marginal);
    rep.set("distinct", best_joint > opt.z ? 1.0 : 0.0);
    rep.set("marginal_distinct", worst_marginal > opt.z ? 1.0 : 0.0);
    rep.pass = best_joint > opt.z && worst_marginal <= opt.z;
    return rep;
}

inline void write_csv(std::ostream& os, const YSample& ys) {
    os << "# ltsm y-sample v1 alpha=" << ys.alpha << " H=" << ys.H << " J=" << ys.J << " seed=" << ys.seed << "\n";
    os << "replicate,t,value\n";
    char buf[96];
    for (std::size_t r = 0; r < ys.replicates; ++r)
        for (std::size_t k = 0; k < ys.t_grid.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r, ys.t_grid[k], ys.at(r, k));
            os << buf;
        }
}

}  // namespace ltsm
