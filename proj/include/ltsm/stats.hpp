#pragma once

// Statistical utilities: empirical distributions, two-sample KS, the empirical
// characteristic function scale estimator with bootstrap, log-log regression.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ltsm/error.hpp"
#include "ltsm/rng.hpp"

namespace ltsm {

/// Outcome of one statistical check.
struct StatReport {
    std::string name;
    double statistic = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::vector<std::pair<std::string, double>> values;  // auxiliary numbers, in emission order
    std::string note;

    void set(const std::string& key, double v) {
        for (auto& kv : values)
            if (kv.first == key) {
                kv.second = v;
                return;
            }
        values.emplace_back(key, v);
    }
    double get(const std::string& key) const {
        for (const auto& kv : values)
            if (kv.first == key) return kv.second;
        throw ParameterError("StatReport: no value named " + key);
    }
};

class EmpiricalDistribution {
public:
    explicit EmpiricalDistribution(std::vector<double> sample) : x_(std::move(sample)) {
        if (x_.empty()) throw ParameterError("EmpiricalDistribution: sample must be nonempty");
        std::sort(x_.begin(), x_.end());
    }
    explicit EmpiricalDistribution(std::span<const double> sample)
        : EmpiricalDistribution(std::vector<double>(sample.begin(), sample.end())) {}

    std::size_t size() const { return x_.size(); }
    const std::vector<double>& sorted() const { return x_; }
    double cdf(double v) const {
        return static_cast<double>(std::upper_bound(x_.begin(), x_.end(), v) - x_.begin()) / static_cast<double>(x_.size());
    }
    double quantile(double p) const {
        if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("quantile: p must lie in [0, 1]");
        const double pos = p * static_cast<double>(x_.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, x_.size() - 1);
        return x_[lo] + (pos - static_cast<double>(lo)) * (x_[hi] - x_[lo]);
    }

private:
    std::vector<double> x_;
};

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
    if (lambda < 0.2) return 1.0;  // 1 - Q < 1e-10 here and the series converges poorly
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-16 * std::abs(sum)) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double distance = 0.0;
    double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov: sup |F_a - F_b| with the asymptotic p-value
/// (Stephens' small-sample correction of the effective size).
inline KsResult ks_two_sample(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
    const auto& x = a.sorted();
    const auto& y = b.sorted();
    const double n = static_cast<double>(x.size());
    const double m = static_cast<double>(y.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    KsResult r;
    r.distance = d;
    const double en = std::sqrt(n * m / (n + m));
    r.p_value = kolmogorov_q((en + 0.12 + 0.11 / en) * d);
    return r;
}

inline KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    return ks_two_sample(EmpiricalDistribution(a), EmpiricalDistribution(b));
}

/// |phi_hat(theta)| for the sample.
inline double ecf_modulus(std::span<const double> sample, double theta) {
    double c = 0.0;
    double s = 0.0;
    for (double x : sample) {
        c += std::cos(theta * x);
        s += std::sin(theta * x);
    }
    const double n = static_cast<double>(sample.size());
    return std::hypot(c / n, s / n);
}

struct EcfScale {
    double scale = 0.0;
    double standard_error = 0.0;
    std::size_t admissible = 0;
    std::vector<double> theta_grid;
};

struct EcfOptions {
    std::vector<double> theta_grid;  // empty selects q_k / median|X|, q log-spaced in [0.05, 5]
    std::size_t bootstrap = 200;
    std::uint64_t bootstrap_seed = 0x5eed;
    double lower = 0.2;
    double upper = 0.8;
};

inline std::vector<double> default_theta_grid(std::span<const double> sample) {
    std::vector<double> a(sample.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::abs(sample[i]);
    if (a.empty()) throw ParameterError("ecf_scale: sample must be nonempty");
    auto mid = a.begin() + static_cast<std::ptrdiff_t>(a.size() / 2);
    std::nth_element(a.begin(), mid, a.end());
    const double med = *mid;
    if (!(med > 0.0))
        throw NumericalError("ecf_scale: degenerate sample (median |X| = 0, |phi_hat| = 1 at every probe)");
    constexpr int K = 24;
    std::vector<double> g(K);
    for (int k = 0; k < K; ++k) g[k] = 0.05 * std::pow(100.0, static_cast<double>(k) / (K - 1)) / med;
    return g;
}

/// SaS scale from the empirical characteristic function: the average over probe
/// points with |phi_hat| in [lower, upper] of (-log|phi_hat(theta)|)^(1/alpha) / |theta|.
/// Bootstrap resamples are drawn from RngStream(bootstrap_seed, b).
inline EcfScale ecf_scale(std::span<const double> sample, double alpha, const EcfOptions& opt = {}) {
    if (!(alpha > 0.0 && alpha <= 2.0)) throw ParameterError("ecf_scale: alpha must lie in (0, 2]");
    if (sample.empty()) throw ParameterError("ecf_scale: sample must be nonempty");
    EcfScale out;
    out.theta_grid = opt.theta_grid.empty() ? default_theta_grid(sample) : opt.theta_grid;
    const std::size_t n = sample.size();
    const std::size_t K = out.theta_grid.size();
    std::vector<double> cs(n * K);
    std::vector<double> sn(n * K);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < K; ++k) {
            const double a = out.theta_grid[k] * sample[i];
            cs[i * K + k] = std::cos(a);
            sn[i * K + k] = std::sin(a);
        }
    std::vector<double> c(K);
    std::vector<double> s(K);
    auto estimate = [&](std::size_t& admissible) {
        double acc = 0.0;
        admissible = 0;
        for (std::size_t k = 0; k < K; ++k) {
            const double mod = std::hypot(c[k], s[k]) / static_cast<double>(n);
            if (mod < opt.lower || mod > opt.upper) continue;
            acc += std::pow(-std::log(mod), 1.0 / alpha) / std::abs(out.theta_grid[k]);
            ++admissible;
        }
        return admissible ? acc / static_cast<double>(admissible) : std::nan("");
    };

    std::fill(c.begin(), c.end(), 0.0);
    std::fill(s.begin(), s.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < K; ++k) {
            c[k] += cs[i * K + k];
            s[k] += sn[i * K + k];
        }
    out.scale = estimate(out.admissible);
    if (out.admissible == 0) {
        std::ostringstream os;
        os << "ecf_scale: no admissible probe point (|phi_hat| outside [" << opt.lower << ", " << opt.upper
           << "] at all " << K << " theta values)";
        throw NumericalError(os.str());
    }

    if (opt.bootstrap >= 2) {
        std::vector<double> reps;
        reps.reserve(opt.bootstrap);
        for (std::size_t b = 0; b < opt.bootstrap; ++b) {
            RngStream rng(opt.bootstrap_seed, b);
            std::fill(c.begin(), c.end(), 0.0);
            std::fill(s.begin(), s.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t r = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)) % n;
                for (std::size_t k = 0; k < K; ++k) {
                    c[k] += cs[r * K + k];
                    s[k] += sn[r * K + k];
                }
            }
            std::size_t adm = 0;
            const double v = estimate(adm);
            if (adm) reps.push_back(v);
        }
        if (reps.size() >= 2) {
            double m = 0.0;
            for (double v : reps) m += v;
            m /= static_cast<double>(reps.size());
            double var = 0.0;
            for (double v : reps) var += (v - m) * (v - m);
            out.standard_error = std::sqrt(var / static_cast<double>(reps.size() - 1));
        }
    }
    return out;
}

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double standard_error = 0.0;
};

/// Least-squares slope of log y on log x.
inline SlopeFit loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ParameterError("loglog_slope: size mismatch");
    if (x.size() < 3) throw ParameterError("loglog_slope: need at least 3 points");
    const std::size_t n = x.size();
    std::vector<double> lx(n);
    std::vector<double> ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ParameterError("loglog_slope: coordinates must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw ParameterError("loglog_slope: x values must not all coincide");
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - f.intercept - f.slope * lx[i];
        rss += r * r;
    }
    f.standard_error = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    return f;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_and_se(std::span<const double> v) {
    if (v.size() < 2) throw ParameterError("mean_and_se: need at least 2 values");
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    s /= static_cast<double>(v.size() - 1);
    return {m, std::sqrt(s / static_cast<double>(v.size()))};
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw ParameterError("median: empty input");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace ltsm
