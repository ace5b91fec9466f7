#pragma once

// Stable-law primitives: parameter feasibility, the stable tail constant, a
// Chambers-Mallows-Stuck SaS sampler, Pareto rewards and the LePage prefactor.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ltsm/error.hpp"
#include "ltsm/rng.hpp"

namespace ltsm {

struct StableParams {
    double alpha = 1.5;
    double scale = 1.0;

    /// alpha = 2 is admitted here for the Gaussian oracle case.
    void validate() const {
        if (!(alpha > 0.0 && alpha <= 2.0))
            throw ParameterError("StableParams: alpha must lie in (0, 2], got " + std::to_string(alpha));
        if (!(scale >= 0.0)) throw ParameterError("StableParams: scale must be >= 0");
    }
};

/// Which branch of the self-similarity range the exponent H' falls into.
enum class RangeCase { AlphaBelowOne, AlphaOne, AlphaAboveOne, Invalid };

inline const char* to_string(RangeCase c) {
    switch (c) {
        case RangeCase::AlphaBelowOne: return "1<H'<1/alpha (alpha<1)";
        case RangeCase::AlphaOne: return "H'=1 (alpha=1)";
        case RangeCase::AlphaAboveOne: return "1/alpha<H'<1 (1<alpha<2)";
        default: return "invalid";
    }
}

struct FeasibilityReport {
    double alpha = 0.0;
    double H = 0.0;
    double H_prime = std::nan("");
    bool feasible_pair = false;
    RangeCase range_case = RangeCase::Invalid;
    std::string reason;
};

namespace detail {
inline void require_alpha_open(double alpha, const char* where) {
    if (!(alpha > 0.0 && alpha < 2.0))
        throw ParameterError(std::string(where) + ": alpha must lie in (0, 2), got " + std::to_string(alpha));
}
inline void require_hurst(double H, const char* where) {
    if (!(H > 0.0 && H < 1.0))
        throw ParameterError(std::string(where) + ": H must lie in (0, 1), got " + std::to_string(H));
}
}  // namespace detail

/// Self-similarity exponent of the local-time stable motion: 1 - H + H/alpha.
inline double hurst_prime(double alpha, double H) {
    detail::require_alpha_open(alpha, "hurst_prime");
    detail::require_hurst(H, "hurst_prime");
    if (alpha == 1.0) return 1.0;
    return 1.0 - H + H / alpha;
}

/// FBM Hurst exponent producing a requested H', if one exists in (0,1).
inline std::optional<double> hurst_for_target(double alpha, double H_prime) {
    if (!(alpha > 0.0 && alpha < 2.0) || alpha == 1.0) return std::nullopt;
    const double H = (1.0 - H_prime) / (1.0 - 1.0 / alpha);
    if (!(H > 0.0 && H < 1.0)) return std::nullopt;
    return H;
}

/// Checks (alpha, H) and classifies H'. Never throws; the report encodes invalidity.
/// A pair is feasible when alpha is in (0,2) and H in (0,1); the resulting H' then lies
/// in the SSSI range (0, 1/alpha] for alpha <= 1 and (0, 1) for alpha > 1.
inline FeasibilityReport validate_pair(double alpha, double H) {
    FeasibilityReport r;
    r.alpha = alpha;
    r.H = H;
    if (!(alpha > 0.0 && alpha < 2.0)) {
        r.reason = "alpha outside (0,2)";
        return r;
    }
    if (!(H > 0.0 && H < 1.0)) {
        r.reason = "H outside (0,1)";
        return r;
    }
    r.H_prime = hurst_prime(alpha, H);
    if (alpha < 1.0) {
        r.range_case = RangeCase::AlphaBelowOne;
        r.feasible_pair = r.H_prime > 1.0 && r.H_prime < 1.0 / alpha;
    } else if (alpha == 1.0) {
        r.range_case = RangeCase::AlphaOne;
        r.feasible_pair = r.H_prime == 1.0;
    } else {
        r.range_case = RangeCase::AlphaAboveOne;
        r.feasible_pair = r.H_prime > 1.0 / alpha && r.H_prime < 1.0;
    }
    if (!r.feasible_pair) r.reason = "H' outside the admissible branch (rounding at the boundary)";
    return r;
}

/// Closed form 1 / (Gamma(1-alpha) cos(pi alpha / 2)), alpha != 1; 2/pi at alpha = 1.
inline double stable_tail_constant_closed_form(double alpha) {
    detail::require_alpha_open(alpha, "stable_tail_constant_closed_form");
    if (alpha == 1.0) return 2.0 / std::numbers::pi;
    return 1.0 / (std::tgamma(1.0 - alpha) * std::cos(std::numbers::pi * alpha / 2.0));
}

/// Value and diagnostics of the quadrature route for the stable tail constant.
struct TailConstantQuadrature {
    double integral = 0.0;  // int_0^inf x^-alpha sin x dx
    double head = 0.0;      // contribution of [0, pi]
    double tail = 0.0;      // accelerated sum over the periods beyond pi
    double tail_change = 0.0;
    std::size_t periods = 0;
};

/// int_0^inf x^-alpha sin x dx by quadrature.
///
/// On [0, pi] the x^(1-alpha) singularity is removed analytically
/// (sin x = x - (x - sin x)) and the regular remainder goes to adaptive Gauss-Kronrod.
/// Beyond pi the integral is an alternating series over half-periods; the partial sums
/// are accelerated by repeated pairwise averaging (Euler transform).
inline TailConstantQuadrature stable_tail_integral(double alpha) {
    detail::require_alpha_open(alpha, "stable_tail_constant");
    using boost::math::quadrature::gauss;
    using boost::math::quadrature::gauss_kronrod;
    constexpr double pi = std::numbers::pi;

    TailConstantQuadrature q;
    double err = 0.0;
    auto regular = [alpha](double x) {
        if (x == 0.0) return 0.0;
        // x - sin x computed without cancellation for small x
        const double d = x < 0.1 ? x * x * x / 6.0 * (1.0 - x * x / 20.0 * (1.0 - x * x / 42.0 * (1.0 - x * x / 72.0)))
                                 : x - std::sin(x);
        return std::pow(x, -alpha) * d;
    };
    const double reg = gauss_kronrod<double, 31>::integrate(regular, 0.0, pi, 25, 1e-15, &err);
    if (!(err < 1e-12)) {
        std::ostringstream os;
        os << "stable_tail_constant: head quadrature did not converge (alpha=" << alpha << ", error estimate=" << err << ")";
        throw NumericalError(os.str());
    }
    q.head = std::pow(pi, 2.0 - alpha) / (2.0 - alpha) - reg;

    constexpr std::size_t kPeriods = 64;
    std::vector<double> partial(kPeriods);
    double sum = 0.0;
    for (std::size_t k = 1; k <= kPeriods; ++k) {
        const double a = k * pi;
        const double b = a + pi;
        sum += gauss<double, 30>::integrate([alpha](double x) { return std::pow(x, -alpha) * std::sin(x); }, a, b);
        partial[k - 1] = sum;
    }
    // Repeated averaging of consecutive partial sums; comparing two truncation
    // points gives the convergence diagnostic.
    auto accelerate = [](std::vector<double> level) {
        while (level.size() > 1) {
            for (std::size_t i = 0; i + 1 < level.size(); ++i) level[i] = 0.5 * (level[i] + level[i + 1]);
            level.pop_back();
        }
        return level.front();
    };
    q.tail = accelerate(partial);
    q.tail_change = std::abs(q.tail - accelerate({partial.begin(), partial.end() - 16}));
    q.periods = kPeriods;
    if (!(q.tail_change < 1e-10 * std::max(1.0, std::abs(q.head)))) {
        std::ostringstream os;
        os << "stable_tail_constant: tail series acceleration did not settle (alpha=" << alpha
           << ", last change=" << q.tail_change << ")";
        throw NumericalError(os.str());
    }
    q.integral = q.head + q.tail;
    return q;
}

/// C_alpha = (int_0^inf x^-alpha sin x dx)^-1, the constant in the stable tail
/// P(|X| > x) ~ C_alpha scale^alpha x^-alpha for a symmetric alpha-stable X.
inline double stable_tail_constant(double alpha) { return 1.0 / stable_tail_integral(alpha).integral; }

/// E|G|^alpha for a standard normal G.
inline double gaussian_abs_moment(double alpha) {
    if (!(alpha > 0.0)) throw ParameterError("gaussian_abs_moment: alpha must be > 0");
    return std::pow(2.0, alpha / 2.0) * std::tgamma((alpha + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
}

/// Constant multiplying the LePage series sum_j G_j Gamma_j^(-1/alpha) e^(X_j^2/(2 alpha)) f_j(X_j)
/// (G, X standard normal, Gamma unit-rate Poisson arrivals) so that it has the law of the
/// stable integral of f against a SaS random measure with Lebesgue control in x.
inline double lepage_prefactor(double alpha) {
    detail::require_alpha_open(alpha, "lepage_prefactor");
    return std::pow(stable_tail_constant(alpha) * std::sqrt(2.0 * std::numbers::pi) / gaussian_abs_moment(alpha),
                    1.0 / alpha);
}

/// One SaS(scale) variate by the Chambers-Mallows-Stuck transform.
inline double sample_sas_one(double alpha, double scale, RngStream& rng) {
    const double v = (rng.uniform() - 0.5) * std::numbers::pi;
    const double w = rng.exponential();
    if (alpha == 1.0) return scale * std::tan(v);
    if (alpha == 2.0) return scale * 2.0 * std::sqrt(w) * std::sin(v);
    const double x = std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
                     std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
    return scale * x;
}

/// n i.i.d. SaS variates with characteristic function exp(-scale^alpha |theta|^alpha).
inline std::vector<double> sample_sas(const StableParams& params, std::size_t n, RngStream& rng) {
    params.validate();
    if (n < 1) throw ParameterError("sample_sas: n must be >= 1");
    std::vector<double> out(n);
    for (auto& x : out) x = sample_sas_one(params.alpha, params.scale, rng);
    return out;
}

/// sigma_W for the symmetric Pareto reward law: P(W > x) = x^-alpha / 2 for x >= 1.
inline double pareto_sigma_w(double alpha) { return std::pow(2.0, -1.0 / alpha); }

/// Symmetric Pareto reward from two independent 64-bit words (sign, magnitude).
inline double pareto_reward_from_bits(double alpha, std::uint64_t sign_bits, std::uint64_t magnitude_bits) {
    const double u = open_uniform(magnitude_bits);
    const double m = std::pow(u, -1.0 / alpha);
    return (sign_bits >> 63) ? m : -m;
}

/// W = eps * U^(-1/alpha): exact tail P(W > x) = x^-alpha / 2 for x >= 1.
inline std::vector<double> sample_pareto_rewards(double alpha, std::size_t n, RngStream& rng) {
    detail::require_alpha_open(alpha, "sample_pareto_rewards");
    std::vector<double> out(n);
    for (auto& w : out) {
        const auto s = rng();
        const auto m = rng();
        w = pareto_reward_from_bits(alpha, s, m);
    }
    return out;
}

}  // namespace ltsm
