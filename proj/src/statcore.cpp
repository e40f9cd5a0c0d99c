#include "rsacr/statcore.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rsacr {

Probability::Probability(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0)) {
        throw std::invalid_argument("probability outside [0, 1]: " + std::to_string(value));
    }
}

ConfidenceLevel::ConfidenceLevel(double value) : value_(value) {
    if (!(value > 0.0 && value < 1.0)) {
        throw std::invalid_argument("confidence level outside (0, 1): " + std::to_string(value));
    }
}

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

// Wichura's AS241 (PPND16) for 0 < p <= 0.5; about 1e-16 relative accuracy.
double ppnd16_lower(double p) {
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                  6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
              1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
        const double den =
            (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                  3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
              4.2313330701600911252e+1) * r + 1.0);
        return q * num / den;
    }
    double r = std::sqrt(-std::log(p));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
        value = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        value = num / den;
    }
    return -value;
}

// Lower-half quantile with one Halley refinement against erfc.
double inv_cdf_lower(double p) {
    double x = ppnd16_lower(p);
    const double density = std_normal_pdf(x);
    if (density > 0.0) {
        const double u = (std_normal_cdf(x) - p) / density;
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

void require_open_unit(double p, const char* what) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error(std::string(what) + ": argument must lie in (0, 1), got " +
                                std::to_string(p));
    }
}

// Loader's saddle-point pieces for accurate binomial log-densities.
double stirling_error(double n) {
    constexpr double s0 = 1.0 / 12.0;
    constexpr double s1 = 1.0 / 360.0;
    constexpr double s2 = 1.0 / 1260.0;
    constexpr double s3 = 1.0 / 1680.0;
    constexpr double s4 = 1.0 / 1188.0;
    if (n <= 15.0) {
        // Only integer arguments reach this branch.
        double log_factorial = 0.0;
        for (int k = 2; k <= static_cast<int>(n); ++k) log_factorial += std::log(k);
        return log_factorial - (n + 0.5) * std::log(n) + n -
               0.5 * std::log(2.0 * std::numbers::pi);
    }
    const double nn = n * n;
    if (n > 500) return (s0 - s1 / nn) / n;
    if (n > 80) return (s0 - (s1 - s2 / nn) / nn) / n;
    if (n > 35) return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / n;
    return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / n;
}

// x log(x / np) + np - x without cancellation.
double deviance_term(double x, double np) {
    if (std::fabs(x - np) < 0.1 * (x + np)) {
        double v = (x - np) / (x + np);
        double s = (x - np) * v;
        double ej = 2.0 * x * v;
        v *= v;
        for (int j = 1; j < 1000; ++j) {
            ej *= v;
            const double next = s + ej / (2 * j + 1);
            if (next == s) return next;
            s = next;
        }
        return s;
    }
    return x * std::log(x / np) + np - x;
}

}  // namespace

double std_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double std_normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double std_normal_inv_cdf(double p) {
    require_open_unit(p, "std_normal_inv_cdf");
    if (p <= 0.5) return inv_cdf_lower(p);
    return -inv_cdf_lower(1.0 - p);
}

double std_normal_inv_sf(double q) {
    require_open_unit(q, "std_normal_inv_sf");
    if (q <= 0.5) return -inv_cdf_lower(q);
    return inv_cdf_lower(1.0 - q);
}

double clopper_pearson_lower_real(double count, std::int64_t n, ConfidenceLevel conf) {
    if (n < 1) throw std::invalid_argument("clopper_pearson_lower: n must be >= 1");
    if (!(count >= 0.0 && count <= static_cast<double>(n))) {
        throw std::invalid_argument("clopper_pearson_lower: count must lie in [0, n]");
    }
    const double alpha = conf.alpha();
    if (count == 0.0) return 0.0;
    const double nd = static_cast<double>(n);
    if (count == nd) return std::exp(std::log(alpha) / nd);

    // I_p(count, n - count + 1) = P(Bin(n, p) >= count) is increasing in p.
    const double a = count;
    const double b = nd - count + 1.0;
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 120; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (boost::math::ibeta(a, b, mid) < alpha) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo;
}

double clopper_pearson_lower(std::int64_t count, std::int64_t n, ConfidenceLevel conf) {
    if (n < 1) throw std::invalid_argument("clopper_pearson_lower: n must be >= 1");
    if (count < 0 || count > n) {
        throw std::invalid_argument("clopper_pearson_lower: count " + std::to_string(count) +
                                    " outside [0, " + std::to_string(n) + "]");
    }
    return clopper_pearson_lower_real(static_cast<double>(count), n, conf);
}

double binomial_log_pmf(std::int64_t count, std::int64_t n, double p) {
    if (n < 0 || count < 0 || count > n) {
        throw std::invalid_argument("binomial_log_pmf: need 0 <= count <= n");
    }
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    const double q = 1.0 - p;
    const double x = static_cast<double>(count);
    const double nd = static_cast<double>(n);
    if (p == 0.0) return count == 0 ? 0.0 : neg_inf;
    if (q == 0.0) return count == n ? 0.0 : neg_inf;
    if (count == 0) {
        if (n == 0) return 0.0;
        return p < 0.1 ? -deviance_term(nd, nd * q) - nd * p : nd * std::log1p(-p);
    }
    if (count == n) {
        return q < 0.1 ? -deviance_term(nd, nd * p) - nd * q : nd * std::log(p);
    }
    const double lc = stirling_error(nd) - stirling_error(x) - stirling_error(nd - x) -
                      deviance_term(x, nd * p) - deviance_term(nd - x, nd * q);
    const double lf = std::log(2.0 * std::numbers::pi) + std::log(x) + std::log1p(-x / nd);
    return lc - 0.5 * lf;
}

BinomialTerms binomial_pmf_and_tails(std::int64_t count, std::int64_t n, Probability p) {
    const double pmf = std::exp(binomial_log_pmf(count, n, p.value()));
    double lower = 1.0;
    if (count < n) {
        if (p.value() == 0.0) {
            lower = 1.0;
        } else if (p.value() == 1.0) {
            lower = 0.0;
        } else {
            lower = boost::math::ibetac(static_cast<double>(count + 1),
                                        static_cast<double>(n - count), p.value());
        }
    }
    return {pmf, lower};
}

}  // namespace rsacr
