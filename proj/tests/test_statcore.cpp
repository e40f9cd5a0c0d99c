#include "rsacr/statcore.hpp"

#include <doctest.h>

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

using namespace rsacr;

namespace {

const boost::math::normal kStdNormal;

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// P(Bin(n, p) >= k) by direct summation in long double.
long double upper_tail(std::int64_t k, std::int64_t n, long double p) {
    long double total = 0.0L;
    for (std::int64_t i = k; i <= n; ++i) {
        const long double log_term = std::lgamma((long double)n + 1) - std::lgamma((long double)i + 1) -
                                     std::lgamma((long double)(n - i) + 1) + i * std::log(p) +
                                     (n - i) * std::log1p(-p);
        total += std::exp(log_term);
    }
    return total;
}

// Clopper-Pearson lower bound as the root of P(X >= k | p) = alpha.
double cp_by_tail_bisection(std::int64_t k, std::int64_t n, double alpha) {
    long double lo = 0.0L, hi = 1.0L;
    for (int i = 0; i < 200; ++i) {
        const long double mid = 0.5L * (lo + hi);
        (upper_tail(k, n, mid) < alpha ? lo : hi) = mid;
    }
    return static_cast<double>(0.5L * (lo + hi));
}

}  // namespace

TEST_CASE("normal cdf and survival agree with an independent implementation") {
    for (double z = -37.0; z <= 8.0; z += 0.37) {
        CHECK(rel_err(std_normal_cdf(z), boost::math::cdf(kStdNormal, z)) < 1e-12);
    }
    for (double z = -8.0; z <= 37.0; z += 0.37) {
        CHECK(rel_err(std_normal_sf(z), boost::math::cdf(boost::math::complement(kStdNormal, z))) < 1e-12);
    }
    CHECK(std_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-16));
    CHECK(std_normal_pdf(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-15));
}

TEST_CASE("normal quantile") {
    SUBCASE("matches an independent quantile across the whole range") {
        const std::vector<double> ps{1e-300, 1e-100, 1e-20, 1e-8, 0.001, 0.02425, 0.1, 0.3, 0.5,
                                     0.7,    0.9,    0.97575, 0.99, 0.999, 1 - 1e-9, 1 - 1e-12};
        for (double p : ps) {
            const double expected = boost::math::quantile(kStdNormal, p);
            if (expected == 0.0) {
                CHECK(std::abs(std_normal_inv_cdf(p)) < 1e-15);
            } else {
                CHECK(rel_err(std_normal_inv_cdf(p), expected) < 1e-12);
            }
        }
    }
    SUBCASE("round trip within 1e-10") {
        for (double p = 1e-6; p < 1.0; p += 0.0013) {
            CHECK(std::abs(std_normal_cdf(std_normal_inv_cdf(p)) - p) < 1e-10 * std::max(p, 1e-3));
        }
    }
    SUBCASE("reference values") {
        CHECK(std_normal_inv_cdf(0.99) == doctest::Approx(2.32634787404084).epsilon(1e-13));
        CHECK(std_normal_inv_cdf(0.999) == doctest::Approx(3.09023230616781).epsilon(1e-13));
        CHECK(std_normal_inv_cdf(0.5) == 0.0);
    }
    SUBCASE("upper-tail form avoids forming 1 - q") {
        for (double q : {1e-300, 1e-30, 1e-17, 1e-5, 0.3}) {
            CHECK(rel_err(std_normal_inv_sf(q), -boost::math::quantile(kStdNormal, q)) < 1e-12);
        }
    }
    SUBCASE("domain") {
        CHECK_THROWS_AS(std_normal_inv_cdf(0.0), std::domain_error);
        CHECK_THROWS_AS(std_normal_inv_cdf(1.0), std::domain_error);
        CHECK_THROWS_AS(std_normal_inv_cdf(std::nan("")), std::domain_error);
        CHECK_THROWS_AS(std_normal_inv_sf(0.0), std::domain_error);
    }
}

TEST_CASE("validated scalar types") {
    CHECK(Probability(0.0).value() == 0.0);
    CHECK(Probability(1.0).value() == 1.0);
    CHECK_THROWS_AS(Probability(1.0000001), std::invalid_argument);
    CHECK_THROWS_AS(Probability(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(Probability(std::nan("")), std::invalid_argument);
    CHECK(ConfidenceLevel::from_alpha(0.001).alpha() == doctest::Approx(0.001));
    CHECK_THROWS_AS(ConfidenceLevel(1.0), std::invalid_argument);
    CHECK_THROWS_AS(ConfidenceLevel(0.0), std::invalid_argument);
}

TEST_CASE("Clopper-Pearson lower bound") {
    const auto conf = ConfidenceLevel::from_alpha(0.001);

    SUBCASE("closed forms at the ends") {
        CHECK(clopper_pearson_lower(0, 100, conf) == 0.0);
        for (std::int64_t n : {1, 16, 50, 100, 200, 100000}) {
            CHECK(rel_err(clopper_pearson_lower(n, n, conf), std::pow(0.001, 1.0 / n)) < 1e-14);
        }
        CHECK(clopper_pearson_lower(16, 16, ConfidenceLevel::from_alpha(0.1)) ==
              doctest::Approx(0.866).epsilon(1e-3));
    }
    SUBCASE("equals the root of the binomial upper tail") {
        for (std::int64_t n : {5, 20, 100, 400}) {
            for (std::int64_t k = 1; k < n; k += std::max<std::int64_t>(1, n / 7)) {
                for (double alpha : {0.001, 0.01, 0.1}) {
                    const double expected = cp_by_tail_bisection(k, n, alpha);
                    CHECK(std::abs(clopper_pearson_lower(k, n, ConfidenceLevel::from_alpha(alpha)) - expected) < 1e-9);
                }
            }
        }
    }
    SUBCASE("reference values") {
        CHECK(clopper_pearson_lower(90, 100, conf) == doctest::Approx(0.775329880167775).epsilon(1e-10));
        CHECK(clopper_pearson_lower(12, 16, ConfidenceLevel::from_alpha(0.1)) ==
              doctest::Approx(0.561078052763961).epsilon(1e-10));
    }
    SUBCASE("monotone in the count, real counts interpolate") {
        double prev = -1.0;
        for (std::int64_t k = 0; k <= 100; ++k) {
            const double v = clopper_pearson_lower(k, 100, conf);
            CHECK(v > prev);
            CHECK(clopper_pearson_lower_real(static_cast<double>(k), 100, conf) == doctest::Approx(v).epsilon(1e-12));
            prev = v;
        }
        const double mid = clopper_pearson_lower_real(90.5, 100, conf);
        CHECK(mid > clopper_pearson_lower(90, 100, conf));
        CHECK(mid < clopper_pearson_lower(91, 100, conf));
    }
    SUBCASE("argument checks") {
        CHECK_THROWS_AS(clopper_pearson_lower(1, 0, conf), std::invalid_argument);
        CHECK_THROWS_AS(clopper_pearson_lower(-1, 10, conf), std::invalid_argument);
        CHECK_THROWS_AS(clopper_pearson_lower(11, 10, conf), std::invalid_argument);
        CHECK_THROWS_AS(clopper_pearson_lower_real(10.5, 10, conf), std::invalid_argument);
    }
}

TEST_CASE("binomial terms") {
    SUBCASE("log pmf matches the lgamma formula at moderate n") {
        for (std::int64_t n : {1, 7, 15, 16, 60, 1000}) {
            for (double p : {0.01, 0.3, 0.5, 0.9}) {
                for (std::int64_t k = 0; k <= n; k += std::max<std::int64_t>(1, n / 13)) {
                    const double direct = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                                          k * std::log(p) + (n - k) * std::log1p(-p);
                    CHECK(binomial_log_pmf(k, n, p) == doctest::Approx(direct).epsilon(1e-11));
                }
            }
        }
    }
    SUBCASE("large n reference values") {
        CHECK(binomial_log_pmf(500000, 1000000, 0.5) == doctest::Approx(-7.13354688162686).epsilon(1e-12));
        CHECK(binomial_log_pmf(3, 1000000, 1e-5) == doctest::Approx(-4.88402719043175).epsilon(1e-12));
    }
    SUBCASE("degenerate p") {
        CHECK(binomial_log_pmf(0, 10, 0.0) == 0.0);
        CHECK(binomial_log_pmf(10, 10, 1.0) == 0.0);
        CHECK(binomial_log_pmf(3, 10, 0.0) == -std::numeric_limits<double>::infinity());
    }
    SUBCASE("pmf sums to one and the lower tail accumulates it") {
        const std::int64_t n = 300;
        const Probability p(0.37);
        double cumulative = 0.0;
        for (std::int64_t k = 0; k <= n; ++k) {
            const BinomialTerms t = binomial_pmf_and_tails(k, n, p);
            cumulative += t.pmf;
            CHECK(t.lower_tail == doctest::Approx(cumulative).epsilon(1e-10));
        }
        CHECK(cumulative == doctest::Approx(1.0).epsilon(1e-12));
    }
}
