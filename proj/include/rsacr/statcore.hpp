#pragma once

// Scalar statistics used throughout the toolkit: the standard normal law,
// the one-sided Clopper-Pearson lower bound and exact binomial terms.
// Everything here is a pure function and safe to call concurrently.

#include <cstdint>

namespace rsacr {

/// A value known to lie in [0, 1].
class Probability {
public:
    explicit Probability(double value);
    double value() const noexcept { return value_; }
    operator double() const noexcept { return value_; }

private:
    double value_;
};

/// A confidence level 1 - alpha, strictly inside (0, 1).
class ConfidenceLevel {
public:
    explicit ConfidenceLevel(double value);
    static ConfidenceLevel from_alpha(double alpha) { return ConfidenceLevel(1.0 - alpha); }

    double value() const noexcept { return value_; }
    double alpha() const noexcept { return 1.0 - value_; }

private:
    double value_;
};

double std_normal_pdf(double z);
double std_normal_cdf(double z);

/// Upper tail 1 - Phi(z), accurate far into the right tail.
double std_normal_sf(double z);

/// Phi^{-1}(p). Throws std::domain_error unless 0 < p < 1.
double std_normal_inv_cdf(double p);

/// Phi^{-1}(1 - q), evaluated without forming 1 - q. Throws unless 0 < q < 1.
double std_normal_inv_sf(double q);

/// Exact one-sided Clopper-Pearson lower bound on a binomial success rate.
///
/// Returns the (1 - conf) quantile of Beta(count, n - count + 1), i.e. the p
/// solving P(Bin(n, p) >= count) = 1 - conf; 0 for count == 0 and the closed
/// form (1 - conf)^{1/n} for count == n. Throws std::invalid_argument when
/// n < 1 or count is outside [0, n].
double clopper_pearson_lower(std::int64_t count, std::int64_t n, ConfidenceLevel conf);

/// Clopper-Pearson lower bound with a real-valued success count in [0, n].
/// Agrees with clopper_pearson_lower at integer counts; used by the
/// expected-count plug-in rules.
double clopper_pearson_lower_real(double count, std::int64_t n, ConfidenceLevel conf);

struct BinomialTerms {
    double pmf;         // P(X = count)
    double lower_tail;  // P(X <= count)
};

/// log P(Bin(n, p) = count) in Loader's saddle-point form, which keeps full
/// relative accuracy for large n.
double binomial_log_pmf(std::int64_t count, std::int64_t n, double p);

BinomialTerms binomial_pmf_and_tails(std::int64_t count, std::int64_t n, Probability p);

}  // namespace rsacr
