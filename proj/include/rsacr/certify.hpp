#pragma once

// Randomized-smoothing certification (guess stage + Clopper-Pearson
// estimation), closed-form radius formulas, and exact expected-ACR oracles.

#include "rsacr/classifiers.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace rsacr {

/// Maximum n for which expected ACR is summed exactly over all counts.
inline constexpr std::int64_t kMaxExactBudget = 1'000'000;

struct CertificationBudget {
    std::int64_t n0 = 100;      // guess-stage draws; 0 uses the true label as candidate
    std::int64_t n = 100'000;   // estimation draws
    double alpha = 0.001;
    double sigma = 1.0;

    /// Throws std::invalid_argument on an impossible budget.
    void validate() const;
};

enum class OutcomeKind { Certified, Abstain };

/// One certified sample. radius is 0 unless the sample is certified and correct.
struct SampleRecord {
    std::int64_t sample_id = 0;
    Label label;
    std::optional<Label> predicted;
    std::int64_t count = 0;
    std::int64_t n = 0;
    double p_hat = 0.0;
    double radius = 0.0;
    OutcomeKind outcome = OutcomeKind::Abstain;

    bool certified_correct() const {
        return outcome == OutcomeKind::Certified && predicted == label;
    }
};

/// sigma * Phi^{-1}(p_A) for p_A > 0.5, otherwise 0. Throws
/// std::domain_error at p_A == 1 and std::invalid_argument for sigma <= 0.
double certified_radius(double p_a, double sigma);

/// d/dp_A of certified_radius: sigma / phi(Phi^{-1}(p_A)), for 0 < p_A < 1.
double radius_sensitivity(double p_a, double sigma);

/// Largest radius any sample can get: sigma * Phi^{-1}(alpha^{1/n}).
double max_certifiable_radius(std::int64_t n, double alpha, double sigma);

/// Runs the two-stage procedure on one sample. The random stream is keyed by
/// (seed, sample.id), so results do not depend on evaluation order.
SampleRecord certify(const StochasticClassifier& classifier, const Sample& sample,
                     const CertificationBudget& budget, std::uint64_t seed);

std::vector<SampleRecord> certify_all(const StochasticClassifier& classifier,
                                      std::span<const Sample> samples,
                                      const CertificationBudget& budget, std::uint64_t seed);

/// Exact p_A of a sample together with whether the certified candidate
/// class is the correct one.
struct PaCase {
    double p_a = 0.0;
    bool candidate_correct = true;
};

/// Dataset mean of E_count[sigma Phi^{-1}(LCB) 1[LCB > 0.5] 1[correct]] with
/// count ~ Bin(n, p_A), summed over every count. Requires n0 == 0 and
/// n <= kMaxExactBudget.
double expected_acr_oracle(std::span<const PaCase> cases, const CertificationBudget& budget);

/// ACR obtained by plugging the expected count n * p_A into the lower
/// confidence bound (real-valued count). This is the rule under which a
/// uniform p_A = 0.9 classifier scores 0.544 / 0.756 / 0.909 at
/// n = 50 / 100 / 200 (alpha = 0.001, sigma = 1).
double plugin_acr(std::span<const PaCase> cases, const CertificationBudget& budget);

enum class AcrRule { ExactExpectation, ExpectedCount };

double acr_under_rule(AcrRule rule, std::span<const PaCase> cases,
                      const CertificationBudget& budget);

// Trivial-classifier analysis ------------------------------------------------

using BigInt = boost::multiprecision::cpp_int;

/// (1/K) sigma Phi^{-1}(alpha^{1/n}); 0 when alpha^{1/n} <= 0.5.
double trivial_acr_bound(int num_classes, double sigma, double n, double alpha);

/// Smallest integer n with trivial_acr_bound(K, sigma, n, alpha) > target.
/// n can be astronomically large (hundreds of digits for target * K / sigma
/// around 50), so it is computed and returned as an arbitrary-precision
/// integer.
BigInt budget_for_target_acr(double target, int num_classes, double sigma, double alpha);

/// Exact decision of trivial_acr_bound(K, sigma, n, alpha) > target for
/// arbitrary n, made in multiple-precision arithmetic by comparing
/// alpha^{1/n} with Phi(target K / sigma).
bool trivial_bound_exceeds(const BigInt& n, double target, int num_classes, double sigma,
                           double alpha);

}  // namespace rsacr
