#pragma once

// ACR, certified-accuracy curves, the survival curve of p_A and the
// conversions between the two under a change of certification budget.

#include "rsacr/certify.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsacr {

struct SurvivalPoint {
    double p = 0.0;
    double survival = 0.0;
};

/// P(p_A >= p) as a step function stored at its knots.
///
/// Between knots the value is that of the next knot to the right, which is
/// exactly P(p_A >= p) for an empirical distribution; above the last knot it
/// is 0.
class SurvivalCurve {
public:
    SurvivalCurve() = default;
    /// Knots must be strictly increasing in p with survival nonincreasing.
    explicit SurvivalCurve(std::vector<SurvivalPoint> points);

    double at(double p) const;
    const std::vector<SurvivalPoint>& points() const { return points_; }

    /// The conventional CDF P(p_A < p) at the same knots, for display.
    std::vector<SurvivalPoint> as_cdf() const;

private:
    std::vector<SurvivalPoint> points_;
};

struct CurvePoint {
    double radius = 0.0;
    double accuracy = 0.0;
};

/// Certified accuracy against radius. A query between knots takes the
/// accuracy of the next knot at or above it (radii within a relative 1e-9
/// of a knot snap to it); beyond the last knot the accuracy is 0.
class RadiusAccuracyCurve {
public:
    RadiusAccuracyCurve() = default;
    /// Knots must be increasing in radius with accuracy nonincreasing.
    explicit RadiusAccuracyCurve(std::vector<CurvePoint> points);

    double at(double radius) const;
    const std::vector<CurvePoint>& points() const { return points_; }

private:
    std::vector<CurvePoint> points_;
};

/// Mean of radius * 1[certified and correct]. Throws on an empty input.
double acr(std::span<const SampleRecord> records);

RadiusAccuracyCurve certified_accuracy_curve(std::span<const SampleRecord> records,
                                             std::span<const double> radii);

struct PaObservation {
    double p_hat = 0.0;
    bool correct = true;
};

SurvivalCurve survival_of_pa(std::span<const PaObservation> observations);

/// Convenience: survival curve of the p_hat column of certification records,
/// counting a record as correct when its candidate equals the label.
SurvivalCurve survival_of_records(std::span<const SampleRecord> records);

/// How a population p_A is turned into a certification outcome when no
/// sampling takes place.
enum class SuccessRule {
    MedianCount,         // count = floor(n p + 0.5)
    ExpectedCount,       // real-valued count n p
    SuccessProbability,  // largest count reached with probability >= tau
};

struct ConversionBudget {
    std::int64_t n = 100'000;
    double alpha = 0.001;
    double sigma = 1.0;
    SuccessRule rule = SuccessRule::ExpectedCount;
    double tau = 0.5;  // SuccessProbability only

    void validate() const;
};

/// Raised by curve_to_survival on a small source budget without force.
class SmallBudgetError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Largest radius certified at population p_A under the rule; 0 when none.
double max_radius_for_pa(double p_a, const ConversionBudget& budget);

/// Smallest p_A whose certification under the rule reaches radius r
/// (requires the lower bound to exceed 0.5). nullopt when r is beyond
/// sigma Phi^{-1}(alpha^{1/n}).
std::optional<double> min_pa_for_radius(double radius, const ConversionBudget& budget);

/// Expected certified accuracy at each radius: survival(min_pa_for_radius(r)),
/// or 0 for uncertifiable radii.
RadiusAccuracyCurve survival_to_curve(const SurvivalCurve& survival,
                                      const ConversionBudget& budget,
                                      std::span<const double> radii);

/// Inverse of survival_to_curve. With no p grid the curve's own knots are
/// mapped through min_pa_for_radius. Throws SmallBudgetError when
/// budget.n < 1000 unless force is set.
SurvivalCurve curve_to_survival(const RadiusAccuracyCurve& curve, const ConversionBudget& budget,
                                bool force = false,
                                std::optional<std::vector<double>> p_grid = std::nullopt);

enum class Dominance { ABetter, BBetter, Incomparable, Equal };

std::string to_string(Dominance d);

/// Compares two survival curves on p in [0.5, 1].
Dominance survival_dominates(const SurvivalCurve& a, const SurvivalCurve& b);

struct SweepConfig {
    std::string name;
    std::vector<PaCase> cases;
};

struct Crossover {
    std::int64_t from_n = 0;
    std::int64_t to_n = 0;
    std::size_t first = 0;   // config indices whose order flipped
    std::size_t second = 0;
};

struct SweepResult {
    std::vector<std::string> names;
    std::vector<std::int64_t> budgets;
    std::vector<std::vector<double>> acr;  // acr[budget_index][config_index]
    std::vector<Crossover> crossovers;
};

/// Expected ACR of each configuration at each budget (n0 = 0) and every
/// pairwise ordering flip between consecutive budgets.
SweepResult budget_sweep(std::span<const SweepConfig> configs, double sigma, double alpha,
                         std::span<const std::int64_t> budgets,
                         AcrRule rule = AcrRule::ExactExpectation);

/// Pointwise maximum over sigma of the curves at the given radii.
RadiusAccuracyCurve best_across_sigma(const std::map<double, RadiusAccuracyCurve>& curves,
                                      std::span<const double> radii);

}  // namespace rsacr
