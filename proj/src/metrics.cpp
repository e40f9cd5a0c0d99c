#include "rsacr/metrics.hpp"

#include "rsacr/statcore.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace rsacr {

SurvivalCurve::SurvivalCurve(std::vector<SurvivalPoint> points) : points_(std::move(points)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const auto& pt = points_[i];
        if (!(pt.p >= 0.0 && pt.p <= 1.0) || !(pt.survival >= 0.0 && pt.survival <= 1.0)) {
            throw std::invalid_argument("survival curve: knot outside [0, 1] x [0, 1]");
        }
        if (i > 0 && !(pt.p > points_[i - 1].p)) {
            throw std::invalid_argument("survival curve: p must be strictly increasing");
        }
        if (i > 0 && pt.survival > points_[i - 1].survival) {
            throw std::invalid_argument("survival curve: survival must be nonincreasing in p");
        }
    }
}

double SurvivalCurve::at(double p) const {
    const auto it = std::lower_bound(points_.begin(), points_.end(), p,
                                     [](const SurvivalPoint& k, double v) { return k.p < v; });
    return it == points_.end() ? 0.0 : it->survival;
}

std::vector<SurvivalPoint> SurvivalCurve::as_cdf() const {
    std::vector<SurvivalPoint> out;
    out.reserve(points_.size());
    for (const auto& k : points_) out.push_back({k.p, 1.0 - k.survival});
    return out;
}

RadiusAccuracyCurve::RadiusAccuracyCurve(std::vector<CurvePoint> points)
    : points_(std::move(points)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const auto& pt = points_[i];
        if (!(pt.radius >= 0.0) || !std::isfinite(pt.radius) ||
            !(pt.accuracy >= 0.0 && pt.accuracy <= 1.0)) {
            throw std::invalid_argument("accuracy curve: invalid knot");
        }
        if (i > 0 && !(pt.radius > points_[i - 1].radius)) {
            throw std::invalid_argument("accuracy curve: radii must be strictly increasing");
        }
        if (i > 0 && pt.accuracy > points_[i - 1].accuracy) {
            throw std::invalid_argument("accuracy curve: accuracy must be nonincreasing in radius");
        }
    }
}

double RadiusAccuracyCurve::at(double radius) const {
    const double tol = 1e-9 * std::max(1.0, std::fabs(radius));
    const auto it = std::lower_bound(
        points_.begin(), points_.end(), radius - tol,
        [](const CurvePoint& k, double v) { return k.radius < v; });
    return it == points_.end() ? 0.0 : it->accuracy;
}

double acr(std::span<const SampleRecord> records) {
    if (records.empty()) throw std::invalid_argument("acr: no records");
    double total = 0.0;
    for (const auto& r : records) {
        if (r.certified_correct()) total += r.radius;
    }
    return total / static_cast<double>(records.size());
}

namespace {

void require_strictly_increasing(std::span<const double> values, const char* what) {
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (!(values[i] > values[i - 1])) {
            throw std::invalid_argument(std::string(what) + ": radii must be strictly increasing");
        }
    }
}

}  // namespace

RadiusAccuracyCurve certified_accuracy_curve(std::span<const SampleRecord> records,
                                             std::span<const double> radii) {
    if (records.empty()) throw std::invalid_argument("certified_accuracy_curve: no records");
    require_strictly_increasing(radii, "certified_accuracy_curve");
    std::vector<CurvePoint> pts;
    pts.reserve(radii.size());
    for (double r : radii) {
        std::size_t hits = 0;
        for (const auto& rec : records) {
            if (rec.certified_correct() && rec.radius >= r) ++hits;
        }
        pts.push_back({r, static_cast<double>(hits) / static_cast<double>(records.size())});
    }
    return RadiusAccuracyCurve(std::move(pts));
}

SurvivalCurve survival_of_pa(std::span<const PaObservation> observations) {
    if (observations.empty()) throw std::invalid_argument("survival_of_pa: no observations");
    std::vector<double> correct;
    for (const auto& o : observations) {
        if (!(o.p_hat >= 0.0 && o.p_hat <= 1.0)) {
            throw std::invalid_argument("survival_of_pa: p_hat outside [0, 1]");
        }
        if (o.correct) correct.push_back(o.p_hat);
    }
    std::sort(correct.begin(), correct.end());
    const double total = static_cast<double>(observations.size());
    std::vector<SurvivalPoint> pts;
    for (std::size_t i = 0; i < correct.size();) {
        std::size_t j = i;
        while (j < correct.size() && correct[j] == correct[i]) ++j;
        pts.push_back({correct[i], static_cast<double>(correct.size() - i) / total});
        i = j;
    }
    return SurvivalCurve(std::move(pts));
}

SurvivalCurve survival_of_records(std::span<const SampleRecord> records) {
    std::vector<PaObservation> obs;
    obs.reserve(records.size());
    for (const auto& r : records) {
        // Abstained records keep their (<= 0.5) bound for the candidate class.
        obs.push_back({r.p_hat, !r.predicted || *r.predicted == r.label});
    }
    return survival_of_pa(obs);
}

void ConversionBudget::validate() const {
    CertificationBudget{0, n, alpha, sigma}.validate();
    if (rule == SuccessRule::SuccessProbability && !(tau > 0.0 && tau < 1.0)) {
        throw std::invalid_argument("conversion budget: tau must lie in (0, 1)");
    }
}

namespace {

// Count that the rule assigns to a population p_A.
double effective_count(double p_a, const ConversionBudget& b) {
    const double nd = static_cast<double>(b.n);
    switch (b.rule) {
        case SuccessRule::MedianCount:
            return std::min(nd, std::floor(nd * p_a + 0.5));
        case SuccessRule::ExpectedCount:
            return std::min(nd, nd * p_a);
        case SuccessRule::SuccessProbability: {
            // Largest k with P(Bin(n, p) >= k) >= tau.
            if (p_a >= 1.0) return nd;
            if (p_a <= 0.0) return 0.0;
            std::int64_t lo = 0;
            std::int64_t hi = b.n;
            while (lo < hi) {
                const std::int64_t mid = lo + (hi - lo + 1) / 2;
                const double upper =
                    1.0 - binomial_pmf_and_tails(mid - 1, b.n, Probability(p_a)).lower_tail;
                if (upper >= b.tau) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            return static_cast<double>(lo);
        }
    }
    return 0.0;
}

double lower_bound_at(double p_a, const ConversionBudget& b) {
    return clopper_pearson_lower_real(effective_count(p_a, b), b.n,
                                      ConfidenceLevel::from_alpha(b.alpha));
}

}  // namespace

double max_radius_for_pa(double p_a, const ConversionBudget& budget) {
    budget.validate();
    if (!(p_a >= 0.0 && p_a <= 1.0)) throw std::invalid_argument("max_radius_for_pa: p_A outside [0, 1]");
    const double lcb = lower_bound_at(p_a, budget);
    return lcb > 0.5 ? budget.sigma * std_normal_inv_cdf(lcb) : 0.0;
}

std::optional<double> min_pa_for_radius(double radius, const ConversionBudget& budget) {
    budget.validate();
    if (!(radius >= 0.0)) throw std::invalid_argument("min_pa_for_radius: radius must be >= 0");
    auto certifies = [&](double p) {
        const double lcb = lower_bound_at(p, budget);
        return lcb > 0.5 && budget.sigma * std_normal_inv_cdf(lcb) >= radius;
    };
    if (!certifies(1.0)) return std::nullopt;
    double lo = 0.0;  // never certifies: count 0
    double hi = 1.0;
    while (hi - lo > 1e-14) {
        const double mid = 0.5 * (lo + hi);
        if (certifies(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

RadiusAccuracyCurve survival_to_curve(const SurvivalCurve& survival,
                                      const ConversionBudget& budget,
                                      std::span<const double> radii) {
    require_strictly_increasing(radii, "survival_to_curve");
    std::vector<CurvePoint> pts;
    pts.reserve(radii.size());
    for (double r : radii) {
        const auto p_min = min_pa_for_radius(r, budget);
        pts.push_back({r, p_min ? survival.at(*p_min) : 0.0});
    }
    return RadiusAccuracyCurve(std::move(pts));
}

SurvivalCurve curve_to_survival(const RadiusAccuracyCurve& curve, const ConversionBudget& budget,
                                bool force, std::optional<std::vector<double>> p_grid) {
    budget.validate();
    if (budget.n < 1000 && !force) {
        throw SmallBudgetError("curve_to_survival: source budget n = " + std::to_string(budget.n) +
                               " is below 1000; the empirical distribution may be far from the "
                               "population (pass force to override)");
    }
    std::vector<double> grid;
    if (p_grid) {
        grid = std::move(*p_grid);
    } else {
        for (const auto& k : curve.points()) {
            if (auto p = min_pa_for_radius(k.radius, budget)) grid.push_back(*p);
        }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    std::vector<SurvivalPoint> pts;
    for (double p : grid) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("curve_to_survival: p outside [0, 1]");
        if (lower_bound_at(p, budget) <= 0.5) continue;  // nothing certifiable at this p
        pts.push_back({p, curve.at(max_radius_for_pa(p, budget))});
    }
    return SurvivalCurve(std::move(pts));
}

std::string to_string(Dominance d) {
    switch (d) {
        case Dominance::ABetter: return "A_better";
        case Dominance::BBetter: return "B_better";
        case Dominance::Incomparable: return "incomparable";
        case Dominance::Equal: return "equal";
    }
    return "unknown";
}

Dominance survival_dominates(const SurvivalCurve& a, const SurvivalCurve& b) {
    std::set<double> probes{0.5, 1.0};
    for (const auto* c : {&a, &b}) {
        for (const auto& k : c->points()) {
            if (k.p >= 0.5 && k.p <= 1.0) probes.insert(k.p);
        }
    }
    bool a_above = false;
    bool b_above = false;
    for (double p : probes) {
        const double sa = a.at(p);
        const double sb = b.at(p);
        if (sa > sb) a_above = true;
        if (sb > sa) b_above = true;
    }
    if (a_above && b_above) return Dominance::Incomparable;
    if (a_above) return Dominance::ABetter;
    if (b_above) return Dominance::BBetter;
    return Dominance::Equal;
}

SweepResult budget_sweep(std::span<const SweepConfig> configs, double sigma, double alpha,
                         std::span<const std::int64_t> budgets, AcrRule rule) {
    if (configs.empty()) throw std::invalid_argument("budget_sweep: no configurations");
    for (std::size_t i = 1; i < budgets.size(); ++i) {
        if (!(budgets[i] > budgets[i - 1])) {
            throw std::invalid_argument("budget_sweep: budgets must be strictly increasing");
        }
    }
    SweepResult out;
    for (const auto& c : configs) out.names.push_back(c.name);
    out.budgets.assign(budgets.begin(), budgets.end());
    for (std::int64_t n : budgets) {
        const CertificationBudget budget{0, n, alpha, sigma};
        std::vector<double> row;
        for (const auto& c : configs) row.push_back(acr_under_rule(rule, c.cases, budget));
        out.acr.push_back(std::move(row));
    }
    auto sign = [](double d) { return (d > 0.0) - (d < 0.0); };
    for (std::size_t b = 1; b < out.budgets.size(); ++b) {
        for (std::size_t i = 0; i < configs.size(); ++i) {
            for (std::size_t j = i + 1; j < configs.size(); ++j) {
                const int before = sign(out.acr[b - 1][i] - out.acr[b - 1][j]);
                const int after = sign(out.acr[b][i] - out.acr[b][j]);
                if (before != 0 && after != 0 && before != after) {
                    out.crossovers.push_back({out.budgets[b - 1], out.budgets[b], i, j});
                }
            }
        }
    }
    return out;
}

RadiusAccuracyCurve best_across_sigma(const std::map<double, RadiusAccuracyCurve>& curves,
                                      std::span<const double> radii) {
    if (curves.empty()) throw std::invalid_argument("best_across_sigma: no curves");
    require_strictly_increasing(radii, "best_across_sigma");
    std::vector<CurvePoint> pts;
    for (double r : radii) {
        double best = 0.0;
        for (const auto& [sigma, c] : curves) best = std::max(best, c.at(r));
        pts.push_back({r, best});
    }
    return RadiusAccuracyCurve(std::move(pts));
}

}  // namespace rsacr
