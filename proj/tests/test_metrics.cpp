#include "rsacr/metrics.hpp"
#include "rsacr/rng.hpp"
#include "rsacr/statcore.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

using namespace rsacr;

namespace {

SampleRecord record(double radius, bool correct, bool certified = true) {
    SampleRecord r;
    r.label = Label{0};
    r.outcome = certified ? OutcomeKind::Certified : OutcomeKind::Abstain;
    if (certified) r.predicted = correct ? Label{0} : Label{1};
    r.radius = radius;
    return r;
}

ConversionBudget b1_budget(SuccessRule rule) { return ConversionBudget{100, 0.01, 1.0, rule, 0.5}; }

}  // namespace

TEST_CASE("survival curve lookup") {
    const SurvivalCurve s({{0.2, 0.9}, {0.6, 0.5}, {0.9, 0.1}});
    CHECK(s.at(0.0) == 0.9);
    CHECK(s.at(0.2) == 0.9);
    CHECK(s.at(0.3) == 0.5);
    CHECK(s.at(0.6) == 0.5);
    CHECK(s.at(0.61) == 0.1);
    CHECK(s.at(0.9) == 0.1);
    CHECK(s.at(0.95) == 0.0);
    CHECK(s.as_cdf()[1].survival == doctest::Approx(0.5));
    CHECK_THROWS_AS(SurvivalCurve({{0.5, 0.4}, {0.6, 0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(SurvivalCurve({{0.5, 0.4}, {0.5, 0.3}}), std::invalid_argument);
    CHECK_THROWS_AS(SurvivalCurve({{1.5, 0.4}}), std::invalid_argument);
}

TEST_CASE("empirical survival of p_hat matches a direct count") {
    RandomStream stream{17};
    std::vector<PaObservation> obs;
    for (int i = 0; i < 400; ++i) {
        // Quantised so that ties occur.
        obs.push_back({std::round(stream.uniform() * 50.0) / 50.0, stream.uniform() < 0.8});
    }
    const SurvivalCurve s = survival_of_pa(obs);
    for (int i = 0; i <= 1000; ++i) {
        const double p = i / 1000.0;
        const auto count = std::count_if(obs.begin(), obs.end(),
                                         [&](const PaObservation& o) { return o.correct && o.p_hat >= p; });
        CHECK(s.at(p) == doctest::Approx(count / 400.0).epsilon(1e-15));
    }
    CHECK_THROWS_AS(survival_of_pa({}), std::invalid_argument);
}

TEST_CASE("ACR and the certified-accuracy curve") {
    const std::vector<SampleRecord> records{record(1.0, true), record(2.0, true), record(3.0, false),
                                            record(0.0, true, false)};
    CHECK(acr(records) == doctest::Approx(0.75));
    CHECK_THROWS_AS(acr(std::vector<SampleRecord>{}), std::invalid_argument);

    const std::vector<double> radii{0.0, 0.5, 1.0, 1.5, 2.0, 2.5};
    const RadiusAccuracyCurve curve = certified_accuracy_curve(records, radii);
    const std::vector<double> expected{0.5, 0.5, 0.5, 0.25, 0.25, 0.0};
    for (std::size_t i = 0; i < radii.size(); ++i) CHECK(curve.points()[i].accuracy == expected[i]);
    CHECK(curve.at(0.7) == 0.5);
    CHECK(curve.at(1.0 + 1e-12) == 0.5);
    CHECK(curve.at(9.0) == 0.0);

    const std::vector<double> bad{0.5, 0.5};
    CHECK_THROWS_AS(certified_accuracy_curve(records, bad), std::invalid_argument);
}

TEST_CASE("success rules") {
    const auto conf = ConfidenceLevel::from_alpha(0.01);
    SUBCASE("expected count is the real-valued plug-in") {
        const ConversionBudget b = b1_budget(SuccessRule::ExpectedCount);
        CHECK(max_radius_for_pa(0.9, b) == doctest::Approx(std_normal_inv_cdf(clopper_pearson_lower_real(90.0, 100, conf))));
    }
    SUBCASE("median count rounds n p") {
        const ConversionBudget b = b1_budget(SuccessRule::MedianCount);
        CHECK(max_radius_for_pa(0.904, b) == doctest::Approx(std_normal_inv_cdf(clopper_pearson_lower(90, 100, conf))));
        CHECK(max_radius_for_pa(0.906, b) == doctest::Approx(std_normal_inv_cdf(clopper_pearson_lower(91, 100, conf))));
    }
    SUBCASE("success probability picks the largest count reached with probability tau") {
        ConversionBudget b = b1_budget(SuccessRule::SuccessProbability);
        b.tau = 0.9;
        const double p = 0.85;
        const double r = max_radius_for_pa(p, b);
        std::int64_t k = 100;
        while (1.0 - binomial_pmf_and_tails(k - 1, 100, Probability(p)).lower_tail < 0.9) --k;
        CHECK(r == doctest::Approx(std_normal_inv_cdf(clopper_pearson_lower(k, 100, conf))));
    }
    SUBCASE("uncertifiable populations get radius zero") {
        CHECK(max_radius_for_pa(0.5, b1_budget(SuccessRule::ExpectedCount)) == 0.0);
        CHECK(max_radius_for_pa(0.0, b1_budget(SuccessRule::MedianCount)) == 0.0);
    }
}

TEST_CASE("minimum p_A for a radius") {
    const double target = std_normal_cdf(0.5);
    SUBCASE("inverts the maximum radius") {
        for (auto rule : {SuccessRule::MedianCount, SuccessRule::ExpectedCount, SuccessRule::SuccessProbability}) {
            const ConversionBudget b = b1_budget(rule);
            for (double r : {0.0, 0.1, 0.5, 1.0, 1.5}) {
                const auto p = min_pa_for_radius(r, b);
                REQUIRE(p.has_value());
                CHECK(max_radius_for_pa(*p, b) >= r);
                CHECK(max_radius_for_pa(*p - 1e-9, b) < r + 1e-12);
            }
        }
    }
    SUBCASE("r = 0.5 at N = 100, alpha = 0.01") {
        // Median: count 81 is the first whose bound reaches Phi(0.5), first hit at p = 0.805.
        CHECK(clopper_pearson_lower(81, 100, ConfidenceLevel::from_alpha(0.01)) >= target);
        CHECK(clopper_pearson_lower(80, 100, ConfidenceLevel::from_alpha(0.01)) < target);
        const auto median = min_pa_for_radius(0.5, b1_budget(SuccessRule::MedianCount));
        const auto expected = min_pa_for_radius(0.5, b1_budget(SuccessRule::ExpectedCount));
        const auto prob = min_pa_for_radius(0.5, b1_budget(SuccessRule::SuccessProbability));
        CHECK(*median == doctest::Approx(0.805).epsilon(1e-12));
        CHECK(*expected == doctest::Approx(0.800596234384).epsilon(1e-10));
        for (double p : {*median, *expected, *prob}) {
            CHECK(p >= 0.78);
            CHECK(p <= 0.82);
        }
    }
    SUBCASE("radii beyond the budget cap are unreachable") {
        const ConversionBudget b = b1_budget(SuccessRule::ExpectedCount);
        const double cap = max_certifiable_radius(100, 0.01, 1.0);
        CHECK(min_pa_for_radius(cap * 0.999, b).has_value());
        CHECK_FALSE(min_pa_for_radius(cap * 1.001, b).has_value());
        CHECK_THROWS_AS(min_pa_for_radius(-1.0, b), std::invalid_argument);
    }
}

TEST_CASE("survival to curve") {
    const std::vector<double> radii{0.5};
    SUBCASE("a survival of 0.316 at p = 0.81 gives accuracy 0.316 at r = 0.5") {
        const SurvivalCurve s({{0.5, 0.9}, {0.81, 0.316}, {0.95, 0.1}});
        for (auto rule : {SuccessRule::MedianCount, SuccessRule::ExpectedCount}) {
            CHECK(survival_to_curve(s, b1_budget(rule), radii).at(0.5) == 0.316);
        }
    }
    SUBCASE("constant survival gives a constant curve up to the cap") {
        const SurvivalCurve s({{0.5, 0.5}, {1.0, 0.5}});
        const ConversionBudget b = b1_budget(SuccessRule::ExpectedCount);
        const double cap = max_certifiable_radius(b.n, b.alpha, b.sigma);
        std::vector<double> grid;
        for (int i = 0; i < 20; ++i) grid.push_back(cap * i / 20.0);
        grid.push_back(cap * 1.01);
        const RadiusAccuracyCurve c = survival_to_curve(s, b, grid);
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) CHECK(c.points()[i].accuracy == 0.5);
        CHECK(c.points().back().accuracy == 0.0);
    }
}

TEST_CASE("curve to survival") {
    const RadiusAccuracyCurve curve({{0.0, 0.8}, {0.5, 0.6}, {1.0, 0.3}, {2.0, 0.1}});
    const ConversionBudget big{100000, 0.001, 1.0, SuccessRule::ExpectedCount, 0.5};

    SUBCASE("small source budgets need force") {
        CHECK_THROWS_AS(curve_to_survival(curve, b1_budget(SuccessRule::ExpectedCount)), SmallBudgetError);
        CHECK_NOTHROW(curve_to_survival(curve, b1_budget(SuccessRule::ExpectedCount), true));
    }
    SUBCASE("knots map through the minimum p_A") {
        const SurvivalCurve s = curve_to_survival(curve, big);
        REQUIRE(s.points().size() == 4);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(s.points()[i].p == *min_pa_for_radius(curve.points()[i].radius, big));
            CHECK(s.points()[i].survival == curve.points()[i].accuracy);
        }
    }
    SUBCASE("explicit grid skips uncertifiable p") {
        const SurvivalCurve s = curve_to_survival(curve, big, false, std::vector<double>{0.3, 0.5, 0.99});
        REQUIRE(s.points().size() == 1);
        CHECK(s.points()[0].p == 0.99);
        CHECK(s.points()[0].survival == curve.at(max_radius_for_pa(0.99, big)));
    }
    SUBCASE("round trip at the same budget") {
        const SurvivalCurve s = curve_to_survival(curve, big);
        std::vector<double> radii;
        for (const auto& k : curve.points()) radii.push_back(k.radius);
        const RadiusAccuracyCurve back = survival_to_curve(s, big, radii);
        for (std::size_t i = 0; i < radii.size(); ++i) {
            CHECK(back.points()[i].accuracy == doctest::Approx(curve.points()[i].accuracy).epsilon(1e-12));
        }
    }
}

TEST_CASE("survival dominance") {
    const SurvivalCurve low({{0.6, 0.4}, {0.9, 0.2}});
    const SurvivalCurve high({{0.6, 0.5}, {0.9, 0.3}});
    const SurvivalCurve crossing({{0.6, 0.6}, {0.9, 0.1}});
    CHECK(survival_dominates(high, low) == Dominance::ABetter);
    CHECK(survival_dominates(low, high) == Dominance::BBetter);
    CHECK(survival_dominates(high, crossing) == Dominance::Incomparable);
    CHECK(survival_dominates(low, low) == Dominance::Equal);
    CHECK(to_string(Dominance::Incomparable) == "incomparable");
    // Differences below p = 0.5 do not matter.
    const SurvivalCurve a({{0.1, 0.9}, {0.7, 0.3}});
    const SurvivalCurve b({{0.1, 0.8}, {0.7, 0.3}});
    CHECK(survival_dominates(a, b) == Dominance::Equal);
}

TEST_CASE("budget sweep") {
    const std::vector<SweepConfig> configs{{"trivial", {{1.0, true}, {0.0, true}}},
                                           {"uniform", {{0.9, true}, {0.9, true}}}};
    const std::vector<std::int64_t> budgets{50, 100, 200};
    SUBCASE("expected-count rule flips twice") {
        const SweepResult r = budget_sweep(configs, 1.0, 0.001, budgets, AcrRule::ExpectedCount);
        REQUIRE(r.crossovers.size() == 2);
        CHECK(r.crossovers[0].from_n == 50);
        CHECK(r.crossovers[1].to_n == 200);
        CHECK(r.acr[0][0] == doctest::Approx(0.565478939839).epsilon(1e-10));
    }
    SUBCASE("exact expectation") {
        const SweepResult r = budget_sweep(configs, 1.0, 0.001, budgets);
        CHECK(r.acr[1][1] == doctest::Approx(0.767142112587).epsilon(1e-10));
        REQUIRE(r.crossovers.size() == 1);
        CHECK(r.crossovers[0].to_n == 100);
    }
    SUBCASE("a single budget has no flips") {
        const std::vector<std::int64_t> one{100};
        CHECK(budget_sweep(configs, 1.0, 0.001, one).crossovers.empty());
    }
    SUBCASE("budgets must increase") {
        const std::vector<std::int64_t> bad{100, 50};
        CHECK_THROWS_AS(budget_sweep(configs, 1.0, 0.001, bad), std::invalid_argument);
    }
}

TEST_CASE("best accuracy across sigma") {
    std::map<double, RadiusAccuracyCurve> curves;
    curves.emplace(0.25, RadiusAccuracyCurve({{0.0, 0.9}, {0.5, 0.4}, {1.0, 0.0}}));
    curves.emplace(0.5, RadiusAccuracyCurve({{0.0, 0.8}, {0.5, 0.6}, {1.0, 0.3}}));
    const std::vector<double> radii{0.0, 0.5, 1.0};
    const RadiusAccuracyCurve best = best_across_sigma(curves, radii);
    CHECK(best.points()[0].accuracy == 0.9);
    CHECK(best.points()[1].accuracy == 0.6);
    CHECK(best.points()[2].accuracy == 0.3);
}
