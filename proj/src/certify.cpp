#include "rsacr/certify.hpp"

#include "rsacr/rng.hpp"
#include "rsacr/statcore.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rsacr {

void CertificationBudget::validate() const {
    if (n < 1) throw std::invalid_argument("budget: n must be >= 1");
    if (n0 < 0) throw std::invalid_argument("budget: n0 must be >= 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("budget: alpha must lie in (0, 1)");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("budget: sigma must be > 0");
}

double certified_radius(double p_a, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("certified_radius: sigma must be > 0");
    if (!(p_a >= 0.0 && p_a <= 1.0)) {
        throw std::invalid_argument("certified_radius: p_A outside [0, 1]");
    }
    if (p_a <= 0.5) return 0.0;
    if (p_a == 1.0) throw std::domain_error("certified_radius: p_A = 1 gives an unbounded radius");
    return sigma * std_normal_inv_cdf(p_a);
}

double radius_sensitivity(double p_a, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("radius_sensitivity: sigma must be > 0");
    return sigma / std_normal_pdf(std_normal_inv_cdf(p_a));
}

double max_certifiable_radius(std::int64_t n, double alpha, double sigma) {
    if (n < 1) throw std::invalid_argument("max_certifiable_radius: n must be >= 1");
    const double shortfall = -std::expm1(std::log(alpha) / static_cast<double>(n));
    if (shortfall >= 0.5) return 0.0;
    return sigma * std_normal_inv_sf(shortfall);
}

SampleRecord certify(const StochasticClassifier& classifier, const Sample& sample,
                     const CertificationBudget& budget, std::uint64_t seed) {
    budget.validate();
    RandomStream stream{seed, static_cast<std::uint64_t>(sample.id)};

    std::vector<double> noise;
    switch (classifier.noise_kind()) {
        case NoiseKind::None: break;
        case NoiseKind::Uniform: noise.resize(1); break;
        case NoiseKind::Gaussian: noise.resize(sample.x.size()); break;
    }
    auto draw = [&]() {
        if (classifier.noise_kind() == NoiseKind::Uniform) {
            noise[0] = stream.uniform();
        } else if (classifier.noise_kind() == NoiseKind::Gaussian) {
            for (double& v : noise) v = budget.sigma * stream.normal();
        }
        return classifier.classify(sample, noise);
    };

    Label candidate = sample.label;
    if (budget.n0 > 0) {
        std::vector<std::int64_t> votes(static_cast<std::size_t>(classifier.num_classes()), 0);
        for (std::int64_t i = 0; i < budget.n0; ++i) ++votes.at(static_cast<std::size_t>(draw().id));
        std::size_t best = 0;
        for (std::size_t c = 1; c < votes.size(); ++c) {
            if (votes[c] > votes[best]) best = c;  // ties keep the smaller id
        }
        candidate = Label{static_cast<int>(best)};
    }

    std::int64_t count = 0;
    for (std::int64_t i = 0; i < budget.n; ++i) {
        if (draw() == candidate) ++count;
    }

    SampleRecord record;
    record.sample_id = sample.id;
    record.label = sample.label;
    record.count = count;
    record.n = budget.n;
    record.p_hat = clopper_pearson_lower(count, budget.n, ConfidenceLevel::from_alpha(budget.alpha));
    if (record.p_hat > 0.5) {
        record.outcome = OutcomeKind::Certified;
        record.predicted = candidate;
        record.radius = candidate == sample.label ? certified_radius(record.p_hat, budget.sigma) : 0.0;
    }
    return record;
}

std::vector<SampleRecord> certify_all(const StochasticClassifier& classifier,
                                      std::span<const Sample> samples,
                                      const CertificationBudget& budget, std::uint64_t seed) {
    std::vector<SampleRecord> records;
    records.reserve(samples.size());
    for (const Sample& s : samples) records.push_back(certify(classifier, s, budget, seed));
    return records;
}

namespace {

// Radii by count, filled on demand; 0 marks "no positive certificate".
class RadiusTable {
public:
    explicit RadiusTable(const CertificationBudget& budget)
        : budget_(budget),
          conf_(ConfidenceLevel::from_alpha(budget.alpha)),
          radius_(static_cast<std::size_t>(budget.n + 1),
                  std::numeric_limits<double>::quiet_NaN()) {}

    double operator()(std::int64_t count) {
        double& r = radius_[static_cast<std::size_t>(count)];
        if (std::isnan(r)) {
            const double lcb = clopper_pearson_lower(count, budget_.n, conf_);
            r = lcb > 0.5 ? budget_.sigma * std_normal_inv_cdf(lcb) : 0.0;
        }
        return r;
    }

private:
    CertificationBudget budget_;
    ConfidenceLevel conf_;
    std::vector<double> radius_;
};

void require_nonempty(std::span<const PaCase> cases, const char* what) {
    if (cases.empty()) throw std::invalid_argument(std::string(what) + ": no samples");
    for (const PaCase& c : cases) {
        if (!(c.p_a >= 0.0 && c.p_a <= 1.0)) {
            throw std::invalid_argument(std::string(what) + ": p_A outside [0, 1]");
        }
    }
}

}  // namespace

double expected_acr_oracle(std::span<const PaCase> cases, const CertificationBudget& budget) {
    budget.validate();
    require_nonempty(cases, "expected_acr_oracle");
    if (budget.n0 != 0) {
        throw std::invalid_argument("expected_acr_oracle: requires n0 = 0 (fixed candidate class)");
    }
    if (budget.n > kMaxExactBudget) {
        throw std::invalid_argument("expected_acr_oracle: n = " + std::to_string(budget.n) +
                                    " exceeds the exact-summation limit");
    }
    RadiusTable radius(budget);
    double total = 0.0;
    for (const PaCase& c : cases) {
        if (!c.candidate_correct) continue;
        double expectation = 0.0;
        for (std::int64_t k = 0; k <= budget.n; ++k) {
            const double pmf = std::exp(binomial_log_pmf(k, budget.n, c.p_a));
            if (pmf == 0.0) continue;
            const double r = radius(k);
            if (r > 0.0) expectation += pmf * r;
        }
        total += expectation;
    }
    return total / static_cast<double>(cases.size());
}

double plugin_acr(std::span<const PaCase> cases, const CertificationBudget& budget) {
    budget.validate();
    require_nonempty(cases, "plugin_acr");
    const ConfidenceLevel conf = ConfidenceLevel::from_alpha(budget.alpha);
    const double nd = static_cast<double>(budget.n);
    double total = 0.0;
    for (const PaCase& c : cases) {
        if (!c.candidate_correct) continue;
        const double lcb = clopper_pearson_lower_real(std::min(nd, nd * c.p_a), budget.n, conf);
        if (lcb > 0.5) total += budget.sigma * std_normal_inv_cdf(lcb);
    }
    return total / static_cast<double>(cases.size());
}

double acr_under_rule(AcrRule rule, std::span<const PaCase> cases,
                      const CertificationBudget& budget) {
    return rule == AcrRule::ExactExpectation ? expected_acr_oracle(cases, budget)
                                             : plugin_acr(cases, budget);
}

double trivial_acr_bound(int num_classes, double sigma, double n, double alpha) {
    if (num_classes < 2) throw std::invalid_argument("trivial_acr_bound: need >= 2 classes");
    if (!(sigma > 0.0)) throw std::invalid_argument("trivial_acr_bound: sigma must be > 0");
    if (!(n > 0.0)) throw std::invalid_argument("trivial_acr_bound: n must be > 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("trivial_acr_bound: alpha in (0, 1)");
    const double shortfall = -std::expm1(std::log(alpha) / n);  // 1 - alpha^{1/n}
    if (shortfall >= 0.5) return 0.0;
    if (shortfall <= 0.0) return std::numeric_limits<double>::infinity();
    return sigma * std_normal_inv_sf(shortfall) / num_classes;
}

}  // namespace rsacr
