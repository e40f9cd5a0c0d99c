#pragma once

// Stochastic base classifiers queried under noise, including oracle
// classifiers whose p_A is known in closed form.

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace rsacr {

struct Label {
    int id = 0;
    auto operator<=>(const Label&) const = default;
};

using Point = std::vector<double>;

/// One labelled input. `id` keys both oracle lookups and random streams.
struct Sample {
    std::int64_t id = 0;
    Point x;
    Label label;
};

/// What a classifier consumes per query.
enum class NoiseKind {
    None,      // deterministic in x
    Uniform,   // one U[0,1) variate per query
    Gaussian,  // an isotropic N(0, sigma^2 I_d) vector, d = dim(x)
};

class StochasticClassifier {
public:
    virtual ~StochasticClassifier() = default;

    virtual int num_classes() const = 0;
    virtual NoiseKind noise_kind() const = 0;

    /// Must be total and deterministic in (sample, noise).
    virtual Label classify(const Sample& sample, std::span<const double> noise) const = 0;

    /// Exact probability that a query returns sample.label, when known.
    virtual std::optional<double> exact_pa(const Sample& /*sample*/, double /*sigma*/) const {
        return std::nullopt;
    }
};

class TrivialClassifier final : public StochasticClassifier {
public:
    TrivialClassifier(Label fixed, int num_classes);

    int num_classes() const override { return num_classes_; }
    NoiseKind noise_kind() const override { return NoiseKind::None; }
    Label classify(const Sample&, std::span<const double>) const override { return fixed_; }
    std::optional<double> exact_pa(const Sample& sample, double) const override {
        return sample.label == fixed_ ? 1.0 : 0.0;
    }
    Label fixed() const { return fixed_; }

private:
    Label fixed_;
    int num_classes_;
};

/// Returns the label emitted when a Bernoulli oracle query "fails".
using WrongLabelRule = std::function<Label(Label true_label, int num_classes)>;

/// (true_label + 1) mod num_classes.
Label rotate_label(Label true_label, int num_classes);

/// Returns the true label with probability p_A (per sample id), otherwise
/// the label chosen by the wrong-label rule.
class BernoulliOracle final : public StochasticClassifier {
public:
    BernoulliOracle(std::unordered_map<std::int64_t, double> per_sample_pa, int num_classes,
                    WrongLabelRule wrong = rotate_label);

    int num_classes() const override { return num_classes_; }
    NoiseKind noise_kind() const override { return NoiseKind::Uniform; }
    Label classify(const Sample& sample, std::span<const double> noise) const override;
    std::optional<double> exact_pa(const Sample& sample, double) const override;

    double pa(std::int64_t sample_id) const;

private:
    std::unordered_map<std::int64_t, double> pa_;
    int num_classes_;
    WrongLabelRule wrong_;
};

/// Binary classifier predicting class 1 iff w.(x + delta) + b > 0.
class LinearGaussianClassifier final : public StochasticClassifier {
public:
    LinearGaussianClassifier(std::vector<double> w, double b);

    int num_classes() const override { return 2; }
    NoiseKind noise_kind() const override { return NoiseKind::Gaussian; }
    Label classify(const Sample& sample, std::span<const double> noise) const override;
    std::optional<double> exact_pa(const Sample& sample, double sigma) const override;

    /// Phi((w.x + b) / (sigma ||w||)): probability of predicting class 1 at x.
    double class_one_probability(const Point& x, double sigma) const;

    const std::vector<double>& weights() const { return w_; }
    double bias() const { return b_; }

private:
    std::vector<double> w_;
    double b_;
    double norm_;
};

}  // namespace rsacr
