#include "rsacr/classifiers.hpp"

#include "rsacr/statcore.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rsacr {

TrivialClassifier::TrivialClassifier(Label fixed, int num_classes)
    : fixed_(fixed), num_classes_(num_classes) {
    if (num_classes < 1 || fixed.id < 0 || fixed.id >= num_classes) {
        throw std::invalid_argument("TrivialClassifier: fixed label outside [0, num_classes)");
    }
}

Label rotate_label(Label true_label, int num_classes) {
    return Label{(true_label.id + 1) % num_classes};
}

BernoulliOracle::BernoulliOracle(std::unordered_map<std::int64_t, double> per_sample_pa,
                                 int num_classes, WrongLabelRule wrong)
    : pa_(std::move(per_sample_pa)), num_classes_(num_classes), wrong_(std::move(wrong)) {
    if (num_classes < 2) throw std::invalid_argument("BernoulliOracle: need >= 2 classes");
    for (const auto& [id, p] : pa_) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("BernoulliOracle: p_A of sample " + std::to_string(id) +
                                        " outside [0, 1]");
        }
    }
}

double BernoulliOracle::pa(std::int64_t sample_id) const {
    const auto it = pa_.find(sample_id);
    if (it == pa_.end()) {
        throw std::invalid_argument("BernoulliOracle: unknown sample id " +
                                    std::to_string(sample_id));
    }
    return it->second;
}

Label BernoulliOracle::classify(const Sample& sample, std::span<const double> noise) const {
    if (noise.empty()) throw std::invalid_argument("BernoulliOracle: needs one uniform variate");
    if (noise[0] < pa(sample.id)) return sample.label;
    return wrong_(sample.label, num_classes_);
}

std::optional<double> BernoulliOracle::exact_pa(const Sample& sample, double) const {
    return pa(sample.id);
}

LinearGaussianClassifier::LinearGaussianClassifier(std::vector<double> w, double b)
    : w_(std::move(w)), b_(b) {
    norm_ = std::sqrt(std::inner_product(w_.begin(), w_.end(), w_.begin(), 0.0));
    if (!(norm_ > 0.0)) throw std::invalid_argument("LinearGaussianClassifier: ||w|| must be > 0");
}

Label LinearGaussianClassifier::classify(const Sample& sample,
                                         std::span<const double> noise) const {
    if (sample.x.size() != w_.size()) {
        throw std::invalid_argument("LinearGaussianClassifier: dimension mismatch");
    }
    double score = b_;
    for (std::size_t i = 0; i < w_.size(); ++i) {
        const double shift = noise.empty() ? 0.0 : noise[i];
        score += w_[i] * (sample.x[i] + shift);
    }
    return Label{score > 0.0 ? 1 : 0};
}

double LinearGaussianClassifier::class_one_probability(const Point& x, double sigma) const {
    if (x.size() != w_.size()) {
        throw std::invalid_argument("LinearGaussianClassifier: dimension mismatch");
    }
    const double margin = std::inner_product(w_.begin(), w_.end(), x.begin(), b_);
    return std_normal_cdf(margin / (sigma * norm_));
}

std::optional<double> LinearGaussianClassifier::exact_pa(const Sample& sample,
                                                         double sigma) const {
    if (sample.x.size() != w_.size()) {
        throw std::invalid_argument("LinearGaussianClassifier: dimension mismatch");
    }
    const double z = std::inner_product(w_.begin(), w_.end(), sample.x.begin(), b_) / (sigma * norm_);
    return std_normal_cdf(sample.label.id == 1 ? z : -z);
}

}  // namespace rsacr
