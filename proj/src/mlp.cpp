#include "rsacr/mlp.hpp"

#include "rsacr/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace rsacr {

void MlpGradients::set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
}

double MlpGradients::squared_norm() const {
    double total = 0.0;
    for (const auto& w : weights) total += w.squaredNorm();
    for (const auto& b : biases) total += b.squaredNorm();
    return total;
}

MlpModel::MlpModel(std::vector<int> layer_sizes, std::uint64_t seed) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("MlpModel: need input and output sizes");
    for (int s : sizes_) {
        if (s < 1) throw std::invalid_argument("MlpModel: layer sizes must be positive");
    }
    if (sizes_.back() < 2) throw std::invalid_argument("MlpModel: need >= 2 classes");
    RandomStream stream{seed, 0x6d6c70ULL};
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const int in = sizes_[l];
        const int out = sizes_[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        Eigen::MatrixXd w(out, in);
        for (int c = 0; c < in; ++c) {
            for (int r = 0; r < out; ++r) w(r, c) = limit * (2.0 * stream.uniform() - 1.0);
        }
        weights_.push_back(std::move(w));
        biases_.push_back(Eigen::VectorXd::Zero(out));
    }
}

Eigen::VectorXd MlpModel::logits(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != input_dim()) throw std::invalid_argument("MlpModel: input dimension mismatch");
    Eigen::VectorXd a = x;
    const std::size_t last = weights_.size() - 1;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Eigen::VectorXd z = weights_[l] * a + biases_[l];
        a = l == last ? std::move(z) : Eigen::VectorXd(z.array().tanh());
    }
    return a;
}

namespace {

double cross_entropy(const Eigen::VectorXd& logits, int label, Eigen::VectorXd* softmax) {
    const double top = logits.maxCoeff();
    const Eigen::ArrayXd shifted = (logits.array() - top).exp();
    const double sum = shifted.sum();
    if (softmax) *softmax = shifted.matrix() / sum;
    return std::log(sum) + top - logits(label);
}

void check_label(Label label, int num_classes) {
    if (label.id < 0 || label.id >= num_classes) {
        throw std::invalid_argument("MlpModel: label outside [0, num_classes)");
    }
}

}  // namespace

ForwardResult MlpModel::forward_loss(const Eigen::Ref<const Eigen::VectorXd>& x, Label label) const {
    check_label(label, num_classes());
    ForwardResult out;
    out.logits = logits(x);
    out.loss = cross_entropy(out.logits, label.id, nullptr);
    return out;
}

Label MlpModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Eigen::Index best = 0;
    logits(x).maxCoeff(&best);
    return Label{static_cast<int>(best)};
}

double MlpModel::accumulate_gradients(const Eigen::Ref<const Eigen::VectorXd>& x, Label label,
                                      double scale, MlpGradients& grads,
                                      Eigen::VectorXd* input_grad) const {
    check_label(label, num_classes());
    if (x.size() != input_dim()) throw std::invalid_argument("MlpModel: input dimension mismatch");
    const std::size_t layers = weights_.size();
    std::vector<Eigen::VectorXd> acts;  // acts[l] feeds layer l
    acts.reserve(layers + 1);
    acts.emplace_back(x);
    for (std::size_t l = 0; l < layers; ++l) {
        Eigen::VectorXd z = weights_[l] * acts.back() + biases_[l];
        if (l + 1 < layers) z = z.array().tanh();
        acts.push_back(std::move(z));
    }
    Eigen::VectorXd delta;
    const double loss = cross_entropy(acts.back(), label.id, &delta);
    delta(label.id) -= 1.0;  // dloss/dlogits

    for (std::size_t l = layers; l-- > 0;) {
        grads.weights[l].noalias() += scale * delta * acts[l].transpose();
        grads.biases[l] += scale * delta;
        if (l > 0) {
            Eigen::VectorXd back = weights_[l].transpose() * delta;
            delta = back.array() * (1.0 - acts[l].array().square());
        } else if (input_grad) {
            *input_grad = weights_[0].transpose() * delta;
        }
    }
    return loss;
}

Eigen::VectorXd MlpModel::input_gradient(const Eigen::Ref<const Eigen::VectorXd>& x,
                                         Label label) const {
    MlpGradients scratch = zero_gradients();
    Eigen::VectorXd g;
    accumulate_gradients(x, label, 0.0, scratch, &g);
    return g;
}

MlpGradients MlpModel::zero_gradients() const {
    MlpGradients g;
    for (const auto& w : weights_) g.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : biases_) g.biases.push_back(Eigen::VectorXd::Zero(b.size()));
    return g;
}

void MlpModel::apply_update(const MlpGradients& grads, double learning_rate) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        weights_[l] -= learning_rate * grads.weights[l];
        biases_[l] -= learning_rate * grads.biases[l];
    }
}

std::size_t MlpModel::parameter_count() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        total += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
    }
    return total;
}

std::vector<double> MlpModel::parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        flat.insert(flat.end(), weights_[l].data(), weights_[l].data() + weights_[l].size());
        flat.insert(flat.end(), biases_[l].data(), biases_[l].data() + biases_[l].size());
    }
    return flat;
}

void MlpModel::set_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) {
        throw std::invalid_argument("MlpModel::set_parameters: size mismatch");
    }
    std::size_t at = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        for (Eigen::Index i = 0; i < weights_[l].size(); ++i) weights_[l].data()[i] = flat[at++];
        for (Eigen::Index i = 0; i < biases_[l].size(); ++i) biases_[l].data()[i] = flat[at++];
    }
}

std::vector<double> flatten(const MlpGradients& grads) {
    std::vector<double> flat;
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        const auto& w = grads.weights[l];
        const auto& b = grads.biases[l];
        flat.insert(flat.end(), w.data(), w.data() + w.size());
        flat.insert(flat.end(), b.data(), b.data() + b.size());
    }
    return flat;
}

Label MlpClassifier::classify(const Sample& sample, std::span<const double> noise) const {
    Eigen::Map<const Eigen::VectorXd> x(sample.x.data(), static_cast<Eigen::Index>(sample.x.size()));
    if (noise.empty()) return model_.predict(x);
    Eigen::Map<const Eigen::VectorXd> d(noise.data(), static_cast<Eigen::Index>(noise.size()));
    return model_.predict(x + d);
}

}  // namespace rsacr
