#pragma once

// A small fully-connected classifier (tanh hidden layers, linear logits)
// with hand-written backpropagation.

#include "rsacr/classifiers.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace rsacr {

struct MlpGradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    void set_zero();
    double squared_norm() const;
};

struct ForwardResult {
    Eigen::VectorXd logits;
    double loss = 0.0;  // -log softmax(logits)[label]
};

class MlpModel {
public:
    /// layer_sizes = {input_dim, hidden..., num_classes}; Glorot-uniform
    /// weights and zero biases drawn from `seed`.
    MlpModel(std::vector<int> layer_sizes, std::uint64_t seed);

    int input_dim() const { return sizes_.front(); }
    int num_classes() const { return sizes_.back(); }
    const std::vector<int>& layer_sizes() const { return sizes_; }

    Eigen::VectorXd logits(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    ForwardResult forward_loss(const Eigen::Ref<const Eigen::VectorXd>& x, Label label) const;
    Label predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    /// Adds scale * dloss/dparams to `grads` and returns the loss. When
    /// `input_grad` is given it receives dloss/dx (unscaled).
    double accumulate_gradients(const Eigen::Ref<const Eigen::VectorXd>& x, Label label,
                                double scale, MlpGradients& grads,
                                Eigen::VectorXd* input_grad = nullptr) const;

    Eigen::VectorXd input_gradient(const Eigen::Ref<const Eigen::VectorXd>& x, Label label) const;

    MlpGradients zero_gradients() const;

    /// params -= learning_rate * grads
    void apply_update(const MlpGradients& grads, double learning_rate);

    std::size_t parameter_count() const;
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> flat);

    const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
    const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

private:
    std::vector<int> sizes_;
    std::vector<Eigen::MatrixXd> weights_;
    std::vector<Eigen::VectorXd> biases_;
};

/// Flattens gradients in the same order as MlpModel::parameters().
std::vector<double> flatten(const MlpGradients& grads);

/// Randomized-smoothing view of an MLP: classifies x + delta with
/// delta ~ N(0, sigma^2 I).
class MlpClassifier final : public StochasticClassifier {
public:
    explicit MlpClassifier(MlpModel model) : model_(std::move(model)) {}

    int num_classes() const override { return model_.num_classes(); }
    NoiseKind noise_kind() const override { return NoiseKind::Gaussian; }
    Label classify(const Sample& sample, std::span<const double> noise) const override;

    const MlpModel& model() const { return model_; }

private:
    MlpModel model_;
};

}  // namespace rsacr
