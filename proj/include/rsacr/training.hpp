#pragma once

// Toy-scale easy-sample-focused training: Gaussian training, hard-sample
// discard, radius-based reweighting and the sphere-projected adaptive
// attack on the noise, combined into one seeded pipeline.

#include "rsacr/mlp.hpp"
#include "rsacr/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rsacr {

struct Dataset {
    std::vector<Sample> samples;
    int num_classes = 0;
    int dim = 0;
};

/// Isotropic Gaussian blobs with centers evenly spaced on a circle in the
/// first two coordinates; `spread` controls class overlap.
struct BlobSpec {
    int num_classes = 3;
    int dim = 2;
    int per_class = 100;
    double center_radius = 1.0;
    double spread = 0.5;
    std::vector<double> class_spreads;  // overrides spread per class when nonempty
    std::uint64_t seed = 0;
    std::int64_t first_id = 0;
};

Dataset make_gaussian_blobs(const BlobSpec& spec);

enum class AttackNorm { L2, Linf };

struct TrainConfig {
    int m = 4;                 // noise samples per input
    int E_t = 20;              // discard epoch
    double p_t = 0.4;          // discard threshold on the point estimate of p_A
    int T = 4;                 // max attack steps
    double eps = 0.5;          // attack step size
    double p_min = 0.75;       // reweight reference probability
    double sigma = 0.5;
    int epochs = 60;
    double learning_rate = 0.1;
    std::vector<int> lr_decay_epochs{40};
    double lr_decay_factor = 0.1;
    std::uint64_t seed = 0;
    AttackNorm attack_norm = AttackNorm::L2;
    int reweight_every = 10;
    int reweight_n = 16;
    double reweight_alpha = 0.1;
    int discard_k = 100;
    int batch_size = 16;
    std::vector<int> hidden{32, 32};

    /// Throws std::invalid_argument on an invalid configuration.
    void validate() const;
    double learning_rate_at(int epoch) const;
};

struct WeightedDataset {
    std::vector<Sample> samples;
    std::vector<double> weights;
    std::vector<bool> active;

    explicit WeightedDataset(std::vector<Sample> s);

    std::size_t active_count() const;
    double remaining_ratio() const;
    double mean_active_weight() const;
};

class AllDiscardedError : public std::runtime_error {
public:
    explicit AllDiscardedError(double p_t);
    double p_t() const { return p_t_; }

private:
    double p_t_;
};

Eigen::Map<const Eigen::VectorXd> as_vector(const Point& x);

struct PaEstimate {
    std::int64_t count = 0;
    double p_point = 0.0;
    double p_lcb = 0.0;
};

/// Counts how many of k noisy copies x + delta the model assigns to `label`.
PaEstimate estimate_pa(const MlpModel& model, const Sample& sample, int k, double sigma,
                       double alpha, RandomStream& stream);

/// Averages the loss over the given noisy copies of each batch sample and
/// takes one gradient step. noises[i] holds the noise vectors of batch[i].
/// Returns the mean loss before the update.
double train_on_noises(MlpModel& model, std::span<const Sample* const> batch,
                       std::span<const std::vector<Eigen::VectorXd>> noises, double learning_rate);

/// One Gaussian-training step: m fresh N(0, sigma^2 I) noises per input.
double gaussian_train_step(MlpModel& model, std::span<const Sample* const> batch, int m,
                           double sigma, double learning_rate, RandomStream& stream);

/// Marks inactive every active sample whose point estimate of p_A (k draws)
/// is below p_t; returns the remaining-data ratio. Throws AllDiscardedError
/// if nothing would remain (the dataset is left unchanged in that case).
double discard_hard(WeightedDataset& data, const MlpModel& model, double p_t, int k,
                    double sigma, std::uint64_t seed);

/// max(1, Phi^{-1}(p_hat) / Phi^{-1}(p_min)), with p_hat <= p_min giving 1.
double reweight_weight(double p_hat, double p_min);

/// Sets the weight of each active sample from its Clopper-Pearson estimate
/// (k draws, level 1 - alpha).
void reweight(WeightedDataset& data, const MlpModel& model, double p_min, int k, double alpha,
              double sigma, std::uint64_t seed);

/// Draws `count` active indices with replacement, proportional to weight.
std::vector<std::size_t> weighted_draw(const WeightedDataset& data, std::size_t count,
                                       RandomStream& stream);

/// Projected ascent on the noise: stops once x + delta is misclassified,
/// otherwise steps on the loss gradient (l2: eps g/||g||, linf: eps sign g)
/// and rescales back to ||delta0||. A zero gradient ends the loop.
Eigen::VectorXd adaptive_adv(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                             Label label, const Eigen::Ref<const Eigen::VectorXd>& delta0, int T,
                             double eps, AttackNorm norm);

/// Log-densities of N(0, sigma^2 I_d) at two points of the same dimension.
std::pair<double, double> gaussian_log_densities(const Eigen::Ref<const Eigen::VectorXd>& delta1,
                                                 const Eigen::Ref<const Eigen::VectorXd>& delta2,
                                                 double sigma);

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double remaining_ratio = 1.0;
    double mean_weight = 1.0;
    double acr_proxy = 0.0;  // training-set ACR estimated with the reweighting budget
};

struct TrainResult {
    MlpModel model;
    std::vector<EpochLog> log;
};

/// Epochs are numbered from 1. Before E_t: Gaussian training on the full
/// set. At E_t: discard. From E_t on, every reweight_every epochs: reweight;
/// each epoch draws |D| weighted samples and trains on attacked noises.
TrainResult train_pipeline(const Dataset& dataset, const TrainConfig& config);

/// The same configuration with the discard epoch moved past the end, which
/// makes train_pipeline plain Gaussian training.
TrainConfig gaussian_only(TrainConfig config);

struct GradNormReport {
    double easy_mean = 0.0;
    double hard_mean = 0.0;
    std::size_t easy_count = 0;
    std::size_t hard_count = 0;
    std::optional<double> ratio;  // easy / hard; empty when a class is empty
};

struct AttackSpec {
    int T = 0;
    double eps = 0.5;
    AttackNorm norm = AttackNorm::L2;

    static AttackSpec from(const TrainConfig& c) { return {c.T, c.eps, c.attack_norm}; }
};

/// Splits samples at point-estimate p_A = 0.5 (k draws) and averages the
/// l2 norm of the parameter gradient of the loss at one Gaussian noise draw.
/// With an attack the draw is first passed through adaptive_adv, which
/// measures the objective the pipeline trains on after E_t.
GradNormReport gradient_norm_by_difficulty(const MlpModel& model, std::span<const Sample> samples,
                                           double sigma, int k, std::uint64_t seed,
                                           const std::optional<AttackSpec>& attack = std::nullopt);

}  // namespace rsacr
