#include "rsacr/training.hpp"

#include "rsacr/statcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace rsacr {
namespace {

// Stream tags; every stream is keyed by (seed, ..., tag, ...).
constexpr std::uint64_t kShuffle = 1;
constexpr std::uint64_t kNoise = 2;
constexpr std::uint64_t kDiscard = 3;
constexpr std::uint64_t kReweight = 4;
constexpr std::uint64_t kDraw = 5;
constexpr std::uint64_t kProxy = 6;
constexpr std::uint64_t kGradNorm = 7;

Eigen::VectorXd gaussian_noise(int dim, double sigma, RandomStream& stream) {
    Eigen::VectorXd d(dim);
    for (int i = 0; i < dim; ++i) d(i) = sigma * stream.normal();
    return d;
}

std::uint64_t u64(std::int64_t v) { return static_cast<std::uint64_t>(v); }

}  // namespace

Dataset make_gaussian_blobs(const BlobSpec& spec) {
    if (spec.num_classes < 2 || spec.dim < 2 || spec.per_class < 1 || !(spec.spread > 0.0)) {
        throw std::invalid_argument("make_gaussian_blobs: invalid specification");
    }
    if (!spec.class_spreads.empty()) {
        if (spec.class_spreads.size() != static_cast<std::size_t>(spec.num_classes)) {
            throw std::invalid_argument("make_gaussian_blobs: need one spread per class");
        }
        for (double s : spec.class_spreads) {
            if (!(s > 0.0)) throw std::invalid_argument("make_gaussian_blobs: spreads must be > 0");
        }
    }
    Dataset out;
    out.num_classes = spec.num_classes;
    out.dim = spec.dim;
    RandomStream stream{spec.seed, 0xb10bULL};
    std::int64_t id = spec.first_id;
    for (int i = 0; i < spec.per_class; ++i) {
        for (int c = 0; c < spec.num_classes; ++c) {
            const double angle = 2.0 * std::numbers::pi * c / spec.num_classes;
            const double spread = spec.class_spreads.empty()
                                      ? spec.spread
                                      : spec.class_spreads[static_cast<std::size_t>(c)];
            Point x(static_cast<std::size_t>(spec.dim));
            for (int d = 0; d < spec.dim; ++d) x[static_cast<std::size_t>(d)] = spread * stream.normal();
            x[0] += spec.center_radius * std::cos(angle);
            x[1] += spec.center_radius * std::sin(angle);
            out.samples.push_back(Sample{id++, std::move(x), Label{c}});
        }
    }
    return out;
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("train config: " + msg); };
    if (m < 1) fail("m must be >= 1");
    if (epochs < 1) fail("epochs must be >= 1");
    if (E_t < 0) fail("E_t must be >= 0");
    if (!(p_t >= 0.0 && p_t <= 1.0)) fail("p_t must lie in [0, 1]");
    if (T < 0) fail("T must be >= 0");
    if (!(eps > 0.0)) fail("eps must be > 0");
    if (!(p_min > 0.5 && p_min < 1.0)) fail("p_min must lie in (0.5, 1)");
    if (!(sigma >= 0.0)) fail("sigma must be >= 0");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (!(lr_decay_factor > 0.0)) fail("lr_decay_factor must be > 0");
    if (reweight_every < 1) fail("reweight_every must be >= 1");
    if (reweight_n < 1) fail("reweight_n must be >= 1");
    if (!(reweight_alpha > 0.0 && reweight_alpha < 1.0)) fail("reweight_alpha must lie in (0, 1)");
    if (discard_k < 1) fail("discard_k must be >= 1");
    if (batch_size < 1) fail("batch_size must be >= 1");
    for (int h : hidden) {
        if (h < 1) fail("hidden sizes must be positive");
    }
}

double TrainConfig::learning_rate_at(int epoch) const {
    double lr = learning_rate;
    for (int e : lr_decay_epochs) {
        if (epoch > e) lr *= lr_decay_factor;
    }
    return lr;
}

WeightedDataset::WeightedDataset(std::vector<Sample> s)
    : samples(std::move(s)), weights(samples.size(), 1.0), active(samples.size(), true) {}

std::size_t WeightedDataset::active_count() const {
    return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
}

double WeightedDataset::remaining_ratio() const {
    if (samples.empty()) return 0.0;
    return static_cast<double>(active_count()) / static_cast<double>(samples.size());
}

double WeightedDataset::mean_active_weight() const {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (active[i]) {
            total += weights[i];
            ++n;
        }
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
}

AllDiscardedError::AllDiscardedError(double p_t)
    : std::runtime_error("discard_hard: every sample has p_A below p_t = " + std::to_string(p_t)),
      p_t_(p_t) {}

Eigen::Map<const Eigen::VectorXd> as_vector(const Point& x) {
    return {x.data(), static_cast<Eigen::Index>(x.size())};
}

PaEstimate estimate_pa(const MlpModel& model, const Sample& sample, int k, double sigma,
                       double alpha, RandomStream& stream) {
    if (k < 1) throw std::invalid_argument("estimate_pa: k must be >= 1");
    const auto x = as_vector(sample.x);
    PaEstimate est;
    for (int i = 0; i < k; ++i) {
        if (model.predict(x + gaussian_noise(model.input_dim(), sigma, stream)) == sample.label) {
            ++est.count;
        }
    }
    est.p_point = static_cast<double>(est.count) / k;
    est.p_lcb = clopper_pearson_lower(est.count, k, ConfidenceLevel::from_alpha(alpha));
    return est;
}

double train_on_noises(MlpModel& model, std::span<const Sample* const> batch,
                       std::span<const std::vector<Eigen::VectorXd>> noises, double learning_rate) {
    if (batch.empty()) return 0.0;
    if (noises.size() != batch.size()) throw std::invalid_argument("train_on_noises: size mismatch");
    MlpGradients grads = model.zero_gradients();
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto x = as_vector(batch[i]->x);
        const auto& ds = noises[i];
        if (ds.empty()) throw std::invalid_argument("train_on_noises: no noise for a sample");
        const double scale = 1.0 / static_cast<double>(ds.size() * batch.size());
        for (const auto& d : ds) {
            loss += scale * model.accumulate_gradients(x + d, batch[i]->label, scale, grads);
        }
    }
    model.apply_update(grads, learning_rate);
    return loss;
}

double gaussian_train_step(MlpModel& model, std::span<const Sample* const> batch, int m,
                           double sigma, double learning_rate, RandomStream& stream) {
    if (m < 1) throw std::invalid_argument("gaussian_train_step: m must be >= 1");
    std::vector<std::vector<Eigen::VectorXd>> noises(batch.size());
    for (auto& ds : noises) {
        for (int i = 0; i < m; ++i) ds.push_back(gaussian_noise(model.input_dim(), sigma, stream));
    }
    return train_on_noises(model, batch, noises, learning_rate);
}

double discard_hard(WeightedDataset& data, const MlpModel& model, double p_t, int k, double sigma,
                    std::uint64_t seed) {
    if (!(p_t >= 0.0 && p_t <= 1.0)) throw std::invalid_argument("discard_hard: p_t outside [0, 1]");
    std::vector<bool> keep = data.active;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        if (!keep[i]) continue;
        RandomStream stream{seed, kDiscard, u64(data.samples[i].id)};
        const PaEstimate est = estimate_pa(model, data.samples[i], k, sigma, 0.5, stream);
        if (est.p_point < p_t) keep[i] = false;
    }
    if (std::count(keep.begin(), keep.end(), true) == 0) throw AllDiscardedError(p_t);
    data.active = std::move(keep);
    return data.remaining_ratio();
}

double reweight_weight(double p_hat, double p_min) {
    if (!(p_min > 0.5 && p_min < 1.0)) throw std::invalid_argument("reweight: p_min must lie in (0.5, 1)");
    if (p_hat <= p_min) return 1.0;
    return std::max(1.0, std_normal_inv_cdf(p_hat) / std_normal_inv_cdf(p_min));
}

void reweight(WeightedDataset& data, const MlpModel& model, double p_min, int k, double alpha,
              double sigma, std::uint64_t seed) {
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        if (!data.active[i]) continue;
        RandomStream stream{seed, kReweight, u64(data.samples[i].id)};
        const PaEstimate est = estimate_pa(model, data.samples[i], k, sigma, alpha, stream);
        data.weights[i] = reweight_weight(est.p_lcb, p_min);
    }
}

std::vector<std::size_t> weighted_draw(const WeightedDataset& data, std::size_t count,
                                       RandomStream& stream) {
    std::vector<double> cumulative(data.samples.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        if (data.active[i]) total += data.weights[i];
        cumulative[i] = total;
    }
    if (!(total > 0.0)) throw std::invalid_argument("weighted_draw: no active weight");
    std::vector<std::size_t> out;
    out.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        const double u = stream.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        if (it == cumulative.end()) --it;
        auto idx = static_cast<std::size_t>(it - cumulative.begin());
        while (!data.active[idx] || data.weights[idx] <= 0.0) --idx;  // only for u on a boundary
        out.push_back(idx);
    }
    return out;
}

Eigen::VectorXd adaptive_adv(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                             Label label, const Eigen::Ref<const Eigen::VectorXd>& delta0, int T,
                             double eps, AttackNorm norm) {
    if (T < 0) throw std::invalid_argument("adaptive_adv: T must be >= 0");
    if (!(eps > 0.0)) throw std::invalid_argument("adaptive_adv: eps must be > 0");
    Eigen::VectorXd delta = delta0;
    const double radius = delta0.norm();
    if (radius == 0.0) return delta;
    for (int t = 0; t < T; ++t) {
        if (model.predict(x + delta) != label) break;
        const Eigen::VectorXd g = model.input_gradient(x + delta, label);
        const double g_norm = g.norm();
        if (g_norm == 0.0) break;
        if (norm == AttackNorm::L2) {
            delta += (eps / g_norm) * g;
        } else {
            delta += eps * g.unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
        }
        const double d_norm = delta.norm();
        if (d_norm == 0.0) break;
        delta *= radius / d_norm;
    }
    return delta;
}

std::pair<double, double> gaussian_log_densities(const Eigen::Ref<const Eigen::VectorXd>& delta1,
                                                 const Eigen::Ref<const Eigen::VectorXd>& delta2,
                                                 double sigma) {
    if (delta1.size() != delta2.size()) {
        throw std::invalid_argument("gaussian_log_densities: dimension mismatch");
    }
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_log_densities: sigma must be > 0");
    const double d = static_cast<double>(delta1.size());
    const double constant = -0.5 * d * std::log(2.0 * std::numbers::pi) - d * std::log(sigma);
    const double scale = -0.5 / (sigma * sigma);
    return {constant + scale * delta1.squaredNorm(), constant + scale * delta2.squaredNorm()};
}

namespace {

double training_set_acr_proxy(const MlpModel& model, const std::vector<Sample>& samples,
                              const TrainConfig& cfg, std::uint64_t seed) {
    if (samples.empty() || cfg.sigma <= 0.0) return 0.0;
    double total = 0.0;
    for (const Sample& s : samples) {
        RandomStream stream{seed, kProxy, u64(s.id)};
        const PaEstimate est = estimate_pa(model, s, cfg.reweight_n, cfg.sigma, cfg.reweight_alpha, stream);
        if (est.p_lcb > 0.5) total += cfg.sigma * std_normal_inv_cdf(est.p_lcb);
    }
    return total / static_cast<double>(samples.size());
}

void shuffle_indices(std::vector<std::size_t>& idx, RandomStream& stream) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const auto j = std::min(i - 1, static_cast<std::size_t>(stream.uniform() * static_cast<double>(i)));
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace

TrainResult train_pipeline(const Dataset& dataset, const TrainConfig& config) {
    config.validate();
    if (dataset.samples.empty()) throw std::invalid_argument("train_pipeline: empty dataset");
    std::vector<int> sizes{dataset.dim};
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
    sizes.push_back(dataset.num_classes);
    TrainResult result{MlpModel(sizes, config.seed), {}};
    MlpModel& model = result.model;
    WeightedDataset data(dataset.samples);
    const std::size_t dataset_size = dataset.samples.size();
    const auto batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto e = static_cast<std::uint64_t>(epoch);
        const double lr = config.learning_rate_at(epoch);
        double loss_sum = 0.0;
        std::size_t steps = 0;

        if (epoch < config.E_t) {
            std::vector<std::size_t> order(dataset_size);
            std::iota(order.begin(), order.end(), 0);
            RandomStream shuffle{config.seed, e, kShuffle};
            shuffle_indices(order, shuffle);
            for (std::size_t start = 0; start < dataset_size; start += batch) {
                std::vector<const Sample*> members;
                std::vector<std::vector<Eigen::VectorXd>> noises;
                for (std::size_t j = start; j < std::min(dataset_size, start + batch); ++j) {
                    members.push_back(&data.samples[order[j]]);
                    RandomStream stream{config.seed, e, kNoise, j};
                    auto& ds = noises.emplace_back();
                    for (int i = 0; i < config.m; ++i) ds.push_back(gaussian_noise(dataset.dim, config.sigma, stream));
                }
                loss_sum += train_on_noises(model, members, noises, lr);
                ++steps;
            }
        } else {
            if (epoch == config.E_t) {
                discard_hard(data, model, config.p_t, config.discard_k, config.sigma,
                             RandomStream{config.seed, e, kDiscard}.bits());
            }
            if ((epoch - config.E_t) % config.reweight_every == 0) {
                reweight(data, model, config.p_min, config.reweight_n, config.reweight_alpha,
                         config.sigma, RandomStream{config.seed, e, kReweight}.bits());
            }
            RandomStream draw_stream{config.seed, e, kDraw};
            const auto drawn = weighted_draw(data, dataset_size, draw_stream);
            for (std::size_t start = 0; start < drawn.size(); start += batch) {
                std::vector<const Sample*> members;
                std::vector<std::vector<Eigen::VectorXd>> noises;
                for (std::size_t j = start; j < std::min(drawn.size(), start + batch); ++j) {
                    const Sample& s = data.samples[drawn[j]];
                    members.push_back(&s);
                    RandomStream stream{config.seed, e, kNoise, j};
                    auto& ds = noises.emplace_back();
                    const auto x = as_vector(s.x);
                    for (int i = 0; i < config.m; ++i) {
                        const Eigen::VectorXd d0 = gaussian_noise(dataset.dim, config.sigma, stream);
                        ds.push_back(adaptive_adv(model, x, s.label, d0, config.T, config.eps,
                                                  config.attack_norm));
                    }
                }
                loss_sum += train_on_noises(model, members, noises, lr);
                ++steps;
            }
        }

        EpochLog row;
        row.epoch = epoch;
        row.loss = steps == 0 ? 0.0 : loss_sum / static_cast<double>(steps);
        row.remaining_ratio = data.remaining_ratio();
        row.mean_weight = data.mean_active_weight();
        row.acr_proxy = training_set_acr_proxy(model, dataset.samples, config,
                                               RandomStream{config.seed, e, kProxy}.bits());
        result.log.push_back(row);
    }
    return result;
}

TrainConfig gaussian_only(TrainConfig config) {
    config.E_t = config.epochs + 1;
    return config;
}

GradNormReport gradient_norm_by_difficulty(const MlpModel& model, std::span<const Sample> samples,
                                           double sigma, int k, std::uint64_t seed,
                                           const std::optional<AttackSpec>& attack) {
    if (samples.empty()) throw std::invalid_argument("gradient_norm_by_difficulty: no samples");
    GradNormReport report;
    double easy_total = 0.0;
    double hard_total = 0.0;
    MlpGradients grads = model.zero_gradients();
    for (const Sample& s : samples) {
        RandomStream stream{seed, kGradNorm, u64(s.id)};
        const PaEstimate est = estimate_pa(model, s, k, sigma, 0.5, stream);
        if (est.p_point == 0.5) continue;
        grads.set_zero();
        const auto x = as_vector(s.x);
        Eigen::VectorXd d = gaussian_noise(model.input_dim(), sigma, stream);
        if (attack) d = adaptive_adv(model, x, s.label, d, attack->T, attack->eps, attack->norm);
        model.accumulate_gradients(x + d, s.label, 1.0, grads);
        const double norm = std::sqrt(grads.squared_norm());
        if (est.p_point > 0.5) {
            easy_total += norm;
            ++report.easy_count;
        } else {
            hard_total += norm;
            ++report.hard_count;
        }
    }
    if (report.easy_count > 0) report.easy_mean = easy_total / static_cast<double>(report.easy_count);
    if (report.hard_count > 0) report.hard_mean = hard_total / static_cast<double>(report.hard_count);
    if (report.easy_count > 0 && report.hard_count > 0 && report.hard_mean > 0.0) {
        report.ratio = report.easy_mean / report.hard_mean;
    }
    return report;
}

}  // namespace rsacr
