#include "rsacr/training.hpp"
#include "rsacr/statcore.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

using namespace rsacr;

namespace {

// Central-difference gradient of the loss with respect to every parameter.
std::vector<double> finite_difference_gradient(const MlpModel& model, const Eigen::VectorXd& x, Label label,
                                               double h) {
    MlpModel probe = model;
    std::vector<double> params = model.parameters();
    std::vector<double> out(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        probe.set_parameters(params);
        const double up = probe.forward_loss(x, label).loss;
        params[i] = saved - h;
        probe.set_parameters(params);
        const double down = probe.forward_loss(x, label).loss;
        params[i] = saved;
        out[i] = (up - down) / (2.0 * h);
    }
    return out;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

MlpModel zero_model(std::vector<int> sizes) {
    MlpModel m(std::move(sizes), 0);
    m.set_parameters(std::vector<double>(m.parameter_count(), 0.0));
    return m;
}

Dataset separable_blobs() {
    BlobSpec spec;
    spec.num_classes = 2;
    spec.per_class = 30;
    spec.center_radius = 2.0;
    spec.spread = 0.3;
    spec.seed = 4;
    return make_gaussian_blobs(spec);
}

}  // namespace

TEST_CASE("blob datasets") {
    BlobSpec spec;
    spec.dim = 8;
    spec.first_id = 100;
    const Dataset d = make_gaussian_blobs(spec);
    CHECK(d.samples.size() == 300);
    CHECK(d.dim == 8);
    CHECK(d.samples.front().id == 100);
    CHECK(d.samples.back().id == 399);
    CHECK(d.samples[4].label == Label{1});
    spec.class_spreads = {0.1, 0.2};
    CHECK_THROWS_AS(make_gaussian_blobs(spec), std::invalid_argument);
    spec.class_spreads = {0.1, 0.2, 0.0};
    CHECK_THROWS_AS(make_gaussian_blobs(spec), std::invalid_argument);
}

TEST_CASE("MLP forward pass and loss") {
    const MlpModel zero = zero_model({2, 5, 4});
    const Eigen::Vector2d x(0.3, -1.2);
    for (int label = 0; label < 4; ++label) {
        CHECK(zero.forward_loss(x, Label{label}).loss == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    }
    MlpModel confident = zero;
    std::vector<double> params = confident.parameters();
    params.back() = 50.0;  // bias of the last logit
    confident.set_parameters(params);
    CHECK(confident.forward_loss(x, Label{3}).loss < 1e-20);
    CHECK(confident.predict(x) == Label{3});
    CHECK_THROWS_AS(zero.forward_loss(x, Label{4}), std::invalid_argument);
    CHECK_THROWS_AS(zero.logits(Eigen::Vector3d::Zero()), std::invalid_argument);
    CHECK_THROWS_AS(MlpModel({2, 0, 3}, 0), std::invalid_argument);
}

TEST_CASE("analytic gradients match central differences") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        RandomStream stream{seed, 42};
        const int dim = 1 + static_cast<int>(seed % 4);
        const MlpModel model({dim, 6, 5, 3}, seed);
        Eigen::VectorXd x(dim);
        for (int i = 0; i < dim; ++i) x(i) = 2.0 * stream.normal();
        const Label label{static_cast<int>(seed % 3)};

        MlpGradients grads = model.zero_gradients();
        Eigen::VectorXd input_grad;
        model.accumulate_gradients(x, label, 1.0, grads, &input_grad);
        CHECK(relative_error(flatten(grads), finite_difference_gradient(model, x, label, 1e-5)) < 1e-4);

        std::vector<double> fd_input(static_cast<std::size_t>(dim));
        for (int i = 0; i < dim; ++i) {
            Eigen::VectorXd up = x, down = x;
            up(i) += 1e-5;
            down(i) -= 1e-5;
            fd_input[static_cast<std::size_t>(i)] =
                (model.forward_loss(up, label).loss - model.forward_loss(down, label).loss) / 2e-5;
        }
        CHECK(relative_error({input_grad.data(), input_grad.data() + dim}, fd_input) < 1e-4);
    }
}

TEST_CASE("Gaussian training steps") {
    const Dataset data = separable_blobs();
    std::vector<const Sample*> batch;
    for (const auto& s : data.samples) batch.push_back(&s);

    SUBCASE("sigma = 0 is plain training on clean inputs") {
        MlpModel a({2, 8, 2}, 1);
        MlpModel b = a;
        RandomStream stream{5};
        gaussian_train_step(a, batch, 3, 0.0, 0.1, stream);
        std::vector<std::vector<Eigen::VectorXd>> clean(batch.size(), {Eigen::VectorXd::Zero(2)});
        train_on_noises(b, batch, clean, 0.1);
        CHECK(relative_error(a.parameters(), b.parameters()) < 1e-14);
    }
    SUBCASE("m = 1 is single-noise augmentation") {
        MlpModel a({2, 8, 2}, 1);
        MlpModel b = a;
        RandomStream s1{6};
        RandomStream s2{6};
        gaussian_train_step(a, batch, 1, 0.4, 0.1, s1);
        std::vector<std::vector<Eigen::VectorXd>> noises;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            Eigen::VectorXd d(2);
            d(0) = 0.4 * s2.normal();
            d(1) = 0.4 * s2.normal();
            noises.push_back({d});
        }
        train_on_noises(b, batch, noises, 0.1);
        CHECK(a.parameters() == b.parameters());
    }
    SUBCASE("clean loss decreases over the first ten full-batch steps") {
        MlpModel model({2, 8, 2}, 3);
        RandomStream stream{7};
        auto clean_loss = [&] {
            double total = 0.0;
            for (const auto* s : batch) total += model.forward_loss(as_vector(s->x), s->label).loss;
            return total / static_cast<double>(batch.size());
        };
        double prev = clean_loss();
        for (int step = 0; step < 10; ++step) {
            gaussian_train_step(model, batch, 4, 0.1, 0.01, stream);
            const double now = clean_loss();
            CHECK(now < prev);
            prev = now;
        }
    }
    SUBCASE("m must be positive") {
        MlpModel model({2, 3, 2}, 0);
        RandomStream stream{1};
        CHECK_THROWS_AS(gaussian_train_step(model, batch, 0, 0.1, 0.1, stream), std::invalid_argument);
    }
}

TEST_CASE("p_A estimates") {
    MlpModel sure = zero_model({2, 4, 3});
    std::vector<double> params = sure.parameters();
    params[params.size() - 2] = 30.0;  // bias of logit 1
    sure.set_parameters(params);
    RandomStream stream{1};
    const Sample s{0, {0.0, 0.0}, Label{1}};
    const PaEstimate est = estimate_pa(sure, s, 16, 0.5, 0.1, stream);
    CHECK(est.count == 16);
    CHECK(est.p_point == 1.0);
    CHECK(est.p_lcb == doctest::Approx(std::pow(0.1, 1.0 / 16)).epsilon(1e-12));
    CHECK(est.p_lcb == doctest::Approx(0.866).epsilon(1e-3));
    CHECK(clopper_pearson_lower(12, 16, ConfidenceLevel::from_alpha(0.1)) < 0.75);
    CHECK(reweight_weight(clopper_pearson_lower(12, 16, ConfidenceLevel::from_alpha(0.1)), 0.75) == 1.0);
    CHECK_THROWS_AS(estimate_pa(sure, s, 0, 0.5, 0.1, stream), std::invalid_argument);
}

TEST_CASE("hard-sample discard") {
    const Dataset data = separable_blobs();
    TrainConfig config;
    config.epochs = 5;
    config.E_t = 6;
    config.hidden = {8};
    config.sigma = 1.0;
    const MlpModel model = train_pipeline(data, config).model;

    SUBCASE("threshold extremes") {
        WeightedDataset all(data.samples);
        CHECK(discard_hard(all, model, 0.0, 50, 1.0, 3) == 1.0);
        WeightedDataset strict(data.samples);
        discard_hard(strict, model, 1.0, 50, 1.0, 3);
        // Replays each sample's discard stream: only perfect counts survive p_t = 1.
        for (std::size_t i = 0; i < data.samples.size(); ++i) {
            RandomStream stream{3, 3, static_cast<std::uint64_t>(data.samples[i].id)};
            const PaEstimate est = estimate_pa(model, data.samples[i], 50, 1.0, 0.5, stream);
            CHECK(strict.active[i] == (est.count == 50));
        }
        CHECK(strict.remaining_ratio() < 1.0);
    }
    SUBCASE("remaining ratio is nonincreasing in p_t") {
        double prev = 1.0;
        for (double p_t : {0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99}) {
            WeightedDataset d(data.samples);
            const double ratio = discard_hard(d, model, p_t, 100, 1.0, 9);
            CHECK(ratio <= prev);
            prev = ratio;
        }
    }
    SUBCASE("larger sigma discards more") {
        double prev = 1.0;
        for (double sigma : {0.25, 1.0, 2.0, 4.0}) {
            WeightedDataset d(data.samples);
            const double ratio = discard_hard(d, model, 0.8, 100, sigma, 9);
            CHECK(ratio <= prev);
            prev = ratio;
        }
        CHECK(prev < 1.0);
    }
    SUBCASE("discarding everything is an error and leaves the data untouched") {
        WeightedDataset d(data.samples);
        const MlpModel constant = zero_model({2, 3, 2});  // always predicts class 0
        std::vector<Sample> ones;
        for (const auto& s : data.samples) {
            if (s.label == Label{1}) ones.push_back(s);
        }
        WeightedDataset only_ones(ones);
        CHECK_THROWS_AS(discard_hard(only_ones, constant, 0.5, 10, 1.0, 0), AllDiscardedError);
        CHECK(only_ones.remaining_ratio() == 1.0);
        CHECK_THROWS_AS(discard_hard(d, model, 1.5, 10, 1.0, 0), std::invalid_argument);
    }
}

TEST_CASE("reweighting") {
    CHECK(reweight_weight(0.6, 0.75) == 1.0);
    CHECK(reweight_weight(0.75, 0.75) == 1.0);
    CHECK(reweight_weight(0.9, 0.75) == doctest::Approx(std_normal_inv_cdf(0.9) / std_normal_inv_cdf(0.75)));
    CHECK(reweight_weight(0.9, 0.75) == doctest::Approx(1.900).epsilon(1e-3));
    CHECK_THROWS_AS(reweight_weight(0.9, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(reweight_weight(0.9, 1.0), std::invalid_argument);

    SUBCASE("weights follow the lower confidence bound") {
        const Dataset data = separable_blobs();
        MlpModel sure = zero_model({2, 4, 2});
        std::vector<double> params = sure.parameters();
        params.back() = 30.0;  // always class 1
        sure.set_parameters(params);
        WeightedDataset d(data.samples);
        reweight(d, sure, 0.75, 16, 0.1, 0.5, 2);
        const double top = reweight_weight(std::pow(0.1, 1.0 / 16), 0.75);
        for (std::size_t i = 0; i < d.samples.size(); ++i) {
            CHECK(d.weights[i] == doctest::Approx(d.samples[i].label == Label{1} ? top : 1.0));
        }
    }
}

TEST_CASE("weighted sampling") {
    std::vector<Sample> samples;
    for (int i = 0; i < 4; ++i) samples.push_back(Sample{i, {0.0, 0.0}, Label{0}});
    WeightedDataset d(samples);
    d.weights = {1.0, 3.0, 5.0, 2.0};
    d.active[2] = false;
    RandomStream stream{8};
    const auto draws = weighted_draw(d, 60000, stream);
    std::vector<int> counts(4, 0);
    for (auto i : draws) ++counts[i];
    CHECK(counts[2] == 0);
    const double total = 6.0;
    for (int i : {0, 1, 3}) {
        const double p = d.weights[static_cast<std::size_t>(i)] / total;
        CHECK(std::abs(counts[static_cast<std::size_t>(i)] / 60000.0 - p) < 4.0 * std::sqrt(p * (1 - p) / 60000.0));
    }
    d.active = {false, false, false, false};
    CHECK_THROWS_AS(weighted_draw(d, 1, stream), std::invalid_argument);
}

TEST_CASE("adaptive attack on the noise") {
    const Dataset data = separable_blobs();
    TrainConfig config;
    config.epochs = 10;
    config.E_t = 11;
    config.hidden = {8};
    config.sigma = 0.5;
    const MlpModel model = train_pipeline(data, config).model;

    SUBCASE("keeps the noise norm and never lowers the loss on average") {
        double gained = 0.0;
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            RandomStream stream{seed, 77};
            const Sample& s = data.samples[seed % data.samples.size()];
            Eigen::VectorXd d0(2);
            d0 << 0.5 * stream.normal(), 0.5 * stream.normal();
            for (auto norm : {AttackNorm::L2, AttackNorm::Linf}) {
                const Eigen::VectorXd d = adaptive_adv(model, as_vector(s.x), s.label, d0, 4, 0.5, norm);
                CHECK(std::abs(d.norm() - d0.norm()) <= 1e-9 * d0.norm());
                if (norm == AttackNorm::L2) {
                    gained += model.forward_loss(as_vector(s.x) + d, s.label).loss -
                              model.forward_loss(as_vector(s.x) + d0, s.label).loss;
                }
            }
        }
        CHECK(gained > 0.0);
    }
    SUBCASE("T = 0 and misclassified starts return the input noise") {
        const Sample& s = data.samples[0];
        Eigen::VectorXd d0(2);
        d0 << 0.3, -0.2;
        CHECK(adaptive_adv(model, as_vector(s.x), s.label, d0, 0, 0.5, AttackNorm::L2) == d0);
        const Label wrong{1 - s.label.id};
        Eigen::VectorXd far = -10.0 * as_vector(s.x);  // moves x deep into the other blob
        REQUIRE(model.predict(as_vector(s.x) + far) != s.label);
        CHECK(adaptive_adv(model, as_vector(s.x), s.label, far, 5, 0.5, AttackNorm::L2) == far);
        (void)wrong;
    }
    SUBCASE("a zero gradient stops the loop") {
        const MlpModel flat = zero_model({2, 3, 2});  // predicts class 0 everywhere
        Eigen::VectorXd d0(2);
        d0 << 0.3, 0.4;
        CHECK(adaptive_adv(flat, Eigen::Vector2d(1.0, 1.0), Label{0}, d0, 5, 0.5, AttackNorm::L2) == d0);
    }
    SUBCASE("argument checks") {
        const Eigen::Vector2d d0(0.1, 0.1);
        CHECK_THROWS_AS(adaptive_adv(model, d0, Label{0}, d0, -1, 0.5, AttackNorm::L2), std::invalid_argument);
        CHECK_THROWS_AS(adaptive_adv(model, d0, Label{0}, d0, 1, 0.0, AttackNorm::L2), std::invalid_argument);
    }
}

TEST_CASE("isotropic Gaussian density depends only on the norm") {
    Eigen::VectorXd d(3);
    d << 0.3, -1.1, 0.7;
    const auto [a, b] = gaussian_log_densities(d, -d, 0.5);
    CHECK(a == b);
    const double expected = -1.5 * std::log(2.0 * std::numbers::pi) - 3.0 * std::log(0.5) - d.squaredNorm() / 0.5;
    CHECK(a == doctest::Approx(expected).epsilon(1e-14));
    Eigen::VectorXd rotated(3);
    rotated << d.norm(), 0.0, 0.0;
    const auto [c, e] = gaussian_log_densities(d, rotated, 0.5);
    CHECK(std::abs(c - e) < 1e-12);
    const auto [f, g] = gaussian_log_densities(d, 1.01 * d, 0.5);
    CHECK(f > g);
    CHECK_THROWS_AS(gaussian_log_densities(d, Eigen::Vector2d::Zero(), 0.5), std::invalid_argument);
}

TEST_CASE("training configuration") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.p_min = 0.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.m = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.eps = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.learning_rate = 0.1;
    c.lr_decay_epochs = {10, 20};
    CHECK(c.learning_rate_at(10) == doctest::Approx(0.1));
    CHECK(c.learning_rate_at(11) == doctest::Approx(0.01));
    CHECK(c.learning_rate_at(21) == doctest::Approx(0.001));
}

TEST_CASE("training pipeline") {
    const Dataset data = separable_blobs();
    TrainConfig config;
    config.epochs = 8;
    config.E_t = 3;
    config.reweight_every = 2;
    config.hidden = {6};

    SUBCASE("deterministic given the seed") {
        const TrainResult a = train_pipeline(data, config);
        const TrainResult b = train_pipeline(data, config);
        CHECK(a.model.parameters() == b.model.parameters());
        REQUIRE(a.log.size() == 8);
        CHECK(a.log[0].epoch == 1);
        CHECK(a.log[1].remaining_ratio == 1.0);
        CHECK(a.log[7].mean_weight >= 1.0);
        config.seed = 1;
        CHECK(train_pipeline(data, config).model.parameters() != a.model.parameters());
    }
    SUBCASE("a discard epoch past the end is plain Gaussian training") {
        TrainConfig late = config;
        late.E_t = 100;
        CHECK(train_pipeline(data, late).model.parameters() ==
              train_pipeline(data, gaussian_only(config)).model.parameters());
    }
    SUBCASE("discarding everything propagates") {
        TrainConfig harsh = config;
        harsh.E_t = 1;
        harsh.p_t = 1.0;
        harsh.sigma = 20.0;
        CHECK_THROWS_AS(train_pipeline(data, harsh), AllDiscardedError);
    }
}

TEST_CASE("gradient norm by difficulty") {
    const MlpModel flat = zero_model({2, 4, 2});  // predicts class 0 everywhere
    const Dataset data = separable_blobs();
    SUBCASE("identical gradients give ratio one") {
        const GradNormReport r = gradient_norm_by_difficulty(flat, data.samples, 0.5, 20, 1);
        CHECK(r.easy_count == 30);
        CHECK(r.hard_count == 30);
        REQUIRE(r.ratio.has_value());
        CHECK(*r.ratio == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("an empty class leaves the ratio undefined") {
        std::vector<Sample> zeros;
        for (const auto& s : data.samples) {
            if (s.label == Label{0}) zeros.push_back(s);
        }
        const GradNormReport r = gradient_norm_by_difficulty(flat, zeros, 0.5, 20, 1);
        CHECK(r.hard_count == 0);
        CHECK_FALSE(r.ratio.has_value());
    }
    SUBCASE("the attacked objective leaves hard samples alone") {
        const GradNormReport plain = gradient_norm_by_difficulty(flat, data.samples, 0.5, 20, 1);
        const GradNormReport attacked =
            gradient_norm_by_difficulty(flat, data.samples, 0.5, 20, 1, AttackSpec{4, 0.5, AttackNorm::L2});
        CHECK(attacked.hard_mean == plain.hard_mean);
    }
}
