#include "rsacr/toy.hpp"

#include <algorithm>

namespace rsacr {

namespace {

ToyArm evaluate(TrainResult trained, const Dataset& test, const ToySetup& setup,
                const std::optional<AttackSpec>& objective_attack) {
    ToyArm arm{std::move(trained.model), std::move(trained.log), {}, 0.0, 0.0, {}, {}, {}, {}};
    const MlpClassifier classifier(arm.model);
    arm.records = certify_all(classifier, test.samples, setup.budget(), setup.cert_seed);
    arm.acr = acr(arm.records);
    const auto hard = std::count_if(arm.records.begin(), arm.records.end(),
                                    [](const SampleRecord& r) { return r.p_hat < 0.5; });
    arm.hard_fraction = static_cast<double>(hard) / static_cast<double>(arm.records.size());

    const double sigma = setup.config.sigma;
    const std::uint64_t grad_seed = setup.cert_seed + 1;
    arm.grad_gaussian = gradient_norm_by_difficulty(arm.model, test.samples, sigma, setup.grad_k, grad_seed);
    arm.grad_objective = objective_attack
                             ? gradient_norm_by_difficulty(arm.model, test.samples, sigma,
                                                           setup.grad_k, grad_seed, objective_attack)
                             : arm.grad_gaussian;
    arm.curve = certified_accuracy_curve(arm.records, setup.radii);
    arm.survival = survival_of_records(arm.records);
    return arm;
}

}  // namespace

ToyComparison run_toy_comparison(const ToySetup& setup) {
    setup.config.validate();
    const Dataset train = make_gaussian_blobs(setup.train);
    const Dataset test = make_gaussian_blobs(setup.test);
    if (train.dim != test.dim || train.num_classes != test.num_classes) {
        throw std::invalid_argument("toy setup: train and test blobs disagree in shape");
    }

    // The pipeline trains on attacked noise only once E_t is reached.
    std::optional<AttackSpec> attack;
    if (setup.config.E_t <= setup.config.epochs) attack = AttackSpec::from(setup.config);

    TrainResult pipeline = train_pipeline(train, setup.config);
    TrainResult gaussian = train_pipeline(train, gaussian_only(setup.config));
    const bool identical = pipeline.model.parameters() == gaussian.model.parameters();
    return ToyComparison{evaluate(std::move(pipeline), test, setup, attack),
                         evaluate(std::move(gaussian), test, setup, std::nullopt), identical};
}

}  // namespace rsacr
