#pragma once

// Seeded toy comparison: the full training pipeline against Gaussian-only
// training on the same blobs, both certified under the same budget.

#include "rsacr/certify.hpp"
#include "rsacr/metrics.hpp"
#include "rsacr/training.hpp"

#include <vector>

namespace rsacr {

struct ToySetup {
    BlobSpec train{3, 2, 100, 1.0, 0.5, {0.3, 0.3, 1.0}, 1, 0};
    BlobSpec test{3, 2, 300, 1.0, 0.5, {0.3, 0.3, 1.0}, 2, 1'000'000};
    TrainConfig config;
    std::int64_t cert_n = 10'000;
    double cert_alpha = 0.001;
    std::uint64_t cert_seed = 99;
    int grad_k = 100;  // draws used to split easy / hard
    std::vector<double> radii{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5};

    CertificationBudget budget() const { return {0, cert_n, cert_alpha, config.sigma}; }
};

struct ToyArm {
    MlpModel model;
    std::vector<EpochLog> log;
    std::vector<SampleRecord> records;
    double acr = 0.0;
    double hard_fraction = 0.0;      // fraction of test samples with p_hat < 0.5
    GradNormReport grad_gaussian;    // loss at a Gaussian draw, for either arm
    GradNormReport grad_objective;   // loss the arm trains on (attacked noise after E_t)
    RadiusAccuracyCurve curve;
    SurvivalCurve survival;
};

struct ToyComparison {
    ToyArm pipeline;
    ToyArm gaussian;
    bool identical_models = false;
};

ToyComparison run_toy_comparison(const ToySetup& setup);

}  // namespace rsacr
