#pragma once

// File formats: SampleRecord and curve CSVs, survival-curve / oracle /
// config / manifest JSON. JSON documents carry "format_version"; CSVs start
// with a "# format_version=1" comment line.

#include "rsacr/certify.hpp"
#include "rsacr/metrics.hpp"
#include "rsacr/toy.hpp"
#include "rsacr/training.hpp"

#include <json.hpp>

#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsacr {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kToolkitVersion = "1.0.0";

class FormatError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// %.12g
std::string format_real(double v);

void write_records_csv(std::ostream& out, const std::vector<SampleRecord>& records);
std::vector<SampleRecord> read_records_csv(std::istream& in);

void write_curve_csv(std::ostream& out, const RadiusAccuracyCurve& curve);
RadiusAccuracyCurve read_curve_csv(std::istream& in);

struct SurvivalFile {
    SurvivalCurve curve;
    std::int64_t n = 0;
    double alpha = 0.0;
    double sigma = 0.0;
};

nlohmann::json to_json(const SurvivalFile& file);
SurvivalFile survival_from_json(const nlohmann::json& doc);

/// An oracle classifier together with the samples it is defined on.
struct OracleSpec {
    std::string kind;  // "bernoulli", "trivial" or "linear"
    std::unique_ptr<StochasticClassifier> classifier;
    std::vector<Sample> samples;
};

/// {"kind": "bernoulli", "num_classes": 2, "samples": [{"id":0,"label":1,"p_a":0.9}, ...]}
/// {"kind": "trivial", "fixed": 0, "num_classes": 2, "samples": [{"id":0,"label":0}, ...]}
/// {"kind": "linear", "w": [1, 0], "b": 0, "samples": [{"id":0,"label":1,"x":[1, 0]}, ...]}
OracleSpec oracle_from_json(const nlohmann::json& doc);

/// Exact p_A of every sample of an oracle at noise level sigma; the
/// candidate class is taken to be the true label (n0 = 0).
std::vector<PaCase> oracle_pa_cases(const OracleSpec& oracle, double sigma);

nlohmann::json to_json(const TrainConfig& config);
/// Keys missing from the document keep their defaults; unknown keys are
/// rejected.
TrainConfig train_config_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const MlpModel& model);
MlpModel mlp_from_json(const nlohmann::json& doc);

/// {"format_version": 1, "train": <TrainConfig>, "data": {...}, "certify": {...}}.
/// "data" holds the blob fields shared by both splits plus train_seed,
/// test_seed, train_per_class and test_per_class; "certify" holds n, alpha,
/// seed, grad_k and radii. Missing sections keep their defaults.
nlohmann::json to_json(const ToySetup& setup);
ToySetup toy_setup_from_json(const nlohmann::json& doc);

void write_epoch_log_csv(std::ostream& out, const std::vector<EpochLog>& log);

nlohmann::json parse_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace rsacr
