#include "cli.hpp"

#include "rsacr/io.hpp"
#include "rsacr/toy.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace rsacr::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    json config = json::object();
    std::optional<std::uint64_t> seed;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    json to_json() const {
        return {{"format_version", kFormatVersion},
                {"command", command},
                {"argv", argv},
                {"config", config},
                {"seed", seed ? json(*seed) : json(nullptr)},
                {"version", kToolkitVersion},
                {"inputs", inputs},
                {"outputs", outputs}};
    }
};

std::string sig6(double v) { return fmt::format("{:.6g}", v); }

void emit(Manifest& manifest, const std::string& path, const std::string& text) {
    write_text_file(path, text);
    manifest.outputs.push_back(path);
}

void write_manifest(const Manifest& manifest, const std::string& path) {
    write_text_file(path, manifest.to_json().dump(2) + "\n");
}

SuccessRule parse_rule(const std::string& name) {
    if (name == "median") return SuccessRule::MedianCount;
    if (name == "expected") return SuccessRule::ExpectedCount;
    return SuccessRule::SuccessProbability;
}

std::vector<std::string> reversed(const std::vector<std::string>& args) {
    return {args.rbegin(), args.rend()};
}

// radius ---------------------------------------------------------------------

struct RadiusOptions {
    std::optional<double> p_a;
    double sigma = 1.0;
    bool sensitivity = false;
    bool grid = false;
    int grid_points = 1000;
    std::string out;
};

int cmd_radius(const RadiusOptions& o, Manifest& manifest, std::ostream& out) {
    if (!(o.sigma > 0.0)) throw std::invalid_argument("--sigma must be > 0");
    manifest.config = {{"p_a", o.p_a ? json(*o.p_a) : json(nullptr)},
                       {"sigma", o.sigma},
                       {"sensitivity", o.sensitivity},
                       {"grid", o.grid},
                       {"grid_points", o.grid_points}};
    if (o.grid) {
        if (o.grid_points < 2) throw std::invalid_argument("--grid-points must be >= 2");
        std::ostringstream csv;
        csv << "# format_version=" << kFormatVersion << "\np_a,radius,sensitivity\n";
        for (int i = 0; i < o.grid_points; ++i) {
            const double p = 0.5 + 0.5 * static_cast<double>(i) / o.grid_points;
            csv << format_real(p) << ',' << format_real(certified_radius(p, o.sigma)) << ','
                << format_real(radius_sensitivity(p, o.sigma)) << '\n';
        }
        if (o.out.empty()) {
            out << csv.str();
        } else {
            emit(manifest, o.out, csv.str());
            write_manifest(manifest, o.out + ".manifest.json");
        }
        return kOk;
    }
    if (!o.p_a) throw std::invalid_argument("--p-a is required unless --grid is given");
    const double p = *o.p_a;
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("--p-a must lie in (0, 1)");
    out << "radius " << sig6(certified_radius(p, o.sigma)) << '\n';
    if (o.sensitivity) out << "sensitivity " << sig6(radius_sensitivity(p, o.sigma)) << '\n';
    return kOk;
}

// certify --------------------------------------------------------------------

struct CertifyOptions {
    std::string oracle;
    std::string out;
    std::int64_t n = 100'000;
    std::int64_t n0 = 100;
    double alpha = 0.001;
    double sigma = 1.0;
    std::uint64_t seed = 0;
};

int cmd_certify(const CertifyOptions& o, Manifest& manifest, std::ostream& out) {
    const CertificationBudget budget{o.n0, o.n, o.alpha, o.sigma};
    budget.validate();
    const OracleSpec oracle = oracle_from_json(parse_json_file(o.oracle));
    manifest.inputs.push_back(o.oracle);
    manifest.seed = o.seed;
    manifest.config = {{"n", o.n}, {"n0", o.n0}, {"alpha", o.alpha}, {"sigma", o.sigma}};

    const auto records = certify_all(*oracle.classifier, oracle.samples, budget, o.seed);
    std::ostringstream csv;
    write_records_csv(csv, records);
    emit(manifest, o.out, csv.str());
    write_manifest(manifest, o.out + ".manifest.json");

    const auto certified = std::count_if(records.begin(), records.end(),
                                         [](const SampleRecord& r) { return r.certified_correct(); });
    out << "samples " << records.size() << '\n'
        << "certified_correct " << certified << '\n'
        << "acr " << sig6(acr(records)) << '\n';
    return kOk;
}

// sweep-budget ---------------------------------------------------------------

struct SweepOptions {
    std::vector<std::string> oracles;
    std::vector<std::int64_t> budgets{50, 100, 200};
    double alpha = 0.001;
    double sigma = 1.0;
    std::string rule = "exact";
    std::string out;
};

int cmd_sweep(const SweepOptions& o, Manifest& manifest, std::ostream& out) {
    const AcrRule rule = o.rule == "exact" ? AcrRule::ExactExpectation : AcrRule::ExpectedCount;
    for (std::int64_t n : o.budgets) {
        if (n < 1) throw std::invalid_argument("budgets must be >= 1");
        if (rule == AcrRule::ExactExpectation && n > kMaxExactBudget) {
            throw std::invalid_argument(fmt::format(
                "budget {} exceeds the exact-summation bound {}", n, kMaxExactBudget));
        }
    }
    std::vector<SweepConfig> configs;
    for (const auto& path : o.oracles) {
        const json doc = parse_json_file(path);
        const OracleSpec oracle = oracle_from_json(doc);
        std::string name = fs::path(path).stem().string();
        if (doc.contains("name") && doc.at("name").is_string()) name = doc.at("name").get<std::string>();
        configs.push_back({name, oracle_pa_cases(oracle, o.sigma)});
        manifest.inputs.push_back(path);
    }
    manifest.config = {{"budgets", o.budgets}, {"alpha", o.alpha}, {"sigma", o.sigma}, {"rule", o.rule}};

    const SweepResult result = budget_sweep(configs, o.sigma, o.alpha, o.budgets, rule);
    std::ostringstream csv;
    csv << "# format_version=" << kFormatVersion << "\nconfig,N,expected_acr,crossover\n";
    for (std::size_t b = 0; b < result.budgets.size(); ++b) {
        for (std::size_t c = 0; c < result.names.size(); ++c) {
            std::string flips;
            for (const auto& x : result.crossovers) {
                if (x.to_n != result.budgets[b]) continue;
                if (x.first != c && x.second != c) continue;
                if (!flips.empty()) flips += ';';
                flips += "flip_with=" + result.names[x.first == c ? x.second : x.first];
            }
            csv << result.names[c] << ',' << result.budgets[b] << ',' << format_real(result.acr[b][c])
                << ',' << flips << '\n';
        }
    }
    if (o.out.empty()) {
        out << csv.str();
    } else {
        emit(manifest, o.out, csv.str());
        write_manifest(manifest, o.out + ".manifest.json");
        out << "crossovers " << result.crossovers.size() << '\n';
    }
    return kOk;
}

// convert --------------------------------------------------------------------

struct ConvertOptions {
    std::string in;
    std::string out;
    std::string direction;
    std::string rule = "expected";
    double tau = 0.5;
    std::int64_t from_n = 100'000;
    double from_alpha = 0.001;
    std::int64_t to_n = 100'000;
    double to_alpha = 0.001;
    std::optional<double> sigma;
    bool force = false;
    std::vector<double> radii;
    std::vector<double> p_grid;
};

int cmd_convert(const ConvertOptions& o, Manifest& manifest, std::ostream& out) {
    manifest.inputs.push_back(o.in);
    manifest.config = {{"direction", o.direction},
                       {"rule", o.rule},
                       {"tau", o.tau},
                       {"from_n", o.from_n},
                       {"from_alpha", o.from_alpha},
                       {"to_n", o.to_n},
                       {"to_alpha", o.to_alpha},
                       {"sigma", o.sigma ? json(*o.sigma) : json(nullptr)},
                       {"force", o.force},
                       {"radii", o.radii},
                       {"p_grid", o.p_grid}};

    if (o.direction == "survival-to-curve") {
        const SurvivalFile file = survival_from_json(parse_json_file(o.in));
        const ConversionBudget budget{o.to_n, o.to_alpha, o.sigma.value_or(file.sigma),
                                      parse_rule(o.rule), o.tau};
        budget.validate();
        std::vector<double> radii = o.radii;
        if (radii.empty()) {
            const double top = max_certifiable_radius(budget.n, budget.alpha, budget.sigma);
            for (int i = 0; i <= 100; ++i) radii.push_back(top * i / 100.0);
        }
        const RadiusAccuracyCurve curve = survival_to_curve(file.curve, budget, radii);
        std::ostringstream csv;
        write_curve_csv(csv, curve);
        emit(manifest, o.out, csv.str());
        out << "points " << curve.points().size() << '\n';
    } else {
        std::ifstream in(o.in);
        if (!in) throw FormatError("cannot open '" + o.in + "'");
        const RadiusAccuracyCurve curve = read_curve_csv(in);
        const ConversionBudget budget{o.from_n, o.from_alpha, o.sigma.value_or(1.0),
                                      parse_rule(o.rule), o.tau};
        budget.validate();
        std::optional<std::vector<double>> grid;
        if (!o.p_grid.empty()) grid = o.p_grid;
        const SurvivalCurve survival = curve_to_survival(curve, budget, o.force, grid);
        const SurvivalFile file{survival, budget.n, budget.alpha, budget.sigma};
        emit(manifest, o.out, to_json(file).dump(2) + "\n");
        out << "points " << survival.points().size() << '\n';
    }
    write_manifest(manifest, o.out + ".manifest.json");
    return kOk;
}

// train-toy ------------------------------------------------------------------

struct TrainToyOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

json ratio_json(const GradNormReport& r) { return r.ratio ? json(*r.ratio) : json("undefined"); }

json arm_summary(const ToyArm& arm) {
    json curve = json::array();
    for (const auto& p : arm.curve.points()) curve.push_back({{"radius", p.radius}, {"accuracy", p.accuracy}});
    return {{"acr", arm.acr},
            {"hard_fraction", arm.hard_fraction},
            {"grad_norm_ratio", ratio_json(arm.grad_objective)},
            {"grad_norm_ratio_gaussian_noise", ratio_json(arm.grad_gaussian)},
            {"easy_grad_norm", arm.grad_objective.easy_mean},
            {"hard_grad_norm", arm.grad_objective.hard_mean},
            {"remaining_ratio", arm.log.empty() ? 1.0 : arm.log.back().remaining_ratio},
            {"certified_accuracy", curve}};
}

int cmd_train_toy(const TrainToyOptions& o, Manifest& manifest, std::ostream& out, std::ostream& err) {
    ToySetup setup = toy_setup_from_json(parse_json_file(o.config));
    if (o.seed) setup.config.seed = *o.seed;
    setup.config.validate();
    manifest.inputs.push_back(o.config);
    manifest.seed = setup.config.seed;
    manifest.config = to_json(setup);

    ToyComparison cmp = [&] {
        try {
            return run_toy_comparison(setup);
        } catch (const AllDiscardedError& e) {
            err << "error: every training sample was discarded at p_t=" << e.p_t() << '\n';
            throw;
        }
    }();

    fs::create_directories(o.out);
    auto path = [&](const std::string& name) { return (fs::path(o.out) / name).string(); };
    for (const auto& [tag, arm] : {std::pair<std::string, const ToyArm*>{"pipeline", &cmp.pipeline},
                                   {"gaussian", &cmp.gaussian}}) {
        std::ostringstream records, log, curve;
        write_records_csv(records, arm->records);
        write_epoch_log_csv(log, arm->log);
        write_curve_csv(curve, arm->curve);
        emit(manifest, path("records_" + tag + ".csv"), records.str());
        emit(manifest, path("log_" + tag + ".csv"), log.str());
        emit(manifest, path("curve_" + tag + ".csv"), curve.str());
        const SurvivalFile survival{arm->survival, setup.cert_n, setup.cert_alpha, setup.config.sigma};
        emit(manifest, path("survival_" + tag + ".json"), to_json(survival).dump(2) + "\n");
        emit(manifest, path("model_" + tag + ".json"), to_json(arm->model).dump() + "\n");
    }
    const json summary{{"format_version", kFormatVersion},
                       {"identical_models", cmp.identical_models},
                       {"pipeline", arm_summary(cmp.pipeline)},
                       {"gaussian", arm_summary(cmp.gaussian)}};
    emit(manifest, path("summary.json"), summary.dump(2) + "\n");
    write_manifest(manifest, path("manifest.json"));

    auto ratio_text = [](const GradNormReport& r) { return r.ratio ? sig6(*r.ratio) : std::string("undefined"); };
    out << fmt::format("{:<10} {:>10} {:>14} {:>16}\n", "arm", "acr", "p_hat<0.5", "grad_ratio");
    for (const auto& [tag, arm] : {std::pair<const char*, const ToyArm*>{"pipeline", &cmp.pipeline},
                                   {"gaussian", &cmp.gaussian}}) {
        out << fmt::format("{:<10} {:>10} {:>14} {:>16}\n", tag, sig6(arm->acr),
                           sig6(arm->hard_fraction), ratio_text(arm->grad_objective));
    }
    if (cmp.identical_models) out << "pipeline and baseline models are identical\n";
    return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Randomized-smoothing certification and ACR analysis toolkit", "rsacr"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolkitVersion);

    RadiusOptions radius;
    auto* radius_cmd = app.add_subcommand("radius", "Certified radius and its sensitivity to p_A");
    radius_cmd->add_option("--p-a", radius.p_a, "Probability of the top class");
    radius_cmd->add_option("--sigma", radius.sigma, "Noise level")->capture_default_str();
    radius_cmd->add_flag("--sensitivity", radius.sensitivity, "Also print d radius / d p_A");
    radius_cmd->add_flag("--grid", radius.grid, "Emit a p_A, radius, sensitivity table as CSV");
    radius_cmd->add_option("--grid-points", radius.grid_points, "Rows of the grid")->capture_default_str();
    radius_cmd->add_option("--out", radius.out, "Write the grid here instead of stdout");

    CertifyOptions certify_opts;
    auto* certify_cmd = app.add_subcommand("certify", "Certify every sample of an oracle file");
    certify_cmd->add_option("--oracle", certify_opts.oracle, "Oracle JSON")->required();
    certify_cmd->add_option("--out", certify_opts.out, "Record CSV")->required();
    certify_cmd->add_option("--n", certify_opts.n, "Estimation draws")->capture_default_str();
    certify_cmd->add_option("--n0", certify_opts.n0, "Guess draws (0: use the label)")->capture_default_str();
    certify_cmd->add_option("--alpha", certify_opts.alpha, "Failure probability")->capture_default_str();
    certify_cmd->add_option("--sigma", certify_opts.sigma, "Noise level")->capture_default_str();
    certify_cmd->add_option("--seed", certify_opts.seed, "Random seed")->capture_default_str();

    SweepOptions sweep;
    auto* sweep_cmd = app.add_subcommand("sweep-budget", "Exact expected ACR over certification budgets");
    sweep_cmd->add_option("--oracle", sweep.oracles, "Oracle JSON (repeatable)")->required();
    sweep_cmd->add_option("--budgets", sweep.budgets, "Comma-separated N values")
        ->delimiter(',')
        ->capture_default_str();
    sweep_cmd->add_option("--alpha", sweep.alpha, "Failure probability")->capture_default_str();
    sweep_cmd->add_option("--sigma", sweep.sigma, "Noise level")->capture_default_str();
    sweep_cmd->add_option("--rule", sweep.rule, "exact: sum over counts; plugin: count = N p_A")
        ->check(CLI::IsMember({"exact", "plugin"}))
        ->capture_default_str();
    sweep_cmd->add_option("--out", sweep.out, "CSV path (default: stdout)");

    ConvertOptions convert;
    auto* convert_cmd = app.add_subcommand("convert", "Convert between accuracy curves and p_A survival curves");
    convert_cmd->add_option("--in", convert.in, "curve CSV or survival JSON")->required();
    convert_cmd->add_option("--out", convert.out, "Output path")->required();
    convert_cmd->add_option("--direction", convert.direction, "Conversion direction")
        ->required()
        ->check(CLI::IsMember({"survival-to-curve", "curve-to-survival"}));
    convert_cmd->add_option("--rule", convert.rule, "Success rule")
        ->check(CLI::IsMember({"median", "expected", "probability"}))
        ->capture_default_str();
    convert_cmd->add_option("--tau", convert.tau, "Success probability for --rule probability")
        ->capture_default_str();
    convert_cmd->add_option("--from-n", convert.from_n, "Budget N the curve was certified with")
        ->capture_default_str();
    convert_cmd->add_option("--from-alpha", convert.from_alpha, "Alpha the curve was certified with")
        ->capture_default_str();
    convert_cmd->add_option("--to-n", convert.to_n, "Target budget N")->capture_default_str();
    convert_cmd->add_option("--to-alpha", convert.to_alpha, "Target alpha")->capture_default_str();
    convert_cmd->add_option("--sigma", convert.sigma, "Noise level (default: from file, else 1)");
    convert_cmd->add_flag("--force", convert.force, "Allow source budgets below N=1000");
    convert_cmd->add_option("--radii", convert.radii, "Radii to evaluate")->delimiter(',');
    convert_cmd->add_option("--p-grid", convert.p_grid, "p_A knots of the survival curve")->delimiter(',');

    TrainToyOptions train;
    auto* train_cmd = app.add_subcommand("train-toy", "Train and certify the toy pipeline and baseline");
    train_cmd->add_option("--config", train.config, "Toy config JSON")->required();
    train_cmd->add_option("--out", train.out, "Output directory")->required();
    train_cmd->add_option("--seed", train.seed, "Override the training seed");

    std::string replay_path;
    auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    replay_cmd->add_option("--manifest", replay_path, "Manifest JSON")->required();

    try {
        app.parse(reversed(args));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsageError;
    }

    Manifest manifest;
    manifest.argv = args;
    try {
        if (radius_cmd->parsed()) {
            manifest.command = "radius";
            return cmd_radius(radius, manifest, out);
        }
        if (certify_cmd->parsed()) {
            manifest.command = "certify";
            return cmd_certify(certify_opts, manifest, out);
        }
        if (sweep_cmd->parsed()) {
            manifest.command = "sweep-budget";
            return cmd_sweep(sweep, manifest, out);
        }
        if (convert_cmd->parsed()) {
            manifest.command = "convert";
            return cmd_convert(convert, manifest, out);
        }
        if (train_cmd->parsed()) {
            manifest.command = "train-toy";
            return cmd_train_toy(train, manifest, out, err);
        }
        if (replay_cmd->parsed()) {
            const json doc = parse_json_file(replay_path);
            if (!doc.is_object() || !doc.contains("argv")) throw FormatError("manifest: missing 'argv'");
            const auto argv = doc.at("argv").get<std::vector<std::string>>();
            if (!argv.empty() && argv.front() == "replay") throw FormatError("manifest: refusing to replay a replay");
            return run_cli(argv, out, err);
        }
    } catch (const AllDiscardedError&) {
        return kRuntimeError;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kUsageError;
}

}  // namespace rsacr::cli
