#include "rsacr/io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace rsacr {

using nlohmann::json;

std::string format_real(double v) { return fmt::format("{:.12g}", v); }

namespace {

const char* kRecordsHeader = "sample_id,label,predicted,count,n,p_hat,radius,outcome";
const char* kCurveHeader = "radius,accuracy";

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

// Skips comment lines (checking any format_version) up to the header.
void expect_preamble(std::istream& in, const std::string& header, const char* what) {
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# format_version=", 0) == 0 &&
                line != "# format_version=" + std::to_string(kFormatVersion)) {
                throw FormatError(std::string(what) + ": unsupported " + line.substr(2));
            }
            continue;
        }
        if (line != header) throw FormatError(std::string(what) + ": expected header '" + header + "'");
        saw_header = true;
        break;
    }
    if (!saw_header) throw FormatError(std::string(what) + ": missing header");
}

double parse_real(const std::string& s, const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError(std::string(what) + ": not a number: '" + s + "'");
    }
}

std::int64_t parse_int(const std::string& s, const char* what) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError(std::string(what) + ": not an integer: '" + s + "'");
    }
}

template <typename T>
T get_field(const json& doc, const char* key, const char* what) {
    if (!doc.contains(key)) throw FormatError(std::string(what) + ": missing field '" + key + "'");
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(std::string(what) + ": bad field '" + key + "': " + e.what());
    }
}

void check_version(const json& doc, const char* what) {
    if (!doc.is_object()) throw FormatError(std::string(what) + ": expected a JSON object");
    if (doc.contains("format_version") && doc.at("format_version") != kFormatVersion) {
        throw FormatError(std::string(what) + ": unsupported format_version");
    }
}

}  // namespace

void write_records_csv(std::ostream& out, const std::vector<SampleRecord>& records) {
    out << "# format_version=" << kFormatVersion << '\n' << kRecordsHeader << '\n';
    for (const auto& r : records) {
        out << r.sample_id << ',' << r.label.id << ','
            << (r.predicted ? std::to_string(r.predicted->id) : std::string()) << ',' << r.count
            << ',' << r.n << ',' << format_real(r.p_hat) << ',' << format_real(r.radius) << ','
            << (r.outcome == OutcomeKind::Certified ? "certified" : "abstain") << '\n';
    }
}

std::vector<SampleRecord> read_records_csv(std::istream& in) {
    expect_preamble(in, kRecordsHeader, "records csv");
    std::vector<SampleRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split_csv(line);
        if (cells.size() != 8) throw FormatError("records csv: expected 8 columns in '" + line + "'");
        SampleRecord r;
        r.sample_id = parse_int(cells[0], "sample_id");
        r.label = Label{static_cast<int>(parse_int(cells[1], "label"))};
        if (!cells[2].empty()) r.predicted = Label{static_cast<int>(parse_int(cells[2], "predicted"))};
        r.count = parse_int(cells[3], "count");
        r.n = parse_int(cells[4], "n");
        r.p_hat = parse_real(cells[5], "p_hat");
        r.radius = parse_real(cells[6], "radius");
        if (cells[7] == "certified") {
            r.outcome = OutcomeKind::Certified;
        } else if (cells[7] == "abstain") {
            r.outcome = OutcomeKind::Abstain;
        } else {
            throw FormatError("records csv: unknown outcome '" + cells[7] + "'");
        }
        if (r.count < 0 || r.count > r.n) throw FormatError("records csv: count outside [0, n]");
        out.push_back(r);
    }
    return out;
}

void write_curve_csv(std::ostream& out, const RadiusAccuracyCurve& curve) {
    out << "# format_version=" << kFormatVersion << '\n' << kCurveHeader << '\n';
    for (const auto& p : curve.points()) {
        out << format_real(p.radius) << ',' << format_real(p.accuracy) << '\n';
    }
}

RadiusAccuracyCurve read_curve_csv(std::istream& in) {
    expect_preamble(in, kCurveHeader, "curve csv");
    std::vector<CurvePoint> pts;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split_csv(line);
        if (cells.size() != 2) throw FormatError("curve csv: expected 2 columns in '" + line + "'");
        pts.push_back({parse_real(cells[0], "radius"), parse_real(cells[1], "accuracy")});
    }
    try {
        return RadiusAccuracyCurve(std::move(pts));
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("curve csv: ") + e.what());
    }
}

json to_json(const SurvivalFile& file) {
    json pts = json::array();
    for (const auto& p : file.curve.points()) pts.push_back({{"p", p.p}, {"survival", p.survival}});
    return {{"format_version", kFormatVersion},
            {"n", file.n},
            {"alpha", file.alpha},
            {"sigma", file.sigma},
            {"points", pts}};
}

SurvivalFile survival_from_json(const json& doc) {
    check_version(doc, "survival json");
    SurvivalFile out;
    out.n = get_field<std::int64_t>(doc, "n", "survival json");
    out.alpha = get_field<double>(doc, "alpha", "survival json");
    out.sigma = get_field<double>(doc, "sigma", "survival json");
    const auto pts_doc = get_field<json>(doc, "points", "survival json");
    if (!pts_doc.is_array()) throw FormatError("survival json: 'points' must be an array");
    std::vector<SurvivalPoint> pts;
    for (const auto& p : pts_doc) {
        pts.push_back({get_field<double>(p, "p", "survival point"),
                       get_field<double>(p, "survival", "survival point")});
    }
    try {
        out.curve = SurvivalCurve(std::move(pts));
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("survival json: ") + e.what());
    }
    return out;
}

OracleSpec oracle_from_json(const json& doc) {
    check_version(doc, "oracle json");
    OracleSpec spec;
    spec.kind = get_field<std::string>(doc, "kind", "oracle json");
    const auto samples = get_field<json>(doc, "samples", "oracle json");
    if (!samples.is_array() || samples.empty()) {
        throw FormatError("oracle json: 'samples' must be a nonempty array");
    }
    int max_label = 0;
    std::set<std::int64_t> seen;
    for (const auto& s : samples) {
        Sample sample;
        sample.id = get_field<std::int64_t>(s, "id", "oracle sample");
        sample.label = Label{get_field<int>(s, "label", "oracle sample")};
        if (sample.label.id < 0) throw FormatError("oracle sample: negative label");
        if (!seen.insert(sample.id).second) {
            throw FormatError("oracle json: duplicate sample id " + std::to_string(sample.id));
        }
        if (s.contains("x")) sample.x = get_field<std::vector<double>>(s, "x", "oracle sample");
        max_label = std::max(max_label, sample.label.id);
        spec.samples.push_back(std::move(sample));
    }
    const int num_classes = doc.contains("num_classes")
                                ? get_field<int>(doc, "num_classes", "oracle json")
                                : std::max(2, max_label + 1);
    if (num_classes <= max_label || num_classes < 2) {
        throw FormatError("oracle json: num_classes must exceed every label and be >= 2");
    }

    try {
        if (spec.kind == "bernoulli") {
            std::unordered_map<std::int64_t, double> pa;
            for (std::size_t i = 0; i < samples.size(); ++i) {
                pa[spec.samples[i].id] = get_field<double>(samples[i], "p_a", "oracle sample");
            }
            WrongLabelRule rule = rotate_label;
            if (doc.contains("wrong_label")) {
                const auto& w = doc.at("wrong_label");
                if (w.is_number_integer()) {
                    const Label fixed{w.get<int>()};
                    if (fixed.id < 0 || fixed.id >= num_classes) {
                        throw FormatError("oracle json: wrong_label outside [0, num_classes)");
                    }
                    rule = [fixed](Label truth, int k) {
                        return fixed == truth ? rotate_label(truth, k) : fixed;
                    };
                } else if (w != "rotate") {
                    throw FormatError("oracle json: wrong_label must be \"rotate\" or a label id");
                }
            }
            spec.classifier = std::make_unique<BernoulliOracle>(std::move(pa), num_classes, rule);
        } else if (spec.kind == "trivial") {
            spec.classifier = std::make_unique<TrivialClassifier>(
                Label{get_field<int>(doc, "fixed", "oracle json")}, num_classes);
        } else if (spec.kind == "linear") {
            auto w = get_field<std::vector<double>>(doc, "w", "oracle json");
            for (const auto& s : spec.samples) {
                if (s.x.size() != w.size()) throw FormatError("oracle json: sample x must match dim(w)");
                if (s.label.id > 1) throw FormatError("oracle json: linear oracle is binary");
            }
            spec.classifier = std::make_unique<LinearGaussianClassifier>(
                std::move(w), get_field<double>(doc, "b", "oracle json"));
        } else {
            throw FormatError("oracle json: unknown kind '" + spec.kind + "'");
        }
    } catch (const FormatError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("oracle json: ") + e.what());
    }
    return spec;
}

std::vector<PaCase> oracle_pa_cases(const OracleSpec& oracle, double sigma) {
    std::vector<PaCase> out;
    for (const auto& s : oracle.samples) {
        const auto p = oracle.classifier->exact_pa(s, sigma);
        if (!p) throw FormatError("oracle has no closed-form p_A");
        out.push_back({*p, true});
    }
    return out;
}

json to_json(const TrainConfig& c) {
    return {{"format_version", kFormatVersion},
            {"m", c.m},
            {"E_t", c.E_t},
            {"p_t", c.p_t},
            {"T", c.T},
            {"eps", c.eps},
            {"p_min", c.p_min},
            {"sigma", c.sigma},
            {"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"lr_decay_epochs", c.lr_decay_epochs},
            {"lr_decay_factor", c.lr_decay_factor},
            {"seed", c.seed},
            {"attack_norm", c.attack_norm == AttackNorm::L2 ? "l2" : "linf"},
            {"reweight_every", c.reweight_every},
            {"reweight_n", c.reweight_n},
            {"reweight_alpha", c.reweight_alpha},
            {"discard_k", c.discard_k},
            {"batch_size", c.batch_size},
            {"hidden", c.hidden}};
}

TrainConfig train_config_from_json(const json& doc) {
    check_version(doc, "train config");
    static const std::set<std::string> known{
        "format_version", "m", "E_t", "p_t", "T", "eps", "p_min", "sigma", "epochs",
        "learning_rate", "lr_decay_epochs", "lr_decay_factor", "seed", "attack_norm",
        "reweight_every", "reweight_n", "reweight_alpha", "discard_k", "batch_size", "hidden"};
    for (const auto& [key, value] : doc.items()) {
        if (!known.count(key)) throw FormatError("train config: unknown key '" + key + "'");
    }
    TrainConfig c;
    auto read = [&](const char* key, auto& field) {
        if (doc.contains(key)) field = get_field<std::decay_t<decltype(field)>>(doc, key, "train config");
    };
    read("m", c.m);
    read("E_t", c.E_t);
    read("p_t", c.p_t);
    read("T", c.T);
    read("eps", c.eps);
    read("p_min", c.p_min);
    read("sigma", c.sigma);
    read("epochs", c.epochs);
    read("learning_rate", c.learning_rate);
    read("lr_decay_epochs", c.lr_decay_epochs);
    read("lr_decay_factor", c.lr_decay_factor);
    read("seed", c.seed);
    read("reweight_every", c.reweight_every);
    read("reweight_n", c.reweight_n);
    read("reweight_alpha", c.reweight_alpha);
    read("discard_k", c.discard_k);
    read("batch_size", c.batch_size);
    read("hidden", c.hidden);
    if (doc.contains("attack_norm")) {
        const auto norm = get_field<std::string>(doc, "attack_norm", "train config");
        if (norm == "l2") {
            c.attack_norm = AttackNorm::L2;
        } else if (norm == "linf") {
            c.attack_norm = AttackNorm::Linf;
        } else {
            throw FormatError("train config: attack_norm must be \"l2\" or \"linf\"");
        }
    }
    return c;
}

json to_json(const MlpModel& model) {
    return {{"format_version", kFormatVersion},
            {"layer_sizes", model.layer_sizes()},
            {"activation", "tanh"},
            {"parameters", model.parameters()}};
}

MlpModel mlp_from_json(const json& doc) {
    check_version(doc, "model json");
    MlpModel model(get_field<std::vector<int>>(doc, "layer_sizes", "model json"), 0);
    const auto params = get_field<std::vector<double>>(doc, "parameters", "model json");
    if (params.size() != model.parameter_count()) {
        throw FormatError("model json: parameter count does not match layer sizes");
    }
    model.set_parameters(params);
    return model;
}

namespace {

void reject_unknown(const json& doc, const std::set<std::string>& known, const char* what) {
    if (!doc.is_object()) throw FormatError(std::string(what) + ": expected a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (!known.count(key)) throw FormatError(std::string(what) + ": unknown key '" + key + "'");
    }
}

}  // namespace

json to_json(const ToySetup& setup) {
    const BlobSpec& tr = setup.train;
    json data{{"num_classes", tr.num_classes},
              {"dim", tr.dim},
              {"center_radius", tr.center_radius},
              {"spread", tr.spread},
              {"class_spreads", tr.class_spreads},
              {"train_seed", tr.seed},
              {"test_seed", setup.test.seed},
              {"train_per_class", tr.per_class},
              {"test_per_class", setup.test.per_class}};
    json train = to_json(setup.config);
    train.erase("format_version");
    return {{"format_version", kFormatVersion},
            {"train", train},
            {"data", data},
            {"certify",
             {{"n", setup.cert_n},
              {"alpha", setup.cert_alpha},
              {"seed", setup.cert_seed},
              {"grad_k", setup.grad_k},
              {"radii", setup.radii}}}};
}

ToySetup toy_setup_from_json(const json& doc) {
    check_version(doc, "toy config");
    reject_unknown(doc, {"format_version", "train", "data", "certify"}, "toy config");
    ToySetup setup;
    if (doc.contains("train")) setup.config = train_config_from_json(doc.at("train"));
    if (doc.contains("data")) {
        const json& d = doc.at("data");
        reject_unknown(d, {"num_classes", "dim", "center_radius", "spread", "class_spreads",
                           "train_seed", "test_seed", "train_per_class", "test_per_class"},
                       "toy config data");
        BlobSpec shape = setup.train;
        auto read = [&](const char* key, auto& field) {
            if (d.contains(key)) field = get_field<std::decay_t<decltype(field)>>(d, key, "toy config data");
        };
        read("num_classes", shape.num_classes);
        read("dim", shape.dim);
        read("center_radius", shape.center_radius);
        read("spread", shape.spread);
        read("class_spreads", shape.class_spreads);
        BlobSpec train = shape;
        BlobSpec test = shape;
        train.seed = setup.train.seed;
        train.per_class = setup.train.per_class;
        train.first_id = setup.train.first_id;
        test.seed = setup.test.seed;
        test.per_class = setup.test.per_class;
        test.first_id = setup.test.first_id;
        read("train_seed", train.seed);
        read("test_seed", test.seed);
        read("train_per_class", train.per_class);
        read("test_per_class", test.per_class);
        setup.train = train;
        setup.test = test;
    }
    if (doc.contains("certify")) {
        const json& c = doc.at("certify");
        reject_unknown(c, {"n", "alpha", "seed", "grad_k", "radii"}, "toy config certify");
        auto read = [&](const char* key, auto& field) {
            if (c.contains(key)) field = get_field<std::decay_t<decltype(field)>>(c, key, "toy config certify");
        };
        read("n", setup.cert_n);
        read("alpha", setup.cert_alpha);
        read("seed", setup.cert_seed);
        read("grad_k", setup.grad_k);
        read("radii", setup.radii);
    }
    return setup;
}

void write_epoch_log_csv(std::ostream& out, const std::vector<EpochLog>& log) {
    out << "# format_version=" << kFormatVersion << '\n'
        << "epoch,loss,remaining_ratio,mean_weight,acr_proxy\n";
    for (const auto& row : log) {
        out << row.epoch << ',' << format_real(row.loss) << ',' << format_real(row.remaining_ratio)
            << ',' << format_real(row.mean_weight) << ',' << format_real(row.acr_proxy) << '\n';
    }
}

json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace rsacr
