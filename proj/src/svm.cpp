#include "hsi/svm.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"

#include "hsi/linear_svm.hpp"
#include "hsi/rng.hpp"
#include "hsi/synthgen.hpp"

namespace hsi {

namespace {

void check_finite(const std::vector<float>& values, const char* what) {
    for (float v : values)
        if (!std::isfinite(v)) fail(errc::non_finite, std::string(what) + " not finite");
}

std::vector<int> vocabulary() {
    return std::vector<int>(kRatingClasses.begin(), kRatingClasses.end());
}

}  // namespace

void MulticlassSvmModel::validate() const {
    if (classes != vocabulary()) fail(errc::bad_label, "classes must be the rating vocabulary");
    if (feature_len == 0) fail(errc::bad_argument, "feature_len must be > 0");
    if (weights.size() != classes.size() * feature_len || biases.size() != classes.size())
        fail(errc::dim_mismatch, "weight matrix shape inconsistent");
    check_finite(weights, "SVC weights");
    check_finite(biases, "SVC biases");
}

void SvrModel::validate() const {
    if (weights.empty()) fail(errc::empty_input, "SVR model has no weights");
    check_finite(weights, "SVR weights");
    if (!std::isfinite(bias)) fail(errc::non_finite, "SVR bias not finite");
    if (!(epsilon_tube > 0.0)) fail(errc::bad_argument, "epsilon_tube must be > 0");
}

MulticlassSvmModel train_svc(const PatchSet& train, double lambda, uint32_t epochs,
                             uint64_t seed) {
    if (train.patches.empty()) fail(errc::empty_input, "no training patches");
    const auto counts = train.class_counts();
    if (counts.size() < 2) fail(errc::single_class, "at least 2 classes required");

    MulticlassSvmModel model;
    model.classes = vocabulary();
    model.feature_len = static_cast<size_t>(train.n) * train.n * train.bands;
    model.weights.assign(model.classes.size() * model.feature_len, 0.0f);
    model.biases.assign(model.classes.size(), 0.0f);
    model.lambda = lambda;
    model.epochs = epochs;
    model.seed = seed;

    const std::vector<float> features = flatten_set(train);
    const std::vector<int> labels = set_labels(train);
    const int n_classes = static_cast<int>(model.classes.size());

    // The one-vs-rest problems are independent; each is internally sequential.
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < n_classes; ++k) {
        std::vector<int8_t> y(labels.size());
        for (size_t i = 0; i < labels.size(); ++i)
            y[i] = labels[i] == model.classes[k] ? int8_t{1} : int8_t{-1};
        const LinearModel binary =
            train_binary_hinge(features.data(), y.data(), labels.size(), model.feature_len,
                               lambda, epochs, derive_seed(seed, {static_cast<uint64_t>(k)}));
        std::copy(binary.weights.begin(), binary.weights.end(),
                  model.weights.begin() + static_cast<size_t>(k) * model.feature_len);
        model.biases[k] = binary.bias;
    }
    return model;
}

int predict_svc_features(const MulticlassSvmModel& model, const float* features) {
    int best_class = model.classes[0];
    double best_score = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < model.classes.size(); ++k) {
        const float* w = model.weights.data() + k * model.feature_len;
        double score = model.biases[k];
        for (size_t d = 0; d < model.feature_len; ++d)
            score += static_cast<double>(w[d]) * static_cast<double>(features[d]);
        if (score > best_score) {  // strict: ties stay with the lower class
            best_score = score;
            best_class = model.classes[k];
        }
    }
    return best_class;
}

int predict_svc(const MulticlassSvmModel& model, const Patch& patch) {
    patch.validate();
    if (patch.data.size() != model.feature_len)
        fail(errc::dim_mismatch, "patch feature length differs from model");
    return predict_svc_features(model, patch.data.data());
}

std::vector<int> predict_svc_set(const MulticlassSvmModel& model, const PatchSet& set) {
    const size_t dim = static_cast<size_t>(set.n) * set.n * set.bands;
    if (dim != model.feature_len)
        fail(errc::dim_mismatch, "patch feature length differs from model");
    std::vector<int> out(set.size());
    const int64_t n = static_cast<int64_t>(set.size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        out[i] = predict_svc_features(model, set.patches[i].data.data());
    return out;
}

SvrModel train_svr(const PatchSet& train, double lambda, double epsilon_tube, uint32_t epochs,
                   uint64_t seed) {
    if (train.patches.empty()) fail(errc::empty_input, "no training patches");
    const size_t dim = static_cast<size_t>(train.n) * train.n * train.bands;
    const std::vector<float> features = flatten_set(train);
    std::vector<float> targets(train.size());
    for (size_t i = 0; i < train.size(); ++i)
        targets[i] = static_cast<float>(train.patches[i].label);

    const LinearModel core = train_epsilon_regression(
        features.data(), targets.data(), train.size(), dim, lambda, epsilon_tube, epochs, seed);
    SvrModel model;
    model.weights = core.weights;
    model.bias = core.bias;
    model.epsilon_tube = epsilon_tube;
    model.lambda = lambda;
    model.epochs = epochs;
    model.seed = seed;
    return model;
}

double predict_svr(const SvrModel& model, const Patch& patch) {
    if (patch.data.size() != model.weights.size())
        fail(errc::dim_mismatch, "patch feature length differs from model");
    double pred = model.bias;
    for (size_t d = 0; d < model.weights.size(); ++d)
        pred += static_cast<double>(model.weights[d]) * static_cast<double>(patch.data[d]);
    return pred;
}

int nearest_rating_class(double value) {
    int best = kRatingClasses[0];
    double best_dist = std::abs(value - best);
    for (int cls : kRatingClasses) {
        const double dist = std::abs(value - cls);
        if (dist < best_dist) {
            best_dist = dist;
            best = cls;
        }
    }
    return best;
}

EvalReport evaluate(const std::vector<std::pair<int, int>>& true_and_predicted) {
    if (true_and_predicted.empty()) fail(errc::empty_input, "no predictions to evaluate");
    EvalReport report;
    report.n = true_and_predicted.size();
    uint64_t correct = 0;
    for (const auto& [truth, predicted] : true_and_predicted) {
        const int ti = class_index(truth);
        const int pi = class_index(predicted);
        ++report.confusion[ti][pi];
        if (ti == pi) ++correct;
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(report.n);
    for (size_t t = 0; t < kRatingClasses.size(); ++t) {
        uint64_t row = 0;
        for (uint64_t v : report.confusion[t]) row += v;
        report.per_class_recall[kRatingClasses[t]] =
            row == 0 ? 0.0 : static_cast<double>(report.confusion[t][t]) / row;
    }
    return report;
}

std::string eval_report_to_json(const EvalReport& report) {
    nlohmann::json recall;
    for (const auto& [cls, r] : report.per_class_recall) recall[std::to_string(cls)] = r;
    nlohmann::json confusion = nlohmann::json::array();
    for (const auto& row : report.confusion) confusion.push_back(row);
    nlohmann::json j{{"accuracy", report.accuracy},
                     {"n", report.n},
                     {"classes", vocabulary()},
                     {"confusion", confusion},
                     {"per_class_recall", recall}};
    return j.dump(2);
}

std::string confusion_to_csv(const EvalReport& report) {
    std::string csv = "true_class";
    for (int cls : kRatingClasses) csv += ",pred_" + std::to_string(cls);
    csv += "\n";
    for (size_t t = 0; t < kRatingClasses.size(); ++t) {
        csv += std::to_string(kRatingClasses[t]);
        for (uint64_t v : report.confusion[t]) csv += "," + std::to_string(v);
        csv += "\n";
    }
    return csv;
}

namespace {

nlohmann::json hyperparams_json(double lambda, uint32_t epochs, uint64_t seed) {
    return {{"lambda", lambda}, {"epochs", epochs}, {"seed", seed}};
}

}  // namespace

std::string svc_to_json(const MulticlassSvmModel& model) {
    nlohmann::json j{{"classes", model.classes},
                     {"feature_len", model.feature_len},
                     {"weights", model.weights},
                     {"biases", model.biases},
                     {"hyperparams", hyperparams_json(model.lambda, model.epochs, model.seed)}};
    return j.dump();
}

MulticlassSvmModel svc_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    MulticlassSvmModel model;
    model.classes = j.at("classes").get<std::vector<int>>();
    model.feature_len = j.at("feature_len").get<size_t>();
    model.weights = j.at("weights").get<std::vector<float>>();
    model.biases = j.at("biases").get<std::vector<float>>();
    const auto& h = j.at("hyperparams");
    model.lambda = h.at("lambda").get<double>();
    model.epochs = h.at("epochs").get<uint32_t>();
    model.seed = h.at("seed").get<uint64_t>();
    model.validate();
    return model;
}

std::string svr_to_json(const SvrModel& model) {
    nlohmann::json j{{"weights", model.weights},
                     {"bias", model.bias},
                     {"epsilon_tube", model.epsilon_tube},
                     {"hyperparams", hyperparams_json(model.lambda, model.epochs, model.seed)}};
    return j.dump();
}

SvrModel svr_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    SvrModel model;
    model.weights = j.at("weights").get<std::vector<float>>();
    model.bias = j.at("bias").get<float>();
    model.epsilon_tube = j.at("epsilon_tube").get<double>();
    const auto& h = j.at("hyperparams");
    model.lambda = h.at("lambda").get<double>();
    model.epochs = h.at("epochs").get<uint32_t>();
    model.seed = h.at("seed").get<uint64_t>();
    model.validate();
    return model;
}

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io_failure, "cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spill(const std::string& text, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
    out << text << "\n";
}

}  // namespace

void save_svc(const MulticlassSvmModel& model, const std::filesystem::path& path) {
    spill(svc_to_json(model), path);
}

MulticlassSvmModel load_svc(const std::filesystem::path& path) {
    return svc_from_json(slurp(path));
}

void save_svr(const SvrModel& model, const std::filesystem::path& path) {
    spill(svr_to_json(model), path);
}

SvrModel load_svr(const std::filesystem::path& path) {
    return svr_from_json(slurp(path));
}

}  // namespace hsi
