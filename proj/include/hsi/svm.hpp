#pragma once

// Classical baselines on flattened patches: one-vs-rest multiclass linear SVM
// and epsilon-insensitive linear regression on the numeric rating.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hsi/patches.hpp"

namespace hsi {

struct MulticlassSvmModel {
    std::vector<int> classes;     // rating vocabulary, ascending
    size_t feature_len = 0;
    std::vector<float> weights;   // classes.size() x feature_len, row-major
    std::vector<float> biases;    // one per class
    double lambda = 1e-4;
    uint32_t epochs = 10;
    uint64_t seed = 0;

    void validate() const;
};

struct SvrModel {
    std::vector<float> weights;
    float bias = 0.0f;
    double epsilon_tube = 0.5;
    double lambda = 1e-4;
    uint32_t epochs = 10;
    uint64_t seed = 0;

    void validate() const;
};

struct EvalReport {
    double accuracy = 0.0;
    std::array<std::array<uint64_t, 7>, 7> confusion{};  // rows true, cols predicted
    std::map<int, double> per_class_recall;
    uint64_t n = 0;
};

// One one-vs-rest binary hinge SVM per vocabulary class, each trained with
// the same SGD procedure as pixel segmentation; deterministic given seed.
MulticlassSvmModel train_svc(const PatchSet& train, double lambda, uint32_t epochs,
                             uint64_t seed);

// argmax over per-class scores w_k.x + b_k; ties toward the lowest class.
int predict_svc(const MulticlassSvmModel& model, const Patch& patch);
int predict_svc_features(const MulticlassSvmModel& model, const float* features);
std::vector<int> predict_svc_set(const MulticlassSvmModel& model, const PatchSet& set);

// SGD on lambda/2 ||w||^2 + mean(max(0, |y - (w.x+b)| - epsilon_tube)) with
// y = numeric rating.
SvrModel train_svr(const PatchSet& train, double lambda, double epsilon_tube, uint32_t epochs,
                   uint64_t seed);
double predict_svr(const SvrModel& model, const Patch& patch);

// Nearest vocabulary class to a regression output; ties toward the lower one.
int nearest_rating_class(double value);

EvalReport evaluate(const std::vector<std::pair<int, int>>& true_and_predicted);

std::string eval_report_to_json(const EvalReport& report);
std::string confusion_to_csv(const EvalReport& report);

std::string svc_to_json(const MulticlassSvmModel& model);
MulticlassSvmModel svc_from_json(const std::string& text);
void save_svc(const MulticlassSvmModel& model, const std::filesystem::path& path);
MulticlassSvmModel load_svc(const std::filesystem::path& path);

std::string svr_to_json(const SvrModel& model);
SvrModel svr_from_json(const std::string& text);
void save_svr(const SvrModel& model, const std::filesystem::path& path);
SvrModel load_svr(const std::filesystem::path& path);

}  // namespace hsi
