#pragma once

// Orchestration of the full procedure: generate -> calibrate -> segment ->
// analyze -> patch -> svm -> resnet, driven by a JSON run configuration, with
// every intermediate artifact written to the output directory and a
// results-table summary CSV at the end.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hsi/calibration.hpp"
#include "hsi/patches.hpp"
#include "hsi/resnet.hpp"
#include "hsi/synthgen.hpp"

namespace hsi {

struct StageSet {
    bool generate = true;
    bool calibrate = true;
    bool segment = true;
    bool analyze = true;
    bool patch = true;
    bool svm = true;
    bool resnet = true;
};

struct RunConfig {
    std::filesystem::path out_dir = "out";
    uint64_t seed = 42;
    std::string environment;  // "", "indoor", or "outdoor" (illumination + noise preset)
    StageSet stages;

    SceneSpec scene;  // base geometry; per-scene jitter/illumination derive from seed
    int scenes_per_class = 6;

    CalibrationParams calibration;

    double seg_lambda = 1e-3;
    uint32_t seg_epochs = 20;
    uint64_t seg_samples_per_class = 4000;
    uint64_t min_component_px = 25;

    uint32_t patch_n = 19;
    uint32_t patch_stride = 9;
    uint32_t augment_multiplicity = 3;
    int max_shift_px = 3;
    double max_rot_deg = 20.0;
    SplitRatios ratios;
    bool stratified = true;
    bool split_by_scene = false;

    double svc_lambda = 1e-4;
    uint32_t svc_epochs = 12;
    double svr_epsilon = 0.5;

    NetConfig net;            // input_n / input_bands are set from patch_n / scene.bands
    TrainOptions train_opts;

    void validate() const;
};

struct SummaryRow {
    uint32_t patch_size = 0;
    uint32_t stride = 0;
    uint64_t n_train = 0;
    uint64_t n_val = 0;
    uint64_t n_test = 0;
    std::string environment_tag;
    double train_error = 0.0;
    double val_accuracy = 0.0;
    double test_accuracy = 0.0;
};

struct PipelineSummary {
    std::vector<SummaryRow> rows;
    double svc_test_accuracy = -1.0;  // -1 when the svm stage did not run
    double svr_test_accuracy = -1.0;
    uint64_t patch_total = 0;
};

RunConfig run_config_from_json(const std::string& text);
RunConfig run_config_from_json_file(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

// Columns: patch_size,stride,n_train,n_val,n_test,environment_tag,
// train_error,val_accuracy,test_accuracy
std::string summary_to_csv(const PipelineSummary& summary);

// curves.csv (epoch,train_loss,train_acc,val_acc) and curves.svg, a minimal
// line plot of the same data.
void emit_curves(const TrainReport& report, const std::filesystem::path& out_dir);

// Executes the selected stages in fixed order. Stages whose in-memory inputs
// are missing reload them from the artifacts a previous invocation left in
// out_dir; a stage failure is reported with the stage name attached.
PipelineSummary run_pipeline(const RunConfig& config);

}  // namespace hsi
