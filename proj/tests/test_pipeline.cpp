#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "hsi/pipeline.hpp"

using namespace hsi;

namespace {

// Generation-only run on a small geometry: fast and file-light.
RunConfig small_run(const std::filesystem::path& out_dir, uint64_t seed) {
    RunConfig config;
    config.out_dir = out_dir;
    config.seed = seed;
    config.scene = hsi_test::small_scene(1, 0);  // rating is overridden per scene
    config.scenes_per_class = 1;
    return config;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("run config JSON round trip") {
    RunConfig config;
    config.out_dir = "somewhere/else";
    config.seed = 77;
    config.environment = "outdoor";
    config.stages.svm = false;
    config.scene.height = 120;
    config.scene.width = 200;
    config.scene.leaf_rect = {30, 60, 50, 80};
    config.scene.spectralon_rect = {6, 6, 20, 40};
    config.scenes_per_class = 2;
    config.patch_n = 15;
    config.patch_stride = 15;
    config.augment_multiplicity = 0;
    config.split_by_scene = true;
    config.svc_lambda = 5e-4;
    config.train_opts.epochs = 3;
    config.train_opts.lr = 0.02;
    config.net.stem_channels = 8;

    const RunConfig back = run_config_from_json(run_config_to_json(config));
    CHECK(back.out_dir == config.out_dir);
    CHECK(back.seed == 77);
    CHECK(back.environment == "outdoor");
    CHECK(back.stages.svm == false);
    CHECK(back.stages.resnet == true);
    CHECK(back.scene.height == 120);
    CHECK(back.scene.width == 200);
    CHECK(back.scene.leaf_rect.col == 60);
    CHECK(back.scenes_per_class == 2);
    CHECK(back.patch_n == 15);
    CHECK(back.patch_stride == 15);
    CHECK(back.augment_multiplicity == 0);
    CHECK(back.split_by_scene == true);
    CHECK(back.svc_lambda == 5e-4);
    CHECK(back.train_opts.epochs == 3);
    CHECK(back.train_opts.lr == 0.02);
    CHECK(back.net.stem_channels == 8);
}

TEST_CASE("partial JSON keeps defaults for unspecified fields") {
    const RunConfig config = run_config_from_json(R"({"seed": 9, "patches": {"n": 11}})");
    CHECK(config.seed == 9);
    CHECK(config.patch_n == 11);
    CHECK(config.patch_stride == 9);
    CHECK(config.scenes_per_class == 6);
    CHECK(config.scene.height == 216);
    CHECK(config.scene.width == 409);
    CHECK(config.train_opts.epochs == 30);
    CHECK(config.stages.generate);
    CHECK(config.stages.resnet);
}

TEST_CASE("config validation rejects nonsense") {
    RunConfig config;
    config.scenes_per_class = 0;
    CHECK_THROWS_AS(config.validate(), Error);

    config = RunConfig{};
    config.patch_n = 0;
    CHECK_THROWS_AS(config.validate(), Error);

    config = RunConfig{};
    config.environment = "underwater";
    CHECK_THROWS_AS(config.validate(), Error);

    CHECK_THROWS(run_config_from_json("{not json"));
}

TEST_CASE("generation-only run writes scenes and an empty summary") {
    hsi_test::TempDir dir("pipeline_gen");
    RunConfig config = small_run(dir / "out", 5);
    config.stages = {true, false, false, false, false, false, false};
    const PipelineSummary summary = run_pipeline(config);
    CHECK(summary.rows.empty());
    CHECK(summary.svc_test_accuracy == -1.0);
    CHECK(summary.patch_total == 0);

    namespace fs = std::filesystem;
    int raw = 0;
    for (const auto& entry : fs::recursive_directory_iterator(config.out_dir))
        if (entry.path().extension() == ".hsc") ++raw;
    CHECK(raw >= 14);  // 7 classes x (raw + dark) at least
}

TEST_CASE("generated artifacts are identical across reruns") {
    hsi_test::TempDir dir("pipeline_det");
    RunConfig a = small_run(dir / "a", 11);
    RunConfig b = small_run(dir / "b", 11);
    a.stages = {true, true, false, false, false, false, false};
    b.stages = {true, true, false, false, false, false, false};
    run_pipeline(a);
    run_pipeline(b);

    namespace fs = std::filesystem;
    int compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a.out_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a.out_dir);
        const auto other = b.out_dir / rel;
        REQUIRE(fs::exists(other));
        CHECK(slurp(entry.path()) == slurp(other));
        ++compared;
    }
    CHECK(compared > 0);
}

TEST_CASE("summary CSV carries the exact column header") {
    PipelineSummary summary;
    summary.rows.push_back({19, 9, 600, 200, 200, "indoor", 0.05, 0.91, 0.9});
    const std::string csv = summary_to_csv(summary);
    CHECK(csv.rfind("patch_size,stride,n_train,n_val,n_test,environment_tag,"
                    "train_error,val_accuracy,test_accuracy\n",
                    0) == 0);
    CHECK(csv.find("19,9,600,200,200,indoor,") != std::string::npos);
}

TEST_CASE("training curves are emitted as CSV and SVG") {
    hsi_test::TempDir dir("pipeline_curves");
    TrainReport report;
    report.epochs.push_back({1, 1.9, 0.2, 0.15});
    report.epochs.push_back({2, 1.2, 0.6, 0.5});
    emit_curves(report, dir.path);

    const std::string csv = slurp(dir / "curves.csv");
    CHECK(csv.rfind("epoch,train_loss,train_acc,val_acc\n", 0) == 0);
    CHECK(csv.find("\n1,") != std::string::npos);

    const std::string svg = slurp(dir / "curves.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
}

TEST_CASE("stage failures name the stage") {
    hsi_test::TempDir dir("pipeline_fail");
    RunConfig config = small_run(dir / "out", 3);
    // Ask for patches without any of the producing stages: the patch stage
    // finds neither in-memory cubes nor artifacts and must say so.
    config.stages = {false, false, false, false, true, false, false};
    try {
        run_pipeline(config);
        FAIL("expected the patch stage to fail");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("patch") != std::string::npos);
    }
}

TEST_SUITE_END();
