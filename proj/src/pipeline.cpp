#include "hsi/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "hsi/rng.hpp"
#include "hsi/segmentation.hpp"
#include "hsi/spectral.hpp"
#include "hsi/svm.hpp"

namespace hsi {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// One global seed governs the whole run; stage seeds are derived with fixed
// tags so every stage is reproducible independently of the others.
constexpr uint64_t kSeedGenerate = 10;
constexpr uint64_t kSeedCalibrate = 20;
constexpr uint64_t kSeedSegSample = 30;
constexpr uint64_t kSeedSegTrain = 31;
constexpr uint64_t kSeedSplit = 40;
constexpr uint64_t kSeedAugment = 50;
constexpr uint64_t kSeedSvc = 60;
constexpr uint64_t kSeedSvr = 61;
constexpr uint64_t kSeedNetInit = 70;
constexpr uint64_t kSeedNetTrain = 71;

std::string scene_tag(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%03d", index);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
    out << text;
    if (!text.empty() && text.back() != '\n') out << "\n";
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io_failure, "cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct PipelineState {
    int count = 0;
    int per_class = 0;
    std::vector<int> labels;
    std::vector<HyperCube> raw, dark, calibrated;
    std::vector<Mask> truth, fg;
    PatchSet patches;
    SplitResult splits;
    PatchSet train_aug;
    TrainReport report;
    bool have_report = false;
};

void write_manifest(const RunConfig& cfg, const PipelineState& st) {
    json j{{"count", st.count},
           {"per_class", st.per_class},
           {"labels", st.labels},
           {"environment", cfg.environment},
           {"height", cfg.scene.height},
           {"width", cfg.scene.width},
           {"bands", cfg.scene.bands}};
    write_text(cfg.out_dir / "scenes" / "manifest.json", j.dump(2));
}

void ensure_manifest(const RunConfig& cfg, PipelineState& st) {
    if (st.count > 0) return;
    const auto j = json::parse(read_text(cfg.out_dir / "scenes" / "manifest.json"));
    st.count = j.at("count").get<int>();
    st.per_class = j.at("per_class").get<int>();
    st.labels = j.at("labels").get<std::vector<int>>();
    if (st.count <= 0 || st.labels.size() != static_cast<size_t>(st.count))
        fail(errc::bad_argument, "manifest is inconsistent");
}

void ensure_raw_dark(const RunConfig& cfg, PipelineState& st) {
    if (!st.raw.empty()) return;
    ensure_manifest(cfg, st);
    for (int i = 0; i < st.count; ++i) {
        const fs::path dir = cfg.out_dir / "scenes";
        st.raw.push_back(load_cube(dir / (scene_tag(i) + "_raw.hsc")));
        st.dark.push_back(load_cube(dir / (scene_tag(i) + "_dark.hsc")));
    }
}

void ensure_truth(const RunConfig& cfg, PipelineState& st) {
    if (!st.truth.empty()) return;
    ensure_manifest(cfg, st);
    for (int i = 0; i < st.count; ++i)
        st.truth.push_back(load_mask_pgm(cfg.out_dir / "scenes" / (scene_tag(i) + "_mask.pgm")));
}

void ensure_calibrated(const RunConfig& cfg, PipelineState& st) {
    if (!st.calibrated.empty()) return;
    ensure_manifest(cfg, st);
    for (int i = 0; i < st.count; ++i)
        st.calibrated.push_back(
            load_cube(cfg.out_dir / "calibrated" / (scene_tag(i) + "_refl.hsc")));
}

void ensure_fg(const RunConfig& cfg, PipelineState& st) {
    if (!st.fg.empty()) return;
    ensure_manifest(cfg, st);
    for (int i = 0; i < st.count; ++i)
        st.fg.push_back(load_mask_pgm(cfg.out_dir / "segment" / (scene_tag(i) + "_fg.pgm")));
}

void ensure_patch_splits(const RunConfig& cfg, PipelineState& st) {
    if (!st.patches.patches.empty()) return;
    const fs::path dir = cfg.out_dir / "patches";
    st.patches = load_patches(dir / "all.hps");
    st.splits.train = load_patches(dir / "train.hps");
    st.splits.validation = load_patches(dir / "validation.hps");
    st.splits.test = load_patches(dir / "test.hps");
    st.train_aug = load_patches(dir / "train_augmented.hps");
}

void stage_generate(const RunConfig& cfg, PipelineState& st) {
    SceneSpec base = cfg.scene;
    if (!cfg.environment.empty()) apply_environment_preset(base, cfg.environment);
    std::vector<Scene> scenes =
        generate_dataset(base, cfg.scenes_per_class, derive_seed(cfg.seed, {kSeedGenerate}));

    const fs::path dir = cfg.out_dir / "scenes";
    fs::create_directories(dir);
    st.count = static_cast<int>(scenes.size());
    st.per_class = cfg.scenes_per_class;
    st.labels.clear();
    st.raw.clear();
    st.dark.clear();
    st.truth.clear();
    for (int i = 0; i < st.count; ++i) {
        Scene& s = scenes[i];
        const std::string tag = scene_tag(i);
        save_cube(s.raw, dir / (tag + "_raw.hsc"));
        save_cube(s.dark, dir / (tag + "_dark.hsc"));
        save_cube(s.truth.reflectance, dir / (tag + "_truth.hsc"));
        save_mask_pgm(s.truth.mask, dir / (tag + "_mask.pgm"));
        save_scene_sidecar(s.truth, dir / (tag + "_meta.json"));
        st.labels.push_back(s.truth.label);
        st.raw.push_back(std::move(s.raw));
        st.dark.push_back(std::move(s.dark));
        st.truth.push_back(std::move(s.truth.mask));
    }
    write_manifest(cfg, st);
}

void stage_calibrate(const RunConfig& cfg, PipelineState& st) {
    ensure_raw_dark(cfg, st);
    const fs::path dir = cfg.out_dir / "calibrated";
    fs::create_directories(dir);
    CalibrationParams params = cfg.calibration;
    params.seed = derive_seed(cfg.seed, {kSeedCalibrate});

    st.calibrated.clear();
    for (int i = 0; i < st.count; ++i) {
        auto [refl, report] = calibrate(st.raw[i], st.dark[i], params);
        const std::string tag = scene_tag(i);
        save_cube(refl, dir / (tag + "_refl.hsc"));
        write_text(dir / (tag + "_report.json"), calibration_report_to_json(report));
        save_curve_csv(report.white_curve, dir / (tag + "_white.csv"));
        save_mask_pgm(report.spectralon_mask, dir / (tag + "_spectralon.pgm"));
        st.calibrated.push_back(std::move(refl));
    }
    // Raw frames are not needed past this point.
    st.raw.clear();
    st.dark.clear();
}

void stage_segment(const RunConfig& cfg, PipelineState& st) {
    ensure_calibrated(cfg, st);
    ensure_truth(cfg, st);
    const fs::path dir = cfg.out_dir / "segment";
    fs::create_directories(dir);

    // Annotated pixels come from the first scene of every class.
    const uint64_t per_scene =
        (cfg.seg_samples_per_class + kRatingClasses.size() - 1) / kRatingClasses.size();
    std::vector<LabeledSpectrum> samples;
    for (size_t ci = 0; ci < kRatingClasses.size(); ++ci) {
        const int i = static_cast<int>(ci) * st.per_class;
        auto scene_samples =
            collect_pixel_samples(st.calibrated[i], st.truth[i], per_scene,
                                  derive_seed(cfg.seed, {kSeedSegSample, ci}));
        samples.insert(samples.end(), scene_samples.begin(), scene_samples.end());
    }
    const PixelSvmModel model = train_pixel_svm(samples, cfg.seg_lambda, cfg.seg_epochs,
                                                derive_seed(cfg.seed, {kSeedSegTrain}));
    save_pixel_svm(model, dir / "pixel_svm.json");

    st.fg.clear();
    json ious = json::array();
    double iou_sum = 0.0;
    for (int i = 0; i < st.count; ++i) {
        Mask mask = mask_clean(segment(st.calibrated[i], model), cfg.min_component_px);
        save_mask_pgm(mask, dir / (scene_tag(i) + "_fg.pgm"));
        const double iou = mask_iou(mask, st.truth[i]);
        ious.push_back(iou);
        iou_sum += iou;
        st.fg.push_back(std::move(mask));
    }
    write_text(dir / "iou.json",
               json{{"per_scene", ious}, {"mean", iou_sum / st.count}}.dump(2));
}

void stage_analyze(const RunConfig& cfg, PipelineState& st) {
    ensure_calibrated(cfg, st);
    ensure_fg(cfg, st);
    const fs::path dir = cfg.out_dir / "analysis";
    fs::create_directories(dir);

    for (size_t ci = 0; ci < kRatingClasses.size(); ++ci) {
        const int i = static_cast<int>(ci) * st.per_class;
        const std::string cls = std::to_string(kRatingClasses[ci]);
        save_curve_csv(mean_spectral_curve(st.calibrated[i], st.fg[i]),
                       dir / ("mean_curve_class_" + cls + ".csv"));
        const ScalarMap map = laplacian_map(st.calibrated[i], st.fg[i], MapStatistic::mean_angle);
        save_scalar_map_pgm16(map, dir / ("sam_map_class_" + cls + ".pgm"),
                              dir / ("sam_map_class_" + cls + ".json"));
        save_scalar_map_csv(map, dir / ("sam_map_class_" + cls + ".csv"));
    }
}

void stage_patch(const RunConfig& cfg, PipelineState& st) {
    ensure_calibrated(cfg, st);
    ensure_fg(cfg, st);
    ensure_manifest(cfg, st);
    const fs::path dir = cfg.out_dir / "patches";
    fs::create_directories(dir);

    PatchSet all;
    for (int i = 0; i < st.count; ++i) {
        PatchSet scene_set =
            extract_patches(st.calibrated[i], st.fg[i], st.labels[i], cfg.patch_n,
                            cfg.patch_stride, static_cast<uint32_t>(i));
        if (all.patches.empty()) {
            all = std::move(scene_set);
        } else {
            for (Patch& p : scene_set.patches) all.append(std::move(p));
        }
    }
    if (all.patches.empty()) fail(errc::empty_input, "no patches extracted");
    save_patches(all, dir / "all.hps");

    const uint64_t split_seed = derive_seed(cfg.seed, {kSeedSplit});
    st.splits = cfg.split_by_scene ? split_by_scene(all, cfg.ratios, split_seed)
                                   : split(all, cfg.ratios, split_seed, cfg.stratified);
    save_patches(st.splits.train, dir / "train.hps");
    save_patches(st.splits.validation, dir / "validation.hps");
    save_patches(st.splits.test, dir / "test.hps");

    std::vector<ScenePixels> scenes(st.count);
    for (int i = 0; i < st.count; ++i) scenes[i] = {&st.calibrated[i], &st.fg[i]};
    st.train_aug =
        augment_training_set(st.splits.train, scenes, cfg.augment_multiplicity,
                             derive_seed(cfg.seed, {kSeedAugment}), cfg.max_shift_px,
                             cfg.max_rot_deg);
    save_patches(st.train_aug, dir / "train_augmented.hps");
    st.patches = std::move(all);
}

void stage_svm(const RunConfig& cfg, PipelineState& st, PipelineSummary& summary) {
    ensure_patch_splits(cfg, st);
    const fs::path dir = cfg.out_dir / "svm";
    fs::create_directories(dir);

    const MulticlassSvmModel svc = train_svc(st.train_aug, cfg.svc_lambda, cfg.svc_epochs,
                                             derive_seed(cfg.seed, {kSeedSvc}));
    save_svc(svc, dir / "svc.json");
    const std::vector<int> preds = predict_svc_set(svc, st.splits.test);
    std::vector<std::pair<int, int>> pairs(preds.size());
    for (size_t i = 0; i < preds.size(); ++i)
        pairs[i] = {st.splits.test.patches[i].label, preds[i]};
    const EvalReport svc_eval = evaluate(pairs);
    write_text(dir / "svc_eval.json", eval_report_to_json(svc_eval));
    write_text(dir / "svc_confusion.csv", confusion_to_csv(svc_eval));
    summary.svc_test_accuracy = svc_eval.accuracy;

    const SvrModel svr = train_svr(st.train_aug, cfg.svc_lambda, cfg.svr_epsilon,
                                   cfg.svc_epochs, derive_seed(cfg.seed, {kSeedSvr}));
    save_svr(svr, dir / "svr.json");
    for (size_t i = 0; i < st.splits.test.size(); ++i)
        pairs[i] = {st.splits.test.patches[i].label,
                    nearest_rating_class(predict_svr(svr, st.splits.test.patches[i]))};
    const EvalReport svr_eval = evaluate(pairs);
    write_text(dir / "svr_eval.json", eval_report_to_json(svr_eval));
    write_text(dir / "svr_confusion.csv", confusion_to_csv(svr_eval));
    summary.svr_test_accuracy = svr_eval.accuracy;
}

void stage_resnet(const RunConfig& cfg, PipelineState& st, PipelineSummary& summary) {
    ensure_patch_splits(cfg, st);
    const fs::path dir = cfg.out_dir / "resnet";
    fs::create_directories(dir);

    NetConfig nc = cfg.net;
    nc.input_n = st.patches.n;
    nc.input_bands = st.patches.bands;
    nc.seed = derive_seed(cfg.seed, {kSeedNetInit});
    TrainOptions opts = cfg.train_opts;
    opts.seed = derive_seed(cfg.seed, {kSeedNetTrain});

    SplitResult training = st.splits;
    training.train = st.train_aug;
    auto [net, report] = train(init_net(nc), training, opts);
    save_net(net, dir / "net.hrn");
    emit_curves(report, dir);
    const EvalReport eval = evaluate_net(net, st.splits.test);
    write_text(dir / "eval.json", eval_report_to_json(eval));
    write_text(dir / "confusion.csv", confusion_to_csv(eval));
    st.report = report;
    st.have_report = true;

    SummaryRow row;
    row.patch_size = st.patches.n;
    row.stride = cfg.patch_stride;
    row.n_train = st.splits.train.size();
    row.n_val = st.splits.validation.size();
    row.n_test = st.splits.test.size();
    row.environment_tag = cfg.environment.empty() ? "flat" : cfg.environment;
    row.train_error = report.epochs.empty() ? 1.0 : 1.0 - report.epochs.back().train_accuracy;
    row.val_accuracy = report.epochs.empty() ? 0.0 : report.epochs.back().val_accuracy;
    row.test_accuracy = report.final_test_accuracy;
    summary.rows.push_back(std::move(row));
}

template <typename F>
void run_stage(const char* name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body();
    } catch (const Error& e) {
        throw Error(e.code(), std::string(name) + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error(errc::io_failure, std::string(name) + ": " + e.what());
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[pipeline] %-9s %.2f s\n", name, sec);
    std::fflush(stdout);
}

}  // namespace

void RunConfig::validate() const {
    scene.validate();
    calibration.validate();
    if (scenes_per_class < 1) fail(errc::bad_argument, "scenes_per_class must be >= 1");
    if (patch_n < 1 || patch_stride < 1)
        fail(errc::bad_argument, "patch_n and patch_stride must be >= 1");
    if (!environment.empty() && environment != "indoor" && environment != "outdoor")
        fail(errc::bad_argument, "environment must be empty, indoor, or outdoor");
}

PipelineSummary run_pipeline(const RunConfig& config) {
    config.validate();
    fs::create_directories(config.out_dir);

    PipelineState st;
    PipelineSummary summary;
    if (config.stages.generate) run_stage("generate", [&] { stage_generate(config, st); });
    if (config.stages.calibrate) run_stage("calibrate", [&] { stage_calibrate(config, st); });
    if (config.stages.segment) run_stage("segment", [&] { stage_segment(config, st); });
    if (config.stages.analyze) run_stage("analyze", [&] { stage_analyze(config, st); });
    if (config.stages.patch) run_stage("patch", [&] { stage_patch(config, st); });
    if (config.stages.svm) run_stage("svm", [&] { stage_svm(config, st, summary); });
    if (config.stages.resnet) run_stage("resnet", [&] { stage_resnet(config, st, summary); });

    summary.patch_total = st.patches.size();
    write_text(config.out_dir / "summary.csv", summary_to_csv(summary));
    return summary;
}

std::string summary_to_csv(const PipelineSummary& summary) {
    std::string csv =
        "patch_size,stride,n_train,n_val,n_test,environment_tag,train_error,val_accuracy,"
        "test_accuracy\n";
    char line[256];
    for (const SummaryRow& r : summary.rows) {
        std::snprintf(line, sizeof line, "%u,%u,%llu,%llu,%llu,%s,%.6f,%.6f,%.6f\n",
                      r.patch_size, r.stride, static_cast<unsigned long long>(r.n_train),
                      static_cast<unsigned long long>(r.n_val),
                      static_cast<unsigned long long>(r.n_test), r.environment_tag.c_str(),
                      r.train_error, r.val_accuracy, r.test_accuracy);
        csv += line;
    }
    return csv;
}

void emit_curves(const TrainReport& report, const std::filesystem::path& out_dir) {
    if (report.epochs.empty()) fail(errc::empty_input, "empty training report");
    fs::create_directories(out_dir);
    write_text(out_dir / "curves.csv", train_report_to_csv(report));

    // Minimal SVG line plot: loss normalized to its own max on the left,
    // accuracies on a fixed [0,1] axis.
    const double width = 640, height = 360, ml = 50, mr = 10, mt = 20, mb = 40;
    const double pw = width - ml - mr, ph = height - mt - mb;
    const size_t n = report.epochs.size();
    double loss_max = 1e-12;
    for (const EpochRecord& r : report.epochs) loss_max = std::max(loss_max, r.train_loss);

    const auto x_at = [&](size_t i) {
        return ml + (n == 1 ? pw / 2 : pw * static_cast<double>(i) / (n - 1));
    };
    const auto poly = [&](const char* color, auto value) {
        std::string pts;
        char buf[64];
        for (size_t i = 0; i < n; ++i) {
            const double v = std::clamp(value(report.epochs[i]), 0.0, 1.0);
            std::snprintf(buf, sizeof buf, "%.1f,%.1f ", x_at(i), mt + ph * (1.0 - v));
            pts += buf;
        }
        return "  <polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    };

    std::string svg;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                  "viewBox=\"0 0 %.0f %.0f\">\n",
                  width, height, width, height);
    svg += buf;
    svg += "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                  ml, mt, ml, mt + ph);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                  ml, mt + ph, ml + pw, mt + ph);
    svg += buf;
    svg += poly("#c44", [&](const EpochRecord& r) { return r.train_loss / loss_max; });
    svg += poly("#47c", [](const EpochRecord& r) { return r.train_accuracy; });
    svg += poly("#2a2", [](const EpochRecord& r) { return r.val_accuracy; });
    std::snprintf(buf, sizeof buf,
                  "  <text x=\"%.1f\" y=\"%.1f\" font-size=\"12\">epoch (0..%zu); loss scaled by "
                  "max=%.4f</text>\n",
                  ml, height - 12.0, n - 1, loss_max);
    svg += buf;
    svg += "  <text x=\"60\" y=\"16\" font-size=\"12\" fill=\"#c44\">train_loss</text>\n";
    svg += "  <text x=\"140\" y=\"16\" font-size=\"12\" fill=\"#47c\">train_acc</text>\n";
    svg += "  <text x=\"220\" y=\"16\" font-size=\"12\" fill=\"#2a2\">val_acc</text>\n";
    svg += "</svg>\n";
    write_text(out_dir / "curves.svg", svg);
}

namespace {

json stages_to_json(const StageSet& s) {
    json arr = json::array();
    if (s.generate) arr.push_back("generate");
    if (s.calibrate) arr.push_back("calibrate");
    if (s.segment) arr.push_back("segment");
    if (s.analyze) arr.push_back("analyze");
    if (s.patch) arr.push_back("patch");
    if (s.svm) arr.push_back("svm");
    if (s.resnet) arr.push_back("resnet");
    return arr;
}

StageSet stages_from_json(const json& arr) {
    StageSet s;
    s.generate = s.calibrate = s.segment = s.analyze = s.patch = s.svm = s.resnet = false;
    for (const auto& v : arr) {
        const std::string name = v.get<std::string>();
        if (name == "generate") s.generate = true;
        else if (name == "calibrate") s.calibrate = true;
        else if (name == "segment") s.segment = true;
        else if (name == "analyze") s.analyze = true;
        else if (name == "patch") s.patch = true;
        else if (name == "svm") s.svm = true;
        else if (name == "resnet") s.resnet = true;
        else fail(errc::bad_argument, "unknown stage: " + name);
    }
    return s;
}

}  // namespace

std::string run_config_to_json(const RunConfig& c) {
    json j{
        {"out_dir", c.out_dir.string()},
        {"seed", c.seed},
        {"environment", c.environment},
        {"stages", stages_to_json(c.stages)},
        {"scene", json::parse(scene_spec_to_json(c.scene))},
        {"scenes_per_class", c.scenes_per_class},
        {"calibration",
         {{"kmeans_k", c.calibration.kmeans_k},
          {"kmeans_iters", c.calibration.kmeans_iters},
          {"saturation_reject_fraction", c.calibration.saturation_reject_fraction},
          {"reference_pixel_count", c.calibration.reference_pixel_count},
          {"epsilon", c.calibration.epsilon},
          {"spectralon_reflectance", c.calibration.spectralon_reflectance}}},
        {"segmentation",
         {{"lambda", c.seg_lambda},
          {"epochs", c.seg_epochs},
          {"samples_per_class", c.seg_samples_per_class},
          {"min_component_px", c.min_component_px}}},
        {"patches",
         {{"n", c.patch_n},
          {"stride", c.patch_stride},
          {"augment_multiplicity", c.augment_multiplicity},
          {"max_shift_px", c.max_shift_px},
          {"max_rot_deg", c.max_rot_deg},
          {"ratios", {c.ratios.train, c.ratios.validation, c.ratios.test}},
          {"stratified", c.stratified},
          {"split_by_scene", c.split_by_scene}}},
        {"svm",
         {{"lambda", c.svc_lambda}, {"epochs", c.svc_epochs}, {"epsilon_tube", c.svr_epsilon}}},
        {"resnet",
         {{"stem_channels", c.net.stem_channels},
          {"stem_stride", c.net.stem_stride},
          {"num_blocks", c.net.num_blocks},
          {"channels_per_stage", c.net.channels_per_stage},
          {"use_rectifier", c.net.use_rectifier}}},
        {"train",
         {{"epochs", c.train_opts.epochs},
          {"lr", c.train_opts.lr},
          {"momentum", c.train_opts.momentum},
          {"lr_decay", c.train_opts.lr_decay},
          {"batch_size", c.train_opts.batch_size}}},
    };
    return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
    const json j = json::parse(text);
    RunConfig c;
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
    if (j.contains("environment")) c.environment = j["environment"].get<std::string>();
    if (j.contains("stages")) c.stages = stages_from_json(j["stages"]);
    if (j.contains("scene")) c.scene = scene_spec_from_json(j["scene"].dump());
    if (j.contains("scenes_per_class")) c.scenes_per_class = j["scenes_per_class"].get<int>();
    if (j.contains("calibration")) {
        const auto& k = j["calibration"];
        if (k.contains("kmeans_k")) c.calibration.kmeans_k = k["kmeans_k"].get<uint32_t>();
        if (k.contains("kmeans_iters"))
            c.calibration.kmeans_iters = k["kmeans_iters"].get<uint32_t>();
        if (k.contains("saturation_reject_fraction"))
            c.calibration.saturation_reject_fraction =
                k["saturation_reject_fraction"].get<float>();
        if (k.contains("reference_pixel_count"))
            c.calibration.reference_pixel_count = k["reference_pixel_count"].get<uint32_t>();
        if (k.contains("epsilon")) c.calibration.epsilon = k["epsilon"].get<float>();
        if (k.contains("spectralon_reflectance"))
            c.calibration.spectralon_reflectance = k["spectralon_reflectance"].get<float>();
    }
    if (j.contains("segmentation")) {
        const auto& k = j["segmentation"];
        if (k.contains("lambda")) c.seg_lambda = k["lambda"].get<double>();
        if (k.contains("epochs")) c.seg_epochs = k["epochs"].get<uint32_t>();
        if (k.contains("samples_per_class"))
            c.seg_samples_per_class = k["samples_per_class"].get<uint64_t>();
        if (k.contains("min_component_px"))
            c.min_component_px = k["min_component_px"].get<uint64_t>();
    }
    if (j.contains("patches")) {
        const auto& k = j["patches"];
        if (k.contains("n")) c.patch_n = k["n"].get<uint32_t>();
        if (k.contains("stride")) c.patch_stride = k["stride"].get<uint32_t>();
        if (k.contains("augment_multiplicity"))
            c.augment_multiplicity = k["augment_multiplicity"].get<uint32_t>();
        if (k.contains("max_shift_px")) c.max_shift_px = k["max_shift_px"].get<int>();
        if (k.contains("max_rot_deg")) c.max_rot_deg = k["max_rot_deg"].get<double>();
        if (k.contains("ratios")) {
            const auto r = k["ratios"].get<std::vector<uint32_t>>();
            if (r.size() != 3) fail(errc::bad_argument, "ratios must have 3 entries");
            c.ratios = {r[0], r[1], r[2]};
        }
        if (k.contains("stratified")) c.stratified = k["stratified"].get<bool>();
        if (k.contains("split_by_scene")) c.split_by_scene = k["split_by_scene"].get<bool>();
    }
    if (j.contains("svm")) {
        const auto& k = j["svm"];
        if (k.contains("lambda")) c.svc_lambda = k["lambda"].get<double>();
        if (k.contains("epochs")) c.svc_epochs = k["epochs"].get<uint32_t>();
        if (k.contains("epsilon_tube")) c.svr_epsilon = k["epsilon_tube"].get<double>();
    }
    if (j.contains("resnet")) {
        const auto& k = j["resnet"];
        if (k.contains("stem_channels")) c.net.stem_channels = k["stem_channels"].get<uint32_t>();
        if (k.contains("stem_stride")) c.net.stem_stride = k["stem_stride"].get<uint32_t>();
        if (k.contains("num_blocks")) c.net.num_blocks = k["num_blocks"].get<uint32_t>();
        if (k.contains("channels_per_stage"))
            c.net.channels_per_stage = k["channels_per_stage"].get<std::vector<uint32_t>>();
        if (k.contains("use_rectifier")) c.net.use_rectifier = k["use_rectifier"].get<bool>();
    }
    if (j.contains("train")) {
        const auto& k = j["train"];
        if (k.contains("epochs")) c.train_opts.epochs = k["epochs"].get<uint32_t>();
        if (k.contains("lr")) c.train_opts.lr = k["lr"].get<double>();
        if (k.contains("momentum")) c.train_opts.momentum = k["momentum"].get<double>();
        if (k.contains("lr_decay")) c.train_opts.lr_decay = k["lr_decay"].get<double>();
        if (k.contains("batch_size")) c.train_opts.batch_size = k["batch_size"].get<uint32_t>();
    }
    c.validate();
    return c;
}

RunConfig run_config_from_json_file(const std::filesystem::path& path) {
    return run_config_from_json(read_text(path));
}

}  // namespace hsi
