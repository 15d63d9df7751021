// hsi: command-line front end. One binary, one subcommand per stage, plus the
// all-in-one `pipeline`.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"

#include "hsi/pipeline.hpp"
#include "hsi/rng.hpp"
#include "hsi/segmentation.hpp"
#include "hsi/spectral.hpp"
#include "hsi/svm.hpp"

namespace {

using namespace hsi;

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
    out << text;
    if (!text.empty() && text.back() != '\n') out << "\n";
}

struct GenArgs {
    std::string spec_path;
    std::string out_dir = "scenes";
    int per_class = 0;  // 0 = one scene from the spec as-is
    uint64_t seed = 42;
    std::string environment;
};

int run_gen(const GenArgs& a) {
    SceneSpec spec;
    if (!a.spec_path.empty()) spec = scene_spec_from_json_file(a.spec_path);
    if (!a.environment.empty()) apply_environment_preset(spec, a.environment);
    const std::filesystem::path dir = a.out_dir;
    std::filesystem::create_directories(dir);

    const auto save_one = [&dir](const Scene& s, const std::string& tag) {
        save_cube(s.raw, dir / (tag + "_raw.hsc"));
        save_cube(s.dark, dir / (tag + "_dark.hsc"));
        save_cube(s.truth.reflectance, dir / (tag + "_truth.hsc"));
        save_mask_pgm(s.truth.mask, dir / (tag + "_mask.pgm"));
        save_scene_sidecar(s.truth, dir / (tag + "_meta.json"));
    };

    if (a.per_class <= 0) {
        spec.seed = a.seed;
        save_one(generate_scene(spec), "scene_000");
        std::printf("wrote 1 scene to %s\n", dir.string().c_str());
        return 0;
    }
    const std::vector<Scene> scenes = generate_dataset(spec, a.per_class, a.seed);
    for (size_t i = 0; i < scenes.size(); ++i) {
        char tag[32];
        std::snprintf(tag, sizeof tag, "scene_%03zu", i);
        save_one(scenes[i], tag);
    }
    std::printf("wrote %zu scenes to %s\n", scenes.size(), dir.string().c_str());
    return 0;
}

struct CalArgs {
    std::string raw, dark, out, report;
    std::string white_csv, mask_pgm;
    CalibrationParams params;
};

int run_calibrate(const CalArgs& a) {
    const HyperCube raw = load_cube(a.raw);
    const HyperCube dark = load_cube(a.dark);
    auto [refl, report] = calibrate(raw, dark, a.params);
    save_cube(refl, a.out);
    write_text_file(a.report, calibration_report_to_json(report));
    if (!a.white_csv.empty()) save_curve_csv(report.white_curve, a.white_csv);
    if (!a.mask_pgm.empty()) save_mask_pgm(report.spectralon_mask, a.mask_pgm);
    for (const std::string& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    return 0;
}

struct SegTrainArgs {
    std::vector<std::string> cubes, masks;
    std::string model;
    uint64_t samples = 4000;
    double lambda = 1e-3;
    uint32_t epochs = 20;
    uint64_t seed = 42;
};

int run_seg_train(const SegTrainArgs& a) {
    if (a.cubes.size() != a.masks.size() || a.cubes.empty())
        fail(errc::bad_argument, "need matching --cube/--mask pairs");
    std::vector<LabeledSpectrum> samples;
    for (size_t i = 0; i < a.cubes.size(); ++i) {
        const HyperCube cube = load_cube(a.cubes[i]);
        const Mask mask = load_mask_pgm(a.masks[i]);
        auto s = collect_pixel_samples(cube, mask, a.samples, derive_seed(a.seed, {i}));
        samples.insert(samples.end(), s.begin(), s.end());
    }
    const PixelSvmModel model = train_pixel_svm(samples, a.lambda, a.epochs, a.seed);
    save_pixel_svm(model, a.model);
    return 0;
}

struct SegApplyArgs {
    std::string cube, model, out;
    uint64_t min_component = 0;
    std::string truth;  // optional: print IoU against a reference mask
};

int run_seg_apply(const SegApplyArgs& a) {
    const HyperCube cube = load_cube(a.cube);
    const PixelSvmModel model = load_pixel_svm(a.model);
    Mask mask = segment(cube, model);
    if (a.min_component > 0) mask = mask_clean(mask, a.min_component);
    save_mask_pgm(mask, a.out);
    if (!a.truth.empty())
        std::printf("iou %.6f\n", mask_iou(mask, load_mask_pgm(a.truth)));
    return 0;
}

struct AnalyzeArgs {
    std::string cube, mask, out, sidecar, csv;
    std::string stat = "mean_angle";
};

int run_mean_curve(const AnalyzeArgs& a) {
    const HyperCube cube = load_cube(a.cube);
    const Mask mask = load_mask_pgm(a.mask);
    save_curve_csv(mean_spectral_curve(cube, mask), a.out);
    return 0;
}

int run_sam_map(const AnalyzeArgs& a) {
    const HyperCube cube = load_cube(a.cube);
    const Mask mask = load_mask_pgm(a.mask);
    MapStatistic stat;
    if (a.stat == "mean_angle") stat = MapStatistic::mean_angle;
    else if (a.stat == "degree") stat = MapStatistic::degree;
    else fail(errc::bad_argument, "--stat must be mean_angle or degree");
    const ScalarMap map = laplacian_map(cube, mask, stat);
    const std::string sidecar = a.sidecar.empty() ? a.out + ".json" : a.sidecar;
    save_scalar_map_pgm16(map, a.out, sidecar);
    if (!a.csv.empty()) save_scalar_map_csv(map, a.csv);
    return 0;
}

struct PatchExtractArgs {
    std::string cube, mask, out;
    int label = 1;
    uint32_t n = 19, stride = 9, scene_id = 0;
};

int run_patch_extract(const PatchExtractArgs& a) {
    const HyperCube cube = load_cube(a.cube);
    const Mask mask = load_mask_pgm(a.mask);
    const PatchSet set = extract_patches(cube, mask, a.label, a.n, a.stride, a.scene_id);
    save_patches(set, a.out);
    std::printf("%zu patches\n", set.size());
    return 0;
}

struct PatchAugmentArgs {
    std::vector<std::string> cubes, masks;
    std::string patches, out;
    uint32_t mult = 3;
    int max_shift = 3;
    double max_rot = 20.0;
    uint64_t seed = 42;
};

int run_patch_augment(const PatchAugmentArgs& a) {
    if (a.cubes.size() != a.masks.size() || a.cubes.empty())
        fail(errc::bad_argument, "need matching --cube/--mask pairs (ordered by scene id)");
    std::vector<HyperCube> cubes;
    std::vector<Mask> masks;
    for (size_t i = 0; i < a.cubes.size(); ++i) {
        cubes.push_back(load_cube(a.cubes[i]));
        masks.push_back(load_mask_pgm(a.masks[i]));
    }
    std::vector<ScenePixels> scenes(cubes.size());
    for (size_t i = 0; i < cubes.size(); ++i) scenes[i] = {&cubes[i], &masks[i]};
    const PatchSet set = load_patches(a.patches);
    const PatchSet out =
        augment_training_set(set, scenes, a.mult, a.seed, a.max_shift, a.max_rot);
    save_patches(out, a.out);
    std::printf("%zu -> %zu patches\n", set.size(), out.size());
    return 0;
}

struct PatchSplitArgs {
    std::string patches, out_dir;
    std::vector<uint32_t> ratios{6, 2, 2};
    uint64_t seed = 42;
    bool by_scene = false;
    bool no_stratified = false;
};

int run_patch_split(const PatchSplitArgs& a) {
    const PatchSet set = load_patches(a.patches);
    if (a.ratios.size() != 3) fail(errc::bad_argument, "--ratios needs 3 values");
    const SplitRatios ratios{a.ratios[0], a.ratios[1], a.ratios[2]};
    const SplitResult r = a.by_scene ? split_by_scene(set, ratios, a.seed)
                                     : split(set, ratios, a.seed, !a.no_stratified);
    const std::filesystem::path dir = a.out_dir;
    std::filesystem::create_directories(dir);
    save_patches(r.train, dir / "train.hps");
    save_patches(r.validation, dir / "validation.hps");
    save_patches(r.test, dir / "test.hps");
    std::printf("train %zu  validation %zu  test %zu\n", r.train.size(), r.validation.size(),
                r.test.size());
    return 0;
}

struct SvmTrainArgs {
    std::string train, model;
    double lambda = 1e-4;
    uint32_t epochs = 10;
    uint64_t seed = 42;
    bool svr = false;
    double epsilon_tube = 0.5;
};

int run_svm_train(const SvmTrainArgs& a) {
    const PatchSet set = load_patches(a.train);
    if (a.svr) {
        save_svr(train_svr(set, a.lambda, a.epsilon_tube, a.epochs, a.seed), a.model);
    } else {
        save_svc(train_svc(set, a.lambda, a.epochs, a.seed), a.model);
    }
    return 0;
}

struct SvmPredictArgs {
    std::string model, patches, out;
    bool svr = false;
};

int run_svm_predict(const SvmPredictArgs& a) {
    const PatchSet set = load_patches(a.patches);
    std::string csv = "index,true_class,predicted_class\n";
    std::vector<int> preds;
    if (a.svr) {
        const SvrModel model = load_svr(a.model);
        for (const Patch& p : set.patches)
            preds.push_back(nearest_rating_class(predict_svr(model, p)));
    } else {
        preds = predict_svc_set(load_svc(a.model), set);
    }
    char line[64];
    for (size_t i = 0; i < preds.size(); ++i) {
        std::snprintf(line, sizeof line, "%zu,%d,%d\n", i, set.patches[i].label, preds[i]);
        csv += line;
    }
    write_text_file(a.out, csv);
    return 0;
}

struct SvmEvalArgs {
    std::string model, patches, report, confusion;
    bool svr = false;
};

int run_svm_eval(const SvmEvalArgs& a) {
    const PatchSet set = load_patches(a.patches);
    std::vector<std::pair<int, int>> pairs;
    if (a.svr) {
        const SvrModel model = load_svr(a.model);
        for (const Patch& p : set.patches)
            pairs.emplace_back(p.label, nearest_rating_class(predict_svr(model, p)));
    } else {
        const std::vector<int> preds = predict_svc_set(load_svc(a.model), set);
        for (size_t i = 0; i < preds.size(); ++i)
            pairs.emplace_back(set.patches[i].label, preds[i]);
    }
    const EvalReport r = evaluate(pairs);
    write_text_file(a.report, eval_report_to_json(r));
    if (!a.confusion.empty()) write_text_file(a.confusion, confusion_to_csv(r));
    std::printf("accuracy %.6f (n=%llu)\n", r.accuracy, static_cast<unsigned long long>(r.n));
    return 0;
}

struct ResnetTrainArgs {
    std::string train, val, test, model, report;
    NetConfig net;
    TrainOptions opts;
    uint64_t seed = 42;
};

int run_resnet_train(ResnetTrainArgs a) {
    SplitResult split;
    split.train = load_patches(a.train);
    split.validation = load_patches(a.val);
    split.test = load_patches(a.test);
    a.net.input_n = split.train.n;
    a.net.input_bands = split.train.bands;
    a.net.seed = derive_seed(a.seed, {0});
    a.opts.seed = derive_seed(a.seed, {1});
    auto [net, report] = train(init_net(a.net), split, a.opts);
    save_net(net, a.model);
    if (!a.report.empty()) write_text_file(a.report, train_report_to_csv(report));
    std::printf("test accuracy %.6f\n", report.final_test_accuracy);
    return 0;
}

struct ResnetEvalArgs {
    std::string model, patches, report, confusion;
};

int run_resnet_eval(const ResnetEvalArgs& a) {
    const ResidualNet net = load_net(a.model);
    const EvalReport r = evaluate_net(net, load_patches(a.patches));
    if (!a.report.empty()) write_text_file(a.report, eval_report_to_json(r));
    if (!a.confusion.empty()) write_text_file(a.confusion, confusion_to_csv(r));
    std::printf("accuracy %.6f (n=%llu)\n", r.accuracy, static_cast<unsigned long long>(r.n));
    return 0;
}

struct GradcheckArgs {
    NetConfig net;
    uint32_t batch = 2;
    uint64_t seed = 7;
    // In exact arithmetic a 1e-3 perturbation routinely flips a rectifier
    // state somewhere in the net, which breaks the difference quotient even
    // though the analytic gradient is right; 1e-4 stays below the kinks.
    double step = 1e-4;
    double tol = 1e-3;
};

int run_gradcheck(GradcheckArgs a) {
    a.net.seed = a.seed;
    const ResidualNet net = init_net(a.net);
    PatchSet batch;
    batch.n = a.net.input_n;
    batch.bands = a.net.input_bands;
    Rng rng(derive_seed(a.seed, {99}));
    for (uint32_t i = 0; i < a.batch; ++i) {
        Patch p;
        p.n = batch.n;
        p.bands = batch.bands;
        p.label =
            kRatingClasses[rng.uniform_int(0, static_cast<int64_t>(kRatingClasses.size()) - 1)];
        p.data.resize(static_cast<size_t>(p.n) * p.n * p.bands);
        for (float& v : p.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
        batch.append(std::move(p));
    }
    const double err = gradient_check(net, batch, a.step);
    std::printf("max relative gradient error %.3e over %zu parameters (tol %.1e)\n", err,
                net.params.size(), a.tol);
    return err < a.tol ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperspectral mosaic-resilience analysis"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker thread count (0 = library default)");

    GenArgs gen;
    CLI::App* c_gen = app.add_subcommand("gen", "generate synthetic scenes");
    c_gen->add_option("--spec", gen.spec_path, "scene spec JSON (defaults used if omitted)");
    c_gen->add_option("--out", gen.out_dir, "output directory");
    c_gen->add_option("--per-class", gen.per_class, "scenes per rating class (0 = single scene)");
    c_gen->add_option("--seed", gen.seed, "seed");
    c_gen->add_option("--environment", gen.environment, "illumination preset: indoor|outdoor");

    CalArgs cal;
    CLI::App* c_cal = app.add_subcommand("calibrate", "dark + white reflectance calibration");
    c_cal->add_option("--raw", cal.raw, "raw cube (HSC)")->required();
    c_cal->add_option("--dark", cal.dark, "dark cube (HSC)")->required();
    c_cal->add_option("--out", cal.out, "output reflectance cube (HSC)")->required();
    c_cal->add_option("--report", cal.report, "calibration report (JSON)")->required();
    c_cal->add_option("--k", cal.params.kmeans_k, "k-means cluster count");
    c_cal->add_option("--seed", cal.params.seed, "seed");
    c_cal->add_option("--white", cal.white_csv, "also write white curve CSV");
    c_cal->add_option("--mask", cal.mask_pgm, "also write spectralon mask PGM");

    SegTrainArgs seg_train;
    SegApplyArgs seg_apply;
    CLI::App* c_seg = app.add_subcommand("segment", "leaf foreground segmentation");
    c_seg->require_subcommand(1);
    CLI::App* c_seg_train = c_seg->add_subcommand("train", "train the pixel classifier");
    c_seg_train->add_option("--cube", seg_train.cubes, "reflectance cube(s)")->required();
    c_seg_train->add_option("--mask", seg_train.masks, "matching truth mask(s)")->required();
    c_seg_train->add_option("--model", seg_train.model, "output model JSON")->required();
    c_seg_train->add_option("--samples", seg_train.samples, "pixels per class per scene");
    c_seg_train->add_option("--lambda", seg_train.lambda, "regularization");
    c_seg_train->add_option("--epochs", seg_train.epochs, "training epochs");
    c_seg_train->add_option("--seed", seg_train.seed, "seed");
    CLI::App* c_seg_apply = c_seg->add_subcommand("apply", "segment a cube");
    c_seg_apply->add_option("--cube", seg_apply.cube, "reflectance cube")->required();
    c_seg_apply->add_option("--model", seg_apply.model, "model JSON")->required();
    c_seg_apply->add_option("--out", seg_apply.out, "output mask PGM")->required();
    c_seg_apply->add_option("--min-component", seg_apply.min_component,
                            "remove 4-connected components smaller than this");
    c_seg_apply->add_option("--truth", seg_apply.truth, "reference mask; prints IoU");

    AnalyzeArgs ana;
    CLI::App* c_ana = app.add_subcommand("analyze", "spectral summaries");
    c_ana->require_subcommand(1);
    CLI::App* c_mean = c_ana->add_subcommand("mean-curve", "masked mean spectrum as CSV");
    c_mean->add_option("--cube", ana.cube, "reflectance cube")->required();
    c_mean->add_option("--mask", ana.mask, "foreground mask")->required();
    c_mean->add_option("--out", ana.out, "output CSV")->required();
    CLI::App* c_sam = c_ana->add_subcommand("sam-map", "neighborhood spectral-angle map");
    c_sam->add_option("--cube", ana.cube, "reflectance cube")->required();
    c_sam->add_option("--mask", ana.mask, "foreground mask")->required();
    c_sam->add_option("--out", ana.out, "output 16-bit PGM")->required();
    c_sam->add_option("--sidecar", ana.sidecar, "normalization sidecar JSON (default <out>.json)");
    c_sam->add_option("--csv", ana.csv, "also write raw values as CSV");
    c_sam->add_option("--stat", ana.stat, "mean_angle|degree");

    PatchExtractArgs pex;
    PatchAugmentArgs pau;
    PatchSplitArgs psp;
    CLI::App* c_patch = app.add_subcommand("patch", "patch dataset operations");
    c_patch->require_subcommand(1);
    CLI::App* c_pex = c_patch->add_subcommand("extract", "sliding-window extraction");
    c_pex->add_option("--cube", pex.cube, "reflectance cube")->required();
    c_pex->add_option("--mask", pex.mask, "foreground mask")->required();
    c_pex->add_option("--out", pex.out, "output patch set (HPS)")->required();
    c_pex->add_option("--label", pex.label, "rating class label");
    c_pex->add_option("--n", pex.n, "patch side length");
    c_pex->add_option("--stride", pex.stride, "anchor stride");
    c_pex->add_option("--scene-id", pex.scene_id, "scene id recorded in each patch");
    CLI::App* c_pau = c_patch->add_subcommand("augment", "shift/rotate augmentation");
    c_pau->add_option("--patches", pau.patches, "input patch set (HPS)")->required();
    c_pau->add_option("--cube", pau.cubes, "source cube(s), ordered by scene id")->required();
    c_pau->add_option("--mask", pau.masks, "matching foreground mask(s)")->required();
    c_pau->add_option("--out", pau.out, "output patch set (HPS)")->required();
    c_pau->add_option("--mult", pau.mult, "augmented copies requested per patch");
    c_pau->add_option("--max-shift", pau.max_shift, "max |shift| in pixels");
    c_pau->add_option("--max-rot", pau.max_rot, "max |rotation| in degrees");
    c_pau->add_option("--seed", pau.seed, "seed");
    CLI::App* c_psp = c_patch->add_subcommand("split", "train/validation/test split");
    c_psp->add_option("--patches", psp.patches, "input patch set (HPS)")->required();
    c_psp->add_option("--out-dir", psp.out_dir, "output directory")->required();
    c_psp->add_option("--ratios", psp.ratios, "three integers, default 6 2 2")->expected(3);
    c_psp->add_option("--seed", psp.seed, "seed");
    c_psp->add_flag("--by-scene", psp.by_scene, "assign whole scenes to one split");
    c_psp->add_flag("--no-stratified", psp.no_stratified, "disable per-class stratification");

    SvmTrainArgs svm_train_args;
    SvmPredictArgs svm_pred;
    SvmEvalArgs svm_eval;
    CLI::App* c_svm = app.add_subcommand("svm", "flat linear SVM on flattened patches");
    c_svm->require_subcommand(1);
    CLI::App* c_svm_train = c_svm->add_subcommand("train", "train classifier or regressor");
    c_svm_train->add_option("--train", svm_train_args.train, "training patches (HPS)")->required();
    c_svm_train->add_option("--model", svm_train_args.model, "output model JSON")->required();
    c_svm_train->add_option("--lambda", svm_train_args.lambda, "regularization");
    c_svm_train->add_option("--epochs", svm_train_args.epochs, "epochs");
    c_svm_train->add_option("--seed", svm_train_args.seed, "seed");
    c_svm_train->add_flag("--svr", svm_train_args.svr, "train the rating regressor instead");
    c_svm_train->add_option("--epsilon-tube", svm_train_args.epsilon_tube,
                            "insensitive-band half width (regressor)");
    CLI::App* c_svm_pred = c_svm->add_subcommand("predict", "per-patch predictions as CSV");
    c_svm_pred->add_option("--model", svm_pred.model, "model JSON")->required();
    c_svm_pred->add_option("--patches", svm_pred.patches, "patch set (HPS)")->required();
    c_svm_pred->add_option("--out", svm_pred.out, "output CSV")->required();
    c_svm_pred->add_flag("--svr", svm_pred.svr, "model is the rating regressor");
    CLI::App* c_svm_eval = c_svm->add_subcommand("eval", "accuracy + confusion matrix");
    c_svm_eval->add_option("--model", svm_eval.model, "model JSON")->required();
    c_svm_eval->add_option("--patches", svm_eval.patches, "patch set (HPS)")->required();
    c_svm_eval->add_option("--report", svm_eval.report, "output report JSON")->required();
    c_svm_eval->add_option("--confusion", svm_eval.confusion, "also write confusion CSV");
    c_svm_eval->add_flag("--svr", svm_eval.svr, "model is the rating regressor");

    ResnetTrainArgs rt;
    ResnetEvalArgs re;
    GradcheckArgs gc;
    CLI::App* c_net = app.add_subcommand("resnet", "residual network on patches");
    c_net->require_subcommand(1);
    CLI::App* c_rt = c_net->add_subcommand("train", "train on a split");
    c_rt->add_option("--train", rt.train, "training patches (HPS)")->required();
    c_rt->add_option("--val", rt.val, "validation patches (HPS)")->required();
    c_rt->add_option("--test", rt.test, "test patches (HPS)")->required();
    c_rt->add_option("--model", rt.model, "output network file")->required();
    c_rt->add_option("--report", rt.report, "training curves CSV");
    c_rt->add_option("--epochs", rt.opts.epochs, "epochs");
    c_rt->add_option("--lr", rt.opts.lr, "learning rate");
    c_rt->add_option("--momentum", rt.opts.momentum, "momentum");
    c_rt->add_option("--batch", rt.opts.batch_size, "batch size");
    c_rt->add_option("--stem-channels", rt.net.stem_channels, "stem output channels");
    c_rt->add_option("--blocks", rt.net.num_blocks, "residual block count");
    c_rt->add_option("--channels", rt.net.channels_per_stage, "channels per block");
    c_rt->add_option("--seed", rt.seed, "seed");
    CLI::App* c_re = c_net->add_subcommand("eval", "evaluate a saved network");
    c_re->add_option("--model", re.model, "network file")->required();
    c_re->add_option("--patches", re.patches, "patch set (HPS)")->required();
    c_re->add_option("--report", re.report, "output report JSON");
    c_re->add_option("--confusion", re.confusion, "output confusion CSV");
    CLI::App* c_gc = c_net->add_subcommand("gradcheck", "finite-difference gradient check");
    gc.net.input_n = 9;
    gc.net.input_bands = 3;
    gc.net.stem_channels = 4;
    gc.net.num_blocks = 1;
    gc.net.channels_per_stage = {4};
    c_gc->add_option("--n", gc.net.input_n, "patch side length");
    c_gc->add_option("--bands", gc.net.input_bands, "band count");
    c_gc->add_option("--stem-channels", gc.net.stem_channels, "stem output channels");
    c_gc->add_option("--blocks", gc.net.num_blocks, "residual block count");
    c_gc->add_option("--channels", gc.net.channels_per_stage, "channels per block");
    c_gc->add_option("--batch", gc.batch, "batch size");
    c_gc->add_option("--seed", gc.seed, "seed");
    c_gc->add_option("--step", gc.step, "finite-difference step");
    c_gc->add_option("--tol", gc.tol, "max relative error accepted");
    c_gc->add_flag_callback("--no-rectifier", [&gc] { gc.net.use_rectifier = false; },
                            "disable rectifiers (smooth network)");

    std::string cfg_path;
    uint64_t pipe_seed = 0;
    bool pipe_seed_set = false, pipe_out_set = false;
    std::string pipe_out;
    std::vector<std::string> pipe_stages;
    CLI::App* c_pipe = app.add_subcommand("pipeline", "run all stages from a JSON config");
    c_pipe->add_option("--config", cfg_path, "run configuration JSON");
    c_pipe->add_option("--seed", pipe_seed, "override the config seed")
        ->each([&pipe_seed_set](const std::string&) { pipe_seed_set = true; });
    c_pipe->add_option("--out", pipe_out, "override the output directory")
        ->each([&pipe_out_set](const std::string&) { pipe_out_set = true; });
    c_pipe
        ->add_option("--stages", pipe_stages,
                     "subset of generate,calibrate,segment,analyze,patch,svm,resnet")
        ->delimiter(',');

    CLI11_PARSE(app, argc, argv);
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif

    try {
        if (*c_gen) return run_gen(gen);
        if (*c_cal) return run_calibrate(cal);
        if (*c_seg_train) return run_seg_train(seg_train);
        if (*c_seg_apply) return run_seg_apply(seg_apply);
        if (*c_mean) return run_mean_curve(ana);
        if (*c_sam) return run_sam_map(ana);
        if (*c_pex) return run_patch_extract(pex);
        if (*c_pau) return run_patch_augment(pau);
        if (*c_psp) return run_patch_split(psp);
        if (*c_svm_train) return run_svm_train(svm_train_args);
        if (*c_svm_pred) return run_svm_predict(svm_pred);
        if (*c_svm_eval) return run_svm_eval(svm_eval);
        if (*c_rt) return run_resnet_train(rt);
        if (*c_re) return run_resnet_eval(re);
        if (*c_gc) return run_gradcheck(gc);
        if (*c_pipe) {
            RunConfig cfg;
            if (!cfg_path.empty()) cfg = run_config_from_json_file(cfg_path);
            if (pipe_seed_set) cfg.seed = pipe_seed;
            if (pipe_out_set) cfg.out_dir = pipe_out;
            if (!pipe_stages.empty()) {
                StageSet s;
                s.generate = s.calibrate = s.segment = s.analyze = s.patch = s.svm = s.resnet =
                    false;
                for (const std::string& name : pipe_stages) {
                    if (name == "generate") s.generate = true;
                    else if (name == "calibrate") s.calibrate = true;
                    else if (name == "segment") s.segment = true;
                    else if (name == "analyze") s.analyze = true;
                    else if (name == "patch") s.patch = true;
                    else if (name == "svm") s.svm = true;
                    else if (name == "resnet") s.resnet = true;
                    else fail(errc::bad_argument, "unknown stage: " + name);
                }
                cfg.stages = s;
            }
            const PipelineSummary summary = run_pipeline(cfg);
            std::printf("%s", summary_to_csv(summary).c_str());
            return 0;
        }
    } catch (const hsi::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
