#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "hsi/calibration.hpp"
#include "hsi/linear_svm.hpp"
#include "hsi/rng.hpp"
#include "hsi/segmentation.hpp"
#include "hsi/synthgen.hpp"

using namespace hsi;

namespace {

std::vector<LabeledSpectrum> point_masses(uint32_t bands, int per_side) {
    std::vector<LabeledSpectrum> samples;
    for (int i = 0; i < per_side; ++i) {
        samples.push_back({std::vector<float>(bands, 1.0f), true});
        samples.push_back({std::vector<float>(bands, 0.0f), false});
    }
    return samples;
}

double hinge_objective_of(const std::vector<LabeledSpectrum>& samples,
                          const PixelSvmModel& model, double lambda) {
    double w2 = 0.0;
    for (float w : model.weights) w2 += static_cast<double>(w) * w;
    double hinge = 0.0;
    for (const auto& s : samples) {
        double score = model.bias;
        for (size_t i = 0; i < s.values.size(); ++i)
            score += static_cast<double>(model.weights[i]) * s.values[i];
        const double y = s.foreground ? 1.0 : -1.0;
        hinge += std::max(0.0, 1.0 - y * score);
    }
    return lambda / 2.0 * w2 + hinge / static_cast<double>(samples.size());
}

}  // namespace

TEST_SUITE_BEGIN("segmentation");

TEST_CASE("separable point masses are classified perfectly") {
    const auto samples = point_masses(11, 40);
    const PixelSvmModel model = train_pixel_svm(samples, 1e-3, 20, 7);
    CHECK(pixel_accuracy(samples, model) == doctest::Approx(1.0));
    CHECK(model.trained_on == samples.size());
}

TEST_CASE("training is deterministic given the seed") {
    const auto samples = point_masses(5, 30);
    const PixelSvmModel a = train_pixel_svm(samples, 1e-3, 15, 3);
    const PixelSvmModel b = train_pixel_svm(samples, 1e-3, 15, 3);
    CHECK(a.weights == b.weights);
    CHECK(a.bias == b.bias);
}

TEST_CASE("hinge objective decreases from the zero model") {
    const auto samples = point_masses(7, 25);
    PixelSvmModel zero;
    zero.weights.assign(7, 0.0f);
    zero.bias = 0.0f;
    const double before = hinge_objective_of(samples, zero, 1e-3);
    const PixelSvmModel model = train_pixel_svm(samples, 1e-3, 20, 5);
    CHECK(hinge_objective_of(samples, model, 1e-3) < before);
}

TEST_CASE("degenerate inputs are rejected") {
    std::vector<LabeledSpectrum> one_class(5, {std::vector<float>(3, 1.0f), true});
    CHECK_THROWS_AS(train_pixel_svm(one_class, 1e-3, 5, 0), Error);
    CHECK_THROWS_AS(train_pixel_svm({}, 1e-3, 5, 0), Error);
}

TEST_CASE("constant classifiers fill or clear the mask") {
    const HyperCube cube = hsi_test::random_cube(6, 8, 4, 2);
    PixelSvmModel model;
    model.weights.assign(4, 0.0f);
    model.trained_on = 1;

    model.bias = 1.0f;
    CHECK(segment(cube, model).count_true() == cube.pixel_count());
    model.bias = -1.0f;
    CHECK(segment(cube, model).count_true() == 0);

    PixelSvmModel wrong = model;
    wrong.weights.assign(3, 0.0f);
    CHECK_THROWS_AS(segment(cube, wrong), Error);
}

TEST_CASE("decision is invariant to positive scaling of (w, b)") {
    const HyperCube cube = hsi_test::random_cube(10, 10, 4, 13);
    PixelSvmModel model;
    model.weights = {0.5f, -1.0f, 0.25f, 0.75f};
    model.bias = -0.2f;
    model.trained_on = 1;
    PixelSvmModel scaled = model;
    for (float& w : scaled.weights) w *= 4.0f;
    scaled.bias *= 4.0f;
    CHECK(segment(cube, model).bits == segment(cube, scaled).bits);
}

TEST_CASE("trained model segments a fresh scene at IoU >= 0.98") {
    const SceneSpec train_spec = hsi_test::small_scene(5, 41);
    const Scene train_scene = generate_scene(train_spec);
    const auto samples =
        collect_pixel_samples(train_scene.truth.reflectance, train_scene.truth.mask, 5000, 8);
    const PixelSvmModel model = train_pixel_svm(samples, 1e-3, 20, 8);

    // Held-out pixels from a different scene of another class.
    const SceneSpec test_spec = hsi_test::small_scene(8, 42);
    const Scene test_scene = generate_scene(test_spec);
    const auto held_out =
        collect_pixel_samples(test_scene.truth.reflectance, test_scene.truth.mask, 5000, 9);
    CHECK(pixel_accuracy(held_out, model) >= 0.99);

    const Mask mask = segment(test_scene.truth.reflectance, model);
    CHECK(mask_iou(mask, test_scene.truth.mask) >= 0.98);
}

TEST_CASE("mask_clean removes small components only") {
    Mask mask(8, 8);
    CHECK(mask_clean(mask, 1).bits == mask.bits);  // empty stays empty

    // One 3-pixel blob and one 6-pixel blob.
    for (uint32_t c = 0; c < 3; ++c) mask.set(0, c, true);
    for (uint32_t r = 4; r < 6; ++r)
        for (uint32_t c = 4; c < 7; ++c) mask.set(r, c, true);

    CHECK(mask_clean(mask, 1).bits == mask.bits);
    const Mask cleaned = mask_clean(mask, 4);
    CHECK(cleaned.at(4, 4));
    CHECK_FALSE(cleaned.at(0, 0));
    CHECK(cleaned.count_true() == 6);
    CHECK(mask_clean(mask, 100).count_true() == 0);
}

TEST_CASE("mask_clean uses 4-connectivity") {
    Mask mask(4, 4);
    // Two pixels touching only diagonally are separate components.
    mask.set(0, 0, true);
    mask.set(1, 1, true);
    CHECK(mask_clean(mask, 2).count_true() == 0);
}

TEST_CASE("cleanup improves a salt-corrupted truth mask") {
    const SceneSpec spec = hsi_test::small_scene(6, 33);
    const Scene scene = generate_scene(spec);
    Mask noisy = scene.truth.mask;
    Rng rng(25);
    const Rect& leaf = spec.leaf_rect;
    for (int i = 0; i < 60; ++i) {
        const auto r = static_cast<uint32_t>(rng.uniform_int(0, spec.height - 1));
        const auto c = static_cast<uint32_t>(rng.uniform_int(0, spec.width - 1));
        // Keep specks off the leaf border so they cannot merge into it.
        const bool near_leaf = r + 1 >= leaf.row && r < leaf.row + leaf.height + 1 &&
                               c + 1 >= leaf.col && c < leaf.col + leaf.width + 1;
        if (!near_leaf) noisy.set(r, c, true);
    }
    const double raw_iou = mask_iou(noisy, scene.truth.mask);
    const double cleaned_iou = mask_iou(mask_clean(noisy, 25), scene.truth.mask);
    CHECK(cleaned_iou >= raw_iou);
    CHECK(cleaned_iou == doctest::Approx(1.0));
}

TEST_CASE("model JSON round trip") {
    const auto samples = point_masses(4, 10);
    const PixelSvmModel model = train_pixel_svm(samples, 1e-2, 10, 6);
    const PixelSvmModel back = pixel_svm_from_json(pixel_svm_to_json(model));
    CHECK(back.weights == model.weights);
    CHECK(back.bias == model.bias);
    CHECK(back.trained_on == model.trained_on);
    CHECK(back.lambda == model.lambda);
    CHECK(back.epochs == model.epochs);
    CHECK(back.seed == model.seed);
}

TEST_SUITE_END();
