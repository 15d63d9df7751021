#pragma once

// Pixel-level foreground/background segmentation of calibrated cubes with a
// linear SVM on per-pixel spectra, plus small-component cleanup.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hsi/hypercube.hpp"

namespace hsi {

struct LabeledSpectrum {
    std::vector<float> values;
    bool foreground = false;
};

struct PixelSvmModel {
    std::vector<float> weights;  // length = bands
    float bias = 0.0f;
    uint64_t trained_on = 0;
    double lambda = 1e-3;
    uint32_t epochs = 20;
    uint64_t seed = 0;

    void validate() const;
};

// Hinge-loss SGD on spectra, foreground -> +1, background -> -1. Sequential
// by contract; deterministic given seed.
PixelSvmModel train_pixel_svm(const std::vector<LabeledSpectrum>& samples, double lambda,
                              uint32_t epochs, uint64_t seed);

// mask(r,c) = (w . spectrum(r,c) + b > 0)
Mask segment(const HyperCube& cube, const PixelSvmModel& model);
Mask segment_serial(const HyperCube& cube, const PixelSvmModel& model);

// Remove 4-connected foreground components smaller than min_component_px.
Mask mask_clean(const Mask& mask, uint64_t min_component_px);

// Subsample per_class labeled pixels from each side of a ground-truth mask
// (fewer if a side is smaller), deterministic given seed.
std::vector<LabeledSpectrum> collect_pixel_samples(const HyperCube& cube, const Mask& truth,
                                                   uint64_t per_class, uint64_t seed);

double pixel_accuracy(const std::vector<LabeledSpectrum>& samples, const PixelSvmModel& model);

std::string pixel_svm_to_json(const PixelSvmModel& model);
PixelSvmModel pixel_svm_from_json(const std::string& text);
void save_pixel_svm(const PixelSvmModel& model, const std::filesystem::path& path);
PixelSvmModel load_pixel_svm(const std::filesystem::path& path);

}  // namespace hsi
