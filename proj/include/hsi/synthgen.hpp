#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "hsi/hypercube.hpp"

// Deterministic synthetic scene generator: a leaf rectangle with a
// class-dependent mosaic texture and a spectralon panel under a configurable
// illumination, emitted as raw + dark frames alongside the ground truth.

namespace hsi {

inline constexpr std::array<int, 7> kRatingClasses{1, 2, 5, 6, 7, 8, 9};

// Index into kRatingClasses, or an error for values outside the vocabulary.
int class_index(int rating);
bool is_rating_class(int rating);

struct Rect {
    uint32_t row = 0, col = 0, height = 0, width = 0;

    bool inside(uint32_t image_h, uint32_t image_w) const {
        return height > 0 && width > 0 && row + height <= image_h && col + width <= image_w;
    }
    bool contains(uint32_t r, uint32_t c) const {
        return r >= row && r < row + height && c >= col && c < col + width;
    }
    bool disjoint(const Rect& other) const {
        return row + height <= other.row || other.row + other.height <= row ||
               col + width <= other.col || other.col + other.width <= col;
    }
};

struct SceneSpec {
    uint32_t height = 216;
    uint32_t width = 409;
    uint32_t bands = 11;
    int rating_class = 1;
    Rect leaf_rect{80, 150, 100, 220};
    Rect spectralon_rect{16, 16, 60, 60};
    SpectralCurve illumination;  // per-band multiplicative gain; empty = flat 1.0
    float dark_level = 0.05f;
    float noise_sigma = 0.0f;
    float mosaic_amplitude = 0.85f;
    float mosaic_scale_px = 7.0f;
    uint64_t seed = 0;

    void validate() const;
};

struct SceneTruth {
    HyperCube reflectance;
    Mask mask;  // leaf foreground
    int label = 0;
    SpectralCurve white_curve;  // true illumination
};

struct Scene {
    HyperCube raw;
    HyperCube dark;
    SceneTruth truth;
};

// Class-dependent texture maps; both injective over the rating vocabulary.
// f scales the spatial correlation length, g scales the modulation amplitude.
double mosaic_scale_factor(int rating);
double mosaic_amplitude_factor(int rating);

// Leaf endmember spectra evaluated on the given wavelength axis.
std::vector<float> healthy_leaf_curve(const std::vector<float>& wavelengths_nm);
std::vector<float> diseased_leaf_curve(const std::vector<float>& wavelengths_nm);

// "indoor": flat unit illumination, low noise. "outdoor": tilted sunlight-like
// gain with higher noise. Sets illumination and noise_sigma on the spec.
void apply_environment_preset(SceneSpec& spec, std::string_view name);

Scene generate_scene(const SceneSpec& spec);

// 7 * per_class scenes in class-major order; each scene gets a seed-derived
// leaf position jitter and illumination tilt on top of the base spec.
std::vector<Scene> generate_dataset(const SceneSpec& base, int per_class, uint64_t seed);

// JSON document with field names exactly matching SceneSpec.
SceneSpec scene_spec_from_json_file(const std::filesystem::path& path);
std::string scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const std::string& text);

// Sidecar with the label and true white curve.
void save_scene_sidecar(const SceneTruth& truth, const std::filesystem::path& path);

}  // namespace hsi
