#pragma once

// Shared fixtures for the unit suites: scratch directories and small cubes.

#include <filesystem>
#include <string>
#include <vector>

#include "hsi/hypercube.hpp"
#include "hsi/rng.hpp"
#include "hsi/synthgen.hpp"

namespace hsi_test {

// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / ("hsi_test_" + name)) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }

    std::filesystem::path operator/(const std::string& leaf) const { return path / leaf; }
};

inline hsi::HyperCube random_cube(uint32_t h, uint32_t w, uint32_t bands, uint64_t seed,
                                  hsi::CubeKind kind = hsi::CubeKind::reflectance) {
    hsi::HyperCube cube = hsi::HyperCube::create(h, w, bands, kind,
                                                 hsi::default_wavelengths(bands));
    hsi::Rng rng(seed);
    for (float& v : cube.data) v = static_cast<float>(rng.uniform(0.01, 1.0));
    return cube;
}

inline hsi::HyperCube constant_cube(uint32_t h, uint32_t w, uint32_t bands, float value,
                                    hsi::CubeKind kind = hsi::CubeKind::reflectance) {
    hsi::HyperCube cube = hsi::HyperCube::create(h, w, bands, kind,
                                                 hsi::default_wavelengths(bands));
    for (float& v : cube.data) v = value;
    return cube;
}

// Small scene used by suites that need a full generated dataset quickly.
inline hsi::SceneSpec small_scene(int rating, uint64_t seed) {
    hsi::SceneSpec spec;
    spec.height = 96;
    spec.width = 160;
    spec.bands = 11;
    spec.rating_class = rating;
    spec.leaf_rect = {30, 60, 50, 80};
    spec.spectralon_rect = {6, 6, 20, 40};
    spec.seed = seed;
    return spec;
}

}  // namespace hsi_test
