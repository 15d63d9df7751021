#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hsi/error.hpp"

// Core data model: hyperspectral cube, binary mask, spectral curve.
//
// Cube memory layout is band-interleaved-by-pixel (BIP):
//
//     index(r, c, b) = ((r * width) + c) * bands + b
//
// so the full spectrum of one pixel is contiguous. The per-pixel kernels in
// this project (calibration, SAM, segmentation) walk whole spectra, which
// makes BIP the cache-friendly choice.
//
// HSC file format (little-endian):
//     magic   "HSC1"                     4 bytes
//     height  u32
//     width   u32
//     bands   u32
//     kind    u8    (0 = raw_dn, 1 = reflectance)
//     wavelengths   bands x f32          nanometres, strictly increasing
//     payload       height*width*bands x f32, BIP order
//
// Masks are stored as 8-bit binary PGM (P5), 255 = foreground.
// Curves are stored as 2-column CSV (wavelength_nm,value) with a header row.

namespace hsi {

enum class CubeKind : uint8_t { raw_dn = 0, reflectance = 1 };

struct SpectralCurve {
    std::vector<float> wavelengths_nm;
    std::vector<float> values;

    size_t size() const { return values.size(); }
    void validate() const;
};

struct Mask {
    uint32_t height = 0;
    uint32_t width = 0;
    std::vector<uint8_t> bits;  // row-major, 0 or 1

    Mask() = default;
    Mask(uint32_t h, uint32_t w, bool fill = false)
        : height(h), width(w), bits(static_cast<size_t>(h) * w, fill ? 1 : 0) {}

    bool at(uint32_t r, uint32_t c) const {
        return bits[static_cast<size_t>(r) * width + c] != 0;
    }
    void set(uint32_t r, uint32_t c, bool v) {
        bits[static_cast<size_t>(r) * width + c] = v ? 1 : 0;
    }
    uint64_t count_true() const;
};

struct HyperCube {
    uint32_t height = 0;
    uint32_t width = 0;
    uint32_t bands = 0;
    CubeKind kind = CubeKind::raw_dn;
    std::vector<float> wavelengths_nm;
    std::vector<float> data;  // BIP, height*width*bands

    // Validates dimensions and wavelengths, allocates zeroed payload.
    static HyperCube create(uint32_t height, uint32_t width, uint32_t bands,
                            CubeKind kind, std::vector<float> wavelengths_nm);

    size_t pixel_count() const { return static_cast<size_t>(height) * width; }
    size_t index(uint32_t r, uint32_t c, uint32_t b) const {
        return (static_cast<size_t>(r) * width + c) * bands + b;
    }
    float at(uint32_t r, uint32_t c, uint32_t b) const { return data[index(r, c, b)]; }
    float& at(uint32_t r, uint32_t c, uint32_t b) { return data[index(r, c, b)]; }

    std::span<const float> spectrum(uint32_t r, uint32_t c) const {
        return {data.data() + (static_cast<size_t>(r) * width + c) * bands, bands};
    }
    std::span<float> spectrum(uint32_t r, uint32_t c) {
        return {data.data() + (static_cast<size_t>(r) * width + c) * bands, bands};
    }

    // Checks payload finiteness and, for reflectance cubes, non-negativity.
    void validate_values() const;

    bool same_geometry(const HyperCube& other) const {
        return height == other.height && width == other.width && bands == other.bands;
    }
};

// Wavelengths evenly spaced over [690, 840] nm.
std::vector<float> default_wavelengths(uint32_t bands);

SpectralCurve pixel_spectrum(const HyperCube& cube, uint32_t r, uint32_t c);

void save_cube(const HyperCube& cube, const std::filesystem::path& path);
HyperCube load_cube(const std::filesystem::path& path);

void save_mask_pgm(const Mask& mask, const std::filesystem::path& path);
Mask load_mask_pgm(const std::filesystem::path& path);

void save_curve_csv(const SpectralCurve& curve, const std::filesystem::path& path);
SpectralCurve load_curve_csv(const std::filesystem::path& path);

double mask_iou(const Mask& a, const Mask& b);

}  // namespace hsi
