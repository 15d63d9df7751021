#pragma once

// Radiometric calibration: dark-frame subtraction, spectralon detection via
// k-means over per-pixel spectra, white-reference extraction with saturation
// rejection, and band-by-band normalization to reflectance.

#include <cstdint>
#include <string>
#include <vector>

#include "hsi/hypercube.hpp"

namespace hsi {

struct CalibrationParams {
    uint32_t kmeans_k = 4;
    uint32_t kmeans_iters = 50;
    float saturation_reject_fraction = 0.01f;
    uint32_t reference_pixel_count = 1000;
    float epsilon = 1e-8f;
    // Nominal reflectance of the white reference panel. The measured white
    // curve is divided by this before normalization so the output is true
    // reflectance, not reflectance relative to the panel.
    float spectralon_reflectance = 0.99f;
    uint64_t seed = 0;

    void validate() const;
};

struct CalibrationReport {
    SpectralCurve white_curve;
    Mask spectralon_mask;
    uint64_t spectralon_pixel_count = 0;
    uint64_t reference_pixel_count_used = 0;
    std::vector<std::string> warnings;
};

struct KMeansResult {
    std::vector<uint32_t> labels;     // per pixel, row-major
    std::vector<double> centroids;    // k x bands, row-major
    uint32_t k = 0;
    uint32_t bands = 0;
    uint32_t iterations = 0;          // Lloyd iterations actually run

    double centroid(uint32_t cluster, uint32_t band) const {
        return centroids[static_cast<size_t>(cluster) * bands + band];
    }
};

// out(r,c,b) = max(0, raw(r,c,b) - dark(r,c,b)); kind stays raw_dn. If
// clamped_count is non-null it receives the number of clamped elements.
HyperCube dark_correct(const HyperCube& raw, const HyperCube& dark,
                       uint64_t* clamped_count = nullptr);
HyperCube dark_correct_serial(const HyperCube& raw, const HyperCube& dark,
                              uint64_t* clamped_count = nullptr);

// Lloyd's algorithm on full per-pixel spectra. Farthest-point seeded
// initialization (first centre drawn from the seed, the rest chosen as the
// pixel farthest from the centres so far), deterministic ties toward the
// lowest pixel index, empty clusters re-seeded from the farthest pixel.
KMeansResult kmeans_spectra(const HyperCube& cube, uint32_t k, uint32_t iters, uint64_t seed);
KMeansResult kmeans_spectra_serial(const HyperCube& cube, uint32_t k, uint32_t iters,
                                   uint64_t seed);

// Pixels of the cluster whose centroid has the maximum mean value across
// bands. Appends to *warnings when the winner is not clearly brightest.
Mask find_spectralon(const HyperCube& cube, const CalibrationParams& params,
                     std::vector<std::string>* warnings = nullptr);

// Rank masked pixels by mean intensity descending (ties by (row, col)
// ascending), drop the top ceil(fraction * count), average the next
// min(reference_pixel_count, remaining) pixels band-by-band.
std::pair<SpectralCurve, CalibrationReport> white_reference(const HyperCube& cube,
                                                            const Mask& spectralon,
                                                            const CalibrationParams& params);

// out(r,c,b) = cube(r,c,b) / max(white(b), epsilon); kind becomes reflectance.
HyperCube white_correct(const HyperCube& cube, const SpectralCurve& white,
                        float epsilon = 1e-8f, std::vector<std::string>* warnings = nullptr);
HyperCube white_correct_serial(const HyperCube& cube, const SpectralCurve& white,
                               float epsilon = 1e-8f, std::vector<std::string>* warnings = nullptr);

// dark_correct -> find_spectralon -> white_reference -> white_correct. The
// report keeps the measured white curve; normalization uses the curve scaled
// by 1/spectralon_reflectance so panel pixels come out at 0.99, leaf pixels
// at their true reflectance.
std::pair<HyperCube, CalibrationReport> calibrate(const HyperCube& raw, const HyperCube& dark,
                                                  const CalibrationParams& params);

// Report serialization for the CLI --report flag.
std::string calibration_report_to_json(const CalibrationReport& report);

}  // namespace hsi
