#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "hsi/hypercube.hpp"

// Analytical spectral tools: spectral angle, per-pixel 3x3 graph Laplacians,
// neighbourhood statistic maps, mean spectral curves.

namespace hsi {

// theta = arccos( dot(x,y) / sqrt(|x|^2 |y|^2) ), cosine clamped to [-1, 1].
// All accumulation in double. The cosine is evaluated through its square,
// dot^2 / (sx*sy), so that sam_angle(x, x) is exactly zero (numerator and
// denominator are then the same floating-point product) and the result is
// exactly symmetric in x and y.
double sam_angle(std::span<const double> x, std::span<const double> y);
double sam_angle(std::span<const float> x, std::span<const float> y);

// Graph over one pixel and its in-mask 8-neighbours. Matrices are m x m
// row-major, m <= 9; node 0 is the centre pixel, neighbours follow in scan
// order. W(i,j) = cos(theta_ij) clamped to [0,1], zero diagonal; D is the
// diagonal degree matrix; L = D - W.
struct LocalGraph {
    std::vector<std::pair<uint32_t, uint32_t>> pixel_ids;
    size_t m = 0;
    std::vector<double> W;
    std::vector<double> D;
    std::vector<double> L;

    double w(size_t i, size_t j) const { return W[i * m + j]; }
    double l(size_t i, size_t j) const { return L[i * m + j]; }
};

LocalGraph local_laplacian(const HyperCube& cube, const Mask& mask, uint32_t r, uint32_t c);

enum class MapStatistic { mean_angle, degree };

struct ScalarMap {
    uint32_t height = 0;
    uint32_t width = 0;
    std::vector<float> values;  // row-major; meaningful only where valid
    Mask valid;

    float at(uint32_t r, uint32_t c) const {
        return values[static_cast<size_t>(r) * width + c];
    }
};

// Per-foreground-pixel neighbourhood statistic over the in-mask 8-neighbours:
//   mean_angle: mean SAM angle centre vs neighbour
//   degree:     sum of centre-row affinities cos(theta)
// Pixels without any valid neighbour are marked invalid.
ScalarMap laplacian_map(const HyperCube& cube, const Mask& mask, MapStatistic stat);
ScalarMap laplacian_map_serial(const HyperCube& cube, const Mask& mask, MapStatistic stat);

SpectralCurve mean_spectral_curve(const HyperCube& cube, const Mask& mask);

// 16-bit PGM (min-max normalized, big-endian samples per the PGM spec) plus a
// JSON sidecar holding the normalization constants.
void save_scalar_map_pgm16(const ScalarMap& map, const std::filesystem::path& pgm_path,
                           const std::filesystem::path& sidecar_path);
// CSV rows "row,col,value" for valid pixels.
void save_scalar_map_csv(const ScalarMap& map, const std::filesystem::path& path);

}  // namespace hsi
