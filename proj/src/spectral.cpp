#include "hsi/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace hsi {

namespace {

struct SamTerms {
    double dot, sx, sy;
};

template <typename T>
SamTerms sam_terms(std::span<const T> x, std::span<const T> y) {
    if (x.size() != y.size())
        fail(errc::dim_mismatch, "sam_angle: vectors of different length");
    if (x.empty()) fail(errc::empty_input, "sam_angle: empty vectors");
    SamTerms t{0.0, 0.0, 0.0};
    for (size_t i = 0; i < x.size(); ++i) {
        const double xi = static_cast<double>(x[i]);
        const double yi = static_cast<double>(y[i]);
        t.dot += xi * yi;
        t.sx += xi * xi;
        t.sy += yi * yi;
    }
    return t;
}

double angle_from_terms(const SamTerms& t) {
    if (t.sx == 0.0 || t.sy == 0.0)
        fail(errc::zero_norm, "sam_angle: zero-norm spectrum");
    // cos^2 = dot^2 / (sx*sy): when x == y, numerator and denominator are the
    // same floating-point product, so the ratio is exactly 1 and the angle
    // exactly 0 — acos(dot/sqrt(sx*sy)) would lose ~1e-8 to rounding there.
    const double ratio = std::clamp(t.dot * t.dot / (t.sx * t.sy), 0.0, 1.0);
    const double cosine = std::copysign(std::sqrt(ratio), t.dot);
    return std::acos(cosine);
}

// Neighbour offsets in scan order.
constexpr int kOffsets[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                {0, 1},   {1, -1}, {1, 0},  {1, 1}};

struct PixelStats {
    float value;
    bool valid;
};

// Shared per-pixel computation so the serial and OpenMP maps are bit-identical;
// noinline keeps both drivers on one compiled body (inlined copies could get
// different FP contraction).
__attribute__((noinline)) PixelStats map_statistic_at(const HyperCube& cube, const Mask& mask,
                            const std::vector<double>& norms_sq, uint32_t r, uint32_t c,
                            MapStatistic stat) {
    const size_t center_idx = static_cast<size_t>(r) * cube.width + c;
    if (norms_sq[center_idx] == 0.0) return {0.0f, false};
    const auto center = cube.spectrum(r, c);

    double sum = 0.0;
    int count = 0;
    for (const auto& off : kOffsets) {
        const int64_t nr = static_cast<int64_t>(r) + off[0];
        const int64_t nc = static_cast<int64_t>(c) + off[1];
        if (nr < 0 || nc < 0 || nr >= cube.height || nc >= cube.width) continue;
        if (!mask.at(static_cast<uint32_t>(nr), static_cast<uint32_t>(nc))) continue;
        const size_t nidx = static_cast<size_t>(nr) * cube.width + nc;
        if (norms_sq[nidx] == 0.0) continue;
        const auto nb = cube.spectrum(static_cast<uint32_t>(nr), static_cast<uint32_t>(nc));
        double dot = 0.0;
        for (uint32_t b = 0; b < cube.bands; ++b)
            dot += static_cast<double>(center[b]) * static_cast<double>(nb[b]);
        // Same squared-ratio form as sam_angle: identical spectra give exactly
        // cos = 1, angle = 0.
        const double ratio =
            std::clamp(dot * dot / (norms_sq[center_idx] * norms_sq[nidx]), 0.0, 1.0);
        const double cosine = std::copysign(std::sqrt(ratio), dot);
        if (stat == MapStatistic::mean_angle)
            sum += std::acos(cosine);
        else
            sum += std::clamp(cosine, 0.0, 1.0);
        ++count;
    }
    if (count == 0) return {0.0f, false};
    if (stat == MapStatistic::mean_angle) sum /= count;
    return {static_cast<float>(sum), true};
}

std::vector<double> pixel_norms_sq(const HyperCube& cube) {
    std::vector<double> norms(cube.pixel_count());
    const size_t n = cube.pixel_count();
#pragma omp parallel for schedule(static)
    for (size_t p = 0; p < n; ++p) {
        const float* spec = cube.data.data() + p * cube.bands;
        double s = 0.0;
        for (uint32_t b = 0; b < cube.bands; ++b)
            s += static_cast<double>(spec[b]) * static_cast<double>(spec[b]);
        norms[p] = s;
    }
    return norms;
}

ScalarMap make_map(const HyperCube& cube, const Mask& mask) {
    if (mask.height != cube.height || mask.width != cube.width)
        fail(errc::dim_mismatch, "laplacian_map: mask/cube dimension mismatch");
    ScalarMap map;
    map.height = cube.height;
    map.width = cube.width;
    map.values.assign(cube.pixel_count(), 0.0f);
    map.valid = Mask(cube.height, cube.width);
    return map;
}

}  // namespace

double sam_angle(std::span<const double> x, std::span<const double> y) {
    return angle_from_terms(sam_terms(x, y));
}

double sam_angle(std::span<const float> x, std::span<const float> y) {
    return angle_from_terms(sam_terms(x, y));
}

LocalGraph local_laplacian(const HyperCube& cube, const Mask& mask, uint32_t r, uint32_t c) {
    if (mask.height != cube.height || mask.width != cube.width)
        fail(errc::dim_mismatch, "local_laplacian: mask/cube dimension mismatch");
    if (r >= cube.height || c >= cube.width)
        fail(errc::index_out_of_range, "local_laplacian: centre out of range");
    if (!mask.at(r, c)) fail(errc::not_foreground, "local_laplacian: centre not foreground");

    LocalGraph g;
    g.pixel_ids.emplace_back(r, c);
    for (const auto& off : kOffsets) {
        const int64_t nr = static_cast<int64_t>(r) + off[0];
        const int64_t nc = static_cast<int64_t>(c) + off[1];
        if (nr < 0 || nc < 0 || nr >= cube.height || nc >= cube.width) continue;
        if (!mask.at(static_cast<uint32_t>(nr), static_cast<uint32_t>(nc))) continue;
        g.pixel_ids.emplace_back(static_cast<uint32_t>(nr), static_cast<uint32_t>(nc));
    }
    const size_t m = g.pixel_ids.size();
    g.m = m;
    g.W.assign(m * m, 0.0);
    g.D.assign(m * m, 0.0);
    g.L.assign(m * m, 0.0);

    for (size_t i = 0; i < m; ++i) {
        for (size_t j = i + 1; j < m; ++j) {
            const auto [ri, ci] = g.pixel_ids[i];
            const auto [rj, cj] = g.pixel_ids[j];
            const double theta = sam_angle(cube.spectrum(ri, ci), cube.spectrum(rj, cj));
            const double affinity = std::clamp(std::cos(theta), 0.0, 1.0);
            g.W[i * m + j] = affinity;
            g.W[j * m + i] = affinity;
        }
    }
    for (size_t i = 0; i < m; ++i) {
        double degree = 0.0;
        for (size_t j = 0; j < m; ++j) degree += g.W[i * m + j];
        g.D[i * m + i] = degree;
        for (size_t j = 0; j < m; ++j)
            g.L[i * m + j] = (i == j ? degree : 0.0) - g.W[i * m + j];
    }
    return g;
}

ScalarMap laplacian_map(const HyperCube& cube, const Mask& mask, MapStatistic stat) {
    ScalarMap map = make_map(cube, mask);
    const auto norms = pixel_norms_sq(cube);
    const int64_t n = static_cast<int64_t>(cube.pixel_count());
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < n; ++p) {
        const uint32_t r = static_cast<uint32_t>(p / cube.width);
        const uint32_t c = static_cast<uint32_t>(p % cube.width);
        if (!mask.at(r, c)) continue;
        const PixelStats ps = map_statistic_at(cube, mask, norms, r, c, stat);
        map.values[static_cast<size_t>(p)] = ps.value;
        map.valid.bits[static_cast<size_t>(p)] = ps.valid ? 1 : 0;
    }
    return map;
}

ScalarMap laplacian_map_serial(const HyperCube& cube, const Mask& mask, MapStatistic stat) {
    ScalarMap map = make_map(cube, mask);
    std::vector<double> norms(cube.pixel_count());
    for (size_t p = 0; p < cube.pixel_count(); ++p) {
        const float* spec = cube.data.data() + p * cube.bands;
        double s = 0.0;
        for (uint32_t b = 0; b < cube.bands; ++b)
            s += static_cast<double>(spec[b]) * static_cast<double>(spec[b]);
        norms[p] = s;
    }
    for (uint32_t r = 0; r < cube.height; ++r) {
        for (uint32_t c = 0; c < cube.width; ++c) {
            if (!mask.at(r, c)) continue;
            const size_t p = static_cast<size_t>(r) * cube.width + c;
            const PixelStats ps = map_statistic_at(cube, mask, norms, r, c, stat);
            map.values[p] = ps.value;
            map.valid.bits[p] = ps.valid ? 1 : 0;
        }
    }
    return map;
}

SpectralCurve mean_spectral_curve(const HyperCube& cube, const Mask& mask) {
    if (mask.height != cube.height || mask.width != cube.width)
        fail(errc::dim_mismatch, "mean_spectral_curve: mask/cube dimension mismatch");
    std::vector<double> sums(cube.bands, 0.0);
    uint64_t count = 0;
    for (uint32_t r = 0; r < cube.height; ++r) {
        for (uint32_t c = 0; c < cube.width; ++c) {
            if (!mask.at(r, c)) continue;
            const auto spec = cube.spectrum(r, c);
            for (uint32_t b = 0; b < cube.bands; ++b) sums[b] += spec[b];
            ++count;
        }
    }
    if (count == 0) fail(errc::empty_input, "mean_spectral_curve: empty mask");
    SpectralCurve curve;
    curve.wavelengths_nm = cube.wavelengths_nm;
    curve.values.resize(cube.bands);
    for (uint32_t b = 0; b < cube.bands; ++b)
        curve.values[b] = static_cast<float>(sums[b] / static_cast<double>(count));
    return curve;
}

void save_scalar_map_pgm16(const ScalarMap& map, const std::filesystem::path& pgm_path,
                           const std::filesystem::path& sidecar_path) {
    float lo = 0.0f, hi = 0.0f;
    bool any = false;
    for (size_t i = 0; i < map.values.size(); ++i) {
        if (!map.valid.bits[i]) continue;
        if (!any) {
            lo = hi = map.values[i];
            any = true;
        } else {
            lo = std::min(lo, map.values[i]);
            hi = std::max(hi, map.values[i]);
        }
    }
    const double span = (any && hi > lo) ? static_cast<double>(hi) - lo : 1.0;

    std::ofstream out(pgm_path, std::ios::binary);
    if (!out) fail(errc::io_failure, "cannot open " + pgm_path.string() + " for writing");
    out << "P5\n" << map.width << " " << map.height << "\n65535\n";
    for (size_t i = 0; i < map.values.size(); ++i) {
        uint16_t v = 0;
        if (map.valid.bits[i]) {
            const double norm = (static_cast<double>(map.values[i]) - lo) / span;
            v = static_cast<uint16_t>(std::lround(std::clamp(norm, 0.0, 1.0) * 65535.0));
        }
        const uint8_t hi_byte = static_cast<uint8_t>(v >> 8);
        const uint8_t lo_byte = static_cast<uint8_t>(v & 0xff);
        out.put(static_cast<char>(hi_byte));
        out.put(static_cast<char>(lo_byte));
    }
    if (!out) fail(errc::io_failure, "write failed: " + pgm_path.string());

    nlohmann::json sidecar{{"min", lo}, {"max", hi}, {"invalid_sample", 0}};
    std::ofstream side(sidecar_path);
    if (!side) fail(errc::io_failure, "cannot open " + sidecar_path.string() + " for writing");
    side << sidecar.dump(2) << "\n";
}

void save_scalar_map_csv(const ScalarMap& map, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
    out << "row,col,value\n";
    char line[64];
    for (uint32_t r = 0; r < map.height; ++r) {
        for (uint32_t c = 0; c < map.width; ++c) {
            const size_t i = static_cast<size_t>(r) * map.width + c;
            if (!map.valid.bits[i]) continue;
            std::snprintf(line, sizeof(line), "%u,%u,%.9g\n", r, c,
                          static_cast<double>(map.values[i]));
            out << line;
        }
    }
    if (!out) fail(errc::io_failure, "write failed: " + path.string());
}

}  // namespace hsi
