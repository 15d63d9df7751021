#include "hsi/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "hsi/rng.hpp"

namespace hsi {

namespace {

inline float dark_corrected_value(float raw, float dark) {
    const float v = raw - dark;
    return v > 0.0f ? v : 0.0f;
}

// noinline: the serial and OpenMP assignment loops must agree bit-for-bit, so
// both have to go through the same compiled body.
__attribute__((noinline)) uint32_t nearest_centroid(const float* spectrum,
                                                    const std::vector<double>& centroids,
                                                    uint32_t k, uint32_t bands) {
    uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (uint32_t j = 0; j < k; ++j) {
        const double* c = centroids.data() + static_cast<size_t>(j) * bands;
        double d = 0.0;
        for (uint32_t b = 0; b < bands; ++b) {
            const double diff = static_cast<double>(spectrum[b]) - c[b];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

inline double centroid_distance_sq(const float* spectrum, const double* c, uint32_t bands) {
    double d = 0.0;
    for (uint32_t b = 0; b < bands; ++b) {
        const double diff = static_cast<double>(spectrum[b]) - c[b];
        d += diff * diff;
    }
    return d;
}

KMeansResult kmeans_impl(const HyperCube& cube, uint32_t k, uint32_t iters, uint64_t seed,
                         bool parallel) {
    if (k < 2) fail(errc::bad_argument, "kmeans k must be >= 2");
    const uint64_t n = static_cast<uint64_t>(cube.height) * cube.width;
    if (n == 0) fail(errc::empty_input, "kmeans on empty cube");
    if (k > n) fail(errc::k_exceeds_pixels, "kmeans k exceeds pixel count");
    const uint32_t bands = cube.bands;

    KMeansResult res;
    res.k = k;
    res.bands = bands;
    res.centroids.assign(static_cast<size_t>(k) * bands, 0.0);
    res.labels.assign(n, 0);

    const auto spectrum = [&](uint64_t pixel) {
        return cube.data.data() + pixel * bands;
    };
    const auto set_centroid = [&](uint32_t j, uint64_t pixel) {
        double* c = res.centroids.data() + static_cast<size_t>(j) * bands;
        const float* s = spectrum(pixel);
        for (uint32_t b = 0; b < bands; ++b) c[b] = static_cast<double>(s[b]);
    };

    // Farthest-point init: seed-drawn first centre, then repeatedly the pixel
    // with maximum distance to its nearest chosen centre (ties: lowest index).
    Rng rng(seed);
    const uint64_t first = static_cast<uint64_t>(rng.uniform_int(0, static_cast<int64_t>(n) - 1));
    set_centroid(0, first);
    std::vector<double> min_dist(n);
    for (uint64_t i = 0; i < n; ++i)
        min_dist[i] = centroid_distance_sq(spectrum(i), res.centroids.data(), bands);
    for (uint32_t j = 1; j < k; ++j) {
        uint64_t far_pixel = 0;
        double far_d = -1.0;
        for (uint64_t i = 0; i < n; ++i)
            if (min_dist[i] > far_d) {
                far_d = min_dist[i];
                far_pixel = i;
            }
        set_centroid(j, far_pixel);
        const double* c = res.centroids.data() + static_cast<size_t>(j) * bands;
        for (uint64_t i = 0; i < n; ++i)
            min_dist[i] = std::min(min_dist[i], centroid_distance_sq(spectrum(i), c, bands));
    }

    std::vector<double> sums(static_cast<size_t>(k) * bands);
    std::vector<uint64_t> counts(k);
    for (uint32_t iter = 0; iter < iters; ++iter) {
        res.iterations = iter + 1;

        uint64_t changed = 0;
        if (parallel) {
#pragma omp parallel for schedule(static) reduction(+ : changed)
            for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
                const uint32_t lbl = nearest_centroid(spectrum(i), res.centroids, k, bands);
                if (lbl != res.labels[i]) ++changed;
                res.labels[i] = lbl;
            }
        } else {
            for (uint64_t i = 0; i < n; ++i) {
                const uint32_t lbl = nearest_centroid(spectrum(i), res.centroids, k, bands);
                if (lbl != res.labels[i]) ++changed;
                res.labels[i] = lbl;
            }
        }
        if (iter > 0 && changed == 0) break;

        // Centroid update accumulates serially in pixel order so results do
        // not depend on the thread count.
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (uint64_t i = 0; i < n; ++i) {
            double* s = sums.data() + static_cast<size_t>(res.labels[i]) * bands;
            const float* x = spectrum(i);
            for (uint32_t b = 0; b < bands; ++b) s[b] += static_cast<double>(x[b]);
            ++counts[res.labels[i]];
        }
        bool reseeded = false;
        for (uint32_t j = 0; j < k; ++j) {
            if (counts[j] == 0) {
                // Re-seed from the pixel farthest from its assigned centroid.
                uint64_t far_pixel = 0;
                double far_d = -1.0;
                for (uint64_t i = 0; i < n; ++i) {
                    const double* c =
                        res.centroids.data() + static_cast<size_t>(res.labels[i]) * bands;
                    const double d = centroid_distance_sq(spectrum(i), c, bands);
                    if (d > far_d) {
                        far_d = d;
                        far_pixel = i;
                    }
                }
                set_centroid(j, far_pixel);
                res.labels[far_pixel] = j;
                reseeded = true;
                continue;
            }
            double* c = res.centroids.data() + static_cast<size_t>(j) * bands;
            const double* s = sums.data() + static_cast<size_t>(j) * bands;
            for (uint32_t b = 0; b < bands; ++b) c[b] = s[b] / counts[j];
        }
        (void)reseeded;
    }
    return res;
}

}  // namespace

void CalibrationParams::validate() const {
    if (kmeans_k < 2) fail(errc::bad_argument, "kmeans_k must be >= 2");
    if (saturation_reject_fraction < 0.0f || saturation_reject_fraction >= 0.5f)
        fail(errc::bad_argument, "saturation_reject_fraction must be in [0, 0.5)");
    if (reference_pixel_count < 1) fail(errc::bad_argument, "reference_pixel_count must be >= 1");
    if (!(spectralon_reflectance > 0.0f))
        fail(errc::bad_argument, "spectralon_reflectance must be > 0");
}

HyperCube dark_correct(const HyperCube& raw, const HyperCube& dark, uint64_t* clamped_count) {
    if (!raw.same_geometry(dark)) fail(errc::dim_mismatch, "raw and dark dimensions differ");
    HyperCube out =
        HyperCube::create(raw.height, raw.width, raw.bands, CubeKind::raw_dn, raw.wavelengths_nm);
    const int64_t total = static_cast<int64_t>(raw.data.size());
    uint64_t clamped = 0;
#pragma omp parallel for schedule(static) reduction(+ : clamped)
    for (int64_t i = 0; i < total; ++i) {
        out.data[i] = dark_corrected_value(raw.data[i], dark.data[i]);
        if (raw.data[i] < dark.data[i]) ++clamped;
    }
    if (clamped_count) *clamped_count = clamped;
    return out;
}

HyperCube dark_correct_serial(const HyperCube& raw, const HyperCube& dark,
                              uint64_t* clamped_count) {
    if (!raw.same_geometry(dark)) fail(errc::dim_mismatch, "raw and dark dimensions differ");
    HyperCube out =
        HyperCube::create(raw.height, raw.width, raw.bands, CubeKind::raw_dn, raw.wavelengths_nm);
    uint64_t clamped = 0;
    for (size_t i = 0; i < raw.data.size(); ++i) {
        out.data[i] = dark_corrected_value(raw.data[i], dark.data[i]);
        if (raw.data[i] < dark.data[i]) ++clamped;
    }
    if (clamped_count) *clamped_count = clamped;
    return out;
}

KMeansResult kmeans_spectra(const HyperCube& cube, uint32_t k, uint32_t iters, uint64_t seed) {
    return kmeans_impl(cube, k, iters, seed, true);
}

KMeansResult kmeans_spectra_serial(const HyperCube& cube, uint32_t k, uint32_t iters,
                                   uint64_t seed) {
    return kmeans_impl(cube, k, iters, seed, false);
}

Mask find_spectralon(const HyperCube& cube, const CalibrationParams& params,
                     std::vector<std::string>* warnings) {
    params.validate();
    const KMeansResult km = kmeans_spectra(cube, params.kmeans_k, params.kmeans_iters, params.seed);

    uint32_t brightest = 0;
    double best_mean = -std::numeric_limits<double>::infinity();
    double runner_up = -std::numeric_limits<double>::infinity();
    for (uint32_t j = 0; j < km.k; ++j) {
        double mean = 0.0;
        for (uint32_t b = 0; b < km.bands; ++b) mean += km.centroid(j, b);
        mean /= km.bands;
        if (mean > best_mean) {
            runner_up = best_mean;
            best_mean = mean;
            brightest = j;
        } else if (mean > runner_up) {
            runner_up = mean;
        }
    }
    if (warnings && best_mean - runner_up < 1e-6)
        warnings->push_back("no clearly brightest cluster; spectralon detection is unreliable");

    Mask mask(cube.height, cube.width);
    const uint64_t n = static_cast<uint64_t>(cube.height) * cube.width;
    for (uint64_t i = 0; i < n; ++i)
        if (km.labels[i] == brightest) mask.bits[i] = 1;
    return mask;
}

std::pair<SpectralCurve, CalibrationReport> white_reference(const HyperCube& cube,
                                                            const Mask& spectralon,
                                                            const CalibrationParams& params) {
    params.validate();
    if (spectralon.height != cube.height || spectralon.width != cube.width)
        fail(errc::dim_mismatch, "mask dimensions differ from cube");

    std::vector<uint64_t> pixels;
    const uint64_t n = static_cast<uint64_t>(cube.height) * cube.width;
    for (uint64_t i = 0; i < n; ++i)
        if (spectralon.bits[i]) pixels.push_back(i);
    if (pixels.empty()) fail(errc::empty_input, "spectralon mask has no pixels");

    std::vector<double> mean_intensity(pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i) {
        const float* s = cube.data.data() + pixels[i] * cube.bands;
        double acc = 0.0;
        for (uint32_t b = 0; b < cube.bands; ++b) acc += static_cast<double>(s[b]);
        mean_intensity[i] = acc / cube.bands;
    }
    std::vector<size_t> order(pixels.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (mean_intensity[a] != mean_intensity[b]) return mean_intensity[a] > mean_intensity[b];
        return pixels[a] < pixels[b];  // row-major id == (row, col) ascending
    });

    const uint64_t count = pixels.size();
    const uint64_t dropped = static_cast<uint64_t>(
        std::ceil(static_cast<double>(params.saturation_reject_fraction) * count));
    const uint64_t remaining = count - dropped;
    const uint64_t used = std::min<uint64_t>(params.reference_pixel_count, remaining);

    CalibrationReport report;
    report.spectralon_mask = spectralon;
    report.spectralon_pixel_count = count;
    report.reference_pixel_count_used = used;
    if (used == 0) fail(errc::empty_input, "saturation rejection removed every spectralon pixel");
    if (used < params.reference_pixel_count)
        report.warnings.push_back("fewer than reference_pixel_count pixels available (" +
                                  std::to_string(used) + " used)");

    SpectralCurve curve;
    curve.wavelengths_nm = cube.wavelengths_nm;
    curve.values.assign(cube.bands, 0.0f);
    std::vector<double> acc(cube.bands, 0.0);
    for (uint64_t i = dropped; i < dropped + used; ++i) {
        const float* s = cube.data.data() + pixels[order[i]] * cube.bands;
        for (uint32_t b = 0; b < cube.bands; ++b) acc[b] += static_cast<double>(s[b]);
    }
    for (uint32_t b = 0; b < cube.bands; ++b)
        curve.values[b] = static_cast<float>(acc[b] / used);
    report.white_curve = curve;
    return {std::move(curve), std::move(report)};
}

namespace {

HyperCube white_correct_impl(const HyperCube& cube, const SpectralCurve& white, float epsilon,
                             std::vector<std::string>* warnings, bool parallel) {
    if (white.size() != cube.bands) fail(errc::dim_mismatch, "white curve length != bands");
    uint32_t guarded = 0;
    std::vector<float> denom(cube.bands);
    for (uint32_t b = 0; b < cube.bands; ++b) {
        denom[b] = std::max(white.values[b], epsilon);
        if (white.values[b] < epsilon) ++guarded;
    }
    if (warnings && guarded > 0)
        warnings->push_back(std::to_string(guarded) +
                            " band(s) had white reference below epsilon; clamped");

    HyperCube out = HyperCube::create(cube.height, cube.width, cube.bands, CubeKind::reflectance,
                                      cube.wavelengths_nm);
    const int64_t total = static_cast<int64_t>(cube.data.size());
    const uint32_t bands = cube.bands;
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < total; ++i)
            out.data[i] = cube.data[i] / denom[i % bands];
    } else {
        for (int64_t i = 0; i < total; ++i)
            out.data[i] = cube.data[i] / denom[i % bands];
    }
    return out;
}

}  // namespace

HyperCube white_correct(const HyperCube& cube, const SpectralCurve& white, float epsilon,
                        std::vector<std::string>* warnings) {
    return white_correct_impl(cube, white, epsilon, warnings, true);
}

HyperCube white_correct_serial(const HyperCube& cube, const SpectralCurve& white, float epsilon,
                               std::vector<std::string>* warnings) {
    return white_correct_impl(cube, white, epsilon, warnings, false);
}

std::pair<HyperCube, CalibrationReport> calibrate(const HyperCube& raw, const HyperCube& dark,
                                                  const CalibrationParams& params) {
    params.validate();
    uint64_t clamped = 0;
    const HyperCube corrected = dark_correct(raw, dark, &clamped);

    std::vector<std::string> warnings;
    if (clamped > 0)
        warnings.push_back(std::to_string(clamped) + " element(s) clamped to 0 in dark correction");
    const Mask spectralon = find_spectralon(corrected, params, &warnings);

    auto [white, report] = white_reference(corrected, spectralon, params);
    report.warnings.insert(report.warnings.begin(), warnings.begin(), warnings.end());

    SpectralCurve illumination = white;
    for (auto& v : illumination.values) v /= params.spectralon_reflectance;
    HyperCube reflectance =
        white_correct(corrected, illumination, params.epsilon, &report.warnings);
    return {std::move(reflectance), std::move(report)};
}

std::string calibration_report_to_json(const CalibrationReport& report) {
    nlohmann::json j{
        {"white_curve",
         {{"wavelengths_nm", report.white_curve.wavelengths_nm},
          {"values", report.white_curve.values}}},
        {"spectralon_pixel_count", report.spectralon_pixel_count},
        {"reference_pixel_count_used", report.reference_pixel_count_used},
        {"warnings", report.warnings},
    };
    return j.dump(2);
}

}  // namespace hsi
