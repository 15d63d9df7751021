// Serial vs OpenMP timing for every kernel that ships both variants, with a
// bit-equality check between the two results on each run.

#include <cstdio>
#include <cstring>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#else
#include <chrono>
static double omp_get_wtime() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}
static int omp_get_max_threads() { return 1; }
#endif

#include "hsi/calibration.hpp"
#include "hsi/patches.hpp"
#include "hsi/resnet.hpp"
#include "hsi/rng.hpp"
#include "hsi/segmentation.hpp"
#include "hsi/spectral.hpp"
#include "hsi/synthgen.hpp"

using namespace hsi;

namespace {

int g_failures = 0;

bool bytes_equal(const void* a, const void* b, size_t n) { return std::memcmp(a, b, n) == 0; }

template <typename F>
double best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const double t0 = omp_get_wtime();
        fn();
        best = std::min(best, omp_get_wtime() - t0);
    }
    return best;
}

void report(const char* name, double serial_s, double parallel_s, bool equal) {
    std::printf("%-18s %10.2f ms %10.2f ms %7.2fx   %s\n", name, serial_s * 1e3,
                parallel_s * 1e3, serial_s / parallel_s, equal ? "identical" : "MISMATCH");
    if (!equal) ++g_failures;
}

}  // namespace

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::atoi(argv[1]) : 3;
    std::printf("threads: %d, best of %d runs\n", omp_get_max_threads(), reps);
    std::printf("%-18s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    SceneSpec spec;
    spec.height = 216;
    spec.width = 409;
    spec.noise_sigma = 0.01f;
    spec.seed = 7;
    const Scene scene = generate_scene(spec);

    HyperCube dark_s, dark_p;
    {
        const double ts = best_of(reps, [&] { dark_s = dark_correct_serial(scene.raw, scene.dark); });
        const double tp = best_of(reps, [&] { dark_p = dark_correct(scene.raw, scene.dark); });
        report("dark_correct", ts, tp,
               bytes_equal(dark_s.data.data(), dark_p.data.data(),
                           dark_s.data.size() * sizeof(float)));
    }

    KMeansResult km_s, km_p;
    {
        const double ts = best_of(reps, [&] { km_s = kmeans_spectra_serial(dark_s, 4, 50, 11); });
        const double tp = best_of(reps, [&] { km_p = kmeans_spectra(dark_s, 4, 50, 11); });
        report("kmeans_spectra", ts, tp,
               km_s.labels == km_p.labels && km_s.centroids == km_p.centroids);
    }

    CalibrationParams params;
    params.seed = 11;
    auto [white, cal_report] = white_reference(dark_s, find_spectralon(dark_s, params), params);
    HyperCube refl_s, refl_p;
    {
        const double ts = best_of(reps, [&] { refl_s = white_correct_serial(dark_s, white); });
        const double tp = best_of(reps, [&] { refl_p = white_correct(dark_s, white); });
        report("white_correct", ts, tp,
               bytes_equal(refl_s.data.data(), refl_p.data.data(),
                           refl_s.data.size() * sizeof(float)));
    }

    std::vector<LabeledSpectrum> samples =
        collect_pixel_samples(refl_s, scene.truth.mask, 4000, 13);
    const PixelSvmModel seg_model = train_pixel_svm(samples, 1e-3, 20, 13);
    Mask mask_s, mask_p;
    {
        const double ts = best_of(reps, [&] { mask_s = segment_serial(refl_s, seg_model); });
        const double tp = best_of(reps, [&] { mask_p = segment(refl_s, seg_model); });
        report("segment", ts, tp, mask_s.bits == mask_p.bits);
    }

    ScalarMap map_s, map_p;
    {
        const double ts = best_of(
            reps, [&] { map_s = laplacian_map_serial(refl_s, mask_s, MapStatistic::mean_angle); });
        const double tp = best_of(
            reps, [&] { map_p = laplacian_map(refl_s, mask_s, MapStatistic::mean_angle); });
        report("laplacian_map", ts, tp,
               bytes_equal(map_s.values.data(), map_p.values.data(),
                           map_s.values.size() * sizeof(float)) &&
                   map_s.valid.bits == map_p.valid.bits);
    }

    PatchSet set_s, set_p;
    {
        const double ts =
            best_of(reps, [&] { set_s = extract_patches_serial(refl_s, mask_s, 5, 19, 9); });
        const double tp = best_of(reps, [&] { set_p = extract_patches(refl_s, mask_s, 5, 19, 9); });
        bool equal = set_s.size() == set_p.size();
        for (size_t i = 0; equal && i < set_s.size(); ++i)
            equal = set_s.patches[i].data == set_p.patches[i].data &&
                    set_s.patches[i].row == set_p.patches[i].row &&
                    set_s.patches[i].col == set_p.patches[i].col;
        report("extract_patches", ts, tp, equal);
    }

    NetConfig nc;
    nc.seed = 29;
    PatchSet batch;
    batch.n = nc.input_n;
    batch.bands = nc.input_bands;
    Rng rng(31);
    for (int i = 0; i < 64; ++i) {
        Patch p;
        p.n = batch.n;
        p.bands = batch.bands;
        p.label = kRatingClasses[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(kRatingClasses.size()) - 1))];
        p.data.resize(static_cast<size_t>(p.n) * p.n * p.bands);
        for (float& v : p.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
        batch.append(std::move(p));
    }
    const ResidualNet net = init_net(nc);

    std::vector<float> logits_s, logits_p;
    {
        const double ts = best_of(reps, [&] { logits_s = forward_serial(net, batch); });
        const double tp = best_of(reps, [&] { logits_p = forward(net, batch); });
        report("net_forward", ts, tp,
               bytes_equal(logits_s.data(), logits_p.data(), logits_s.size() * sizeof(float)));
    }
    {
        const std::vector<int> labels = set_labels(batch);
        std::pair<double, std::vector<float>> g_s, g_p;
        const double ts = best_of(reps, [&] { g_s = loss_and_grad_serial(net, batch, labels); });
        const double tp = best_of(reps, [&] { g_p = loss_and_grad(net, batch, labels); });
        report("net_loss_grad", ts, tp,
               g_s.first == g_p.first &&
                   bytes_equal(g_s.second.data(), g_p.second.data(),
                               g_s.second.size() * sizeof(float)));
    }

    if (g_failures) {
        std::printf("%d kernel(s) diverged between serial and OpenMP\n", g_failures);
        return 1;
    }
    std::printf("all kernels bit-identical between serial and OpenMP\n");
    return 0;
}
