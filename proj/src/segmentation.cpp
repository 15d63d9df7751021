#include "hsi/segmentation.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

#include "hsi/linear_svm.hpp"
#include "hsi/rng.hpp"

namespace hsi {

void PixelSvmModel::validate() const {
    if (weights.empty()) fail(errc::empty_input, "model has no weights");
    for (float w : weights)
        if (!std::isfinite(w)) fail(errc::non_finite, "model weights not finite");
    if (!std::isfinite(bias)) fail(errc::non_finite, "model bias not finite");
    if (trained_on == 0) fail(errc::bad_argument, "trained_on must be > 0");
}

PixelSvmModel train_pixel_svm(const std::vector<LabeledSpectrum>& samples, double lambda,
                              uint32_t epochs, uint64_t seed) {
    if (samples.empty()) fail(errc::empty_input, "no training samples");
    const size_t dim = samples[0].values.size();
    if (dim == 0) fail(errc::bad_argument, "samples have zero-length spectra");

    bool has_fg = false, has_bg = false;
    std::vector<float> features(samples.size() * dim);
    std::vector<int8_t> labels(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].values.size() != dim)
            fail(errc::dim_mismatch, "inconsistent spectrum lengths");
        std::copy(samples[i].values.begin(), samples[i].values.end(),
                  features.begin() + i * dim);
        labels[i] = samples[i].foreground ? int8_t{1} : int8_t{-1};
        (samples[i].foreground ? has_fg : has_bg) = true;
    }
    if (!has_fg || !has_bg) fail(errc::single_class, "both labels must be present");

    const LinearModel core =
        train_binary_hinge(features.data(), labels.data(), samples.size(), dim, lambda, epochs,
                           seed);
    PixelSvmModel model;
    model.weights = core.weights;
    model.bias = core.bias;
    model.trained_on = samples.size();
    model.lambda = lambda;
    model.epochs = epochs;
    model.seed = seed;
    return model;
}

namespace {

// noinline: one compiled body for the serial and OpenMP drivers keeps the
// score bit-identical between them.
__attribute__((noinline)) bool decide(const float* spectrum, const PixelSvmModel& model,
                                      uint32_t bands) {
    double score = model.bias;
    for (uint32_t b = 0; b < bands; ++b)
        score += static_cast<double>(model.weights[b]) * static_cast<double>(spectrum[b]);
    return score > 0.0;
}

Mask segment_impl(const HyperCube& cube, const PixelSvmModel& model, bool parallel) {
    model.validate();
    if (model.weights.size() != cube.bands)
        fail(errc::dim_mismatch, "model bands differ from cube bands");
    Mask mask(cube.height, cube.width);
    const int64_t n = static_cast<int64_t>(cube.height) * cube.width;
    const uint32_t bands = cube.bands;
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i)
            mask.bits[i] = decide(cube.data.data() + i * bands, model, bands) ? 1 : 0;
    } else {
        for (int64_t i = 0; i < n; ++i)
            mask.bits[i] = decide(cube.data.data() + i * bands, model, bands) ? 1 : 0;
    }
    return mask;
}

}  // namespace

Mask segment(const HyperCube& cube, const PixelSvmModel& model) {
    return segment_impl(cube, model, true);
}

Mask segment_serial(const HyperCube& cube, const PixelSvmModel& model) {
    return segment_impl(cube, model, false);
}

Mask mask_clean(const Mask& mask, uint64_t min_component_px) {
    Mask out = mask;
    if (min_component_px <= 1) return out;
    const uint32_t h = mask.height, w = mask.width;
    std::vector<uint8_t> visited(static_cast<size_t>(h) * w, 0);
    std::vector<uint64_t> stack, component;
    for (uint64_t start = 0; start < visited.size(); ++start) {
        if (!mask.bits[start] || visited[start]) continue;
        stack.assign(1, start);
        component.clear();
        visited[start] = 1;
        while (!stack.empty()) {
            const uint64_t p = stack.back();
            stack.pop_back();
            component.push_back(p);
            const uint32_t r = static_cast<uint32_t>(p / w);
            const uint32_t c = static_cast<uint32_t>(p % w);
            const uint64_t neighbors[4] = {
                r > 0 ? p - w : p, r + 1 < h ? p + w : p,
                c > 0 ? p - 1 : p, c + 1 < w ? p + 1 : p};
            for (uint64_t q : neighbors) {
                if (q == p || !mask.bits[q] || visited[q]) continue;
                visited[q] = 1;
                stack.push_back(q);
            }
        }
        if (component.size() < min_component_px)
            for (uint64_t p : component) out.bits[p] = 0;
    }
    return out;
}

std::vector<LabeledSpectrum> collect_pixel_samples(const HyperCube& cube, const Mask& truth,
                                                   uint64_t per_class, uint64_t seed) {
    if (truth.height != cube.height || truth.width != cube.width)
        fail(errc::dim_mismatch, "mask dimensions differ from cube");
    if (per_class == 0) fail(errc::bad_argument, "per_class must be > 0");

    std::vector<uint64_t> fg, bg;
    const uint64_t n = static_cast<uint64_t>(cube.height) * cube.width;
    for (uint64_t i = 0; i < n; ++i) (truth.bits[i] ? fg : bg).push_back(i);

    Rng rng(seed);
    std::vector<LabeledSpectrum> samples;
    const auto take = [&](std::vector<uint64_t>& pool, bool foreground) {
        rng.shuffle(pool);
        const uint64_t m = std::min<uint64_t>(per_class, pool.size());
        for (uint64_t i = 0; i < m; ++i) {
            LabeledSpectrum s;
            s.foreground = foreground;
            const float* x = cube.data.data() + pool[i] * cube.bands;
            s.values.assign(x, x + cube.bands);
            samples.push_back(std::move(s));
        }
    };
    take(fg, true);
    take(bg, false);
    return samples;
}

double pixel_accuracy(const std::vector<LabeledSpectrum>& samples, const PixelSvmModel& model) {
    if (samples.empty()) fail(errc::empty_input, "no samples");
    uint64_t correct = 0;
    for (const auto& s : samples) {
        if (s.values.size() != model.weights.size())
            fail(errc::dim_mismatch, "sample length differs from model");
        if (decide(s.values.data(), model, static_cast<uint32_t>(s.values.size())) ==
            s.foreground)
            ++correct;
    }
    return static_cast<double>(correct) / samples.size();
}

std::string pixel_svm_to_json(const PixelSvmModel& model) {
    nlohmann::json j{{"bands", model.weights.size()},
                     {"weights", model.weights},
                     {"bias", model.bias},
                     {"trained_on", model.trained_on},
                     {"hyperparams",
                      {{"lambda", model.lambda}, {"epochs", model.epochs}, {"seed", model.seed}}}};
    return j.dump(2);
}

PixelSvmModel pixel_svm_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    PixelSvmModel model;
    model.weights = j.at("weights").get<std::vector<float>>();
    model.bias = j.at("bias").get<float>();
    model.trained_on = j.at("trained_on").get<uint64_t>();
    const auto& h = j.at("hyperparams");
    model.lambda = h.at("lambda").get<double>();
    model.epochs = h.at("epochs").get<uint32_t>();
    model.seed = h.at("seed").get<uint64_t>();
    if (j.at("bands").get<size_t>() != model.weights.size())
        fail(errc::dim_mismatch, "bands field disagrees with weights length");
    model.validate();
    return model;
}

void save_pixel_svm(const PixelSvmModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
    out << pixel_svm_to_json(model) << "\n";
}

PixelSvmModel load_pixel_svm(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io_failure, "cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return pixel_svm_from_json(text);
}

}  // namespace hsi
