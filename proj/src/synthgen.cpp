#include "hsi/synthgen.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

#include "hsi/rng.hpp"

namespace hsi {

namespace {

using nlohmann::json;

// Seed-derivation tags for the independent per-scene streams.
constexpr uint64_t kFieldStream = 1;
constexpr uint64_t kRawNoiseStream = 2;
constexpr uint64_t kDarkNoiseStream = 3;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Seeded value noise over leaf-local coordinates: a uniform(-1,1) lattice with
// spacing `spacing` px, sampled with smoothstep-bilinear interpolation. The
// lattice is drawn row-major so the field is a pure function of the seed.
struct ValueNoiseField {
    ValueNoiseField(uint32_t extent_h, uint32_t extent_w, double spacing, uint64_t seed)
        : spacing_(spacing) {
        rows_ = static_cast<uint32_t>(extent_h / spacing) + 2;
        cols_ = static_cast<uint32_t>(extent_w / spacing) + 2;
        lattice_.resize(static_cast<size_t>(rows_) * cols_);
        Rng rng(seed);
        for (auto& v : lattice_) v = rng.uniform(-1.0, 1.0);
    }

    double sample(uint32_t lr, uint32_t lc) const {
        const double u = lr / spacing_;
        const double v = lc / spacing_;
        uint32_t i = static_cast<uint32_t>(u);
        uint32_t j = static_cast<uint32_t>(v);
        if (i + 1 >= rows_) i = rows_ - 2;
        if (j + 1 >= cols_) j = cols_ - 2;
        const double fu = smoothstep(u - i);
        const double fv = smoothstep(v - j);
        const double a = lattice_[static_cast<size_t>(i) * cols_ + j];
        const double b = lattice_[static_cast<size_t>(i) * cols_ + j + 1];
        const double c = lattice_[static_cast<size_t>(i + 1) * cols_ + j];
        const double d = lattice_[static_cast<size_t>(i + 1) * cols_ + j + 1];
        return (a * (1 - fv) + b * fv) * (1 - fu) + (c * (1 - fv) + d * fv) * fu;
    }

private:
    double spacing_;
    uint32_t rows_, cols_;
    std::vector<double> lattice_;
};

constexpr float kBackgroundReflectance = 0.05f;
constexpr float kSpectralonReflectance = 0.99f;

}  // namespace

int class_index(int rating) {
    for (size_t i = 0; i < kRatingClasses.size(); ++i)
        if (kRatingClasses[i] == rating) return static_cast<int>(i);
    fail(errc::bad_label, "rating class " + std::to_string(rating) + " not in vocabulary");
}

bool is_rating_class(int rating) {
    for (int r : kRatingClasses)
        if (r == rating) return true;
    return false;
}

double mosaic_scale_factor(int rating) {
    // Coarse blotches for resistant varieties, fine speckle for susceptible.
    static constexpr double f[7] = {1.60, 1.40, 1.20, 1.00, 0.85, 0.70, 0.55};
    return f[class_index(rating)];
}

double mosaic_amplitude_factor(int rating) {
    // Modulation depth grows with susceptibility. The low end is compressed
    // so adjacent classes keep a roughly constant amplitude ratio.
    static constexpr double g[7] = {0.14, 0.28, 0.42, 0.56, 0.70, 0.85, 1.00};
    return g[class_index(rating)];
}

// Red-edge shaped endmembers: low red reflectance rising steeply into the
// near infrared. Chlorotic tissue is much brighter in the red (pigment loss)
// and darker on the NIR plateau with a delayed, shallower edge, so mixing the
// two rotates spectral shape (sign flip across the edge), not just
// brightness. The contrast (about +0.18 red, -0.10 NIR) is what makes the
// mottling visible to the learners against the common base curve.
std::vector<float> healthy_leaf_curve(const std::vector<float>& wavelengths_nm) {
    std::vector<float> out(wavelengths_nm.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(0.05 + 0.45 * logistic((wavelengths_nm[i] - 720.0) / 10.0));
    return out;
}

std::vector<float> diseased_leaf_curve(const std::vector<float>& wavelengths_nm) {
    std::vector<float> out(wavelengths_nm.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(0.24 + 0.16 * logistic((wavelengths_nm[i] - 738.0) / 20.0));
    return out;
}

void SceneSpec::validate() const {
    if (height == 0 || width == 0 || bands == 0)
        fail(errc::bad_argument, "scene dimensions must be nonzero");
    if (!is_rating_class(rating_class))
        fail(errc::bad_label, "rating_class not in vocabulary");
    if (!leaf_rect.inside(height, width))
        fail(errc::bad_argument, "leaf_rect outside image");
    if (!spectralon_rect.inside(height, width))
        fail(errc::bad_argument, "spectralon_rect outside image");
    if (!leaf_rect.disjoint(spectralon_rect))
        fail(errc::bad_argument, "leaf_rect and spectralon_rect overlap");
    if (!illumination.values.empty()) {
        illumination.validate();
        if (illumination.size() != bands)
            fail(errc::dim_mismatch, "illumination length != bands");
    }
    if (dark_level < 0.0f) fail(errc::bad_argument, "dark_level must be >= 0");
    if (noise_sigma < 0.0f) fail(errc::bad_argument, "noise_sigma must be >= 0");
    if (mosaic_amplitude < 0.0f || mosaic_amplitude > 1.0f)
        fail(errc::bad_argument, "mosaic_amplitude must be in [0,1]");
    if (!(mosaic_scale_px > 0.0f)) fail(errc::bad_argument, "mosaic_scale_px must be > 0");
}

void apply_environment_preset(SceneSpec& spec, std::string_view name) {
    const auto wl = default_wavelengths(spec.bands);
    SpectralCurve illum;
    illum.wavelengths_nm = wl;
    illum.values.resize(spec.bands);
    if (name == "indoor") {
        for (uint32_t b = 0; b < spec.bands; ++b) illum.values[b] = 1.0f;
        spec.noise_sigma = 0.008f;
    } else if (name == "outdoor") {
        // Sunlight-like: rising gain across the range plus mild curvature.
        for (uint32_t b = 0; b < spec.bands; ++b) {
            const double x = spec.bands == 1 ? 0.0 : static_cast<double>(b) / (spec.bands - 1);
            illum.values[b] = static_cast<float>(0.88 + 0.30 * x - 0.08 * x * x);
        }
        spec.noise_sigma = 0.015f;
    } else {
        fail(errc::bad_argument, "unknown environment preset: " + std::string(name));
    }
    spec.illumination = std::move(illum);
}

Scene generate_scene(const SceneSpec& spec) {
    spec.validate();

    std::vector<float> wl;
    std::vector<float> illum(spec.bands, 1.0f);
    if (spec.illumination.values.empty()) {
        wl = default_wavelengths(spec.bands);
    } else {
        wl = spec.illumination.wavelengths_nm;
        illum = spec.illumination.values;
    }

    Scene scene;
    scene.truth.reflectance =
        HyperCube::create(spec.height, spec.width, spec.bands, CubeKind::reflectance, wl);
    HyperCube& refl = scene.truth.reflectance;

    for (uint32_t r = 0; r < spec.height; ++r)
        for (uint32_t c = 0; c < spec.width; ++c)
            for (uint32_t b = 0; b < spec.bands; ++b)
                refl.at(r, c, b) =
                    spec.spectralon_rect.contains(r, c) ? kSpectralonReflectance
                                                        : kBackgroundReflectance;

    const auto healthy = healthy_leaf_curve(wl);
    const auto diseased = diseased_leaf_curve(wl);
    const double spacing =
        static_cast<double>(spec.mosaic_scale_px) * mosaic_scale_factor(spec.rating_class);
    const double depth =
        static_cast<double>(spec.mosaic_amplitude) * mosaic_amplitude_factor(spec.rating_class);
    const ValueNoiseField field(spec.leaf_rect.height, spec.leaf_rect.width, spacing,
                                derive_seed(spec.seed, {kFieldStream}));

    for (uint32_t lr = 0; lr < spec.leaf_rect.height; ++lr) {
        for (uint32_t lc = 0; lc < spec.leaf_rect.width; ++lc) {
            const double noise01 = 0.5 + 0.5 * field.sample(lr, lc);
            const double t = std::clamp(depth * noise01, 0.0, 1.0);
            const uint32_t r = spec.leaf_rect.row + lr;
            const uint32_t c = spec.leaf_rect.col + lc;
            for (uint32_t b = 0; b < spec.bands; ++b)
                refl.at(r, c, b) = static_cast<float>((1.0 - t) * healthy[b] + t * diseased[b]);
        }
    }

    scene.truth.mask = Mask(spec.height, spec.width);
    for (uint32_t lr = 0; lr < spec.leaf_rect.height; ++lr)
        for (uint32_t lc = 0; lc < spec.leaf_rect.width; ++lc)
            scene.truth.mask.set(spec.leaf_rect.row + lr, spec.leaf_rect.col + lc, true);
    scene.truth.label = spec.rating_class;
    scene.truth.white_curve.wavelengths_nm = wl;
    scene.truth.white_curve.values = illum;

    // Acquisition model: raw = reflectance * illumination + dark level + noise,
    // dark frame = dark level + noise. Noise draws walk the cube row-major,
    // band-innermost, one seeded stream per frame.
    scene.raw = HyperCube::create(spec.height, spec.width, spec.bands, CubeKind::raw_dn, wl);
    scene.dark = HyperCube::create(spec.height, spec.width, spec.bands, CubeKind::raw_dn, wl);
    const double sigma = spec.noise_sigma;
    Rng raw_noise(derive_seed(spec.seed, {kRawNoiseStream}));
    Rng dark_noise(derive_seed(spec.seed, {kDarkNoiseStream}));
    const size_t total = refl.data.size();
    for (size_t i = 0; i < total; ++i) {
        const uint32_t b = static_cast<uint32_t>(i % spec.bands);
        double v = static_cast<double>(refl.data[i]) * illum[b] + spec.dark_level;
        if (sigma > 0.0) v += sigma * raw_noise.normal();
        scene.raw.data[i] = static_cast<float>(v);
    }
    for (size_t i = 0; i < total; ++i) {
        double v = spec.dark_level;
        if (sigma > 0.0) v += sigma * dark_noise.normal();
        scene.dark.data[i] = static_cast<float>(v);
    }
    return scene;
}

std::vector<Scene> generate_dataset(const SceneSpec& base, int per_class, uint64_t seed) {
    if (per_class < 1) fail(errc::bad_argument, "per_class must be >= 1");
    base.validate();

    std::vector<float> base_illum;
    if (base.illumination.values.empty())
        base_illum.assign(base.bands, 1.0f);
    else
        base_illum = base.illumination.values;
    const auto wl = base.illumination.values.empty() ? default_wavelengths(base.bands)
                                                     : base.illumination.wavelengths_nm;

    const int count = static_cast<int>(kRatingClasses.size()) * per_class;
    std::vector<SceneSpec> specs(count);
    for (size_t ci = 0; ci < kRatingClasses.size(); ++ci) {
        for (int j = 0; j < per_class; ++j) {
            SceneSpec spec = base;
            spec.rating_class = kRatingClasses[ci];
            Rng rng(derive_seed(seed, {ci, static_cast<uint64_t>(j)}));

            // Leaf position jitter, clamped into the image; fall back to the
            // base position if the jittered rectangle hits the spectralon.
            const int64_t jr = rng.uniform_int(-10, 10);
            const int64_t jc = rng.uniform_int(-10, 10);
            Rect leaf = base.leaf_rect;
            const int64_t max_row = static_cast<int64_t>(base.height) - leaf.height;
            const int64_t max_col = static_cast<int64_t>(base.width) - leaf.width;
            leaf.row = static_cast<uint32_t>(
                std::clamp<int64_t>(static_cast<int64_t>(base.leaf_rect.row) + jr, 0, max_row));
            leaf.col = static_cast<uint32_t>(
                std::clamp<int64_t>(static_cast<int64_t>(base.leaf_rect.col) + jc, 0, max_col));
            if (leaf.disjoint(base.spectralon_rect)) spec.leaf_rect = leaf;

            // Illumination tilt: overall gain plus a linear slope across bands.
            const double gain = rng.uniform(0.85, 1.15);
            const double tilt = rng.uniform(-0.3, 0.3);
            SpectralCurve illum;
            illum.wavelengths_nm = wl;
            illum.values.resize(base.bands);
            for (uint32_t b = 0; b < base.bands; ++b) {
                const double x =
                    base.bands == 1 ? 0.0 : static_cast<double>(b) / (base.bands - 1) - 0.5;
                illum.values[b] = static_cast<float>(base_illum[b] * gain * (1.0 + tilt * x));
            }
            spec.illumination = std::move(illum);
            spec.seed = derive_seed(seed, {ci, static_cast<uint64_t>(j), 1000});
            specs[ci * per_class + j] = std::move(spec);
        }
    }

    std::vector<Scene> scenes(count);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < count; ++i) scenes[i] = generate_scene(specs[i]);
    return scenes;
}

namespace {

void curve_to_json(const SpectralCurve& curve, json& j) {
    j = json{{"wavelengths_nm", curve.wavelengths_nm}, {"values", curve.values}};
}

SpectralCurve curve_from_json(const json& j) {
    SpectralCurve curve;
    curve.wavelengths_nm = j.at("wavelengths_nm").get<std::vector<float>>();
    curve.values = j.at("values").get<std::vector<float>>();
    curve.validate();
    return curve;
}

json rect_to_json(const Rect& r) {
    return json{{"row", r.row}, {"col", r.col}, {"height", r.height}, {"width", r.width}};
}

Rect rect_from_json(const json& j) {
    Rect r;
    r.row = j.at("row").get<uint32_t>();
    r.col = j.at("col").get<uint32_t>();
    r.height = j.at("height").get<uint32_t>();
    r.width = j.at("width").get<uint32_t>();
    return r;
}

}  // namespace

std::string scene_spec_to_json(const SceneSpec& spec) {
    json j{{"height", spec.height},
           {"width", spec.width},
           {"bands", spec.bands},
           {"rating_class", spec.rating_class},
           {"leaf_rect", rect_to_json(spec.leaf_rect)},
           {"spectralon_rect", rect_to_json(spec.spectralon_rect)},
           {"dark_level", spec.dark_level},
           {"noise_sigma", spec.noise_sigma},
           {"mosaic_amplitude", spec.mosaic_amplitude},
           {"mosaic_scale_px", spec.mosaic_scale_px},
           {"seed", spec.seed}};
    if (!spec.illumination.values.empty())
        curve_to_json(spec.illumination, j["illumination"]);
    return j.dump(2);
}

SceneSpec scene_spec_from_json(const std::string& text) {
    json j = json::parse(text);
    SceneSpec spec;
    if (j.contains("height")) spec.height = j["height"].get<uint32_t>();
    if (j.contains("width")) spec.width = j["width"].get<uint32_t>();
    if (j.contains("bands")) spec.bands = j["bands"].get<uint32_t>();
    if (j.contains("rating_class")) spec.rating_class = j["rating_class"].get<int>();
    if (j.contains("leaf_rect")) spec.leaf_rect = rect_from_json(j["leaf_rect"]);
    if (j.contains("spectralon_rect")) spec.spectralon_rect = rect_from_json(j["spectralon_rect"]);
    if (j.contains("illumination")) spec.illumination = curve_from_json(j["illumination"]);
    if (j.contains("dark_level")) spec.dark_level = j["dark_level"].get<float>();
    if (j.contains("noise_sigma")) spec.noise_sigma = j["noise_sigma"].get<float>();
    if (j.contains("mosaic_amplitude")) spec.mosaic_amplitude = j["mosaic_amplitude"].get<float>();
    if (j.contains("mosaic_scale_px")) spec.mosaic_scale_px = j["mosaic_scale_px"].get<float>();
    if (j.contains("seed")) spec.seed = j["seed"].get<uint64_t>();
    spec.validate();
    return spec;
}

SceneSpec scene_spec_from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io_failure, "cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return scene_spec_from_json(text);
}

void save_scene_sidecar(const SceneTruth& truth, const std::filesystem::path& path) {
    json j{{"label", truth.label}};
    curve_to_json(truth.white_curve, j["white_curve"]);
    std::ofstream out(path);
    if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
}

}  // namespace hsi
