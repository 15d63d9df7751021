#include "hsi/patches.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "hsi/rng.hpp"
#include "hsi/synthgen.hpp"

namespace hsi {

namespace {

constexpr char kMagic[4] = {'H', 'P', 'S', '1'};
constexpr uint64_t kMaxPatchElements = uint64_t{1} << 31;
constexpr double kPi = 3.14159265358979323846;

void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) fail(errc::truncated, "file ended inside a header field");
    return v;
}

uint8_t read_u8(std::istream& in) {
    uint8_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) fail(errc::truncated, "file ended inside a header field");
    return v;
}

}  // namespace

void Patch::validate() const {
    if (n == 0 || bands == 0) fail(errc::bad_argument, "patch dimensions must be nonzero");
    if (!is_rating_class(label)) fail(errc::bad_label, "patch label not in vocabulary");
    const uint64_t expect = static_cast<uint64_t>(n) * n * bands;
    if (data.size() != expect) fail(errc::dim_mismatch, "patch data length != n*n*bands");
    for (float v : data)
        if (!std::isfinite(v)) fail(errc::non_finite, "patch contains non-finite values");
}

std::map<int, uint64_t> PatchSet::class_counts() const {
    std::map<int, uint64_t> counts;
    for (const Patch& p : patches) ++counts[p.label];
    return counts;
}

void PatchSet::append(Patch p) {
    if (patches.empty() && n == 0 && bands == 0) {
        n = p.n;
        bands = p.bands;
    }
    if (p.n != n || p.bands != bands)
        fail(errc::dim_mismatch, "patch dimensions differ from the set's");
    if (!is_rating_class(p.label)) fail(errc::bad_label, "patch label not in vocabulary");
    patches.push_back(std::move(p));
}

void PatchSet::validate() const {
    for (const Patch& p : patches) {
        p.validate();
        if (p.n != n || p.bands != bands)
            fail(errc::dim_mismatch, "patch dimensions differ from the set's");
    }
}

namespace {

// Inclusion-exclusion table over the mask so the all-foreground window test
// is O(1) per anchor.
std::vector<uint64_t> integral_image(const Mask& mask) {
    const uint64_t h = mask.height, w = mask.width;
    std::vector<uint64_t> sums((h + 1) * (w + 1), 0);
    for (uint64_t r = 0; r < h; ++r)
        for (uint64_t c = 0; c < w; ++c)
            sums[(r + 1) * (w + 1) + (c + 1)] = (mask.bits[r * w + c] ? 1 : 0) +
                                                sums[r * (w + 1) + (c + 1)] +
                                                sums[(r + 1) * (w + 1) + c] -
                                                sums[r * (w + 1) + c];
    return sums;
}

inline uint64_t window_sum(const std::vector<uint64_t>& sums, uint64_t w, uint32_t r, uint32_t c,
                           uint32_t n) {
    return sums[(r + n) * (w + 1) + (c + n)] - sums[r * (w + 1) + (c + n)] -
           sums[(r + n) * (w + 1) + c] + sums[r * (w + 1) + c];
}

Patch copy_window(const HyperCube& cube, uint32_t row, uint32_t col, uint32_t n, int label,
                  uint32_t scene_id) {
    Patch p;
    p.n = n;
    p.bands = cube.bands;
    p.label = label;
    p.scene_id = scene_id;
    p.row = row;
    p.col = col;
    p.data.resize(static_cast<size_t>(n) * n * cube.bands);
    const size_t row_floats = static_cast<size_t>(n) * cube.bands;
    for (uint32_t i = 0; i < n; ++i)
        std::memcpy(p.data.data() + static_cast<size_t>(i) * row_floats,
                    cube.data.data() + cube.index(row + i, col, 0), row_floats * sizeof(float));
    return p;
}

PatchSet extract_impl(const HyperCube& cube, const Mask& mask, int label, uint32_t n,
                      uint32_t stride, uint32_t scene_id, bool parallel) {
    if (n < 1 || stride < 1) fail(errc::bad_argument, "n and stride must be >= 1");
    if (n > cube.height || n > cube.width)
        fail(errc::bad_argument, "patch side exceeds image size");
    if (mask.height != cube.height || mask.width != cube.width)
        fail(errc::dim_mismatch, "mask dimensions differ from cube");
    if (!is_rating_class(label)) fail(errc::bad_label, "label not in vocabulary");

    const uint32_t anchor_rows = (cube.height - n) / stride + 1;
    const uint32_t anchor_cols = (cube.width - n) / stride + 1;
    const auto sums = integral_image(mask);
    const uint64_t full = static_cast<uint64_t>(n) * n;

    std::vector<uint8_t> keep(static_cast<size_t>(anchor_rows) * anchor_cols, 0);
    const int64_t anchors = static_cast<int64_t>(keep.size());
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int64_t a = 0; a < anchors; ++a) {
            const uint32_t r = static_cast<uint32_t>(a / anchor_cols) * stride;
            const uint32_t c = static_cast<uint32_t>(a % anchor_cols) * stride;
            keep[a] = window_sum(sums, mask.width, r, c, n) == full ? 1 : 0;
        }
    } else {
        for (int64_t a = 0; a < anchors; ++a) {
            const uint32_t r = static_cast<uint32_t>(a / anchor_cols) * stride;
            const uint32_t c = static_cast<uint32_t>(a % anchor_cols) * stride;
            keep[a] = window_sum(sums, mask.width, r, c, n) == full ? 1 : 0;
        }
    }

    PatchSet set;
    set.n = n;
    set.bands = cube.bands;
    for (int64_t a = 0; a < anchors; ++a) {
        if (!keep[a]) continue;
        const uint32_t r = static_cast<uint32_t>(a / anchor_cols) * stride;
        const uint32_t c = static_cast<uint32_t>(a % anchor_cols) * stride;
        set.patches.push_back(copy_window(cube, r, c, n, label, scene_id));
    }
    return set;
}

}  // namespace

PatchSet extract_patches(const HyperCube& cube, const Mask& mask, int label, uint32_t n,
                         uint32_t stride, uint32_t scene_id) {
    return extract_impl(cube, mask, label, n, stride, scene_id, true);
}

PatchSet extract_patches_serial(const HyperCube& cube, const Mask& mask, int label, uint32_t n,
                                uint32_t stride, uint32_t scene_id) {
    return extract_impl(cube, mask, label, n, stride, scene_id, false);
}

std::vector<float> flatten(const Patch& patch) {
    patch.validate();
    return patch.data;
}

std::vector<float> flatten_set(const PatchSet& set) {
    const size_t dim = static_cast<size_t>(set.n) * set.n * set.bands;
    std::vector<float> features(set.size() * dim);
    for (size_t i = 0; i < set.size(); ++i)
        std::copy(set.patches[i].data.begin(), set.patches[i].data.end(),
                  features.begin() + i * dim);
    return features;
}

std::vector<int> set_labels(const PatchSet& set) {
    std::vector<int> labels(set.size());
    for (size_t i = 0; i < set.size(); ++i) labels[i] = set.patches[i].label;
    return labels;
}

std::optional<Patch> augment_patch_with(const HyperCube& cube, const Mask& mask, uint32_t row,
                                        uint32_t col, uint32_t n, int label, uint32_t scene_id,
                                        int dr, int dc, double phi_deg) {
    if (n < 1 || row + n > cube.height || col + n > cube.width)
        fail(errc::bad_argument, "origin is not a valid patch anchor");
    if (mask.height != cube.height || mask.width != cube.width)
        fail(errc::dim_mismatch, "mask dimensions differ from cube");

    const double half = (n - 1) / 2.0;
    const double center_r = static_cast<double>(row) + dr + half;
    const double center_c = static_cast<double>(col) + dc + half;
    const double rad = phi_deg * kPi / 180.0;
    const double cs = std::cos(rad);
    const double sn = std::sin(rad);

    Patch p;
    p.n = n;
    p.bands = cube.bands;
    p.label = label;
    p.scene_id = scene_id;
    p.row = row;
    p.col = col;
    p.augmented = true;
    p.data.resize(static_cast<size_t>(n) * n * cube.bands);

    for (uint32_t i = 0; i < n; ++i) {
        const double di = i - half;
        for (uint32_t j = 0; j < n; ++j) {
            const double dj = j - half;
            const double sr = center_r + cs * di + sn * dj;
            const double sc = center_c - sn * di + cs * dj;
            const int64_t nr = std::llround(sr);
            const int64_t nc = std::llround(sc);
            if (nr < 0 || nr >= cube.height || nc < 0 || nc >= cube.width) return std::nullopt;
            if (!mask.at(static_cast<uint32_t>(nr), static_cast<uint32_t>(nc)))
                return std::nullopt;
            std::memcpy(p.data.data() + (static_cast<size_t>(i) * n + j) * cube.bands,
                        cube.data.data() +
                            cube.index(static_cast<uint32_t>(nr), static_cast<uint32_t>(nc), 0),
                        cube.bands * sizeof(float));
        }
    }
    return p;
}

std::optional<Patch> augment_patch(const HyperCube& cube, const Mask& mask, uint32_t row,
                                   uint32_t col, uint32_t n, int label, uint32_t scene_id,
                                   uint64_t seed, int max_shift_px, double max_rot_deg) {
    Rng rng(seed);
    // Draw order is part of the contract: row shift, column shift, angle.
    const int dr = static_cast<int>(rng.uniform_int(-max_shift_px, max_shift_px));
    const int dc = static_cast<int>(rng.uniform_int(-max_shift_px, max_shift_px));
    const double phi = rng.uniform(-max_rot_deg, max_rot_deg);
    return augment_patch_with(cube, mask, row, col, n, label, scene_id, dr, dc, phi);
}

PatchSet augment_training_set(const PatchSet& set, const std::vector<ScenePixels>& scenes,
                              uint32_t multiplicity, uint64_t seed, int max_shift_px,
                              double max_rot_deg) {
    PatchSet out;
    out.n = set.n;
    out.bands = set.bands;
    out.patches = set.patches;
    if (multiplicity == 0 || set.patches.empty()) return out;

    for (const Patch& p : set.patches)
        if (p.scene_id >= scenes.size() || !scenes[p.scene_id].cube || !scenes[p.scene_id].mask)
            fail(errc::index_out_of_range,
                 "patch references scene " + std::to_string(p.scene_id) + " with no pixel data");

    const int64_t slots = static_cast<int64_t>(set.patches.size()) * multiplicity;
    std::vector<std::optional<Patch>> results(slots);
#pragma omp parallel for schedule(dynamic)
    for (int64_t s = 0; s < slots; ++s) {
        const Patch& p = set.patches[s / multiplicity];
        const uint64_t draw = static_cast<uint64_t>(s % multiplicity);
        const uint64_t draw_seed = derive_seed(seed, {p.scene_id, p.row, p.col, draw});
        results[s] = augment_patch(*scenes[p.scene_id].cube, *scenes[p.scene_id].mask, p.row,
                                   p.col, p.n, p.label, p.scene_id, draw_seed, max_shift_px,
                                   max_rot_deg);
    }
    for (auto& r : results)
        if (r) out.patches.push_back(std::move(*r));
    return out;
}

namespace {

void check_ratios(const SplitRatios& ratios) {
    if (ratios.train + ratios.validation + ratios.test == 0)
        fail(errc::bad_argument, "split ratios sum to zero");
}

// Apportion k items so every part stays within one of its exact ratio share:
// floors first, then the leftover (at most two items) goes to the parts with
// the largest fractional remainders, ties in train/validation/test order.
struct GroupCounts {
    size_t train, validation;
};
GroupCounts group_counts(size_t k, const SplitRatios& ratios) {
    const uint64_t total = ratios.train + ratios.validation + ratios.test;
    const uint64_t weights[3] = {ratios.train, ratios.validation, ratios.test};
    size_t counts[3];
    uint64_t rem[3];
    size_t assigned = 0;
    for (int p = 0; p < 3; ++p) {
        const uint64_t scaled = static_cast<uint64_t>(k) * weights[p];
        counts[p] = static_cast<size_t>(scaled / total);
        rem[p] = scaled % total;
        assigned += counts[p];
    }
    for (size_t left = k - assigned; left > 0; --left) {
        int best = 0;
        for (int p = 1; p < 3; ++p)
            if (rem[p] > rem[best]) best = p;
        ++counts[best];
        rem[best] = 0;  // each part gains at most one extra
    }
    return {counts[0], counts[1]};
}

}  // namespace

SplitResult split(const PatchSet& set, SplitRatios ratios, uint64_t seed, bool stratified) {
    if (set.patches.empty()) fail(errc::empty_input, "cannot split an empty patch set");
    check_ratios(ratios);

    std::map<int, std::vector<size_t>> groups;
    if (stratified) {
        for (size_t i = 0; i < set.patches.size(); ++i)
            groups[set.patches[i].label].push_back(i);
    } else {
        auto& all = groups[0];
        all.resize(set.patches.size());
        std::iota(all.begin(), all.end(), size_t{0});
    }

    SplitResult result;
    for (auto* part : {&result.train, &result.validation, &result.test}) {
        part->n = set.n;
        part->bands = set.bands;
    }
    Rng rng(seed);
    for (auto& [label, indices] : groups) {
        rng.shuffle(indices);
        const auto [n_train, n_val] = group_counts(indices.size(), ratios);
        for (size_t i = 0; i < indices.size(); ++i) {
            PatchSet& dest = i < n_train              ? result.train
                             : i < n_train + n_val    ? result.validation
                                                      : result.test;
            dest.patches.push_back(set.patches[indices[i]]);
        }
    }
    return result;
}

SplitResult split_by_scene(const PatchSet& set, SplitRatios ratios, uint64_t seed) {
    if (set.patches.empty()) fail(errc::empty_input, "cannot split an empty patch set");
    check_ratios(ratios);

    // Each scene carries one label; stratify at scene granularity.
    std::map<uint32_t, int> scene_label;
    for (const Patch& p : set.patches) scene_label.emplace(p.scene_id, p.label);
    std::map<int, std::vector<uint32_t>> scenes_by_class;
    for (const auto& [scene, label] : scene_label) scenes_by_class[label].push_back(scene);

    std::map<uint32_t, int> destination;  // scene -> 0 train, 1 val, 2 test
    Rng rng(seed);
    for (auto& [label, scene_ids] : scenes_by_class) {
        rng.shuffle(scene_ids);
        const auto [n_train, n_val] = group_counts(scene_ids.size(), ratios);
        for (size_t i = 0; i < scene_ids.size(); ++i)
            destination[scene_ids[i]] = i < n_train ? 0 : i < n_train + n_val ? 1 : 2;
    }

    SplitResult result;
    for (auto* part : {&result.train, &result.validation, &result.test}) {
        part->n = set.n;
        part->bands = set.bands;
    }
    for (const Patch& p : set.patches) {
        PatchSet& dest = destination[p.scene_id] == 0   ? result.train
                         : destination[p.scene_id] == 1 ? result.validation
                                                        : result.test;
        dest.patches.push_back(p);
    }
    return result;
}

void save_patches(const PatchSet& set, const std::filesystem::path& path) {
    set.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
    out.write(kMagic, 4);
    write_u32(out, static_cast<uint32_t>(set.size()));
    write_u32(out, set.n);
    write_u32(out, set.bands);
    for (const Patch& p : set.patches) {
        const uint8_t label = static_cast<uint8_t>(p.label);
        const uint8_t augmented = p.augmented ? 1 : 0;
        out.write(reinterpret_cast<const char*>(&label), 1);
        write_u32(out, p.scene_id);
        write_u32(out, p.row);
        write_u32(out, p.col);
        out.write(reinterpret_cast<const char*>(&augmented), 1);
        out.write(reinterpret_cast<const char*>(p.data.data()),
                  static_cast<std::streamsize>(p.data.size() * sizeof(float)));
    }
    if (!out) fail(errc::io_failure, "write failed for " + path.string());
}

PatchSet load_patches(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_failure, "cannot open " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        fail(errc::bad_magic, "not a patch container (bad magic)");

    PatchSet set;
    const uint32_t count = read_u32(in);
    set.n = read_u32(in);
    set.bands = read_u32(in);
    if (set.n == 0 || set.bands == 0) fail(errc::bad_argument, "zero patch dimensions");
    const uint64_t per_patch = static_cast<uint64_t>(set.n) * set.n * set.bands;
    if (per_patch * std::max<uint64_t>(count, 1) > kMaxPatchElements)
        fail(errc::dim_overflow, "patch container too large");

    set.patches.resize(count);
    for (uint32_t i = 0; i < count; ++i) {
        Patch& p = set.patches[i];
        p.n = set.n;
        p.bands = set.bands;
        p.label = static_cast<int>(read_u8(in));
        p.scene_id = read_u32(in);
        p.row = read_u32(in);
        p.col = read_u32(in);
        p.augmented = read_u8(in) != 0;
        p.data.resize(per_patch);
        in.read(reinterpret_cast<char*>(p.data.data()),
                static_cast<std::streamsize>(per_patch * sizeof(float)));
        if (!in) fail(errc::truncated, "file ended inside patch payload");
    }
    set.validate();
    return set;
}

}  // namespace hsi
