#pragma once

// Sliding-window patch extraction with the full-foreground rule, label
// inheritance, bounded shift/rotate augmentation, flattening, and the 6:2:2
// split.
//
// PatchSet container format (HPS, little-endian):
//   magic "HPS1"
//   u32 patch count, u32 n (side length), u32 bands
//   per patch: u8 label, u32 scene_id, u32 row, u32 col, u8 augmented,
//              n*n*bands f32 values (row-major spatial, bands contiguous
//              per pixel — same BIP order as the parent cube)

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "hsi/hypercube.hpp"

namespace hsi {

struct Patch {
    uint32_t n = 0;
    uint32_t bands = 0;
    std::vector<float> data;  // n*n*bands, BIP
    int label = 1;
    uint32_t scene_id = 0;
    uint32_t row = 0;
    uint32_t col = 0;
    bool augmented = false;

    void validate() const;
};

struct PatchSet {
    std::vector<Patch> patches;
    uint32_t n = 0;
    uint32_t bands = 0;

    std::map<int, uint64_t> class_counts() const;
    size_t size() const { return patches.size(); }
    void append(Patch p);
    void validate() const;
};

struct SplitResult {
    PatchSet train;
    PatchSet validation;
    PatchSet test;
};

struct SplitRatios {
    uint32_t train = 6;
    uint32_t validation = 2;
    uint32_t test = 2;
};

// Windows anchored at multiples of stride with anchor+n inside the image; a
// window becomes a patch iff every one of its n*n mask bits is true.
PatchSet extract_patches(const HyperCube& cube, const Mask& mask, int label, uint32_t n,
                         uint32_t stride, uint32_t scene_id = 0);
PatchSet extract_patches_serial(const HyperCube& cube, const Mask& mask, int label, uint32_t n,
                                uint32_t stride, uint32_t scene_id = 0);

// Length n*n*bands; identical to the patch's storage order.
std::vector<float> flatten(const Patch& patch);

// Feature matrix (size() x n*n*bands, row-major) and labels for the set.
std::vector<float> flatten_set(const PatchSet& set);
std::vector<int> set_labels(const PatchSet& set);

// Deterministic core: shift the window by (dr, dc), then sample the parent
// cube through an inverse rotation of phi_deg about the shifted window
// center, nearest-neighbor, all bands through the identical transform.
// Returns nothing if any source sample leaves the image or the foreground.
std::optional<Patch> augment_patch_with(const HyperCube& cube, const Mask& mask, uint32_t row,
                                        uint32_t col, uint32_t n, int label, uint32_t scene_id,
                                        int dr, int dc, double phi_deg);

// Seeded draw: dr, dc uniform integers in [-max_shift_px, max_shift_px], then
// phi uniform in [-max_rot_deg, max_rot_deg], applied via augment_patch_with.
std::optional<Patch> augment_patch(const HyperCube& cube, const Mask& mask, uint32_t row,
                                   uint32_t col, uint32_t n, int label, uint32_t scene_id,
                                   uint64_t seed, int max_shift_px = 3, double max_rot_deg = 20.0);

// Appends `multiplicity` seeded augmentation draws per input patch (rejections
// skipped). Draw seeds derive from (seed, scene_id, row, col, draw) so the
// output is independent of scheduling. Scenes are looked up by scene_id.
struct ScenePixels {
    const HyperCube* cube = nullptr;
    const Mask* mask = nullptr;
};
PatchSet augment_training_set(const PatchSet& set, const std::vector<ScenePixels>& scenes,
                              uint32_t multiplicity, uint64_t seed, int max_shift_px = 3,
                              double max_rot_deg = 20.0);

// Seed-shuffled 6:2:2 assignment; per class when stratified. Counts use
// largest-remainder apportionment, so with k patches in a group every part
// holds either floor or ceil of its exact share (within 1 of 0.6k/0.2k/0.2k).
SplitResult split(const PatchSet& set, SplitRatios ratios, uint64_t seed, bool stratified = true);

// Leakage-free variant: whole scenes are assigned to one split; stratified by
// class at scene granularity.
SplitResult split_by_scene(const PatchSet& set, SplitRatios ratios, uint64_t seed);

void save_patches(const PatchSet& set, const std::filesystem::path& path);
PatchSet load_patches(const std::filesystem::path& path);

}  // namespace hsi
