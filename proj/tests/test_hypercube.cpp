#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "hsi/hypercube.hpp"
#include "hsi/rng.hpp"

using namespace hsi;
using hsi_test::TempDir;

namespace {

errc thrown_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an hsi::Error");
    return errc::io_failure;
}

void patch_file(const std::filesystem::path& path, std::streamoff offset,
                const void* bytes, size_t count) {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    REQUIRE(f.good());
    f.seekp(offset);
    f.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(count));
}

}  // namespace

TEST_SUITE_BEGIN("hypercube");

TEST_CASE("save/load round trip is bit exact") {
    TempDir dir("cube_roundtrip");
    const HyperCube cube = hsi_test::random_cube(13, 17, 11, 5);
    save_cube(cube, dir / "c.hsc");
    const HyperCube back = load_cube(dir / "c.hsc");
    CHECK(back.height == cube.height);
    CHECK(back.width == cube.width);
    CHECK(back.bands == cube.bands);
    CHECK(back.kind == cube.kind);
    CHECK(back.wavelengths_nm == cube.wavelengths_nm);
    REQUIRE(back.data.size() == cube.data.size());
    CHECK(std::memcmp(back.data.data(), cube.data.data(),
                      cube.data.size() * sizeof(float)) == 0);
}

TEST_CASE("full-size cube carries its dimensions through the file") {
    TempDir dir("cube_full");
    HyperCube cube = HyperCube::create(216, 409, 11, CubeKind::raw_dn, default_wavelengths(11));
    cube.data[0] = 0.25f;
    save_cube(cube, dir / "c.hsc");
    const HyperCube back = load_cube(dir / "c.hsc");
    CHECK(back.height == 216);
    CHECK(back.width == 409);
    CHECK(back.bands == 11);
    CHECK(back.data[0] == 0.25f);
}

TEST_CASE("constant cube writes the constant bit pattern") {
    TempDir dir("cube_const");
    const HyperCube cube = hsi_test::constant_cube(3, 4, 2, 1.0f);
    save_cube(cube, dir / "c.hsc");
    std::ifstream in(dir / "c.hsc", std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    const size_t header = 4 + 3 * 4 + 1 + 2 * 4;
    REQUIRE(bytes.size() == header + 3 * 4 * 2 * 4);
    const float one = 1.0f;
    for (size_t off = header; off < bytes.size(); off += 4)
        CHECK(std::memcmp(bytes.data() + off, &one, 4) == 0);
}

TEST_CASE("bad magic is rejected") {
    TempDir dir("cube_magic");
    save_cube(hsi_test::random_cube(4, 4, 3, 1), dir / "c.hsc");
    patch_file(dir / "c.hsc", 0, "XXXX", 4);
    CHECK(thrown_code([&] { load_cube(dir / "c.hsc"); }) == errc::bad_magic);
}

TEST_CASE("truncated payload is rejected") {
    TempDir dir("cube_trunc");
    save_cube(hsi_test::random_cube(4, 4, 3, 1), dir / "c.hsc");
    const auto full = std::filesystem::file_size(dir / "c.hsc");
    std::filesystem::resize_file(dir / "c.hsc", full - 7);
    CHECK(thrown_code([&] { load_cube(dir / "c.hsc"); }) == errc::truncated);
}

TEST_CASE("non-finite payload is rejected") {
    TempDir dir("cube_nan");
    save_cube(hsi_test::random_cube(4, 4, 3, 1), dir / "c.hsc");
    const uint32_t nan_bits = 0x7fc00000u;
    const std::streamoff payload = 4 + 12 + 1 + 3 * 4;
    patch_file(dir / "c.hsc", payload, &nan_bits, 4);
    CHECK(thrown_code([&] { load_cube(dir / "c.hsc"); }) == errc::non_finite);
}

TEST_CASE("zero-sized dimensions are rejected at construction") {
    CHECK(thrown_code([] {
              HyperCube::create(0, 0, 11, CubeKind::raw_dn, default_wavelengths(11));
          }) == errc::bad_argument);
    CHECK(thrown_code([] {
              HyperCube::create(4, 4, 0, CubeKind::raw_dn, {});
          }) == errc::bad_argument);
}

TEST_CASE("wavelengths must be strictly increasing") {
    CHECK(thrown_code([] {
              HyperCube::create(2, 2, 2, CubeKind::raw_dn, {700.0f, 700.0f});
          }) == errc::bad_wavelengths);
}

TEST_CASE("pixel_spectrum matches flat-index arithmetic") {
    const HyperCube cube = hsi_test::random_cube(9, 14, 7, 21);
    Rng rng(3);
    for (int t = 0; t < 1000; ++t) {
        const auto r = static_cast<uint32_t>(rng.uniform_int(0, 8));
        const auto c = static_cast<uint32_t>(rng.uniform_int(0, 13));
        const auto b = static_cast<uint32_t>(rng.uniform_int(0, 6));
        const SpectralCurve curve = pixel_spectrum(cube, r, c);
        CHECK(curve.values[b] == cube.data[((size_t{r} * 14) + c) * 7 + b]);
    }
}

TEST_CASE("pixel_spectrum trivia") {
    const HyperCube constant = hsi_test::constant_cube(3, 3, 5, 0.7f);
    for (float v : pixel_spectrum(constant, 1, 2).values) CHECK(v == 0.7f);

    HyperCube ramp = HyperCube::create(2, 2, 4, CubeKind::raw_dn, default_wavelengths(4));
    for (uint32_t r = 0; r < 2; ++r)
        for (uint32_t c = 0; c < 2; ++c)
            for (uint32_t b = 0; b < 4; ++b) ramp.at(r, c, b) = static_cast<float>(b);
    const SpectralCurve curve = pixel_spectrum(ramp, 0, 1);
    for (uint32_t b = 0; b < 4; ++b) CHECK(curve.values[b] == static_cast<float>(b));

    CHECK(thrown_code([&] { pixel_spectrum(ramp, 2, 0); }) == errc::index_out_of_range);
}

TEST_CASE("mask PGM round trip") {
    TempDir dir("mask_rt");
    Mask mask(11, 23);
    Rng rng(8);
    for (auto& bit : mask.bits) bit = rng.uniform_int(0, 1) ? 1 : 0;
    save_mask_pgm(mask, dir / "m.pgm");
    const Mask back = load_mask_pgm(dir / "m.pgm");
    CHECK(back.height == mask.height);
    CHECK(back.width == mask.width);
    CHECK(back.bits == mask.bits);
}

TEST_CASE("curve CSV round trip with header") {
    TempDir dir("curve_rt");
    SpectralCurve curve;
    curve.wavelengths_nm = default_wavelengths(11);
    Rng rng(4);
    for (int i = 0; i < 11; ++i)
        curve.values.push_back(static_cast<float>(rng.uniform(0.0, 2.0)));
    save_curve_csv(curve, dir / "c.csv");

    std::ifstream in(dir / "c.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "wavelength_nm,value");

    const SpectralCurve back = load_curve_csv(dir / "c.csv");
    REQUIRE(back.size() == curve.size());
    for (size_t i = 0; i < curve.size(); ++i) {
        CHECK(back.wavelengths_nm[i] == curve.wavelengths_nm[i]);  // %.9g is float-exact
        CHECK(back.values[i] == curve.values[i]);
    }
}

TEST_CASE("mask_iou counts overlap") {
    Mask a(2, 2), b(2, 2);
    a.set(0, 0, true);
    a.set(0, 1, true);
    b.set(0, 1, true);
    b.set(1, 0, true);
    CHECK(mask_iou(a, b) == doctest::Approx(1.0 / 3.0));
    CHECK(mask_iou(a, a) == doctest::Approx(1.0));
}

TEST_SUITE_END();
