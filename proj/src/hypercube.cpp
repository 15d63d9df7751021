#include "hsi/hypercube.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "HSC/HPS readers assume a little-endian host");

namespace hsi {

namespace {

constexpr char kMagic[4] = {'H', 'S', 'C', '1'};
constexpr uint64_t kMaxElements = uint64_t{1} << 31;

void write_bytes(std::ofstream& out, const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& in, void* p, size_t n, const char* what) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n)
        fail(errc::truncated, std::string("truncated file while reading ") + what);
}

}  // namespace

const char* errc_name(errc c) {
    switch (c) {
        case errc::bad_magic: return "bad_magic";
        case errc::truncated: return "truncated";
        case errc::non_finite: return "non_finite";
        case errc::dim_overflow: return "dim_overflow";
        case errc::dim_mismatch: return "dim_mismatch";
        case errc::bad_wavelengths: return "bad_wavelengths";
        case errc::negative_value: return "negative_value";
        case errc::index_out_of_range: return "index_out_of_range";
        case errc::io_failure: return "io_failure";
        case errc::bad_argument: return "bad_argument";
        case errc::empty_input: return "empty_input";
        case errc::single_class: return "single_class";
        case errc::zero_norm: return "zero_norm";
        case errc::k_exceeds_pixels: return "k_exceeds_pixels";
        case errc::not_foreground: return "not_foreground";
        case errc::bad_label: return "bad_label";
    }
    return "unknown";
}

void SpectralCurve::validate() const {
    if (wavelengths_nm.size() != values.size())
        fail(errc::dim_mismatch, "curve wavelength/value length mismatch");
    for (float v : values)
        if (!std::isfinite(v)) fail(errc::non_finite, "non-finite curve value");
}

uint64_t Mask::count_true() const {
    uint64_t n = 0;
    for (uint8_t b : bits) n += b;
    return n;
}

HyperCube HyperCube::create(uint32_t height, uint32_t width, uint32_t bands,
                            CubeKind kind, std::vector<float> wavelengths_nm) {
    if (height == 0 || width == 0 || bands == 0)
        fail(errc::bad_argument, "cube dimensions must be nonzero");
    const uint64_t total = uint64_t{height} * width * bands;
    if (total > kMaxElements)
        fail(errc::dim_overflow, "cube dimensions overflow the element cap");
    if (wavelengths_nm.size() != bands)
        fail(errc::dim_mismatch, "wavelength count != bands");
    for (size_t b = 1; b < wavelengths_nm.size(); ++b)
        if (!(wavelengths_nm[b] > wavelengths_nm[b - 1]))
            fail(errc::bad_wavelengths, "wavelengths must be strictly increasing");

    HyperCube cube;
    cube.height = height;
    cube.width = width;
    cube.bands = bands;
    cube.kind = kind;
    cube.wavelengths_nm = std::move(wavelengths_nm);
    cube.data.assign(static_cast<size_t>(total), 0.0f);
    return cube;
}

void HyperCube::validate_values() const {
    for (float v : data) {
        if (!std::isfinite(v)) fail(errc::non_finite, "non-finite cube value");
        if (kind == CubeKind::reflectance && v < 0.0f)
            fail(errc::negative_value, "negative reflectance value");
    }
}

std::vector<float> default_wavelengths(uint32_t bands) {
    std::vector<float> wl(bands);
    const double lo = 690.0, hi = 840.0;
    for (uint32_t b = 0; b < bands; ++b) {
        wl[b] = static_cast<float>(
            bands == 1 ? lo : lo + (hi - lo) * static_cast<double>(b) / (bands - 1));
    }
    return wl;
}

SpectralCurve pixel_spectrum(const HyperCube& cube, uint32_t r, uint32_t c) {
    if (r >= cube.height || c >= cube.width)
        fail(errc::index_out_of_range, "pixel_spectrum index out of range");
    SpectralCurve curve;
    curve.wavelengths_nm = cube.wavelengths_nm;
    auto spec = cube.spectrum(r, c);
    curve.values.assign(spec.begin(), spec.end());
    return curve;
}

void save_cube(const HyperCube& cube, const std::filesystem::path& path) {
    if (cube.height == 0 || cube.width == 0 || cube.bands == 0)
        fail(errc::bad_argument, "refusing to save cube with zero extent");
    if (cube.data.size() != static_cast<size_t>(cube.height) * cube.width * cube.bands)
        fail(errc::dim_mismatch, "cube payload size inconsistent with dimensions");

    std::ofstream out(path, std::ios::binary);
    if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
    write_bytes(out, kMagic, 4);
    write_bytes(out, &cube.height, 4);
    write_bytes(out, &cube.width, 4);
    write_bytes(out, &cube.bands, 4);
    const uint8_t kind = static_cast<uint8_t>(cube.kind);
    write_bytes(out, &kind, 1);
    write_bytes(out, cube.wavelengths_nm.data(), cube.wavelengths_nm.size() * 4);
    write_bytes(out, cube.data.data(), cube.data.size() * 4);
    if (!out) fail(errc::io_failure, "write failed: " + path.string());
}

HyperCube load_cube(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_failure, "cannot open " + path.string());

    char magic[4];
    read_bytes(in, magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        fail(errc::bad_magic, "not an HSC file: " + path.string());

    uint32_t h, w, b;
    uint8_t kind_byte;
    read_bytes(in, &h, 4, "height");
    read_bytes(in, &w, 4, "width");
    read_bytes(in, &b, 4, "bands");
    read_bytes(in, &kind_byte, 1, "kind");
    if (h == 0 || w == 0 || b == 0)
        fail(errc::bad_argument, "HSC file has a zero dimension");
    if (uint64_t{h} * w * b > kMaxElements)
        fail(errc::dim_overflow, "HSC dimensions overflow the element cap");
    if (kind_byte > 1) fail(errc::bad_argument, "unknown cube kind byte");

    std::vector<float> wl(b);
    read_bytes(in, wl.data(), static_cast<size_t>(b) * 4, "wavelengths");

    HyperCube cube = HyperCube::create(h, w, b, static_cast<CubeKind>(kind_byte), std::move(wl));
    read_bytes(in, cube.data.data(), cube.data.size() * 4, "payload");
    cube.validate_values();
    return cube;
}

void save_mask_pgm(const Mask& mask, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<uint8_t> row(mask.width);
    for (uint32_t r = 0; r < mask.height; ++r) {
        for (uint32_t c = 0; c < mask.width; ++c)
            row[c] = mask.at(r, c) ? 255 : 0;
        write_bytes(out, row.data(), row.size());
    }
    if (!out) fail(errc::io_failure, "write failed: " + path.string());
}

namespace {

int pgm_next_token(std::ifstream& in, std::string& token) {
    token.clear();
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {  // comment to end of line
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!token.empty()) return 0;
            continue;
        }
        token.push_back(static_cast<char>(ch));
    }
    return token.empty() ? -1 : 0;
}

}  // namespace

Mask load_mask_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_failure, "cannot open " + path.string());
    std::string tok;
    if (pgm_next_token(in, tok) != 0 || tok != "P5")
        fail(errc::bad_magic, "not a binary PGM: " + path.string());
    uint32_t w = 0, h = 0, maxval = 0;
    auto parse_u32 = [&](uint32_t& out_val, const char* what) {
        if (pgm_next_token(in, tok) != 0) fail(errc::truncated, std::string("PGM missing ") + what);
        out_val = static_cast<uint32_t>(std::stoul(tok));
    };
    parse_u32(w, "width");
    parse_u32(h, "height");
    parse_u32(maxval, "maxval");
    if (maxval != 255) fail(errc::bad_argument, "mask PGM must have maxval 255");

    Mask mask(h, w);
    std::vector<uint8_t> row(w);
    for (uint32_t r = 0; r < h; ++r) {
        in.read(reinterpret_cast<char*>(row.data()), w);
        if (static_cast<uint32_t>(in.gcount()) != w)
            fail(errc::truncated, "PGM payload truncated");
        for (uint32_t c = 0; c < w; ++c) mask.set(r, c, row[c] > 127);
    }
    return mask;
}

void save_curve_csv(const SpectralCurve& curve, const std::filesystem::path& path) {
    curve.validate();
    std::ofstream out(path);
    if (!out) fail(errc::io_failure, "cannot open " + path.string() + " for writing");
    out << "wavelength_nm,value\n";
    char line[80];
    for (size_t i = 0; i < curve.size(); ++i) {
        std::snprintf(line, sizeof(line), "%.9g,%.9g\n",
                      static_cast<double>(curve.wavelengths_nm[i]),
                      static_cast<double>(curve.values[i]));
        out << line;
    }
    if (!out) fail(errc::io_failure, "write failed: " + path.string());
}

SpectralCurve load_curve_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io_failure, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) fail(errc::truncated, "empty curve CSV");
    SpectralCurve curve;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) fail(errc::bad_argument, "malformed curve CSV row");
        curve.wavelengths_nm.push_back(std::stof(line.substr(0, comma)));
        curve.values.push_back(std::stof(line.substr(comma + 1)));
    }
    curve.validate();
    return curve;
}

double mask_iou(const Mask& a, const Mask& b) {
    if (a.height != b.height || a.width != b.width)
        fail(errc::dim_mismatch, "mask_iou dimension mismatch");
    uint64_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.bits.size(); ++i) {
        const bool pa = a.bits[i] != 0, pb = b.bits[i] != 0;
        inter += (pa && pb) ? 1 : 0;
        uni += (pa || pb) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace hsi
