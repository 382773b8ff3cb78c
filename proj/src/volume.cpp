#include "longdiff/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

#include "longdiff/errors.hpp"

namespace longdiff {

std::string Shape3::str() const {
    return std::to_string(depth) + "x" + std::to_string(height) + "x" +
           std::to_string(width);
}

Volume Volume::zeros(Shape3 shape) {
    Volume v;
    v.shape = shape;
    v.voxels.assign(shape.voxel_count(), 0.0f);
    return v;
}

Volume Volume::filled(Shape3 shape, float value) {
    Volume v;
    v.shape = shape;
    v.voxels.assign(shape.voxel_count(), value);
    return v;
}

float Volume::min() const {
    return *std::min_element(voxels.begin(), voxels.end());
}

float Volume::max() const {
    return *std::max_element(voxels.begin(), voxels.end());
}

float Volume::max_abs() const {
    float m = 0.0f;
    for (float v : voxels) m = std::max(m, std::abs(v));
    return m;
}

bool Volume::all_finite() const {
    for (float v : voxels) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void require_same_shape(const Volume& a, const Volume& b, const char* what) {
    if (!(a.shape == b.shape)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                    a.shape.str() + " vs " + b.shape.str());
    }
}

Volume clamp_to_data_range(const Volume& v) {
    Volume out = v;
    for (float& x : out.voxels) x = std::clamp(x, -1.0f, 1.0f);
    return out;
}

// --- little-endian primitives ---------------------------------------------

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u16(std::FILE* f, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    std::fwrite(b, 1, 2, f);
}

void put_u32(std::FILE* f, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    std::fwrite(b, 1, 4, f);
}

void put_f32(std::FILE* f, float v) {
    put_u32(f, std::bit_cast<std::uint32_t>(v));
}

bool get_bytes(std::FILE* f, void* dst, std::size_t n) {
    return std::fread(dst, 1, n, f) == n;
}

bool get_u16(std::FILE* f, std::uint16_t& v) {
    unsigned char b[2];
    if (!get_bytes(f, b, 2)) return false;
    v = static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    return true;
}

bool get_u32(std::FILE* f, std::uint32_t& v) {
    unsigned char b[4];
    if (!get_bytes(f, b, 4)) return false;
    v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
}

bool get_f32(std::FILE* f, float& v) {
    std::uint32_t bits;
    if (!get_u32(f, bits)) return false;
    v = std::bit_cast<float>(bits);
    return true;
}

}  // namespace

void write_volume(const std::string& path, const Volume& v) {
    if (v.voxels.size() != v.shape.voxel_count()) {
        throw std::invalid_argument("volume voxel count does not match its shape");
    }
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw data_error("cannot open for writing: " + path);
    std::fwrite("LVOL", 1, 4, f.get());
    put_u16(f.get(), kVolumeFormatVersion);
    put_u32(f.get(), v.shape.depth);
    put_u32(f.get(), v.shape.height);
    put_u32(f.get(), v.shape.width);
    for (float s : v.spacing) put_f32(f.get(), s);
    for (float x : v.voxels) put_f32(f.get(), x);
    if (std::ferror(f.get())) throw data_error("write failed: " + path);
}

Volume read_volume(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw data_error("cannot open for reading: " + path);

    char magic[4];
    if (!get_bytes(f.get(), magic, 4)) {
        throw truncated_error(path + ": file shorter than the magic bytes");
    }
    if (std::memcmp(magic, "LVOL", 4) != 0) {
        char found[32];
        std::snprintf(found, sizeof found, "%02x %02x %02x %02x",
                      static_cast<unsigned char>(magic[0]), static_cast<unsigned char>(magic[1]),
                      static_cast<unsigned char>(magic[2]), static_cast<unsigned char>(magic[3]));
        throw format_error(path + ": not an LVOL file (magic bytes " + found + ")");
    }

    std::uint16_t version;
    if (!get_u16(f.get(), version)) throw truncated_error(path + ": truncated header");
    if (version != kVolumeFormatVersion) {
        throw version_error(path + ": LVOL version " + std::to_string(version) +
                            ", expected " + std::to_string(kVolumeFormatVersion));
    }

    Volume v;
    if (!get_u32(f.get(), v.shape.depth) || !get_u32(f.get(), v.shape.height) ||
        !get_u32(f.get(), v.shape.width)) {
        throw truncated_error(path + ": truncated header");
    }
    for (float& s : v.spacing) {
        if (!get_f32(f.get(), s)) throw truncated_error(path + ": truncated header");
    }

    const std::size_t n = v.shape.voxel_count();
    if (n == 0) throw format_error(path + ": zero-sized volume");
    v.voxels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!get_f32(f.get(), v.voxels[i])) {
            throw truncated_error(path + ": payload truncated at voxel " +
                                  std::to_string(i) + " of " + std::to_string(n));
        }
    }
    return v;
}

void write_mid_slice_pgm(const std::string& path, const Volume& v) {
    if (v.shape.voxel_count() == 0) throw std::invalid_argument("empty volume");
    const std::uint32_t z = v.shape.depth / 2;
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw data_error("cannot open for writing: " + path);
    std::fprintf(f.get(), "P5\n%u %u\n255\n", v.shape.width, v.shape.height);
    for (std::uint32_t y = 0; y < v.shape.height; ++y) {
        for (std::uint32_t x = 0; x < v.shape.width; ++x) {
            const float t = std::clamp(v.at(z, y, x), -1.0f, 1.0f);
            const int g = static_cast<int>(std::lround((t + 1.0f) * 0.5f * 255.0f));
            const unsigned char byte = static_cast<unsigned char>(std::clamp(g, 0, 255));
            std::fwrite(&byte, 1, 1, f.get());
        }
    }
    if (std::ferror(f.get())) throw data_error("write failed: " + path);
}

}  // namespace longdiff
