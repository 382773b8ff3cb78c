#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace longdiff {

struct Shape3 {
    std::uint32_t depth = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(depth) * height * width;
    }
    bool operator==(const Shape3&) const = default;
    std::string str() const;
};

// Dense 3D scalar field, depth-major storage (z slowest, x fastest).
// Data volumes hold intensities in [-1, 1]; intermediate sampler states may
// leave that range. Spacing is physical voxel size in millimeters, carried
// as metadata only.
struct Volume {
    Shape3 shape;
    std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};
    std::vector<float> voxels;

    static Volume zeros(Shape3 shape);
    static Volume filled(Shape3 shape, float value);

    float& at(std::uint32_t z, std::uint32_t y, std::uint32_t x) {
        return voxels[(static_cast<std::size_t>(z) * shape.height + y) * shape.width + x];
    }
    float at(std::uint32_t z, std::uint32_t y, std::uint32_t x) const {
        return voxels[(static_cast<std::size_t>(z) * shape.height + y) * shape.width + x];
    }

    float min() const;
    float max() const;
    float max_abs() const;
    bool all_finite() const;
};

// Gaussian noise field paired with a volume of the same shape.
using NoiseSample = Volume;

// Throws std::invalid_argument naming `what` when shapes differ.
void require_same_shape(const Volume& a, const Volume& b, const char* what);

// Clamp voxels into [-1, 1]; used only when exporting a sampler output as a
// data volume.
Volume clamp_to_data_range(const Volume& v);

// --- LVOL container ------------------------------------------------------
// magic "LVOL", version u16, shape 3xu32 (depth, height, width),
// spacing 3xf32, voxels f32, everything little-endian, depth-major order.
inline constexpr std::uint16_t kVolumeFormatVersion = 1;

void write_volume(const std::string& path, const Volume& v);
Volume read_volume(const std::string& path);

// Central axial slice mapped from [-1, 1] to 8-bit grayscale, binary PGM.
void write_mid_slice_pgm(const std::string& path, const Volume& v);

}  // namespace longdiff
