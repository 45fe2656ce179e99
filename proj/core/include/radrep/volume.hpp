#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace radrep {

/// Millimetres per voxel along x, y and z.
struct Spacing {
    double dx = 1.0;
    double dy = 1.0;
    double dz = 1.0;

    double voxel_volume_mm3() const noexcept { return dx * dy * dz; }
    bool valid() const noexcept;
    bool operator==(const Spacing&) const = default;
};

/// Component-wise comparison with a relative tolerance; NIfTI stores spacing
/// as float32, so loaded grids differ from in-memory ones in the last bits.
bool approx_equal(const Spacing& a, const Spacing& b, double rel_tol = 1e-5) noexcept;

struct Dims {
    std::int64_t nx = 0;
    std::int64_t ny = 0;
    std::int64_t nz = 0;

    std::size_t count() const noexcept {
        return static_cast<std::size_t>(nx * ny * nz);
    }
    bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
        return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz;
    }
    std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
        return static_cast<std::size_t>(x + nx * (y + ny * z));
    }
    bool operator==(const Dims&) const = default;
};

struct Index3 {
    std::int64_t x = 0;
    std::int64_t y = 0;
    std::int64_t z = 0;
    bool operator==(const Index3&) const = default;
};

/// Row-major 4x4 voxel-to-world matrix.
using Affine = std::array<double, 16>;

Affine diagonal_affine(const Spacing& s);
bool affine_invertible(const Affine& a);
/// True when every column of the 3x3 part has exactly one non-negligible entry.
bool affine_axis_aligned(const Affine& a);

/// Shape, voxel size and placement shared by a volume and its masks.
struct Grid {
    Dims dims;
    Spacing spacing;
    Affine affine = diagonal_affine(Spacing{});

    bool same_lattice(const Grid& other) const noexcept {
        return dims == other.dims && approx_equal(spacing, other.spacing);
    }
};

/// CT intensities in Hounsfield units on a regular grid.
class Volume {
public:
    Volume() = default;
    Volume(Grid grid, std::vector<float> data);

    const Grid& grid() const noexcept { return grid_; }
    const Dims& dims() const noexcept { return grid_.dims; }
    const Spacing& spacing() const noexcept { return grid_.spacing; }
    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }

    float at(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
        return data_[grid_.dims.index(x, y, z)];
    }

private:
    Grid grid_;
    std::vector<float> data_;
};

/// Binary per-voxel annotation of one structure. Bits are stored as 0/1 bytes.
class Mask {
public:
    Mask() = default;
    Mask(Grid grid, std::string label);
    Mask(Grid grid, std::vector<std::uint8_t> bits, std::string label);

    const Grid& grid() const noexcept { return grid_; }
    const Dims& dims() const noexcept { return grid_.dims; }
    const Spacing& spacing() const noexcept { return grid_.spacing; }
    const std::string& label() const noexcept { return label_; }
    void set_label(std::string label);

    std::span<const std::uint8_t> bits() const noexcept { return bits_; }
    std::span<std::uint8_t> bits() noexcept { return bits_; }

    bool at(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
        return bits_[grid_.dims.index(x, y, z)] != 0;
    }
    /// Out-of-grid reads are background.
    bool get(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
        return grid_.dims.contains(x, y, z) && at(x, y, z);
    }
    void set(std::int64_t x, std::int64_t y, std::int64_t z, bool v) noexcept {
        bits_[grid_.dims.index(x, y, z)] = v ? 1 : 0;
    }

    std::size_t count() const noexcept;
    bool empty() const noexcept { return count() == 0; }

    bool operator==(const Mask& other) const;

private:
    Grid grid_;
    std::vector<std::uint8_t> bits_;
    std::string label_;
};

/// Axis-aligned voxel bounding box, inclusive on both ends.
struct BoundingBox {
    Index3 lo;
    Index3 hi;
    bool empty = true;
};

BoundingBox bounding_box(const Mask& m);

/// Sub-grid copy of `m` covering `box` expanded by `pad` voxels (clipped).
/// `origin` receives the index of the crop's first voxel in the source grid.
Mask crop(const Mask& m, const BoundingBox& box, std::int64_t pad, Index3& origin);

/// count(true) * dx * dy * dz in mm^3.
double physical_volume_mm3(const Mask& m);

/// Nearest-neighbour resampling onto ceil(n * old / new) voxels per axis.
/// Cells are aligned at the grid's origin corner.
Mask resample_isotropic(const Mask& m, const Spacing& target);

/// Trilinear counterpart of resample_isotropic for HU volumes, using the same
/// output lattice.
Volume resample_isotropic(const Volume& v, const Spacing& target);

/// Lattice produced by resample_isotropic for a given source grid.
Grid resampled_grid(const Grid& source, const Spacing& target);

}  // namespace radrep
