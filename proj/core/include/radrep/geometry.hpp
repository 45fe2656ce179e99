#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "radrep/volume.hpp"

namespace radrep::geometry {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

/// Voxel centres in millimetres, index * spacing. The affine is not applied:
/// axes are treated as axis-aligned.
Vec3 voxel_center_mm(const Spacing& s, std::int64_t x, std::int64_t y, std::int64_t z);
std::vector<Vec3> foreground_points_mm(const Mask& m);

/// Point clouds above this size are subsampled (seeded, uniform) for PCA.
inline constexpr std::size_t kPcaSampleLimit = 100'000;

/// Unit eigenvector of the covariance with the largest eigenvalue, signed so
/// its largest-magnitude component is positive. Throws DegenerateCloud when
/// all points coincide.
Vec3 principal_axis(std::span<const Vec3> points);

/// Covariance eigenvalues in descending order.
Vec3 covariance_spectrum(std::span<const Vec3> points);

/// Maps a point p to R * p + t.
struct RigidTransform {
    Mat3 rotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    Vec3 translation{0, 0, 0};

    Vec3 apply(const Vec3& p) const noexcept;
    Vec3 apply_inverse(const Vec3& q) const noexcept;
    RigidTransform inverse() const noexcept;
};

/// Rotation taking unit vector `from` onto unit vector `to`, minimal angle.
Mat3 rotation_between(const Vec3& from, const Vec3& to);

/// A mask resampled into a rotated frame. The transform maps source-grid
/// millimetre coordinates to aligned-grid millimetre coordinates, where the
/// aligned voxel j sits at j * spacing.
struct AlignedMask {
    Mask mask;
    RigidTransform transform;
    Grid source_grid;
};

/// Rotates the mask about its centre of mass so its principal axis lies on +x,
/// resampled nearest-neighbour into an isotropic grid (pitch = finest source
/// spacing) padded to contain the rotated bounding box.
/// Throws EmptyInput for an empty mask.
AlignedMask align_to_x(const Mask& m);

/// Same construction with an explicit axis and pivot. Used to carry companion
/// structures into an existing frame.
AlignedMask align_axis_to_x(const Mask& m, const Vec3& axis, const Vec3& pivot);

/// Resamples `source` into the frame of `frame` (same transform, grid and pitch).
Mask resample_into(const Mask& source, const AlignedMask& frame);

/// Nearest-neighbour pullback of an aligned-frame mask onto `target`. Target
/// voxels whose image falls outside the aligned grid are background.
Mask apply_inverse(const RigidTransform& t, const Mask& aligned, const Grid& target);

struct Extent {
    double min_mm = 0;
    double max_mm = 0;
    double mid_mm = 0;
};

enum class Axis { X = 0, Y = 1, Z = 2 };

/// Extent of voxel centres along an axis. Throws EmptyInput for an empty mask.
Extent project_extent(const Mask& m, Axis axis);

Vec3 center_of_mass_mm(const Mask& m);

double dot(const Vec3& a, const Vec3& b) noexcept;
Vec3 cross(const Vec3& a, const Vec3& b) noexcept;
double norm(const Vec3& a) noexcept;

/// Jaccard index |a & b| / |a | b|; 1 for two empty masks.
double jaccard(const Mask& a, const Mask& b);

}  // namespace radrep::geometry
