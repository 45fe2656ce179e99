#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "radrep/volume.hpp"

namespace radrep {

enum class Organ { Liver, Pancreas, Kidney };

std::string_view organ_name(Organ o) noexcept;
/// Accepts "liver", "pancreas", "kidney"/"kidneys". Throws UnknownOrgan.
Organ parse_organ(std::string_view name);

/// Rounds half away from zero to the given number of decimals.
double round_to(double value, int decimals);

}  // namespace radrep

namespace radrep::measurement {

/// One 26-connected tumour component, stored cropped to its bounding box.
struct TumorInstance {
    Mask mask;            // cropped grid; same spacing as the parent
    Index3 origin;        // parent index of mask voxel (0, 0, 0)
    Grid parent_grid;
    Organ organ = Organ::Liver;
    int instance_id = 0;  // 1-based, in order of decreasing size
    std::size_t voxel_count = 0;

    /// Parent-grid linear indices of every voxel of the instance.
    std::vector<std::size_t> parent_indices() const;
    /// Instance painted back onto the full parent grid.
    Mask to_parent() const;
};

/// Reported WHO size and companion statistics. Lengths in cm rounded to 0.1,
/// volume to 0.001 cm^3, HU to 0.01.
struct TumorMeasurement {
    double d_max_cm = 0;
    double d_perp_cm = 0;
    std::int64_t slice_index = 0;
    double volume_cm3 = 0;
    double hu_mean = 0;
    double hu_std = 0;

    bool operator==(const TumorMeasurement&) const = default;
};

/// Unrounded per-slice diameter search result on a measurement grid.
struct AxialDiameters {
    double d_max_mm = 0;
    double d_perp_mm = 0;
    std::int64_t slice = 0;  // z index in the measured grid
    std::array<double, 2> end_a{};
    std::array<double, 2> end_b{};
    bool degenerate = false;
};

/// One instance per 26-connected component, largest first; equal sizes keep
/// raster order of their first voxel.
std::vector<TumorInstance> split_instances(const Mask& tumor_mask, Organ organ);

/// Longest border-to-border distance per axial slice, its slice, and the
/// support width perpendicular to it. The mask must have equal x/y spacing.
/// Throws EmptyInput.
AxialDiameters axial_diameters(const Mask& m);

/// Squared diameter of a point set in integer grid units, O(n^2).
std::int64_t brute_force_diameter_sq(const std::vector<std::array<std::int64_t, 2>>& pts);

/// Border pixels of axial slice z as integer (x, y) coordinates.
std::vector<std::array<std::int64_t, 2>> border_points(const Mask& m, std::int64_t z);

/// Resamples the instance to `grid_mm` and measures D x d; the slice index is
/// mapped back to the native z axis. Volume is counted on the native grid.
/// HU fields are left at zero. Throws EmptyInput.
TumorMeasurement measure_who(const TumorInstance& inst, const Spacing& grid_mm = {1, 1, 1});

/// count * dx * dy * dz / 1000, unrounded.
double physical_volume_cm3(const Mask& m);

struct Attenuation {
    double mean = 0;
    double std = 0;  // population standard deviation
};

/// HU statistics over masked voxels on the native grid. Throws EmptyInput.
Attenuation attenuation_stats(const Volume& v, const Mask& m);
Attenuation attenuation_stats(const Volume& v, const TumorInstance& inst);
Attenuation attenuation_stats(const Volume& v, std::span<const std::size_t> indices);

/// measure_who plus rounded HU statistics.
TumorMeasurement measure_instance(const TumorInstance& inst, const Volume& v,
                                  const Spacing& grid_mm = {1, 1, 1});

}  // namespace radrep::measurement
