#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "radrep/volume.hpp"

namespace radrep::morphology {

/// Box-shaped structuring element. Offsets covered along an axis of size s
/// with anchor a are [-a, s - 1 - a].
struct StructuringElement {
    std::int64_t sx = 3, sy = 3, sz = 3;
    std::int64_t ax = 1, ay = 1, az = 1;

    /// s x s x s cube with anchor floor((s - 1) / 2) per axis.
    static StructuringElement cube(std::int64_t s);
    bool valid() const noexcept;
};

/// A voxel survives iff the element placed at it lies inside the mask.
/// Voxels outside the grid count as background.
Mask erode(const Mask& m, const StructuringElement& se);
/// Union of element translates over every foreground voxel, clipped to grid.
Mask dilate(const Mask& m, const StructuringElement& se);

Mask mask_and(const Mask& a, const Mask& b);
Mask mask_or(const Mask& a, const Mask& b);
Mask mask_and_not(const Mask& a, const Mask& b);
bool is_subset(const Mask& inner, const Mask& outer);
std::size_t overlap_count(const Mask& a, const Mask& b);

enum class Connectivity : int { Six = 6, Eighteen = 18, TwentySix = 26 };
enum class Connectivity2D : int { Four = 4, Eight = 8 };

struct LabeledComponents {
    std::vector<std::int32_t> labels;  // 0 = background, components 1..count
    std::int32_t count = 0;
    std::vector<std::size_t> sizes;  // sizes[k] = voxels carrying label k + 1
};

/// Labels are assigned in raster order of each component's first voxel, which
/// is lexicographic (z, y, x) order of component minima.
LabeledComponents connected_components(const Mask& m,
                                       Connectivity conn = Connectivity::TwentySix);

/// Foreground of the single component with the given label.
Mask component_mask(const Mask& like, const LabeledComponents& cc, std::int32_t label);
/// Largest component; ties go to the lower label. Empty input gives empty output.
Mask largest_component(const Mask& m, Connectivity conn = Connectivity::TwentySix);

/// Planar binary image, row-major in x.
struct Mask2D {
    std::int64_t nx = 0;
    std::int64_t ny = 0;
    std::vector<std::uint8_t> bits;

    Mask2D() = default;
    Mask2D(std::int64_t w, std::int64_t h) : nx(w), ny(h), bits(static_cast<std::size_t>(w * h), 0) {}

    bool at(std::int64_t x, std::int64_t y) const noexcept {
        return bits[static_cast<std::size_t>(x + nx * y)] != 0;
    }
    bool get(std::int64_t x, std::int64_t y) const noexcept {
        return x >= 0 && y >= 0 && x < nx && y < ny && at(x, y);
    }
    void set(std::int64_t x, std::int64_t y, bool v) noexcept {
        bits[static_cast<std::size_t>(x + nx * y)] = v ? 1 : 0;
    }
    std::size_t count() const noexcept;
    bool operator==(const Mask2D&) const = default;
};

Mask2D axial_slice(const Mask& m, std::int64_t z);

/// 3x3 erosion with out-of-image pixels as background.
Mask2D erode2d(const Mask2D& m);
/// m AND NOT erode2d(m); isolated pixels are entirely border.
Mask2D slice_border(const Mask2D& m);

struct LabeledComponents2D {
    std::vector<std::int32_t> labels;
    std::int32_t count = 0;
    std::vector<std::size_t> sizes;
};

LabeledComponents2D connected_components_2d(const Mask2D& m,
                                            Connectivity2D conn = Connectivity2D::Eight);

/// Topology-preserving thinning by iterated removal of simple points, swept
/// over the six face directions. Voxels with a single 26-neighbour at the
/// start of an iteration are kept as curve end points.
/// Throws EmptyInput for an empty mask.
Mask skeletonize(const Mask& m);

}  // namespace radrep::morphology
