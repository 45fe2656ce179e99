#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "radrep/geometry.hpp"
#include "radrep/measurement.hpp"
#include "radrep/volume.hpp"

namespace radrep::subsegment {

enum class HeadSide { LowX, HighX };

/// Exact partition of a pancreas mask on its native grid.
struct PancreasSubsegments {
    Mask head;
    Mask body;
    Mask tail;
    HeadSide head_side = HeadSide::LowX;
    double head_body_plane_mm = 0;  // aligned-frame x
    double body_tail_plane_mm = 0;  // aligned-frame x
};

/// Head side in the aligned frame. Compares pancreas voxel counts in a slab of
/// kOrientSlabMm on either side of the plane; ties go to the side holding the
/// SMA centroid, then to low x.
inline constexpr double kOrientSlabMm = 20.0;
HeadSide orient_head(const Mask& pancreas_aligned, double plane_x_mm, double sma_centroid_x_mm);
/// Mask form: the plane is the SMA x-projection midpoint.
HeadSide orient_head(const Mask& pancreas_aligned, const Mask& sma_aligned);

/// Head/body/tail split driven by the SMA landmark.
/// Throws EmptyInput (pancreas), SubsegmentationUnavailable (no SMA at or
/// above the pancreas), GridMismatch.
PancreasSubsegments subsegment_pancreas(const Mask& pancreas, const Mask& sma);

/// Named, disjoint segments of one organ stored as a label map (0 = none,
/// k = names[k - 1]).
class SubsegmentMap {
public:
    SubsegmentMap() = default;

    /// Throws GridMismatch, or InvalidArgument when segments overlap or more
    /// than 255 are given.
    static SubsegmentMap from_masks(std::string organ, const std::vector<Mask>& segments);
    static SubsegmentMap from_pancreas(const PancreasSubsegments& p);

    const std::string& organ() const noexcept { return organ_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const Grid& grid() const noexcept { return grid_; }
    std::uint8_t label_at(std::size_t index) const noexcept { return labels_[index]; }
    Mask segment(std::size_t k) const;

    /// True when the union of all segments equals `organ_mask` voxelwise.
    bool covers_exactly(const Mask& organ_mask) const;

private:
    std::string organ_;
    Grid grid_;
    std::vector<std::string> names_;
    std::vector<std::uint8_t> labels_;
};

struct SegmentOverlap {
    std::string segment;
    double fraction = 0;  // intersecting voxels / tumour voxels
    bool operator==(const SegmentOverlap&) const = default;
};

/// Every segment hit by the tumour, by descending overlap; ties keep segment
/// order. Throws GridMismatch.
std::vector<SegmentOverlap> localize_tumor(const measurement::TumorInstance& inst,
                                           const SubsegmentMap& segmap);

}  // namespace radrep::subsegment
