#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "radrep/geometry.hpp"
#include "radrep/volume.hpp"

namespace radrep::phantom {

using geometry::Vec3;

/// SplitMix64 state stepping with Box-Muller normals. Streams are split per
/// structure by seeding with mix(seed, stream index).
class SplitMix64 {
public:
    static constexpr std::string_view kName = "splitmix64-boxmuller/1";

    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
    static SplitMix64 stream(std::uint64_t seed, std::uint64_t index) noexcept;

    std::uint64_t next() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Standard normal; the second Box-Muller value is cached.
    double normal() noexcept;

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0;
};

/// Solid primitive in millimetre coordinates (voxel centre = index * spacing).
struct Shape {
    enum class Kind { Ellipsoid, Tube, Union };

    Kind kind = Kind::Ellipsoid;
    // Ellipsoid: rotation applied as Rz * Ry * Rx with angles in degrees (z, y, x).
    Vec3 center{0, 0, 0};
    Vec3 semi_axes{1, 1, 1};
    Vec3 rotation_deg{0, 0, 0};
    // Tube: every point within `radius` of the polyline.
    std::vector<Vec3> points;
    double radius = 1;
    // Union.
    std::vector<Shape> parts;

    static Shape ellipsoid(Vec3 center, Vec3 semi_axes, Vec3 rotation_deg = {0, 0, 0});
    static Shape sphere(Vec3 center, double r) { return ellipsoid(center, {r, r, r}); }
    static Shape tube(std::vector<Vec3> points, double radius);
    static Shape union_of(std::vector<Shape> parts);

    /// Closed test: boundary points are inside.
    bool contains(const Vec3& p) const;
    void bounds(Vec3& lo, Vec3& hi) const;
    /// Closed-form volume in mm^3 for ellipsoids and straight tubes.
    std::optional<double> analytic_volume_mm3() const;
};

enum class Role { Organ, Vessel, Tumor };
std::string_view role_name(Role r) noexcept;

struct Normal {
    double mean = 0;
    double std = 0;
};

/// Isolated voxels scattered into a mask (segmentation noise). Positions use
/// their own seed so they do not change with the HU seed.
struct Salt {
    std::size_t count = 0;
    std::uint64_t seed = 1;
};

struct Structure {
    std::string name;
    std::string mask;  // output mask label; several structures may share one
    Role role = Role::Organ;
    std::string host;  // tumours: the organ mask that contains them
    Shape shape;
    Normal hu;
    Salt salt;
    std::vector<std::string> expected_segments;  // tumours, optional
};

struct PhantomSpec {
    std::string name;
    Dims dims;
    Spacing spacing;
    std::uint64_t seed = 0;
    Normal background{-1000.0, 0.0};
    std::vector<Structure> structures;
    std::vector<std::string> empty_masks;  // labels emitted even without a structure
    std::optional<std::string> expected_stage;
};

struct TumorTruth {
    std::string name;
    std::string mask;
    std::string host;
    Vec3 center_mm{0, 0, 0};
    std::optional<double> d_max_cm;   // central axial section of an ellipsoid
    std::optional<double> d_perp_cm;
    std::optional<double> volume_cm3;
    double hu_mean = 0;
    std::vector<std::string> expected_segments;
};

struct VesselTruth {
    std::string name;
    double encasement_deg = 0;  // largest ring fraction covered by any tumour, times 360
};

struct OrganTruth {
    std::string mask;
    std::optional<double> volume_cm3;
    double hu_mean = 0;
};

struct GroundTruth {
    std::vector<TumorTruth> tumors;
    std::vector<VesselTruth> vessels;
    std::vector<OrganTruth> organs;
    std::optional<std::string> expected_stage;
};

struct Phantom {
    Volume volume;
    std::map<std::string, Mask> masks;
    GroundTruth truth;
};

/// Closed-form truth computed from the PhantomSpec alone, without voxelizing.
GroundTruth ground_truth(const PhantomSpec& spec);

/// Voxelizes by centre-inside test. Voxel ownership: vessel, then tumour, then
/// organ, then background; HU is drawn from the owner's stream in raster
/// order. Tumour masks exclude vessel voxels; organ masks include their
/// tumours. Throws ShapeOutOfBounds, InvalidArgument.
Phantom generate(const PhantomSpec& spec);

std::vector<std::string> scenario_names();
/// Throws InvalidArgument for an unknown name.
PhantomSpec scenario(std::string_view name);

/// Throws ParseError / SchemaError.
PhantomSpec spec_from_json(std::string_view text);
std::string spec_to_json(const PhantomSpec& spec);
std::string truth_to_json(const GroundTruth& truth);

}  // namespace radrep::phantom
