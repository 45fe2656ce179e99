#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "radrep/measurement.hpp"
#include "radrep/volume.hpp"

namespace radrep::staging {

enum class Vessel { SMA, CHA, CA, SA };
inline constexpr Vessel kAllVessels[] = {Vessel::SMA, Vessel::CHA, Vessel::CA, Vessel::SA};

std::string_view vessel_name(Vessel v) noexcept;
/// Case-insensitive. Throws InvalidArgument.
Vessel parse_vessel(std::string_view name);
/// SMA, CA and CHA; SA contact is reported but never changes the stage.
bool promotes_to_t4(Vessel v) noexcept;

struct VesselContact {
    Vessel vessel = Vessel::SMA;
    bool evaluated = true;  // false when the vessel mask was not supplied
    bool contact = false;
    std::optional<double> max_angle_deg;  // present iff contact

    bool operator==(const VesselContact&) const = default;
};

enum class Stage { T1a, T1b, T1c, T2, T3, T4 };
std::string_view stage_name(Stage s) noexcept;
/// Throws InvalidArgument.
Stage parse_stage(std::string_view name);

struct TStage {
    Stage stage = Stage::T1a;
    double d_max_cm = 0;
    double d_perp_cm = 0;
    std::vector<VesselContact> contacts;
    std::string justification;

    bool operator==(const TStage&) const = default;
};

/// Main trunk of a vessel tree: top-down slice sweep with 2D component
/// tracking, a 5x5x5 opening restricted to the original mask, and the largest
/// 3D component. Throws EmptyInput.
Mask isolate_main_branch(const Mask& vessel);

/// Sampling parameters for contact_angle, in millimetres.
struct ContactParams {
    double bin_mm = 1.0;            // step along the vessel centreline
    double segment_half_mm = 2.5;   // local axis uses skeleton points within this distance
    double slice_offsets_mm[3] = {-1.0, 0.0, 1.0};
    double sample_mm = 1.0;         // in-plane sampling pitch
    double window_half_mm = 24.0;   // in-plane sampling half width
};

/// Largest fraction of the vessel cross-section border covered by the 3x3x3
/// dilated tumour, times 360, over the contact zone. Grids must match.
/// Throws EmptyInput, GridMismatch.
VesselContact contact_angle(const Mask& tumor, const Mask& vessel_main, Vessel which = Vessel::SMA,
                            const ContactParams& params = {});

/// Full per-vessel evaluation: overlap gate on the raw vessel, main-branch
/// isolation, second gate, then contact_angle. A missing vessel yields an
/// unevaluated entry.
VesselContact evaluate_vessel(const Mask& tumor, const std::optional<Mask>& vessel, Vessel which,
                              const ContactParams& params = {});

/// Size bucket on the reported (rounded) longest diameter; upper bounds inclusive.
Stage size_stage(double d_max_cm) noexcept;

/// T4 iff an SMA/CA/CHA angle is at least 180 degrees; otherwise the size bucket.
/// Throws MissingMeasurement when no measurement is given or it has no size.
TStage stage_pdac(const std::optional<measurement::TumorMeasurement>& meas,
                  const std::vector<VesselContact>& contacts);

}  // namespace radrep::staging
