#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace radrep::diagnostics {

/// Organs with a volume standard. Kidney is one kidney; Kidneys is the pair.
enum class SizedOrgan { Liver, Pancreas, Spleen, Kidney, Kidneys };

std::string_view sized_organ_name(SizedOrgan o) noexcept;
/// Accepts liver, pancreas, spleen, kidney, kidneys and the kidney_left /
/// kidney_right labels. Throws UnknownOrgan.
SizedOrgan parse_sized_organ(std::string_view name);

enum class SizeClass { Normal, Large, Massive };
std::string_view size_class_name(SizeClass c) noexcept;
/// Throws InvalidArgument.
SizeClass parse_size_class(std::string_view name);

/// Volumes in cm^3 and attenuation cut-offs. All comparisons are strict.
struct Thresholds {
    double spleen_large_cm3 = 314.5;
    double spleen_massive_cm3 = 430.8;
    double kidneys_large_cm3 = 415.2;  // both kidneys; one kidney uses half
    double liver_large_cm3 = 3000.0;
    double pancreas_large_cm3 = 83.0;
    double fatty_liver_hu = 40.0;
    double fatty_pancreas_ratio = 0.7;

    bool valid() const noexcept;
};

bool assess_fatty_liver(double liver_hu_mean, const Thresholds& th = {});

/// pancreas / spleen mean attenuation below the ratio threshold.
/// Throws MissingSpleen when no spleen value is given and
/// SpleenAttenuationNonpositive when it is not positive.
bool assess_fatty_pancreas(double pancreas_hu_mean, std::optional<double> spleen_hu_mean,
                           const Thresholds& th = {});

/// Throws InvalidArgument for a negative volume.
SizeClass classify_organ_size(SizedOrgan organ, double volume_cm3, const Thresholds& th = {});

struct OrganAssessment {
    std::string organ;
    double volume_cm3 = 0;
    double hu_mean = 0;
    double hu_std = 0;
    SizeClass size_class = SizeClass::Normal;
    std::optional<bool> fatty;  // liver and pancreas only

    bool operator==(const OrganAssessment&) const = default;
};

}  // namespace radrep::diagnostics
