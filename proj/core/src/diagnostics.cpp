#include "radrep/diagnostics.hpp"

#include <string>

#include "radrep/error.hpp"

namespace radrep::diagnostics {

std::string_view sized_organ_name(SizedOrgan o) noexcept {
    switch (o) {
        case SizedOrgan::Liver: return "liver";
        case SizedOrgan::Pancreas: return "pancreas";
        case SizedOrgan::Spleen: return "spleen";
        case SizedOrgan::Kidney: return "kidney";
        case SizedOrgan::Kidneys: return "kidneys";
    }
    return "?";
}

SizedOrgan parse_sized_organ(std::string_view name) {
    if (name == "liver") return SizedOrgan::Liver;
    if (name == "pancreas") return SizedOrgan::Pancreas;
    if (name == "spleen") return SizedOrgan::Spleen;
    if (name == "kidney" || name == "kidney_left" || name == "kidney_right") return SizedOrgan::Kidney;
    if (name == "kidneys") return SizedOrgan::Kidneys;
    throw Error(ErrorCode::UnknownOrgan, "no size standard for organ '" + std::string(name) + "'");
}

std::string_view size_class_name(SizeClass c) noexcept {
    switch (c) {
        case SizeClass::Normal: return "normal";
        case SizeClass::Large: return "large";
        case SizeClass::Massive: return "massive";
    }
    return "?";
}

SizeClass parse_size_class(std::string_view name) {
    for (auto c : {SizeClass::Normal, SizeClass::Large, SizeClass::Massive})
        if (size_class_name(c) == name) return c;
    throw Error(ErrorCode::InvalidArgument, "unknown size class '" + std::string(name) + "'");
}

bool Thresholds::valid() const noexcept {
    return spleen_large_cm3 >= 0 && spleen_massive_cm3 >= spleen_large_cm3 && kidneys_large_cm3 >= 0 &&
           liver_large_cm3 >= 0 && pancreas_large_cm3 >= 0 && fatty_pancreas_ratio > 0;
}

bool assess_fatty_liver(double liver_hu_mean, const Thresholds& th) { return liver_hu_mean < th.fatty_liver_hu; }

bool assess_fatty_pancreas(double pancreas_hu_mean, std::optional<double> spleen_hu_mean, const Thresholds& th) {
    if (!spleen_hu_mean) throw Error(ErrorCode::MissingSpleen, "fatty pancreas assessment needs the spleen");
    if (!(*spleen_hu_mean > 0))
        throw Error(ErrorCode::SpleenAttenuationNonpositive, "spleen attenuation must be positive");
    return pancreas_hu_mean / *spleen_hu_mean < th.fatty_pancreas_ratio;
}

SizeClass classify_organ_size(SizedOrgan organ, double volume_cm3, const Thresholds& th) {
    if (volume_cm3 < 0) throw Error(ErrorCode::InvalidArgument, "negative organ volume");
    switch (organ) {
        case SizedOrgan::Spleen:
            if (volume_cm3 > th.spleen_massive_cm3) return SizeClass::Massive;
            return volume_cm3 > th.spleen_large_cm3 ? SizeClass::Large : SizeClass::Normal;
        case SizedOrgan::Kidney:
            return volume_cm3 > th.kidneys_large_cm3 / 2 ? SizeClass::Large : SizeClass::Normal;
        case SizedOrgan::Kidneys:
            return volume_cm3 > th.kidneys_large_cm3 ? SizeClass::Large : SizeClass::Normal;
        case SizedOrgan::Liver:
            return volume_cm3 > th.liver_large_cm3 ? SizeClass::Large : SizeClass::Normal;
        case SizedOrgan::Pancreas:
            return volume_cm3 > th.pancreas_large_cm3 ? SizeClass::Large : SizeClass::Normal;
    }
    return SizeClass::Normal;
}

}  // namespace radrep::diagnostics
