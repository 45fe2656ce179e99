#pragma once

#include "radrep/measurement.hpp"
#include "radrep/volume.hpp"

namespace radrep::postprocess {

/// Minimum total tumour volume per organ, in mm^3, for a positive call.
struct OrganThresholds {
    double pancreas_mm3 = 1.0;
    double kidney_mm3 = 150.0;
    double liver_mm3 = 100.0;
    double metastases_mm3 = 50.0;

    bool valid() const noexcept;
    double for_organ(Organ organ) const noexcept;
};

/// m AND dilate(erode(m, 3x3x3), 4x4x4). Removes structures that cannot hold
/// a 3x3x3 cube; the result is always a subset of m.
Mask denoise(const Mask& m);

/// Total masked volume strictly above the organ's threshold.
bool tumor_present(const Mask& m, Organ organ, const OrganThresholds& th = {});
/// Same test against the metastasis threshold.
bool metastasis_present(const Mask& m, const OrganThresholds& th = {});

}  // namespace radrep::postprocess
