#include "radrep/postprocess.hpp"

#include "radrep/morphology.hpp"

namespace radrep::postprocess {

bool OrganThresholds::valid() const noexcept {
    return pancreas_mm3 >= 0 && kidney_mm3 >= 0 && liver_mm3 >= 0 && metastases_mm3 >= 0;
}

double OrganThresholds::for_organ(Organ organ) const noexcept {
    switch (organ) {
        case Organ::Pancreas: return pancreas_mm3;
        case Organ::Kidney: return kidney_mm3;
        case Organ::Liver: return liver_mm3;
    }
    return 0;
}

Mask denoise(const Mask& m) {
    using namespace morphology;
    // The 4-wide element has anchor 1, so it reaches one voxel back and two forward.
    const Mask grown = dilate(erode(m, StructuringElement::cube(3)), StructuringElement::cube(4));
    return mask_and(m, grown);
}

bool tumor_present(const Mask& m, Organ organ, const OrganThresholds& th) {
    return physical_volume_mm3(m) > th.for_organ(organ);
}

bool metastasis_present(const Mask& m, const OrganThresholds& th) {
    return physical_volume_mm3(m) > th.metastases_mm3;
}

}  // namespace radrep::postprocess
