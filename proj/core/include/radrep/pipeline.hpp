#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "radrep/config.hpp"
#include "radrep/report.hpp"
#include "radrep/volume.hpp"

namespace radrep::pipeline {

/// Mask labels understood by the pipeline. Anything else is ignored with a
/// warning.
bool known_mask_label(std::string_view label);
/// liver_tumor, pancreatic_tumor and kidney_tumor.
std::optional<Organ> tumor_mask_organ(std::string_view label);
std::string_view tumor_mask_label(Organ organ) noexcept;

struct CaseInputs {
    std::string case_id;
    Volume volume;
    std::map<std::string, Mask> masks;  // keyed by label
    std::optional<std::string> contrast_phase;
};

/// Wall-clock milliseconds per pipeline stage, in execution order.
struct StageTimings {
    std::vector<std::pair<std::string, double>> stages;
    double total_ms() const noexcept;
};

/// Contact evaluation of one PDAC instance against the SMA/CHA/CA/SA masks in
/// `masks` (missing ones are reported unevaluated and noted in `warnings`).
/// Works on a crop around tumour and vessels, resampled to the measurement
/// grid when the native spacing differs; angles are rounded to 0.1 degree.
staging::TStage stage_tumor(const measurement::TumorInstance& pdac, const measurement::TumorMeasurement& meas,
                            const std::map<std::string, Mask>& masks, const Config& config,
                            std::vector<std::string>* warnings = nullptr);

/// Masks -> structured report. Every mask must share the volume's lattice.
/// Deterministic: equal inputs give equal reports.
/// Throws GridMismatch, EmptyInput (empty volume), InvalidArgument.
report::StructuredReport build_report(const CaseInputs& inputs, const Config& config,
                                      StageTimings* timings = nullptr);

}  // namespace radrep::pipeline
