#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "radrep/diagnostics.hpp"
#include "radrep/measurement.hpp"
#include "radrep/staging.hpp"
#include "radrep/subsegment.hpp"
#include "radrep/volume.hpp"

namespace radrep::report {

inline constexpr std::string_view kSchemaVersion = "radrep-report/1";

enum class GenerationMode { GroundTruthMasks, Automated };
std::string_view mode_name(GenerationMode m) noexcept;
/// Throws InvalidArgument.
GenerationMode parse_mode(std::string_view name);

enum class AttenuationClass { Hypo, Iso, Hyper };
std::string_view attenuation_name(AttenuationClass c) noexcept;
/// Throws InvalidArgument.
AttenuationClass parse_attenuation(std::string_view name);

/// Hypo when the tumour is more than `delta_hu` below the parenchyma, hyper
/// when more than `delta_hu` above, iso otherwise.
AttenuationClass classify_attenuation(double tumor_hu, double parenchyma_hu, double delta_hu = 10.0) noexcept;

struct Metadata {
    Dims dims;
    Spacing spacing;
    std::optional<std::string> contrast_phase;

    bool operator==(const Metadata&) const = default;
};

struct TumorFinding {
    Organ organ = Organ::Liver;
    int instance_id = 0;  // 1-based within the organ, in report order
    measurement::TumorMeasurement measurement;
    std::vector<subsegment::SegmentOverlap> locations;
    std::optional<AttenuationClass> attenuation_class;

    bool operator==(const TumorFinding&) const = default;
};

/// One assessed organ. `organ` is the mask label (liver, pancreas, spleen,
/// kidneys, kidney_left, kidney_right).
struct OrganEntry {
    std::string organ;
    bool tumors_evaluated = false;
    std::optional<diagnostics::OrganAssessment> assessment;

    bool operator==(const OrganEntry&) const = default;
};

struct StructuredReport {
    std::string case_id;
    Metadata metadata;
    GenerationMode generation_mode = GenerationMode::GroundTruthMasks;
    std::vector<OrganEntry> organs;
    /// Grouped liver, pancreas, kidney; within an organ by descending D.
    std::vector<TumorFinding> findings;
    std::optional<staging::TStage> pdac_stage;
    std::vector<std::string> warnings;

    bool operator==(const StructuredReport&) const = default;

    const OrganEntry* organ(std::string_view name) const noexcept;
    std::vector<const TumorFinding*> findings_for(Organ organ) const;
};

/// Plain-text rendering with a fixed section order: case, liver, pancreas,
/// kidneys, spleen, staging, impression, then notes when warnings exist.
std::string render_text(const StructuredReport& r);

/// Canonical JSON: sorted keys, two-space indent, trailing newline.
std::string to_json(const StructuredReport& r);
/// Throws ParseError for malformed JSON and SchemaError (with a JSON pointer)
/// for schema violations.
StructuredReport from_json(std::string_view text);

}  // namespace radrep::report
