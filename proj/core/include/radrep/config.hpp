#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "radrep/diagnostics.hpp"
#include "radrep/evaluation.hpp"
#include "radrep/postprocess.hpp"
#include "radrep/report.hpp"
#include "radrep/staging.hpp"
#include "radrep/textgen.hpp"
#include "radrep/volume.hpp"

namespace radrep {

inline constexpr int kConfigVersion = 1;

/// Every tunable of the pipeline. Defaults are the published values.
struct Config {
    postprocess::OrganThresholds presence;
    diagnostics::Thresholds diagnostics;
    double attenuation_delta_hu = 10.0;
    Spacing measurement_grid{1.0, 1.0, 1.0};
    staging::ContactParams contact;
    textgen::ChatEndpoint chat;  // api_key is never read from the file
    std::size_t style_examples = 10;
    evaluation::UncertainPolicy uncertain_policy = evaluation::UncertainPolicy::Drop;
    double small_tumor_cutoff_cm = 2.0;
    int jobs = 1;
    report::GenerationMode mode = report::GenerationMode::GroundTruthMasks;

    /// Throws InvalidArgument naming the first bad field.
    void validate() const;
};

/// JSON with // comments allowed. Missing keys keep their defaults; unknown
/// keys and a wrong "version" are rejected. Throws ParseError, SchemaError,
/// InvalidArgument.
Config config_from_json(std::string_view text);

/// Canonical JSON of every field, no comments.
std::string config_to_json(const Config& c);

/// Annotated default configuration file, accepted by config_from_json.
std::string default_config_text();

}  // namespace radrep
