#pragma once

#include <optional>
#include <string>
#include <vector>

#include "radrep/config.hpp"
#include "radrep/error.hpp"

namespace radrep::cli {

// Process exit statuses. Stable: scripts depend on them.
enum Exit : int {
    kOk = 0,
    kFailure = 1,       // unexpected internal error
    kInput = 2,         // unreadable, missing or invalid input
    kConsistency = 3,   // narrative disagrees with the structured report
    kNoExamples = 4,    // no style examples share the report's label set
    kEvaluation = 5,    // prediction and truth sets do not align
    kEndpoint = 6,      // chat endpoint unreachable or answered badly
    kUsage = 64,        // bad command line
};

int exit_code_for(ErrorCode code) noexcept;

struct Common {
    std::string config_path;
    std::optional<std::string> mode;
    std::optional<int> jobs;
    std::string out;
};

/// Defaults, then the --config file, then --mode / --jobs.
Config resolve_config(const Common& c);

int cmd_report(const Common& c, const std::vector<std::string>& manifests);
int cmd_narrative(const Common& c, const std::string& report_path, const std::string& examples_dir);
int cmd_fuse(const Common& c, const std::string& report_path, const std::string& notes_path);
int cmd_evaluate(const Common& c, const std::string& pred_dir, const std::string& truth_csv, bool as_json);
int cmd_phantom(const Common& c, const std::string& scenario_or_spec, std::optional<std::uint64_t> seed, bool list);
int cmd_measure(const Common& c, const std::string& mask, const std::string& volume, const std::string& organ);
int cmd_stage(const Common& c, const std::string& tumor, const std::vector<std::string>& vessels,
              const std::string& volume);
int cmd_subsegment(const Common& c, const std::string& pancreas, const std::string& sma);
int cmd_denoise(const Common& c, const std::string& mask, const std::string& organ);
int cmd_config(const Common& c, bool check);

}  // namespace radrep::cli
