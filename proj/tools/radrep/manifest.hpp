#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "radrep/pipeline.hpp"

namespace radrep::cli {

namespace fs = std::filesystem;

/// One case on disk. Relative paths are resolved against the manifest's
/// directory when loaded.
struct Manifest {
    fs::path file;
    std::string case_id;
    fs::path volume;
    std::map<std::string, fs::path> masks;
    std::optional<std::string> contrast_phase;
    std::optional<fs::path> clinical_notes;
    std::optional<fs::path> human_report;
};

/// Throws ParseError, SchemaError, Io. Mask labels outside the vocabulary
/// are a SchemaError.
Manifest load_manifest(const fs::path& file);
std::string manifest_to_json(const Manifest& m);

/// Reads every referenced image. Missing files raise Io naming the path.
pipeline::CaseInputs load_case(const Manifest& m);

/// Files are taken as given; a directory contributes every manifest.json and
/// *.manifest.json in it and in its direct subdirectories, sorted by path.
std::vector<fs::path> expand_manifests(const std::vector<std::string>& args);

std::string read_text(const fs::path& p);
void write_text(const fs::path& p, const std::string& text);

}  // namespace radrep::cli
