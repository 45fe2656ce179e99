#include "manifest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "radrep/error.hpp"
#include "radrep/nifti.hpp"

namespace radrep::cli {

using nlohmann::json;

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
    out << text;
    if (!out) throw Error(ErrorCode::Io, "write failed for " + p.string());
}

namespace {

std::string string_field(const json& j, const char* key, bool required) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        if (required) throw SchemaError(std::string("/") + key, "missing required field");
        return {};
    }
    if (!it->is_string()) throw SchemaError(std::string("/") + key, "expected a string");
    return it->get<std::string>();
}

}  // namespace

Manifest load_manifest(const fs::path& file) {
    json j;
    const std::string text = read_text(file);
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(file.string() + ": invalid JSON", e.byte);
    }
    if (!j.is_object()) throw SchemaError("/", "manifest must be an object");
    for (const auto& [key, value] : j.items())
        if (key != "case_id" && key != "volume" && key != "masks" && key != "contrast_phase" &&
            key != "clinical_notes" && key != "human_report")
            throw SchemaError("/" + key, "unknown key");

    const fs::path base = file.parent_path();
    const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    Manifest m;
    m.file = file;
    m.case_id = string_field(j, "case_id", true);
    if (m.case_id.empty() || m.case_id.find_first_of("/\\") != std::string::npos)
        throw SchemaError("/case_id", "must be a non-empty file-name-safe string");
    m.volume = resolve(string_field(j, "volume", true));
    const auto masks = j.find("masks");
    if (masks == j.end() || !masks->is_object()) throw SchemaError("/masks", "expected an object of label -> path");
    for (const auto& [label, path] : masks->items()) {
        if (!pipeline::known_mask_label(label)) throw SchemaError("/masks/" + label, "unknown structure label");
        if (!path.is_string()) throw SchemaError("/masks/" + label, "expected a string");
        m.masks.emplace(label, resolve(path.get<std::string>()));
    }
    if (auto s = string_field(j, "contrast_phase", false); !s.empty()) m.contrast_phase = s;
    if (auto s = string_field(j, "clinical_notes", false); !s.empty()) m.clinical_notes = resolve(s);
    if (auto s = string_field(j, "human_report", false); !s.empty()) m.human_report = resolve(s);
    return m;
}

std::string manifest_to_json(const Manifest& m) {
    const fs::path base = m.file.parent_path();
    const auto rel = [&](const fs::path& p) { return base.empty() ? p.generic_string() : p.lexically_relative(base).generic_string(); };
    json j{{"case_id", m.case_id}, {"volume", rel(m.volume)}, {"masks", json::object()}};
    for (const auto& [label, p] : m.masks) j["masks"][label] = rel(p);
    if (m.contrast_phase) j["contrast_phase"] = *m.contrast_phase;
    if (m.clinical_notes) j["clinical_notes"] = rel(*m.clinical_notes);
    if (m.human_report) j["human_report"] = rel(*m.human_report);
    return j.dump(2) + "\n";
}

pipeline::CaseInputs load_case(const Manifest& m) {
    const auto require = [](const fs::path& p) {
        if (!fs::is_regular_file(p)) throw Error(ErrorCode::Io, "missing file: " + p.string());
    };
    require(m.volume);
    for (const auto& [label, p] : m.masks) require(p);
    pipeline::CaseInputs in;
    in.case_id = m.case_id;
    in.contrast_phase = m.contrast_phase;
    in.volume = nifti::load_volume(m.volume);
    for (const auto& [label, p] : m.masks) in.masks.emplace(label, nifti::load_mask(p, label));
    return in;
}

std::vector<fs::path> expand_manifests(const std::vector<std::string>& args) {
    std::vector<fs::path> out;
    const auto is_manifest = [](const fs::path& p) {
        const std::string name = p.filename().string();
        const std::string suffix = ".manifest.json";
        return name == "manifest.json" ||
               (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0);
    };
    for (const auto& a : args) {
        const fs::path p(a);
        if (!fs::is_directory(p)) {
            out.push_back(p);
            continue;
        }
        std::vector<fs::path> found;
        for (const auto& e : fs::directory_iterator(p)) {
            if (e.is_regular_file() && is_manifest(e.path())) found.push_back(e.path());
            if (e.is_directory())
                for (const auto& f : fs::directory_iterator(e.path()))
                    if (f.is_regular_file() && is_manifest(f.path())) found.push_back(f.path());
        }
        std::sort(found.begin(), found.end());
        out.insert(out.end(), found.begin(), found.end());
    }
    return out;
}

}  // namespace radrep::cli
