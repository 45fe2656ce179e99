#include "radrep/report.hpp"

#include <algorithm>
#include <cstdarg>
#include <cstdio>
#include <map>

#include "json_util.hpp"
#include "radrep/error.hpp"

namespace radrep::report {

using namespace jsonutil;

std::string_view mode_name(GenerationMode m) noexcept {
    return m == GenerationMode::Automated ? "automated" : "ground_truth_masks";
}

GenerationMode parse_mode(std::string_view name) {
    if (name == "automated") return GenerationMode::Automated;
    if (name == "ground_truth_masks") return GenerationMode::GroundTruthMasks;
    throw Error(ErrorCode::InvalidArgument, "unknown generation mode '" + std::string(name) + "'");
}

std::string_view attenuation_name(AttenuationClass c) noexcept {
    switch (c) {
        case AttenuationClass::Hypo: return "hypoattenuating";
        case AttenuationClass::Iso: return "isoattenuating";
        case AttenuationClass::Hyper: return "hyperattenuating";
    }
    return "?";
}

AttenuationClass parse_attenuation(std::string_view name) {
    for (auto c : {AttenuationClass::Hypo, AttenuationClass::Iso, AttenuationClass::Hyper})
        if (attenuation_name(c) == name) return c;
    throw Error(ErrorCode::InvalidArgument, "unknown attenuation class '" + std::string(name) + "'");
}

AttenuationClass classify_attenuation(double tumor_hu, double parenchyma_hu, double delta_hu) noexcept {
    if (tumor_hu < parenchyma_hu - delta_hu) return AttenuationClass::Hypo;
    if (tumor_hu > parenchyma_hu + delta_hu) return AttenuationClass::Hyper;
    return AttenuationClass::Iso;
}

const OrganEntry* StructuredReport::organ(std::string_view name) const noexcept {
    for (const auto& o : organs)
        if (o.organ == name) return &o;
    return nullptr;
}

std::vector<const TumorFinding*> StructuredReport::findings_for(Organ o) const {
    std::vector<const TumorFinding*> out;
    for (const auto& f : findings)
        if (f.organ == o) out.push_back(&f);
    return out;
}

// ---------------------------------------------------------------------------
// Text

namespace {

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    const int n = std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return std::string(buf, static_cast<std::size_t>(std::clamp(n, 0, static_cast<int>(sizeof buf) - 1)));
}

std::string capitalize(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

struct OrganWords {
    const char* tag;   // numbered finding label
    const char* noun;  // noun phrase inside the sentence
    const char* plural;
};

OrganWords words(Organ o) {
    switch (o) {
        case Organ::Liver: return {"Liver lesion", "liver lesion", "liver lesions"};
        case Organ::Pancreas: return {"PDAC", "pancreas PDAC", "pancreatic tumors (PDAC)"};
        case Organ::Kidney: return {"Kidney lesion", "kidney lesion", "kidney lesions"};
    }
    return {"Lesion", "lesion", "lesions"};
}

// Segment names drop an organ prefix ("liver_segment_2" -> "2").
std::string short_segment(const std::string& name) {
    for (std::string_view prefix : {"liver_segment_", "segment_", "pancreas_", "kidney_"})
        if (name.rfind(prefix, 0) == 0) return name.substr(prefix.size());
    return name;
}

int segment_rank(const std::string& s) {
    if (s == "head" || s == "right") return 0;
    if (s == "body" || s == "left") return 1;
    if (s == "tail") return 2;
    try {
        return 10 + std::stoi(s);
    } catch (...) {
        return 1000;
    }
}

std::string location_phrase(const TumorFinding& f) {
    if (f.locations.empty()) return "Location indeterminate";
    std::vector<std::string> segs;
    for (const auto& l : f.locations) segs.push_back(short_segment(l.segment));
    std::stable_sort(segs.begin(), segs.end(),
                     [](const std::string& a, const std::string& b) { return segment_rank(a) < segment_rank(b); });
    std::string joined;
    for (const auto& s : segs) joined += (joined.empty() ? "" : "/") + s;
    switch (f.organ) {
        case Organ::Pancreas: return "Pancreatic " + joined;
        case Organ::Liver: return (segs.size() == 1 ? "Hepatic segment " : "Hepatic segments ") + joined;
        case Organ::Kidney:
            if (joined == "left" || joined == "right") return capitalize(joined) + " kidney";
            return "Kidney " + joined;
    }
    return joined;
}

std::string finding_sentence(const TumorFinding& f) {
    const auto w = words(f.organ);
    const auto& m = f.measurement;
    std::string subject = f.attenuation_class
                              ? capitalize(std::string(attenuation_name(*f.attenuation_class))) + " " + w.noun
                              : capitalize(w.noun);
    return fmt("%s %d: %s. ", w.tag, f.instance_id, location_phrase(f).c_str()) + subject +
           fmt(" measuring %.1f x %.1f cm (centered on slice %lld). Its mean HU value is %.2f +/- %.2f, and "
               "its volume is %.3f cm3.",
               m.d_max_cm, m.d_perp_cm, static_cast<long long>(m.slice_index), m.hu_mean, m.hu_std,
               m.volume_cm3);
}

std::string display_name(const std::string& organ) {
    if (organ == "kidney_left") return "Left kidney";
    if (organ == "kidney_right") return "Right kidney";
    if (organ == "kidneys") return "Kidneys";
    return capitalize(organ);
}

void assessment_lines(std::string& out, const OrganEntry& e) {
    if (!e.assessment) return;
    const auto& a = *e.assessment;
    out += fmt("%s volume: %.3f cm3 (%s size). Mean HU value: %.2f +/- %.2f.\n", display_name(e.organ).c_str(),
               a.volume_cm3, std::string(diagnostics::size_class_name(a.size_class)).c_str(), a.hu_mean, a.hu_std);
    if (a.fatty) {
        if (e.organ == "liver") out += *a.fatty ? "Findings suggest fatty liver.\n" : "No fatty liver.\n";
        if (e.organ == "pancreas") out += *a.fatty ? "Findings suggest fatty pancreas.\n" : "No fatty pancreas.\n";
    }
}

void organ_section(std::string& out, const StructuredReport& r, const char* title, Organ tumor_organ,
                   const std::vector<std::string>& entry_names, const char* display) {
    out += fmt("\n%s\n", title);
    bool any_entry = false;
    bool tumors_evaluated = false;
    for (const auto& name : entry_names)
        if (const auto* e = r.organ(name)) {
            any_entry = true;
            tumors_evaluated = tumors_evaluated || e->tumors_evaluated;
            assessment_lines(out, *e);
        }
    const auto found = r.findings_for(tumor_organ);
    for (const auto* f : found) out += finding_sentence(*f) + "\n";
    if (!found.empty()) return;
    if (!any_entry && !tumors_evaluated) out += fmt("%s: not evaluated.\n", display);
    else if (!tumors_evaluated) out += fmt("%s tumors: not evaluated.\n", display);
    else out += fmt("%s: unremarkable.\n", display);
}

std::string contact_phrase(const staging::VesselContact& c) {
    const std::string v(staging::vessel_name(c.vessel));
    if (!c.evaluated) return v + ": not evaluated";
    if (!c.contact) return v + ": no contact";
    return fmt("%s: contact over %.1f degrees", v.c_str(), c.max_angle_deg.value_or(0));
}

}  // namespace

std::string render_text(const StructuredReport& r) {
    std::string out = "STRUCTURED REPORT\n";
    out += fmt("Case ID: %s\n", r.case_id.c_str());
    out += fmt("Generation mode: %s\n", std::string(mode_name(r.generation_mode)).c_str());
    const auto& md = r.metadata;
    out += fmt("Image size: %lld x %lld x %lld voxels\n", static_cast<long long>(md.dims.nx),
               static_cast<long long>(md.dims.ny), static_cast<long long>(md.dims.nz));
    out += fmt("Voxel spacing: %.2f x %.2f x %.2f mm\n", md.spacing.dx, md.spacing.dy, md.spacing.dz);
    if (md.contrast_phase) out += fmt("Contrast phase: %s\n", md.contrast_phase->c_str());

    out += "\nFINDINGS\n";
    organ_section(out, r, "LIVER", Organ::Liver, {"liver"}, "Liver");
    organ_section(out, r, "PANCREAS", Organ::Pancreas, {"pancreas"}, "Pancreas");
    organ_section(out, r, "KIDNEYS", Organ::Kidney, {"kidneys", "kidney_right", "kidney_left"}, "Kidneys");
    if (const auto* s = r.organ("spleen")) {
        out += "\nSPLEEN\n";
        assessment_lines(out, *s);
    }

    out += "\nSTAGING\n";
    if (r.pdac_stage) {
        const auto& st = *r.pdac_stage;
        out += fmt("PDAC 1 T stage: %s. Tumor size %.1f x %.1f cm.\n", std::string(staging::stage_name(st.stage)).c_str(),
                   st.d_max_cm, st.d_perp_cm);
        for (const auto& c : st.contacts) out += "Vessel contact, " + contact_phrase(c) + ".\n";
    } else if (!r.findings_for(Organ::Pancreas).empty()) {
        out += "PDAC present; T stage not determined.\n";
    } else {
        out += "No PDAC to stage.\n";
    }

    out += "\nIMPRESSION\n";
    std::size_t lines = 0;
    for (Organ o : {Organ::Liver, Organ::Pancreas, Organ::Kidney}) {
        const auto found = r.findings_for(o);
        if (found.empty()) continue;
        const auto w = words(o);
        const auto& big = found.front()->measurement;
        std::string line = found.size() == 1 ? fmt("- 1 %s", w.noun) : fmt("- %zu %s", found.size(), w.plural);
        line += fmt(", largest %.1f x %.1f cm (%s)", big.d_max_cm, big.d_perp_cm,
                    location_phrase(*found.front()).c_str());
        if (o == Organ::Pancreas && r.pdac_stage)
            line += fmt(", T stage %s", std::string(staging::stage_name(r.pdac_stage->stage)).c_str());
        out += line + ".\n";
        ++lines;
    }
    for (const auto& e : r.organs) {
        if (!e.assessment) continue;
        if (e.assessment->fatty.value_or(false)) {
            out += fmt("- Fatty %s.\n", e.organ.c_str());
            ++lines;
        }
        if (e.assessment->size_class != diagnostics::SizeClass::Normal) {
            out += fmt("- %s is enlarged (%s).\n", display_name(e.organ).c_str(),
                       std::string(diagnostics::size_class_name(e.assessment->size_class)).c_str());
            ++lines;
        }
    }
    if (lines == 0) out += "- No tumor detected in the evaluated organs.\n";

    if (!r.warnings.empty()) {
        out += "\nNOTES\n";
        for (const auto& w : r.warnings) out += "- " + w + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json measurement_json(const measurement::TumorMeasurement& m) {
    return {{"d_max_cm", m.d_max_cm}, {"d_perp_cm", m.d_perp_cm}, {"slice_index", m.slice_index},
            {"volume_cm3", m.volume_cm3}, {"hu_mean", m.hu_mean}, {"hu_std", m.hu_std}};
}

json contact_json(const staging::VesselContact& c) {
    json j = {{"vessel", staging::vessel_name(c.vessel)}, {"evaluated", c.evaluated}, {"contact", c.contact}};
    if (c.max_angle_deg) j["max_angle_deg"] = *c.max_angle_deg;
    return j;
}

Organ organ_at(const json& obj, const std::string& ptr) {
    const std::string name = get_string(obj, ptr, "organ");
    try {
        return parse_organ(name);
    } catch (const Error&) {
        throw SchemaError(child(ptr, "organ"), "unknown organ '" + name + "'");
    }
}

template <typename F>
auto enum_at(const json& obj, const std::string& ptr, std::string_view key, F parse) {
    const std::string name = get_string(obj, ptr, key);
    try {
        return parse(name);
    } catch (const SchemaError&) {
        throw;
    } catch (const Error& e) {
        throw SchemaError(child(ptr, key), e.what());
    }
}

measurement::TumorMeasurement measurement_from(const json& j, const std::string& ptr) {
    measurement::TumorMeasurement m;
    m.d_max_cm = get_number(j, ptr, "d_max_cm");
    m.d_perp_cm = get_number(j, ptr, "d_perp_cm");
    m.slice_index = get_int(j, ptr, "slice_index");
    m.volume_cm3 = get_number(j, ptr, "volume_cm3");
    m.hu_mean = get_number(j, ptr, "hu_mean");
    m.hu_std = get_number(j, ptr, "hu_std");
    if (m.d_perp_cm > m.d_max_cm) throw SchemaError(child(ptr, "d_perp_cm"), "exceeds d_max_cm");
    return m;
}

staging::VesselContact contact_from(const json& j, const std::string& ptr) {
    expect_object(j, ptr);
    staging::VesselContact c;
    c.vessel = enum_at(j, ptr, "vessel", staging::parse_vessel);
    c.evaluated = get_bool(j, ptr, "evaluated");
    c.contact = get_bool(j, ptr, "contact");
    c.max_angle_deg = opt_number(j, ptr, "max_angle_deg");
    if (c.contact != c.max_angle_deg.has_value())
        throw SchemaError(child(ptr, "max_angle_deg"), "must be present exactly when contact is true");
    return c;
}

}  // namespace

std::string to_json(const StructuredReport& r) {
    json j;
    j["schema"] = kSchemaVersion;
    j["case_id"] = r.case_id;
    j["generation_mode"] = mode_name(r.generation_mode);
    const auto& md = r.metadata;
    j["metadata"] = {{"dims", {md.dims.nx, md.dims.ny, md.dims.nz}},
                     {"spacing_mm", {md.spacing.dx, md.spacing.dy, md.spacing.dz}}};
    if (md.contrast_phase) j["metadata"]["contrast_phase"] = *md.contrast_phase;

    j["organs"] = json::array();
    for (const auto& o : r.organs) {
        json e = {{"organ", o.organ}, {"tumors_evaluated", o.tumors_evaluated}};
        if (o.assessment) {
            const auto& a = *o.assessment;
            json aj = {{"volume_cm3", a.volume_cm3}, {"hu_mean", a.hu_mean}, {"hu_std", a.hu_std},
                       {"size_class", diagnostics::size_class_name(a.size_class)}};
            if (a.fatty) aj["fatty"] = *a.fatty;
            e["assessment"] = aj;
        }
        j["organs"].push_back(e);
    }

    j["findings"] = json::array();
    for (const auto& f : r.findings) {
        json fj = {{"organ", organ_name(f.organ)}, {"instance_id", f.instance_id},
                   {"measurement", measurement_json(f.measurement)}, {"locations", json::array()}};
        for (const auto& l : f.locations) fj["locations"].push_back({{"segment", l.segment}, {"fraction", l.fraction}});
        if (f.attenuation_class) fj["attenuation_class"] = attenuation_name(*f.attenuation_class);
        j["findings"].push_back(fj);
    }

    if (r.pdac_stage) {
        const auto& s = *r.pdac_stage;
        json sj = {{"stage", staging::stage_name(s.stage)}, {"d_max_cm", s.d_max_cm}, {"d_perp_cm", s.d_perp_cm},
                   {"justification", s.justification}, {"contacts", json::array()}};
        for (const auto& c : s.contacts) sj["contacts"].push_back(contact_json(c));
        j["pdac_stage"] = sj;
    }
    j["warnings"] = r.warnings;
    return j.dump(2) + "\n";
}

StructuredReport from_json(std::string_view text) {
    const json j = jsonutil::parse(text);
    const std::string root;
    expect_object(j, root);
    const std::string schema = get_string(j, root, "schema");
    if (schema != kSchemaVersion) throw SchemaError("/schema", "unsupported schema '" + schema + "'");

    StructuredReport r;
    r.case_id = get_string(j, root, "case_id");
    r.generation_mode = enum_at(j, root, "generation_mode", parse_mode);

    const json& md = require(j, root, "metadata");
    expect_object(md, "/metadata");
    const json& dims = require(md, "/metadata", "dims");
    const json& sp = require(md, "/metadata", "spacing_mm");
    expect_array(dims, "/metadata/dims");
    expect_array(sp, "/metadata/spacing_mm");
    if (dims.size() != 3) throw SchemaError("/metadata/dims", "expected 3 entries");
    if (sp.size() != 3) throw SchemaError("/metadata/spacing_mm", "expected 3 entries");
    r.metadata.dims = {as_int(dims[0], "/metadata/dims/0"), as_int(dims[1], "/metadata/dims/1"),
                       as_int(dims[2], "/metadata/dims/2")};
    r.metadata.spacing = {as_number(sp[0], "/metadata/spacing_mm/0"), as_number(sp[1], "/metadata/spacing_mm/1"),
                          as_number(sp[2], "/metadata/spacing_mm/2")};
    r.metadata.contrast_phase = opt_string(md, "/metadata", "contrast_phase");

    const json& organs = require(j, root, "organs");
    expect_array(organs, "/organs");
    for (std::size_t i = 0; i < organs.size(); ++i) {
        const std::string ptr = child("/organs", i);
        const json& o = organs[i];
        expect_object(o, ptr);
        OrganEntry e;
        e.organ = get_string(o, ptr, "organ");
        e.tumors_evaluated = get_bool(o, ptr, "tumors_evaluated");
        if (const json* a = optional_field(o, "assessment")) {
            const std::string ap = child(ptr, "assessment");
            expect_object(*a, ap);
            diagnostics::OrganAssessment as;
            as.organ = e.organ;
            as.volume_cm3 = get_number(*a, ap, "volume_cm3");
            as.hu_mean = get_number(*a, ap, "hu_mean");
            as.hu_std = get_number(*a, ap, "hu_std");
            as.size_class = enum_at(*a, ap, "size_class", diagnostics::parse_size_class);
            as.fatty = opt_bool(*a, ap, "fatty");
            e.assessment = as;
        }
        r.organs.push_back(std::move(e));
    }

    const json& findings = require(j, root, "findings");
    expect_array(findings, "/findings");
    std::map<std::pair<Organ, int>, bool> seen;
    for (std::size_t i = 0; i < findings.size(); ++i) {
        const std::string ptr = child("/findings", i);
        const json& f = findings[i];
        expect_object(f, ptr);
        TumorFinding tf;
        tf.organ = organ_at(f, ptr);
        tf.instance_id = static_cast<int>(get_int(f, ptr, "instance_id"));
        if (tf.instance_id < 1) throw SchemaError(child(ptr, "instance_id"), "must be positive");
        if (seen[{tf.organ, tf.instance_id}])
            throw SchemaError(child(ptr, "instance_id"), "duplicate instance id within organ");
        seen[{tf.organ, tf.instance_id}] = true;
        const json& m = require(f, ptr, "measurement");
        expect_object(m, child(ptr, "measurement"));
        tf.measurement = measurement_from(m, child(ptr, "measurement"));
        const json& locs = require(f, ptr, "locations");
        expect_array(locs, child(ptr, "locations"));
        for (std::size_t k = 0; k < locs.size(); ++k) {
            const std::string lp = child(child(ptr, "locations"), k);
            expect_object(locs[k], lp);
            tf.locations.push_back({get_string(locs[k], lp, "segment"), get_number(locs[k], lp, "fraction")});
        }
        if (optional_field(f, "attenuation_class"))
            tf.attenuation_class = enum_at(f, ptr, "attenuation_class", parse_attenuation);
        r.findings.push_back(std::move(tf));
    }

    if (const json* s = optional_field(j, "pdac_stage")) {
        const std::string sp2 = "/pdac_stage";
        expect_object(*s, sp2);
        staging::TStage st;
        st.stage = enum_at(*s, sp2, "stage", staging::parse_stage);
        st.d_max_cm = get_number(*s, sp2, "d_max_cm");
        st.d_perp_cm = get_number(*s, sp2, "d_perp_cm");
        st.justification = get_string(*s, sp2, "justification");
        const json& cs = require(*s, sp2, "contacts");
        expect_array(cs, "/pdac_stage/contacts");
        for (std::size_t k = 0; k < cs.size(); ++k) st.contacts.push_back(contact_from(cs[k], child("/pdac_stage/contacts", k)));
        r.pdac_stage = std::move(st);
    }

    const json& warnings = require(j, root, "warnings");
    expect_array(warnings, "/warnings");
    for (std::size_t i = 0; i < warnings.size(); ++i) r.warnings.push_back(as_string(warnings[i], child("/warnings", i)));
    return r;
}

}  // namespace radrep::report
