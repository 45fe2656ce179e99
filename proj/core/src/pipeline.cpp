#include "radrep/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <numeric>

#include "radrep/diagnostics.hpp"
#include "radrep/error.hpp"
#include "radrep/measurement.hpp"
#include "radrep/morphology.hpp"
#include "radrep/postprocess.hpp"
#include "radrep/staging.hpp"
#include "radrep/subsegment.hpp"

namespace radrep::pipeline {

namespace {

constexpr std::array<std::string_view, 6> kOrganLabels = {"liver",   "pancreas",    "spleen",
                                                          "kidneys", "kidney_left", "kidney_right"};
constexpr std::array<std::string_view, 3> kPancreasParts = {"pancreas_head", "pancreas_body", "pancreas_tail"};
constexpr std::array<Organ, 3> kTumorOrgans = {Organ::Liver, Organ::Pancreas, Organ::Kidney};
constexpr int kLiverSegments = 8;
constexpr std::int64_t kStagingPad = 4;

std::string liver_segment_label(int k) { return "liver_segment_" + std::to_string(k); }

class Stopwatch {
public:
    explicit Stopwatch(StageTimings* out) : out_(out), t0_(std::chrono::steady_clock::now()) {}
    void lap(const char* name) {
        const auto now = std::chrono::steady_clock::now();
        if (out_) out_->stages.emplace_back(name, std::chrono::duration<double, std::milli>(now - t0_).count());
        t0_ = now;
    }

private:
    StageTimings* out_;
    std::chrono::steady_clock::time_point t0_;
};

const Mask* find(const std::map<std::string, Mask>& masks, std::string_view label) {
    const auto it = masks.find(std::string(label));
    return it == masks.end() ? nullptr : &it->second;
}

// Organ parenchyma that hosts tumours of `organ`; kidney falls back to the
// union of the two single-kidney masks.
std::optional<Mask> host_mask(const std::map<std::string, Mask>& masks, Organ organ) {
    switch (organ) {
        case Organ::Liver:
            if (const Mask* m = find(masks, "liver")) return *m;
            return std::nullopt;
        case Organ::Pancreas:
            if (const Mask* m = find(masks, "pancreas")) return *m;
            return std::nullopt;
        case Organ::Kidney: {
            if (const Mask* m = find(masks, "kidneys")) return *m;
            const Mask* l = find(masks, "kidney_left");
            const Mask* r = find(masks, "kidney_right");
            if (l && r) return morphology::mask_or(*l, *r);
            if (l) return *l;
            if (r) return *r;
            return std::nullopt;
        }
    }
    return std::nullopt;
}

std::string_view entry_label(Organ organ) {
    switch (organ) {
        case Organ::Liver: return "liver";
        case Organ::Pancreas: return "pancreas";
        case Organ::Kidney: return "kidneys";
    }
    return "";
}

bool tumors_evaluated_for(std::string_view organ_label, const std::map<std::string, Mask>& masks) {
    if (organ_label == "liver") return find(masks, "liver_tumor") != nullptr;
    if (organ_label == "pancreas") return find(masks, "pancreatic_tumor") != nullptr;
    if (organ_label.substr(0, 6) == "kidney") return find(masks, "kidney_tumor") != nullptr;
    return false;
}

std::optional<subsegment::SubsegmentMap> liver_map(const std::map<std::string, Mask>& masks,
                                                   std::vector<std::string>& warnings) {
    std::vector<Mask> segs;
    for (int k = 1; k <= kLiverSegments; ++k)
        if (const Mask* m = find(masks, liver_segment_label(k))) segs.push_back(*m);
    if (segs.empty()) return std::nullopt;
    try {
        return subsegment::SubsegmentMap::from_masks("liver", segs);
    } catch (const Error& e) {
        warnings.push_back(std::string("liver segments unusable: ") + e.what());
        return std::nullopt;
    }
}

std::optional<subsegment::SubsegmentMap> pancreas_map(const std::map<std::string, Mask>& masks,
                                                      std::vector<std::string>& warnings) {
    std::vector<Mask> parts;
    for (auto label : kPancreasParts)
        if (const Mask* m = find(masks, label)) parts.push_back(*m);
    if (parts.size() == kPancreasParts.size()) {
        try {
            return subsegment::SubsegmentMap::from_masks("pancreas", parts);
        } catch (const Error& e) {
            warnings.push_back(std::string("pancreas sub-segment masks unusable: ") + e.what());
        }
    }
    const Mask* pancreas = find(masks, "pancreas");
    const Mask* sma = find(masks, "SMA");
    if (!pancreas) return std::nullopt;
    if (!sma) {
        warnings.push_back("SMA mask missing; pancreatic tumour location not determined");
        return std::nullopt;
    }
    try {
        return subsegment::SubsegmentMap::from_pancreas(subsegment::subsegment_pancreas(*pancreas, *sma));
    } catch (const Error& e) {
        if (e.code() != ErrorCode::SubsegmentationUnavailable && e.code() != ErrorCode::EmptyInput &&
            e.code() != ErrorCode::DegenerateCloud)
            throw;
        warnings.push_back(std::string("pancreas sub-segmentation unavailable: ") + e.what());
        return std::nullopt;
    }
}

std::optional<subsegment::SubsegmentMap> kidney_map(const std::map<std::string, Mask>& masks,
                                                    std::vector<std::string>& warnings) {
    std::vector<Mask> sides;
    for (auto label : {"kidney_left", "kidney_right"})
        if (const Mask* m = find(masks, label)) sides.push_back(*m);
    if (sides.empty()) return std::nullopt;
    try {
        return subsegment::SubsegmentMap::from_masks("kidneys", sides);
    } catch (const Error& e) {
        warnings.push_back(std::string("kidney side masks unusable: ") + e.what());
        return std::nullopt;
    }
}

Mask parenchyma_of(std::string_view organ_label, const Mask& organ, const std::map<std::string, Mask>& masks) {
    const Mask* t = nullptr;
    if (organ_label == "liver") t = find(masks, "liver_tumor");
    else if (organ_label == "pancreas") t = find(masks, "pancreatic_tumor");
    else if (organ_label.substr(0, 6) == "kidney") t = find(masks, "kidney_tumor");
    if (!t) return organ;
    Mask p = morphology::mask_and_not(organ, *t);
    return p.empty() ? organ : p;
}

struct Candidate {
    measurement::TumorInstance instance;
    report::TumorFinding finding;
};

void expand(BoundingBox& acc, const BoundingBox& b) {
    if (b.empty) return;
    if (acc.empty) {
        acc = b;
        return;
    }
    acc.lo = {std::min(acc.lo.x, b.lo.x), std::min(acc.lo.y, b.lo.y), std::min(acc.lo.z, b.lo.z)};
    acc.hi = {std::max(acc.hi.x, b.hi.x), std::max(acc.hi.y, b.hi.y), std::max(acc.hi.z, b.hi.z)};
}

}  // namespace

staging::TStage stage_tumor(const measurement::TumorInstance& inst, const measurement::TumorMeasurement& meas,
                            const std::map<std::string, Mask>& masks, const Config& cfg,
                            std::vector<std::string>* warnings) {
    BoundingBox box;
    box.empty = false;
    box.lo = inst.origin;
    box.hi = {inst.origin.x + inst.mask.dims().nx - 1, inst.origin.y + inst.mask.dims().ny - 1,
              inst.origin.z + inst.mask.dims().nz - 1};
    for (auto v : staging::kAllVessels)
        if (const Mask* m = find(masks, staging::vessel_name(v))) expand(box, bounding_box(*m));

    const Spacing& native = inst.parent_grid.spacing;
    const bool resample = !approx_equal(native, cfg.measurement_grid);
    const auto prepare = [&](const Mask& full) {
        Index3 origin;
        Mask c = crop(full, box, kStagingPad, origin);
        return resample ? resample_isotropic(c, cfg.measurement_grid) : c;
    };

    const Mask tumor = prepare(inst.to_parent());
    std::vector<staging::VesselContact> contacts;
    for (auto v : staging::kAllVessels) {
        std::optional<Mask> vessel;
        if (const Mask* m = find(masks, staging::vessel_name(v))) vessel = prepare(*m);
        else if (warnings)
            warnings->push_back(std::string(staging::vessel_name(v)) + " mask missing; contact not evaluated");
        auto c = staging::evaluate_vessel(tumor, vessel, v, cfg.contact);
        if (c.max_angle_deg) c.max_angle_deg = round_to(*c.max_angle_deg, 1);
        contacts.push_back(c);
    }
    return staging::stage_pdac(meas, contacts);
}

bool known_mask_label(std::string_view label) {
    if (std::find(kOrganLabels.begin(), kOrganLabels.end(), label) != kOrganLabels.end()) return true;
    if (std::find(kPancreasParts.begin(), kPancreasParts.end(), label) != kPancreasParts.end()) return true;
    for (auto v : staging::kAllVessels)
        if (staging::vessel_name(v) == label) return true;
    for (int k = 1; k <= kLiverSegments; ++k)
        if (label == liver_segment_label(k)) return true;
    return tumor_mask_organ(label).has_value();
}

std::optional<Organ> tumor_mask_organ(std::string_view label) {
    for (Organ o : kTumorOrgans)
        if (tumor_mask_label(o) == label) return o;
    return std::nullopt;
}

std::string_view tumor_mask_label(Organ organ) noexcept {
    switch (organ) {
        case Organ::Liver: return "liver_tumor";
        case Organ::Pancreas: return "pancreatic_tumor";
        case Organ::Kidney: return "kidney_tumor";
    }
    return "";
}

double StageTimings::total_ms() const noexcept {
    return std::accumulate(stages.begin(), stages.end(), 0.0,
                           [](double acc, const auto& s) { return acc + s.second; });
}

report::StructuredReport build_report(const CaseInputs& in, const Config& cfg, StageTimings* timings) {
    cfg.validate();
    if (in.volume.data().empty()) throw Error(ErrorCode::EmptyInput, "case '" + in.case_id + "' has an empty volume");
    Stopwatch clock(timings);

    report::StructuredReport r;
    r.case_id = in.case_id;
    r.generation_mode = cfg.mode;
    r.metadata = {in.volume.dims(), in.volume.spacing(), in.contrast_phase};
    auto& warnings = r.warnings;
    if (!affine_axis_aligned(in.volume.grid().affine))
        warnings.push_back("volume affine is not axis-aligned; measurements use voxel axes");

    std::map<std::string, Mask> masks;
    for (const auto& [label, m] : in.masks) {
        if (!known_mask_label(label)) {
            warnings.push_back("ignored unknown mask '" + label + "'");
            continue;
        }
        if (!m.grid().same_lattice(in.volume.grid()))
            throw Error(ErrorCode::GridMismatch, "mask '" + label + "' does not share the volume grid");
        masks.emplace(label, m);
    }
    clock.lap("validate");

    const bool automated = cfg.mode == report::GenerationMode::Automated;
    if (automated) {
        for (auto& [label, m] : masks)
            if (std::find(kOrganLabels.begin(), kOrganLabels.end(), label) != kOrganLabels.end() ||
                tumor_mask_organ(label))
                m = postprocess::denoise(m);
    }
    clock.lap("denoise");

    std::vector<Candidate> candidates;
    for (Organ o : kTumorOrgans) {
        const Mask* t = find(masks, tumor_mask_label(o));
        if (!t) continue;
        if (automated && !postprocess::tumor_present(*t, o, cfg.presence)) continue;
        for (auto& inst : measurement::split_instances(*t, o)) {
            Candidate c;
            c.finding.organ = o;
            c.instance = std::move(inst);
            candidates.push_back(std::move(c));
        }
    }
    clock.lap("instances");

    for (auto& c : candidates) c.finding.measurement = measurement::measure_instance(c.instance, in.volume, cfg.measurement_grid);
    clock.lap("measure");

    const auto lmap = liver_map(masks, warnings);
    const bool has_pdac = std::any_of(candidates.begin(), candidates.end(),
                                      [](const Candidate& c) { return c.finding.organ == Organ::Pancreas; });
    const auto pmap = has_pdac ? pancreas_map(masks, warnings) : std::nullopt;
    const auto kmap = kidney_map(masks, warnings);
    for (auto& c : candidates) {
        const auto& map = c.finding.organ == Organ::Liver ? lmap : c.finding.organ == Organ::Pancreas ? pmap : kmap;
        if (map) c.finding.locations = subsegment::localize_tumor(c.instance, *map);
    }
    clock.lap("localize");

    for (Organ o : kTumorOrgans) {
        const Mask* t = find(masks, tumor_mask_label(o));
        if (!t) continue;
        const auto host = host_mask(masks, o);
        if (!host) continue;
        const Mask parenchyma = morphology::mask_and_not(*host, *t);
        if (parenchyma.empty()) continue;
        const double ref = measurement::attenuation_stats(in.volume, parenchyma).mean;
        for (auto& c : candidates)
            if (c.finding.organ == o)
                c.finding.attenuation_class =
                    report::classify_attenuation(c.finding.measurement.hu_mean, ref, cfg.attenuation_delta_hu);
    }

    // Grouped by organ, descending D; split order (size) breaks ties.
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        const auto rank = [](Organ o) { return static_cast<int>(std::find(kTumorOrgans.begin(), kTumorOrgans.end(), o) - kTumorOrgans.begin()); };
        if (a.finding.organ != b.finding.organ) return rank(a.finding.organ) < rank(b.finding.organ);
        return a.finding.measurement.d_max_cm > b.finding.measurement.d_max_cm;
    });
    std::map<Organ, int> next_id;
    for (auto& c : candidates) {
        c.finding.instance_id = ++next_id[c.finding.organ];
        r.findings.push_back(c.finding);
    }

    std::optional<double> spleen_hu;
    if (const Mask* s = find(masks, "spleen"); s && !s->empty())
        spleen_hu = round_to(measurement::attenuation_stats(in.volume, *s).mean, 2);
    for (auto label : kOrganLabels) {
        const Mask* m = find(masks, label);
        if (!m) continue;
        report::OrganEntry e;
        e.organ = std::string(label);
        e.tumors_evaluated = tumors_evaluated_for(label, masks);
        if (m->empty()) {
            warnings.push_back("mask '" + e.organ + "' is empty; organ not assessed");
        } else {
            diagnostics::OrganAssessment a;
            a.organ = e.organ;
            a.volume_cm3 = round_to(measurement::physical_volume_cm3(*m), 3);
            // Attenuation describes parenchyma, so tumour voxels are left out.
            const auto att = measurement::attenuation_stats(in.volume, parenchyma_of(label, *m, masks));
            a.hu_mean = round_to(att.mean, 2);
            a.hu_std = round_to(att.std, 2);
            a.size_class = diagnostics::classify_organ_size(diagnostics::parse_sized_organ(label), a.volume_cm3,
                                                            cfg.diagnostics);
            if (label == "liver") a.fatty = diagnostics::assess_fatty_liver(a.hu_mean, cfg.diagnostics);
            if (label == "pancreas") {
                try {
                    a.fatty = diagnostics::assess_fatty_pancreas(a.hu_mean, spleen_hu, cfg.diagnostics);
                } catch (const Error& err) {
                    warnings.push_back(std::string("fatty pancreas not assessed: ") + err.what());
                }
            }
            e.assessment = a;
        }
        r.organs.push_back(std::move(e));
    }
    for (Organ o : kTumorOrgans) {
        if (!find(masks, tumor_mask_label(o))) {
            warnings.push_back(std::string(tumor_mask_label(o)) + " mask missing; " + std::string(organ_name(o)) +
                               " tumours not evaluated");
            continue;
        }
        if (host_mask(masks, o)) continue;
        warnings.push_back(std::string(entry_label(o)) + " mask missing; organ not assessed");
        r.organs.push_back({std::string(entry_label(o)), true, std::nullopt});
    }
    clock.lap("diagnostics");

    const auto pdac = std::find_if(candidates.begin(), candidates.end(),
                                   [](const Candidate& c) { return c.finding.organ == Organ::Pancreas; });
    if (pdac != candidates.end())
        r.pdac_stage = stage_tumor(pdac->instance, pdac->finding.measurement, masks, cfg, &warnings);
    clock.lap("staging");
    return r;
}

}  // namespace radrep::pipeline
