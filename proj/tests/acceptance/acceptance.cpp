// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed here
// and nowhere else; exit status is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <functional>
#include <future>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "radrep/diagnostics.hpp"
#include "radrep/error.hpp"
#include "radrep/evaluation.hpp"
#include "radrep/geometry.hpp"
#include "radrep/measurement.hpp"
#include "radrep/morphology.hpp"
#include "radrep/nifti.hpp"
#include "radrep/phantom.hpp"
#include "radrep/pipeline.hpp"
#include "radrep/postprocess.hpp"
#include "radrep/staging.hpp"
#include "radrep/subsegment.hpp"
#include "radrep/textgen.hpp"
#include "testing.hpp"

using namespace radrep;
using phantom::Shape;
using testing::voxelize;

namespace {

constexpr double kSizeTolerance = 0.07;           // relative, WHO diameters and per-lesion sizes
constexpr double kInstanceSeconds = 2.0;          // one instance on a 256^3 grid
constexpr std::size_t kOracleBorderLimit = 400;   // slices compared against the O(n^2) oracle
constexpr double kMinEncasementDeg = 350.0;
constexpr double kPlaneToleranceVoxels = 1.0;
constexpr double kRotationJaccard = 0.95;
constexpr int kRandomMasks = 1000;
constexpr double kDeskSeconds = 30.0;
constexpr std::size_t kLiverLesions = 24;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Collects failed expectations for one criterion.
class Tally {
public:
    void expect(bool ok, const std::string& what) {
        ++checks_;
        if (!ok && failures_.size() < 5) failures_.push_back(what);
        failed_ += !ok;
    }
    void note(const std::string& s) { notes_.push_back(s); }
    bool ok() const { return failed_ == 0; }
    std::string summary() const {
        std::ostringstream os;
        os << checks_ - failed_ << "/" << checks_ << " checks";
        for (const auto& n : notes_) os << "; " << n;
        for (const auto& f : failures_) os << "; failed: " << f;
        return os.str();
    }

private:
    std::size_t checks_ = 0, failed_ = 0;
    std::vector<std::string> failures_, notes_;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

bool within(double got, double want, double rel) { return std::abs(got - want) <= rel * std::abs(want); }

measurement::TumorInstance only_instance(const Mask& m, Organ o = Organ::Liver) {
    auto v = measurement::split_instances(m, o);
    if (v.size() != 1) throw std::runtime_error("expected one instance");
    return std::move(v.front());
}

// ---------------------------------------------------------------------------

void who_measurement(Tally& t) {
    struct Case {
        phantom::Vec3 axes;
        double rotation;
    };
    std::vector<Case> cases;
    for (double r : {5.0, 10.0, 20.0, 30.0}) cases.push_back({{r, r, r}, 0});
    for (double deg : {0.0, 30.0, 60.0})
        for (phantom::Vec3 a : {phantom::Vec3{30, 10, 8}, phantom::Vec3{24, 12, 10}, phantom::Vec3{18, 9, 6},
                                phantom::Vec3{15, 10, 12}})
            cases.push_back({a, deg});

    std::size_t oracle_slices = 0;
    for (const auto& c : cases) {
        const double extent = std::max({c.axes[0], c.axes[1], c.axes[2]});
        const std::int64_t n = static_cast<std::int64_t>(2 * extent) + 5;
        const double mid = static_cast<double>(n - 1) / 2;
        const Mask m = voxelize(Shape::ellipsoid({mid, mid, mid}, c.axes, {c.rotation, 0, 0}), {n, n, n});
        const auto meas = measurement::measure_who(only_instance(m));
        const std::string tag = fmt("axes %.0f/%.0f rot %.0f", c.axes[0], c.axes[1], c.rotation);
        t.expect(within(meas.d_max_cm, 2 * c.axes[0] / 10, kSizeTolerance), tag + " D");
        t.expect(within(meas.d_perp_cm, 2 * c.axes[1] / 10, kSizeTolerance), tag + " d");

        // The library's slice search against the naive diameter oracle.
        const auto ad = measurement::axial_diameters(m);
        std::int64_t best = 0;
        bool all_small = true;
        for (std::int64_t z = 0; z < n; ++z) {
            const auto pts = measurement::border_points(m, z);
            if (pts.empty()) continue;
            if (pts.size() > kOracleBorderLimit) {
                all_small = false;
                continue;
            }
            const std::int64_t want = testing::brute_diameter_sq(pts);
            t.expect(measurement::brute_force_diameter_sq(pts) == want, tag + " slice oracle");
            best = std::max(best, want);
            ++oracle_slices;
        }
        if (all_small) t.expect(ad.d_max_mm == std::sqrt(static_cast<double>(best)), tag + " D equals oracle");
    }

    const Dims big{256, 256, 256};
    const Mask sphere = voxelize(Shape::sphere({128, 128, 128}, 30), big);
    const auto t0 = Clock::now();
    const auto meas = measurement::measure_who(only_instance(sphere));
    const double s = seconds_since(t0);
    t.expect(s < kInstanceSeconds, fmt("256^3 instance took %.2f s", s));
    t.expect(within(meas.d_max_cm, 6.0, kSizeTolerance), "256^3 sphere D");
    t.note(fmt("%.0f shapes, %.0f oracle slices, 256^3 instance %.2f s", static_cast<double>(cases.size()),
               static_cast<double>(oracle_slices), s));
}

// ---------------------------------------------------------------------------

pipeline::CaseInputs inputs_for(const std::string& name, phantom::GroundTruth* truth = nullptr,
                                phantom::PhantomSpec* spec_out = nullptr) {
    const phantom::PhantomSpec spec = phantom::scenario(name);
    phantom::Phantom p = phantom::generate(spec);
    if (truth) *truth = p.truth;
    if (spec_out) *spec_out = spec;
    return {name, std::move(p.volume), std::move(p.masks), std::nullopt};
}

staging::Stage table_stage(int tenths, int angle_deg, staging::Vessel v) {
    using staging::Stage;
    if (v != staging::Vessel::SA && angle_deg >= 180) return Stage::T4;
    if (tenths <= 5) return Stage::T1a;
    if (tenths <= 10) return Stage::T1b;
    if (tenths <= 20) return Stage::T1c;
    if (tenths <= 40) return Stage::T2;
    return Stage::T3;
}

void staging_table(Tally& t) {
    using namespace staging;
    std::size_t mismatches = 0, cells = 0;
    for (int tenths = 1; tenths <= 80; ++tenths)
        for (int angle = 0; angle <= 360; ++angle)
            for (Vessel v : {Vessel::SMA, Vessel::CHA, Vessel::CA, Vessel::SA}) {
                measurement::TumorMeasurement m;
                m.d_max_cm = m.d_perp_cm = tenths / 10.0;
                VesselContact c;
                c.vessel = v;
                c.evaluated = true;
                c.contact = true;
                c.max_angle_deg = angle;
                mismatches += stage_pdac(m, {c}).stage != table_stage(tenths, angle, v);
                ++cells;
            }
    t.expect(mismatches == 0, fmt("%.0f table mismatches", static_cast<double>(mismatches)));
    t.note(fmt("%.0f table cells", static_cast<double>(cells)));

    const auto r = pipeline::build_report(inputs_for("t4_encasement"), Config{});
    t.expect(r.pdac_stage && r.pdac_stage->stage == Stage::T4, "t4_encasement stage");
    double sma = -1;
    if (r.pdac_stage)
        for (const auto& c : r.pdac_stage->contacts)
            if (c.vessel == Vessel::SMA && c.max_angle_deg) sma = *c.max_angle_deg;
    t.expect(sma >= kMinEncasementDeg, fmt("SMA angle %.1f", sma));
    t.note(fmt("t4_encasement SMA %.1f deg", sma));

    for (const char* name : {"t1a", "t1b", "t1c", "t2", "t3"}) {
        phantom::GroundTruth truth;
        const auto rep = pipeline::build_report(inputs_for(name, &truth), Config{});
        const bool ok = rep.pdac_stage && truth.expected_stage &&
                        stage_name(rep.pdac_stage->stage) == *truth.expected_stage;
        t.expect(ok, std::string(name) + " bucket");
    }
}

// ---------------------------------------------------------------------------

Mask rotate_z(const Mask& m, double deg, const phantom::Vec3& pivot) {
    const double c = std::cos(deg * M_PI / 180), s = std::sin(deg * M_PI / 180);
    Mask out = testing::empty_mask(m.dims(), m.spacing(), m.label());
    const auto& d = m.dims();
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) {
                const double dx = static_cast<double>(x) - pivot[0], dy = static_cast<double>(y) - pivot[1];
                out.set(x, y, z, m.get(std::llround(c * dx + s * dy + pivot[0]), std::llround(-s * dx + c * dy + pivot[1]), z));
            }
    return out;
}

bool exact_partition(const subsegment::PancreasSubsegments& p, const Mask& pancreas) {
    const auto& o = pancreas.bits();
    for (std::size_t i = 0; i < o.size(); ++i)
        if (p.head.bits()[i] + p.body.bits()[i] + p.tail.bits()[i] != (o[i] ? 1 : 0)) return false;
    return true;
}

void subsegmentation(Tally& t) {
    std::size_t phantoms = 0;
    for (const auto& name : phantom::scenario_names()) {
        if (name == "desk256") continue;  // covered by the end-to-end criterion
        const auto p = phantom::generate(phantom::scenario(name));
        const auto parts = subsegment::subsegment_pancreas(p.masks.at("pancreas"), p.masks.at("SMA"));
        t.expect(exact_partition(parts, p.masks.at("pancreas")), name + " partition");
        ++phantoms;
    }

    // Straight pancreas along x from 12 to 118 mm, SMA crossing at sma_x.
    const Dims dims{130, 100, 60};
    const Mask pancreas = voxelize(Shape::tube({{20, 50, 30}, {110, 50, 30}}, 8), dims);
    for (double sma_x : {40.0, 50.0, 60.0}) {
        const Mask sma = voxelize(Shape::tube({{sma_x, 62, 5}, {sma_x, 62, 55}}, 3), dims);
        const auto parts = subsegment::subsegment_pancreas(pancreas, sma);
        t.expect(exact_partition(parts, pancreas), fmt("straight %.0f partition", sma_x));
        const double shift = geometry::align_to_x(pancreas).transform.apply({0, 0, 0})[0];
        const double hb = parts.head_body_plane_mm - shift, bt = parts.body_tail_plane_mm - shift;
        t.expect(std::abs(hb - sma_x) <= kPlaneToleranceVoxels, fmt("head/body plane %.1f vs %.1f", hb, sma_x));
        const double want_bt = (sma_x + 118) / 2;
        t.expect(std::abs(bt - want_bt) <= kPlaneToleranceVoxels, fmt("body/tail plane %.1f vs %.1f", bt, want_bt));
    }

    const Mask bulbous = morphology::mask_or(pancreas, voxelize(Shape::sphere({28, 50, 30}, 14), dims));
    const Mask sma = voxelize(Shape::tube({{50, 62, 5}, {50, 62, 55}}, 3), dims);
    const auto ref = subsegment::subsegment_pancreas(bulbous, sma);
    const phantom::Vec3 pivot{65, 50, 30};
    const Mask rp = rotate_z(bulbous, 45, pivot);
    const auto got = subsegment::subsegment_pancreas(rp, rotate_z(sma, 45, pivot));
    t.expect(exact_partition(got, rp), "rotated partition");
    double worst = 1;
    for (auto [a, b] : {std::pair{&got.head, &ref.head}, std::pair{&got.body, &ref.body}, std::pair{&got.tail, &ref.tail}}) {
        const double j = geometry::jaccard(rotate_z(*a, -45, pivot), *b);
        worst = std::min(worst, j);
        t.expect(j >= kRotationJaccard, fmt("45 deg Jaccard %.3f", j));
    }
    t.note(fmt("%.0f phantoms partitioned; 45 deg Jaccard min %.3f", static_cast<double>(phantoms), worst));
}

// ---------------------------------------------------------------------------

void denoising(Tally& t) {
    testing::Lcg rng(2024);
    std::size_t violations = 0;
    for (int i = 0; i < kRandomMasks; ++i) {
        const Dims d{rng.range(4, 20), rng.range(4, 20), rng.range(4, 20)};
        Mask m = rng.bit(500) ? testing::lcg_mask(d, rng.next(), static_cast<unsigned>(rng.range(50, 700)))
                              : testing::random_blobs(rng, d, static_cast<int>(rng.range(1, 6)), 8);
        violations += !morphology::is_subset(postprocess::denoise(m), m);
    }
    t.expect(violations == 0, fmt("%.0f masks not subsets", static_cast<double>(violations)));

    const Dims d{20, 20, 20};
    t.expect(postprocess::denoise(testing::box_mask(d, {9, 9, 9}, {9, 9, 9})).empty(), "isolated voxel removed");
    t.expect(postprocess::denoise(testing::box_mask(d, {5, 5, 5}, {6, 6, 6})).empty(), "2x2x2 removed");
    const Mask cube = testing::box_mask(d, {5, 5, 5}, {14, 14, 14});
    t.expect(postprocess::denoise(cube) == cube, "10^3 cube preserved");

    t.expect(postprocess::tumor_present(testing::box_mask(d, {0, 0, 0}, {1, 0, 0}), Organ::Pancreas),
             "2 mm3 pancreas present");
    const Mask hundred = testing::box_mask(d, {0, 0, 0}, {9, 9, 0});
    t.expect(!postprocess::tumor_present(hundred, Organ::Kidney), "100 mm3 kidney absent");
    t.expect(!postprocess::tumor_present(hundred, Organ::Liver), "100 mm3 liver absent");
    t.expect(postprocess::metastasis_present(hundred), "100 mm3 metastasis present");
    t.note(fmt("%.0f random masks", kRandomMasks));
}

// ---------------------------------------------------------------------------

void published_metrics(Tally& t) {
    struct Cell {
        const char* name;
        std::size_t sn, sd, pn, pd;
        const char *sens, *spec;
    };
    // Printed count pairs with their printed percentages.
    const Cell cells[] = {
        {"liver large", 269, 301, 179, 244, "89.4", "73.4"},
        {"kidney large", 213, 219, 191, 244, "97.3", "78.3"},
        {"pancreas large", 96, 105, 187, 244, "91.4", "76.6"},
        {"metastases large", 58, 58, 111, 158, "100.0", "70.3"},
        {"liver small", 113, 142, 179, 244, "79.6", "73.4"},
        {"kidney small", 46, 50, 191, 244, "92.0", "78.3"},
        {"pancreas small", 296, 385, 187, 244, "76.9", "76.6"},
        {"metastases small", 21, 21, 111, 158, "100.0", "70.3"},
    };
    for (const auto& c : cells) {
        const auto m = evaluation::metrics_from_counts({c.sn, c.pd - c.pn, c.pn, c.sd - c.sn});
        t.expect(evaluation::percent(m.sensitivity) == c.sens, std::string(c.name) + " sensitivity");
        t.expect(evaluation::percent(m.specificity) == c.spec, std::string(c.name) + " specificity");
    }
    t.note("16 cells");
}

// ---------------------------------------------------------------------------

void diagnostics_thresholds(Tally& t) {
    using namespace diagnostics;
    t.expect(!assess_fatty_liver(40.0), "40 HU not fatty");
    t.expect(assess_fatty_liver(std::nextafter(40.0, 0.0)), "below 40 HU fatty");
    t.expect(!assess_fatty_pancreas(70.0, 100.0), "ratio 0.7 not fatty");
    t.expect(assess_fatty_pancreas(std::nextafter(70.0, 0.0), 100.0), "ratio below 0.7 fatty");
    t.expect(!assess_fatty_pancreas(std::nextafter(70.0, 1e9), 100.0), "ratio above 0.7 not fatty");
    struct Edge {
        SizedOrgan organ;
        double at;
        SizeClass at_or_below, above;
    };
    const Edge edges[] = {
        {SizedOrgan::Spleen, 314.5, SizeClass::Normal, SizeClass::Large},
        {SizedOrgan::Spleen, 430.8, SizeClass::Large, SizeClass::Massive},
        {SizedOrgan::Kidneys, 415.2, SizeClass::Normal, SizeClass::Large},
        {SizedOrgan::Liver, 3000, SizeClass::Normal, SizeClass::Large},
        {SizedOrgan::Pancreas, 83, SizeClass::Normal, SizeClass::Large},
    };
    for (const auto& e : edges) {
        const std::string tag = std::string(sized_organ_name(e.organ)) + fmt(" %.1f", e.at);
        t.expect(classify_organ_size(e.organ, e.at) == e.at_or_below, tag + " at");
        t.expect(classify_organ_size(e.organ, std::nextafter(e.at, 0.0)) == e.at_or_below, tag + " below");
        t.expect(classify_organ_size(e.organ, std::nextafter(e.at, 1e9)) == e.above, tag + " above");
    }
}

// ---------------------------------------------------------------------------

void determinism(Tally& t) {
    const auto in = inputs_for("pancreas_large");
    const std::string a = report::to_json(pipeline::build_report(in, Config{}));
    t.expect(a == report::to_json(pipeline::build_report(in, Config{})), "two runs");
    std::vector<std::future<std::string>> futs;
    for (int i = 0; i < 4; ++i)
        futs.push_back(std::async(std::launch::async, [&] { return report::to_json(pipeline::build_report(in, Config{})); }));
    for (auto& f : futs) t.expect(f.get() == a, "concurrent run");
    Config jobs;
    jobs.jobs = 4;
    t.expect(report::to_json(pipeline::build_report(in, jobs)) == a, "jobs 4");
    t.expect(report::to_json(report::from_json(a)) == a, "report JSON round trip");

    const auto vol_bytes = nifti::encode(in.volume);
    const Volume v2 = nifti::decode_volume(vol_bytes);
    t.expect(v2.grid().same_lattice(in.volume.grid()) &&
                 std::equal(v2.data().begin(), v2.data().end(), in.volume.data().begin(), in.volume.data().end()),
             "NIfTI volume round trip");
    for (const auto& [label, m] : in.masks)
        t.expect(nifti::decode_mask(nifti::encode(m), label) == m, "NIfTI mask round trip " + label);

    using nlohmann::json;
    const std::filesystem::path golden = RADREP_GOLDEN_DIR;
    const json fx = json::parse(testing::slurp(golden / "prompt_fixture.json"));
    const std::string structured = fx["structured"];
    const auto examples = fx["examples"].get<std::vector<std::string>>();
    t.expect(textgen::build_style_prompt(structured, examples).user == testing::slurp(golden / "style_prompt.txt"),
             "style prompt golden");
    t.expect(textgen::build_fusion_prompt(fx["notes"].get<std::string>(), structured).user == testing::slurp(golden / "fusion_prompt.txt"),
             "fusion prompt golden");
    t.expect(textgen::build_label_prompt(structured).user == testing::slurp(golden / "label_prompt.txt"),
             "label prompt golden");
}

// ---------------------------------------------------------------------------

void desk_scale(Tally& t) {
    Config automated;
    automated.mode = report::GenerationMode::Automated;
    automated.jobs = 1;
    const auto desk = inputs_for("desk256");
    const auto t0 = Clock::now();
    const auto r = pipeline::build_report(desk, automated);
    const std::string text = report::render_text(r);
    const double s = seconds_since(t0);
    t.expect(s < kDeskSeconds, fmt("desk256 took %.1f s", s));
    t.expect(!text.empty() && !r.findings.empty(), "desk256 report has findings");

    phantom::GroundTruth truth;
    phantom::PhantomSpec spec;
    const auto in = inputs_for("liver_24", &truth, &spec);
    const auto rep = pipeline::build_report(in, Config{});
    const auto found = rep.findings_for(Organ::Liver);
    t.expect(found.size() == kLiverLesions, fmt("%.0f liver findings", static_cast<double>(found.size())));

    // Match each truth lesion to the instance covering its voxels.
    const auto instances = measurement::split_instances(in.masks.at("liver_tumor"), Organ::Liver);
    std::size_t matched = 0;
    double worst = 0;
    for (const auto& tt : truth.tumors) {
        const phantom::Structure* st = nullptr;
        for (const auto& s2 : spec.structures)
            if (s2.name == tt.name) st = &s2;
        if (!st || !tt.d_max_cm || !tt.d_perp_cm) continue;
        const Mask own = voxelize(st->shape, spec.dims, spec.spacing);
        int id = 0;
        for (const auto& inst : instances)
            if (morphology::overlap_count(inst.to_parent(), own) * 2 > own.count()) id = inst.instance_id;
        const report::TumorFinding* f = nullptr;
        for (const auto* x : found)
            if (x->instance_id == id) f = x;
        if (!f) {
            t.expect(false, tt.name + " unmatched");
            continue;
        }
        ++matched;
        const double eD = std::abs(f->measurement.d_max_cm - *tt.d_max_cm) / *tt.d_max_cm;
        const double ed = std::abs(f->measurement.d_perp_cm - *tt.d_perp_cm) / *tt.d_perp_cm;
        worst = std::max({worst, eD, ed});
        t.expect(eD <= kSizeTolerance, tt.name + fmt(" D %.1f vs %.2f", f->measurement.d_max_cm, *tt.d_max_cm));
        t.expect(ed <= kSizeTolerance, tt.name + fmt(" d %.1f vs %.2f", f->measurement.d_perp_cm, *tt.d_perp_cm));
    }
    t.expect(matched == kLiverLesions, "every lesion matched");
    t.note(fmt("desk256 %.1f s; liver_24 %.0f lesions, worst size error %.1f%%", s, static_cast<double>(matched),
               100 * worst));
}

// ---------------------------------------------------------------------------

void labels(Tally& t) {
    using evaluation::Label;
    const Label all[] = {Label::Yes, Label::No, Label::Uncertain};
    for (Label l : all)
        for (Label k : all)
            for (Label p : all) {
                evaluation::TumorLabels x;
                x.liver = l;
                x.kidney = k;
                x.pancreas = p;
                t.expect(evaluation::parse_labels(evaluation::format_labels(x)) == x, evaluation::format_labels(x));
            }

    std::size_t cases = 0;
    for (const auto& name : phantom::scenario_names()) {
        if (name == "desk256") continue;
        const auto in = inputs_for(name);
        for (auto mode : {report::GenerationMode::GroundTruthMasks, report::GenerationMode::Automated}) {
            Config cfg;
            cfg.mode = mode;
            const auto got = evaluation::rule_label_structured(pipeline::build_report(in, cfg));
            for (Organ o : evaluation::kLabelOrgans) {
                const Mask& m = in.masks.at(std::string(pipeline::tumor_mask_label(o)));
                const bool present = mode == report::GenerationMode::Automated
                                         ? postprocess::tumor_present(postprocess::denoise(m), o)
                                         : !m.empty();
                t.expect((got.get(o) == Label::Yes) == present, name + " " + std::string(organ_name(o)));
            }
            ++cases;
        }
    }
    t.note(fmt("27 label sets; %.0f phantom runs", static_cast<double>(cases)));
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<void(Tally&)>> criteria[] = {
        {"WHO measurement accuracy", who_measurement},
        {"staging decision table", staging_table},
        {"pancreas sub-segmentation", subsegmentation},
        {"noise reduction", denoising},
        {"metrics reproduce the published table", published_metrics},
        {"diagnostics thresholds", diagnostics_thresholds},
        {"determinism and round trips", determinism},
        {"end-to-end desk scale", desk_scale},
        {"labeler plumbing", labels},
    };
    int failed = 0, n = 0;
    for (const auto& [name, run] : criteria) {
        ++n;
        Tally t;
        const auto t0 = Clock::now();
        try {
            run(t);
        } catch (const std::exception& e) {
            t.expect(false, std::string("exception: ") + e.what());
        }
        std::printf("%s [%d] %s (%.1f s): %s\n", t.ok() ? "PASS" : "FAIL", n, name, seconds_since(t0),
                    t.summary().c_str());
        std::fflush(stdout);
        failed += !t.ok();
    }
    return failed;
}
