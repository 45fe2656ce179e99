#include <doctest.h>

#include <json.hpp>

#include "radrep/error.hpp"
#include "radrep/report.hpp"
#include "testing.hpp"

using namespace radrep;
using namespace radrep::report;
using nlohmann::json;

namespace {

TumorFinding pdac_example() {
    TumorFinding f;
    f.organ = Organ::Pancreas;
    f.instance_id = 1;
    f.measurement = {6.0, 3.4, 356, 27.519, 39.17, 29.65};
    f.locations = {{"pancreas_tail", 0.6}, {"pancreas_body", 0.4}};
    f.attenuation_class = AttenuationClass::Hypo;
    return f;
}

StructuredReport sample() {
    StructuredReport r;
    r.case_id = "case_0007";
    r.metadata = {{64, 48, 32}, {0.8, 0.8, 2.5}, std::string("venous")};
    r.generation_mode = GenerationMode::Automated;

    diagnostics::OrganAssessment liver;
    liver.organ = "liver";
    liver.volume_cm3 = 1523.25;
    liver.hu_mean = 35.5;
    liver.hu_std = 12.125;
    liver.fatty = true;
    r.organs.push_back({"liver", true, liver});
    r.organs.push_back({"pancreas", true, std::nullopt});
    r.organs.push_back({"kidney_left", false, std::nullopt});

    TumorFinding l1;
    l1.organ = Organ::Liver;
    l1.instance_id = 1;
    l1.measurement = {2.3, 1.9, 40, 4.001, 80.5, 10.25};
    l1.locations = {{"liver_segment_7", 1.0}};
    TumorFinding l2 = l1;
    l2.instance_id = 2;
    l2.measurement.d_max_cm = 1.1;
    l2.measurement.d_perp_cm = 0.7;
    l2.locations = {{"liver_segment_2", 0.75}, {"liver_segment_3", 0.25}};
    r.findings = {l1, l2, pdac_example()};

    staging::TStage st;
    st.stage = staging::Stage::T4;
    st.d_max_cm = 6.0;
    st.d_perp_cm = 3.4;
    staging::VesselContact sma;
    sma.vessel = staging::Vessel::SMA;
    sma.contact = true;
    sma.max_angle_deg = 212.5;
    staging::VesselContact ca;
    ca.vessel = staging::Vessel::CA;
    staging::VesselContact cha;
    cha.vessel = staging::Vessel::CHA;
    cha.evaluated = false;
    st.contacts = {sma, ca, cha};
    st.justification = "tumor 6.0 x 3.4 cm; SMA contact 212.5 deg; CA no contact; CHA not evaluated";
    r.pdac_stage = st;
    r.warnings = {"kidney_left: tumor mask missing"};
    return r;
}

const Organ kOrgans[] = {Organ::Liver, Organ::Pancreas, Organ::Kidney};

std::string pointer_of(const std::string& text) {
    try {
        from_json(text);
    } catch (const SchemaError& e) {
        return e.pointer();
    }
    FAIL("no schema error");
    return {};
}

}  // namespace

TEST_CASE("the finding sentence matches the published example") {
    StructuredReport r;
    r.case_id = "x";
    r.organs.push_back({"pancreas", true, std::nullopt});
    r.findings = {pdac_example()};
    const std::string text = render_text(r);
    CHECK(text.find("PDAC 1: Pancreatic body/tail. Hypoattenuating pancreas PDAC measuring 6.0 x 3.4 cm (centered on "
                    "slice 356). Its mean HU value is 39.17 +/- 29.65, and its volume is 27.519 cm3.\n") !=
          std::string::npos);
}

TEST_CASE("control report: every evaluated organ is unremarkable") {
    StructuredReport r;
    r.case_id = "control";
    for (const char* o : {"liver", "pancreas", "kidneys"}) r.organs.push_back({o, true, std::nullopt});
    const std::string text = render_text(r);
    CHECK(text.find("Liver: unremarkable.") != std::string::npos);
    CHECK(text.find("Pancreas: unremarkable.") != std::string::npos);
    CHECK(text.find("Kidneys: unremarkable.") != std::string::npos);
    CHECK(text.find("No PDAC to stage.") != std::string::npos);
    CHECK(text.find("- No tumor detected in the evaluated organs.") != std::string::npos);
}

TEST_CASE("section order is fixed and rendering is deterministic") {
    const StructuredReport r = sample();
    const std::string text = render_text(r);
    CHECK(text == render_text(r));
    std::size_t last = 0;
    for (const char* h : {"STRUCTURED REPORT", "\nFINDINGS\n", "\nLIVER\n", "\nPANCREAS\n", "\nKIDNEYS\n",
                          "\nSTAGING\n", "\nIMPRESSION\n", "\nNOTES\n"}) {
        const auto at = text.find(h);
        CAPTURE(h);
        REQUIRE(at != std::string::npos);
        CHECK(at >= last);
        last = at;
    }
    CHECK(text.find("Liver lesion 2: Hepatic segments 2/3.") != std::string::npos);
    CHECK(text.find("SMA: contact over 212.5 degrees") != std::string::npos);
    CHECK(text.find("CHA: not evaluated") != std::string::npos);
    CHECK(text.find("Kidneys tumors: not evaluated.") != std::string::npos);
    CHECK(text.find("Findings suggest fatty liver.") != std::string::npos);
    CHECK(text.find("- Fatty liver.") != std::string::npos);
}

TEST_CASE("attenuation class rule") {
    CHECK(classify_attenuation(30, 45) == AttenuationClass::Hypo);
    CHECK(classify_attenuation(35, 45) == AttenuationClass::Iso);
    CHECK(classify_attenuation(55, 45) == AttenuationClass::Iso);
    CHECK(classify_attenuation(55.5, 45) == AttenuationClass::Hyper);
    CHECK(classify_attenuation(30, 45, 20) == AttenuationClass::Iso);
    for (AttenuationClass c : {AttenuationClass::Hypo, AttenuationClass::Iso, AttenuationClass::Hyper})
        CHECK(parse_attenuation(attenuation_name(c)) == c);
    CHECK(parse_mode("automated") == GenerationMode::Automated);
    CHECK(parse_mode(mode_name(GenerationMode::GroundTruthMasks)) == GenerationMode::GroundTruthMasks);
    CHECK_THROWS_AS(parse_mode("manual"), Error);
}

TEST_CASE("JSON round trip") {
    const StructuredReport r = sample();
    const std::string j = to_json(r);
    CHECK(from_json(j) == r);
    CHECK(to_json(from_json(j)) == j);
    CHECK(j.back() == '\n');
    CHECK(json::parse(j)["schema"] == std::string(kSchemaVersion));

    StructuredReport empty;
    empty.case_id = "e";
    CHECK(from_json(to_json(empty)) == empty);
}

TEST_CASE("property: random reports round trip") {
    testing::Lcg rng(71);
    for (int trial = 0; trial < 200; ++trial) {
        StructuredReport r;
        r.case_id = "c" + std::to_string(trial);
        r.metadata.dims = {rng.range(1, 512), rng.range(1, 512), rng.range(1, 512)};
        r.metadata.spacing = {rng.uniform(0.3, 3), rng.uniform(0.3, 3), rng.uniform(0.3, 5)};
        const int n = static_cast<int>(rng.range(0, 5));
        for (int i = 0; i < n; ++i) {
            TumorFinding f;
            f.organ = kOrgans[rng.range(0, 2)];
            f.instance_id = i + 1;
            const double d = rng.uniform(0.1, 9);
            f.measurement = {d, d * rng.uniform(0.2, 1), rng.range(0, 300), rng.uniform(0, 300),
                             rng.uniform(-100, 200), rng.uniform(0, 60)};
            if (rng.bit(500)) f.locations.push_back({"segment_" + std::to_string(rng.range(1, 8)), rng.uniform()});
            if (rng.bit(500)) f.attenuation_class = static_cast<AttenuationClass>(rng.range(0, 2));
            r.findings.push_back(f);
        }
        if (rng.bit(300)) r.warnings.push_back("w\"\\\n\t" + std::to_string(rng.next()));
        CAPTURE(trial);
        CHECK(from_json(to_json(r)) == r);
    }
}

TEST_CASE("schema errors carry a JSON pointer") {
    json j = json::parse(to_json(sample()));
    j["findings"][0].erase("organ");
    CHECK(pointer_of(j.dump()) == "/findings/0/organ");

    json k = json::parse(to_json(sample()));
    k["findings"][2]["organ"] = "heart";
    CHECK(pointer_of(k.dump()) == "/findings/2/organ");

    json m = json::parse(to_json(sample()));
    m["findings"][1]["measurement"]["d_max_cm"] = "big";
    CHECK(pointer_of(m.dump()) == "/findings/1/measurement/d_max_cm");

    json s = json::parse(to_json(sample()));
    s["schema"] = "radrep-report/999";
    CHECK_THROWS_AS(from_json(s.dump()), SchemaError);

    CHECK_THROWS_AS(from_json("{not json"), ParseError);
}

TEST_CASE("finding order is semantic") {
    StructuredReport a = sample();
    StructuredReport b = a;
    std::swap(b.findings[0], b.findings[1]);
    CHECK(to_json(a) != to_json(b));
    CHECK_FALSE(a == b);
}

TEST_CASE("lookups") {
    const StructuredReport r = sample();
    REQUIRE(r.organ("liver") != nullptr);
    CHECK(r.organ("spleen") == nullptr);
    CHECK(r.findings_for(Organ::Liver).size() == 2);
    CHECK(r.findings_for(Organ::Kidney).empty());
}
