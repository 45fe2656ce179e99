#include <doctest.h>

#include <cmath>

#include "radrep/error.hpp"
#include "radrep/geometry.hpp"
#include "radrep/morphology.hpp"
#include "radrep/staging.hpp"
#include "testing.hpp"

using namespace radrep;
using namespace radrep::staging;
using namespace radrep::testing;
using phantom::Shape;

namespace {

const Dims kDims{60, 60, 60};
const phantom::Vec3 kAxisLo{30, 30, 4}, kAxisHi{30, 30, 56};
constexpr double kVesselR = 3;

Mask vessel_tube() { return voxelize(Shape::tube({kAxisLo, kAxisHi}, kVesselR), kDims, {}, "sma"); }

measurement::TumorMeasurement meas(double d, double p = 0) {
    measurement::TumorMeasurement m;
    m.d_max_cm = d;
    m.d_perp_cm = p == 0 ? d : p;
    return m;
}

VesselContact touching(Vessel v, double angle) {
    VesselContact c;
    c.vessel = v;
    c.contact = true;
    c.max_angle_deg = angle;
    return c;
}

// Independent decision table on tenths of a centimetre.
Stage table_stage(int tenths, int angle_deg, Vessel v) {
    if (v != Vessel::SA && angle_deg >= 180) return Stage::T4;
    if (tenths <= 5) return Stage::T1a;
    if (tenths <= 10) return Stage::T1b;
    if (tenths <= 20) return Stage::T1c;
    if (tenths <= 40) return Stage::T2;
    return Stage::T3;
}

// Annulus around the vessel between radii (r_in, r_out] over z in [z0, z1].
// With `half` it keeps dx >= 2 plus dx == 1 on the dy > 0 side: after the
// 3x3x3 dilation this covers exactly one of each point-symmetric pair of
// border voxels.
Mask ring(double r_in, double r_out, std::int64_t z0, std::int64_t z1, bool half) {
    Mask m = empty_mask(kDims, {}, "tumor");
    for (std::int64_t z = z0; z <= z1; ++z)
        for (std::int64_t y = 0; y < kDims.ny; ++y)
            for (std::int64_t x = 0; x < kDims.nx; ++x) {
                const std::int64_t dx = x - 30, dy = y - 30;
                const double r = std::hypot(static_cast<double>(dx), static_cast<double>(dy));
                const bool side = dx >= 2 || (dx == 1 && dy > 0);
                if (r > r_in && r <= r_out && (!half || side)) m.set(x, y, z, true);
            }
    return m;
}

}  // namespace

TEST_CASE("names round trip") {
    for (Vessel v : kAllVessels) CHECK(parse_vessel(vessel_name(v)) == v);
    CHECK(parse_vessel("sma") == Vessel::SMA);
    for (Stage s : {Stage::T1a, Stage::T1b, Stage::T1c, Stage::T2, Stage::T3, Stage::T4})
        CHECK(parse_stage(stage_name(s)) == s);
    CHECK_THROWS_AS(parse_vessel("smv"), Error);
    CHECK_THROWS_AS(parse_stage("T5"), Error);
    CHECK(promotes_to_t4(Vessel::SMA));
    CHECK(promotes_to_t4(Vessel::CA));
    CHECK(promotes_to_t4(Vessel::CHA));
    CHECK_FALSE(promotes_to_t4(Vessel::SA));
}

TEST_CASE("stage examples") {
    CHECK(stage_pdac(meas(3.0), {}).stage == Stage::T2);
    CHECK(stage_pdac(meas(1.2), {touching(Vessel::SMA, 200)}).stage == Stage::T4);
    CHECK(stage_pdac(meas(0.5), {}).stage == Stage::T1a);
    CHECK(stage_pdac(meas(1.2), {touching(Vessel::SMA, 180.0)}).stage == Stage::T4);
    CHECK(stage_pdac(meas(1.2), {touching(Vessel::SMA, 179.9)}).stage == Stage::T1c);
    CHECK(stage_pdac(meas(1.2), {touching(Vessel::SA, 360)}).stage == Stage::T1c);
    CHECK(stage_pdac(meas(4.1), {touching(Vessel::CHA, 10)}).stage == Stage::T3);
}

TEST_CASE("justification carries size and every vessel") {
    VesselContact none;
    none.vessel = Vessel::CA;
    VesselContact missing;
    missing.vessel = Vessel::CHA;
    missing.evaluated = false;
    const TStage t = stage_pdac(meas(1.2, 0.8), {touching(Vessel::SMA, 200), none, missing});
    CHECK(t.justification == "tumor 1.2 x 0.8 cm; SMA contact 200.0 deg; CA no contact; CHA not evaluated");
    CHECK(t.contacts.size() == 3);
}

TEST_CASE("missing measurement") {
    try {
        stage_pdac(std::nullopt, {});
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingMeasurement);
    }
    CHECK_THROWS_AS(stage_pdac(meas(0), {}), Error);
}

TEST_CASE("exhaustive decision table at 0.1 cm and 1 degree") {
    std::size_t checked = 0;
    for (int tenths = 1; tenths <= 80; ++tenths)
        for (int angle = 0; angle <= 360; ++angle)
            for (Vessel v : kAllVessels) {
                const TStage t = stage_pdac(meas(tenths / 10.0), {touching(v, angle)});
                if (t.stage != table_stage(tenths, angle, v)) {
                    CAPTURE(tenths);
                    CAPTURE(angle);
                    FAIL("decision table mismatch");
                }
                ++checked;
            }
    CHECK(checked == 80u * 361u * 4u);
}

TEST_CASE("property: the stage only changes at the bucket edges and at 180 degrees") {
    const double edges[] = {0.5, 1.0, 2.0, 4.0};
    Lcg rng(41);
    for (int trial = 0; trial < 5000; ++trial) {
        const double a = rng.uniform(0.01, 8), b = rng.uniform(0.01, 8);
        bool crosses = false;
        for (double e : edges) crosses |= (std::min(a, b) <= e && e < std::max(a, b));
        if (!crosses) CHECK(size_stage(a) == size_stage(b));
        const double x = rng.uniform(0, 360), y = rng.uniform(0, 360);
        const bool across = (x >= 180) != (y >= 180);
        const Stage sx = stage_pdac(meas(a), {touching(Vessel::CA, x)}).stage;
        const Stage sy = stage_pdac(meas(a), {touching(Vessel::CA, y)}).stage;
        if (!across) CHECK(sx == sy);
    }
}

TEST_CASE("main branch of a single straight tube is the tube") {
    const Mask v = vessel_tube();
    const Mask main = isolate_main_branch(v);
    CHECK(morphology::is_subset(main, v));
    CHECK(geometry::jaccard(main, v) >= 0.9);
    CHECK_THROWS_AS(isolate_main_branch(empty_mask(kDims)), Error);
}

TEST_CASE("Y-shaped vessel keeps the trunk and drops the side branch") {
    // The trunk is thicker than the branch, as for an arterial origin.
    const Mask trunk = voxelize(Shape::tube({{30, 30, 56}, {30, 30, 4}}, 4), kDims);
    const Mask branch = voxelize(Shape::tube({{30, 30, 32}, {54, 30, 8}}, 2.5), kDims);
    const Mask y = morphology::mask_or(trunk, branch);
    const Mask main = isolate_main_branch(y);
    std::size_t trunk_kept = 0, branch_far = 0;
    for (std::int64_t z = 0; z < kDims.nz; ++z)
        for (std::int64_t yy = 0; yy < kDims.ny; ++yy)
            for (std::int64_t x = 0; x < kDims.nx; ++x) {
                if (!main.at(x, yy, z)) continue;
                trunk_kept += trunk.at(x, yy, z);
                // Clear of the trunk's cross-section by more than the radius.
                if (x >= 40) ++branch_far;
            }
    CHECK(static_cast<double>(trunk_kept) >= 0.9 * static_cast<double>(trunk.count()));
    CHECK(branch_far == 0);
}

TEST_CASE("two disconnected tubes keep the larger") {
    const Mask big = voxelize(Shape::tube({{15, 15, 56}, {15, 15, 4}}, kVesselR), kDims);
    const Mask small = voxelize(Shape::tube({{45, 45, 40}, {45, 45, 20}}, kVesselR), kDims);
    const Mask main = isolate_main_branch(morphology::mask_or(big, small));
    CHECK(morphology::is_subset(main, big));
    CHECK(geometry::jaccard(main, big) >= 0.9);
}

TEST_CASE("full encasement gives 360 degrees") {
    const Mask v = vessel_tube();
    const VesselContact c = contact_angle(ring(kVesselR, 9, 20, 36, false), v);
    REQUIRE(c.contact);
    CHECK(*c.max_angle_deg == doctest::Approx(360.0));
}

TEST_CASE("half ring gives 180 degrees within border granularity") {
    const Mask v = vessel_tube();
    const VesselContact c = contact_angle(ring(kVesselR, 9, 20, 36, true), v);
    REQUIRE(c.contact);
    CHECK(std::abs(*c.max_angle_deg - 180.0) <= 15.0);
}

TEST_CASE("distant tumour has no contact") {
    const Mask v = vessel_tube();
    const Mask t = voxelize(Shape::sphere({50, 50, 30}, 5), kDims);
    const VesselContact c = contact_angle(t, v, Vessel::CA);
    CHECK(c.vessel == Vessel::CA);
    CHECK_FALSE(c.contact);
    CHECK_FALSE(c.max_angle_deg.has_value());
    CHECK_THROWS_AS(contact_angle(empty_mask(kDims), v), Error);
}

TEST_CASE("evaluate_vessel without a vessel mask is not evaluated") {
    const VesselContact c = evaluate_vessel(ring(kVesselR, 9, 20, 36, false), std::nullopt, Vessel::CHA);
    CHECK_FALSE(c.evaluated);
    CHECK_FALSE(c.contact);
    const VesselContact e = evaluate_vessel(ring(kVesselR, 9, 20, 36, false), vessel_tube(), Vessel::SMA);
    CHECK(e.evaluated);
    CHECK(e.contact);
}

TEST_CASE("property: contact matches a brute-force overlap gate") {
    const Mask v = vessel_tube();
    Lcg rng(42);
    for (int trial = 0; trial < 25; ++trial) {
        const double r = rng.uniform(2, 6);
        const phantom::Vec3 c{rng.uniform(10, 50), rng.uniform(10, 50), rng.uniform(12, 48)};
        const Mask t = voxelize(Shape::sphere(c, r), kDims);
        if (t.empty()) continue;
        const Mask grown = brute_dilate(t, {-1, -1, -1}, {1, 1, 1});
        const bool overlap = count_in(grown, v) > 0;
        CAPTURE(trial);
        const VesselContact got = contact_angle(t, v);
        CHECK(got.contact == overlap);
        CHECK(got.max_angle_deg.has_value() == got.contact);
        if (got.max_angle_deg) CHECK((*got.max_angle_deg >= 0 && *got.max_angle_deg <= 360));
    }
}

TEST_CASE("property: enlarging the tumour never decreases the angle") {
    const Mask v = vessel_tube();
    Lcg rng(43);
    for (int trial = 0; trial < 12; ++trial) {
        const double ang = rng.uniform(0, 2 * M_PI);
        const phantom::Vec3 c{30 + 6 * std::cos(ang), 30 + 6 * std::sin(ang), rng.uniform(20, 40)};
        const Mask small = voxelize(Shape::sphere(c, rng.uniform(3, 5)), kDims);
        const phantom::Vec3 c2{30 + 6 * std::cos(ang + 1.5), 30 + 6 * std::sin(ang + 1.5), c[2]};
        const Mask big = morphology::mask_or(small, voxelize(Shape::sphere(c2, rng.uniform(3, 5)), kDims));
        const VesselContact a = contact_angle(small, v), b = contact_angle(big, v);
        CAPTURE(trial);
        if (!a.contact) continue;
        REQUIRE(b.contact);
        CHECK(*b.max_angle_deg >= *a.max_angle_deg - 1e-9);
    }
}
