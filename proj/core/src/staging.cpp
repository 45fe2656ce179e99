#include "radrep/staging.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "radrep/error.hpp"
#include "radrep/geometry.hpp"
#include "radrep/morphology.hpp"

namespace radrep::staging {

using geometry::Vec3;

std::string_view vessel_name(Vessel v) noexcept {
    switch (v) {
        case Vessel::SMA: return "SMA";
        case Vessel::CHA: return "CHA";
        case Vessel::CA: return "CA";
        case Vessel::SA: return "SA";
    }
    return "?";
}

Vessel parse_vessel(std::string_view name) {
    std::string up(name);
    std::transform(up.begin(), up.end(), up.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    for (Vessel v : kAllVessels)
        if (vessel_name(v) == up) return v;
    throw Error(ErrorCode::InvalidArgument, "unknown vessel '" + std::string(name) + "'");
}

bool promotes_to_t4(Vessel v) noexcept { return v != Vessel::SA; }

std::string_view stage_name(Stage s) noexcept {
    switch (s) {
        case Stage::T1a: return "T1a";
        case Stage::T1b: return "T1b";
        case Stage::T1c: return "T1c";
        case Stage::T2: return "T2";
        case Stage::T3: return "T3";
        case Stage::T4: return "T4";
    }
    return "?";
}

Stage parse_stage(std::string_view name) {
    for (auto s : {Stage::T1a, Stage::T1b, Stage::T1c, Stage::T2, Stage::T3, Stage::T4})
        if (stage_name(s) == name) return s;
    throw Error(ErrorCode::InvalidArgument, "unknown T stage '" + std::string(name) + "'");
}

namespace {

bool touches(const morphology::Mask2D& a, const morphology::LabeledComponents2D& cc, std::int32_t label,
             const morphology::Mask2D& prev) {
    for (std::int64_t y = 0; y < a.ny; ++y)
        for (std::int64_t x = 0; x < a.nx; ++x) {
            if (cc.labels[static_cast<std::size_t>(x + a.nx * y)] != label) continue;
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dx = -1; dx <= 1; ++dx)
                    if (prev.get(x + dx, y + dy)) return true;
        }
    return false;
}

Mask sweep_main_component(const Mask& vessel) {
    const auto& d = vessel.dims();
    std::int64_t nonempty = 0;
    for (std::int64_t z = 0; z < d.nz; ++z)
        if (morphology::axial_slice(vessel, z).count() > 0) ++nonempty;
    const auto window = static_cast<std::int64_t>(std::ceil(0.05 * static_cast<double>(nonempty)));

    Mask out(vessel.grid(), vessel.label());
    morphology::Mask2D prev;
    std::int64_t seen = 0;
    // Superior to inferior: decreasing z.
    for (std::int64_t z = d.nz - 1; z >= 0; --z) {
        const auto slice = morphology::axial_slice(vessel, z);
        if (slice.count() == 0) continue;
        const bool in_window = seen < window;
        ++seen;
        const auto cc = morphology::connected_components_2d(slice);
        std::int32_t best = 0;
        for (std::int32_t l = 1; l <= cc.count; ++l) {
            if (!in_window && !touches(slice, cc, l, prev)) continue;
            if (best == 0 || cc.sizes[l - 1] > cc.sizes[best - 1]) best = l;
        }
        // A slice with no continuation keeps the last retained component as reference.
        if (best == 0) continue;
        morphology::Mask2D kept(slice.nx, slice.ny);
        for (std::size_t i = 0; i < kept.bits.size(); ++i)
            if (cc.labels[i] == best) {
                kept.bits[i] = 1;
                out.bits()[d.index(0, 0, z) + i] = 1;
            }
        prev = std::move(kept);
    }
    return out;
}

}  // namespace

Mask isolate_main_branch(const Mask& vessel) {
    using namespace morphology;
    if (vessel.empty()) throw Error(ErrorCode::EmptyInput, "vessel mask '" + vessel.label() + "' is empty");
    const Mask swept = sweep_main_component(vessel);
    const auto se5 = StructuringElement::cube(5);
    const Mask core = largest_component(mask_and(dilate(erode(swept, se5), se5), vessel));
    if (core.empty()) return largest_component(swept);
    // The box opening squares off round cross-sections; one voxel of the
    // swept mask around the core is restored.
    return largest_component(mask_and(dilate(core, StructuringElement::cube(3)), swept));
}

namespace {

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 scale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
Vec3 unit(const Vec3& a) { return scale(a, 1.0 / geometry::norm(a)); }

Vec3 safe_axis(std::span<const Vec3> pts, const Vec3& fallback) {
    try {
        return geometry::principal_axis(pts);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateCloud) throw;
        return fallback;
    }
}

Vec3 mean_of(std::span<const Vec3> pts) {
    Vec3 c{0, 0, 0};
    for (const auto& p : pts) c = add(c, p);
    return scale(c, 1.0 / static_cast<double>(pts.size()));
}

// In-plane basis orthogonal to `axis`, built against the coordinate axis the
// direction is least aligned with.
std::pair<Vec3, Vec3> plane_basis(const Vec3& axis) {
    int k = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(axis[i]) < std::abs(axis[k])) k = i;
    Vec3 ref{0, 0, 0};
    ref[k] = 1;
    const Vec3 e1 = unit(geometry::cross(axis, ref));
    const Vec3 e2 = unit(geometry::cross(axis, e1));
    return {e1, e2};
}

bool sample(const Mask& m, const Vec3& p) {
    const auto& s = m.spacing();
    return m.get(static_cast<std::int64_t>(std::floor(p[0] / s.dx + 0.5)),
                 static_cast<std::int64_t>(std::floor(p[1] / s.dy + 0.5)),
                 static_cast<std::int64_t>(std::floor(p[2] / s.dz + 0.5)));
}

// Border coverage of the vessel cross-section nearest the slice centre, or a
// negative value when the slice holds no vessel.
double slice_coverage(const Mask& vessel, const Mask& tumor_dil, const Vec3& centre, const Vec3& e1,
                      const Vec3& e2, const ContactParams& p) {
    const auto half = static_cast<std::int64_t>(std::floor(p.window_half_mm / p.sample_mm));
    const std::int64_t n = 2 * half + 1;
    morphology::Mask2D ves(n, n), tum(n, n);
    for (std::int64_t v = 0; v < n; ++v)
        for (std::int64_t u = 0; u < n; ++u) {
            const Vec3 q = add(centre, add(scale(e1, static_cast<double>(u - half) * p.sample_mm),
                                           scale(e2, static_cast<double>(v - half) * p.sample_mm)));
            ves.set(u, v, sample(vessel, q));
            tum.set(u, v, sample(tumor_dil, q));
        }
    if (ves.count() == 0) return -1;
    const auto cc = morphology::connected_components_2d(ves);
    std::int32_t label = 0;
    std::int64_t best_d2 = 0;
    for (std::int64_t v = 0; v < n; ++v)
        for (std::int64_t u = 0; u < n; ++u) {
            const auto l = cc.labels[static_cast<std::size_t>(u + n * v)];
            if (l == 0) continue;
            const std::int64_t d2 = (u - half) * (u - half) + (v - half) * (v - half);
            if (label == 0 || d2 < best_d2) {
                label = l;
                best_d2 = d2;
            }
        }
    morphology::Mask2D comp(n, n);
    for (std::size_t i = 0; i < comp.bits.size(); ++i) comp.bits[i] = cc.labels[i] == label ? 1 : 0;
    const auto border = morphology::slice_border(comp);
    std::size_t total = 0, covered = 0;
    for (std::size_t i = 0; i < border.bits.size(); ++i) {
        if (!border.bits[i]) continue;
        ++total;
        covered += tum.bits[i] ? 1 : 0;
    }
    return static_cast<double>(covered) / static_cast<double>(total);
}

}  // namespace

VesselContact contact_angle(const Mask& tumor, const Mask& vessel_main, Vessel which,
                            const ContactParams& params) {
    using namespace morphology;
    if (!tumor.grid().same_lattice(vessel_main.grid()))
        throw Error(ErrorCode::GridMismatch, "tumour and vessel are not co-registered");
    if (tumor.empty()) throw Error(ErrorCode::EmptyInput, "tumour mask is empty");
    if (vessel_main.empty()) throw Error(ErrorCode::EmptyInput, "vessel mask is empty");

    VesselContact out;
    out.vessel = which;
    const Mask dil = dilate(tumor, StructuringElement::cube(3));
    const Mask touch = mask_and(dil, vessel_main);
    if (touch.empty()) return out;
    out.contact = true;

    const auto vessel_pts = geometry::foreground_points_mm(vessel_main);
    auto skel_pts = geometry::foreground_points_mm(skeletonize(vessel_main));
    const Vec3 global = safe_axis(skel_pts, safe_axis(vessel_pts, {0, 0, 1}));
    const Vec3 c = mean_of(skel_pts);
    auto t_of = [&](const Vec3& p) { return geometry::dot(add(p, scale(c, -1)), global); };

    std::vector<std::int64_t> bins;
    for (const auto& p : geometry::foreground_points_mm(touch))
        bins.push_back(static_cast<std::int64_t>(std::floor(t_of(p) / params.bin_mm + 0.5)));
    std::sort(bins.begin(), bins.end());
    bins.erase(std::unique(bins.begin(), bins.end()), bins.end());

    double best = 0;
    std::vector<Vec3> local;
    for (std::int64_t b : bins) {
        const double t0 = static_cast<double>(b) * params.bin_mm;
        local.clear();
        for (const auto& p : skel_pts)
            if (std::abs(t_of(p) - t0) <= params.segment_half_mm + 1e-9) local.push_back(p);
        Vec3 axis = global;
        Vec3 centre = add(c, scale(global, t0));
        if (!local.empty()) {
            centre = mean_of(local);
            axis = safe_axis(local, global);
            if (geometry::dot(axis, global) < 0) axis = scale(axis, -1);
        }
        const auto [e1, e2] = plane_basis(axis);
        for (double s : params.slice_offsets_mm) {
            const double f = slice_coverage(vessel_main, dil, add(centre, scale(axis, s)), e1, e2, params);
            best = std::max(best, f);
        }
    }
    out.max_angle_deg = std::clamp(best * 360.0, 0.0, 360.0);
    return out;
}

VesselContact evaluate_vessel(const Mask& tumor, const std::optional<Mask>& vessel, Vessel which,
                              const ContactParams& params) {
    VesselContact out;
    out.vessel = which;
    if (!vessel) {
        out.evaluated = false;
        return out;
    }
    if (!tumor.grid().same_lattice(vessel->grid()))
        throw Error(ErrorCode::GridMismatch, "tumour and vessel are not co-registered");
    if (vessel->empty() || tumor.empty()) return out;
    const Mask dil = morphology::dilate(tumor, morphology::StructuringElement::cube(3));
    if (morphology::overlap_count(dil, *vessel) == 0) return out;
    const Mask main = isolate_main_branch(*vessel);
    if (morphology::overlap_count(dil, main) == 0) return out;
    return contact_angle(tumor, main, which, params);
}

Stage size_stage(double d_max_cm) noexcept {
    if (d_max_cm <= 0.5) return Stage::T1a;
    if (d_max_cm <= 1.0) return Stage::T1b;
    if (d_max_cm <= 2.0) return Stage::T1c;
    if (d_max_cm <= 4.0) return Stage::T2;
    return Stage::T3;
}

TStage stage_pdac(const std::optional<measurement::TumorMeasurement>& meas,
                  const std::vector<VesselContact>& contacts) {
    if (!meas || !(meas->d_max_cm > 0))
        throw Error(ErrorCode::MissingMeasurement, "PDAC staging needs a tumour measurement");
    TStage out;
    out.d_max_cm = meas->d_max_cm;
    out.d_perp_cm = meas->d_perp_cm;
    out.contacts = contacts;
    out.stage = size_stage(meas->d_max_cm);
    for (const auto& c : contacts)
        if (promotes_to_t4(c.vessel) && c.contact && c.max_angle_deg && *c.max_angle_deg >= 180.0)
            out.stage = Stage::T4;

    char buf[64];
    std::snprintf(buf, sizeof buf, "tumor %.1f x %.1f cm", meas->d_max_cm, meas->d_perp_cm);
    out.justification = buf;
    for (const auto& c : contacts) {
        out.justification += "; ";
        out.justification += vessel_name(c.vessel);
        if (!c.evaluated) {
            out.justification += " not evaluated";
        } else if (!c.contact) {
            out.justification += " no contact";
        } else {
            std::snprintf(buf, sizeof buf, " contact %.1f deg", c.max_angle_deg.value_or(0));
            out.justification += buf;
        }
    }
    return out;
}

}  // namespace radrep::staging
