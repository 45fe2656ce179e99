#include "radrep/measurement.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "radrep/error.hpp"
#include "radrep/morphology.hpp"

namespace radrep {

std::string_view organ_name(Organ o) noexcept {
    switch (o) {
        case Organ::Liver: return "liver";
        case Organ::Pancreas: return "pancreas";
        case Organ::Kidney: return "kidney";
    }
    return "unknown";
}

Organ parse_organ(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "liver") return Organ::Liver;
    if (lower == "pancreas") return Organ::Pancreas;
    if (lower == "kidney" || lower == "kidneys") return Organ::Kidney;
    throw Error(ErrorCode::UnknownOrgan, "unknown organ '" + std::string(name) + "'");
}

double round_to(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    // The small nudge keeps values like 27.5189999999 from rounding the wrong way
    // after binary accumulation.
    const double scaled = value * scale;
    const double r = std::round(scaled + (scaled >= 0 ? 1e-9 : -1e-9));
    return r / scale;
}

}  // namespace radrep

namespace radrep::measurement {

using Point = std::array<std::int64_t, 2>;

std::vector<std::size_t> TumorInstance::parent_indices() const {
    std::vector<std::size_t> out;
    out.reserve(voxel_count);
    const auto& d = mask.dims();
    std::size_t i = 0;
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x, ++i)
                if (mask.bits()[i])
                    out.push_back(parent_grid.dims.index(x + origin.x, y + origin.y, z + origin.z));
    return out;
}

Mask TumorInstance::to_parent() const {
    Mask out(parent_grid, mask.label());
    for (std::size_t i : parent_indices()) out.bits()[i] = 1;
    return out;
}

std::vector<TumorInstance> split_instances(const Mask& tumor_mask, Organ organ) {
    using namespace morphology;
    const auto cc = connected_components(tumor_mask, Connectivity::TwentySix);
    std::vector<std::int32_t> order(static_cast<std::size_t>(cc.count));
    std::iota(order.begin(), order.end(), 1);
    std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
        return cc.sizes[a - 1] > cc.sizes[b - 1];
    });

    // Bounding boxes for every label in one pass.
    std::vector<BoundingBox> boxes(static_cast<std::size_t>(cc.count));
    const auto& d = tumor_mask.dims();
    std::size_t i = 0;
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x, ++i) {
                const auto l = cc.labels[i];
                if (l == 0) continue;
                auto& b = boxes[l - 1];
                if (b.empty) {
                    b.lo = b.hi = {x, y, z};
                    b.empty = false;
                } else {
                    b.lo = {std::min(b.lo.x, x), std::min(b.lo.y, y), std::min(b.lo.z, z)};
                    b.hi = {std::max(b.hi.x, x), std::max(b.hi.y, y), std::max(b.hi.z, z)};
                }
            }

    std::vector<TumorInstance> out;
    out.reserve(order.size());
    int id = 0;
    for (std::int32_t label : order) {
        const auto& b = boxes[label - 1];
        Grid g = tumor_mask.grid();
        g.dims = {b.hi.x - b.lo.x + 1, b.hi.y - b.lo.y + 1, b.hi.z - b.lo.z + 1};
        Mask m(g, tumor_mask.label());
        for (std::int64_t z = b.lo.z; z <= b.hi.z; ++z)
            for (std::int64_t y = b.lo.y; y <= b.hi.y; ++y)
                for (std::int64_t x = b.lo.x; x <= b.hi.x; ++x)
                    if (cc.labels[d.index(x, y, z)] == label) m.set(x - b.lo.x, y - b.lo.y, z - b.lo.z, true);
        TumorInstance inst;
        inst.mask = std::move(m);
        inst.origin = b.lo;
        inst.parent_grid = tumor_mask.grid();
        inst.organ = organ;
        inst.instance_id = ++id;
        inst.voxel_count = cc.sizes[label - 1];
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<Point> border_points(const Mask& m, std::int64_t z) {
    const auto border = morphology::slice_border(morphology::axial_slice(m, z));
    std::vector<Point> pts;
    for (std::int64_t y = 0; y < border.ny; ++y)
        for (std::int64_t x = 0; x < border.nx; ++x)
            if (border.at(x, y)) pts.push_back({x, y});
    return pts;
}

std::int64_t brute_force_diameter_sq(const std::vector<Point>& pts) {
    std::int64_t best = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const std::int64_t dx = pts[i][0] - pts[j][0], dy = pts[i][1] - pts[j][1];
            best = std::max(best, dx * dx + dy * dy);
        }
    return best;
}

namespace {

std::int64_t cross(const Point& o, const Point& a, const Point& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Monotone chain; returns hull vertices counter-clockwise from the lowest point.
std::vector<Point> convex_hull(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

struct SliceDiameter {
    std::int64_t d2 = -1;
    Point a{}, b{};
};

// The farthest pair of a finite set is always a pair of hull vertices, so
// scanning hull pairs gives the exact maximum over all border pairs.
SliceDiameter slice_diameter(const std::vector<Point>& border) {
    SliceDiameter best;
    const auto hull = convex_hull(border);
    if (hull.size() == 1) {
        best.d2 = 0;
        best.a = best.b = hull[0];
        return best;
    }
    for (std::size_t i = 0; i < hull.size(); ++i)
        for (std::size_t j = i + 1; j < hull.size(); ++j) {
            const std::int64_t dx = hull[i][0] - hull[j][0], dy = hull[i][1] - hull[j][1];
            const std::int64_t d2 = dx * dx + dy * dy;
            if (d2 > best.d2) best = {d2, hull[i], hull[j]};
        }
    return best;
}

}  // namespace

AxialDiameters axial_diameters(const Mask& m) {
    const auto& sp = m.spacing();
    if (std::abs(sp.dx - sp.dy) > 1e-9 * std::max(sp.dx, sp.dy))
        throw Error(ErrorCode::InvalidArgument, "axial measurement needs equal x/y spacing");
    const double pitch = sp.dx;
    const auto& d = m.dims();

    SliceDiameter best;
    std::int64_t best_z = -1;
    std::size_t max_slice_count = 0;
    std::vector<Point> best_border;
    for (std::int64_t z = 0; z < d.nz; ++z) {
        const auto slice = morphology::axial_slice(m, z);
        const std::size_t n = slice.count();
        if (n == 0) continue;
        max_slice_count = std::max(max_slice_count, n);
        auto border = border_points(m, z);
        const auto sd = slice_diameter(border);
        // Strictly greater keeps the lowest z on ties.
        if (sd.d2 > best.d2) {
            best = sd;
            best_z = z;
            best_border = std::move(border);
        }
    }
    if (best_z < 0) throw Error(ErrorCode::EmptyInput, "cannot measure an empty tumour");

    AxialDiameters out;
    out.slice = best_z;
    out.end_a = {static_cast<double>(best.a[0]) * pitch, static_cast<double>(best.a[1]) * pitch};
    out.end_b = {static_cast<double>(best.b[0]) * pitch, static_cast<double>(best.b[1]) * pitch};
    out.d_max_mm = std::sqrt(static_cast<double>(best.d2)) * pitch;

    if (best.d2 > 0) {
        const double ux = static_cast<double>(best.b[0] - best.a[0]);
        const double uy = static_cast<double>(best.b[1] - best.a[1]);
        const double len = std::sqrt(ux * ux + uy * uy);
        const double nx = -uy / len, ny = ux / len;
        double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
        for (const auto& p : best_border) {
            const double proj = static_cast<double>(p[0]) * nx + static_cast<double>(p[1]) * ny;
            lo = std::min(lo, proj);
            hi = std::max(hi, proj);
        }
        out.d_perp_mm = (hi - lo) * pitch;
    }

    // A detected instance always has at least one voxel pitch of extent.
    out.degenerate = max_slice_count <= 2;
    if (out.degenerate) {
        out.d_max_mm = pitch;
        out.d_perp_mm = pitch;
    } else {
        out.d_max_mm = std::max(out.d_max_mm, pitch);
        out.d_perp_mm = std::max(out.d_perp_mm, pitch);
    }
    return out;
}

double physical_volume_cm3(const Mask& m) { return physical_volume_mm3(m) / 1000.0; }

TumorMeasurement measure_who(const TumorInstance& inst, const Spacing& grid_mm) {
    if (inst.voxel_count == 0 || inst.mask.empty())
        throw Error(ErrorCode::EmptyInput, "cannot measure an empty tumour instance");
    const Mask iso = resample_isotropic(inst.mask, grid_mm);
    const AxialDiameters diam = axial_diameters(iso);

    TumorMeasurement out;
    out.d_max_cm = round_to(diam.d_max_mm / 10.0, 1);
    out.d_perp_cm = std::min(out.d_max_cm, round_to(diam.d_perp_mm / 10.0, 1));
    const double native_dz = inst.mask.spacing().dz;
    const auto native_z = static_cast<std::int64_t>(
        std::floor((static_cast<double>(diam.slice) + 0.5) * grid_mm.dz / native_dz + 1e-9));
    out.slice_index = inst.origin.z + std::min(native_z, inst.mask.dims().nz - 1);
    out.volume_cm3 = round_to(physical_volume_cm3(inst.mask), 3);
    return out;
}

Attenuation attenuation_stats(const Volume& v, std::span<const std::size_t> indices) {
    if (indices.empty()) throw Error(ErrorCode::EmptyInput, "attenuation over an empty mask");
    const auto data = v.data();
    double sum = 0;
    for (std::size_t i : indices) sum += data[i];
    const double mean = sum / static_cast<double>(indices.size());
    double ss = 0;
    for (std::size_t i : indices) ss += (data[i] - mean) * (data[i] - mean);
    return {mean, std::sqrt(ss / static_cast<double>(indices.size()))};
}

Attenuation attenuation_stats(const Volume& v, const Mask& m) {
    if (!v.grid().same_lattice(m.grid()))
        throw Error(ErrorCode::GridMismatch, "volume and mask '" + m.label() + "' are not co-registered");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < m.bits().size(); ++i)
        if (m.bits()[i]) idx.push_back(i);
    return attenuation_stats(v, idx);
}

Attenuation attenuation_stats(const Volume& v, const TumorInstance& inst) {
    if (!v.grid().same_lattice(inst.parent_grid))
        throw Error(ErrorCode::GridMismatch, "volume and tumour instance are not co-registered");
    const auto idx = inst.parent_indices();
    return attenuation_stats(v, idx);
}

TumorMeasurement measure_instance(const TumorInstance& inst, const Volume& v, const Spacing& grid_mm) {
    TumorMeasurement m = measure_who(inst, grid_mm);
    const auto a = attenuation_stats(v, inst);
    m.hu_mean = round_to(a.mean, 2);
    m.hu_std = round_to(a.std, 2);
    return m;
}

}  // namespace radrep::measurement
