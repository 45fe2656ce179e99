#include "radrep/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json_util.hpp"
#include "radrep/error.hpp"

namespace radrep::phantom {

using nlohmann::json;
namespace ju = jsonutil;

// ---------------------------------------------------------------------------
// Generator

SplitMix64 SplitMix64::stream(std::uint64_t seed, std::uint64_t index) noexcept {
    SplitMix64 mixer(seed ^ (0xD1B54A32D192ED03ull * (index + 1)));
    return SplitMix64(mixer.next());
}

std::uint64_t SplitMix64::next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double SplitMix64::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // 1 - u keeps the logarithm finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
}

// ---------------------------------------------------------------------------
// Shapes

namespace {

using geometry::Mat3;

Mat3 rotation_zyx(const Vec3& deg) {
    const double k = std::numbers::pi / 180.0;
    const double cz = std::cos(deg[0] * k), sz = std::sin(deg[0] * k);
    const double cy = std::cos(deg[1] * k), sy = std::sin(deg[1] * k);
    const double cx = std::cos(deg[2] * k), sx = std::sin(deg[2] * k);
    return {{{cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx},
             {sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx},
             {-sy, cy * sx, cy * cx}}};
}

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 scale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }

double segment_distance_sq(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = sub(b, a), ap = sub(p, a);
    const double len2 = geometry::dot(ab, ab);
    double t = len2 > 0 ? geometry::dot(ap, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec3 d = sub(ap, scale(ab, t));
    return geometry::dot(d, d);
}

bool collinear(const std::vector<Vec3>& pts) {
    if (pts.size() < 3) return true;
    const Vec3 u = sub(pts.back(), pts.front());
    const double lu = geometry::norm(u);
    for (const auto& p : pts)
        if (geometry::norm(geometry::cross(u, sub(p, pts.front()))) > 1e-9 * std::max(1.0, lu * lu)) return false;
    // Points must also be monotone along the line, otherwise the tube folds back.
    double last = -1;
    for (const auto& p : pts) {
        const double t = geometry::dot(sub(p, pts.front()), u);
        if (t < last) return false;
        last = t;
    }
    return true;
}

}  // namespace

Shape Shape::ellipsoid(Vec3 center, Vec3 semi_axes, Vec3 rotation_deg) {
    Shape s;
    s.kind = Kind::Ellipsoid;
    s.center = center;
    s.semi_axes = semi_axes;
    s.rotation_deg = rotation_deg;
    return s;
}

Shape Shape::tube(std::vector<Vec3> points, double radius) {
    Shape s;
    s.kind = Kind::Tube;
    s.points = std::move(points);
    s.radius = radius;
    return s;
}

Shape Shape::union_of(std::vector<Shape> parts) {
    Shape s;
    s.kind = Kind::Union;
    s.parts = std::move(parts);
    return s;
}

bool Shape::contains(const Vec3& p) const {
    switch (kind) {
        case Kind::Ellipsoid: {
            const Mat3 r = rotation_zyx(rotation_deg);
            const Vec3 d = sub(p, center);
            double acc = 0;
            for (int i = 0; i < 3; ++i) {
                // Body coordinate i = column i of R dotted with d.
                const double q = r[0][i] * d[0] + r[1][i] * d[1] + r[2][i] * d[2];
                acc += (q / semi_axes[i]) * (q / semi_axes[i]);
            }
            return acc <= 1.0 + 1e-12;
        }
        case Kind::Tube: {
            const double r2 = radius * radius * (1.0 + 1e-12);
            if (points.size() == 1) return segment_distance_sq(p, points[0], points[0]) <= r2;
            for (std::size_t i = 0; i + 1 < points.size(); ++i)
                if (segment_distance_sq(p, points[i], points[i + 1]) <= r2) return true;
            return false;
        }
        case Kind::Union:
            return std::any_of(parts.begin(), parts.end(), [&](const Shape& s) { return s.contains(p); });
    }
    return false;
}

void Shape::bounds(Vec3& lo, Vec3& hi) const {
    switch (kind) {
        case Kind::Ellipsoid: {
            const Mat3 r = rotation_zyx(rotation_deg);
            for (int i = 0; i < 3; ++i) {
                double h = 0;
                for (int j = 0; j < 3; ++j) h += (r[i][j] * semi_axes[j]) * (r[i][j] * semi_axes[j]);
                h = std::sqrt(h);
                lo[i] = center[i] - h;
                hi[i] = center[i] + h;
            }
            return;
        }
        case Kind::Tube: {
            lo = {1e300, 1e300, 1e300};
            hi = {-1e300, -1e300, -1e300};
            for (const auto& p : points)
                for (int i = 0; i < 3; ++i) {
                    lo[i] = std::min(lo[i], p[i] - radius);
                    hi[i] = std::max(hi[i], p[i] + radius);
                }
            return;
        }
        case Kind::Union: {
            lo = {1e300, 1e300, 1e300};
            hi = {-1e300, -1e300, -1e300};
            for (const auto& s : parts) {
                Vec3 l, h;
                s.bounds(l, h);
                for (int i = 0; i < 3; ++i) {
                    lo[i] = std::min(lo[i], l[i]);
                    hi[i] = std::max(hi[i], h[i]);
                }
            }
            return;
        }
    }
}

std::optional<double> Shape::analytic_volume_mm3() const {
    switch (kind) {
        case Kind::Ellipsoid:
            return 4.0 / 3.0 * std::numbers::pi * semi_axes[0] * semi_axes[1] * semi_axes[2];
        case Kind::Tube: {
            if (!collinear(points)) return std::nullopt;
            // Capsule: cylinder plus two hemispherical caps.
            const double len = geometry::norm(sub(points.back(), points.front()));
            return std::numbers::pi * radius * radius * len + 4.0 / 3.0 * std::numbers::pi * radius * radius * radius;
        }
        case Kind::Union:
            if (parts.size() == 1) return parts[0].analytic_volume_mm3();
            return std::nullopt;
    }
    return std::nullopt;
}

std::string_view role_name(Role r) noexcept {
    switch (r) {
        case Role::Organ: return "organ";
        case Role::Vessel: return "vessel";
        case Role::Tumor: return "tumor";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Validation and ground truth

namespace {

void validate_shape(const Shape& s, const std::string& where) {
    switch (s.kind) {
        case Shape::Kind::Ellipsoid:
            for (double a : s.semi_axes)
                if (!(a > 0)) throw Error(ErrorCode::InvalidArgument, where + ": semi-axes must be positive");
            return;
        case Shape::Kind::Tube:
            if (s.points.empty()) throw Error(ErrorCode::InvalidArgument, where + ": tube needs at least one point");
            if (!(s.radius > 0)) throw Error(ErrorCode::InvalidArgument, where + ": tube radius must be positive");
            return;
        case Shape::Kind::Union:
            if (s.parts.empty()) throw Error(ErrorCode::InvalidArgument, where + ": union needs at least one part");
            for (const auto& p : s.parts) validate_shape(p, where);
            return;
    }
}

void validate(const PhantomSpec& spec) {
    const auto& d = spec.dims;
    if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0) throw Error(ErrorCode::Dimension, "phantom dims must be positive");
    if (!spec.spacing.valid()) throw Error(ErrorCode::InvalidArgument, "phantom spacing must be positive");
    const Vec3 extent{static_cast<double>(d.nx - 1) * spec.spacing.dx, static_cast<double>(d.ny - 1) * spec.spacing.dy,
                      static_cast<double>(d.nz - 1) * spec.spacing.dz};
    for (const auto& s : spec.structures) {
        const std::string where = "structure '" + s.name + "'";
        if (s.name.empty() || s.mask.empty())
            throw Error(ErrorCode::InvalidArgument, "every structure needs a name and a mask label");
        if (s.role == Role::Tumor && s.host.empty())
            throw Error(ErrorCode::InvalidArgument, where + ": tumours need a host organ mask");
        if (s.hu.std < 0) throw Error(ErrorCode::InvalidArgument, where + ": HU std must be non-negative");
        validate_shape(s.shape, where);
        Vec3 lo, hi;
        s.shape.bounds(lo, hi);
        for (int i = 0; i < 3; ++i)
            if (lo[i] < -1e-9 || hi[i] > extent[i] + 1e-9)
                throw Error(ErrorCode::ShapeOutOfBounds, where + " extends outside the grid on axis " +
                                                             std::string(1, "xyz"[i]));
    }
    if (spec.background.std < 0) throw Error(ErrorCode::InvalidArgument, "background HU std must be non-negative");
}

// Semi-axes of the section z = centre.z of a rotated ellipsoid. Parallel
// sections are homothetic, so this is also the largest axial section.
std::pair<double, double> central_axial_semi_axes(const Shape& e) {
    const Mat3 r = rotation_zyx(e.rotation_deg);
    // Quadric matrix A = R diag(1/a^2) R^T restricted to the x-y block.
    double a[2][2] = {{0, 0}, {0, 0}};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 3; ++k) a[i][j] += r[i][k] * r[j][k] / (e.semi_axes[k] * e.semi_axes[k]);
    const double tr = a[0][0] + a[1][1];
    const double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
    const double lmin = tr / 2 - disc, lmax = tr / 2 + disc;
    return {1.0 / std::sqrt(lmin), 1.0 / std::sqrt(lmax)};
}

// Largest fraction of a ring just outside the vessel wall lying inside any
// tumour, sampled every 0.5 mm along the centreline and every degree.
double ring_encasement_deg(const Shape& vessel, const std::vector<const Shape*>& tumors) {
    if (vessel.kind != Shape::Kind::Tube || vessel.points.size() < 2 || tumors.empty()) return 0.0;
    const double ring = vessel.radius + 0.5;
    double best = 0;
    for (std::size_t s = 0; s + 1 < vessel.points.size(); ++s) {
        const Vec3 a = vessel.points[s], b = vessel.points[s + 1];
        const Vec3 ab = sub(b, a);
        const double len = geometry::norm(ab);
        if (len <= 0) continue;
        const Vec3 t = scale(ab, 1.0 / len);
        int least = 0;
        for (int i = 1; i < 3; ++i)
            if (std::abs(t[i]) < std::abs(t[least])) least = i;
        Vec3 ref{0, 0, 0};
        ref[least] = 1;
        Vec3 e1 = geometry::cross(t, ref);
        e1 = scale(e1, 1.0 / geometry::norm(e1));
        const Vec3 e2 = geometry::cross(t, e1);
        const int steps = static_cast<int>(std::floor(len / 0.5));
        for (int k = 0; k <= steps; ++k) {
            const Vec3 c = add(a, scale(t, 0.5 * k));
            int inside = 0;
            for (int deg = 0; deg < 360; ++deg) {
                const double th = deg * std::numbers::pi / 180.0;
                const Vec3 p = add(c, add(scale(e1, ring * std::cos(th)), scale(e2, ring * std::sin(th))));
                for (const Shape* tu : tumors)
                    if (tu->contains(p)) {
                        ++inside;
                        break;
                    }
            }
            best = std::max(best, static_cast<double>(inside));
        }
    }
    return best;
}

}  // namespace

GroundTruth ground_truth(const PhantomSpec& spec) {
    validate(spec);
    GroundTruth gt;
    gt.expected_stage = spec.expected_stage;
    std::vector<const Shape*> tumor_shapes;
    for (const auto& s : spec.structures) {
        if (s.role == Role::Tumor) {
            TumorTruth t;
            t.name = s.name;
            t.mask = s.mask;
            t.host = s.host;
            t.hu_mean = s.hu.mean;
            t.expected_segments = s.expected_segments;
            Vec3 lo, hi;
            s.shape.bounds(lo, hi);
            t.center_mm = s.shape.kind == Shape::Kind::Ellipsoid ? s.shape.center : scale(add(lo, hi), 0.5);
            if (s.shape.kind == Shape::Kind::Ellipsoid) {
                const auto [major, minor] = central_axial_semi_axes(s.shape);
                t.d_max_cm = 2.0 * major / 10.0;
                t.d_perp_cm = 2.0 * minor / 10.0;
            }
            if (const auto v = s.shape.analytic_volume_mm3()) t.volume_cm3 = *v / 1000.0;
            gt.tumors.push_back(std::move(t));
            tumor_shapes.push_back(&s.shape);
        } else if (s.role == Role::Organ) {
            const auto v = s.shape.analytic_volume_mm3();
            gt.organs.push_back({s.mask, v ? std::optional<double>(*v / 1000.0) : std::nullopt, s.hu.mean});
        }
    }
    for (const auto& s : spec.structures)
        if (s.role == Role::Vessel) gt.vessels.push_back({s.name, ring_encasement_deg(s.shape, tumor_shapes)});
    return gt;
}

// ---------------------------------------------------------------------------
// Voxelization

namespace {

int priority(Role r) {
    switch (r) {
        case Role::Vessel: return 3;
        case Role::Tumor: return 2;
        case Role::Organ: return 1;
    }
    return 0;
}

std::vector<std::size_t> voxelize(const Shape& shape, const Dims& d, const Spacing& sp) {
    Vec3 lo, hi;
    shape.bounds(lo, hi);
    const auto first = [](double v, double s) { return static_cast<std::int64_t>(std::ceil(v / s - 1e-9)); };
    const auto last = [](double v, double s) { return static_cast<std::int64_t>(std::floor(v / s + 1e-9)); };
    const std::int64_t x0 = std::max<std::int64_t>(0, first(lo[0], sp.dx)), x1 = std::min(d.nx - 1, last(hi[0], sp.dx));
    const std::int64_t y0 = std::max<std::int64_t>(0, first(lo[1], sp.dy)), y1 = std::min(d.ny - 1, last(hi[1], sp.dy));
    const std::int64_t z0 = std::max<std::int64_t>(0, first(lo[2], sp.dz)), z1 = std::min(d.nz - 1, last(hi[2], sp.dz));
    std::vector<std::size_t> out;
    for (std::int64_t z = z0; z <= z1; ++z)
        for (std::int64_t y = y0; y <= y1; ++y)
            for (std::int64_t x = x0; x <= x1; ++x)
                if (shape.contains(geometry::voxel_center_mm(sp, x, y, z))) out.push_back(d.index(x, y, z));
    return out;
}

}  // namespace

Phantom generate(const PhantomSpec& spec) {
    Phantom out;
    out.truth = ground_truth(spec);
    Grid grid{spec.dims, spec.spacing, diagonal_affine(spec.spacing)};
    const std::size_t n = spec.dims.count();
    const auto& structs = spec.structures;

    std::vector<std::vector<std::size_t>> members(structs.size());
    for (std::size_t i = 0; i < structs.size(); ++i) members[i] = voxelize(structs[i].shape, spec.dims, spec.spacing);

    // Owner per voxel; first-listed wins among equal priorities.
    std::vector<std::int32_t> owner(n, -1);
    for (std::size_t i = 0; i < structs.size(); ++i) {
        const int p = priority(structs[i].role);
        for (std::size_t v : members[i]) {
            const std::int32_t o = owner[v];
            if (o < 0 || priority(structs[static_cast<std::size_t>(o)].role) < p) owner[v] = static_cast<std::int32_t>(i);
        }
    }

    std::vector<std::uint8_t> vessel(n, 0);
    for (std::size_t i = 0; i < structs.size(); ++i)
        if (structs[i].role == Role::Vessel)
            for (std::size_t v : members[i]) vessel[v] = 1;

    auto mask_for = [&](const std::string& label) -> Mask& {
        auto it = out.masks.find(label);
        if (it == out.masks.end()) it = out.masks.emplace(label, Mask(grid, label)).first;
        return it->second;
    };
    for (std::size_t i = 0; i < structs.size(); ++i) {
        const auto& s = structs[i];
        auto bits = mask_for(s.mask).bits();
        for (std::size_t v : members[i])
            if (s.role == Role::Vessel || !vessel[v]) bits[v] = 1;
        if (s.role == Role::Tumor) {
            auto host = mask_for(s.host).bits();
            for (std::size_t v : members[i])
                if (!vessel[v]) host[v] = 1;
        }
    }
    for (const auto& label : spec.empty_masks) mask_for(label);
    for (std::size_t i = 0; i < structs.size(); ++i) {
        const auto& salt = structs[i].salt;
        if (salt.count == 0) continue;
        auto bits = mask_for(structs[i].mask).bits();
        SplitMix64 rng(salt.seed);
        for (std::size_t k = 0; k < salt.count; ++k) bits[rng.next() % n] = 1;
    }

    std::vector<SplitMix64> streams;
    streams.reserve(structs.size() + 1);
    for (std::size_t i = 0; i <= structs.size(); ++i) streams.push_back(SplitMix64::stream(spec.seed, i));
    std::vector<float> hu(n);
    for (std::size_t v = 0; v < n; ++v) {
        const std::int32_t o = owner[v];
        const Normal& dist = o < 0 ? spec.background : structs[static_cast<std::size_t>(o)].hu;
        SplitMix64& rng = streams[o < 0 ? structs.size() : static_cast<std::size_t>(o)];
        // Whole HU, as scanners store them; lets volumes round-trip as int16.
        hu[v] = static_cast<float>(std::nearbyint(dist.std > 0 ? dist.mean + dist.std * rng.normal() : dist.mean));
    }
    out.volume = Volume(grid, std::move(hu));
    return out;
}

// ---------------------------------------------------------------------------
// Scenario library

namespace {

constexpr Normal kLiverHu{100, 15}, kPancreasHu{100, 15}, kSpleenHu{110, 15}, kKidneyHu{160, 15},
    kVesselHu{200, 15}, kPdacHu{40, 20}, kLiverTumorHu{50, 15}, kKidneyTumorHu{30, 15};

const std::vector<std::string> kTumorMasks{"liver_tumor", "pancreatic_tumor", "kidney_tumor"};

Structure organ(std::string name, Shape shape, Normal hu) {
    Structure s;
    s.mask = name;
    s.name = std::move(name);
    s.role = Role::Organ;
    s.shape = std::move(shape);
    s.hu = hu;
    return s;
}

Structure vessel(std::string name, std::vector<Vec3> pts, double r) {
    Structure s;
    s.mask = name;
    s.name = std::move(name);
    s.role = Role::Vessel;
    s.shape = Shape::tube(std::move(pts), r);
    s.hu = kVesselHu;
    return s;
}

Structure tumor(std::string name, std::string mask, std::string host, Shape shape, Normal hu,
                std::vector<std::string> segments = {}) {
    Structure s;
    s.name = std::move(name);
    s.mask = std::move(mask);
    s.role = Role::Tumor;
    s.host = std::move(host);
    s.shape = std::move(shape);
    s.hu = hu;
    s.expected_segments = std::move(segments);
    return s;
}

Structure pdac(std::string name, Shape shape, std::vector<std::string> segments) {
    return tumor(std::move(name), "pancreatic_tumor", "pancreas", std::move(shape), kPdacHu, std::move(segments));
}

// Base abdomen on a 200 x 160 x 140 mm lattice, shifted by `o`. The SMA runs
// along z just dorsal of the pancreatic neck at x = 95; the pancreas is a head
// ellipsoid plus a straight body/tail tube along +x.
struct Anatomy {
    Vec3 o{0, 0, 0};
    Vec3 at(double x, double y, double z) const { return {x + o[0], y + o[1], z + o[2]}; }

    std::vector<Structure> organs(Normal liver_hu = kLiverHu, Normal pancreas_hu = kPancreasHu) const {
        std::vector<Structure> v;
        v.push_back(organ("liver", Shape::ellipsoid(at(55, 75, 112), {42, 48, 26}), liver_hu));
        v.push_back(organ("pancreas",
                          Shape::union_of({Shape::ellipsoid(at(80, 70, 70), {15, 14, 14}),
                                           Shape::tube({at(80, 70, 70), at(160, 70, 70)}, 8)}),
                          pancreas_hu));
        v.push_back(organ("spleen", Shape::ellipsoid(at(172, 112, 100), {18, 24, 22}), kSpleenHu));
        v.push_back(organ("kidneys",
                          Shape::union_of({Shape::ellipsoid(at(60, 120, 45), {16, 20, 28}),
                                           Shape::ellipsoid(at(140, 120, 45), {16, 20, 28})}),
                          kKidneyHu));
        v.push_back(vessel("SMA", {at(95, 86, 20), at(95, 86, 92)}, 4));
        v.push_back(vessel("CA", {at(95, 86, 92), at(95, 78, 92)}, 3.5));
        v.push_back(vessel("CHA", {at(95, 78, 92), at(65, 74, 92)}, 2.5));
        v.push_back(vessel("SA", {at(95, 78, 92), at(163, 100, 92)}, 2.5));
        return v;
    }
};

PhantomSpec base(std::string name, std::uint64_t seed) {
    PhantomSpec s;
    s.name = std::move(name);
    s.dims = {200, 160, 140};
    s.spacing = {1, 1, 1};
    s.seed = seed;
    s.background = {-1000, 10};
    s.structures = Anatomy{}.organs();
    s.empty_masks = kTumorMasks;
    return s;
}

PhantomSpec with(PhantomSpec s, std::vector<Structure> extra, std::optional<std::string> stage = std::nullopt) {
    for (auto& e : extra) s.structures.push_back(std::move(e));
    s.expected_stage = std::move(stage);
    return s;
}

PhantomSpec liver_24() {
    std::vector<Structure> lesions;
    int k = 0;
    for (double dz : {-8.0, 8.0})
        for (double dy : {-18.0, 0.0, 18.0})
            for (double dx : {-24.0, -8.0, 8.0, 24.0}) {
                const double r = 5.0 + (k % 3);
                lesions.push_back(tumor("liver_lesion_" + std::to_string(k + 1), "liver_tumor", "liver",
                                        Shape::sphere({55 + dx, 75 + dy, 112 + dz}, r), kLiverTumorHu));
                ++k;
            }
    return with(base("liver_24", 0x5eed0024), std::move(lesions));
}

PhantomSpec desk256() {
    const Anatomy a{{28, 48, 58}};
    PhantomSpec s;
    s.name = "desk256";
    s.dims = {256, 256, 256};
    s.spacing = {1, 1, 1};
    s.seed = 0x5eed0256;
    s.background = {-1000, 10};
    s.structures = a.organs();
    s.empty_masks = kTumorMasks;
    s.structures.push_back(pdac("pdac", Shape::ellipsoid(a.at(95, 84, 70), {16, 13, 13}), {"head", "body"}));
    s.structures.push_back(tumor("liver_lesion_1", "liver_tumor", "liver", Shape::sphere(a.at(40, 70, 112), 8),
                                 kLiverTumorHu));
    s.structures.push_back(tumor("liver_lesion_2", "liver_tumor", "liver", Shape::sphere(a.at(70, 85, 116), 6),
                                 kLiverTumorHu));
    s.structures.push_back(tumor("kidney_lesion_1", "kidney_tumor", "kidneys", Shape::sphere(a.at(140, 120, 45), 9),
                                 kKidneyTumorHu));
    s.expected_stage = "T4";
    return s;
}

// Tumour centred at x = 140 in the tail; from r = 9 it crosses the body/tail
// plane at x = 131.5.
PhantomSpec clear_margin(std::string name, double r, std::string stage, std::uint64_t seed) {
    std::vector<std::string> segs = r > 8.5 ? std::vector<std::string>{"body", "tail"} : std::vector<std::string>{"tail"};
    return with(base(std::move(name), seed), {pdac("pdac", Shape::sphere({140, 70, 70}, r), std::move(segs))},
                std::move(stage));
}

const std::vector<std::string>& names() {
    static const std::vector<std::string> v{
        "control",        "liver_small",   "liver_large",   "pancreas_small", "pancreas_large", "kidney_small",
        "kidney_large",   "liver_24",      "pancreas_head", "pancreas_body",  "pancreas_tail",  "t1a",
        "t1b",            "t1c",           "t2",            "t3",             "t4_encasement",  "noisy",
        "fatty_organs",   "desk256"};
    return v;
}

}  // namespace

std::vector<std::string> scenario_names() { return names(); }

PhantomSpec scenario(std::string_view name) {
    if (name == "control") return base("control", 0x5eed0001);
    if (name == "liver_small")
        return with(base("liver_small", 0x5eed0002),
                    {tumor("liver_lesion_1", "liver_tumor", "liver", Shape::sphere({55, 75, 112}, 8), kLiverTumorHu)});
    if (name == "liver_large")
        return with(base("liver_large", 0x5eed0003),
                    {tumor("liver_lesion_1", "liver_tumor", "liver", Shape::sphere({55, 75, 112}, 18), kLiverTumorHu)});
    if (name == "pancreas_small")
        return with(base("pancreas_small", 0x5eed0004), {pdac("pdac", Shape::sphere({130, 70, 70}, 7), {"body"})},
                    "T1c");
    if (name == "pancreas_large")
        return with(base("pancreas_large", 0x5eed0005),
                    {pdac("pdac", Shape::sphere({140, 70, 70}, 15), {"body", "tail"})}, "T2");
    if (name == "kidney_small")
        return with(base("kidney_small", 0x5eed0006), {tumor("kidney_lesion_1", "kidney_tumor", "kidneys",
                                                             Shape::sphere({60, 120, 45}, 7), kKidneyTumorHu)});
    if (name == "kidney_large")
        return with(base("kidney_large", 0x5eed0007), {tumor("kidney_lesion_1", "kidney_tumor", "kidneys",
                                                             Shape::sphere({140, 120, 45}, 14), kKidneyTumorHu)});
    if (name == "liver_24") return liver_24();
    if (name == "pancreas_head")
        return with(base("pancreas_head", 0x5eed0008), {pdac("pdac", Shape::sphere({78, 70, 70}, 7), {"head"})},
                    "T1c");
    if (name == "pancreas_body")
        return with(base("pancreas_body", 0x5eed0009), {pdac("pdac", Shape::sphere({118, 70, 70}, 6), {"body"})},
                    "T1c");
    if (name == "pancreas_tail")
        return with(base("pancreas_tail", 0x5eed000a), {pdac("pdac", Shape::sphere({152, 70, 70}, 6), {"tail"})},
                    "T1c");
    if (name == "t1a") return clear_margin("t1a", 2, "T1a", 0x5eed0011);
    if (name == "t1b") return clear_margin("t1b", 4, "T1b", 0x5eed0012);
    if (name == "t1c") return clear_margin("t1c", 8, "T1c", 0x5eed0013);
    if (name == "t2") return clear_margin("t2", 13, "T2", 0x5eed0014);
    if (name == "t3") return clear_margin("t3", 24, "T3", 0x5eed0015);
    if (name == "t4_encasement")
        return with(base("t4_encasement", 0x5eed0016),
                    {pdac("pdac", Shape::ellipsoid({95, 84, 70}, {16, 13, 13}), {"head", "body"})}, "T4");
    if (name == "noisy") {
        auto s = with(base("noisy", 0x5eed0017), {pdac("pdac", Shape::sphere({140, 70, 70}, 15), {"body", "tail"})},
                      "T2");
        for (auto& st : s.structures) {
            if (st.mask == "pancreatic_tumor") st.salt = {300, 0x5a17};
            if (st.mask == "liver") st.salt = {300, 0x5a18};
        }
        return s;
    }
    if (name == "fatty_organs") {
        PhantomSpec s = base("fatty_organs", 0x5eed0018);
        s.structures = Anatomy{}.organs({30, 15}, {60, 15});
        return s;
    }
    if (name == "desk256") return desk256();
    throw Error(ErrorCode::InvalidArgument, "unknown phantom scenario '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Vec3 vec_from(const json& j, const std::string& ptr) {
    ju::expect_array(j, ptr);
    if (j.size() != 3) throw SchemaError(ptr, "expected three numbers");
    return {ju::as_number(j[0], ju::child(ptr, 0)), ju::as_number(j[1], ju::child(ptr, 1)),
            ju::as_number(j[2], ju::child(ptr, 2))};
}

json shape_json(const Shape& s) {
    switch (s.kind) {
        case Shape::Kind::Ellipsoid:
            return {{"type", "ellipsoid"}, {"center", vec_json(s.center)}, {"semi_axes", vec_json(s.semi_axes)},
                    {"rotation_deg", vec_json(s.rotation_deg)}};
        case Shape::Kind::Tube: {
            json pts = json::array();
            for (const auto& p : s.points) pts.push_back(vec_json(p));
            return {{"type", "tube"}, {"points", pts}, {"radius", s.radius}};
        }
        case Shape::Kind::Union: {
            json parts = json::array();
            for (const auto& p : s.parts) parts.push_back(shape_json(p));
            return {{"type", "union"}, {"parts", parts}};
        }
    }
    return {};
}

Shape shape_from(const json& j, const std::string& ptr) {
    ju::expect_object(j, ptr);
    const std::string type = ju::get_string(j, ptr, "type");
    if (type == "ellipsoid") {
        Vec3 rot{0, 0, 0};
        if (const json* r = ju::optional_field(j, "rotation_deg")) rot = vec_from(*r, ju::child(ptr, "rotation_deg"));
        return Shape::ellipsoid(vec_from(ju::require(j, ptr, "center"), ju::child(ptr, "center")),
                                vec_from(ju::require(j, ptr, "semi_axes"), ju::child(ptr, "semi_axes")), rot);
    }
    if (type == "tube") {
        const std::string pp = ju::child(ptr, "points");
        const json& pts = ju::require(j, ptr, "points");
        ju::expect_array(pts, pp);
        std::vector<Vec3> v;
        for (std::size_t i = 0; i < pts.size(); ++i) v.push_back(vec_from(pts[i], ju::child(pp, i)));
        return Shape::tube(std::move(v), ju::get_number(j, ptr, "radius"));
    }
    if (type == "union") {
        const std::string pp = ju::child(ptr, "parts");
        const json& parts = ju::require(j, ptr, "parts");
        ju::expect_array(parts, pp);
        std::vector<Shape> v;
        for (std::size_t i = 0; i < parts.size(); ++i) v.push_back(shape_from(parts[i], ju::child(pp, i)));
        return Shape::union_of(std::move(v));
    }
    throw SchemaError(ju::child(ptr, "type"), "unknown shape type '" + type + "'");
}

json normal_json(const Normal& n) { return {{"mean", n.mean}, {"std", n.std}}; }

Normal normal_from(const json& j, const std::string& ptr) {
    ju::expect_object(j, ptr);
    return {ju::get_number(j, ptr, "mean"), ju::opt_number(j, ptr, "std").value_or(0.0)};
}

Role role_from(const std::string& s, const std::string& ptr) {
    for (Role r : {Role::Organ, Role::Vessel, Role::Tumor})
        if (role_name(r) == s) return r;
    throw SchemaError(ptr, "unknown role '" + s + "'");
}

std::uint64_t u64_from(const json& j, const std::string& ptr) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
    throw SchemaError(ptr, "expected a non-negative integer");
}

}  // namespace

std::string spec_to_json(const PhantomSpec& spec) {
    json structures = json::array();
    for (const auto& s : spec.structures) {
        json j{{"name", s.name}, {"mask", s.mask}, {"role", role_name(s.role)}, {"shape", shape_json(s.shape)},
               {"hu", normal_json(s.hu)}};
        if (!s.host.empty()) j["host"] = s.host;
        if (s.salt.count > 0) j["salt"] = {{"count", s.salt.count}, {"seed", s.salt.seed}};
        if (!s.expected_segments.empty()) j["expected_segments"] = s.expected_segments;
        structures.push_back(std::move(j));
    }
    json j{{"name", spec.name},
           {"dims", {spec.dims.nx, spec.dims.ny, spec.dims.nz}},
           {"spacing", {spec.spacing.dx, spec.spacing.dy, spec.spacing.dz}},
           {"seed", spec.seed},
           {"rng", std::string(SplitMix64::kName)},
           {"background_hu", normal_json(spec.background)},
           {"structures", structures}};
    if (!spec.empty_masks.empty()) j["empty_masks"] = spec.empty_masks;
    if (spec.expected_stage) j["expected_stage"] = *spec.expected_stage;
    return j.dump(2) + "\n";
}

PhantomSpec spec_from_json(std::string_view text) {
    const json j = ju::parse(text);
    ju::expect_object(j, "");
    PhantomSpec s;
    s.name = ju::opt_string(j, "", "name").value_or("");
    {
        const json& d = ju::require(j, "", "dims");
        ju::expect_array(d, "/dims");
        if (d.size() != 3) throw SchemaError("/dims", "expected three integers");
        s.dims = {ju::as_int(d[0], "/dims/0"), ju::as_int(d[1], "/dims/1"), ju::as_int(d[2], "/dims/2")};
    }
    if (const json* sp = ju::optional_field(j, "spacing")) {
        const Vec3 v = vec_from(*sp, "/spacing");
        s.spacing = {v[0], v[1], v[2]};
    }
    s.seed = u64_from(ju::require(j, "", "seed"), "/seed");
    if (const auto rng = ju::opt_string(j, "", "rng"); rng && *rng != SplitMix64::kName)
        throw SchemaError("/rng", "unsupported generator '" + *rng + "'");
    if (const json* b = ju::optional_field(j, "background_hu")) s.background = normal_from(*b, "/background_hu");
    s.expected_stage = ju::opt_string(j, "", "expected_stage");
    if (const json* e = ju::optional_field(j, "empty_masks")) {
        ju::expect_array(*e, "/empty_masks");
        for (std::size_t i = 0; i < e->size(); ++i)
            s.empty_masks.push_back(ju::as_string((*e)[i], ju::child("/empty_masks", i)));
    }
    const json& st = ju::require(j, "", "structures");
    ju::expect_array(st, "/structures");
    for (std::size_t i = 0; i < st.size(); ++i) {
        const std::string p = ju::child("/structures", i);
        const json& e = st[i];
        ju::expect_object(e, p);
        Structure x;
        x.name = ju::get_string(e, p, "name");
        x.mask = ju::opt_string(e, p, "mask").value_or(x.name);
        x.role = role_from(ju::get_string(e, p, "role"), ju::child(p, "role"));
        x.host = ju::opt_string(e, p, "host").value_or("");
        x.shape = shape_from(ju::require(e, p, "shape"), ju::child(p, "shape"));
        x.hu = normal_from(ju::require(e, p, "hu"), ju::child(p, "hu"));
        if (const json* salt = ju::optional_field(e, "salt")) {
            const std::string sp = ju::child(p, "salt");
            ju::expect_object(*salt, sp);
            x.salt.count = static_cast<std::size_t>(u64_from(ju::require(*salt, sp, "count"), ju::child(sp, "count")));
            if (const json* sd = ju::optional_field(*salt, "seed")) x.salt.seed = u64_from(*sd, ju::child(sp, "seed"));
        }
        if (const json* seg = ju::optional_field(e, "expected_segments")) {
            const std::string sp = ju::child(p, "expected_segments");
            ju::expect_array(*seg, sp);
            for (std::size_t k = 0; k < seg->size(); ++k)
                x.expected_segments.push_back(ju::as_string((*seg)[k], ju::child(sp, k)));
        }
        s.structures.push_back(std::move(x));
    }
    validate(s);
    return s;
}

std::string truth_to_json(const GroundTruth& gt) {
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json tumors = json::array();
    for (const auto& t : gt.tumors)
        tumors.push_back({{"name", t.name},
                          {"mask", t.mask},
                          {"host", t.host},
                          {"center_mm", vec_json(t.center_mm)},
                          {"d_max_cm", opt(t.d_max_cm)},
                          {"d_perp_cm", opt(t.d_perp_cm)},
                          {"volume_cm3", opt(t.volume_cm3)},
                          {"hu_mean", t.hu_mean},
                          {"expected_segments", t.expected_segments}});
    json vessels = json::array();
    for (const auto& v : gt.vessels) vessels.push_back({{"name", v.name}, {"encasement_deg", v.encasement_deg}});
    json organs = json::array();
    for (const auto& o : gt.organs)
        organs.push_back({{"mask", o.mask}, {"volume_cm3", opt(o.volume_cm3)}, {"hu_mean", o.hu_mean}});
    json j{{"tumors", tumors}, {"vessels", vessels}, {"organs", organs}};
    j["expected_stage"] = gt.expected_stage ? json(*gt.expected_stage) : json(nullptr);
    return j.dump(2) + "\n";
}

}  // namespace radrep::phantom
