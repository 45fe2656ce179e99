#include "radrep/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "radrep/error.hpp"

namespace radrep::geometry {

double dot(const Vec3& a, const Vec3& b) noexcept { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 cross(const Vec3& a, const Vec3& b) noexcept {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double norm(const Vec3& a) noexcept { return std::sqrt(dot(a, a)); }

Vec3 voxel_center_mm(const Spacing& s, std::int64_t x, std::int64_t y, std::int64_t z) {
    return {static_cast<double>(x) * s.dx, static_cast<double>(y) * s.dy, static_cast<double>(z) * s.dz};
}

std::vector<Vec3> foreground_points_mm(const Mask& m) {
    std::vector<Vec3> pts;
    const auto& d = m.dims();
    std::size_t i = 0;
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x, ++i)
                if (m.bits()[i]) pts.push_back(voxel_center_mm(m.spacing(), x, y, z));
    return pts;
}

namespace {

std::vector<Vec3> pca_sample(std::span<const Vec3> points) {
    if (points.size() <= kPcaSampleLimit) return {points.begin(), points.end()};
    std::vector<Vec3> out;
    out.reserve(kPcaSampleLimit);
    std::mt19937_64 rng(0x5eed'7ca0'0001ULL);
    std::sample(points.begin(), points.end(), std::back_inserter(out), kPcaSampleLimit, rng);
    return out;
}

Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> covariance_eigen(std::span<const Vec3> points) {
    if (points.size() < 2) throw Error(ErrorCode::DegenerateCloud, "PCA needs at least two points");
    const bool coincident = std::all_of(points.begin(), points.end(),
                                        [&](const Vec3& p) { return p == points.front(); });
    if (coincident) throw Error(ErrorCode::DegenerateCloud, "all points coincide");
    const auto sample = pca_sample(points);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : sample) mean += Eigen::Vector3d(p[0], p[1], p[2]);
    mean /= static_cast<double>(sample.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : sample) {
        const Eigen::Vector3d q = Eigen::Vector3d(p[0], p[1], p[2]) - mean;
        cov += q * q.transpose();
    }
    cov /= static_cast<double>(sample.size());
    return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(cov);
}

}  // namespace

Vec3 principal_axis(std::span<const Vec3> points) {
    const auto es = covariance_eigen(points);
    // Eigenvalues are sorted ascending.
    Eigen::Vector3d v = es.eigenvectors().col(2).normalized();
    int big = 0;
    for (int k = 1; k < 3; ++k)
        if (std::abs(v[k]) > std::abs(v[big]) + 1e-12) big = k;
    if (v[big] < 0) v = -v;
    return {v[0], v[1], v[2]};
}

Vec3 covariance_spectrum(std::span<const Vec3> points) {
    const auto es = covariance_eigen(points);
    const auto& ev = es.eigenvalues();
    return {ev[2], ev[1], ev[0]};
}

Vec3 RigidTransform::apply(const Vec3& p) const noexcept {
    Vec3 q{};
    for (int r = 0; r < 3; ++r)
        q[r] = rotation[r][0] * p[0] + rotation[r][1] * p[1] + rotation[r][2] * p[2] + translation[r];
    return q;
}

Vec3 RigidTransform::apply_inverse(const Vec3& q) const noexcept {
    const Vec3 d{q[0] - translation[0], q[1] - translation[1], q[2] - translation[2]};
    Vec3 p{};
    for (int c = 0; c < 3; ++c) p[c] = rotation[0][c] * d[0] + rotation[1][c] * d[1] + rotation[2][c] * d[2];
    return p;
}

RigidTransform RigidTransform::inverse() const noexcept {
    RigidTransform inv;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) inv.rotation[r][c] = rotation[c][r];
    const Vec3 t = inv.apply({-translation[0], -translation[1], -translation[2]});
    inv.translation = t;
    return inv;
}

Mat3 rotation_between(const Vec3& from, const Vec3& to) {
    const double nf = norm(from), nt = norm(to);
    if (nf == 0 || nt == 0) throw Error(ErrorCode::InvalidArgument, "rotation between zero vectors");
    const Vec3 a{from[0] / nf, from[1] / nf, from[2] / nf};
    const Vec3 b{to[0] / nt, to[1] / nt, to[2] / nt};
    const double c = dot(a, b);
    Mat3 r{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    if (c > 1 - 1e-15) return r;
    if (c < -1 + 1e-12) {
        // Half turn about any axis perpendicular to a.
        Vec3 perp = std::abs(a[0]) < 0.9 ? cross(a, {1, 0, 0}) : cross(a, {0, 1, 0});
        const double np = norm(perp);
        perp = {perp[0] / np, perp[1] / np, perp[2] / np};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r[i][j] = 2 * perp[i] * perp[j] - (i == j ? 1 : 0);
        return r;
    }
    const Vec3 v = cross(a, b);
    const double k = 1.0 / (1.0 + c);
    const Mat3 vx{{{0, -v[2], v[1]}, {v[2], 0, -v[0]}, {-v[1], v[0], 0}}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double vx2 = 0;
            for (int m = 0; m < 3; ++m) vx2 += vx[i][m] * vx[m][j];
            r[i][j] += vx[i][j] + k * vx2;
        }
    return r;
}

Vec3 center_of_mass_mm(const Mask& m) {
    const auto& d = m.dims();
    Vec3 sum{0, 0, 0};
    std::size_t n = 0;
    std::size_t i = 0;
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x, ++i)
                if (m.bits()[i]) {
                    const auto p = voxel_center_mm(m.spacing(), x, y, z);
                    for (int k = 0; k < 3; ++k) sum[k] += p[k];
                    ++n;
                }
    if (n == 0) throw Error(ErrorCode::EmptyInput, "centre of mass of an empty mask");
    return {sum[0] / static_cast<double>(n), sum[1] / static_cast<double>(n), sum[2] / static_cast<double>(n)};
}

namespace {

std::int64_t nearest(double v) { return static_cast<std::int64_t>(std::floor(v + 0.5)); }

// Fills `out` (aligned grid) by pulling each aligned voxel back into `source`.
void pull_into_frame(const Mask& source, const RigidTransform& t, Mask& out) {
    const auto& od = out.dims();
    const double s = out.spacing().dx;
    const auto& sp = source.spacing();
    std::size_t i = 0;
    for (std::int64_t z = 0; z < od.nz; ++z)
        for (std::int64_t y = 0; y < od.ny; ++y)
            for (std::int64_t x = 0; x < od.nx; ++x, ++i) {
                const Vec3 p = t.apply_inverse({static_cast<double>(x) * s, static_cast<double>(y) * s,
                                                static_cast<double>(z) * s});
                const std::int64_t sx = nearest(p[0] / sp.dx);
                const std::int64_t sy = nearest(p[1] / sp.dy);
                const std::int64_t sz = nearest(p[2] / sp.dz);
                if (source.get(sx, sy, sz)) out.bits()[i] = 1;
            }
}

}  // namespace

AlignedMask align_axis_to_x(const Mask& m, const Vec3& axis, const Vec3& pivot) {
    const auto pts = foreground_points_mm(m);
    if (pts.empty()) throw Error(ErrorCode::EmptyInput, "cannot align an empty mask");
    const auto& sp = m.spacing();
    const double pitch = std::min({sp.dx, sp.dy, sp.dz});
    constexpr std::int64_t kPad = 2;

    RigidTransform t;
    t.rotation = rotation_between(axis, {1, 0, 0});
    // Rotate about the pivot first, then shift so the padded box starts at 0.
    t.translation = {0, 0, 0};
    const Vec3 rc = t.apply(pivot);
    t.translation = {-rc[0], -rc[1], -rc[2]};
    Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
    Vec3 hi{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest(),
            std::numeric_limits<double>::lowest()};
    for (const auto& p : pts) {
        const Vec3 q = t.apply(p);
        for (int k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], q[k]);
            hi[k] = std::max(hi[k], q[k]);
        }
    }
    Grid g;
    g.spacing = {pitch, pitch, pitch};
    g.affine = diagonal_affine(g.spacing);
    std::array<std::int64_t, 3> n{};
    for (int k = 0; k < 3; ++k) {
        const double origin = std::floor(lo[k] / pitch) * pitch - static_cast<double>(kPad) * pitch;
        t.translation[k] -= origin;
        n[k] = static_cast<std::int64_t>(std::ceil((hi[k] - origin) / pitch)) + 1 + kPad;
    }
    g.dims = {n[0], n[1], n[2]};

    AlignedMask out{Mask(g, m.label()), t, m.grid()};
    pull_into_frame(m, t, out.mask);
    return out;
}

AlignedMask align_to_x(const Mask& m) {
    const auto pts = foreground_points_mm(m);
    if (pts.empty()) throw Error(ErrorCode::EmptyInput, "cannot align an empty mask");
    Vec3 c{0, 0, 0};
    for (const auto& p : pts)
        for (int k = 0; k < 3; ++k) c[k] += p[k];
    for (int k = 0; k < 3; ++k) c[k] /= static_cast<double>(pts.size());
    Vec3 axis{1, 0, 0};
    if (pts.size() >= 2 && !std::all_of(pts.begin(), pts.end(), [&](const Vec3& p) { return p == pts[0]; }))
        axis = principal_axis(pts);
    return align_axis_to_x(m, axis, c);
}

Mask resample_into(const Mask& source, const AlignedMask& frame) {
    Mask out(frame.mask.grid(), source.label());
    pull_into_frame(source, frame.transform, out);
    return out;
}

Mask apply_inverse(const RigidTransform& t, const Mask& aligned, const Grid& target) {
    Mask out(target, aligned.label());
    const auto& td = target.dims;
    const double s = aligned.spacing().dx;
    std::size_t i = 0;
    for (std::int64_t z = 0; z < td.nz; ++z)
        for (std::int64_t y = 0; y < td.ny; ++y)
            for (std::int64_t x = 0; x < td.nx; ++x, ++i) {
                const Vec3 q = t.apply(voxel_center_mm(target.spacing, x, y, z));
                if (aligned.get(nearest(q[0] / s), nearest(q[1] / s), nearest(q[2] / s)))
                    out.bits()[i] = 1;
            }
    return out;
}

Extent project_extent(const Mask& m, Axis axis) {
    const auto& d = m.dims();
    const int k = static_cast<int>(axis);
    double lo = std::numeric_limits<double>::max();
    double hi = std::numeric_limits<double>::lowest();
    std::size_t i = 0;
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x, ++i)
                if (m.bits()[i]) {
                    const double v = voxel_center_mm(m.spacing(), x, y, z)[k];
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
    if (lo > hi) throw Error(ErrorCode::EmptyInput, "extent of an empty mask");
    return {lo, hi, (lo + hi) / 2};
}

double jaccard(const Mask& a, const Mask& b) {
    if (!a.grid().same_lattice(b.grid()))
        throw Error(ErrorCode::GridMismatch, "jaccard of masks on different grids");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.bits().size(); ++i) {
        inter += (a.bits()[i] && b.bits()[i]) ? 1 : 0;
        uni += (a.bits()[i] || b.bits()[i]) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace radrep::geometry
