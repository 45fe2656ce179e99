#include "radrep/volume.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "radrep/error.hpp"

namespace radrep {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Io: return "IoError";
        case ErrorCode::Parse: return "ParseError";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::Dimension: return "DimensionError";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::DegenerateCloud: return "DegenerateCloud";
        case ErrorCode::SubsegmentationUnavailable: return "SubsegmentationUnavailable";
        case ErrorCode::MissingMeasurement: return "MissingMeasurement";
        case ErrorCode::UnknownOrgan: return "UnknownOrgan";
        case ErrorCode::MissingSpleen: return "MissingSpleen";
        case ErrorCode::SpleenAttenuationNonpositive: return "SpleenAttenuationNonpositive";
        case ErrorCode::Schema: return "SchemaError";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::Http: return "HttpError";
        case ErrorCode::MalformedResponse: return "MalformedResponse";
        case ErrorCode::MarkersMissing: return "MarkersMissing";
        case ErrorCode::Consistency: return "Consistency";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::ShapeOutOfBounds: return "ShapeOutOfBounds";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Error";
}

bool Spacing::valid() const noexcept {
    return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dz) && dx > 0 &&
           dy > 0 && dz > 0;
}

bool approx_equal(const Spacing& a, const Spacing& b, double rel_tol) noexcept {
    auto close = [rel_tol](double u, double v) {
        return std::abs(u - v) <= rel_tol * std::max(std::abs(u), std::abs(v));
    };
    return close(a.dx, b.dx) && close(a.dy, b.dy) && close(a.dz, b.dz);
}

Affine diagonal_affine(const Spacing& s) {
    return {s.dx, 0, 0, 0, 0, s.dy, 0, 0, 0, 0, s.dz, 0, 0, 0, 0, 1};
}

bool affine_invertible(const Affine& a) {
    const double det = a[0] * (a[5] * a[10] - a[6] * a[9]) -
                       a[1] * (a[4] * a[10] - a[6] * a[8]) +
                       a[2] * (a[4] * a[9] - a[5] * a[8]);
    return std::isfinite(det) && std::abs(det) > 1e-12;
}

bool affine_axis_aligned(const Affine& a) {
    for (int col = 0; col < 3; ++col) {
        double norm = 0;
        for (int row = 0; row < 3; ++row) norm = std::max(norm, std::abs(a[row * 4 + col]));
        int big = 0;
        for (int row = 0; row < 3; ++row)
            if (std::abs(a[row * 4 + col]) > 1e-6 * norm) ++big;
        if (big != 1) return false;
    }
    return true;
}

namespace {

void check_grid(const Grid& g) {
    if (g.dims.nx <= 0 || g.dims.ny <= 0 || g.dims.nz <= 0)
        throw Error(ErrorCode::Dimension, "grid dimensions must be positive");
    if (!g.spacing.valid())
        throw Error(ErrorCode::InvalidArgument, "voxel spacing must be finite and positive");
}

}  // namespace

Volume::Volume(Grid grid, std::vector<float> data) : grid_(grid), data_(std::move(data)) {
    check_grid(grid_);
    if (data_.size() != grid_.dims.count())
        throw Error(ErrorCode::Dimension, "volume data length does not match dims");
}

Mask::Mask(Grid grid, std::string label)
    : grid_(grid), bits_(grid.dims.count(), 0), label_(std::move(label)) {
    check_grid(grid_);
    if (label_.empty()) throw Error(ErrorCode::InvalidArgument, "mask label must be non-empty");
}

Mask::Mask(Grid grid, std::vector<std::uint8_t> bits, std::string label)
    : grid_(grid), bits_(std::move(bits)), label_(std::move(label)) {
    check_grid(grid_);
    if (bits_.size() != grid_.dims.count())
        throw Error(ErrorCode::Dimension, "mask length does not match dims");
    if (label_.empty()) throw Error(ErrorCode::InvalidArgument, "mask label must be non-empty");
    for (auto& b : bits_) b = b ? 1 : 0;
}

void Mask::set_label(std::string label) {
    if (label.empty()) throw Error(ErrorCode::InvalidArgument, "mask label must be non-empty");
    label_ = std::move(label);
}

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool Mask::operator==(const Mask& other) const {
    return grid_.same_lattice(other.grid_) &&
           bits_ == other.bits_;
}

BoundingBox bounding_box(const Mask& m) {
    BoundingBox box;
    const auto& d = m.dims();
    const auto bits = m.bits();
    std::size_t i = 0;
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x, ++i) {
                if (!bits[i]) continue;
                if (box.empty) {
                    box.lo = box.hi = {x, y, z};
                    box.empty = false;
                    continue;
                }
                box.lo = {std::min(box.lo.x, x), std::min(box.lo.y, y), std::min(box.lo.z, z)};
                box.hi = {std::max(box.hi.x, x), std::max(box.hi.y, y), std::max(box.hi.z, z)};
            }
    return box;
}

Mask crop(const Mask& m, const BoundingBox& box, std::int64_t pad, Index3& origin) {
    const auto& d = m.dims();
    Index3 lo{0, 0, 0};
    Index3 hi{0, 0, 0};
    if (!box.empty) {
        lo = {std::max<std::int64_t>(0, box.lo.x - pad), std::max<std::int64_t>(0, box.lo.y - pad),
              std::max<std::int64_t>(0, box.lo.z - pad)};
        hi = {std::min(d.nx - 1, box.hi.x + pad), std::min(d.ny - 1, box.hi.y + pad),
              std::min(d.nz - 1, box.hi.z + pad)};
    }
    Grid g = m.grid();
    g.dims = {hi.x - lo.x + 1, hi.y - lo.y + 1, hi.z - lo.z + 1};
    // Shift the affine origin to the crop corner.
    const auto& a = m.grid().affine;
    for (int row = 0; row < 3; ++row)
        g.affine[row * 4 + 3] = a[row * 4 + 3] + a[row * 4 + 0] * static_cast<double>(lo.x) +
                                a[row * 4 + 1] * static_cast<double>(lo.y) +
                                a[row * 4 + 2] * static_cast<double>(lo.z);
    Mask out(g, m.label());
    for (std::int64_t z = 0; z < g.dims.nz; ++z)
        for (std::int64_t y = 0; y < g.dims.ny; ++y)
            for (std::int64_t x = 0; x < g.dims.nx; ++x)
                if (m.at(x + lo.x, y + lo.y, z + lo.z)) out.set(x, y, z, true);
    origin = lo;
    return out;
}

double physical_volume_mm3(const Mask& m) {
    return static_cast<double>(m.count()) * m.spacing().voxel_volume_mm3();
}

namespace {

std::int64_t resampled_extent(std::int64_t n, double old_sp, double new_sp) {
    // Guard against 19.999999 becoming 20 -> 21 through ceil.
    const double raw = static_cast<double>(n) * old_sp / new_sp;
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(raw - 1e-9)));
}

// Source index whose cell contains the centre of destination cell i.
std::int64_t source_cell(std::int64_t i, double old_sp, double new_sp, std::int64_t n) {
    const double pos = (static_cast<double>(i) + 0.5) * new_sp / old_sp;
    const auto s = static_cast<std::int64_t>(std::floor(pos + 1e-9));
    return std::min(s, n - 1);
}

}  // namespace

Grid resampled_grid(const Grid& source, const Spacing& target) {
    if (!target.valid())
        throw Error(ErrorCode::InvalidArgument, "target spacing must be finite and positive");
    Grid g;
    g.spacing = target;
    g.dims = {resampled_extent(source.dims.nx, source.spacing.dx, target.dx),
              resampled_extent(source.dims.ny, source.spacing.dy, target.dy),
              resampled_extent(source.dims.nz, source.spacing.dz, target.dz)};
    const std::array<double, 3> ratio{target.dx / source.spacing.dx,
                                      target.dy / source.spacing.dy,
                                      target.dz / source.spacing.dz};
    const auto& a = source.affine;
    g.affine = a;
    for (int row = 0; row < 3; ++row) {
        double shift = 0;
        for (int col = 0; col < 3; ++col) {
            g.affine[row * 4 + col] = a[row * 4 + col] * ratio[col];
            shift += a[row * 4 + col] * (0.5 * ratio[col] - 0.5);
        }
        g.affine[row * 4 + 3] = a[row * 4 + 3] + shift;
    }
    return g;
}

Mask resample_isotropic(const Mask& m, const Spacing& target) {
    const Grid g = resampled_grid(m.grid(), target);
    if (g.dims == m.dims() && target == m.spacing()) return m;
    const auto& sd = m.dims();
    const auto& ss = m.spacing();
    std::vector<std::int64_t> xs(static_cast<std::size_t>(g.dims.nx));
    std::vector<std::int64_t> ys(static_cast<std::size_t>(g.dims.ny));
    std::vector<std::int64_t> zs(static_cast<std::size_t>(g.dims.nz));
    for (std::int64_t i = 0; i < g.dims.nx; ++i) xs[i] = source_cell(i, ss.dx, target.dx, sd.nx);
    for (std::int64_t i = 0; i < g.dims.ny; ++i) ys[i] = source_cell(i, ss.dy, target.dy, sd.ny);
    for (std::int64_t i = 0; i < g.dims.nz; ++i) zs[i] = source_cell(i, ss.dz, target.dz, sd.nz);

    Mask out(g, m.label());
    auto bits = out.bits();
    std::size_t i = 0;
    for (std::int64_t z = 0; z < g.dims.nz; ++z)
        for (std::int64_t y = 0; y < g.dims.ny; ++y) {
            const std::size_t row = sd.index(0, ys[y], zs[z]);
            for (std::int64_t x = 0; x < g.dims.nx; ++x, ++i)
                bits[i] = m.bits()[row + static_cast<std::size_t>(xs[x])];
        }
    return out;
}

Volume resample_isotropic(const Volume& v, const Spacing& target) {
    const Grid g = resampled_grid(v.grid(), target);
    if (g.dims == v.dims() && target == v.spacing()) return v;
    const auto& sd = v.dims();
    const auto& ss = v.spacing();

    struct Tap {
        std::int64_t i0, i1;
        double w;
    };
    auto taps = [](std::int64_t n_out, double old_sp, double new_sp, std::int64_t n_in) {
        std::vector<Tap> t(static_cast<std::size_t>(n_out));
        for (std::int64_t i = 0; i < n_out; ++i) {
            // Continuous source coordinate in voxel-centre units.
            const double c = (static_cast<double>(i) + 0.5) * new_sp / old_sp - 0.5;
            const double cl = std::clamp(c, 0.0, static_cast<double>(n_in - 1));
            const auto i0 = static_cast<std::int64_t>(std::floor(cl));
            const auto i1 = std::min(i0 + 1, n_in - 1);
            t[static_cast<std::size_t>(i)] = {i0, i1, cl - static_cast<double>(i0)};
        }
        return t;
    };
    const auto tx = taps(g.dims.nx, ss.dx, target.dx, sd.nx);
    const auto ty = taps(g.dims.ny, ss.dy, target.dy, sd.ny);
    const auto tz = taps(g.dims.nz, ss.dz, target.dz, sd.nz);

    std::vector<float> out(g.dims.count());
    std::size_t i = 0;
    for (std::int64_t z = 0; z < g.dims.nz; ++z)
        for (std::int64_t y = 0; y < g.dims.ny; ++y)
            for (std::int64_t x = 0; x < g.dims.nx; ++x, ++i) {
                const Tap& a = tx[x];
                const Tap& b = ty[y];
                const Tap& c = tz[z];
                auto lerp_x = [&](std::int64_t yy, std::int64_t zz) {
                    return (1 - a.w) * v.at(a.i0, yy, zz) + a.w * v.at(a.i1, yy, zz);
                };
                const double y0 = (1 - b.w) * lerp_x(b.i0, c.i0) + b.w * lerp_x(b.i1, c.i0);
                const double y1 = (1 - b.w) * lerp_x(b.i0, c.i1) + b.w * lerp_x(b.i1, c.i1);
                out[i] = static_cast<float>((1 - c.w) * y0 + c.w * y1);
            }
    return Volume(g, std::move(out));
}

}  // namespace radrep
