#include "radrep/subsegment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "radrep/error.hpp"
#include "radrep/morphology.hpp"

namespace radrep::subsegment {

namespace {

constexpr std::uint8_t kNone = 0, kHead = 1, kBody = 2, kTail = 3;
constexpr double kPlaneEps = 1e-9;

std::int64_t nearest(double v) { return static_cast<std::int64_t>(std::floor(v + 0.5)); }

struct Planes {
    double head_body = 0;
    double body_tail = 0;
    double sign = 1;  // +1 when the head is at low x

    // Signed distance past the head/body plane, positive towards the tail.
    double depth(double x) const { return sign * (x - head_body); }
    std::uint8_t classify(double x) const {
        const double t = depth(x);
        if (t <= kPlaneEps) return kHead;
        return t <= sign * (body_tail - head_body) + kPlaneEps ? kBody : kTail;
    }
};

}  // namespace

HeadSide orient_head(const Mask& pancreas_aligned, double plane_x_mm, double sma_centroid_x_mm) {
    const auto& d = pancreas_aligned.dims();
    const double s = pancreas_aligned.spacing().dx;
    std::size_t low = 0, high = 0;
    std::size_t i = 0;
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x, ++i) {
                if (!pancreas_aligned.bits()[i]) continue;
                const double dx = static_cast<double>(x) * s - plane_x_mm;
                if (dx < -kPlaneEps && dx >= -kOrientSlabMm) ++low;
                if (dx > kPlaneEps && dx <= kOrientSlabMm) ++high;
            }
    if (low != high) return low > high ? HeadSide::LowX : HeadSide::HighX;
    if (sma_centroid_x_mm > plane_x_mm + kPlaneEps) return HeadSide::HighX;
    return HeadSide::LowX;
}

HeadSide orient_head(const Mask& pancreas_aligned, const Mask& sma_aligned) {
    const auto ext = geometry::project_extent(sma_aligned, geometry::Axis::X);
    const auto c = geometry::center_of_mass_mm(sma_aligned);
    return orient_head(pancreas_aligned, ext.mid_mm, c[0]);
}

PancreasSubsegments subsegment_pancreas(const Mask& pancreas, const Mask& sma) {
    if (!pancreas.grid().same_lattice(sma.grid()))
        throw Error(ErrorCode::GridMismatch, "pancreas and SMA are not co-registered");
    const BoundingBox pbox = bounding_box(pancreas);
    if (pbox.empty) throw Error(ErrorCode::EmptyInput, "pancreas mask is empty");

    const auto al = geometry::align_to_x(pancreas);
    const auto& sp = pancreas.spacing();

    // SMA voxels strictly below the pancreas are discarded.
    const auto& nd = pancreas.dims();
    double sma_lo = std::numeric_limits<double>::max(), sma_hi = std::numeric_limits<double>::lowest();
    double sma_sum = 0;
    std::size_t sma_n = 0;
    for (std::int64_t z = pbox.lo.z; z < nd.nz; ++z)
        for (std::int64_t y = 0; y < nd.ny; ++y)
            for (std::int64_t x = 0; x < nd.nx; ++x) {
                if (!sma.at(x, y, z)) continue;
                const double q = al.transform.apply(geometry::voxel_center_mm(sp, x, y, z))[0];
                sma_lo = std::min(sma_lo, q);
                sma_hi = std::max(sma_hi, q);
                sma_sum += q;
                ++sma_n;
            }
    if (sma_n == 0)
        throw Error(ErrorCode::SubsegmentationUnavailable,
                    "no SMA voxels at or above the pancreas; head/body boundary undefined");

    Planes planes;
    planes.head_body = (sma_lo + sma_hi) / 2;
    const HeadSide side =
        orient_head(al.mask, planes.head_body, sma_sum / static_cast<double>(sma_n));
    planes.sign = side == HeadSide::LowX ? 1.0 : -1.0;

    const Mask& am = al.mask;
    const auto& ad = am.dims();
    const double pitch = am.spacing().dx;
    double tmin = std::numeric_limits<double>::max(), tmax = std::numeric_limits<double>::lowest();
    for (std::int64_t x = 0; x < ad.nx; ++x) {
        const double t = planes.depth(static_cast<double>(x) * pitch);
        if (t <= kPlaneEps) continue;
        bool any = false;
        for (std::int64_t z = 0; z < ad.nz && !any; ++z)
            for (std::int64_t y = 0; y < ad.ny && !any; ++y) any = am.at(x, y, z);
        if (!any) continue;
        tmin = std::min(tmin, t);
        tmax = std::max(tmax, t);
    }
    planes.body_tail = tmin <= tmax ? planes.head_body + planes.sign * (tmin + tmax) / 2
                                    : planes.head_body;

    std::vector<std::uint8_t> labels(am.bits().size(), kNone);
    for (std::int64_t z = 0; z < ad.nz; ++z)
        for (std::int64_t y = 0; y < ad.ny; ++y)
            for (std::int64_t x = 0; x < ad.nx; ++x) {
                const auto i = ad.index(x, y, z);
                if (am.bits()[i]) labels[i] = planes.classify(static_cast<double>(x) * pitch);
            }

    // Tail-to-head sweep over x-slices of the non-head part. An in-slice
    // component that does not touch the previous non-empty slice's chain is head.
    morphology::Mask2D chain;
    bool started = false;
    const std::int64_t x_first = side == HeadSide::LowX ? ad.nx - 1 : 0;
    const std::int64_t step = side == HeadSide::LowX ? -1 : 1;
    for (std::int64_t x = x_first; x >= 0 && x < ad.nx; x += step) {
        morphology::Mask2D slice(ad.ny, ad.nz);
        for (std::int64_t z = 0; z < ad.nz; ++z)
            for (std::int64_t y = 0; y < ad.ny; ++y) {
                const auto l = labels[ad.index(x, y, z)];
                if (l == kBody || l == kTail) slice.set(y, z, true);
            }
        if (slice.count() == 0) continue;
        if (!started) {
            started = true;
            chain = std::move(slice);
            continue;
        }
        const auto cc = morphology::connected_components_2d(slice, morphology::Connectivity2D::Eight);
        std::vector<bool> touches(static_cast<std::size_t>(cc.count) + 1, false);
        for (std::int64_t v = 0; v < slice.ny; ++v)
            for (std::int64_t u = 0; u < slice.nx; ++u) {
                const auto l = cc.labels[static_cast<std::size_t>(u + slice.nx * v)];
                if (l == 0 || touches[l]) continue;
                for (std::int64_t dv = -1; dv <= 1 && !touches[l]; ++dv)
                    for (std::int64_t du = -1; du <= 1 && !touches[l]; ++du)
                        if (chain.get(u + du, v + dv)) touches[l] = true;
            }
        for (std::int64_t v = 0; v < slice.ny; ++v)
            for (std::int64_t u = 0; u < slice.nx; ++u) {
                const auto l = cc.labels[static_cast<std::size_t>(u + slice.nx * v)];
                if (l == 0 || touches[l]) continue;
                labels[ad.index(x, u, v)] = kHead;
                slice.set(u, v, false);
            }
        chain = std::move(slice);
    }

    PancreasSubsegments out{Mask(pancreas.grid(), "pancreas_head"), Mask(pancreas.grid(), "pancreas_body"),
                            Mask(pancreas.grid(), "pancreas_tail"), side, planes.head_body,
                            planes.body_tail};
    std::size_t i = 0;
    for (std::int64_t z = 0; z < nd.nz; ++z)
        for (std::int64_t y = 0; y < nd.ny; ++y)
            for (std::int64_t x = 0; x < nd.nx; ++x, ++i) {
                if (!pancreas.bits()[i]) continue;
                const auto q = al.transform.apply(geometry::voxel_center_mm(sp, x, y, z));
                const std::int64_t ax = nearest(q[0] / pitch), ay = nearest(q[1] / pitch),
                                   az = nearest(q[2] / pitch);
                std::uint8_t l = ad.contains(ax, ay, az) ? labels[ad.index(ax, ay, az)] : kNone;
                if (l == kNone) l = planes.classify(q[0]);
                Mask& target = l == kHead ? out.head : (l == kBody ? out.body : out.tail);
                target.bits()[i] = 1;
            }
    return out;
}

SubsegmentMap SubsegmentMap::from_masks(std::string organ, const std::vector<Mask>& segments) {
    if (segments.size() > 255) throw Error(ErrorCode::InvalidArgument, "too many segments");
    SubsegmentMap m;
    m.organ_ = std::move(organ);
    if (segments.empty()) return m;
    m.grid_ = segments.front().grid();
    m.labels_.assign(m.grid_.dims.count(), 0);
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const auto& s = segments[k];
        if (!s.grid().same_lattice(m.grid_))
            throw Error(ErrorCode::GridMismatch, "segment '" + s.label() + "' is on a different grid");
        for (std::size_t i = 0; i < m.labels_.size(); ++i) {
            if (!s.bits()[i]) continue;
            if (m.labels_[i] != 0)
                throw Error(ErrorCode::InvalidArgument, "segments '" + m.names_[m.labels_[i] - 1] +
                                                            "' and '" + s.label() + "' overlap");
            m.labels_[i] = static_cast<std::uint8_t>(k + 1);
        }
        m.names_.push_back(s.label());
    }
    return m;
}

SubsegmentMap SubsegmentMap::from_pancreas(const PancreasSubsegments& p) {
    Mask head = p.head, body = p.body, tail = p.tail;
    head.set_label("head");
    body.set_label("body");
    tail.set_label("tail");
    return from_masks("pancreas", {head, body, tail});
}

Mask SubsegmentMap::segment(std::size_t k) const {
    if (k >= names_.size()) throw Error(ErrorCode::InvalidArgument, "segment index out of range");
    Mask out(grid_, names_[k]);
    const auto want = static_cast<std::uint8_t>(k + 1);
    for (std::size_t i = 0; i < labels_.size(); ++i) out.bits()[i] = labels_[i] == want ? 1 : 0;
    return out;
}

bool SubsegmentMap::covers_exactly(const Mask& organ_mask) const {
    if (names_.empty()) return organ_mask.empty();
    if (!organ_mask.grid().same_lattice(grid_)) return false;
    for (std::size_t i = 0; i < labels_.size(); ++i)
        if ((labels_[i] != 0) != (organ_mask.bits()[i] != 0)) return false;
    return true;
}

std::vector<SegmentOverlap> localize_tumor(const measurement::TumorInstance& inst,
                                           const SubsegmentMap& segmap) {
    if (segmap.names().empty()) return {};
    if (!inst.parent_grid.same_lattice(segmap.grid()))
        throw Error(ErrorCode::GridMismatch, "tumour and segment map are not co-registered");
    std::vector<std::size_t> hits(segmap.names().size(), 0);
    const auto idx = inst.parent_indices();
    for (std::size_t i : idx) {
        const auto l = segmap.label_at(i);
        if (l != 0) ++hits[l - 1];
    }
    std::vector<SegmentOverlap> out;
    for (std::size_t k = 0; k < hits.size(); ++k)
        if (hits[k] > 0)
            out.push_back({segmap.names()[k],
                           static_cast<double>(hits[k]) / static_cast<double>(idx.size())});
    std::stable_sort(out.begin(), out.end(),
                     [](const SegmentOverlap& a, const SegmentOverlap& b) { return a.fraction > b.fraction; });
    return out;
}

}  // namespace radrep::subsegment
