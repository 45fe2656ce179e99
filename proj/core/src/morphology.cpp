#include "radrep/morphology.hpp"

#include <algorithm>
#include <array>
#include <deque>

#include "radrep/error.hpp"

namespace radrep::morphology {

StructuringElement StructuringElement::cube(std::int64_t s) {
    const std::int64_t a = (s - 1) / 2;
    return {s, s, s, a, a, a};
}

bool StructuringElement::valid() const noexcept {
    return sx > 0 && sy > 0 && sz > 0 && ax >= 0 && ay >= 0 && az >= 0 && ax < sx && ay < sy &&
           az < sz;
}

namespace {

void require_same_grid(const Mask& a, const Mask& b) {
    if (!a.grid().same_lattice(b.grid()))
        throw Error(ErrorCode::GridMismatch, "masks '" + a.label() + "' and '" + b.label() +
                                                 "' are not on the same grid");
}

// One separable pass along a line of n samples spaced `stride` apart.
// With window offsets [lo, hi] the output at i looks at inputs i+lo .. i+hi.
// Erosion requires the whole window in-range and set; dilation requires any.
void line_pass(const std::uint8_t* in, std::uint8_t* out, std::int64_t n, std::int64_t stride,
               std::int64_t lo, std::int64_t hi, bool erosion, std::vector<std::int32_t>& prefix) {
    prefix.assign(static_cast<std::size_t>(n + 1), 0);
    for (std::int64_t i = 0; i < n; ++i)
        prefix[i + 1] = prefix[i] + (in[i * stride] ? 1 : 0);
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t a = i + lo;
        const std::int64_t b = i + hi;
        if (erosion) {
            if (a < 0 || b >= n) {
                out[i * stride] = 0;
                continue;
            }
            out[i * stride] = (prefix[b + 1] - prefix[a]) == (b - a + 1) ? 1 : 0;
        } else {
            const std::int64_t ca = std::max<std::int64_t>(a, 0);
            const std::int64_t cb = std::min<std::int64_t>(b, n - 1);
            out[i * stride] = (ca <= cb && prefix[cb + 1] - prefix[ca] > 0) ? 1 : 0;
        }
    }
}

Mask box_filter(const Mask& m, const StructuringElement& se, bool erosion) {
    if (!se.valid()) throw Error(ErrorCode::InvalidArgument, "invalid structuring element");
    const auto& d = m.dims();
    // Erosion at p reads p + o, o in [-a, s-1-a]. Dilation at p reads p - o.
    auto window = [erosion](std::int64_t s, std::int64_t a) {
        const std::int64_t lo = -a;
        const std::int64_t hi = s - 1 - a;
        return erosion ? std::pair{lo, hi} : std::pair{-hi, -lo};
    };
    std::vector<std::uint8_t> cur(m.bits().begin(), m.bits().end());
    std::vector<std::uint8_t> next(cur.size());
    std::vector<std::int32_t> prefix;

    const auto [xlo, xhi] = window(se.sx, se.ax);
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y) {
            const std::size_t base = d.index(0, y, z);
            line_pass(cur.data() + base, next.data() + base, d.nx, 1, xlo, xhi, erosion, prefix);
        }
    cur.swap(next);
    const auto [ylo, yhi] = window(se.sy, se.ay);
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t x = 0; x < d.nx; ++x) {
            const std::size_t base = d.index(x, 0, z);
            line_pass(cur.data() + base, next.data() + base, d.ny, d.nx, ylo, yhi, erosion, prefix);
        }
    cur.swap(next);
    const auto [zlo, zhi] = window(se.sz, se.az);
    for (std::int64_t y = 0; y < d.ny; ++y)
        for (std::int64_t x = 0; x < d.nx; ++x) {
            const std::size_t base = d.index(x, y, 0);
            line_pass(cur.data() + base, next.data() + base, d.nz, d.nx * d.ny, zlo, zhi, erosion,
                      prefix);
        }
    return Mask(m.grid(), std::move(next), m.label());
}

template <typename Op>
Mask combine(const Mask& a, const Mask& b, Op op) {
    require_same_grid(a, b);
    std::vector<std::uint8_t> out(a.bits().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = op(a.bits()[i], b.bits()[i]) ? 1 : 0;
    return Mask(a.grid(), std::move(out), a.label());
}

}  // namespace

Mask erode(const Mask& m, const StructuringElement& se) { return box_filter(m, se, true); }
Mask dilate(const Mask& m, const StructuringElement& se) { return box_filter(m, se, false); }

Mask mask_and(const Mask& a, const Mask& b) {
    return combine(a, b, [](auto u, auto v) { return u && v; });
}
Mask mask_or(const Mask& a, const Mask& b) {
    return combine(a, b, [](auto u, auto v) { return u || v; });
}
Mask mask_and_not(const Mask& a, const Mask& b) {
    return combine(a, b, [](auto u, auto v) { return u && !v; });
}

bool is_subset(const Mask& inner, const Mask& outer) {
    require_same_grid(inner, outer);
    for (std::size_t i = 0; i < inner.bits().size(); ++i)
        if (inner.bits()[i] && !outer.bits()[i]) return false;
    return true;
}

std::size_t overlap_count(const Mask& a, const Mask& b) {
    require_same_grid(a, b);
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.bits().size(); ++i) n += (a.bits()[i] && b.bits()[i]) ? 1 : 0;
    return n;
}

namespace {

std::vector<std::array<std::int64_t, 3>> neighbour_offsets(Connectivity conn) {
    std::vector<std::array<std::int64_t, 3>> offs;
    for (std::int64_t dz = -1; dz <= 1; ++dz)
        for (std::int64_t dy = -1; dy <= 1; ++dy)
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                const int manhattan = static_cast<int>(std::abs(dx) + std::abs(dy) + std::abs(dz));
                if (manhattan == 0) continue;
                if (conn == Connectivity::Six && manhattan > 1) continue;
                if (conn == Connectivity::Eighteen && manhattan > 2) continue;
                offs.push_back({dx, dy, dz});
            }
    return offs;
}

}  // namespace

LabeledComponents connected_components(const Mask& m, Connectivity conn) {
    const auto& d = m.dims();
    const auto offs = neighbour_offsets(conn);
    const auto bits = m.bits();
    LabeledComponents cc;
    cc.labels.assign(bits.size(), 0);
    std::vector<std::size_t> stack;
    std::size_t i = 0;
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x, ++i) {
                if (!bits[i] || cc.labels[i] != 0) continue;
                const std::int32_t label = ++cc.count;
                std::size_t size = 0;
                cc.labels[i] = label;
                stack.push_back(i);
                while (!stack.empty()) {
                    const std::size_t cur = stack.back();
                    stack.pop_back();
                    ++size;
                    const auto cx = static_cast<std::int64_t>(cur % static_cast<std::size_t>(d.nx));
                    const auto rest = static_cast<std::int64_t>(cur / static_cast<std::size_t>(d.nx));
                    const std::int64_t cy = rest % d.ny;
                    const std::int64_t cz = rest / d.ny;
                    for (const auto& o : offs) {
                        const std::int64_t nx = cx + o[0], ny = cy + o[1], nz = cz + o[2];
                        if (!d.contains(nx, ny, nz)) continue;
                        const std::size_t ni = d.index(nx, ny, nz);
                        if (bits[ni] && cc.labels[ni] == 0) {
                            cc.labels[ni] = label;
                            stack.push_back(ni);
                        }
                    }
                }
                cc.sizes.push_back(size);
            }
    return cc;
}

Mask component_mask(const Mask& like, const LabeledComponents& cc, std::int32_t label) {
    std::vector<std::uint8_t> bits(cc.labels.size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = cc.labels[i] == label ? 1 : 0;
    return Mask(like.grid(), std::move(bits), like.label());
}

Mask largest_component(const Mask& m, Connectivity conn) {
    const auto cc = connected_components(m, conn);
    if (cc.count == 0) return Mask(m.grid(), m.label());
    std::int32_t best = 1;
    for (std::int32_t k = 2; k <= cc.count; ++k)
        if (cc.sizes[k - 1] > cc.sizes[best - 1]) best = k;
    return component_mask(m, cc, best);
}

std::size_t Mask2D::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

Mask2D axial_slice(const Mask& m, std::int64_t z) {
    const auto& d = m.dims();
    Mask2D s(d.nx, d.ny);
    const auto base = d.index(0, 0, z);
    std::copy_n(m.bits().begin() + static_cast<std::ptrdiff_t>(base), d.nx * d.ny, s.bits.begin());
    return s;
}

Mask2D erode2d(const Mask2D& m) {
    Mask2D out(m.nx, m.ny);
    for (std::int64_t y = 0; y < m.ny; ++y)
        for (std::int64_t x = 0; x < m.nx; ++x) {
            if (!m.at(x, y)) continue;
            bool keep = true;
            for (std::int64_t dy = -1; dy <= 1 && keep; ++dy)
                for (std::int64_t dx = -1; dx <= 1 && keep; ++dx) keep = m.get(x + dx, y + dy);
            out.set(x, y, keep);
        }
    return out;
}

Mask2D slice_border(const Mask2D& m) {
    const Mask2D inner = erode2d(m);
    Mask2D out(m.nx, m.ny);
    for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = (m.bits[i] && !inner.bits[i]) ? 1 : 0;
    return out;
}

LabeledComponents2D connected_components_2d(const Mask2D& m, Connectivity2D conn) {
    LabeledComponents2D cc;
    cc.labels.assign(m.bits.size(), 0);
    const bool eight = conn == Connectivity2D::Eight;
    std::vector<std::size_t> stack;
    for (std::int64_t y = 0; y < m.ny; ++y)
        for (std::int64_t x = 0; x < m.nx; ++x) {
            const auto i = static_cast<std::size_t>(x + m.nx * y);
            if (!m.bits[i] || cc.labels[i] != 0) continue;
            const std::int32_t label = ++cc.count;
            std::size_t size = 0;
            cc.labels[i] = label;
            stack.push_back(i);
            while (!stack.empty()) {
                const std::size_t cur = stack.back();
                stack.pop_back();
                ++size;
                const auto cx = static_cast<std::int64_t>(cur % static_cast<std::size_t>(m.nx));
                const auto cy = static_cast<std::int64_t>(cur / static_cast<std::size_t>(m.nx));
                for (std::int64_t dy = -1; dy <= 1; ++dy)
                    for (std::int64_t dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        if (!eight && dx != 0 && dy != 0) continue;
                        const std::int64_t nx = cx + dx, ny = cy + dy;
                        if (!m.get(nx, ny)) continue;
                        const auto ni = static_cast<std::size_t>(nx + m.nx * ny);
                        if (cc.labels[ni] == 0) {
                            cc.labels[ni] = label;
                            stack.push_back(ni);
                        }
                    }
            }
            cc.sizes.push_back(size);
        }
    return cc;
}

// ---------------------------------------------------------------------------
// Thinning

namespace {

// 3x3x3 neighbourhood packed as idx = (dx+1) + 3(dy+1) + 9(dz+1); 13 is the centre.
using Cube = std::array<bool, 27>;

constexpr int cube_index(int dx, int dy, int dz) { return (dx + 1) + 3 * (dy + 1) + 9 * (dz + 1); }

struct CubeTables {
    std::array<std::vector<int>, 27> adj26;
    std::array<std::vector<int>, 27> adj6_in18;  // 6-adjacency restricted to N18
    std::array<bool, 27> in18{};
    std::array<int, 6> faces{};
};

const CubeTables& tables() {
    static const CubeTables t = [] {
        CubeTables t;
        auto coords = [](int i) { return std::array<int, 3>{i % 3 - 1, (i / 3) % 3 - 1, i / 9 - 1}; };
        for (int i = 0; i < 27; ++i) {
            const auto a = coords(i);
            const int ma = std::abs(a[0]) + std::abs(a[1]) + std::abs(a[2]);
            t.in18[i] = ma >= 1 && ma <= 2;
        }
        for (int i = 0; i < 27; ++i) {
            if (i == 13) continue;
            const auto a = coords(i);
            for (int j = 0; j < 27; ++j) {
                if (j == 13 || j == i) continue;
                const auto b = coords(j);
                const int dx = std::abs(a[0] - b[0]), dy = std::abs(a[1] - b[1]), dz = std::abs(a[2] - b[2]);
                if (std::max({dx, dy, dz}) != 1) continue;
                t.adj26[i].push_back(j);
                if (dx + dy + dz == 1 && t.in18[i] && t.in18[j]) t.adj6_in18[i].push_back(j);
            }
        }
        t.faces = {cube_index(1, 0, 0), cube_index(-1, 0, 0), cube_index(0, 1, 0),
                   cube_index(0, -1, 0), cube_index(0, 0, 1), cube_index(0, 0, -1)};
        return t;
    }();
    return t;
}

// Simple point test for (26, 6) digital topology: the foreground in N26* forms
// one 26-component and the background in N18 that is 6-adjacent to the centre
// forms one 6-component.
bool is_simple(const Cube& c) {
    const auto& t = tables();
    std::array<bool, 27> seen{};
    std::array<int, 27> stack{};

    int fg_components = 0;
    for (int i = 0; i < 27; ++i) {
        if (i == 13 || !c[i] || seen[i]) continue;
        if (++fg_components > 1) return false;
        int top = 0;
        stack[top++] = i;
        seen[i] = true;
        while (top > 0) {
            const int cur = stack[--top];
            for (int n : t.adj26[cur])
                if (c[n] && !seen[n]) {
                    seen[n] = true;
                    stack[top++] = n;
                }
        }
    }
    if (fg_components != 1) return false;

    seen.fill(false);
    int bg_components = 0;
    for (int f : t.faces) {
        if (c[f] || seen[f]) continue;
        if (++bg_components > 1) return false;
        int top = 0;
        stack[top++] = f;
        seen[f] = true;
        while (top > 0) {
            const int cur = stack[--top];
            for (int n : t.adj6_in18[cur])
                if (!c[n] && !seen[n]) {
                    seen[n] = true;
                    stack[top++] = n;
                }
        }
    }
    return bg_components == 1;
}

Cube neighbourhood(const Mask& m, std::int64_t x, std::int64_t y, std::int64_t z) {
    Cube c{};
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) c[cube_index(dx, dy, dz)] = m.get(x + dx, y + dy, z + dz);
    return c;
}

int neighbour_count(const Cube& c) {
    int n = 0;
    for (int i = 0; i < 27; ++i) n += (i != 13 && c[i]) ? 1 : 0;
    return n;
}

}  // namespace

Mask skeletonize(const Mask& m) {
    if (m.empty()) throw Error(ErrorCode::EmptyInput, "cannot skeletonize an empty mask");
    Mask cur = m;
    const auto& d = m.dims();
    // Sweep order: +z, -z, +y, -y, +x, -x.
    constexpr std::array<std::array<int, 3>, 6> kDirections = {
        {{0, 0, 1}, {0, 0, -1}, {0, 1, 0}, {0, -1, 0}, {1, 0, 0}, {-1, 0, 0}}};

    std::vector<std::size_t> active;
    std::vector<std::uint8_t> endpoint(cur.bits().size(), 0);
    bool changed = true;
    while (changed) {
        changed = false;
        active.clear();
        for (std::size_t i = 0; i < cur.bits().size(); ++i)
            if (cur.bits()[i]) active.push_back(i);
        // End points are frozen once per iteration so that a shrinking blob
        // can still collapse to a single voxel within one sweep.
        for (std::size_t i : active) {
            const auto x = static_cast<std::int64_t>(i % static_cast<std::size_t>(d.nx));
            const auto rest = static_cast<std::int64_t>(i / static_cast<std::size_t>(d.nx));
            endpoint[i] = neighbour_count(neighbourhood(cur, x, rest % d.ny, rest / d.ny)) == 1;
        }
        for (const auto& dir : kDirections) {
            std::vector<Index3> candidates;
            for (std::size_t i : active) {
                if (!cur.bits()[i] || endpoint[i]) continue;
                const auto x = static_cast<std::int64_t>(i % static_cast<std::size_t>(d.nx));
                const auto rest = static_cast<std::int64_t>(i / static_cast<std::size_t>(d.nx));
                const std::int64_t y = rest % d.ny, z = rest / d.ny;
                if (cur.get(x + dir[0], y + dir[1], z + dir[2])) continue;
                if (is_simple(neighbourhood(cur, x, y, z))) candidates.push_back({x, y, z});
            }
            for (const auto& p : candidates) {
                const Cube c = neighbourhood(cur, p.x, p.y, p.z);
                if (neighbour_count(c) == 0 || !is_simple(c)) continue;
                cur.set(p.x, p.y, p.z, false);
                changed = true;
            }
        }
    }
    return cur;
}

}  // namespace radrep::morphology
