#include "radrep/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "radrep/error.hpp"

namespace radrep::nifti {

namespace {

constexpr std::size_t kHeaderSize = 348;

class FieldReader {
public:
    FieldReader(std::span<const std::uint8_t> b, bool swap) : bytes_(b), swap_(swap) {}

    template <typename T>
    T get(std::size_t offset) const {
        if (offset + sizeof(T) > bytes_.size())
            throw ParseError("header field beyond end of data", offset);
        std::array<std::uint8_t, sizeof(T)> raw{};
        std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
        if (swap_) std::reverse(raw.begin(), raw.end());
        T v;
        std::memcpy(&v, raw.data(), sizeof(T));
        return v;
    }

private:
    std::span<const std::uint8_t> bytes_;
    bool swap_;
};

std::size_t bytes_per_voxel(DataType t) {
    switch (t) {
        case DataType::UInt8:
        case DataType::Int8: return 1;
        case DataType::Int16:
        case DataType::UInt16: return 2;
        case DataType::Int32:
        case DataType::UInt32:
        case DataType::Float32: return 4;
        case DataType::Float64: return 8;
    }
    return 0;
}

bool is_integer_type(DataType t) {
    return t != DataType::Float32 && t != DataType::Float64;
}

DataType checked_datatype(std::int16_t code) {
    switch (code) {
        case 2: case 4: case 8: case 16: case 64: case 256: case 512: case 768:
            return static_cast<DataType>(code);
        default:
            throw Error(ErrorCode::UnsupportedFormat,
                        "unsupported NIfTI datatype code " + std::to_string(code));
    }
}

Affine quaternion_affine(const FieldReader& r, const Spacing& sp, double qfac) {
    const double b = r.get<float>(256);
    const double c = r.get<float>(260);
    const double d = r.get<float>(264);
    const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    const double R[3][3] = {
        {a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
        {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
        {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b}};
    const double scale[3] = {sp.dx, sp.dy, sp.dz * qfac};
    Affine m{};
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 3; ++col) m[row * 4 + col] = R[row][col] * scale[col];
        m[row * 4 + 3] = r.get<float>(268 + 4 * row);
    }
    m[15] = 1;
    return m;
}

template <typename Sink>
void decode_voxels(const Header& h, std::span<const std::uint8_t> data, std::size_t offset,
                   Sink&& sink) {
    const std::size_t n = h.grid.dims.count();
    const std::size_t bpv = bytes_per_voxel(h.datatype);
    if (offset > data.size() || data.size() - offset < n * bpv)
        throw ParseError("voxel data truncated: need " + std::to_string(n * bpv) + " bytes",
                         data.size());
    const bool scaled = h.scl_slope != 0.0 && !(h.scl_slope == 1.0 && h.scl_inter == 0.0);
    const FieldReader r(data, h.byte_swapped);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t at = offset + i * bpv;
        double v = 0;
        switch (h.datatype) {
            case DataType::UInt8: v = data[at]; break;
            case DataType::Int8: v = static_cast<std::int8_t>(data[at]); break;
            case DataType::Int16: v = r.get<std::int16_t>(at); break;
            case DataType::UInt16: v = r.get<std::uint16_t>(at); break;
            case DataType::Int32: v = r.get<std::int32_t>(at); break;
            case DataType::UInt32: v = r.get<std::uint32_t>(at); break;
            case DataType::Float32: v = r.get<float>(at); break;
            case DataType::Float64: v = r.get<double>(at); break;
        }
        if (scaled) v = v * h.scl_slope + h.scl_inter;
        sink(i, v);
    }
}

std::vector<std::uint8_t> inflate_gzip(std::span<const std::uint8_t> in) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
        throw Error(ErrorCode::Io, "zlib initialisation failed");
    std::vector<std::uint8_t> out;
    std::array<std::uint8_t, 1 << 16> chunk{};
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            const auto pos = static_cast<std::size_t>(zs.total_in);
            inflateEnd(&zs);
            throw ParseError("corrupt gzip stream", pos);
        }
        out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            const auto pos = static_cast<std::size_t>(zs.total_in);
            inflateEnd(&zs);
            throw ParseError("truncated gzip stream", pos);
        }
    }
    inflateEnd(&zs);
    return out;
}

std::vector<std::uint8_t> deflate_gzip(std::span<const std::uint8_t> in) {
    z_stream zs{};
    if (deflateInit2(&zs, 6, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw Error(ErrorCode::Io, "zlib initialisation failed");
    std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(in.size())));
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw Error(ErrorCode::Io, "gzip compression failed");
    return out;
}

template <typename T>
void put(std::vector<std::uint8_t>& buf, std::size_t offset, T v) {
    std::memcpy(buf.data() + offset, &v, sizeof(T));
}

std::vector<std::uint8_t> encode_header(const Grid& g, DataType type) {
    static_assert(std::endian::native == std::endian::little,
                  "writer emits native little-endian files");
    std::vector<std::uint8_t> buf(352, 0);
    put<std::int32_t>(buf, 0, 348);
    put<char>(buf, 38, 'r');
    const std::int16_t dim[8] = {3,
                                 static_cast<std::int16_t>(g.dims.nx),
                                 static_cast<std::int16_t>(g.dims.ny),
                                 static_cast<std::int16_t>(g.dims.nz),
                                 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) put<std::int16_t>(buf, 40 + 2 * i, dim[i]);
    put<std::int16_t>(buf, 70, static_cast<std::int16_t>(type));
    put<std::int16_t>(buf, 72, static_cast<std::int16_t>(8 * bytes_per_voxel(type)));
    const float pixdim[8] = {1.0f,
                             static_cast<float>(g.spacing.dx),
                             static_cast<float>(g.spacing.dy),
                             static_cast<float>(g.spacing.dz),
                             1.0f, 1.0f, 1.0f, 1.0f};
    for (int i = 0; i < 8; ++i) put<float>(buf, 76 + 4 * i, pixdim[i]);
    put<float>(buf, 108, 352.0f);
    put<float>(buf, 112, 1.0f);
    put<float>(buf, 116, 0.0f);
    put<std::uint8_t>(buf, 123, 2);  // millimetres
    put<std::int16_t>(buf, 252, 0);
    put<std::int16_t>(buf, 254, 1);
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 4; ++col)
            put<float>(buf, 280 + 16 * row + 4 * col, static_cast<float>(g.affine[row * 4 + col]));
    std::memcpy(buf.data() + 344, "n+1\0", 4);
    return buf;
}

void check_dims_fit(const Grid& g) {
    constexpr auto kMax = std::numeric_limits<std::int16_t>::max();
    if (g.dims.nx > kMax || g.dims.ny > kMax || g.dims.nz > kMax)
        throw Error(ErrorCode::Dimension, "grid too large for NIfTI-1 int16 dims");
}

void write_file(const std::filesystem::path& path, std::vector<std::uint8_t> bytes) {
    if (path.extension() == ".gz") bytes = deflate_gzip(bytes);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

std::filesystem::path image_path_for(const std::filesystem::path& hdr) {
    auto p = hdr;
    if (p.extension() == ".gz") {
        p.replace_extension();
        p.replace_extension(".img.gz");
        if (std::filesystem::exists(p)) return p;
        p.replace_extension();
    }
    p.replace_extension(".img");
    return p;
}

}  // namespace

Header parse_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderSize)
        throw ParseError("file shorter than the 348-byte NIfTI-1 header", bytes.size());

    Header h;
    std::int32_t sizeof_hdr;
    std::memcpy(&sizeof_hdr, bytes.data(), 4);
    if (sizeof_hdr != 348) {
        if (static_cast<std::int32_t>(__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr))) != 348) throw ParseError("sizeof_hdr is not 348", 0);
        h.byte_swapped = true;
    }
    const FieldReader r(bytes, h.byte_swapped);

    const char* magic = reinterpret_cast<const char*>(bytes.data() + 344);
    if (std::memcmp(magic, "n+1\0", 4) == 0) {
        h.detached = false;
    } else if (std::memcmp(magic, "ni1\0", 4) == 0) {
        h.detached = true;
    } else {
        throw ParseError("bad magic, expected \"n+1\" or \"ni1\"", 344);
    }

    const auto ndim = r.get<std::int16_t>(40);
    if (ndim < 1 || ndim > 7) throw ParseError("dim[0] out of range", 40);
    std::int64_t dim[8] = {ndim, 1, 1, 1, 1, 1, 1, 1};
    for (int i = 1; i <= ndim; ++i) {
        dim[i] = r.get<std::int16_t>(40 + 2 * i);
        if (dim[i] <= 0) throw ParseError("non-positive dim[" + std::to_string(i) + "]", 40 + 2 * i);
    }
    // Trailing singleton dimensions are tolerated; a real 4th axis is not.
    int effective = ndim;
    while (effective > 3 && dim[effective] == 1) --effective;
    if (effective != 3)
        throw Error(ErrorCode::Dimension,
                    "expected a 3D image, header declares " + std::to_string(effective) + " dims");
    h.grid.dims = {dim[1], dim[2], dim[3]};

    h.datatype = checked_datatype(r.get<std::int16_t>(70));

    const double qfac_raw = r.get<float>(76);
    h.grid.spacing = {std::abs(static_cast<double>(r.get<float>(80))),
                      std::abs(static_cast<double>(r.get<float>(84))),
                      std::abs(static_cast<double>(r.get<float>(88)))};
    if (!h.grid.spacing.valid()) throw ParseError("pixdim[1..3] must be positive", 80);

    const double vox_offset = r.get<float>(108);
    if (!std::isfinite(vox_offset) || vox_offset < 0) throw ParseError("bad vox_offset", 108);
    h.vox_offset = static_cast<std::size_t>(vox_offset);
    if (!h.detached && h.vox_offset < kHeaderSize) throw ParseError("vox_offset inside header", 108);

    h.scl_slope = r.get<float>(112);
    h.scl_inter = r.get<float>(116);
    if (!std::isfinite(h.scl_slope) || !std::isfinite(h.scl_inter)) {
        h.scl_slope = 0;
        h.scl_inter = 0;
    }

    const auto qform_code = r.get<std::int16_t>(252);
    const auto sform_code = r.get<std::int16_t>(254);
    if (sform_code > 0) {
        Affine a{};
        for (int row = 0; row < 3; ++row)
            for (int col = 0; col < 4; ++col)
                a[row * 4 + col] = r.get<float>(280 + 16 * row + 4 * col);
        a[15] = 1;
        h.grid.affine = a;
    } else if (qform_code > 0) {
        h.grid.affine = quaternion_affine(r, h.grid.spacing, qfac_raw < 0 ? -1.0 : 1.0);
    } else {
        h.grid.affine = diagonal_affine(h.grid.spacing);
    }
    if (!affine_invertible(h.grid.affine)) throw ParseError("singular voxel-to-world transform", 280);
    return h;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return inflate_gzip(bytes);
    return bytes;
}

Volume decode_volume(std::span<const std::uint8_t> bytes) {
    const Header h = parse_header(bytes);
    if (h.detached) throw Error(ErrorCode::UnsupportedFormat, "ni1 header without image data");
    std::vector<float> data(h.grid.dims.count());
    decode_voxels(h, bytes, h.vox_offset, [&](std::size_t i, double v) {
        if (!std::isfinite(v)) throw ParseError("non-finite voxel value", h.vox_offset);
        data[i] = static_cast<float>(v);
    });
    return Volume(h.grid, std::move(data));
}

namespace {

Mask decode_mask_from(const Header& h, std::span<const std::uint8_t> data, std::size_t offset,
                      std::string label) {
    std::vector<std::uint8_t> bits(h.grid.dims.count());
    const bool integral = is_integer_type(h.datatype);
    decode_voxels(h, data, offset, [&](std::size_t i, double v) {
        if (!integral && v != std::floor(v))
            throw Error(ErrorCode::UnsupportedFormat,
                        "mask file holds non-integer values; masks must be integer-coded");
        bits[i] = v != 0.0 ? 1 : 0;
    });
    return Mask(h.grid, std::move(bits), std::move(label));
}

}  // namespace

Mask decode_mask(std::span<const std::uint8_t> bytes, std::string label) {
    const Header h = parse_header(bytes);
    if (h.detached) throw Error(ErrorCode::UnsupportedFormat, "ni1 header without image data");
    return decode_mask_from(h, bytes, h.vox_offset, std::move(label));
}

Volume load_volume(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    const Header h = parse_header(bytes);
    if (!h.detached) return decode_volume(bytes);
    const auto img = read_file_bytes(image_path_for(path));
    std::vector<float> data(h.grid.dims.count());
    decode_voxels(h, img, h.vox_offset, [&](std::size_t i, double v) { data[i] = static_cast<float>(v); });
    return Volume(h.grid, std::move(data));
}

Mask load_mask(const std::filesystem::path& path, std::string label) {
    if (label.empty()) {
        label = path.filename().string();
        for (const char* ext : {".nii.gz", ".nii", ".hdr.gz", ".hdr"}) {
            const std::string e(ext);
            if (label.size() > e.size() && label.ends_with(e)) {
                label.resize(label.size() - e.size());
                break;
            }
        }
    }
    const auto bytes = read_file_bytes(path);
    const Header h = parse_header(bytes);
    if (!h.detached) return decode_mask_from(h, bytes, h.vox_offset, std::move(label));
    const auto img = read_file_bytes(image_path_for(path));
    return decode_mask_from(h, img, h.vox_offset, std::move(label));
}

std::vector<std::uint8_t> encode(const Volume& v) {
    check_dims_fit(v.grid());
    const auto data = v.data();
    const bool fits_int16 = std::all_of(data.begin(), data.end(), [](float f) {
        return f == std::floor(f) && f >= std::numeric_limits<std::int16_t>::min() &&
               f <= std::numeric_limits<std::int16_t>::max();
    });
    const DataType type = fits_int16 ? DataType::Int16 : DataType::Float32;
    auto buf = encode_header(v.grid(), type);
    const std::size_t bpv = bytes_per_voxel(type);
    const std::size_t base = buf.size();
    buf.resize(base + data.size() * bpv);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (fits_int16)
            put<std::int16_t>(buf, base + 2 * i, static_cast<std::int16_t>(data[i]));
        else
            put<float>(buf, base + 4 * i, data[i]);
    }
    return buf;
}

std::vector<std::uint8_t> encode(const Mask& m) {
    check_dims_fit(m.grid());
    auto buf = encode_header(m.grid(), DataType::UInt8);
    buf.insert(buf.end(), m.bits().begin(), m.bits().end());
    return buf;
}

void save(const Volume& v, const std::filesystem::path& path) { write_file(path, encode(v)); }
void save(const Mask& m, const std::filesystem::path& path) { write_file(path, encode(m)); }

}  // namespace radrep::nifti
