#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "radrep/volume.hpp"

namespace radrep::nifti {

// NIfTI-1 datatype codes understood by the reader.
enum class DataType : std::int16_t {
    UInt8 = 2,
    Int16 = 4,
    Int32 = 8,
    Float32 = 16,
    Float64 = 64,
    Int8 = 256,
    UInt16 = 512,
    UInt32 = 768,
};

struct Header {
    Grid grid;
    DataType datatype = DataType::UInt8;
    double scl_slope = 0;
    double scl_inter = 0;
    std::size_t vox_offset = 352;
    bool byte_swapped = false;
    bool detached = false;  // "ni1": voxels live in a sibling .img file
};

/// Decodes the 348-byte header. Throws ParseError, UnsupportedFormat or
/// DimensionError.
Header parse_header(std::span<const std::uint8_t> bytes);

/// Reads a whole file, inflating it when it starts with the gzip magic.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

Volume decode_volume(std::span<const std::uint8_t> bytes);
Mask decode_mask(std::span<const std::uint8_t> bytes, std::string label);

Volume load_volume(const std::filesystem::path& path);
/// Loads an integer-coded label image; every nonzero voxel becomes foreground.
/// An empty `label` defaults to the file stem.
Mask load_mask(const std::filesystem::path& path, std::string label = {});

std::vector<std::uint8_t> encode(const Volume& v);
std::vector<std::uint8_t> encode(const Mask& m);

/// Writes a single-file NIfTI-1; a ".gz" suffix selects gzip compression.
/// Volumes are stored as int16 when every value is an integer in range,
/// float32 otherwise. Masks are stored as uint8.
void save(const Volume& v, const std::filesystem::path& path);
void save(const Mask& m, const std::filesystem::path& path);

}  // namespace radrep::nifti
