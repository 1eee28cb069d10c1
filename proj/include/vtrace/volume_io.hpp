#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "vtrace/volume.hpp"

namespace vtrace {

/// On-disk scalar type of a container payload.
enum class StorageType { f32, i16 };

/// Reads a volume.
///
/// `<name>.json` paths are read as the native container: a JSON header
/// {dims, spacing_mm, origin_mm, dtype, value_kind} next to a little-endian,
/// x-fastest `<name>.raw` payload. `.nhdr` paths are imported as detached-header
/// NRRD (raw encoding, diagonal space directions or spacings); imported
/// volumes are always raw-stored.
Volume load_volume(const std::filesystem::path& path);

/// Writes `<name>.json` + `<name>.raw`. `attributes`, when not null, is stored
/// verbatim under the header's "attributes" key (e.g. the Frangi parameters
/// that produced a vesselness volume).
void save_volume(const std::filesystem::path& path, const Volume& v,
                 StorageType type = StorageType::f32,
                 const nlohmann::json& attributes = nullptr);

/// The "attributes" object of a container header, or null.
nlohmann::json read_volume_attributes(const std::filesystem::path& path);

/// Detached-header NRRD import (subset: type, dimension=3, sizes, space
/// directions or spacings, space origin, endian, encoding=raw, data file).
Volume load_nrrd(const std::filesystem::path& header_path);

}  // namespace vtrace
