#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vtrace/geometry.hpp"

namespace vtrace {

/// What the scalars of a Volume mean. Operations check this to catch pipeline
/// mix-ups (e.g. building costs from raw stored values).
enum class ValueKind { raw_stored, hounsfield, normalized_unit, vesselness, cost };

std::string_view to_string(ValueKind kind);
ValueKind value_kind_from_string(std::string_view name);

/// Integer voxel address (i, j, k) along (x, y, z).
struct VoxelIndex {
    int i{0};
    int j{0};
    int k{0};

    friend constexpr bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
};

/// Voxel-grid geometry shared by every volume in a pipeline.
///
/// Axis order is (x, y, z); storage is x-fastest, so voxel (i, j, k) lives at
/// linear offset i + nx * (j + ny * k). The centre of voxel (i, j, k) sits at
/// origin + spacing * (i, j, k) in millimetres, and the physical bounding box
/// spans the voxel centres: [origin, origin + spacing * (dims - 1)].
struct Grid {
    std::array<int, 3> dims{2, 2, 2};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};

    /// Throws UsageError unless every dim is >= 2 and every spacing > 0.
    void validate() const;

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t linear(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
    }
    std::size_t linear(const VoxelIndex& v) const { return linear(v.i, v.j, v.k); }
    VoxelIndex unravel(std::size_t idx) const;

    bool contains(const VoxelIndex& v) const {
        return v.i >= 0 && v.j >= 0 && v.k >= 0 && v.i < dims[0] && v.j < dims[1] && v.k < dims[2];
    }

    PointMM to_mm(const VoxelIndex& v) const {
        return {origin.x + spacing.x * v.i, origin.y + spacing.y * v.j, origin.z + spacing.z * v.k};
    }
    /// Continuous index coordinates of a mm point.
    Vec3 to_index(const PointMM& p) const {
        return {(p.x - origin.x) / spacing.x, (p.y - origin.y) / spacing.y, (p.z - origin.z) / spacing.z};
    }
    VoxelIndex nearest_voxel(const PointMM& p) const;

    /// True when p lies inside the box spanned by the voxel centres.
    bool contains(const PointMM& p) const;

    PointMM lower_corner() const { return origin; }
    PointMM upper_corner() const {
        return {origin.x + spacing.x * (dims[0] - 1), origin.y + spacing.y * (dims[1] - 1),
                origin.z + spacing.z * (dims[2] - 1)};
    }

    double min_spacing() const;
    double max_spacing() const;

    friend bool operator==(const Grid&, const Grid&) = default;
};

/// Anisotropic 3D scalar volume. Immutable once built in the sense that every
/// library operation takes it by const reference and returns new volumes.
class Volume {
public:
    Volume() = default;
    Volume(Grid grid, ValueKind kind);
    Volume(Grid grid, ValueKind kind, std::vector<float> data);

    const Grid& grid() const { return grid_; }
    const std::array<int, 3>& dims() const { return grid_.dims; }
    const Vec3& spacing() const { return grid_.spacing; }
    const Vec3& origin() const { return grid_.origin; }
    ValueKind kind() const { return kind_; }
    void set_kind(ValueKind kind) { kind_ = kind; }

    std::size_t size() const { return data_.size(); }
    std::span<const float> data() const { return data_; }
    std::span<float> data() { return data_; }

    float at(int i, int j, int k) const { return data_[grid_.linear(i, j, k)]; }
    float& at(int i, int j, int k) { return data_[grid_.linear(i, j, k)]; }
    float at(const VoxelIndex& v) const { return data_[grid_.linear(v)]; }
    float& at(const VoxelIndex& v) { return data_[grid_.linear(v)]; }

    bool same_geometry(const Volume& other) const { return grid_ == other.grid_; }

    /// Throws DataError when kind() is normalized_unit and a value leaves [0, 1].
    void check_invariants() const;

private:
    Grid grid_{};
    ValueKind kind_{ValueKind::raw_stored};
    std::vector<float> data_ = std::vector<float>(8, 0.0f);
};

/// DICOM-style windowing parameters, all in Hounsfield units except the slope.
struct WindowParams {
    double window_center{60.0};
    double window_width{400.0};
    double rescale_intercept{-1024.0};
    double rescale_slope{1.0};

    void validate() const;
};

/// Maps stored values to HU (s * slope + intercept), then the HU window
/// [center - width/2, center + width/2] affinely onto [0, 1], clamping outside.
double normalize_hu_value(double stored, const WindowParams& w);
Volume normalize_hu(const Volume& raw, const WindowParams& w);

/// Trilinear interpolation at a mm point. Throws DataError when p is outside
/// the voxel-centre bounding box.
double sample_trilinear(const Volume& v, const PointMM& p);

/// Default central-difference step: half the smallest spacing component.
double default_gradient_step(const Grid& grid);

/// Central-difference gradient of the trilinear field, per mm. Throws
/// DataError when any of the six stencil points is out of bounds.
Vec3 gradient_at(const Volume& v, const PointMM& p, double h);
inline Vec3 gradient_at(const Volume& v, const PointMM& p) {
    return gradient_at(v, p, default_gradient_step(v.grid()));
}

}  // namespace vtrace
