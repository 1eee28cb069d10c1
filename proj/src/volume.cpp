#include "vtrace/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vtrace/error.hpp"

namespace vtrace {

namespace {

constexpr std::array<std::pair<ValueKind, std::string_view>, 5> kKindNames{{
    {ValueKind::raw_stored, "raw-stored"},
    {ValueKind::hounsfield, "hounsfield"},
    {ValueKind::normalized_unit, "normalized-unit"},
    {ValueKind::vesselness, "vesselness"},
    {ValueKind::cost, "cost"},
}};

// Index-space tolerance for bounds checks; absorbs mm -> index rounding.
constexpr double kIndexSlack = 1e-9;

}  // namespace

std::string_view to_string(ValueKind kind) {
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    return "raw-stored";
}

ValueKind value_kind_from_string(std::string_view name) {
    for (const auto& [k, n] : kKindNames)
        if (n == name) return k;
    throw DataError("unknown value_kind '" + std::string(name) + "'");
}

void Grid::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 2) throw UsageError("volume dims must be >= 2 along every axis");
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
            throw UsageError("volume spacing must be positive along every axis");
        if (!std::isfinite(origin[a])) throw UsageError("volume origin must be finite");
    }
}

VoxelIndex Grid::unravel(std::size_t idx) const {
    const auto nx = static_cast<std::size_t>(dims[0]);
    const auto ny = static_cast<std::size_t>(dims[1]);
    return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny),
            static_cast<int>(idx / (nx * ny))};
}

VoxelIndex Grid::nearest_voxel(const PointMM& p) const {
    const Vec3 u = to_index(p);
    return {static_cast<int>(std::lround(u.x)), static_cast<int>(std::lround(u.y)),
            static_cast<int>(std::lround(u.z))};
}

bool Grid::contains(const PointMM& p) const {
    const Vec3 u = to_index(p);
    for (int a = 0; a < 3; ++a) {
        if (!std::isfinite(u[a])) return false;
        if (u[a] < -kIndexSlack || u[a] > dims[a] - 1 + kIndexSlack) return false;
    }
    return true;
}

double Grid::min_spacing() const { return std::min({spacing.x, spacing.y, spacing.z}); }
double Grid::max_spacing() const { return std::max({spacing.x, spacing.y, spacing.z}); }

Volume::Volume(Grid grid, ValueKind kind) : grid_(grid), kind_(kind) {
    grid_.validate();
    data_.assign(grid_.voxel_count(), 0.0f);
}

Volume::Volume(Grid grid, ValueKind kind, std::vector<float> data)
    : grid_(grid), kind_(kind), data_(std::move(data)) {
    grid_.validate();
    if (data_.size() != grid_.voxel_count()) {
        std::ostringstream os;
        os << "payload size mismatch: dims require " << grid_.voxel_count() << " values, got "
           << data_.size();
        throw DataError(os.str());
    }
}

void Volume::check_invariants() const {
    if (kind_ != ValueKind::normalized_unit) return;
    for (float v : data_)
        if (!(v >= 0.0f && v <= 1.0f))
            throw DataError("normalized-unit volume holds a value outside [0, 1]");
}

void WindowParams::validate() const {
    if (!(window_width > 0.0)) throw UsageError("window width must be positive");
    if (rescale_slope == 0.0) throw UsageError("rescale slope must be non-zero");
}

double normalize_hu_value(double stored, const WindowParams& w) {
    const double hu = stored * w.rescale_slope + w.rescale_intercept;
    const double low = w.window_center - 0.5 * w.window_width;
    const double t = (hu - low) / w.window_width;
    return std::clamp(t, 0.0, 1.0);
}

Volume normalize_hu(const Volume& raw, const WindowParams& w) {
    if (raw.kind() != ValueKind::raw_stored)
        throw UsageError("normalize_hu expects a raw-stored volume, got " +
                         std::string(to_string(raw.kind())));
    w.validate();
    Volume out(raw.grid(), ValueKind::normalized_unit);
    auto src = raw.data();
    auto dst = out.data();
    std::transform(src.begin(), src.end(), dst.begin(),
                   [&](float s) { return static_cast<float>(normalize_hu_value(s, w)); });
    return out;
}

double sample_trilinear(const Volume& v, const PointMM& p) {
    const Grid& g = v.grid();
    if (!g.contains(p)) {
        std::ostringstream os;
        os << "point " << p << " mm is outside the volume bounds";
        throw DataError(os.str());
    }
    const Vec3 u = g.to_index(p);
    int base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
        const double c = std::clamp(u[a], 0.0, static_cast<double>(g.dims[a] - 1));
        int i0 = static_cast<int>(std::floor(c));
        i0 = std::min(i0, g.dims[a] - 2);
        base[a] = i0;
        frac[a] = c - i0;
    }
    double acc = 0.0;
    for (int dk = 0; dk < 2; ++dk) {
        const double wk = dk ? frac[2] : 1.0 - frac[2];
        for (int dj = 0; dj < 2; ++dj) {
            const double wj = dj ? frac[1] : 1.0 - frac[1];
            for (int di = 0; di < 2; ++di) {
                const double wi = di ? frac[0] : 1.0 - frac[0];
                acc += wi * wj * wk * v.at(base[0] + di, base[1] + dj, base[2] + dk);
            }
        }
    }
    return acc;
}

double default_gradient_step(const Grid& grid) { return 0.5 * grid.min_spacing(); }

Vec3 gradient_at(const Volume& v, const PointMM& p, double h) {
    if (!(h > 0.0)) throw UsageError("gradient step must be positive");
    Vec3 grad;
    for (int a = 0; a < 3; ++a) {
        Vec3 e;
        e[a] = h;
        grad[a] = (sample_trilinear(v, p + e) - sample_trilinear(v, p - e)) / (2.0 * h);
    }
    return grad;
}

}  // namespace vtrace
