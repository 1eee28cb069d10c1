#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "json.hpp"
#include "vtrace/geometry.hpp"
#include "vtrace/metrics.hpp"
#include "vtrace/volume.hpp"

namespace vtrace {

struct StraightCurve {
    PointMM start;
    PointMM end;
};

/// Helix around an axis parallel to z through (center_x, center_y), climbing
/// from z_start to z_end.
struct HelixCurve {
    double center_x{0.0};
    double center_y{0.0};
    double z_start{0.0};
    double z_end{10.0};
    double radius_mm{3.0};
    double pitch_mm{20.0};
    double phase_deg{0.0};

    /// Radius of curvature, (R^2 + (pitch / 2 pi)^2) / R.
    double curvature_radius_mm() const;
};

/// Uniform Catmull-Rom spline through the control points (piecewise cubic,
/// passes through every control point).
struct SplineCurve {
    std::vector<PointMM> control_points;
};

using TubeCurve = std::variant<StraightCurve, HelixCurve, SplineCurve>;

/// Axis-aligned bright slab added to the background (a stand-in for muscle).
struct SlabSpec {
    int normal_axis{2};
    double position_mm{0.0};
    double thickness_mm{4.0};
    double intensity{0.2};
};

struct TubeSpec {
    TubeCurve curve{StraightCurve{}};
    double radius_mm{1.0};
    double peak_intensity{1.0};
    double background{0.0};
    std::optional<SlabSpec> slab;
    double noise_sigma{0.0};
    std::uint64_t seed{0};

    void validate(const Grid& grid) const;
};

/// Known centreline of a phantom, represented as a finely sampled polyline
/// (spacing <= 0.02 mm) with cumulative arc length.
class AnalyticCenterline {
public:
    explicit AnalyticCenterline(const TubeCurve& curve);

    double length_mm() const { return arc_.back(); }
    /// Point at arc length s (clamped to [0, length]).
    PointMM point_at(double s) const;
    /// Unit tangent at arc length s.
    Vec3 tangent_at(double s) const;
    /// Closest axis point to p.
    PointMM nearest(const PointMM& p) const;
    double distance(const PointMM& p) const;
    /// Axis points every `step_mm` of arc length, both endpoints included.
    std::vector<PointMM> samples(double step_mm) const;

    const std::vector<PointMM>& polyline() const { return points_; }

private:
    std::vector<PointMM> points_;
    std::vector<double> arc_;
};

struct Phantom {
    Volume volume;  ///< normalized-unit intensities
    AnalyticCenterline axis;
};

/// Noise-free intensity at p: background + (peak - background) * exp(-d^2 / 2s^2)
/// with s = radius / 2 and d the distance to the axis, plus the slab term.
double phantom_intensity(const TubeSpec& spec, const AnalyticCenterline& axis, const PointMM& p);

/// Renders the tube on `grid`, adds seeded Gaussian noise, clamps to [0, 1].
Phantom generate(const TubeSpec& spec, const Grid& grid);

/// Label volume with 1 inside the slab (muscle side), 0 elsewhere. Throws
/// UsageError when the spec has no slab.
Volume slab_fascia_mask(const TubeSpec& spec, const Grid& grid);

/// Axis samples every `step_mm` as a landmark set.
LandmarkSet axis_landmarks(const AnalyticCenterline& axis, double step_mm, const std::string& name,
                           LandmarkKind kind = LandmarkKind::subcutaneous);

/// JSON phantom description: {curve, radius_mm, peak_intensity, background,
/// slab?, noise_sigma, seed, dims, spacing_mm, origin_mm?}.
std::pair<TubeSpec, Grid> phantom_spec_from_json(const nlohmann::json& j);

}  // namespace vtrace
