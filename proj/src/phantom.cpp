#include "vtrace/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "vtrace/error.hpp"

namespace vtrace {

using nlohmann::json;

namespace {

constexpr double kMaxSegmentMM = 0.02;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

PointMM catmull_rom(const PointMM& p0, const PointMM& p1, const PointMM& p2, const PointMM& p3, double t) {
    const double t2 = t * t, t3 = t2 * t;
    return 0.5 * ((2.0 * p1) + (p2 - p0) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                  (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3);
}

std::vector<PointMM> sample_curve(const TubeCurve& curve) {
    return std::visit(
        overloaded{
            [](const StraightCurve& c) -> std::vector<PointMM> {
                if (distance(c.start, c.end) == 0.0) throw UsageError("straight tube needs distinct endpoints");
                return {c.start, c.end};
            },
            [](const HelixCurve& h) {
                if (!(h.radius_mm > 0.0) || !(h.pitch_mm > 0.0) || !(h.z_end > h.z_start))
                    throw UsageError("helix needs positive radius and pitch and z_end > z_start");
                const double c = h.pitch_mm / (2.0 * M_PI);
                const double t_end = (h.z_end - h.z_start) / c;
                const double length = t_end * std::hypot(h.radius_mm, c);
                const int n = std::max(2, static_cast<int>(std::ceil(length / kMaxSegmentMM)));
                const double phase = deg_to_rad(h.phase_deg);
                std::vector<PointMM> pts(n + 1);
                for (int i = 0; i <= n; ++i) {
                    const double t = t_end * i / n;
                    pts[i] = {h.center_x + h.radius_mm * std::cos(t + phase),
                              h.center_y + h.radius_mm * std::sin(t + phase), h.z_start + c * t};
                }
                return pts;
            },
            [](const SplineCurve& s) {
                const auto& cp = s.control_points;
                if (cp.size() < 2) throw UsageError("spline tube needs at least 2 control points");
                std::vector<PointMM> pts{cp.front()};
                for (std::size_t i = 0; i + 1 < cp.size(); ++i) {
                    const PointMM& p0 = i == 0 ? cp[0] : cp[i - 1];
                    const PointMM& p3 = i + 2 < cp.size() ? cp[i + 2] : cp[i + 1];
                    const double chord = distance(cp[i], cp[i + 1]);
                    const int n = std::max(50, static_cast<int>(std::ceil(2.0 * chord / kMaxSegmentMM)));
                    for (int k = 1; k <= n; ++k)
                        pts.push_back(catmull_rom(p0, cp[i], cp[i + 1], p3, static_cast<double>(k) / n));
                }
                return pts;
            },
        },
        curve);
}

}  // namespace

double HelixCurve::curvature_radius_mm() const {
    const double c = pitch_mm / (2.0 * M_PI);
    return (radius_mm * radius_mm + c * c) / radius_mm;
}

AnalyticCenterline::AnalyticCenterline(const TubeCurve& curve) : points_(sample_curve(curve)) {
    arc_.resize(points_.size());
    arc_[0] = 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i) arc_[i] = arc_[i - 1] + vtrace::distance(points_[i - 1], points_[i]);
}

PointMM AnalyticCenterline::point_at(double s) const {
    s = std::clamp(s, 0.0, length_mm());
    auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
    std::size_t i = it == arc_.end() ? arc_.size() - 1 : static_cast<std::size_t>(it - arc_.begin());
    i = std::max<std::size_t>(i, 1);
    const double seg = arc_[i] - arc_[i - 1];
    const double t = seg > 0.0 ? (s - arc_[i - 1]) / seg : 0.0;
    return points_[i - 1] + t * (points_[i] - points_[i - 1]);
}

Vec3 AnalyticCenterline::tangent_at(double s) const {
    s = std::clamp(s, 0.0, length_mm());
    auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
    std::size_t i = it == arc_.end() ? arc_.size() - 1 : static_cast<std::size_t>(it - arc_.begin());
    i = std::max<std::size_t>(i, 1);
    return normalized(points_[i] - points_[i - 1]);
}

PointMM AnalyticCenterline::nearest(const PointMM& p) const {
    double best = std::numeric_limits<double>::infinity();
    PointMM best_pt = points_.front();
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const Vec3 ab = points_[i] - points_[i - 1];
        const double len2 = dot(ab, ab);
        const double t = len2 > 0.0 ? std::clamp(dot(p - points_[i - 1], ab) / len2, 0.0, 1.0) : 0.0;
        const PointMM q = points_[i - 1] + t * ab;
        const double d = vtrace::distance(p, q);
        if (d < best) {
            best = d;
            best_pt = q;
        }
    }
    return best_pt;
}

double AnalyticCenterline::distance(const PointMM& p) const { return vtrace::distance(p, nearest(p)); }

std::vector<PointMM> AnalyticCenterline::samples(double step_mm) const {
    if (!(step_mm > 0.0)) throw UsageError("sample step must be positive");
    std::vector<PointMM> out;
    const double len = length_mm();
    const int n = static_cast<int>(std::floor(len / step_mm + 1e-9));
    for (int i = 0; i <= n; ++i) out.push_back(point_at(i * step_mm));
    if (len - n * step_mm > 1e-9) out.push_back(points_.back());
    return out;
}

void TubeSpec::validate(const Grid& grid) const {
    grid.validate();
    if (!(radius_mm > 0.0)) throw UsageError("tube radius must be positive");
    if (!(peak_intensity > 0.0 && peak_intensity <= 1.0)) throw UsageError("peak intensity must lie in (0, 1]");
    if (!(background >= 0.0 && background < 1.0)) throw UsageError("background must lie in [0, 1)");
    if (!(peak_intensity > background)) throw UsageError("peak intensity must exceed the background");
    if (radius_mm < 0.5 * grid.max_spacing()) throw UsageError("tube radius must be at least half the largest spacing");
    if (!(noise_sigma >= 0.0)) throw UsageError("noise sigma must be non-negative");
    if (slab && (slab->normal_axis < 0 || slab->normal_axis > 2 || !(slab->thickness_mm > 0.0)))
        throw UsageError("slab needs an axis in {0, 1, 2} and positive thickness");
}

double phantom_intensity(const TubeSpec& spec, const AnalyticCenterline& axis, const PointMM& p) {
    const double s = 0.5 * spec.radius_mm;
    const double d = axis.distance(p);
    double v = spec.background + (spec.peak_intensity - spec.background) * std::exp(-d * d / (2.0 * s * s));
    if (spec.slab && std::abs(p[spec.slab->normal_axis] - spec.slab->position_mm) <= 0.5 * spec.slab->thickness_mm)
        v += spec.slab->intensity;
    return v;
}

Phantom generate(const TubeSpec& spec, const Grid& grid) {
    spec.validate(grid);
    AnalyticCenterline axis(spec.curve);
    const Vec3 lo = grid.lower_corner() + Vec3{spec.radius_mm, spec.radius_mm, spec.radius_mm};
    const Vec3 hi = grid.upper_corner() - Vec3{spec.radius_mm, spec.radius_mm, spec.radius_mm};
    for (const auto& p : axis.polyline())
        for (int a = 0; a < 3; ++a)
            if (p[a] < lo[a] - 1e-9 || p[a] > hi[a] + 1e-9) throw UsageError("curve out of bounds");

    // Squared distance to the axis, only resolved within the profile cutoff.
    const double s = 0.5 * spec.radius_mm;
    const double cutoff = 6.0 * s;
    std::vector<double> d2(grid.voxel_count(), std::numeric_limits<double>::infinity());
    const auto& pts = axis.polyline();
    for (std::size_t n = 1; n < pts.size(); ++n) {
        const PointMM& a = pts[n - 1];
        const PointMM& b = pts[n];
        int lo_i[3], hi_i[3];
        for (int ax = 0; ax < 3; ++ax) {
            const double mn = std::min(a[ax], b[ax]) - cutoff, mx = std::max(a[ax], b[ax]) + cutoff;
            lo_i[ax] = std::max(0, static_cast<int>(std::floor((mn - grid.origin[ax]) / grid.spacing[ax])));
            hi_i[ax] = std::min(grid.dims[ax] - 1, static_cast<int>(std::ceil((mx - grid.origin[ax]) / grid.spacing[ax])));
        }
        const Vec3 ab = b - a;
        const double len2 = dot(ab, ab);
        for (int k = lo_i[2]; k <= hi_i[2]; ++k)
            for (int j = lo_i[1]; j <= hi_i[1]; ++j)
                for (int i = lo_i[0]; i <= hi_i[0]; ++i) {
                    const PointMM p = grid.to_mm({i, j, k});
                    const double t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
                    const Vec3 q = p - (a + t * ab);
                    double& slot = d2[grid.linear(i, j, k)];
                    slot = std::min(slot, dot(q, q));
                }
    }

    Volume vol(grid, ValueKind::normalized_unit);
    auto data = vol.data();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
    for (std::size_t idx = 0; idx < data.size(); ++idx) {
        double v = spec.background;
        if (std::isfinite(d2[idx]))
            v += (spec.peak_intensity - spec.background) * std::exp(-d2[idx] / (2.0 * s * s));
        if (spec.slab) {
            const PointMM p = grid.to_mm(grid.unravel(idx));
            if (std::abs(p[spec.slab->normal_axis] - spec.slab->position_mm) <= 0.5 * spec.slab->thickness_mm)
                v += spec.slab->intensity;
        }
        if (spec.noise_sigma > 0.0) v += noise(rng);
        data[idx] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return {std::move(vol), std::move(axis)};
}

Volume slab_fascia_mask(const TubeSpec& spec, const Grid& grid) {
    if (!spec.slab) throw UsageError("phantom has no slab to derive a fascia mask from");
    Volume mask(grid, ValueKind::raw_stored);
    auto data = mask.data();
    for (std::size_t idx = 0; idx < data.size(); ++idx) {
        const PointMM p = grid.to_mm(grid.unravel(idx));
        data[idx] = std::abs(p[spec.slab->normal_axis] - spec.slab->position_mm) <= 0.5 * spec.slab->thickness_mm
                        ? 1.0f
                        : 0.0f;
    }
    return mask;
}

LandmarkSet axis_landmarks(const AnalyticCenterline& axis, double step_mm, const std::string& name,
                           LandmarkKind kind) {
    return {name, axis.samples(step_mm), kind};
}

namespace {

PointMM point_from(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) throw UsageError(std::string(what) + " must be [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::pair<TubeSpec, Grid> phantom_spec_from_json(const json& j) {
    try {
        TubeSpec spec;
        const json& c = j.at("curve");
        const std::string type = c.at("type").get<std::string>();
        if (type == "straight") {
            spec.curve = StraightCurve{point_from(c.at("start"), "curve.start"), point_from(c.at("end"), "curve.end")};
        } else if (type == "helix") {
            HelixCurve h;
            const json& center = c.at("center");
            h.center_x = center.at(0).get<double>();
            h.center_y = center.at(1).get<double>();
            h.z_start = c.at("z_start").get<double>();
            h.z_end = c.at("z_end").get<double>();
            h.radius_mm = c.at("radius_mm").get<double>();
            h.pitch_mm = c.at("pitch_mm").get<double>();
            h.phase_deg = c.value("phase_deg", 0.0);
            spec.curve = h;
        } else if (type == "spline") {
            SplineCurve s;
            for (const auto& p : c.at("control_points")) s.control_points.push_back(point_from(p, "control point"));
            spec.curve = s;
        } else {
            throw UsageError("unknown curve type '" + type + "'");
        }
        spec.radius_mm = j.value("radius_mm", spec.radius_mm);
        spec.peak_intensity = j.value("peak_intensity", spec.peak_intensity);
        spec.background = j.value("background", spec.background);
        spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
        spec.seed = j.value("seed", spec.seed);
        if (j.contains("slab")) {
            const json& s = j["slab"];
            spec.slab = SlabSpec{s.at("normal_axis").get<int>(), s.at("position_mm").get<double>(),
                                 s.at("thickness_mm").get<double>(), s.at("intensity").get<double>()};
        }
        Grid grid;
        for (int a = 0; a < 3; ++a) grid.dims[a] = j.at("dims").at(a).get<int>();
        grid.spacing = point_from(j.at("spacing_mm"), "spacing_mm");
        if (j.contains("origin_mm")) grid.origin = point_from(j["origin_mm"], "origin_mm");
        spec.validate(grid);
        return {spec, grid};
    } catch (const json::exception& e) {
        throw UsageError(std::string("malformed phantom spec: ") + e.what());
    }
}

}  // namespace vtrace
