#include "vtrace/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vtrace/eigen3.hpp"
#include "vtrace/error.hpp"

namespace vtrace {

using nlohmann::json;

void TrackerConfig::validate() const {
    if (!(step_delta_mm > 0.0)) throw UsageError("tracker step must be positive");
    if (!(window_side_mm > 0.0)) throw UsageError("tracker window side must be positive");
    if (correction_interval < 1) throw UsageError("correction interval must be >= 1");
    if (!(max_turn_deg > 0.0 && max_turn_deg <= 90.0))
        throw UsageError("max turn angle must lie in (0, 90] degrees");
    if (!(cross_section_side_mm > 0.0) || !(cross_section_resolution_mm > 0.0))
        throw UsageError("cross-section side and resolution must be positive");
    if (cross_section_resolution_mm > cross_section_side_mm / 8.0)
        throw UsageError("cross-section resolution must be at most side / 8");
    if (!(min_vesselness >= 0.0 && min_vesselness <= 1.0))
        throw UsageError("min vesselness must lie in [0, 1]");
    if (max_iterations < 1) throw UsageError("max iterations must be >= 1");
}

json to_json(const TrackerConfig& c) {
    return {{"step_delta_mm", c.step_delta_mm},
            {"window_side_mm", c.window_side_mm},
            {"correction_interval", c.correction_interval},
            {"max_turn_deg", c.max_turn_deg},
            {"cross_section_side_mm", c.cross_section_side_mm},
            {"cross_section_resolution_mm", c.cross_section_resolution_mm},
            {"min_vesselness", c.min_vesselness},
            {"max_iterations", c.max_iterations},
            {"correction_source",
             c.correction_source == CorrectionSource::vesselness ? "vesselness" : "intensity"}};
}

TrackerConfig tracker_config_from_json(const json& j, TrackerConfig c) {
    if (j.is_null()) return c;
    if (!j.is_object()) throw UsageError("tracker configuration must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "step_delta_mm") c.step_delta_mm = value.get<double>();
            else if (key == "window_side_mm") c.window_side_mm = value.get<double>();
            else if (key == "correction_interval") c.correction_interval = value.get<int>();
            else if (key == "max_turn_deg") c.max_turn_deg = value.get<double>();
            else if (key == "cross_section_side_mm") c.cross_section_side_mm = value.get<double>();
            else if (key == "cross_section_resolution_mm") c.cross_section_resolution_mm = value.get<double>();
            else if (key == "min_vesselness") c.min_vesselness = value.get<double>();
            else if (key == "max_iterations") c.max_iterations = value.get<int>();
            else if (key == "correction_source") {
                const auto s = value.get<std::string>();
                if (s == "vesselness") c.correction_source = CorrectionSource::vesselness;
                else if (s == "intensity") c.correction_source = CorrectionSource::intensity;
                else throw UsageError("unknown correction_source '" + s + "'");
            } else {
                throw UsageError("unknown tracker parameter '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw UsageError(std::string("malformed tracker parameter: ") + e.what());
    }
    c.validate();
    return c;
}

DirectionEstimate estimate_direction(std::span<const Vec3> gradients, std::optional<Vec3> orientation) {
    if (gradients.size() < 6) throw UsageError("direction estimation needs at least 6 gradient samples");
    double xx = 0, yy = 0, zz = 0, xy = 0, xz = 0, yz = 0;
    for (const Vec3& g : gradients) {
        xx += g.x * g.x;
        yy += g.y * g.y;
        zz += g.z * g.z;
        xy += g.x * g.y;
        xz += g.x * g.z;
        yz += g.y * g.z;
    }
    const double n = static_cast<double>(gradients.size());
    const EigenTriple eig = eig3_symmetric(Mat3::symmetric(xx / n, yy / n, zz / n, xy / n, xz / n, yz / n));

    // The correlation matrix is positive semi-definite, so ordering by
    // magnitude is ordering by value up to round-off; sort by value anyway.
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return eig.lambda[a] < eig.lambda[b]; });

    DirectionEstimate out;
    for (int i = 0; i < 3; ++i) out.eigenvalues[i] = eig.lambda[order[i]];
    out.direction = eig.vectors[order[0]];
    const double gap = out.eigenvalues[1] - out.eigenvalues[0];
    out.degenerate = gap <= std::max(1e-9, kDegenerateGap * out.eigenvalues[1]);
    if (orientation && dot(out.direction, *orientation) < 0.0) out.direction = -out.direction;
    return out;
}

Vec3 clamp_direction(const Vec3& candidate, const Vec3& previous, double max_turn_deg) {
    const double angle = angle_between(candidate, previous);
    const double cap = deg_to_rad(max_turn_deg);
    if (angle <= cap) return candidate;
    const Vec3 perp = candidate - dot(candidate, previous) * previous;
    const double pn = norm(perp);
    if (pn < 1e-12) return previous;
    const Vec3 w = perp / pn;
    return normalized(std::cos(cap) * previous + std::sin(cap) * w);
}

std::pair<Vec3, Vec3> in_plane_basis(const Vec3& normal) {
    const Vec3 n = normalized(normal);
    // Seed with the coordinate axis least aligned with the normal.
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (std::abs(n[a]) < std::abs(n[axis])) axis = a;
    Vec3 e;
    e[axis] = 1.0;
    const Vec3 u = normalized(cross(n, e));
    const Vec3 v = cross(n, u);
    return {u, v};
}

CrossSection extract_cross_section(const Volume& vol, const PointMM& center, const Vec3& normal,
                                   const TrackerConfig& cfg) {
    const double res = cfg.cross_section_resolution_mm;
    const int half = static_cast<int>(std::floor(0.5 * cfg.cross_section_side_mm / res + 1e-9));
    const int size = 2 * half + 1;
    CrossSection cs;
    cs.center = center;
    std::tie(cs.u, cs.v) = in_plane_basis(normal);
    cs.patch.width = cs.patch.height = size;
    cs.patch.resolution_mm = res;
    cs.patch.values.assign(static_cast<std::size_t>(size) * size, 0.0);
    const Grid& g = vol.grid();
    int inside = 0;
    for (int j = 0; j < size; ++j) {
        for (int i = 0; i < size; ++i) {
            const PointMM p = center + ((i - half) * res) * cs.u + ((j - half) * res) * cs.v;
            if (!g.contains(p)) continue;
            cs.patch(i, j) = sample_trilinear(vol, p);
            ++inside;
        }
    }
    cs.coverage = static_cast<double>(inside) / (static_cast<double>(size) * size);
    if (cs.coverage < 0.5) throw DataError("cross-section out of volume");
    return cs;
}

std::vector<std::array<double, 2>> orientation_field(const Patch2D& patch) {
    const int w = patch.width, h = patch.height;
    std::vector<std::array<double, 2>> field(static_cast<std::size_t>(w) * h, {0.0, 0.0});
    auto diff = [](double lo, double hi, int span) { return (hi - lo) / span; };
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            const int i0 = std::max(i - 1, 0), i1 = std::min(i + 1, w - 1);
            const int j0 = std::max(j - 1, 0), j1 = std::min(j + 1, h - 1);
            const double gx = diff(patch(i0, j), patch(i1, j), i1 - i0);
            const double gy = diff(patch(i, j0), patch(i, j1), j1 - j0);
            const double mag = std::hypot(gx, gy);
            if (mag < 1e-9) continue;
            field[static_cast<std::size_t>(j) * w + i] = {gx / mag, gy / mag};
        }
    }
    return field;
}

int template_half_size(const Patch2D& patch) {
    return std::max(1, std::min(patch.width, patch.height) / 4);
}

InPlaneOffset ridge_correct(const Patch2D& patch) {
    if (patch.width < 8 || patch.height < 8) throw UsageError("ridge correction needs at least 8x8 samples");
    const auto field = orientation_field(patch);
    const bool any = std::any_of(field.begin(), field.end(),
                                 [](const auto& f) { return f[0] != 0.0 || f[1] != 0.0; });
    if (!any) return {};

    const int t = template_half_size(patch);
    const int tw = 2 * t + 1;
    std::vector<std::array<double, 2>> tmpl(static_cast<std::size_t>(tw) * tw, {0.0, 0.0});
    for (int dj = -t; dj <= t; ++dj)
        for (int di = -t; di <= t; ++di) {
            if (di == 0 && dj == 0) continue;
            const double r = std::hypot(di, dj);
            tmpl[static_cast<std::size_t>(dj + t) * tw + (di + t)] = {-di / r, -dj / r};
        }

    const int w = patch.width, h = patch.height;
    double best = -std::numeric_limits<double>::infinity();
    int best_i = 0, best_j = 0;
    for (int cj = 0; cj < h; ++cj) {
        for (int ci = 0; ci < w; ++ci) {
            double response = 0.0;
            for (int dj = -t; dj <= t; ++dj) {
                const int j = cj + dj;
                if (j < 0 || j >= h) continue;
                for (int di = -t; di <= t; ++di) {
                    const int i = ci + di;
                    if (i < 0 || i >= w) continue;
                    const auto& f = field[static_cast<std::size_t>(j) * w + i];
                    const auto& g = tmpl[static_cast<std::size_t>(dj + t) * tw + (di + t)];
                    response += f[0] * g[0] + f[1] * g[1];
                }
            }
            if (response > best) {
                best = response;
                best_i = ci;
                best_j = cj;
            }
        }
    }
    const double ci0 = 0.5 * (w - 1), cj0 = 0.5 * (h - 1);
    return {(best_i - ci0) * patch.resolution_mm, (best_j - cj0) * patch.resolution_mm};
}

std::vector<Vec3> window_gradients(const Volume& vol, const PointMM& center, const TrackerConfig& cfg) {
    const Grid& g = vol.grid();
    const double step = g.min_spacing();
    const double h = default_gradient_step(g);
    const int m = static_cast<int>(std::floor(0.5 * cfg.window_side_mm / step + 1e-9));
    const Vec3 lo = g.lower_corner() + Vec3{h, h, h};
    const Vec3 hi = g.upper_corner() - Vec3{h, h, h};
    std::vector<Vec3> grads;
    grads.reserve(static_cast<std::size_t>(2 * m + 1) * (2 * m + 1) * (2 * m + 1));
    for (int c = -m; c <= m; ++c)
        for (int b = -m; b <= m; ++b)
            for (int a = -m; a <= m; ++a) {
                const PointMM p = center + Vec3{a * step, b * step, c * step};
                if (p.x < lo.x || p.y < lo.y || p.z < lo.z || p.x > hi.x || p.y > hi.y || p.z > hi.z)
                    continue;
                grads.push_back(gradient_at(vol, p, h));
            }
    return grads;
}

Vec3 initial_direction(const Volume& vesselness, const PointMM& seed, std::optional<PointMM> toward,
                       const TrackerConfig& cfg) {
    if (toward) {
        const Vec3 d = *toward - seed;
        if (norm(d) == 0.0) throw UsageError("second landmark coincides with the seed");
        return normalized(d);
    }
    const auto grads = window_gradients(vesselness, seed, cfg);
    if (grads.size() < 6) throw DataError("seed too close to the volume border to estimate a direction");
    const Grid& g = vesselness.grid();
    const Vec3 interior = 0.5 * (g.lower_corner() + g.upper_corner()) - seed;
    const auto est = estimate_direction(grads, norm(interior) > 0 ? std::optional<Vec3>(interior)
                                                                  : std::nullopt);
    if (est.degenerate) throw ComputeError("no dominant vessel direction at the seed");
    return est.direction;
}

namespace {

bool inside_mask(const Volume& mask, const PointMM& p) {
    const Grid& g = mask.grid();
    if (!g.contains(p)) return false;
    VoxelIndex v = g.nearest_voxel(p);
    v.i = std::clamp(v.i, 0, g.dims[0] - 1);
    v.j = std::clamp(v.j, 0, g.dims[1] - 1);
    v.k = std::clamp(v.k, 0, g.dims[2] - 1);
    return mask.at(v) > 0.5f;
}

}  // namespace

Centerline track(const Volume& vesselness, const Volume& intensity, const PointMM& seed,
                 const Vec3& initial_dir, const Volume* fascia, const TrackerConfig& cfg) {
    cfg.validate();
    if (!vesselness.same_geometry(intensity))
        throw DataError("vesselness and intensity volumes differ in geometry");
    if (fascia && !vesselness.same_geometry(*fascia))
        throw DataError("fascia mask geometry differs from the working volume");
    if (!vesselness.grid().contains(seed)) {
        std::ostringstream os;
        os << "seed " << seed << " mm is outside the volume";
        throw DataError(os.str());
    }
    if (!(norm(initial_dir) > 0.0)) throw UsageError("initial direction must be non-zero");

    const double seed_v = sample_trilinear(vesselness, seed);
    if (seed_v < cfg.min_vesselness) {
        std::ostringstream os;
        os << "seed not on vessel: vesselness " << seed_v << " < " << cfg.min_vesselness;
        throw ComputeError(os.str());
    }

    const Volume& correction_vol =
        cfg.correction_source == CorrectionSource::vesselness ? vesselness : intensity;
    // In-plane shifts keep every step within 2 * delta and inside the window.
    const double max_shift = std::min(0.5 * cfg.window_side_mm, std::sqrt(3.0) * cfg.step_delta_mm);

    Centerline line;
    PointMM pos = seed;
    Vec3 dir = normalized(initial_dir);
    line.points.push_back(pos);
    line.directions.push_back(dir);
    line.vesselness.push_back(seed_v);

    int low_run = 0;
    for (int iter = 1;; ++iter) {
        if (fascia && inside_mask(*fascia, pos)) {
            line.termination = TerminationReason::fascia_reached;
            break;
        }
        if (low_run >= 3) {
            line.termination = TerminationReason::low_vesselness;
            break;
        }
        if (iter > cfg.max_iterations) {
            line.termination = TerminationReason::max_iterations;
            break;
        }
        const auto grads = window_gradients(vesselness, pos, cfg);
        if (grads.size() < 6) {
            line.termination = TerminationReason::out_of_bounds;
            break;
        }
        const DirectionEstimate est = estimate_direction(grads, dir);
        const Vec3 candidate = est.degenerate ? dir : est.direction;
        const Vec3 new_dir = clamp_direction(candidate, dir, cfg.max_turn_deg);
        PointMM next = pos + cfg.step_delta_mm * new_dir;

        if (iter % cfg.correction_interval == 0 && vesselness.grid().contains(next)) {
            try {
                const CrossSection cs = extract_cross_section(correction_vol, next, new_dir, cfg);
                const InPlaneOffset off = ridge_correct(cs.patch);
                Vec3 shift = off.u_mm * cs.u + off.v_mm * cs.v;
                const double len = norm(shift);
                if (len > max_shift) shift *= max_shift / len;
                next += shift;
            } catch (const DataError&) {
                // Patch mostly outside the volume: keep the uncorrected point.
            }
        }
        if (!vesselness.grid().contains(next)) {
            line.termination = TerminationReason::out_of_bounds;
            break;
        }
        const double vn = sample_trilinear(vesselness, next);
        line.points.push_back(next);
        line.directions.push_back(new_dir);
        line.vesselness.push_back(vn);
        low_run = vn < cfg.min_vesselness ? low_run + 1 : 0;
        pos = next;
        dir = new_dir;
    }
    return line;
}

}  // namespace vtrace
