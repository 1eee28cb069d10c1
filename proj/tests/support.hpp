#pragma once

// Shared fixtures and independent reference implementations used by the unit
// tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "vtrace/geometry.hpp"
#include "vtrace/phantom.hpp"
#include "vtrace/volume.hpp"

namespace vtrace::support {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("vtrace_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

struct Rotation {
    double r[3][3]{};
    Vec3 apply(const Vec3& v) const {
        return {r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z, r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
                r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z};
    }
    /// R M R^T, symmetrised explicitly.
    Mat3 conjugate(const Mat3& m) const {
        double t[3][3]{}, out[3][3]{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) t[i][j] += r[i][k] * m(k, j);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) out[i][j] += t[i][k] * r[j][k];
        return Mat3::symmetric(out[0][0], out[1][1], out[2][2], 0.5 * (out[0][1] + out[1][0]),
                               0.5 * (out[0][2] + out[2][0]), 0.5 * (out[1][2] + out[2][1]));
    }
};

/// Uniformly distributed rotation from a random unit quaternion.
template <typename Rng>
Rotation random_rotation(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    double q[4];
    double len = 0.0;
    do {
        len = 0.0;
        for (double& c : q) {
            c = n(rng);
            len += c * c;
        }
    } while (len < 1e-12);
    len = std::sqrt(len);
    const double w = q[0] / len, x = q[1] / len, y = q[2] / len, z = q[3] / len;
    Rotation rot;
    rot.r[0][0] = 1 - 2 * (y * y + z * z);
    rot.r[0][1] = 2 * (x * y - w * z);
    rot.r[0][2] = 2 * (x * z + w * y);
    rot.r[1][0] = 2 * (x * y + w * z);
    rot.r[1][1] = 1 - 2 * (x * x + z * z);
    rot.r[1][2] = 2 * (y * z - w * x);
    rot.r[2][0] = 2 * (x * z - w * y);
    rot.r[2][1] = 2 * (y * z + w * x);
    rot.r[2][2] = 1 - 2 * (x * x + y * y);
    return rot;
}

template <typename Rng>
Vec3 random_unit(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v;
    do v = {n(rng), n(rng), n(rng)};
    while (norm(v) < 1e-9);
    return normalized(v);
}

/// Eigenvalues of a symmetric 3x3 matrix from the characteristic cubic
/// (trigonometric solution), ascending.
inline std::array<double, 3> cubic_eigenvalues(const Mat3& a) {
    const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
    const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) + (a(2, 2) - q) * (a(2, 2) - q) + 2 * p1;
    const double p = std::sqrt(p2 / 6.0);
    if (p == 0.0) return {q, q, q};
    double b[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b[i][j] = (a(i, j) - (i == j ? q : 0.0)) / p;
    const double det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                       b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                       b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    const double r = std::clamp(det / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double e1 = q + 2 * p * std::cos(phi);
    const double e3 = q + 2 * p * std::cos(phi + 2.0 * M_PI / 3.0);
    const double e2 = 3 * q - e1 - e3;
    std::array<double, 3> out{e1, e2, e3};
    std::sort(out.begin(), out.end());
    return out;
}

/// Distance from p to segment ab by ternary search on the (convex) squared
/// distance along the segment parameter.
inline double segment_distance_search(const PointMM& p, const PointMM& a, const PointMM& b) {
    auto f = [&](double t) {
        const PointMM q = a + t * (b - a);
        return dot(p - q, p - q);
    };
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (f(m1) < f(m2)) hi = m2;
        else lo = m1;
    }
    const double best = std::min({f(0.0), f(1.0), f(0.5 * (lo + hi))});
    return std::sqrt(best);
}

struct BruteMetrics {
    double mean{0.0};
    double hausdorff{0.0};
};

/// Two-loop landmark -> polyline metric.
inline BruteMetrics brute_force_metrics(const std::vector<PointMM>& gt, const std::vector<PointMM>& line) {
    BruteMetrics m;
    for (const auto& p : gt) {
        double best = std::numeric_limits<double>::infinity();
        if (line.size() == 1) best = distance(p, line[0]);
        for (std::size_t s = 1; s < line.size(); ++s)
            best = std::min(best, segment_distance_search(p, line[s - 1], line[s]));
        m.mean += best;
        m.hausdorff = std::max(m.hausdorff, best);
    }
    m.mean /= static_cast<double>(gt.size());
    return m;
}

/// Exact cost-to-goal for every voxel: Dijkstra from the goal over reversed
/// edges, where stepping u -> w costs C(w) * |w - u|_mm.
inline std::vector<double> distance_to_goal(const Volume& costs, const VoxelIndex& goal) {
    const Grid& g = costs.grid();
    std::vector<double> dist(g.voxel_count(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[g.linear(goal)] = 0.0;
    heap.push({0.0, g.linear(goal)});
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        const VoxelIndex uv = g.unravel(u);
        const double cu = costs.at(uv);
        for (int dk = -1; dk <= 1; ++dk)
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    if (!di && !dj && !dk) continue;
                    const VoxelIndex w{uv.i + di, uv.j + dj, uv.k + dk};
                    if (!g.contains(w) || !std::isfinite(costs.at(w))) continue;
                    // Forward edge w -> u is charged at the cost of u.
                    const double len = std::sqrt(std::pow(di * g.spacing.x, 2) + std::pow(dj * g.spacing.y, 2) +
                                                 std::pow(dk * g.spacing.z, 2));
                    const double nd = d + cu * len;
                    const std::size_t wl = g.linear(w);
                    if (nd < dist[wl]) {
                        dist[wl] = nd;
                        heap.push({nd, wl});
                    }
                }
    }
    return dist;
}

/// Random cost volume with values in [1, 1 + spread].
template <typename Rng>
Volume random_costs(Rng& rng, int n, const Vec3& spacing, double spread = 9.0) {
    Grid g;
    g.dims = {n, n, n};
    g.spacing = spacing;
    Volume v(g, ValueKind::cost);
    std::uniform_real_distribution<double> u(1.0, 1.0 + spread);
    for (float& x : v.data()) x = static_cast<float>(u(rng));
    return v;
}

/// Grid with spacing drawn from typical abdominal CT: 0.55-0.98 mm in-plane,
/// 0.40-1.50 mm along the body axis, covering about `extent_mm` per axis.
template <typename Rng>
Grid ct_like_grid(Rng& rng, double extent_mm) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Grid g;
    const double sxy = 0.55 + 0.43 * u(rng);
    const double sz = 0.40 + 1.10 * u(rng);
    g.spacing = {sxy, sxy, sz};
    for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(extent_mm / g.spacing[a]) + 1;
    return g;
}

struct TubeCase {
    TubeSpec spec;
    Grid grid;
    bool helix{false};
};

/// Seeded straight or helical tube inside a CT-like grid. The tube radius is
/// drawn from [max(0.5, max_spacing / 2), 1.5] mm; helices keep a curvature
/// radius above 5 mm.
template <typename Rng>
TubeCase random_tube_case(Rng& rng, bool helix, double noise_sigma, double extent_mm = 30.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    TubeCase c;
    c.helix = helix;
    c.grid = ct_like_grid(rng, extent_mm);
    const double rmin = std::max(0.5, 0.5 * c.grid.max_spacing());
    c.spec.radius_mm = rmin + (1.5 - rmin) * u(rng);
    c.spec.noise_sigma = noise_sigma;
    c.spec.seed = rng();
    const Vec3 hi = c.grid.upper_corner();
    if (!helix) {
        Vec3 a{3 + 4 * u(rng), 3 + 4 * u(rng), 3}, b{hi.x - 3 - 4 * u(rng), hi.y - 3 - 4 * u(rng), hi.z - 3};
        if (u(rng) < 0.5) std::swap(a.y, b.y);
        c.spec.curve = StraightCurve{a, b};
    } else {
        c.spec.curve = HelixCurve{hi.x / 2, hi.y / 2, 3.0, hi.z - 3.0, 3.0 + u(rng), 20.0 + 10.0 * u(rng), 360.0 * u(rng)};
    }
    return c;
}

}  // namespace vtrace::support
