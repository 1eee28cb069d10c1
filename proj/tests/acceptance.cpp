// Acceptance runner: one PASS/FAIL line per primary criterion. Exit status is
// non-zero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <sys/wait.h>

#include "support.hpp"
#include "vtrace/centerline.hpp"
#include "vtrace/eigen3.hpp"
#include "vtrace/metrics.hpp"
#include "vtrace/minpath.hpp"
#include "vtrace/phantom.hpp"
#include "vtrace/pipeline.hpp"
#include "vtrace/tracker.hpp"
#include "vtrace/vesselness.hpp"
#include "vtrace/volume_io.hpp"

using namespace vtrace;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass{true};
    std::ostringstream detail;
    void require(bool ok, const std::string& why) {
        if (!ok && pass) detail << "first failure: " << why << "; ";
        pass = pass && ok;
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Volume vesselness_of(const Volume& unit) { return normalize_vesselness(enhance_volume(unit, FrangiParams::subcutaneous())); }

double max_turn_deg(const Centerline& line) {
    double worst = 0.0;
    for (std::size_t n = 1; n < line.directions.size(); ++n)
        worst = std::max(worst, rad_to_deg(angle_between(line.directions[n - 1], line.directions[n])));
    return worst;
}

// ---------------------------------------------------------------------------

// Shared by the tracking and direction criteria: every centerline emitted
// while checking tracking accuracy is also checked against the turn cap.
std::vector<Centerline> g_emitted;

void tracker_round(Outcome& o, double noise, double mean_factor, double haus_factor, int count, std::uint64_t seed,
                   const char* label) {
    std::mt19937_64 rng(seed);
    double worst_mean = 0.0, worst_haus = 0.0, worst_time = 0.0;
    int helices = 0;
    for (int n = 0; n < count; ++n) {
        const bool helix = n % 2 == 1;
        helices += helix;
        const auto c = support::random_tube_case(rng, helix, noise);
        const Phantom ph = generate(c.spec, c.grid);
        const Volume vess = vesselness_of(ph.volume);
        const auto t0 = Clock::now();
        const Centerline line = track(vess, ph.volume, ph.axis.point_at(0.0), ph.axis.tangent_at(0.0), nullptr, TrackerConfig{});
        const double dt = seconds_since(t0);
        LandmarkSet gt;
        for (double s = 0.0; s <= ph.axis.length_mm() + 1e-9; s += 0.5) gt.points.push_back(ph.axis.point_at(s));
        const PathMetrics m = evaluate(gt, line);
        const double ms = c.grid.min_spacing();
        worst_mean = std::max(worst_mean, m.mean_distance_mm / ms);
        worst_haus = std::max(worst_haus, m.hausdorff_mm / ms);
        worst_time = std::max(worst_time, dt);
        std::ostringstream why;
        why << label << " case " << n << " mean " << m.mean_distance_mm << " haus " << m.hausdorff_mm << " min spacing " << ms
            << " time " << dt << " s";
        o.require(m.mean_distance_mm < mean_factor * ms && m.hausdorff_mm < haus_factor * ms && dt < 1.0, why.str());
        g_emitted.push_back(line);
    }
    o.detail << label << ": " << count << " tubes (" << helices << " helical), worst mean " << worst_mean
             << "x min spacing (< " << mean_factor << "), worst hausdorff " << worst_haus << "x (< " << haus_factor
             << "), slowest track " << worst_time << " s; ";
}

Outcome tracker_phantom_accuracy() {
    Outcome o;
    tracker_round(o, 0.0, 0.5, 1.5, 24, 101, "noise-free");
    tracker_round(o, 0.05, 1.0, 2.5, 24, 202, "noise 0.05");
    return o;
}

// ---------------------------------------------------------------------------

Outcome astar_optimality() {
    Outcome o;
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<int> idx(0, 15);
    double worst_gap = 0.0;
    std::int64_t a_total = 0, d_total = 0;
    for (int t = 0; t < 100; ++t) {
        const Vec3 spacing{0.55 + 0.43 * (rng() % 1000) / 1000.0, 0.55 + 0.43 * (rng() % 1000) / 1000.0,
                           0.40 + 1.10 * (rng() % 1000) / 1000.0};
        const Volume c = support::random_costs(rng, 16, spacing, t % 2 ? 9.0 : 999.0);
        const VoxelIndex s{idx(rng), idx(rng), idx(rng)}, g{idx(rng), idx(rng), idx(rng)};
        const VoxelPath a = astar(c, s, g), d = dijkstra_oracle(c, s, g);
        worst_gap = std::max(worst_gap, std::abs(a.total_cost - d.total_cost));
        a_total += a.expanded_nodes;
        d_total += d.expanded_nodes;
        o.require(std::abs(a.total_cost - d.total_cost) <= 1e-9, "random instance " + std::to_string(t) + " cost differs");
        o.require(a.expanded_nodes <= d.expanded_nodes, "random instance " + std::to_string(t) + " expands more nodes");
    }
    for (int t = 0; t < 12; ++t) {
        const auto c = support::random_tube_case(rng, t % 2 == 1, t < 6 ? 0.0 : 0.05, 24.0);
        const Phantom ph = generate(c.spec, c.grid);
        const Volume costs = build_cost_volume(vesselness_of(ph.volume), ph.volume, SigmoidParams{});
        const VoxelIndex s = c.grid.nearest_voxel(ph.axis.point_at(0.0));
        const VoxelIndex g = c.grid.nearest_voxel(ph.axis.point_at(ph.axis.length_mm()));
        const VoxelPath a = astar(costs, s, g), d = dijkstra_oracle(costs, s, g);
        worst_gap = std::max(worst_gap, std::abs(a.total_cost - d.total_cost));
        a_total += a.expanded_nodes;
        d_total += d.expanded_nodes;
        o.require(std::abs(a.total_cost - d.total_cost) <= 1e-9, "phantom instance " + std::to_string(t) + " cost differs");
        o.require(a.expanded_nodes <= d.expanded_nodes, "phantom instance " + std::to_string(t) + " expands more nodes");
    }
    o.detail << "100 random 16^3 + 12 phantom cost volumes, max |cost difference| " << worst_gap
             << ", expanded nodes astar/dijkstra " << a_total << "/" << d_total;
    return o;
}

// ---------------------------------------------------------------------------

Outcome heuristic_admissibility() {
    Outcome o;
    std::mt19937_64 rng(404);
    std::size_t checked = 0;
    double tightest = 0.0;
    for (int t = 0; t < 10; ++t) {
        const Vec3 spacing{0.55 + 0.43 * (rng() % 1000) / 1000.0, 0.55 + 0.43 * (rng() % 1000) / 1000.0,
                           0.40 + 1.10 * (rng() % 1000) / 1000.0};
        const Volume c = support::random_costs(rng, 12, spacing, t % 2 ? 0.5 : 20.0);
        const VoxelIndex goal{static_cast<int>(rng() % 12), static_cast<int>(rng() % 12), static_cast<int>(rng() % 12)};
        const auto exact = support::distance_to_goal(c, goal);
        for (std::size_t n = 0; n < exact.size(); ++n) {
            const double h = astar_heuristic(c.grid(), c.grid().unravel(n), goal);
            o.require(h <= exact[n] + 1e-12, "instance " + std::to_string(t) + " voxel " + std::to_string(n));
            if (exact[n] > 0.0) tightest = std::max(tightest, h / exact[n]);
            ++checked;
        }
    }
    o.detail << checked << " voxels over 10 random 12^3 instances, max h/exact " << tightest;
    return o;
}

// ---------------------------------------------------------------------------

// Scaled Chebyshev distance (in voxels) from p to segment ab: the largest
// per-axis offset divided by that axis' spacing, minimised over the segment.
double voxel_distance_to_segment(const PointMM& p, const PointMM& a, const PointMM& b, const Vec3& spacing) {
    auto f = [&](double t) {
        const PointMM q = a + t * (b - a);
        return std::max({std::abs(p.x - q.x) / spacing.x, std::abs(p.y - q.y) / spacing.y, std::abs(p.z - q.z) / spacing.z});
    };
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 100; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (f(m1) < f(m2)) hi = m2;
        else lo = m1;
    }
    return std::min({f(0.0), f(1.0), f(0.5 * (lo + hi))});
}

double voxel_distance_to_axis(const PointMM& p, const AnalyticCenterline& axis, const Vec3& spacing) {
    const auto& pts = axis.polyline();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t n = 1; n < pts.size(); ++n) {
        // Skip segments that cannot beat the current best.
        if (std::abs(pts[n].x - p.x) / spacing.x > best + 1.0 && std::abs(pts[n - 1].x - p.x) / spacing.x > best + 1.0)
            continue;
        best = std::min(best, voxel_distance_to_segment(p, pts[n - 1], pts[n], spacing));
    }
    return best;
}

Outcome minpath_phantom_accuracy() {
    Outcome o;
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_voxel = 0.0, worst_mean = 0.0;
    const int cases = 12;
    for (int t = 0; t < cases; ++t) {
        Grid g = support::ct_like_grid(rng, 30.0);
        const Vec3 hi = g.upper_corner();
        TubeSpec spec;
        const double rmin = std::max(0.5, 0.5 * g.max_spacing());
        spec.radius_mm = rmin + (1.5 - rmin) * u(rng);
        if (t % 2 == 0)
            spec.curve = HelixCurve{hi.x / 2, hi.y / 2, 3.0, hi.z - 3.0, 3.0 + u(rng), 20.0 + 10.0 * u(rng), 360.0 * u(rng)};
        else
            spec.curve = SplineCurve{{{4 + 2 * u(rng), 4 + 2 * u(rng), 3},
                                      {hi.x / 2, hi.y - 6, hi.z / 3},
                                      {hi.x - 6, hi.y / 2, 2 * hi.z / 3},
                                      {hi.x / 2 + 2 * u(rng), 5, hi.z - 3}}};
        const Phantom ph = generate(spec, g);
        const Volume vess = vesselness_of(ph.volume);
        pipeline::MinpathRequest req;
        req.start = ph.axis.point_at(0.0);
        req.goal = ph.axis.point_at(ph.axis.length_mm());
        const auto res = pipeline::run_minpath(vess, ph.volume, req);
        double case_voxel = 0.0;
        for (const auto& v : res.path.voxels) case_voxel = std::max(case_voxel, voxel_distance_to_axis(g.to_mm(v), ph.axis, g.spacing));
        const PathMetrics m = evaluate(axis_landmarks(ph.axis, 0.5, "axis"), res.line);
        worst_voxel = std::max(worst_voxel, case_voxel);
        worst_mean = std::max(worst_mean, m.mean_distance_mm / g.min_spacing());
        o.require(case_voxel <= 1.0, "case " + std::to_string(t) + " path voxel " + std::to_string(case_voxel) + " voxels off axis");
        o.require(m.mean_distance_mm < 0.75 * g.min_spacing(), "case " + std::to_string(t) + " mean " + std::to_string(m.mean_distance_mm));
    }

    // Large volume timing: enhancement excluded, cost volume + search + refinement included.
    Grid big;
    big.dims = {160, 160, 160};
    big.spacing = {0.7, 0.7, 0.7};
    const Vec3 hi = big.upper_corner();
    TubeSpec spec;
    spec.radius_mm = 0.8;
    spec.noise_sigma = 0.05;
    spec.seed = 7;
    spec.curve = SplineCurve{{{5, 5, 4}, {hi.x * 0.7, hi.y * 0.3, hi.z * 0.35}, {hi.x * 0.3, hi.y * 0.8, hi.z * 0.65}, {hi.x - 5, hi.y - 5, hi.z - 4}}};
    const Phantom ph = generate(spec, big);
    const auto t_enh = Clock::now();
    const Volume vess = vesselness_of(ph.volume);
    const double enhance_s = seconds_since(t_enh);
    pipeline::MinpathRequest req;
    req.start = ph.axis.point_at(0.0);
    req.goal = ph.axis.point_at(ph.axis.length_mm());
    const auto t0 = Clock::now();
    const auto res = pipeline::run_minpath(vess, ph.volume, req);
    const double search_s = seconds_since(t0);
    o.require(search_s < 10.0, "160^3 minpath took " + std::to_string(search_s) + " s");

    o.detail << cases << " curved phantoms, worst path voxel " << worst_voxel << " voxels from axis (<= 1), worst refined mean "
             << worst_mean << "x min spacing (< 0.75); 160^3 minpath " << search_s << " s (< 10, "
             << res.path.expanded_nodes << " nodes expanded; enhancement " << enhance_s << " s)";
    return o;
}

// ---------------------------------------------------------------------------

Outcome eigensolver() {
    Outcome o;
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> u(-1.0, 1.0), ex(-6.0, 6.0);
    double worst_rec = 0.0, worst_orth = 0.0, worst_root = 0.0;
    for (int t = 0; t < 10000; ++t) {
        const double s = std::pow(10.0, ex(rng));
        const Mat3 m = Mat3::symmetric(s * u(rng), s * u(rng), s * u(rng), s * u(rng), s * u(rng), s * u(rng));
        const EigenTriple e = eig3_symmetric(m);
        Mat3 r;
        for (int n = 0; n < 3; ++n)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) r(i, j) += e.lambda[n] * e.vectors[n][i] * e.vectors[n][j];
        Mat3 d;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) d(i, j) = r(i, j) - m(i, j);
        const double rec = frobenius_norm(d) / frobenius_norm(m);
        double orth = 0.0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) orth = std::max(orth, std::abs(dot(e.vectors[a], e.vectors[b]) - (a == b ? 1.0 : 0.0)));
        auto sorted = e.lambda;
        std::sort(sorted.begin(), sorted.end());
        const auto roots = support::cubic_eigenvalues(m);
        for (int a = 0; a < 3; ++a) worst_root = std::max(worst_root, std::abs(sorted[a] - roots[a]) / frobenius_norm(m));
        worst_rec = std::max(worst_rec, rec);
        worst_orth = std::max(worst_orth, orth);
        o.require(rec < 1e-6, "reconstruction " + std::to_string(rec));
        o.require(orth < 1e-6, "orthonormality " + std::to_string(orth));
        o.require(std::abs(e.lambda[0]) <= std::abs(e.lambda[1]) && std::abs(e.lambda[1]) <= std::abs(e.lambda[2]),
                  "ordering by magnitude");
    }
    o.require(worst_root < 1e-6, "eigenvalues disagree with the characteristic cubic");
    o.detail << "10000 matrices, worst relative reconstruction " << worst_rec << ", worst orthonormality " << worst_orth
             << ", worst eigenvalue vs cubic roots " << worst_root;
    return o;
}

// ---------------------------------------------------------------------------

Outcome frangi_properties() {
    Outcome o;
    std::mt19937_64 rng(707);
    std::uniform_real_distribution<double> u(0.0, 1.0), wide(-1e4, 1e4);
    const FrangiParams presets[] = {FrangiParams::subcutaneous(), FrangiParams::intramuscular()};
    double lo = 1.0, hi = 0.0;
    for (int t = 0; t < 100000; ++t) {
        const auto& p = presets[t % 2];
        const double v = frangi_vesselness(wide(rng), wide(rng), wide(rng), p);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        o.require(v >= 0.0 && v < 1.0, "value outside [0, 1)");
    }
    o.require(frangi_vesselness(0, -1e12, -1e12, FrangiParams{0.5, 10, 1e-6, 1.0, Polarity::bright_on_dark}) < 1.0,
              "saturated response reaches 1");
    for (int t = 0; t < 10000; ++t) {
        const double l1 = wide(rng), l2 = std::abs(wide(rng)) + 1e-9, l3 = -std::abs(wide(rng)) - 1e-9;
        o.require(frangi_vesselness(l1, l2, l3, presets[0]) == 0.0, "positive lambda2 not exactly zero");
        o.require(frangi_vesselness(l1, -l2, -l3, presets[1]) == 0.0, "positive lambda3 not exactly zero");
    }
    double worst_rot = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const double l3 = -(1.0 + 999.0 * u(rng));
        const double l2 = l3 * (0.05 + 0.95 * u(rng));
        const double l1 = 0.3 * std::abs(l2) * (2 * u(rng) - 1);
        const Mat3 h = Mat3::symmetric(l1, l2, l3, 0, 0, 0);
        const Mat3 r = support::random_rotation(rng).conjugate(h);
        for (const auto& p : presets) {
            const double diff = std::abs(frangi_vesselness(eig3_symmetric(r), p) - frangi_vesselness(eig3_symmetric(h), p));
            worst_rot = std::max(worst_rot, diff);
        }
    }
    o.require(worst_rot <= 1e-6, "rotation changed vesselness by " + std::to_string(worst_rot));

    // Tube versus plate and off-axis, equal contrast.
    Grid g;
    g.dims = {31, 31, 31};
    g.spacing = {0.5, 0.5, 0.5};
    TubeSpec tube;
    tube.curve = StraightCurve{{1, 7.5, 7.5}, {14, 7.5, 7.5}};
    tube.radius_mm = 1.0;
    tube.peak_intensity = 0.6;
    const Volume tube_in = generate(tube, g).volume;
    Volume plate(g, ValueKind::normalized_unit);
    for (int k = 0; k < 31; ++k)
        for (int j = 0; j < 31; ++j)
            for (int i = 0; i < 31; ++i) {
                const double d = g.to_mm({i, j, k}).z - 7.5;
                plate.at(i, j, k) = static_cast<float>(0.6 * std::exp(-d * d / (2 * 0.5 * 0.5)));
            }
    // Both presets, plus a contrast constant matched to unit-range data so the
    // comparison is not dominated by the structureness term.
    FrangiParams scaled = FrangiParams::subcutaneous();
    scaled.c = 0.15;
    const std::pair<const char*, FrangiParams> variants[] = {
        {"subcutaneous", FrangiParams::subcutaneous()}, {"intramuscular", FrangiParams::intramuscular()}, {"c=0.15", scaled}};
    o.detail << "range over 1e5 random triples min " << lo << ", 1 - max " << 1.0 - hi << ", sign branch exact on 2e4 cases, worst rotation change "
             << worst_rot << " over 1000 rotations; tube axis / 3 mm off-axis / plate:";
    for (const auto& [label, params] : variants) {
        const Volume tv = enhance_volume(tube_in, params);
        const Volume pv = enhance_volume(plate, params);
        const double on_axis = tv.at(15, 15, 15), off_axis = tv.at(15, 21, 15), on_plate = pv.at(15, 15, 15);
        o.require(on_axis > 0.0, std::string(label) + ": no response on the tube axis");
        o.require(on_axis >= 10.0 * off_axis, std::string(label) + ": tube axis not 10x the 3 mm off-axis response");
        o.require(on_plate < on_axis, std::string(label) + ": plate scores at least the tube");
        o.detail << " " << label << " " << on_axis << " / " << off_axis << " / " << on_plate << ";";
    }
    return o;
}

// ---------------------------------------------------------------------------

Outcome direction_estimator() {
    Outcome o;
    std::mt19937_64 rng(808);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst_rot = 0.0, worst_scale = 0.0;
    int fields = 0;
    while (fields < 1000) {
        // Gradients of a tube-like field: mostly orthogonal to a random axis.
        const Vec3 axis = support::random_unit(rng);
        const auto [e1, e2] = in_plane_basis(axis);
        std::vector<Vec3> g;
        const int count = 6 + static_cast<int>(rng() % 120);
        for (int k = 0; k < count; ++k) g.push_back(n(rng) * e1 + n(rng) * e2 + 0.2 * n(rng) * axis);
        const auto base = estimate_direction(g, axis);
        if (base.degenerate) continue;
        ++fields;
        const auto rot = support::random_rotation(rng);
        std::vector<Vec3> rg;
        for (const auto& v : g) rg.push_back(rot.apply(v));
        const Vec3 expected = rot.apply(base.direction);
        worst_rot = std::max(worst_rot, distance(estimate_direction(rg, expected).direction, expected));
        const double k = std::exp(5.0 * n(rng));
        std::vector<Vec3> sg;
        for (const auto& v : g) sg.push_back(k * v);
        worst_scale = std::max(worst_scale, distance(estimate_direction(sg, axis).direction, base.direction));
    }
    o.require(worst_rot <= 1e-6, "rotation equivariance error " + std::to_string(worst_rot));
    o.require(worst_scale <= 1e-6, "scale invariance error " + std::to_string(worst_scale));

    double worst_turn = 0.0;
    std::size_t steps = 0;
    for (const auto& line : g_emitted) {
        worst_turn = std::max(worst_turn, max_turn_deg(line));
        steps += line.directions.size();
    }
    // A tighter cap on a noisy, curved tube so clamping is actually exercised.
    std::mt19937_64 rng2(809);
    TrackerConfig tight;
    tight.max_turn_deg = 15.0;
    double tight_worst = 0.0;
    for (int t = 0; t < 6; ++t) {
        const auto c = support::random_tube_case(rng2, true, 0.08);
        const Phantom ph = generate(c.spec, c.grid);
        const Volume vess = vesselness_of(ph.volume);
        const Centerline line = track(vess, ph.volume, ph.axis.point_at(0.0), -ph.axis.tangent_at(0.0) + Vec3{0.3, 0.2, 0.0},
                                      nullptr, tight);
        tight_worst = std::max(tight_worst, max_turn_deg(line));
        steps += line.directions.size();
    }
    o.require(worst_turn <= TrackerConfig{}.max_turn_deg + 1e-6, "turn cap exceeded: " + std::to_string(worst_turn));
    o.require(tight_worst <= tight.max_turn_deg + 1e-6, "15 degree cap exceeded: " + std::to_string(tight_worst));
    o.detail << fields << " fields, worst rotation error " << worst_rot << ", worst scale error " << worst_scale << "; "
             << g_emitted.size() + 6 << " centerlines / " << steps << " directions, worst turn " << worst_turn
             << " deg (cap 60), " << tight_worst << " deg (cap 15)";
    return o;
}

// ---------------------------------------------------------------------------

Patch2D gaussian_patch(int size, double res, double ci, double cj, double sigma) {
    Patch2D p;
    p.width = p.height = size;
    p.resolution_mm = res;
    p.values.resize(static_cast<std::size_t>(size) * size);
    for (int j = 0; j < size; ++j)
        for (int i = 0; i < size; ++i) p(i, j) = std::exp(-((i - ci) * (i - ci) + (j - cj) * (j - cj)) / (2 * sigma * sigma));
    return p;
}

std::pair<int, int> brute_force_argmax(const Patch2D& p) {
    const int w = p.width, h = p.height;
    std::vector<Vec3> f(static_cast<std::size_t>(w) * h);
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            const int i0 = std::max(i - 1, 0), i1 = std::min(i + 1, w - 1), j0 = std::max(j - 1, 0), j1 = std::min(j + 1, h - 1);
            const Vec3 g{(p(i1, j) - p(i0, j)) / ((i1 - i0) * p.resolution_mm), (p(i, j1) - p(i, j0)) / ((j1 - j0) * p.resolution_mm), 0};
            f[j * w + i] = norm(g) < 1e-9 ? Vec3{} : normalized(g);
        }
    const int t = std::min(w, h) / 4;
    double best = -1e300;
    std::pair<int, int> arg{0, 0};
    for (int cj = 0; cj < h; ++cj)
        for (int ci = 0; ci < w; ++ci) {
            double r = 0.0;
            for (int dj = -t; dj <= t; ++dj)
                for (int di = -t; di <= t; ++di) {
                    const int i = ci + di, j = cj + dj;
                    if ((di == 0 && dj == 0) || i < 0 || j < 0 || i >= w || j >= h) continue;
                    r += dot(f[j * w + i], normalized(Vec3{-static_cast<double>(di), -static_cast<double>(dj), 0}));
                }
            if (r > best) {
                best = r;
                arg = {ci, cj};
            }
        }
    return arg;
}

Outcome ridge_correction() {
    Outcome o;
    const TrackerConfig cfg;
    const int size = 2 * static_cast<int>(std::floor(cfg.cross_section_side_mm / 2 / cfg.cross_section_resolution_mm)) + 1;
    const double res = cfg.cross_section_resolution_mm;
    const double centre = 0.5 * (size - 1);
    const int reach = static_cast<int>(std::floor(0.25 * size));
    double worst = 0.0;
    int agree = 0, total = 0;
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) {
            const double du = -reach + a * reach / 2.0, dv = -reach + b * reach / 2.0;
            const Patch2D p = gaussian_patch(size, res, centre + du, centre + dv, 2.0);
            const InPlaneOffset off = ridge_correct(p);
            worst = std::max({worst, std::abs(off.u_mm / res - du), std::abs(off.v_mm / res - dv)});
            o.require(std::abs(off.u_mm / res - du) <= 0.5 && std::abs(off.v_mm / res - dv) <= 0.5,
                      "displacement (" + std::to_string(du) + ", " + std::to_string(dv) + ") not recovered");
            const auto [bi, bj] = brute_force_argmax(p);
            const bool same = off.u_mm == (bi - centre) * res && off.v_mm == (bj - centre) * res;
            agree += same;
            ++total;
            o.require(same, "argmax differs from brute force");
        }
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        Patch2D p = gaussian_patch(size, res, u(rng) * (size - 1), u(rng) * (size - 1), 1.0 + 3.0 * u(rng));
        for (double& x : p.values) x += 0.3 * u(rng);
        const InPlaneOffset off = ridge_correct(p);
        const auto [bi, bj] = brute_force_argmax(p);
        const bool same = off.u_mm == (bi - centre) * res && off.v_mm == (bj - centre) * res;
        agree += same;
        ++total;
        o.require(same, "noisy patch argmax differs from brute force");
    }
    o.detail << size << "x" << size << " patch, 5x5 displacements up to " << reach << " samples (25% of side), worst error "
             << worst << " samples (<= 0.5); brute-force argmax agreement " << agree << "/" << total;
    return o;
}

// ---------------------------------------------------------------------------

Outcome metrics_oracle() {
    Outcome o;
    std::mt19937_64 rng(1010);
    std::uniform_real_distribution<double> u(-25.0, 25.0);
    double worst = 0.0, worst_rigid = 0.0;
    for (int t = 0; t < 100; ++t) {
        std::vector<PointMM> gt, line;
        const int ng = 1 + static_cast<int>(rng() % 40), nl = 1 + static_cast<int>(rng() % 60);
        for (int k = 0; k < ng; ++k) gt.push_back({u(rng), u(rng), u(rng)});
        for (int k = 0; k < nl; ++k) line.push_back({u(rng), u(rng), u(rng)});
        const PathMetrics m = evaluate(gt, line);
        const auto ref = support::brute_force_metrics(gt, line);
        worst = std::max({worst, std::abs(m.mean_distance_mm - ref.mean), std::abs(m.hausdorff_mm - ref.hausdorff)});
        const auto rot = support::random_rotation(rng);
        const Vec3 shift{u(rng), u(rng), u(rng)};
        std::vector<PointMM> gt2, line2;
        for (const auto& p : gt) gt2.push_back(rot.apply(p) + shift);
        for (const auto& p : line) line2.push_back(rot.apply(p) + shift);
        const PathMetrics m2 = evaluate(gt2, line2);
        worst_rigid = std::max({worst_rigid, std::abs(m.mean_distance_mm - m2.mean_distance_mm), std::abs(m.hausdorff_mm - m2.hausdorff_mm)});
        o.require(m.hausdorff_mm >= m.mean_distance_mm, "hausdorff below mean");
    }
    o.require(worst <= 1e-9, "brute-force disagreement " + std::to_string(worst));
    o.require(worst_rigid <= 1e-9, "rigid motion changed metrics by " + std::to_string(worst_rigid));
    const std::vector<PointMM> seg{{-1, 0, 0}, {1, 0, 0}};
    const bool hand = point_to_polyline({1, 0, 0}, seg) == 0.0 && point_to_polyline({0, 0, 1}, seg) == 1.0 &&
                      point_to_polyline({3, 0, 4}, seg) == std::sqrt(20.0);
    o.require(hand, "hand-computed point_to_polyline examples");
    o.detail << "100 random pairs, worst brute-force difference " << worst << ", worst rigid-motion change " << worst_rigid
             << ", hand examples " << (hand ? "exact" : "wrong");
    return o;
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + VTRACE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const char* kHelixSpec = R"({
  "curve": {"type": "helix", "center": [15, 15], "z_start": 3, "z_end": 27, "radius_mm": 3.5, "pitch_mm": 22},
  "radius_mm": 0.9, "peak_intensity": 0.8, "background": 0.1, "noise_sigma": 0.05, "seed": 3,
  "dims": [41, 41, 41], "spacing_mm": [0.75, 0.75, 0.75]
})";

Outcome sweep_structure() {
    Outcome o;
    const fs::path dir = support::scratch_dir("accept_sweep");
    std::ofstream(dir / "spec.json") << kHelixSpec;
    const std::string p = dir.string();
    o.require(run_cli("phantom --spec " + p + "/spec.json --out-prefix " + p + "/ph") == 0, "phantom command failed");
    o.require(run_cli("enhance --in " + p + "/ph.json --out " + p + "/v.json") == 0, "enhance command failed");
    const LandmarkSet gt = load_landmarks(dir / "ph_landmarks.json");
    std::ostringstream args;
    args.precision(17);
    args << "sweep --vesselness " << p << "/v.json --intensity " << p << "/ph.json --gt " << p << "/ph_landmarks.json --start "
         << gt.points.front().x << ',' << gt.points.front().y << ',' << gt.points.front().z << " --goal " << gt.points.back().x
         << ',' << gt.points.back().y << ',' << gt.points.back().z << " --out " << p << "/sweep.csv";
    o.require(run_cli(args.str()) == 0, "sweep command failed");

    std::istringstream csv(read_file(dir / "sweep.csv"));
    std::string line;
    std::getline(csv, line);
    o.require(line == "a_s,b_s,mean_euclidean_mm,hausdorff_mm,elapsed_s,expanded_nodes", "unexpected header");
    std::set<std::pair<long, long>> cells;
    long lo = std::numeric_limits<long>::max(), hi = 0;
    int rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        std::istringstream row(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(row, field, ',')) f.push_back(field);
        if (f.size() != 6) {
            o.require(false, "row with " + std::to_string(f.size()) + " fields");
            continue;
        }
        cells.insert({std::lround(std::stod(f[0]) * 10), std::lround(std::stod(f[1]) * 100)});
        const long expanded = std::stol(f[5]);
        lo = std::min(lo, expanded);
        hi = std::max(hi, expanded);
    }
    std::set<std::pair<long, long>> expected;
    for (int a = 1; a <= 6; ++a)
        for (int b = 0; b <= 6; ++b) expected.insert({75L * a, 50L + 5 * b});
    o.require(rows == 42, "row count " + std::to_string(rows));
    o.require(cells == expected, "cells do not cover the (a_s, b_s) grid");
    o.require(hi >= 2 * lo, "expanded nodes vary less than 2x");
    o.detail << rows << " rows covering " << cells.size() << " grid cells; expanded nodes range " << lo << " .. " << hi << " ("
             << (lo > 0 ? static_cast<double>(hi) / lo : 0.0) << "x)";
    return o;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, std::string>> run_full_pipeline(const fs::path& dir) {
    const std::string p = dir.string();
    std::ofstream(dir / "spec.json") << kHelixSpec;
    if (run_cli("phantom --spec " + p + "/spec.json --out-prefix " + p + "/ph") != 0) return {};
    // Stored CT values: HU window [-140, 260] mapped back through intercept -1024.
    const Volume unit = load_volume(dir / "ph.json");
    Volume raw(unit.grid(), ValueKind::raw_stored);
    for (std::size_t n = 0; n < unit.size(); ++n) raw.data()[n] = std::round(1024.0f - 140.0f + 400.0f * unit.data()[n]);
    save_volume(dir / "ct.json", raw, StorageType::i16);
    const LandmarkSet gt = load_landmarks(dir / "ph_landmarks.json");
    std::ostringstream seeds;
    seeds.precision(17);
    seeds << " --start " << gt.points.front().x << ',' << gt.points.front().y << ',' << gt.points.front().z << " --goal "
          << gt.points.back().x << ',' << gt.points.back().y << ',' << gt.points.back().z;
    const std::vector<std::string> steps{
        "normalize --in " + p + "/ct.json --out " + p + "/norm.json",
        "enhance --in " + p + "/norm.json --out " + p + "/vess.json",
        "track --vesselness " + p + "/vess.json --intensity " + p + "/norm.json --landmarks " + p +
            "/ph_landmarks.json --out " + p + "/track.json",
        "minpath --vesselness " + p + "/vess.json --intensity " + p + "/norm.json" + seeds.str() + " --omit-timing --out " + p +
            "/path.json",
        "eval --gt " + p + "/ph_landmarks.json --path " + p + "/track.json --out " + p + "/track.csv",
        "eval --gt " + p + "/ph_landmarks.json --path " + p + "/path.json --out " + p + "/path.csv"};
    for (const auto& s : steps)
        if (run_cli(s) != 0) return {};
    std::vector<std::pair<std::string, std::string>> files;
    for (const char* f : {"norm.json", "norm.raw", "vess.json", "vess.raw", "track.json", "path.json", "track.csv", "path.csv"})
        files.emplace_back(f, read_file(dir / f));
    return files;
}

Outcome end_to_end_determinism() {
    Outcome o;
    const auto a = run_full_pipeline(support::scratch_dir("accept_e2e_a"));
    const auto b = run_full_pipeline(support::scratch_dir("accept_e2e_b"));
    o.require(!a.empty() && !b.empty(), "pipeline command failed");
    std::size_t bytes = 0;
    for (std::size_t n = 0; n < std::min(a.size(), b.size()); ++n) {
        // Paths differ between the runs only through the scratch directory,
        // which none of the outputs embed.
        o.require(a[n].second == b[n].second, a[n].first + " differs between runs");
        o.require(!a[n].second.empty(), a[n].first + " is empty");
        bytes += a[n].second.size();
    }
    o.detail << "normalize -> enhance -> track + minpath -> eval twice: " << a.size() << " output files, " << bytes
             << " bytes, identical";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::tuple<const char*, const char*, std::function<Outcome()>>> criteria{
        {"P1", "tracker phantom accuracy", tracker_phantom_accuracy},
        {"P2", "A* optimality", astar_optimality},
        {"P3", "heuristic admissibility", heuristic_admissibility},
        {"P4", "minpath phantom accuracy", minpath_phantom_accuracy},
        {"P5", "eigensolver", eigensolver},
        {"P6", "Frangi properties", frangi_properties},
        {"P7", "direction estimator", direction_estimator},
        {"P8", "ridge correction", ridge_correction},
        {"P9", "metrics", metrics_oracle},
        {"P10", "sweep structure", sweep_structure},
        {"P11", "end-to-end determinism", end_to_end_determinism},
    };
    int failed = 0;
    for (const auto& [id, name, check] : criteria) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        failed += !o.pass;
        std::printf("%-4s %s  %s (%.1f s): %s\n", id, o.pass ? "PASS" : "FAIL", name, seconds_since(t0), o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
