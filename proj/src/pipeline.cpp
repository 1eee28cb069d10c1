#include "vtrace/pipeline.hpp"

#include <chrono>
#include <sstream>

#include "vtrace/error.hpp"
#include "vtrace/parallel.hpp"

namespace vtrace::pipeline {

using nlohmann::json;

Centerline run_track(const Volume& vesselness, const Volume& intensity, const Volume* fascia,
                     const TrackRequest& req) {
    req.config.validate();
    Vec3 dir;
    if (req.toward || !req.direction)
        dir = initial_direction(vesselness, req.seed, req.toward, req.config);
    else
        dir = *req.direction;
    return track(vesselness, intensity, req.seed, dir, fascia, req.config);
}

json track_document(const Centerline& line) { return to_json(line); }

VoxelIndex voxel_at(const Grid& grid, const PointMM& p) {
    if (!grid.contains(p)) {
        std::ostringstream os;
        os << "point " << p << " mm is outside the volume";
        throw DataError(os.str());
    }
    return grid.nearest_voxel(p);
}

MinpathResult run_minpath(const Volume& costs, const MinpathRequest& req) {
    MinpathResult r;
    r.path = astar(costs, voxel_at(costs.grid(), req.start), voxel_at(costs.grid(), req.goal));
    r.line = refine_path(r.path, costs, req.smooth);
    return r;
}

MinpathResult run_minpath(const Volume& vesselness_norm, const Volume& intensity_norm, const MinpathRequest& req) {
    const Volume costs = build_cost_volume(vesselness_norm, intensity_norm, req.sigmoid);
    return run_minpath(costs, req);
}

json minpath_document(const MinpathResult& r, bool include_timing) {
    return path_to_json(r.line, r.path, include_timing);
}

std::vector<std::pair<double, double>> sweep_grid() {
    std::vector<std::pair<double, double>> cells;
    for (int a = 1; a <= 6; ++a)
        for (int b = 0; b <= 6; ++b) cells.emplace_back(7.5 * a, (50 + 5 * b) / 100.0);
    return cells;
}

std::vector<SweepRow> run_sweep(const Volume& vesselness_norm, const Volume& intensity_norm, const PointMM& start,
                                const PointMM& goal, const LandmarkSet& gt, const SigmoidParams& base, bool smooth,
                                unsigned jobs) {
    const auto cells = sweep_grid();
    std::vector<SweepRow> rows(cells.size());
    parallel_for(
        0, cells.size(),
        [&](std::size_t i) {
            MinpathRequest req{start, goal, base, smooth};
            req.sigmoid.a_s = cells[i].first;
            req.sigmoid.b_s = cells[i].second;
            const auto t0 = std::chrono::steady_clock::now();
            const MinpathResult r = run_minpath(vesselness_norm, intensity_norm, req);
            const auto t1 = std::chrono::steady_clock::now();
            SweepRow& row = rows[i];
            row.a_s = cells[i].first;
            row.b_s = cells[i].second;
            row.metrics = evaluate(gt, r.line);
            row.elapsed_s = std::chrono::duration<double>(t1 - t0).count();
            row.expanded_nodes = r.path.expanded_nodes;
            row.total_cost = r.path.total_cost;
        },
        jobs);
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, bool include_timing) {
    std::ostringstream os;
    os.precision(10);
    os << "a_s,b_s,mean_euclidean_mm,hausdorff_mm,elapsed_s,expanded_nodes\n";
    for (const auto& r : rows) {
        os << r.a_s << ',' << r.b_s << ',' << r.metrics.mean_distance_mm << ',' << r.metrics.hausdorff_mm << ',';
        if (include_timing) os << r.elapsed_s;
        else os << 0;
        os << ',' << r.expanded_nodes << '\n';
    }
    return os.str();
}

}  // namespace vtrace::pipeline
