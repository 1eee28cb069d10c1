#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vtrace/metrics.hpp"
#include "vtrace/minpath.hpp"
#include "vtrace/tracker.hpp"
#include "vtrace/volume.hpp"

// Composition helpers shared by the command-line tool and the HTTP service so
// both produce identical documents for identical inputs.
namespace vtrace::pipeline {

struct TrackRequest {
    PointMM seed;
    /// Second landmark of the vessel; the initial direction points at it.
    std::optional<PointMM> toward;
    /// Explicit initial direction; used when `toward` is absent.
    std::optional<Vec3> direction;
    TrackerConfig config;
};

Centerline run_track(const Volume& vesselness, const Volume& intensity, const Volume* fascia,
                     const TrackRequest& req);
nlohmann::json track_document(const Centerline& line);

struct MinpathRequest {
    PointMM start;
    PointMM goal;
    SigmoidParams sigmoid;
    bool smooth{true};
};

struct MinpathResult {
    VoxelPath path;
    Centerline line;
};

/// Snaps a mm point to its nearest voxel; throws DataError outside the grid.
VoxelIndex voxel_at(const Grid& grid, const PointMM& p);

MinpathResult run_minpath(const Volume& vesselness_norm, const Volume& intensity_norm,
                          const MinpathRequest& req);
/// Same search over an already built cost volume.
MinpathResult run_minpath(const Volume& costs, const MinpathRequest& req);
nlohmann::json minpath_document(const MinpathResult& r, bool include_timing = true);

/// The (a_s, b_s) grid: a_s = 7.5 .. 45 step 7.5, b_s = 0.50 .. 0.80 step 0.05.
std::vector<std::pair<double, double>> sweep_grid();

struct SweepRow {
    double a_s{0.0};
    double b_s{0.0};
    PathMetrics metrics;
    double elapsed_s{0.0};
    std::int64_t expanded_nodes{0};
    double total_cost{0.0};
};

/// Runs build_cost_volume + astar for every grid cell (cells spread over
/// `jobs` worker threads) and evaluates each path against `gt`. Rows come
/// back in grid order whatever the thread count.
std::vector<SweepRow> run_sweep(const Volume& vesselness_norm, const Volume& intensity_norm,
                                const PointMM& start, const PointMM& goal, const LandmarkSet& gt,
                                const SigmoidParams& base, bool smooth, unsigned jobs);

/// Columns: a_s,b_s,mean_euclidean_mm,hausdorff_mm,elapsed_s,expanded_nodes.
std::string sweep_csv(const std::vector<SweepRow>& rows, bool include_timing = true);

}  // namespace vtrace::pipeline
