#pragma once

#include <chrono>
#include <cstdint>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vtrace/centerline.hpp"
#include "vtrace/volume.hpp"

namespace vtrace {

/// `dark_is_cheap` evaluates 1 / (1 + exp(a (I - b))), which makes bright
/// voxels expensive; `bright_is_cheap` flips the exponent sign so bright
/// voxels get a high transfer value and therefore a low cost.
enum class SigmoidOrientation { dark_is_cheap, bright_is_cheap };

std::string_view to_string(SigmoidOrientation o);
SigmoidOrientation sigmoid_orientation_from_string(std::string_view name);

struct SigmoidParams {
    double a_s{45.0};
    double b_s{0.60};
    double epsilon{1e-3};
    SigmoidOrientation orientation{SigmoidOrientation::bright_is_cheap};

    void validate() const;
};

nlohmann::json to_json(const SigmoidParams& p);
SigmoidParams sigmoid_params_from_json(const nlohmann::json& j, SigmoidParams base = {});

/// Intensity transfer in (0, 1); the exponent is clamped to +-500.
double sigmoid_transfer(double intensity, const SigmoidParams& p);

/// Terrain cost C = 1 / (v * T(I) + eps), clamped below at 1, from a
/// normalised vesselness and a normalised intensity volume of equal geometry.
/// Output kind is cost. Infinite values may be written into a cost volume to
/// block voxels; searches never enter them.
Volume build_cost_volume(const Volume& vesselness_norm, const Volume& intensity_norm,
                         const SigmoidParams& p);

struct VoxelPath {
    std::vector<VoxelIndex> voxels;
    double total_cost{0.0};
    std::int64_t expanded_nodes{0};
    std::chrono::nanoseconds elapsed{0};
};

/// Cost of stepping from `from` into the 26-neighbour `to`: C(to) times the
/// mm distance between the voxel centres.
double step_cost(const Volume& costs, const VoxelIndex& from, const VoxelIndex& to);

/// Straight-line mm distance between voxel centres; the A* heuristic.
/// Admissible because every cost is >= 1 per mm.
double astar_heuristic(const Grid& grid, const VoxelIndex& v, const VoxelIndex& goal);

/// A* over the 26-connected voxel grid guided by astar_heuristic().
/// Among equal f-scores the smaller linear index (z, y, x lexicographic) is
/// expanded first. Throws ComputeError when the goal cannot be reached.
VoxelPath astar(const Volume& costs, const VoxelIndex& start, const VoxelIndex& goal);

/// Plain Dijkstra on the same graph, settling nodes until the goal is popped.
/// Kept independent of astar() so it can serve as its optimality oracle.
VoxelPath dijkstra_oracle(const Volume& costs, const VoxelIndex& start, const VoxelIndex& goal);

/// Sum of step costs along a voxel chain; throws if two consecutive voxels
/// are not 26-neighbours.
double path_cost(const Volume& costs, const std::vector<VoxelIndex>& voxels);

/// Maps a voxel chain to a mm polyline (voxel centres), optionally smoothed by
/// a 3-point moving average with fixed endpoints. Per-point "vesselness" is
/// the inverse cost 1 / C at the voxel. Termination is fascia-reached.
Centerline refine_path(const VoxelPath& path, const Volume& costs, bool smooth = true);

/// Centerline JSON plus total_cost, expanded_nodes and, unless omitted, a
/// "timing" object holding elapsed_ms (the only run-to-run varying field).
nlohmann::json path_to_json(const Centerline& line, const VoxelPath& path, bool include_timing = true);

}  // namespace vtrace
