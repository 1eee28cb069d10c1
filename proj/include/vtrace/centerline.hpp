#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vtrace/geometry.hpp"

namespace vtrace {

enum class TerminationReason { fascia_reached, low_vesselness, out_of_bounds, max_iterations };

std::string_view to_string(TerminationReason r);
TerminationReason termination_from_string(std::string_view name);

/// Ordered sub-voxel polyline in mm with per-point direction and vesselness.
struct Centerline {
    std::vector<PointMM> points;
    std::vector<Vec3> directions;
    std::vector<double> vesselness;
    TerminationReason termination{TerminationReason::max_iterations};

    std::size_t size() const { return points.size(); }
    double length_mm() const;
};

/// {points_mm, directions, vesselness, termination}
nlohmann::json to_json(const Centerline& c);
Centerline centerline_from_json(const nlohmann::json& j);

Centerline load_centerline(const std::filesystem::path& path);

/// Writes `doc` with the formatting every tool output uses (2-space indent,
/// trailing newline) so CLI and service results compare byte for byte.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
std::string dump_json(const nlohmann::json& doc);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace vtrace
