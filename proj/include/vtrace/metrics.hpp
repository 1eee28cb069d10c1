#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vtrace/centerline.hpp"

namespace vtrace {

enum class LandmarkKind { subcutaneous, intramuscular };

/// Sparse ground-truth points on a vessel centreline.
struct LandmarkSet {
    std::string name;
    std::vector<PointMM> points;
    LandmarkKind kind{LandmarkKind::subcutaneous};
};

nlohmann::json to_json(const LandmarkSet& s);
/// Parses {name, kind, points_mm}; throws DataError on malformed input or an
/// empty point list.
LandmarkSet landmarks_from_json(const nlohmann::json& j);
LandmarkSet load_landmarks(const std::filesystem::path& path);

/// Directed distances from landmarks to a path.
struct PathMetrics {
    double mean_distance_mm{0.0};
    double hausdorff_mm{0.0};
};

double point_to_segment(const PointMM& p, const PointMM& a, const PointMM& b);

/// Exact distance to the closest segment, or to the single vertex.
double point_to_polyline(const PointMM& p, std::span<const PointMM> line);
inline double point_to_polyline(const PointMM& p, const Centerline& line) {
    return point_to_polyline(p, line.points);
}

/// Mean and maximum over the landmarks of point_to_polyline (landmarks -> path).
PathMetrics evaluate(const LandmarkSet& gt, const Centerline& line);
PathMetrics evaluate(std::span<const PointMM> gt, std::span<const PointMM> line);

/// "name,mean_distance_mm,hausdorff_mm" header and row for metric reports.
std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& name, const PathMetrics& m);

}  // namespace vtrace
