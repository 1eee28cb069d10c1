#include "vtrace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vtrace/error.hpp"

namespace vtrace {

using nlohmann::json;

json to_json(const LandmarkSet& s) {
    json pts = json::array();
    for (const auto& p : s.points) pts.push_back({p.x, p.y, p.z});
    return {{"name", s.name},
            {"kind", s.kind == LandmarkKind::subcutaneous ? "subcutaneous" : "intramuscular"},
            {"points_mm", pts}};
}

LandmarkSet landmarks_from_json(const json& j) {
    if (!j.is_object()) throw DataError("landmark document must be a JSON object");
    LandmarkSet s;
    try {
        s.name = j.value("name", "");
        const std::string kind = j.value("kind", "subcutaneous");
        if (kind == "subcutaneous") s.kind = LandmarkKind::subcutaneous;
        else if (kind == "intramuscular") s.kind = LandmarkKind::intramuscular;
        else throw DataError("unknown landmark kind '" + kind + "'");
        if (!j.contains("points_mm") || !j["points_mm"].is_array())
            throw DataError("landmark document lacks 'points_mm'");
        for (const auto& e : j["points_mm"]) {
            if (!e.is_array() || e.size() != 3 || !e[0].is_number() || !e[1].is_number() || !e[2].is_number())
                throw DataError("landmark points must be [x, y, z] numbers");
            s.points.push_back({e[0].get<double>(), e[1].get<double>(), e[2].get<double>()});
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed landmark JSON: ") + e.what());
    }
    if (s.points.empty()) throw DataError("landmark set has no points");
    return s;
}

LandmarkSet load_landmarks(const std::filesystem::path& path) {
    try {
        return landmarks_from_json(read_json_file(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

double point_to_segment(const PointMM& p, const PointMM& a, const PointMM& b) {
    const Vec3 ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return distance(p, a);
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return distance(p, a + t * ab);
}

double point_to_polyline(const PointMM& p, std::span<const PointMM> line) {
    if (line.empty()) throw UsageError("polyline has no points");
    if (line.size() == 1) return distance(p, line.front());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < line.size(); ++i) best = std::min(best, point_to_segment(p, line[i - 1], line[i]));
    return best;
}

PathMetrics evaluate(std::span<const PointMM> gt, std::span<const PointMM> line) {
    if (gt.empty()) throw UsageError("ground truth has no landmarks");
    PathMetrics m;
    double sum = 0.0;
    for (const auto& p : gt) {
        const double d = point_to_polyline(p, line);
        sum += d;
        m.hausdorff_mm = std::max(m.hausdorff_mm, d);
    }
    m.mean_distance_mm = sum / static_cast<double>(gt.size());
    // The mean of values bounded by the max can exceed it by round-off only.
    m.mean_distance_mm = std::min(m.mean_distance_mm, m.hausdorff_mm);
    return m;
}

PathMetrics evaluate(const LandmarkSet& gt, const Centerline& line) { return evaluate(gt.points, line.points); }

std::string metrics_csv_header() { return "name,mean_distance_mm,hausdorff_mm"; }

std::string metrics_csv_row(const std::string& name, const PathMetrics& m) {
    std::ostringstream os;
    os.precision(17);
    os << name << ',' << m.mean_distance_mm << ',' << m.hausdorff_mm;
    return os.str();
}

}  // namespace vtrace
