#include "vtrace/centerline.hpp"

#include <fstream>
#include <sstream>

#include "vtrace/error.hpp"

namespace vtrace {

using nlohmann::json;

std::string_view to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::fascia_reached: return "fascia-reached";
        case TerminationReason::low_vesselness: return "low-vesselness";
        case TerminationReason::out_of_bounds: return "out-of-bounds";
        case TerminationReason::max_iterations: return "max-iterations";
    }
    return "max-iterations";
}

TerminationReason termination_from_string(std::string_view name) {
    for (auto r : {TerminationReason::fascia_reached, TerminationReason::low_vesselness,
                   TerminationReason::out_of_bounds, TerminationReason::max_iterations})
        if (to_string(r) == name) return r;
    throw DataError("unknown termination reason '" + std::string(name) + "'");
}

double Centerline::length_mm() const {
    double len = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) len += distance(points[i - 1], points[i]);
    return len;
}

namespace {

json vec_list(const std::vector<Vec3>& v) {
    json arr = json::array();
    for (const auto& p : v) arr.push_back({p.x, p.y, p.z});
    return arr;
}

std::vector<Vec3> vec_list_from(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_array())
        throw DataError(std::string("centerline JSON lacks array '") + key + "'");
    std::vector<Vec3> out;
    for (const auto& e : j[key]) {
        if (!e.is_array() || e.size() != 3) throw DataError(std::string("malformed entry in '") + key + "'");
        out.push_back({e[0].get<double>(), e[1].get<double>(), e[2].get<double>()});
    }
    return out;
}

}  // namespace

json to_json(const Centerline& c) {
    json j;
    j["points_mm"] = vec_list(c.points);
    j["directions"] = vec_list(c.directions);
    j["vesselness"] = c.vesselness;
    j["termination"] = std::string(to_string(c.termination));
    return j;
}

Centerline centerline_from_json(const json& j) {
    try {
        Centerline c;
        c.points = vec_list_from(j, "points_mm");
        if (j.contains("directions")) c.directions = vec_list_from(j, "directions");
        if (j.contains("vesselness")) c.vesselness = j["vesselness"].get<std::vector<double>>();
        if (j.contains("termination"))
            c.termination = termination_from_string(j["termination"].get<std::string>());
        if (c.points.empty()) throw DataError("centerline has no points");
        return c;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed centerline JSON: ") + e.what());
    }
}

Centerline load_centerline(const std::filesystem::path& path) {
    try {
        return centerline_from_json(read_json_file(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

void write_json_file(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << dump_json(doc);
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    try {
        return json::parse(os.str());
    } catch (const json::parse_error& e) {
        throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

}  // namespace vtrace
