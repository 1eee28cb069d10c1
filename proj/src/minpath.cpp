#include "vtrace/minpath.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "vtrace/error.hpp"

namespace vtrace {

using nlohmann::json;

std::string_view to_string(SigmoidOrientation o) {
    return o == SigmoidOrientation::dark_is_cheap ? "dark-is-cheap" : "bright-is-cheap";
}

SigmoidOrientation sigmoid_orientation_from_string(std::string_view name) {
    if (name == "dark-is-cheap") return SigmoidOrientation::dark_is_cheap;
    if (name == "bright-is-cheap") return SigmoidOrientation::bright_is_cheap;
    throw UsageError("unknown sigmoid orientation '" + std::string(name) + "'");
}

void SigmoidParams::validate() const {
    if (!(epsilon > 0.0)) throw UsageError("sigmoid epsilon must be positive");
    if (!(b_s >= 0.0 && b_s <= 1.0)) throw UsageError("sigmoid b_s must lie in [0, 1]");
    if (!std::isfinite(a_s)) throw UsageError("sigmoid a_s must be finite");
}

json to_json(const SigmoidParams& p) {
    return {{"a_s", p.a_s}, {"b_s", p.b_s}, {"epsilon", p.epsilon},
            {"orientation", std::string(to_string(p.orientation))}};
}

SigmoidParams sigmoid_params_from_json(const json& j, SigmoidParams p) {
    if (j.is_null()) return p;
    if (!j.is_object()) throw UsageError("sigmoid configuration must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "a_s") p.a_s = value.get<double>();
            else if (key == "b_s") p.b_s = value.get<double>();
            else if (key == "epsilon") p.epsilon = value.get<double>();
            else if (key == "orientation") p.orientation = sigmoid_orientation_from_string(value.get<std::string>());
            else throw UsageError("unknown sigmoid parameter '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw UsageError(std::string("malformed sigmoid parameter: ") + e.what());
    }
    p.validate();
    return p;
}

double sigmoid_transfer(double intensity, const SigmoidParams& p) {
    double x = p.a_s * (intensity - p.b_s);
    if (p.orientation == SigmoidOrientation::bright_is_cheap) x = -x;
    x = std::clamp(x, -500.0, 500.0);
    return 1.0 / (1.0 + std::exp(x));
}

Volume build_cost_volume(const Volume& vesselness_norm, const Volume& intensity_norm, const SigmoidParams& p) {
    p.validate();
    if (!vesselness_norm.same_geometry(intensity_norm))
        throw DataError("cost volume inputs differ in geometry");
    if (vesselness_norm.kind() != ValueKind::normalized_unit || intensity_norm.kind() != ValueKind::normalized_unit)
        throw UsageError("cost volume inputs must both be normalized-unit volumes");
    Volume out(vesselness_norm.grid(), ValueKind::cost);
    const auto vn = vesselness_norm.data();
    const auto in = intensity_norm.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const double c = 1.0 / (static_cast<double>(vn[i]) * sigmoid_transfer(in[i], p) + p.epsilon);
        dst[i] = static_cast<float>(std::max(1.0, c));
    }
    return out;
}

double step_cost(const Volume& costs, const VoxelIndex& from, const VoxelIndex& to) {
    const Vec3& s = costs.spacing();
    const double dx = (to.i - from.i) * s.x, dy = (to.j - from.j) * s.y, dz = (to.k - from.k) * s.z;
    return static_cast<double>(costs.at(to)) * std::sqrt(dx * dx + dy * dy + dz * dz);
}

double path_cost(const Volume& costs, const std::vector<VoxelIndex>& voxels) {
    double total = 0.0;
    for (std::size_t n = 1; n < voxels.size(); ++n) {
        const auto& a = voxels[n - 1];
        const auto& b = voxels[n];
        const int di = std::abs(a.i - b.i), dj = std::abs(a.j - b.j), dk = std::abs(a.k - b.k);
        if (std::max({di, dj, dk}) != 1) throw DataError("path voxels are not 26-neighbours");
        total += step_cost(costs, a, b);
    }
    return total;
}

namespace {

struct Neighbour {
    int di, dj, dk;
    double dist_mm;
};

std::array<Neighbour, 26> neighbours(const Vec3& spacing) {
    std::array<Neighbour, 26> out{};
    int n = 0;
    for (int dk = -1; dk <= 1; ++dk)
        for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
                if (di == 0 && dj == 0 && dk == 0) continue;
                const double x = di * spacing.x, y = dj * spacing.y, z = dk * spacing.z;
                out[n++] = {di, dj, dk, std::sqrt(x * x + y * y + z * z)};
            }
    return out;
}

void check_endpoints(const Volume& costs, const VoxelIndex& start, const VoxelIndex& goal) {
    if (costs.kind() != ValueKind::cost) throw UsageError("path search expects a cost volume");
    if (!costs.grid().contains(start)) throw DataError("path start voxel is out of bounds");
    if (!costs.grid().contains(goal)) throw DataError("path goal voxel is out of bounds");
}

std::vector<VoxelIndex> backtrack(const Grid& g, const std::vector<std::int64_t>& parent, std::size_t goal) {
    std::vector<VoxelIndex> out;
    for (std::int64_t cur = static_cast<std::int64_t>(goal); cur >= 0; cur = parent[cur])
        out.push_back(g.unravel(static_cast<std::size_t>(cur)));
    std::reverse(out.begin(), out.end());
    return out;
}

struct OpenEntry {
    double f;
    double g;
    std::size_t idx;
};

struct OpenLater {
    bool operator()(const OpenEntry& a, const OpenEntry& b) const {
        if (a.f != b.f) return a.f > b.f;
        return a.idx > b.idx;
    }
};

}  // namespace

double astar_heuristic(const Grid& grid, const VoxelIndex& v, const VoxelIndex& goal) {
    return distance(grid.to_mm(v), grid.to_mm(goal));
}

VoxelPath astar(const Volume& costs, const VoxelIndex& start, const VoxelIndex& goal) {
    check_endpoints(costs, start, goal);
    const auto t0 = std::chrono::steady_clock::now();
    const Grid& grid = costs.grid();
    const std::size_t start_idx = grid.linear(start), goal_idx = grid.linear(goal);
    auto heuristic = [&](const VoxelIndex& v) { return astar_heuristic(grid, v, goal); };

    VoxelPath result;
    if (start_idx == goal_idx) {
        result.voxels = {start};
        result.expanded_nodes = 1;
        result.elapsed = std::chrono::steady_clock::now() - t0;
        return result;
    }

    const auto nbrs = neighbours(grid.spacing);
    const auto inf = std::numeric_limits<double>::infinity();
    std::vector<double> g_score(grid.voxel_count(), inf);
    std::vector<std::int64_t> parent(grid.voxel_count(), -1);
    std::vector<std::uint8_t> closed(grid.voxel_count(), 0);
    std::priority_queue<OpenEntry, std::vector<OpenEntry>, OpenLater> open;

    g_score[start_idx] = 0.0;
    open.push({heuristic(start), 0.0, start_idx});
    bool found = false;
    while (!open.empty()) {
        const OpenEntry cur = open.top();
        open.pop();
        if (closed[cur.idx] || cur.g > g_score[cur.idx]) continue;
        closed[cur.idx] = 1;
        ++result.expanded_nodes;
        if (cur.idx == goal_idx) {
            found = true;
            break;
        }
        const VoxelIndex v = grid.unravel(cur.idx);
        for (const Neighbour& n : nbrs) {
            const VoxelIndex w{v.i + n.di, v.j + n.dj, v.k + n.dk};
            if (!grid.contains(w)) continue;
            const std::size_t widx = grid.linear(w);
            if (closed[widx]) continue;
            const double c = costs.data()[widx];
            if (!std::isfinite(c)) continue;
            const double tentative = cur.g + c * n.dist_mm;
            if (tentative < g_score[widx]) {
                g_score[widx] = tentative;
                parent[widx] = static_cast<std::int64_t>(cur.idx);
                open.push({tentative + heuristic(w), tentative, widx});
            }
        }
    }
    if (!found) throw ComputeError("goal voxel is unreachable from the start voxel");
    result.voxels = backtrack(grid, parent, goal_idx);
    result.total_cost = g_score[goal_idx];
    result.elapsed = std::chrono::steady_clock::now() - t0;
    return result;
}

VoxelPath dijkstra_oracle(const Volume& costs, const VoxelIndex& start, const VoxelIndex& goal) {
    check_endpoints(costs, start, goal);
    const auto t0 = std::chrono::steady_clock::now();
    const Grid& grid = costs.grid();
    const std::size_t n = grid.voxel_count();
    const std::size_t s = grid.linear(start), t = grid.linear(goal);

    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<std::int64_t> parent(n, -1);
    std::vector<bool> settled(n, false);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[s] = 0.0;
    heap.emplace(0.0, s);

    VoxelPath result;
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (settled[u]) continue;
        settled[u] = true;
        ++result.expanded_nodes;
        if (u == t) break;
        const VoxelIndex uv = grid.unravel(u);
        for (int dk = -1; dk <= 1; ++dk)
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    if (di == 0 && dj == 0 && dk == 0) continue;
                    const VoxelIndex wv{uv.i + di, uv.j + dj, uv.k + dk};
                    if (!grid.contains(wv)) continue;
                    const std::size_t w = grid.linear(wv);
                    if (settled[w] || !std::isfinite(costs.at(wv))) continue;
                    const double nd = d + step_cost(costs, uv, wv);
                    if (nd < dist[w]) {
                        dist[w] = nd;
                        parent[w] = static_cast<std::int64_t>(u);
                        heap.emplace(nd, w);
                    }
                }
    }
    if (!settled[t]) throw ComputeError("goal voxel is unreachable from the start voxel");
    result.voxels = backtrack(grid, parent, t);
    result.total_cost = dist[t];
    result.elapsed = std::chrono::steady_clock::now() - t0;
    return result;
}

Centerline refine_path(const VoxelPath& path, const Volume& costs, bool smooth) {
    if (path.voxels.empty()) throw UsageError("cannot refine an empty path");
    const Grid& g = costs.grid();
    const std::size_t n = path.voxels.size();
    std::vector<PointMM> centres(n);
    for (std::size_t i = 0; i < n; ++i) centres[i] = g.to_mm(path.voxels[i]);

    Centerline line;
    line.termination = TerminationReason::fascia_reached;
    line.points = centres;
    if (smooth)
        for (std::size_t i = 1; i + 1 < n; ++i)
            line.points[i] = (centres[i - 1] + centres[i] + centres[i + 1]) / 3.0;

    line.directions.resize(n, Vec3{1.0, 0.0, 0.0});
    for (std::size_t i = 0; i < n && n > 1; ++i) {
        const std::size_t a = i == 0 ? 0 : i - 1;
        const std::size_t b = i + 1 == n ? n - 1 : i + 1;
        const Vec3 d = normalized(line.points[b] - line.points[a]);
        if (norm(d) > 0.0) line.directions[i] = d;
    }
    line.vesselness.resize(n);
    for (std::size_t i = 0; i < n; ++i) line.vesselness[i] = 1.0 / costs.at(path.voxels[i]);
    return line;
}

json path_to_json(const Centerline& line, const VoxelPath& path, bool include_timing) {
    json j = to_json(line);
    j["total_cost"] = path.total_cost;
    j["expanded_nodes"] = path.expanded_nodes;
    if (include_timing)
        j["timing"] = {{"elapsed_ms", std::chrono::duration<double, std::milli>(path.elapsed).count()}};
    return j;
}

}  // namespace vtrace
