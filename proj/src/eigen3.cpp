#include "vtrace/eigen3.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vtrace {

namespace {

void canonical_sign(Vec3& v) {
    int best = 0;
    for (int a = 1; a < 3; ++a)
        if (std::abs(v[a]) > std::abs(v[best])) best = a;
    if (v[best] < 0.0) v = -v;
}

}  // namespace

EigenTriple eig3_symmetric(const Mat3& m) {
    double a[3][3];
    double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) a[r][c] = 0.5 * (m(r, c) + m(c, r));

    constexpr int kMaxSweeps = 64;
    constexpr int kPairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        const double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
        const double diag = std::abs(a[0][0]) + std::abs(a[1][1]) + std::abs(a[2][2]);
        if (off == 0.0 || off <= 1e-300 || off <= diag * 1e-18) break;
        for (const auto& pq : kPairs) {
            const int p = pq[0], q = pq[1];
            const double apq = a[p][q];
            if (apq == 0.0) continue;
            const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
            const double c = 1.0 / std::sqrt(t * t + 1.0);
            const double s = t * c;
            a[p][p] -= t * apq;
            a[q][q] += t * apq;
            a[p][q] = a[q][p] = 0.0;
            const int r = 3 - p - q;
            const double arp = a[r][p], arq = a[r][q];
            a[r][p] = a[p][r] = c * arp - s * arq;
            a[r][q] = a[q][r] = s * arp + c * arq;
            for (int k = 0; k < 3; ++k) {
                const double vkp = v[k][p], vkq = v[k][q];
                v[k][p] = c * vkp - s * vkq;
                v[k][q] = s * vkp + c * vkq;
            }
        }
    }

    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        const double ax = std::abs(a[x][x]), ay = std::abs(a[y][y]);
        if (ax != ay) return ax < ay;
        return a[x][x] < a[y][y];
    });

    EigenTriple out;
    for (int i = 0; i < 3; ++i) {
        const int col = order[i];
        out.lambda[i] = a[col][col];
        Vec3 e{v[0][col], v[1][col], v[2][col]};
        e = normalized(e);
        canonical_sign(e);
        out.vectors[i] = e;
    }
    return out;
}

}  // namespace vtrace
