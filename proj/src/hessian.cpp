#include "vtrace/hessian.hpp"

#include <cmath>
#include <sstream>

#include "vtrace/error.hpp"
#include "vtrace/parallel.hpp"

namespace vtrace {

DerivativeKernels gaussian_derivative_kernels(double sigma_mm, double spacing_mm) {
    DerivativeKernels k;
    k.radius = static_cast<int>(std::ceil(3.0 * sigma_mm / spacing_mm));
    const int n = 2 * k.radius + 1;
    k.smooth.resize(n);
    k.first.resize(n);
    k.second.resize(n);

    const double s2 = sigma_mm * sigma_mm;
    double sum = 0.0;
    for (int i = -k.radius; i <= k.radius; ++i) {
        const double x = i * spacing_mm;
        k.smooth[i + k.radius] = std::exp(-0.5 * x * x / s2);
        sum += k.smooth[i + k.radius];
    }
    for (double& w : k.smooth) w /= sum;

    // First derivative: odd kernel, scaled so sum w[k] * x_k == 1.
    double m1 = 0.0;
    for (int i = -k.radius; i <= k.radius; ++i) {
        const double x = i * spacing_mm;
        k.first[i + k.radius] = x / s2 * k.smooth[i + k.radius];
        m1 += k.first[i + k.radius] * x;
    }
    for (double& w : k.first) w /= m1;

    // Second derivative: even kernel with zero sum and sum w[k] * x_k^2 / 2 == 1.
    double m0 = 0.0;
    for (int i = -k.radius; i <= k.radius; ++i) {
        const double x = i * spacing_mm;
        k.second[i + k.radius] = (x * x - s2) / (s2 * s2) * k.smooth[i + k.radius];
        m0 += k.second[i + k.radius];
    }
    double m2 = 0.0;
    for (int i = -k.radius; i <= k.radius; ++i) {
        const double x = i * spacing_mm;
        k.second[i + k.radius] -= m0 * k.smooth[i + k.radius];
        m2 += 0.5 * k.second[i + k.radius] * x * x;
    }
    for (double& w : k.second) w /= m2;
    return k;
}

void check_scale(const Grid& grid, double sigma_mm) {
    if (!(sigma_mm > 0.0)) throw UsageError("Gaussian scale must be positive");
    if (sigma_mm < 0.5 * grid.min_spacing()) {
        std::ostringstream os;
        os << "under-resolved scale: sigma " << sigma_mm << " mm is below half the smallest spacing ("
           << grid.min_spacing() << " mm)";
        throw UsageError(os.str());
    }
}

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

Mat3 hessian_at_scale(const Volume& v, const VoxelIndex& voxel, double sigma_mm) {
    const Grid& g = v.grid();
    check_scale(g, sigma_mm);
    if (!g.contains(voxel)) throw DataError("hessian_at_scale: voxel index out of range");
    const DerivativeKernels kx = gaussian_derivative_kernels(sigma_mm, g.spacing.x);
    const DerivativeKernels ky = gaussian_derivative_kernels(sigma_mm, g.spacing.y);
    const DerivativeKernels kz = gaussian_derivative_kernels(sigma_mm, g.spacing.z);

    double xx = 0, yy = 0, zz = 0, xy = 0, xz = 0, yz = 0;
    for (int c = -kz.radius; c <= kz.radius; ++c) {
        const int k = reflect_index(voxel.k + c, g.dims[2]);
        for (int b = -ky.radius; b <= ky.radius; ++b) {
            const int j = reflect_index(voxel.j + b, g.dims[1]);
            for (int a = -kx.radius; a <= kx.radius; ++a) {
                const int i = reflect_index(voxel.i + a, g.dims[0]);
                const double f = v.at(i, j, k);
                xx += kx.second_at(a) * ky.smooth_at(b) * kz.smooth_at(c) * f;
                yy += kx.smooth_at(a) * ky.second_at(b) * kz.smooth_at(c) * f;
                zz += kx.smooth_at(a) * ky.smooth_at(b) * kz.second_at(c) * f;
                xy += kx.first_at(a) * ky.first_at(b) * kz.smooth_at(c) * f;
                xz += kx.first_at(a) * ky.smooth_at(b) * kz.first_at(c) * f;
                yz += kx.smooth_at(a) * ky.first_at(b) * kz.first_at(c) * f;
            }
        }
    }
    return Mat3::symmetric(xx, yy, zz, xy, xz, yz);
}

namespace {

// Correlates `in` with a 1D kernel along `axis`, reflect-padded.
std::vector<float> filter_axis(const std::vector<float>& in, const Grid& g, int axis,
                               const std::vector<double>& w, int radius) {
    std::vector<float> out(in.size());
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const int n = g.dims[axis];
    const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? static_cast<std::size_t>(nx)
                                                          : static_cast<std::size_t>(nx) * ny);
    // Line starts: every voxel whose coordinate along `axis` is zero.
    const int lines_a = axis == 0 ? ny : nx;
    const int lines_b = axis == 2 ? ny : nz;
    parallel_for(0, static_cast<std::size_t>(lines_b), [&](std::size_t b) {
        std::vector<double> line(n);
        for (int a = 0; a < lines_a; ++a) {
            std::size_t base;
            if (axis == 0)
                base = g.linear(0, a, static_cast<int>(b));
            else if (axis == 1)
                base = g.linear(a, 0, static_cast<int>(b));
            else
                base = g.linear(a, static_cast<int>(b), 0);
            for (int t = 0; t < n; ++t) line[t] = in[base + t * stride];
            for (int t = 0; t < n; ++t) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k)
                    acc += w[k + radius] * line[reflect_index(t + k, n)];
                out[base + t * stride] = static_cast<float>(acc);
            }
        }
    });
    return out;
}

}  // namespace

HessianField hessian_field(const Volume& v, double sigma_mm) {
    const Grid& g = v.grid();
    check_scale(g, sigma_mm);
    const DerivativeKernels kx = gaussian_derivative_kernels(sigma_mm, g.spacing.x);
    const DerivativeKernels ky = gaussian_derivative_kernels(sigma_mm, g.spacing.y);
    const DerivativeKernels kz = gaussian_derivative_kernels(sigma_mm, g.spacing.z);

    const std::vector<float> src(v.data().begin(), v.data().end());
    auto fx = [&](const std::vector<double>& w) { return filter_axis(src, g, 0, w, kx.radius); };
    auto fy = [&](const std::vector<float>& in, const std::vector<double>& w) {
        return filter_axis(in, g, 1, w, ky.radius);
    };
    auto fz = [&](const std::vector<float>& in, const std::vector<double>& w) {
        return filter_axis(in, g, 2, w, kz.radius);
    };

    HessianField h;
    h.grid = g;
    {
        const auto gx = fx(kx.smooth);
        const auto gx_gy = fy(gx, ky.smooth);
        h.zz = fz(gx_gy, kz.second);
        h.yy = fz(fy(gx, ky.second), kz.smooth);
        h.yz = fz(fy(gx, ky.first), kz.first);
    }
    {
        const auto dx = fx(kx.first);
        h.xy = fz(fy(dx, ky.first), kz.smooth);
        h.xz = fz(fy(dx, ky.smooth), kz.first);
    }
    h.xx = fz(fy(fx(kx.second), ky.smooth), kz.smooth);
    return h;
}

}  // namespace vtrace
