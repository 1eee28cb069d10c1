#pragma once

#include <vector>

#include "vtrace/geometry.hpp"
#include "vtrace/volume.hpp"

namespace vtrace {

/// Sampled 1D Gaussian and Gaussian-derivative kernels for one axis.
///
/// Kernels are applied as correlations, out(x) = sum_k w[k] * f(x + k * spacing)
/// with k in [-radius, radius], radius = ceil(3 sigma / spacing). Their
/// discrete moments are normalised so that smoothing preserves constants, the
/// first-derivative kernel is exact on linear ramps and the second-derivative
/// kernel is exact on quadratics (all in mm units).
struct DerivativeKernels {
    int radius{0};
    std::vector<double> smooth;
    std::vector<double> first;
    std::vector<double> second;

    double smooth_at(int k) const { return smooth[k + radius]; }
    double first_at(int k) const { return first[k + radius]; }
    double second_at(int k) const { return second[k + radius]; }
};

DerivativeKernels gaussian_derivative_kernels(double sigma_mm, double spacing_mm);

/// Throws UsageError("under-resolved scale") when sigma is below half the
/// smallest spacing, or not positive.
void check_scale(const Grid& grid, double sigma_mm);

/// Reflect padding ("mirror without repeating the edge"): -1 -> 1, n -> n - 2.
int reflect_index(int i, int n);

/// Hessian of the Gaussian-smoothed volume at one voxel (index addressing),
/// in intensity per mm^2. No scale normalisation is applied.
Mat3 hessian_at_scale(const Volume& v, const VoxelIndex& voxel, double sigma_mm);

/// Hessian of the smoothed volume at every voxel, computed with separable
/// passes. Components are stored per voxel in the volume's linear order.
struct HessianField {
    Grid grid;
    std::vector<float> xx, yy, zz, xy, xz, yz;

    Mat3 at(std::size_t idx) const {
        return Mat3::symmetric(xx[idx], yy[idx], zz[idx], xy[idx], xz[idx], yz[idx]);
    }
};

HessianField hessian_field(const Volume& v, double sigma_mm);

}  // namespace vtrace
