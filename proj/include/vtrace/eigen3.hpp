#pragma once

#include <array>

#include "vtrace/geometry.hpp"

namespace vtrace {

/// Eigen-decomposition of a symmetric 3x3 matrix.
///
/// Eigenvalues are ordered by increasing absolute value (|lambda[0]| <=
/// |lambda[1]| <= |lambda[2]|); vectors[i] is the unit eigenvector of
/// lambda[i]. Each eigenvector's largest-magnitude component is non-negative,
/// the earliest axis winning ties.
struct EigenTriple {
    std::array<double, 3> lambda{};
    std::array<Vec3, 3> vectors{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
};

/// Cyclic Jacobi rotations to convergence. Degenerate spectra still produce an
/// orthonormal basis.
EigenTriple eig3_symmetric(const Mat3& m);

}  // namespace vtrace
