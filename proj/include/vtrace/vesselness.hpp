#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vtrace/eigen3.hpp"
#include "vtrace/volume.hpp"

namespace vtrace {

enum class Polarity { bright_on_dark, dark_on_bright };

std::string_view to_string(Polarity p);
Polarity polarity_from_string(std::string_view name);

/// Frangi vesselness sensitivities and the Hessian scale.
struct FrangiParams {
    double alpha{0.5};   ///< plate-vs-line sensitivity (R_A)
    double beta{10.0};   ///< blob sensitivity (R_B)
    double c{500.0};     ///< structureness sensitivity (S)
    double sigma_mm{1.0};
    Polarity polarity{Polarity::bright_on_dark};

    void validate() const;

    /// Subcutaneous tracking preset: alpha 0.5, beta 10, c 500.
    static FrangiParams subcutaneous();
    /// Intramuscular cost preset: alpha 0.5, beta 0.5, c 100.
    static FrangiParams intramuscular();
    /// Looks up a preset by name; throws UsageError for unknown names.
    static FrangiParams preset(std::string_view name);
};

nlohmann::json to_json(const FrangiParams& p);

/// Frangi's vesselness from ordered eigenvalues, in [0, 1).
///
/// Returns 0 when lambda2 > 0 or lambda3 > 0 (bright structures; signs are
/// flipped first for dark-on-bright), and 0 when lambda2 or lambda3 is zero
/// since there is no line-like structure to measure. Otherwise
///   (1 - exp(-Ra^2 / 2a^2)) * exp(-Rb^2 / 2b^2) * (1 - exp(-S^2 / 2c^2))
/// with Ra = |l2|/|l3|, Rb = |l1|/sqrt(|l2 l3|), S = sqrt(l1^2 + l2^2 + l3^2).
double frangi_vesselness(const EigenTriple& eig, const FrangiParams& p);
double frangi_vesselness(double lambda1, double lambda2, double lambda3, const FrangiParams& p);

/// Per-voxel Hessian -> eigenvalues -> vesselness at params.sigma_mm. The
/// Hessian is scale-normalised by sigma^2 before the eigen-analysis.
/// Input must be normalized-unit; output kind is vesselness.
Volume enhance_volume(const Volume& v, const FrangiParams& p);

/// Voxel-wise maximum of enhance_volume over several scales (params.sigma_mm
/// is ignored).
Volume enhance_volume_multiscale(const Volume& v, const FrangiParams& p,
                                 std::span<const double> sigmas_mm);

/// Affine map of the global [min, max] onto [0, 1]; all zeros when max == min.
Volume normalize_vesselness(const Volume& v);

}  // namespace vtrace
