#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "vtrace/centerline.hpp"
#include "vtrace/geometry.hpp"
#include "vtrace/volume.hpp"

namespace vtrace {

/// Which volume the periodic re-centering samples its cross-section from.
enum class CorrectionSource { vesselness, intensity };

struct TrackerConfig {
    double step_delta_mm{1.0};
    double window_side_mm{4.0};
    int correction_interval{3};
    double max_turn_deg{60.0};
    double cross_section_side_mm{6.0};
    double cross_section_resolution_mm{0.25};
    double min_vesselness{0.01};
    int max_iterations{500};
    CorrectionSource correction_source{CorrectionSource::vesselness};

    void validate() const;
};

nlohmann::json to_json(const TrackerConfig& cfg);
/// Reads the keys present in `j` over `base`; unknown keys are rejected.
TrackerConfig tracker_config_from_json(const nlohmann::json& j, TrackerConfig base = {});

struct DirectionEstimate {
    Vec3 direction;
    /// Set when the two smallest eigenvalues of the gradient correlation
    /// matrix are too close to single out an axis.
    bool degenerate{false};
    /// Correlation-matrix eigenvalues, ascending.
    std::array<double, 3> eigenvalues{};
};

/// Relative eigenvalue gap below which the direction is flagged degenerate:
/// (l2 - l1) <= max(1e-9, kDegenerateGap * l2).
inline constexpr double kDegenerateGap = 0.1;

/// Direction minimising the mean squared projection of the gradients: the
/// eigenvector of (1/n) sum g g^T with the smallest eigenvalue. The sign is
/// chosen to agree with `orientation` when given. Needs at least 6 samples.
DirectionEstimate estimate_direction(std::span<const Vec3> gradients,
                                     std::optional<Vec3> orientation = std::nullopt);

/// Keeps `candidate` within a spherical cap of half-angle max_turn_deg around
/// `previous`, projecting onto the cap boundary inside their common plane.
/// An anti-parallel candidate yields `previous`.
Vec3 clamp_direction(const Vec3& candidate, const Vec3& previous, double max_turn_deg);

/// Square image, values(i, j) at column i (first in-plane axis) and row j.
struct Patch2D {
    int width{0};
    int height{0};
    double resolution_mm{1.0};
    std::vector<double> values;

    double operator()(int i, int j) const { return values[static_cast<std::size_t>(j) * width + i]; }
    double& operator()(int i, int j) { return values[static_cast<std::size_t>(j) * width + i]; }
};

struct CrossSection {
    Patch2D patch;
    PointMM center;
    Vec3 u;  ///< in-plane axis of patch columns
    Vec3 v;  ///< in-plane axis of patch rows
    double coverage{1.0};
};

/// Orthonormal (u, v) spanning the plane orthogonal to `normal`.
std::pair<Vec3, Vec3> in_plane_basis(const Vec3& normal);

/// Samples the plane through `center` orthogonal to `normal` on a square grid
/// of side cfg.cross_section_side_mm at cfg.cross_section_resolution_mm.
/// Sample (i, j) sits at center + (i - h) r u + (j - h) r v, h = (size - 1)/2.
/// Samples outside the volume read 0; less than 50% coverage throws DataError.
CrossSection extract_cross_section(const Volume& vol, const PointMM& center, const Vec3& normal,
                                   const TrackerConfig& cfg);

struct InPlaneOffset {
    double u_mm{0.0};
    double v_mm{0.0};
};

/// Unit gradient orientation field of a patch (central differences inside,
/// one-sided at the border); zero where the magnitude is below 1e-9.
std::vector<std::array<double, 2>> orientation_field(const Patch2D& patch);

/// Half-size of the centre-seeking template used for a patch: a quarter of the
/// patch's smaller side, so a vessel displaced by up to a quarter of the patch
/// still fits the template entirely.
int template_half_size(const Patch2D& patch);

/// Locates the vessel centre in a cross-section: the gradient orientation
/// field is cross-correlated with a template of unit vectors pointing at its
/// centre, and the offset of the best response from the patch centre is
/// returned in mm. An all-zero field gives a zero offset.
InPlaneOffset ridge_correct(const Patch2D& patch);

/// Initial tracking direction: towards `toward` when given, otherwise the
/// local direction estimate at the seed oriented into the volume interior.
Vec3 initial_direction(const Volume& vesselness, const PointMM& seed,
                       std::optional<PointMM> toward, const TrackerConfig& cfg);

/// Gradient samples of `vol` on the window lattice around `center`; lattice
/// points whose stencil leaves the volume are skipped.
std::vector<Vec3> window_gradients(const Volume& vol, const PointMM& center, const TrackerConfig& cfg);

/// Follows a vessel from `seed` through the vesselness volume. `fascia`, when
/// given, is a same-geometry label volume (> 0.5 = muscle side) that stops
/// tracking once a point enters it.
Centerline track(const Volume& vesselness, const Volume& intensity, const PointMM& seed,
                 const Vec3& initial_dir, const Volume* fascia, const TrackerConfig& cfg);

}  // namespace vtrace
