#include "vtrace/vesselness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vtrace/error.hpp"
#include "vtrace/hessian.hpp"
#include "vtrace/parallel.hpp"

namespace vtrace {

std::string_view to_string(Polarity p) {
    return p == Polarity::bright_on_dark ? "bright-on-dark" : "dark-on-bright";
}

Polarity polarity_from_string(std::string_view name) {
    if (name == "bright-on-dark") return Polarity::bright_on_dark;
    if (name == "dark-on-bright") return Polarity::dark_on_bright;
    throw UsageError("unknown polarity '" + std::string(name) + "'");
}

void FrangiParams::validate() const {
    if (!(alpha > 0.0) || !(beta > 0.0) || !(c > 0.0))
        throw UsageError("Frangi alpha, beta and c must be positive");
    if (!(sigma_mm > 0.0)) throw UsageError("Frangi sigma must be positive");
}

FrangiParams FrangiParams::subcutaneous() { return {0.5, 10.0, 500.0, 1.0, Polarity::bright_on_dark}; }

FrangiParams FrangiParams::intramuscular() { return {0.5, 0.5, 100.0, 1.0, Polarity::bright_on_dark}; }

FrangiParams FrangiParams::preset(std::string_view name) {
    if (name == "subcutaneous") return subcutaneous();
    if (name == "intramuscular") return intramuscular();
    throw UsageError("unknown preset '" + std::string(name) + "' (expected subcutaneous or intramuscular)");
}

nlohmann::json to_json(const FrangiParams& p) {
    return {{"alpha", p.alpha},
            {"beta", p.beta},
            {"c", p.c},
            {"sigma_mm", p.sigma_mm},
            {"polarity", std::string(to_string(p.polarity))}};
}

double frangi_vesselness(double l1, double l2, double l3, const FrangiParams& p) {
    if (p.polarity == Polarity::dark_on_bright) {
        l1 = -l1;
        l2 = -l2;
        l3 = -l3;
    }
    if (l2 > 0.0 || l3 > 0.0) return 0.0;
    if (l3 == 0.0 || l2 == 0.0) return 0.0;
    const double ra = std::abs(l2) / std::abs(l3);
    const double rb = std::abs(l1) / std::sqrt(std::abs(l2 * l3));
    const double s2 = l1 * l1 + l2 * l2 + l3 * l3;
    const double v = (1.0 - std::exp(-ra * ra / (2.0 * p.alpha * p.alpha))) *
                     std::exp(-rb * rb / (2.0 * p.beta * p.beta)) *
                     (1.0 - std::exp(-s2 / (2.0 * p.c * p.c)));
    // Each factor is < 1 analytically; rounding can still reach 1.0.
    return std::min(v, std::nextafter(1.0, 0.0));
}

double frangi_vesselness(const EigenTriple& eig, const FrangiParams& p) {
    return frangi_vesselness(eig.lambda[0], eig.lambda[1], eig.lambda[2], p);
}

namespace {

void require_normalized(const Volume& v) {
    if (v.kind() != ValueKind::normalized_unit)
        throw UsageError("vessel enhancement expects a normalized-unit volume, got " +
                         std::string(to_string(v.kind())));
}

void enhance_into(const Volume& v, const FrangiParams& p, double sigma, std::span<float> out,
                  bool take_max) {
    const HessianField h = hessian_field(v, sigma);
    const double scale = sigma * sigma;
    parallel_for(0, v.size(), [&](std::size_t idx) {
        Mat3 m = h.at(idx);
        double mag = 0.0;
        for (auto& row : m.m)
            for (double& e : row) {
                e *= scale;
                mag += std::abs(e);
            }
        const double value = mag == 0.0 ? 0.0 : frangi_vesselness(eig3_symmetric(m), p);
        const auto f = static_cast<float>(value);
        out[idx] = take_max ? std::max(out[idx], f) : f;
    });
}

}  // namespace

Volume enhance_volume(const Volume& v, const FrangiParams& p) {
    require_normalized(v);
    p.validate();
    Volume out(v.grid(), ValueKind::vesselness);
    enhance_into(v, p, p.sigma_mm, out.data(), false);
    return out;
}

Volume enhance_volume_multiscale(const Volume& v, const FrangiParams& p,
                                 std::span<const double> sigmas_mm) {
    require_normalized(v);
    p.validate();
    if (sigmas_mm.empty()) throw UsageError("multi-scale enhancement needs at least one scale");
    Volume out(v.grid(), ValueKind::vesselness);
    for (double s : sigmas_mm) check_scale(v.grid(), s);
    for (double s : sigmas_mm) enhance_into(v, p, s, out.data(), true);
    return out;
}

Volume normalize_vesselness(const Volume& v) {
    if (v.kind() != ValueKind::vesselness)
        throw UsageError("normalize_vesselness expects a vesselness volume, got " +
                         std::string(to_string(v.kind())));
    const auto src = v.data();
    const auto [lo_it, hi_it] = std::minmax_element(src.begin(), src.end());
    const double lo = *lo_it, hi = *hi_it;
    Volume out(v.grid(), ValueKind::normalized_unit);
    auto dst = out.data();
    if (hi == lo) return out;
    const double span = hi - lo;
    for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] = static_cast<float>(std::clamp((src[i] - lo) / span, 0.0, 1.0));
    return out;
}

}  // namespace vtrace
