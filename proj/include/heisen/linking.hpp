#pragma once

// Linking forms: for an embedded k-sphere f(S^k) in R^m, a closed (k+1)-form
// supported away from f(S^k) whose integral over any filling of a nearby
// sphere is 1.  Built by induction over the equators with partitions of unity.

#include <heisen/forms.hpp>

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace heisen {

/// Quintic smoothstep 6u^5 - 15u^4 + 10u^3 clamped to [0, 1].
double smoothstep(double u);
double smoothstep_derivative(double u);

/// Nearest-point queries on a point cloud in R^dim through a uniform hash.
class PointCloud {
public:
    PointCloud() = default;
    PointCloud(int dim, std::vector<double> points, double cell);

    int dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return dim_ ? points_.size() / dim_ : 0; }
    std::span<const double> point(std::size_t i) const { return {points_.data() + i * dim_, static_cast<std::size_t>(dim_)}; }

    struct Hit {
        double distance = std::numeric_limits<double>::infinity();
        std::size_t index = static_cast<std::size_t>(-1);
    };
    /// Closest point within `limit`; distance is +inf when none is that close.
    Hit nearest(std::span<const double> p, double limit) const;
    /// Calls fn(index, distance) for every point within `radius` of p.
    void for_each_within(std::span<const double> p, double radius,
                         const std::function<void(std::size_t, double)>& fn) const;

private:
    std::uint64_t key(std::span<const int> c) const;

    int dim_ = 0;
    double cell_ = 1.0;
    std::vector<double> points_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

/// chi(p) = S((r_out - dist(p, targets)) / (r_out - r_in)): 1 within r_in of
/// the targets, 0 beyond r_out.
class Cutoff {
public:
    Cutoff(int dim, std::vector<double> targets, double r_in, double r_out);

    int dim() const noexcept { return cloud_.dim(); }
    double r_in() const noexcept { return r_in_; }
    double r_out() const noexcept { return r_out_; }
    const PointCloud& targets() const noexcept { return cloud_; }

    double value(std::span<const double> p) const;
    /// Value and gradient; the gradient of the distance is taken towards the nearest target.
    double value_gradient(std::span<const double> p, std::span<double> grad) const;

private:
    PointCloud cloud_;
    double r_in_;
    double r_out_;
};

/// A cutoff sampled on a grid as a 0-form field.
struct CutoffField {
    FormField field;
    double r_in = 0.0;
    double r_out = 0.0;
};

CutoffField smooth_cutoff(int dim, std::span<const double> targets, const GridSpec& grid, double r_in, double r_out);

/// Dense samples of f: S^k -> R^m.  Parameters are unit vectors of R^{k+1};
/// the closed upper hemisphere has last parameter coordinate >= 0 and the
/// equator S^{k-1} sits in it as u -> (u, 0).
class EmbeddedSphere {
public:
    using Map = std::function<void(std::span<const double> u, std::span<double> out)>;

    /// `resolution` is the number of samples along a great circle (k >= 1).
    static EmbeddedSphere sample(int k, int m, Map map, int resolution);

    int k() const noexcept { return k_; }
    int m() const noexcept { return m_; }
    int resolution() const noexcept { return resolution_; }
    const Map& map() const noexcept { return map_; }
    std::size_t size() const noexcept { return side_.size(); }

    std::span<const double> param(std::size_t i) const { return {params_.data() + i * (k_ + 1), static_cast<std::size_t>(k_ + 1)}; }
    std::span<const double> image(std::size_t i) const { return {images_.data() + i * m_, static_cast<std::size_t>(m_)}; }
    const std::vector<double>& images() const noexcept { return images_; }
    /// +1 upper open hemisphere, -1 lower, 0 equator.
    int side(std::size_t i) const { return side_[i]; }

    /// Images of the closed hemisphere: side >= 0 for +1, side <= 0 for -1.
    std::vector<double> hemisphere_images(int sign) const;

    /// The restriction to the equator, as an embedded (k-1)-sphere.
    EmbeddedSphere equator() const;

    /// Smallest image distance among sample pairs at least three parameter
    /// steps apart (restricted to pairs closer than a few sample spacings).
    double injectivity_margin() const noexcept { return margin_; }
    double sample_spacing() const noexcept { return spacing_; }

private:
    int k_ = 0;
    int m_ = 0;
    int resolution_ = 0;
    Map map_;
    std::vector<double> params_;
    std::vector<double> images_;
    std::vector<int> side_;
    double margin_ = 0.0;
    double spacing_ = 0.0;
};

/// Radii used by the construction.  The base cutoff around f(+1) uses
/// base_inner * sep and base_outer * sep with sep = |f(+1) - f(-1)|.  At each
/// inductive level the tube radius is rho = max(clearance / 2, 3h); the tube
/// cutoff runs from tube_inner * rho to rho and the hemisphere cutoffs from
/// hemi_inner * rho to hemi_outer * rho.
struct LinkingParams {
    int points = 65;
    std::optional<GridSpec> grid;
    double base_inner = 0.25;
    double base_outer = 0.45;
    double tube_inner = 0.7;
    double hemi_inner = 0.6;
    double hemi_outer = 1.6;
    double min_denominator = 1e-3;
};

/// Per-level record of the construction (outermost level last).
struct LinkingLevel {
    int k = 0;
    double rho = 0.0;
    double clearance = 0.0;
    double denominator_min = 1.0;
};

struct LinkingForm {
    int k = 0;
    int m = 0;
    /// Degree k+1, compactly supported on its grid.
    FormField kappa;
    /// Minimum distance from nodes where kappa is nonzero to the sphere samples.
    double clearance = 0.0;
    /// ||d kappa||_inf on the grid.
    double closedness_residual = 0.0;
    /// Sign s in kappa = s d sigma, fixed so that fillings integrate to +1.
    int orientation = 1;
    std::vector<LinkingLevel> levels;
    /// Pointwise evaluation of the smooth form the grid field discretizes;
    /// empty for forms read back from disk.
    std::optional<FormFunction> exact;
};

LinkingForm construct_kappa_base(const EmbeddedSphere& f, const LinkingParams& params = {});
LinkingForm construct_kappa(const EmbeddedSphere& f, const LinkingParams& params = {});

/// Distance from the nonzero nodes of `field` to the nearest point of `targets`.
double support_clearance(const FormField& field, const PointCloud& targets, double limit);

enum class KappaEvaluation { Grid, Exact };

struct LinkingIntegral {
    double value = 0.0;
    /// Smallest distance from boundary images of the filling to nonzero nodes of kappa.
    double boundary_distance = 0.0;
};

/// integral over B^{k+1} of g^* kappa on a cube grid with `points` nodes per
/// axis.  Refuses (Domain error) when g maps the unit sphere within one
/// ambient cell diagonal of a nonzero node of kappa.
LinkingIntegral linking_integral(const SmoothMap& g, const LinkingForm& kappa, int points,
                                 KappaEvaluation mode = KappaEvaluation::Grid);

} // namespace heisen
