#pragma once

// Sampled maps U ⊂ R^m -> R^d, the standard mollifier, convolution smoothing
// with its derivative formula, restricted Hölder seminorms and the pullback
// estimates built on them.

#include <heisen/forms.hpp>
#include <heisen/heisenberg.hpp>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace heisen {

/// A map sampled at the nodes of a uniform grid.  Values are either stored
/// (dense) or produced on demand from a generator evaluated at the node
/// coordinates (lazy); both represent the same node samples.
class SampledMap {
public:
    using Generator = std::function<void(std::span<const double> x, std::span<double> out)>;

    SampledMap() = default;

    static SampledMap from_values(GridSpec grid, int target_dim, std::vector<double> values, bool radially_extended = false);
    static SampledMap sample(GridSpec grid, int target_dim, const Generator& fn);
    static SampledMap lazy(GridSpec grid, int target_dim, Generator fn);

    const GridSpec& grid() const noexcept { return grid_; }
    int source_dim() const noexcept { return grid_.dim(); }
    int target_dim() const noexcept { return target_dim_; }
    bool radially_extended() const noexcept { return radially_extended_; }
    bool dense() const noexcept { return !generator_; }
    const Generator& generator() const noexcept { return generator_; }

    void value(std::size_t node, std::span<double> out) const;
    void value_at(std::span<const int> idx, std::span<double> out) const;
    /// Multilinear interpolation of the node samples; Domain error outside the grid.
    void interpolate(std::span<const double> x, std::span<double> out) const;

    /// Stored values (dense maps only).
    std::span<const double> values() const;
    SampledMap materialize() const;

private:
    GridSpec grid_;
    int target_dim_ = 0;
    bool radially_extended_ = false;
    std::vector<double> values_;
    Generator generator_;

    friend SampledMap radial_extend(const SampledMap& f);
};

/// phi(x) = c_m exp(-1 / (1 - |x|^2)) on the open unit ball of R^m.
class Mollifier {
public:
    static const Mollifier& standard(int m);

    int dim() const noexcept { return dim_; }
    /// c_m, making the integral of phi equal to one.
    double normalization() const noexcept { return normalization_; }
    /// ||D phi||_1 = integral of |grad phi|.
    double gradient_l1() const noexcept { return gradient_l1_; }

    double value(std::span<const double> x) const;
    void gradient(std::span<const double> x, std::span<double> out) const;

    explicit Mollifier(int m);

private:
    int dim_;
    double normalization_;
    double gradient_l1_;
};

/// Discrete convolution weights for phi_eps on a grid.  Offsets are integer
/// node steps z = o * h with |z| < eps.  Value weights are normalized to sum
/// to one; gradient weights eps^{-m-1} D phi(z/eps) h^m are rescaled per axis
/// so that the discrete first moment -sum z_i g_j equals delta_ij.
struct MollifierStencil {
    int dim = 0;
    double epsilon = 0.0;
    std::vector<int> reach;
    std::vector<int> offsets;
    std::vector<double> weights;
    std::vector<double> grad_weights;

    std::size_t size() const noexcept { return weights.size(); }
    std::span<const int> offset(std::size_t i) const { return {offsets.data() + i * dim, static_cast<std::size_t>(dim)}; }

    static MollifierStencil build(const GridSpec& grid, double epsilon);
};

/// f_eps at grid node `idx`.
void mollify_at(const SampledMap& f, const MollifierStencil& st, std::span<const int> idx, std::span<double> out);

/// Df_eps(x) = eps^{-m-1} sum_z (f(x - z) - f(x)) D phi(z / eps) h^m at node
/// `idx`, row-major target_dim x m.
void grad_mollified_at(const SampledMap& f, const MollifierStencil& st, std::span<const int> idx, std::span<double> jac);

/// f * phi_eps on every node whose stencil fits inside the data grid.
SampledMap mollify_map(const SampledMap& f, double epsilon);

/// Df_eps at a grid node x (x must coincide with a node).
std::vector<double> grad_mollified(const SampledMap& f, double epsilon, std::span<const double> x);

/// Nodes of `data` lying in the axis-aligned box around `ball`.
GridSpec subgrid_covering(const GridSpec& data, const Ball& ball);

/// Values and Jacobians of f_eps at the nodes of `eval` (each must be a node of f's grid).
JetField mollified_jets(const SampledMap& f, double epsilon, const GridSpec& eval);

/// f(x) = f(x / |x|) for |x| > 1 on a grid covering the ball of radius 2 with
/// the spacing of f's grid.  Dense maps are interpolated at the radial
/// projection; lazy maps compose their generator with it.
SampledMap radial_extend(const SampledMap& f);

enum class Metric { Euclidean, Koranyi };

struct SeminormQuery {
    double gamma = 1.0;
    double epsilon = 0.0;
    Metric metric = Metric::Euclidean;
    /// Pairs are restricted to nodes inside this ball when present.
    std::optional<Ball> subdomain;
    /// Only every stride-th node along each axis is used as the first point of a pair.
    int anchor_stride = 1;
};

/// max d(f(x), f(y)) / |x - y|^gamma over node pairs with 0 < |x - y| <= eps.
/// A lower bound of the true seminorm.
double holder_seminorm(const SampledMap& f, const SeminormQuery& q);

struct MollifiedPullback {
    /// Pulled-back form on the nodes covering the evaluation ball.
    FormField field;
    /// Largest coefficient over nodes inside the ball.
    double sup = 0.0;
    /// Largest pointwise Euclidean coefficient norm over nodes inside the ball.
    double sup_euclidean = 0.0;
};

struct AlphaPullback : MollifiedPullback {
    /// max |direct - double convolution| over probe nodes and components.
    double path_gap = 0.0;
    std::size_t probes = 0;
};

/// (f_eps)^* alpha for f with values in H^n, evaluated directly as alpha(f_eps)
/// applied to Df_eps, and at `probes` nodes also through the double
/// convolution eps^{-m-1} sum_z sum_w phi(f(p - z), f(p - w)) phi_eps(w) D phi(z/eps).
AlphaPullback pullback_alpha_mollified(const SampledMap& f, double epsilon, const Ball& region, std::size_t probes = 16);

/// (f_eps)^* kappa with kappa a form on the target.
MollifiedPullback pullback_form_mollified(const SampledMap& f, double epsilon, const FormFunction& kappa, const Ball& region);

/// 4^gamma ||D phi||_1 [f]_{gamma,2eps}^2 eps^{2 gamma - 1}.
double contact_pullback_bound(double gamma, double seminorm_2eps, double epsilon, double grad_l1);

/// binom(d, k) ||kappa||_inf (||D phi||_1 [f]_{gamma,eps} eps^{gamma - 1})^k, which
/// bounds every coefficient of (f_eps)^* kappa (Hadamard's inequality on the minors).
double form_pullback_bound(int k, int target_dim, double kappa_sup, double seminorm_eps, double epsilon, double gamma,
                           double grad_l1);

struct PowerFit {
    double slope = 0.0;
    double intercept = 0.0;
    /// Root-mean-square residual in log space.
    double residual = 0.0;
};

/// Least-squares fit of log(value) against log(eps).
PowerFit scaling_exponent_fit(std::span<const std::pair<double, double>> samples);

// ---------------------------------------------------------------------------
// Fixed test maps

struct TestMap {
    std::string name;
    int source_dim = 1;
    int target_dim = 3;
    SampledMap::Generator generator;
};

/// Named maps into R^{2n+1}: "constant", "affine_horizontal", "vertical",
/// "planar_disk", "horizontal_helix", "kink", "weierstrass".  `param` is the
/// Weierstrass exponent of the t coordinate (ignored by the other maps).
TestMap make_test_map(const std::string& name, int source_dim, int n, double param = 0.8);

} // namespace heisen
