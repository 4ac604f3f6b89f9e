#pragma once

// Heisenberg group H^n = R^{2n+1} with coordinates (x, y, t), the Koranyi
// gauge metric and the standard contact form.

#include <heisen/forms.hpp>

#include <span>
#include <vector>

namespace heisen {

/// Dimension parameter n >= 1 of H^n.
class HeisenbergDim {
public:
    explicit HeisenbergDim(int n);
    int n() const noexcept { return n_; }
    /// Topological dimension 2n + 1.
    int ambient() const noexcept { return 2 * n_ + 1; }
    int t_axis() const noexcept { return 2 * n_; }

private:
    int n_;
};

struct HPoint {
    std::vector<double> x;
    std::vector<double> y;
    double t = 0.0;

    HPoint() = default;
    HPoint(std::vector<double> x, std::vector<double> y, double t);

    static HPoint identity(int n);
    /// From packed coordinates (x_1..x_n, y_1..y_n, t).
    static HPoint from_coords(std::span<const double> xyt);

    int dim() const noexcept { return static_cast<int>(x.size()); }
    std::vector<double> coords() const;
};

HPoint group_mul(const HPoint& p, const HPoint& q);
HPoint group_inv(const HPoint& p);

/// ||(x,y,t)||_K = (|(x,y)|^4 + t^2)^{1/4}
double koranyi_norm(const HPoint& p);

/// d_K(p, q) = ||q^{-1} * p||_K.
double koranyi_dist(const HPoint& p, const HPoint& q);

/// d_K through the projection formula (|pi(p) - pi(q)|^4 + phi(p,q)^2)^{1/4}.
double koranyi_dist_projected(const HPoint& p, const HPoint& q);

/// phi(p, q) = t - t' + 2 sum_j (x'_j y_j - x_j y'_j).
double phi(const HPoint& p, const HPoint& q);

// Packed-coordinate variants for inner loops; n is the Heisenberg dimension.
double phi(std::span<const double> p, std::span<const double> q, int n);
double koranyi_dist(std::span<const double> p, std::span<const double> q, int n);

/// alpha = dt + 2 sum_j (x_j dy_j - y_j dx_j) at p, as a covector on R^{2n+1}.
ConstForm contact_alpha(const HPoint& p);
void contact_alpha(std::span<const double> p, int n, std::span<double> out);
FormFunction contact_alpha_function(int n);

/// d alpha = 4 sum_j dx_j ^ dy_j.
ConstForm d_alpha(int n);

} // namespace heisen
