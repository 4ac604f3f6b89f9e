#include <heisen/heisenberg.hpp>

#include <cmath>

namespace heisen {

HeisenbergDim::HeisenbergDim(int n) : n_(n)
{
    require(n >= 1, ErrorCode::InvalidArgument, "Heisenberg dimension n must be >= 1");
}

HPoint::HPoint(std::vector<double> x_, std::vector<double> y_, double t_) : x(std::move(x_)), y(std::move(y_)), t(t_)
{
    require(x.size() == y.size() && !x.empty(), ErrorCode::DimensionMismatch, "x and y must both have length n >= 1");
    for (std::size_t j = 0; j < x.size(); ++j) {
        require(std::isfinite(x[j]) && std::isfinite(y[j]), ErrorCode::Numerical, "non-finite Heisenberg coordinate");
    }
    require(std::isfinite(t), ErrorCode::Numerical, "non-finite Heisenberg coordinate");
}

HPoint HPoint::identity(int n)
{
    HeisenbergDim dim(n);
    return HPoint(std::vector<double>(dim.n(), 0.0), std::vector<double>(dim.n(), 0.0), 0.0);
}

HPoint HPoint::from_coords(std::span<const double> xyt)
{
    require(xyt.size() >= 3 && xyt.size() % 2 == 1, ErrorCode::DimensionMismatch, "packed coordinates need length 2n+1");
    const std::size_t n = xyt.size() / 2;
    return HPoint(std::vector<double>(xyt.begin(), xyt.begin() + n), std::vector<double>(xyt.begin() + n, xyt.begin() + 2 * n),
                  xyt[2 * n]);
}

std::vector<double> HPoint::coords() const
{
    std::vector<double> c(x);
    c.insert(c.end(), y.begin(), y.end());
    c.push_back(t);
    return c;
}

namespace {

void check_same(const HPoint& p, const HPoint& q)
{
    require(p.dim() == q.dim(), ErrorCode::DimensionMismatch, "Heisenberg points of different dimension");
}

} // namespace

HPoint group_mul(const HPoint& p, const HPoint& q)
{
    check_same(p, q);
    HPoint r = p;
    double s = 0.0;
    for (int j = 0; j < p.dim(); ++j) {
        r.x[j] += q.x[j];
        r.y[j] += q.y[j];
        s += p.y[j] * q.x[j] - p.x[j] * q.y[j];
    }
    r.t = p.t + q.t + 2.0 * s;
    return r;
}

HPoint group_inv(const HPoint& p)
{
    HPoint r = p;
    for (int j = 0; j < p.dim(); ++j) {
        r.x[j] = -r.x[j];
        r.y[j] = -r.y[j];
    }
    r.t = -r.t;
    return r;
}

double koranyi_norm(const HPoint& p)
{
    double r2 = 0.0;
    for (int j = 0; j < p.dim(); ++j) {
        r2 += p.x[j] * p.x[j] + p.y[j] * p.y[j];
    }
    return std::sqrt(std::sqrt(r2 * r2 + p.t * p.t));
}

double koranyi_dist(const HPoint& p, const HPoint& q)
{
    check_same(p, q);
    return koranyi_norm(group_mul(group_inv(q), p));
}

double phi(const HPoint& p, const HPoint& q)
{
    check_same(p, q);
    double s = 0.0;
    for (int j = 0; j < p.dim(); ++j) {
        s += q.x[j] * p.y[j] - p.x[j] * q.y[j];
    }
    return p.t - q.t + 2.0 * s;
}

double koranyi_dist_projected(const HPoint& p, const HPoint& q)
{
    check_same(p, q);
    double r2 = 0.0;
    for (int j = 0; j < p.dim(); ++j) {
        const double dx = p.x[j] - q.x[j];
        const double dy = p.y[j] - q.y[j];
        r2 += dx * dx + dy * dy;
    }
    const double v = phi(p, q);
    return std::sqrt(std::sqrt(r2 * r2 + v * v));
}

double phi(std::span<const double> p, std::span<const double> q, int n)
{
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
        s += q[j] * p[n + j] - p[j] * q[n + j];
    }
    return p[2 * n] - q[2 * n] + 2.0 * s;
}

double koranyi_dist(std::span<const double> p, std::span<const double> q, int n)
{
    double r2 = 0.0;
    for (int j = 0; j < 2 * n; ++j) {
        r2 += (p[j] - q[j]) * (p[j] - q[j]);
    }
    const double v = phi(p, q, n);
    return std::sqrt(std::sqrt(r2 * r2 + v * v));
}

void contact_alpha(std::span<const double> p, int n, std::span<double> out)
{
    // Degree-1 lexicographic basis is simply dx_1..dx_n, dy_1..dy_n, dt.
    for (int j = 0; j < n; ++j) {
        out[j] = -2.0 * p[n + j];
        out[n + j] = 2.0 * p[j];
    }
    out[2 * n] = 1.0;
}

ConstForm contact_alpha(const HPoint& p)
{
    const int n = p.dim();
    ConstForm a(2 * n + 1, 1);
    contact_alpha(p.coords(), n, a.coeffs());
    return a;
}

FormFunction contact_alpha_function(int n)
{
    HeisenbergDim dim(n);
    return {dim.ambient(), 1, [n](std::span<const double> p, std::span<double> out) { contact_alpha(p, n, out); }};
}

ConstForm d_alpha(int n)
{
    HeisenbergDim dim(n);
    ConstForm w(dim.ambient(), 2);
    for (int j = 0; j < n; ++j) {
        w += ConstForm::basis_element(dim.ambient(), {j, n + j});
    }
    return 4.0 * w;
}

} // namespace heisen
