#include <heisen/mollify.hpp>

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

namespace heisen {

// ---------------------------------------------------------------------------
// SampledMap

SampledMap SampledMap::from_values(GridSpec grid, int target_dim, std::vector<double> values, bool radially_extended)
{
    require(target_dim >= 1, ErrorCode::InvalidArgument, "map target dimension must be positive");
    require(values.size() == grid.node_count() * static_cast<std::size_t>(target_dim), ErrorCode::DimensionMismatch,
            "sampled values do not match grid x target dimension");
    for (double v : values) {
        require(std::isfinite(v), ErrorCode::Numerical, "sampled map values must be finite");
    }
    SampledMap m;
    m.grid_ = std::move(grid);
    m.target_dim_ = target_dim;
    m.values_ = std::move(values);
    m.radially_extended_ = radially_extended;
    return m;
}

SampledMap SampledMap::sample(GridSpec grid, int target_dim, const Generator& fn)
{
    std::vector<double> values(grid.node_count() * static_cast<std::size_t>(target_dim));
    std::vector<double> x(grid.dim());
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        grid.node_point(i, x);
        fn(x, {values.data() + i * target_dim, static_cast<std::size_t>(target_dim)});
    }
    return from_values(std::move(grid), target_dim, std::move(values));
}

SampledMap SampledMap::lazy(GridSpec grid, int target_dim, Generator fn)
{
    require(target_dim >= 1, ErrorCode::InvalidArgument, "map target dimension must be positive");
    require(static_cast<bool>(fn), ErrorCode::InvalidArgument, "lazy map needs a generator");
    SampledMap m;
    m.grid_ = std::move(grid);
    m.target_dim_ = target_dim;
    m.generator_ = std::move(fn);
    return m;
}

void SampledMap::value(std::size_t node, std::span<double> out) const
{
    if (generator_) {
        double x[24];
        grid_.node_point(node, {x, static_cast<std::size_t>(grid_.dim())});
        generator_({x, static_cast<std::size_t>(grid_.dim())}, out);
        return;
    }
    const double* v = values_.data() + node * target_dim_;
    std::copy(v, v + target_dim_, out.begin());
}

void SampledMap::value_at(std::span<const int> idx, std::span<double> out) const
{
    if (generator_) {
        double x[24];
        for (int a = 0; a < grid_.dim(); ++a) {
            x[a] = grid_.coordinate(a, idx[a]);
        }
        generator_({x, static_cast<std::size_t>(grid_.dim())}, out);
        return;
    }
    const double* v = values_.data() + grid_.linear_index(idx) * target_dim_;
    std::copy(v, v + target_dim_, out.begin());
}

void SampledMap::interpolate(std::span<const double> x, std::span<double> out) const
{
    const int d = grid_.dim();
    int base[24];
    double frac[24];
    for (int a = 0; a < d; ++a) {
        const double s = (x[a] - grid_.lo()[a]) / grid_.spacing(a);
        const int n = grid_.points()[a];
        require(s >= -1e-9 && s <= (n - 1) + 1e-9, ErrorCode::Domain, "interpolation point outside the sampled grid");
        int i = std::clamp(static_cast<int>(std::floor(s)), 0, n - 2);
        base[a] = i;
        frac[a] = std::clamp(s - i, 0.0, 1.0);
    }
    std::fill(out.begin(), out.begin() + target_dim_, 0.0);
    std::vector<double> tmp(target_dim_);
    int idx[24];
    for (int c = 0; c < (1 << d); ++c) {
        double w = 1.0;
        for (int a = 0; a < d; ++a) {
            const int bit = (c >> a) & 1;
            w *= bit ? frac[a] : 1.0 - frac[a];
            idx[a] = base[a] + bit;
        }
        if (w == 0.0) {
            continue;
        }
        value_at({idx, static_cast<std::size_t>(d)}, tmp);
        for (int k = 0; k < target_dim_; ++k) {
            out[k] += w * tmp[k];
        }
    }
}

std::span<const double> SampledMap::values() const
{
    require(!generator_, ErrorCode::InvalidArgument, "lazy sampled map has no stored values");
    return values_;
}

SampledMap SampledMap::materialize() const
{
    if (!generator_) {
        return *this;
    }
    SampledMap m = sample(grid_, target_dim_, generator_);
    m.radially_extended_ = radially_extended_;
    return m;
}

// ---------------------------------------------------------------------------
// Mollifier

namespace {

double bump(double r2)
{
    if (r2 >= 1.0) {
        return 0.0;
    }
    return std::exp(-1.0 / (1.0 - r2));
}

double sphere_area(int m)
{
    // |S^{m-1}| = 2 pi^{m/2} / Gamma(m/2)
    return 2.0 * std::pow(boost::math::constants::pi<double>(), 0.5 * m) / std::tgamma(0.5 * m);
}

} // namespace

Mollifier::Mollifier(int m) : dim_(m)
{
    require(m >= 1 && m <= 24, ErrorCode::InvalidArgument, "mollifier dimension must lie in [1, 24]");
    using boost::math::quadrature::gauss_kronrod;
    const double mass = gauss_kronrod<double, 61>::integrate(
        [m](double r) { return bump(r * r) * std::pow(r, m - 1); }, 0.0, 1.0, 20, 1e-15);
    normalization_ = 1.0 / (sphere_area(m) * mass);
    const double grad = gauss_kronrod<double, 61>::integrate(
        [m](double r) {
            const double s = 1.0 - r * r;
            if (s <= 1e-12) {
                return 0.0;
            }
            return bump(r * r) * 2.0 * r / (s * s) * std::pow(r, m - 1);
        },
        0.0, 1.0, 20, 1e-15);
    gradient_l1_ = normalization_ * sphere_area(m) * grad;
}

const Mollifier& Mollifier::standard(int m)
{
    static std::mutex mu;
    static std::map<int, std::unique_ptr<Mollifier>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[m];
    if (!slot) {
        slot = std::make_unique<Mollifier>(m);
    }
    return *slot;
}

double Mollifier::value(std::span<const double> x) const
{
    double r2 = 0.0;
    for (int a = 0; a < dim_; ++a) {
        r2 += x[a] * x[a];
    }
    return normalization_ * bump(r2);
}

void Mollifier::gradient(std::span<const double> x, std::span<double> out) const
{
    double r2 = 0.0;
    for (int a = 0; a < dim_; ++a) {
        r2 += x[a] * x[a];
    }
    const double s = 1.0 - r2;
    const double f = (s <= 0.0) ? 0.0 : normalization_ * bump(r2) * (-2.0 / (s * s));
    for (int a = 0; a < dim_; ++a) {
        out[a] = f * x[a];
    }
}

MollifierStencil MollifierStencil::build(const GridSpec& grid, double epsilon)
{
    const int m = grid.dim();
    require(epsilon > 0.0 && std::isfinite(epsilon), ErrorCode::InvalidArgument, "epsilon must be positive");
    require(epsilon >= 2.0 * grid.max_spacing() * (1.0 - 1e-12), ErrorCode::Domain,
            "epsilon is below the grid resolution (needs at least two grid spacings)");
    const Mollifier& phi = Mollifier::standard(m);

    MollifierStencil st;
    st.dim = m;
    st.epsilon = epsilon;
    st.reach.resize(m);
    double cell = 1.0;
    for (int a = 0; a < m; ++a) {
        st.reach[a] = static_cast<int>(std::ceil(epsilon / grid.spacing(a))) - 1;
        if ((st.reach[a] + 1) * grid.spacing(a) < epsilon) {
            ++st.reach[a];
        }
        cell *= grid.spacing(a);
    }

    std::vector<int> o(m);
    for (int a = 0; a < m; ++a) {
        o[a] = -st.reach[a];
    }
    std::vector<double> u(m);
    std::vector<double> g(m);
    double total = 0.0;
    const double gscale = std::pow(epsilon, -m - 1) * cell;
    for (;;) {
        double r2 = 0.0;
        for (int a = 0; a < m; ++a) {
            u[a] = o[a] * grid.spacing(a) / epsilon;
            r2 += u[a] * u[a];
        }
        if (r2 < 1.0) {
            const double w = phi.value(u);
            if (w > 0.0) {
                st.offsets.insert(st.offsets.end(), o.begin(), o.end());
                st.weights.push_back(w);
                total += w;
                phi.gradient(u, g);
                for (int a = 0; a < m; ++a) {
                    st.grad_weights.push_back(g[a] * gscale);
                }
            }
        }
        int a = m - 1;
        while (a >= 0 && ++o[a] > st.reach[a]) {
            o[a] = -st.reach[a];
            --a;
        }
        if (a < 0) {
            break;
        }
    }
    require(!st.weights.empty(), ErrorCode::Domain, "mollifier stencil is empty at this resolution");
    for (double& w : st.weights) {
        w /= total;
    }
    for (int j = 0; j < m; ++j) {
        double moment = 0.0;
        for (std::size_t i = 0; i < st.weights.size(); ++i) {
            moment -= st.offsets[i * m + j] * grid.spacing(j) * st.grad_weights[i * m + j];
        }
        require(moment > 0.0, ErrorCode::Numerical, "degenerate mollifier derivative stencil");
        for (std::size_t i = 0; i < st.weights.size(); ++i) {
            st.grad_weights[i * m + j] /= moment;
        }
    }
    return st;
}

namespace {

void check_margin(const SampledMap& f, const MollifierStencil& st, std::span<const int> idx)
{
    require(st.dim == f.source_dim(), ErrorCode::DimensionMismatch, "stencil and map dimensions differ");
    for (int a = 0; a < st.dim; ++a) {
        if (idx[a] - st.reach[a] < 0 || idx[a] + st.reach[a] > f.grid().points()[a] - 1) {
            fail(ErrorCode::Domain, "insufficient margin: the epsilon-ball leaves the sampled grid");
        }
    }
}

} // namespace

void mollify_at(const SampledMap& f, const MollifierStencil& st, std::span<const int> idx, std::span<double> out)
{
    check_margin(f, st, idx);
    const int m = st.dim;
    const int d = f.target_dim();
    std::fill(out.begin(), out.begin() + d, 0.0);
    int q[24];
    std::vector<double> v(d);
    for (std::size_t s = 0; s < st.size(); ++s) {
        auto o = st.offset(s);
        for (int a = 0; a < m; ++a) {
            q[a] = idx[a] - o[a];
        }
        f.value_at({q, static_cast<std::size_t>(m)}, v);
        for (int k = 0; k < d; ++k) {
            out[k] += st.weights[s] * v[k];
        }
    }
}

void grad_mollified_at(const SampledMap& f, const MollifierStencil& st, std::span<const int> idx, std::span<double> jac)
{
    check_margin(f, st, idx);
    const int m = st.dim;
    const int d = f.target_dim();
    std::fill(jac.begin(), jac.begin() + d * m, 0.0);
    std::vector<double> center(d);
    std::vector<double> v(d);
    f.value_at(idx, center);
    int q[24];
    for (std::size_t s = 0; s < st.size(); ++s) {
        auto o = st.offset(s);
        for (int a = 0; a < m; ++a) {
            q[a] = idx[a] - o[a];
        }
        f.value_at({q, static_cast<std::size_t>(m)}, v);
        const double* g = st.grad_weights.data() + s * m;
        for (int k = 0; k < d; ++k) {
            const double diff = v[k] - center[k];
            for (int a = 0; a < m; ++a) {
                jac[k * m + a] += diff * g[a];
            }
        }
    }
}

SampledMap mollify_map(const SampledMap& f, double epsilon)
{
    const GridSpec& g = f.grid();
    const MollifierStencil st = MollifierStencil::build(g, epsilon);
    const int m = g.dim();
    std::vector<double> lo(m), hi(m);
    std::vector<int> pts(m);
    for (int a = 0; a < m; ++a) {
        pts[a] = g.points()[a] - 2 * st.reach[a];
        require(pts[a] >= 2, ErrorCode::Domain, "insufficient margin: no node keeps its epsilon-ball inside the grid");
        lo[a] = g.coordinate(a, st.reach[a]);
        hi[a] = g.coordinate(a, g.points()[a] - 1 - st.reach[a]);
    }
    GridSpec out_grid(lo, hi, pts);
    const int d = f.target_dim();
    std::vector<double> values(out_grid.node_count() * d);
    std::vector<int> idx(m);
    for (std::size_t i = 0; i < out_grid.node_count(); ++i) {
        out_grid.multi_index(i, idx);
        for (int a = 0; a < m; ++a) {
            idx[a] += st.reach[a];
        }
        mollify_at(f, st, idx, {values.data() + i * d, static_cast<std::size_t>(d)});
    }
    return SampledMap::from_values(std::move(out_grid), d, std::move(values));
}

namespace {

std::vector<int> node_of(const GridSpec& g, std::span<const double> x)
{
    std::vector<int> idx(g.dim());
    for (int a = 0; a < g.dim(); ++a) {
        const double s = (x[a] - g.lo()[a]) / g.spacing(a);
        const double r = std::round(s);
        require(std::abs(s - r) <= 1e-6 && r >= 0 && r <= g.points()[a] - 1, ErrorCode::Domain,
                "point is not a node of the sampled grid");
        idx[a] = static_cast<int>(r);
    }
    return idx;
}

} // namespace

std::vector<double> grad_mollified(const SampledMap& f, double epsilon, std::span<const double> x)
{
    const MollifierStencil st = MollifierStencil::build(f.grid(), epsilon);
    std::vector<double> jac(static_cast<std::size_t>(f.target_dim()) * f.source_dim());
    grad_mollified_at(f, st, node_of(f.grid(), x), jac);
    return jac;
}

GridSpec subgrid_covering(const GridSpec& data, const Ball& ball)
{
    const int m = data.dim();
    std::vector<double> lo(m), hi(m);
    std::vector<int> pts(m);
    for (int a = 0; a < m; ++a) {
        const double c = ball.center.empty() ? 0.0 : ball.center[a];
        const double h = data.spacing(a);
        int i0 = static_cast<int>(std::ceil((c - ball.radius - data.lo()[a]) / h - 1e-9));
        int i1 = static_cast<int>(std::floor((c + ball.radius - data.lo()[a]) / h + 1e-9));
        i0 = std::max(i0, 0);
        i1 = std::min(i1, data.points()[a] - 1);
        require(i1 - i0 >= 1, ErrorCode::Domain, "evaluation ball holds fewer than two nodes per axis");
        lo[a] = data.coordinate(a, i0);
        hi[a] = data.coordinate(a, i1);
        pts[a] = i1 - i0 + 1;
    }
    return GridSpec(lo, hi, pts);
}

JetField mollified_jets(const SampledMap& f, double epsilon, const GridSpec& eval)
{
    require(eval.dim() == f.source_dim(), ErrorCode::DimensionMismatch, "evaluation grid dimension differs from map");
    const MollifierStencil st = MollifierStencil::build(f.grid(), epsilon);
    const int m = eval.dim();
    const int d = f.target_dim();
    JetField jf;
    jf.grid = eval;
    jf.target_dim = d;
    jf.values.resize(eval.node_count() * d);
    jf.jacobians.resize(eval.node_count() * d * m);
    std::vector<double> x(m);
    for (std::size_t i = 0; i < eval.node_count(); ++i) {
        eval.node_point(i, x);
        const auto idx = node_of(f.grid(), x);
        mollify_at(f, st, idx, {jf.values.data() + i * d, static_cast<std::size_t>(d)});
        grad_mollified_at(f, st, idx, {jf.jacobians.data() + i * d * m, static_cast<std::size_t>(d * m)});
    }
    return jf;
}

SampledMap radial_extend(const SampledMap& f)
{
    const GridSpec& g = f.grid();
    const int m = g.dim();
    const double h = g.spacing(0);
    for (int a = 0; a < m; ++a) {
        require(g.lo()[a] <= -1.0 + 1e-9 && g.hi()[a] >= 1.0 - 1e-9, ErrorCode::Domain,
                "radial extension needs a grid covering the closed unit ball");
        require(std::abs(g.spacing(a) - h) <= 1e-12 * h, ErrorCode::InvalidArgument,
                "radial extension needs equal spacing on every axis");
    }
    GridSpec out_grid = GridSpec::centered(m, 2.0, h);
    const int d = f.target_dim();

    if (!f.dense()) {
        SampledMap::Generator inner = f.generator();
        SampledMap out = SampledMap::lazy(out_grid, d, [inner, m](std::span<const double> x, std::span<double> o) {
            double r2 = 0.0;
            for (int a = 0; a < m; ++a) {
                r2 += x[a] * x[a];
            }
            if (r2 <= 1.0) {
                inner(x, o);
                return;
            }
            const double r = std::sqrt(r2);
            double y[24];
            for (int a = 0; a < m; ++a) {
                y[a] = x[a] / r;
            }
            inner({y, static_cast<std::size_t>(m)}, o);
        });
        out.radially_extended_ = true;
        return out;
    }

    std::vector<double> values(out_grid.node_count() * d);
    std::vector<double> x(m);
    for (std::size_t i = 0; i < out_grid.node_count(); ++i) {
        out_grid.node_point(i, x);
        double r2 = 0.0;
        for (double c : x) {
            r2 += c * c;
        }
        if (r2 > 1.0) {
            const double r = std::sqrt(r2);
            for (double& c : x) {
                c /= r;
            }
        }
        f.interpolate(x, {values.data() + i * d, static_cast<std::size_t>(d)});
    }
    return SampledMap::from_values(std::move(out_grid), d, std::move(values), true);
}

// ---------------------------------------------------------------------------
// Seminorms

double holder_seminorm(const SampledMap& f, const SeminormQuery& q)
{
    require(q.gamma > 0.0 && q.gamma <= 1.0, ErrorCode::InvalidArgument, "Hölder exponent must lie in (0, 1]");
    require(q.epsilon > 0.0, ErrorCode::InvalidArgument, "seminorm scale must be positive");
    require(q.anchor_stride >= 1, ErrorCode::InvalidArgument, "anchor stride must be positive");
    const GridSpec& g = f.grid();
    const int m = g.dim();
    const int d = f.target_dim();
    int n = 0;
    if (q.metric == Metric::Koranyi) {
        require(d >= 3 && d % 2 == 1, ErrorCode::DimensionMismatch, "Koranyi seminorm needs values in R^{2n+1}");
        n = (d - 1) / 2;
    }

    // Lexicographically positive offsets with 0 < |o h| <= eps.
    std::vector<int> reach(m);
    for (int a = 0; a < m; ++a) {
        reach[a] = static_cast<int>(std::floor(q.epsilon / g.spacing(a) + 1e-9));
    }
    std::vector<int> offsets;
    std::vector<double> lengths;
    std::vector<int> o(m);
    for (int a = 0; a < m; ++a) {
        o[a] = -reach[a];
    }
    for (;;) {
        int first = 0;
        for (int a = 0; a < m && first == 0; ++a) {
            first = o[a];
        }
        if (first > 0) {
            double len2 = 0.0;
            for (int a = 0; a < m; ++a) {
                len2 += (o[a] * g.spacing(a)) * (o[a] * g.spacing(a));
            }
            const double len = std::sqrt(len2);
            if (len <= q.epsilon * (1.0 + 1e-12)) {
                offsets.insert(offsets.end(), o.begin(), o.end());
                lengths.push_back(std::pow(len, q.gamma));
            }
        }
        int a = m - 1;
        while (a >= 0 && ++o[a] > reach[a]) {
            o[a] = -reach[a];
            --a;
        }
        if (a < 0) {
            break;
        }
    }
    require(!lengths.empty(), ErrorCode::Domain, "no admissible node pair: epsilon is below the grid spacing");

    auto inside = [&](std::span<const int> idx) {
        if (!q.subdomain) {
            return true;
        }
        double r2 = 0.0;
        for (int a = 0; a < m; ++a) {
            const double c = q.subdomain->center.empty() ? 0.0 : q.subdomain->center[a];
            const double x = g.coordinate(a, idx[a]) - c;
            r2 += x * x;
        }
        return r2 <= q.subdomain->radius * q.subdomain->radius * (1.0 + 1e-12);
    };

    double best = 0.0;
    std::vector<int> idx(m), jdx(m);
    std::vector<double> u(d), v(d);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        g.multi_index(i, idx);
        bool anchor = true;
        for (int a = 0; a < m; ++a) {
            anchor = anchor && (idx[a] % q.anchor_stride == 0);
        }
        if (!anchor || !inside(idx)) {
            continue;
        }
        f.value_at(idx, u);
        for (std::size_t s = 0; s < lengths.size(); ++s) {
            bool ok = true;
            for (int a = 0; a < m; ++a) {
                jdx[a] = idx[a] + offsets[s * m + a];
                ok = ok && jdx[a] >= 0 && jdx[a] < g.points()[a];
            }
            if (!ok || !inside(jdx)) {
                continue;
            }
            f.value_at(jdx, v);
            double dist = 0.0;
            if (q.metric == Metric::Koranyi) {
                dist = koranyi_dist(u, v, n);
            } else {
                for (int k = 0; k < d; ++k) {
                    dist += (u[k] - v[k]) * (u[k] - v[k]);
                }
                dist = std::sqrt(dist);
            }
            best = std::max(best, dist / lengths[s]);
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Mollified pullbacks

namespace {

std::vector<std::size_t> nodes_in_ball(const GridSpec& g, const Ball& ball)
{
    std::vector<std::size_t> out;
    std::vector<double> x(g.dim());
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        g.node_point(i, x);
        double r2 = 0.0;
        for (int a = 0; a < g.dim(); ++a) {
            const double c = ball.center.empty() ? 0.0 : ball.center[a];
            r2 += (x[a] - c) * (x[a] - c);
        }
        if (r2 <= ball.radius * ball.radius * (1.0 + 1e-12)) {
            out.push_back(i);
        }
    }
    return out;
}

void fill_sups(MollifiedPullback& r, const std::vector<std::size_t>& inside)
{
    r.sup = 0.0;
    r.sup_euclidean = 0.0;
    for (std::size_t i : inside) {
        double s2 = 0.0;
        for (double c : r.field.node(i)) {
            r.sup = std::max(r.sup, std::abs(c));
            s2 += c * c;
        }
        r.sup_euclidean = std::max(r.sup_euclidean, std::sqrt(s2));
    }
}

} // namespace

AlphaPullback pullback_alpha_mollified(const SampledMap& f, double epsilon, const Ball& region, std::size_t probes)
{
    const int d = f.target_dim();
    require(d >= 3 && d % 2 == 1, ErrorCode::DimensionMismatch, "contact pullback needs values in R^{2n+1}");
    const int n = (d - 1) / 2;
    const int m = f.source_dim();
    const GridSpec eval = subgrid_covering(f.grid(), region);
    const JetField jets = mollified_jets(f, epsilon, eval);

    AlphaPullback r;
    r.field = FormField(eval, 1);
    std::vector<double> alpha(d);
    for (std::size_t i = 0; i < eval.node_count(); ++i) {
        contact_alpha(jets.value(i), n, alpha);
        auto jac = jets.jacobian(i);
        auto out = r.field.node(i);
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                s += alpha[k] * jac[k * m + j];
            }
            out[j] = s;
        }
    }
    const auto inside = nodes_in_ball(eval, region);
    fill_sups(r, inside);

    // Double-convolution path at evenly spread probe nodes.
    if (probes > 0 && !inside.empty()) {
        const MollifierStencil st = MollifierStencil::build(f.grid(), epsilon);
        const std::size_t count = std::min(probes, inside.size());
        std::vector<double> x(m);
        std::vector<double> vals(st.size() * d);
        int q[24];
        for (std::size_t p = 0; p < count; ++p) {
            const std::size_t node = inside[count == 1 ? 0 : p * (inside.size() - 1) / (count - 1)];
            eval.node_point(node, x);
            const auto idx = node_of(f.grid(), x);
            for (std::size_t s = 0; s < st.size(); ++s) {
                auto o = st.offset(s);
                for (int a = 0; a < m; ++a) {
                    q[a] = idx[a] - o[a];
                }
                f.value_at({q, static_cast<std::size_t>(m)}, {vals.data() + s * d, static_cast<std::size_t>(d)});
            }
            for (int j = 0; j < m; ++j) {
                double acc = 0.0;
                for (std::size_t z = 0; z < st.size(); ++z) {
                    const double gz = st.grad_weights[z * m + j];
                    if (gz == 0.0) {
                        continue;
                    }
                    std::span<const double> fz(vals.data() + z * d, d);
                    double inner = 0.0;
                    for (std::size_t w = 0; w < st.size(); ++w) {
                        inner += phi(fz, std::span<const double>(vals.data() + w * d, d), n) * st.weights[w];
                    }
                    acc += inner * gz;
                }
                r.path_gap = std::max(r.path_gap, std::abs(acc - r.field.node(node)[j]));
            }
            ++r.probes;
        }
    }
    return r;
}

MollifiedPullback pullback_form_mollified(const SampledMap& f, double epsilon, const FormFunction& kappa, const Ball& region)
{
    require(kappa.dim == f.target_dim(), ErrorCode::DimensionMismatch, "form and map target dimensions differ");
    const GridSpec eval = subgrid_covering(f.grid(), region);
    const JetField jets = mollified_jets(f, epsilon, eval);
    MollifiedPullback r;
    r.field = pullback(jets, kappa);
    fill_sups(r, nodes_in_ball(eval, region));
    return r;
}

double contact_pullback_bound(double gamma, double seminorm_2eps, double epsilon, double grad_l1)
{
    return std::pow(4.0, gamma) * grad_l1 * seminorm_2eps * seminorm_2eps * std::pow(epsilon, 2.0 * gamma - 1.0);
}

double form_pullback_bound(int k, int target_dim, double kappa_sup, double seminorm_eps, double epsilon, double gamma,
                           double grad_l1)
{
    return static_cast<double>(binomial(target_dim, k)) * kappa_sup *
           std::pow(grad_l1 * seminorm_eps * std::pow(epsilon, gamma - 1.0), k);
}

PowerFit scaling_exponent_fit(std::span<const std::pair<double, double>> samples)
{
    require(samples.size() >= 3, ErrorCode::InvalidArgument, "exponent fit needs at least three samples");
    double sx = 0.0, sy = 0.0;
    for (auto [e, v] : samples) {
        require(e > 0.0 && std::isfinite(e), ErrorCode::InvalidArgument, "epsilon values must be positive");
        require(v > 0.0 && std::isfinite(v), ErrorCode::Domain, "exponent fit needs positive values");
        sx += std::log(e);
        sy += std::log(v);
    }
    const double k = static_cast<double>(samples.size());
    const double mx = sx / k;
    const double my = sy / k;
    double sxx = 0.0, sxy = 0.0;
    for (auto [e, v] : samples) {
        sxx += (std::log(e) - mx) * (std::log(e) - mx);
        sxy += (std::log(e) - mx) * (std::log(v) - my);
    }
    require(sxx > 0.0, ErrorCode::InvalidArgument, "exponent fit needs distinct epsilon values");
    PowerFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (auto [e, v] : samples) {
        const double r = std::log(v) - (fit.intercept + fit.slope * std::log(e));
        rss += r * r;
    }
    fit.residual = std::sqrt(rss / k);
    return fit;
}

// ---------------------------------------------------------------------------

TestMap make_test_map(const std::string& name, int source_dim, int n, double param)
{
    HeisenbergDim hd(n);
    require(source_dim >= 1, ErrorCode::InvalidArgument, "test map source dimension must be positive");
    TestMap tm;
    tm.name = name;
    tm.source_dim = source_dim;
    tm.target_dim = hd.ambient();
    const int d = hd.ambient();
    const int tx = 0;      // x_1
    const int ty = n;      // y_1
    const int tt = 2 * n;  // t

    auto zero = [d](std::span<double> out) { std::fill(out.begin(), out.begin() + d, 0.0); };
    if (name == "constant") {
        tm.generator = [d](std::span<const double>, std::span<double> out) {
            for (int k = 0; k < d; ++k) {
                out[k] = 0.5 - 0.1 * k;
            }
        };
    } else if (name == "affine_horizontal") {
        tm.generator = [zero, tx](std::span<const double> s, std::span<double> out) {
            zero(out);
            out[tx] = s[0];
        };
    } else if (name == "vertical") {
        tm.generator = [zero, tt](std::span<const double> s, std::span<double> out) {
            zero(out);
            out[tt] = s[0];
        };
    } else if (name == "planar_disk") {
        require(source_dim >= 2, ErrorCode::InvalidArgument, "planar_disk needs a two-dimensional source");
        tm.generator = [zero, tx, ty](std::span<const double> s, std::span<double> out) {
            zero(out);
            out[tx] = s[0];
            out[ty] = s[1];
        };
    } else if (name == "horizontal_helix") {
        // x = cos s, y = sin s, t = -2s:  t' + 2(x y' - y x') = -2 + 2 = 0.
        tm.generator = [zero, tx, ty, tt](std::span<const double> s, std::span<double> out) {
            zero(out);
            out[tx] = std::cos(s[0]);
            out[ty] = std::sin(s[0]);
            out[tt] = -2.0 * s[0];
        };
    } else if (name == "kink") {
        // x = |s|, y = s, t = 0 is horizontal and Lipschitz with a corner at 0.
        tm.generator = [zero, tx, ty](std::span<const double> s, std::span<double> out) {
            zero(out);
            out[tx] = std::abs(s[0]);
            out[ty] = s[0];
        };
    } else if (name == "weierstrass") {
        require(param > 0.0 && param < 1.0, ErrorCode::InvalidArgument, "Weierstrass exponent must lie in (0, 1)");
        tm.generator = [zero, tt, param](std::span<const double> s, std::span<double> out) {
            zero(out);
            double acc = 0.0;
            for (int j = 0; j < 24; ++j) {
                const double f = std::ldexp(1.0, j);
                acc += std::pow(f, -param) * std::sin(f * boost::math::constants::pi<double>() * s[0]);
            }
            out[tt] = acc;
        };
    } else {
        fail(ErrorCode::InvalidArgument, "unknown test map '" + name + "'");
    }
    return tm;
}

} // namespace heisen
