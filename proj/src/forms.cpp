#include <heisen/forms.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <utility>

namespace heisen {

std::size_t binomial(int n, int k)
{
    if (k < 0 || n < 0 || k > n) {
        return 0;
    }
    k = std::min(k, n - k);
    std::size_t v = 1;
    for (int i = 0; i < k; ++i) {
        v = v * static_cast<std::size_t>(n - i) / static_cast<std::size_t>(i + 1);
    }
    return v;
}

// ---------------------------------------------------------------------------

MultiIndexBasis::MultiIndexBasis(int dim, int degree) : dim_(dim), degree_(degree)
{
    require(dim >= 0 && dim <= 24, ErrorCode::InvalidArgument, "ambient dimension must lie in [0, 24]");
    require(degree >= 0 && degree <= dim, ErrorCode::InvalidArgument, "form degree must lie in [0, dim]");
    lookup_.assign(std::size_t{1} << dim, 0);

    std::vector<int> c(degree);
    std::iota(c.begin(), c.end(), 0);
    for (;;) {
        std::uint32_t m = 0;
        for (int i : c) {
            m |= 1u << i;
        }
        masks_.push_back(m);
        lookup_[m] = static_cast<std::uint32_t>(masks_.size());
        // next combination in lexicographic order
        int i = degree - 1;
        while (i >= 0 && c[i] == dim - degree + i) {
            --i;
        }
        if (i < 0) {
            break;
        }
        ++c[i];
        for (int j = i + 1; j < degree; ++j) {
            c[j] = c[j - 1] + 1;
        }
    }
}

std::shared_ptr<const MultiIndexBasis> MultiIndexBasis::get(int dim, int degree)
{
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::shared_ptr<const MultiIndexBasis>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{dim, degree}];
    if (!slot) {
        slot = std::make_shared<const MultiIndexBasis>(dim, degree);
    }
    return slot;
}

std::vector<int> MultiIndexBasis::indices(std::size_t i) const
{
    std::vector<int> out;
    std::uint32_t m = masks_[i];
    while (m) {
        out.push_back(std::countr_zero(m));
        m &= m - 1;
    }
    return out;
}

std::size_t MultiIndexBasis::find(std::uint32_t mask) const
{
    if (mask >= lookup_.size() || lookup_[mask] == 0) {
        return npos;
    }
    return lookup_[mask] - 1;
}

int concat_sign(std::uint32_t a, std::uint32_t b)
{
    int inversions = 0;
    while (b) {
        const int j = std::countr_zero(b);
        b &= b - 1;
        const std::uint32_t above = (j >= 31) ? 0u : ~((2u << j) - 1u);
        inversions += std::popcount(a & above);
    }
    return (inversions & 1) ? -1 : 1;
}

namespace {

// Sign of the permutation sorting `axes` and the resulting mask; sign 0 on a
// repeated axis.
std::pair<int, std::uint32_t> sort_axes(std::span<const int> axes, int dim)
{
    std::uint32_t mask = 0;
    int inversions = 0;
    for (std::size_t i = 0; i < axes.size(); ++i) {
        require(axes[i] >= 0 && axes[i] < dim, ErrorCode::InvalidArgument, "axis index out of range");
        if (mask & (1u << axes[i])) {
            return {0, 0};
        }
        mask |= 1u << axes[i];
        for (std::size_t j = i + 1; j < axes.size(); ++j) {
            inversions += axes[i] > axes[j] ? 1 : 0;
        }
    }
    return {(inversions & 1) ? -1 : 1, mask};
}

} // namespace

// ---------------------------------------------------------------------------

ConstForm::ConstForm(int dim, int degree)
    : basis_(MultiIndexBasis::get(dim, degree)), coeffs_(basis_->size(), 0.0)
{
}

ConstForm::ConstForm(int dim, int degree, std::vector<double> coeffs)
    : basis_(MultiIndexBasis::get(dim, degree)), coeffs_(std::move(coeffs))
{
    require(coeffs_.size() == basis_->size(), ErrorCode::DimensionMismatch,
            "coefficient vector length does not match binomial(d, k)");
}

ConstForm ConstForm::scalar(int dim, double value)
{
    return ConstForm(dim, 0, {value});
}

ConstForm ConstForm::basis_element(int dim, std::initializer_list<int> axes)
{
    return basis_element(dim, std::span<const int>(axes.begin(), axes.size()));
}

ConstForm ConstForm::basis_element(int dim, std::span<const int> axes)
{
    ConstForm f(dim, static_cast<int>(axes.size()));
    auto [sign, mask] = sort_axes(axes, dim);
    if (sign != 0) {
        f.coeffs_[f.basis_->find(mask)] = sign;
    }
    return f;
}

double ConstForm::coefficient(std::initializer_list<int> axes) const
{
    require(static_cast<int>(axes.size()) == degree(), ErrorCode::DimensionMismatch, "wrong number of axes");
    auto [sign, mask] = sort_axes(std::span<const int>(axes.begin(), axes.size()), dim());
    if (sign == 0) {
        return 0.0;
    }
    return sign * coeffs_[basis_->find(mask)];
}

double ConstForm::max_abs() const
{
    double m = 0.0;
    for (double c : coeffs_) {
        m = std::max(m, std::abs(c));
    }
    return m;
}

double ConstForm::norm2() const
{
    double s = 0.0;
    for (double c : coeffs_) {
        s += c * c;
    }
    return std::sqrt(s);
}

ConstForm& ConstForm::operator+=(const ConstForm& o)
{
    require(basis_ == o.basis_, ErrorCode::DimensionMismatch, "adding forms of different type");
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        coeffs_[i] += o.coeffs_[i];
    }
    return *this;
}

ConstForm& ConstForm::operator-=(const ConstForm& o)
{
    require(basis_ == o.basis_, ErrorCode::DimensionMismatch, "subtracting forms of different type");
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        coeffs_[i] -= o.coeffs_[i];
    }
    return *this;
}

ConstForm& ConstForm::operator*=(double s)
{
    for (double& c : coeffs_) {
        c *= s;
    }
    return *this;
}

ConstForm operator+(ConstForm a, const ConstForm& b) { return a += b; }
ConstForm operator-(ConstForm a, const ConstForm& b) { return a -= b; }
ConstForm operator*(double s, ConstForm a) { return a *= s; }

// ---------------------------------------------------------------------------

std::shared_ptr<const WedgeTable> WedgeTable::get(int dim, int deg_a, int deg_b)
{
    require(deg_a + deg_b <= dim, ErrorCode::InvalidArgument, "wedge degree exceeds ambient dimension");
    static std::mutex mu;
    static std::map<std::tuple<int, int, int>, std::shared_ptr<const WedgeTable>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{dim, deg_a, deg_b}];
    if (slot) {
        return slot;
    }
    auto t = std::make_shared<WedgeTable>();
    t->dim = dim;
    t->deg_a = deg_a;
    t->deg_b = deg_b;
    auto ba = MultiIndexBasis::get(dim, deg_a);
    auto bb = MultiIndexBasis::get(dim, deg_b);
    auto bo = MultiIndexBasis::get(dim, deg_a + deg_b);
    for (std::size_t i = 0; i < ba->size(); ++i) {
        for (std::size_t j = 0; j < bb->size(); ++j) {
            const std::uint32_t ma = ba->mask(i);
            const std::uint32_t mb = bb->mask(j);
            if (ma & mb) {
                continue;
            }
            t->terms.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                static_cast<std::uint32_t>(bo->find(ma | mb)),
                                static_cast<double>(concat_sign(ma, mb))});
        }
    }
    slot = std::move(t);
    return slot;
}

void WedgeTable::apply(std::span<const double> a, std::span<const double> b, std::span<double> out) const
{
    std::fill(out.begin(), out.end(), 0.0);
    for (const Term& term : terms) {
        out[term.out] += term.sign * a[term.a] * b[term.b];
    }
}

ConstForm wedge(const ConstForm& a, const ConstForm& b)
{
    require(a.dim() == b.dim(), ErrorCode::DimensionMismatch, "wedge of forms on different spaces");
    require(a.degree() + b.degree() <= a.dim(), ErrorCode::InvalidArgument, "wedge degree exceeds ambient dimension");
    ConstForm out(a.dim(), a.degree() + b.degree());
    WedgeTable::get(a.dim(), a.degree(), b.degree())->apply(a.coeffs(), b.coeffs(), out.coeffs());
    return out;
}

// ---------------------------------------------------------------------------

GridSpec::GridSpec(std::vector<double> lo, std::vector<double> hi, std::vector<int> points)
    : lo_(std::move(lo)), hi_(std::move(hi)), points_(std::move(points))
{
    require(!points_.empty() && lo_.size() == points_.size() && hi_.size() == points_.size(),
            ErrorCode::DimensionMismatch, "grid corners and point counts must share one dimension");
    spacing_.resize(points_.size());
    strides_.resize(points_.size());
    for (std::size_t a = 0; a < points_.size(); ++a) {
        require(points_[a] >= 2, ErrorCode::InvalidArgument, "grid needs at least two points per axis");
        require(hi_[a] > lo_[a], ErrorCode::InvalidArgument, "grid extent must be strictly positive");
        spacing_[a] = (hi_[a] - lo_[a]) / (points_[a] - 1);
    }
    node_count_ = 1;
    for (int a = static_cast<int>(points_.size()) - 1; a >= 0; --a) {
        strides_[a] = node_count_;
        node_count_ *= static_cast<std::size_t>(points_[a]);
    }
}

GridSpec GridSpec::cube(int dim, double lo, double hi, int points)
{
    return GridSpec(std::vector<double>(dim, lo), std::vector<double>(dim, hi), std::vector<int>(dim, points));
}

GridSpec GridSpec::centered(int dim, double half_width, double spacing)
{
    const int half = static_cast<int>(std::llround(half_width / spacing));
    require(half >= 1, ErrorCode::InvalidArgument, "grid spacing exceeds the half width");
    return cube(dim, -half * spacing, half * spacing, 2 * half + 1);
}

double GridSpec::max_spacing() const
{
    return *std::max_element(spacing_.begin(), spacing_.end());
}

std::size_t GridSpec::linear_index(std::span<const int> idx) const
{
    std::size_t l = 0;
    for (std::size_t a = 0; a < points_.size(); ++a) {
        l += static_cast<std::size_t>(idx[a]) * strides_[a];
    }
    return l;
}

void GridSpec::multi_index(std::size_t linear, std::span<int> idx) const
{
    for (std::size_t a = 0; a < points_.size(); ++a) {
        idx[a] = static_cast<int>(linear / strides_[a]);
        linear %= strides_[a];
    }
}

void GridSpec::node_point(std::size_t linear, std::span<double> x) const
{
    for (std::size_t a = 0; a < points_.size(); ++a) {
        const int i = static_cast<int>(linear / strides_[a]);
        linear %= strides_[a];
        x[a] = lo_[a] + i * spacing_[a];
    }
}

bool GridSpec::near_boundary(std::size_t linear, int layers) const
{
    for (std::size_t a = 0; a < points_.size(); ++a) {
        const int i = static_cast<int>(linear / strides_[a]);
        linear %= strides_[a];
        if (i < layers || i >= points_[a] - layers) {
            return true;
        }
    }
    return false;
}

bool GridSpec::contains(std::span<const double> x, double tol) const
{
    for (std::size_t a = 0; a < points_.size(); ++a) {
        if (x[a] < lo_[a] - tol || x[a] > hi_[a] + tol) {
            return false;
        }
    }
    return true;
}

bool GridSpec::same_as(const GridSpec& o) const
{
    return points_ == o.points_ && lo_ == o.lo_ && hi_ == o.hi_;
}

// ---------------------------------------------------------------------------

FormFunction FormFunction::constant(const ConstForm& c)
{
    std::vector<double> coeffs(c.coeffs().begin(), c.coeffs().end());
    return {c.dim(), c.degree(), [coeffs](std::span<const double>, std::span<double> out) {
                std::copy(coeffs.begin(), coeffs.end(), out.begin());
            }};
}

FormField::FormField(GridSpec grid, int degree, bool compact)
    : grid_(std::move(grid)), basis_(MultiIndexBasis::get(grid_.dim(), degree)), compact_(compact)
{
    coeffs_.assign(grid_.node_count() * basis_->size(), 0.0);
}

FormField::FormField(GridSpec grid, int degree, std::vector<double> coeffs, bool compact)
    : grid_(std::move(grid)), basis_(MultiIndexBasis::get(grid_.dim(), degree)), coeffs_(std::move(coeffs)),
      compact_(compact)
{
    require(coeffs_.size() == grid_.node_count() * basis_->size(), ErrorCode::DimensionMismatch,
            "coefficient array does not match grid x basis size");
    for (double c : coeffs_) {
        require(std::isfinite(c), ErrorCode::Numerical, "form field coefficients must be finite");
    }
}

FormField FormField::sample(const GridSpec& grid, const FormFunction& f, bool compact)
{
    require(f.dim == grid.dim(), ErrorCode::DimensionMismatch, "form function and grid dimensions differ");
    FormField out(grid, f.degree, compact);
    std::vector<double> x(grid.dim());
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        grid.node_point(i, x);
        f.eval(x, out.node(i));
    }
    return out;
}

ConstForm FormField::node_form(std::size_t i) const
{
    auto n = node(i);
    return ConstForm(dim(), degree(), std::vector<double>(n.begin(), n.end()));
}

void FormField::evaluate(std::span<const double> p, std::span<double> out) const
{
    const int d = dim();
    const std::size_t nc = components();
    std::fill(out.begin(), out.begin() + nc, 0.0);

    int base[24];
    double frac[24];
    for (int a = 0; a < d; ++a) {
        const double h = grid_.spacing(a);
        const double s = (p[a] - grid_.lo()[a]) / h;
        const int n = grid_.points()[a];
        if (s < -1e-9 || s > (n - 1) + 1e-9 || !std::isfinite(s)) {
            if (compact_) {
                return;
            }
            std::ostringstream msg;
            msg << "evaluation point outside the grid of a non-compact form field (axis " << a << ")";
            fail(ErrorCode::Domain, msg.str());
        }
        int i = static_cast<int>(std::floor(s));
        i = std::clamp(i, 0, n - 2);
        base[a] = i;
        frac[a] = std::clamp(s - i, 0.0, 1.0);
    }
    const int corners = 1 << d;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        std::size_t l = 0;
        for (int a = 0; a < d; ++a) {
            const int bit = (c >> a) & 1;
            w *= bit ? frac[a] : 1.0 - frac[a];
            l += static_cast<std::size_t>(base[a] + bit) * grid_.stride(a);
        }
        if (w == 0.0) {
            continue;
        }
        const double* v = coeffs_.data() + l * nc;
        for (std::size_t k = 0; k < nc; ++k) {
            out[k] += w * v[k];
        }
    }
}

ConstForm FormField::evaluate(std::span<const double> p) const
{
    ConstForm f(dim(), degree());
    evaluate(p, f.coeffs());
    return f;
}

FormFunction FormField::as_function() const
{
    // The field is shared, not copied; callers keep it alive.
    const FormField* self = this;
    return {dim(), degree(), [self](std::span<const double> p, std::span<double> out) { self->evaluate(p, out); }};
}

double FormField::sup_norm() const
{
    double m = 0.0;
    for (double c : coeffs_) {
        m = std::max(m, std::abs(c));
    }
    return m;
}

bool FormField::vanishes_near_boundary(int layers) const
{
    const std::size_t nc = components();
    for (std::size_t i = 0; i < grid_.node_count(); ++i) {
        if (!grid_.near_boundary(i, layers)) {
            continue;
        }
        for (std::size_t k = 0; k < nc; ++k) {
            if (coeffs_[i * nc + k] != 0.0) {
                return false;
            }
        }
    }
    return true;
}

FormField& FormField::operator+=(const FormField& o)
{
    require(grid_.same_as(o.grid_) && basis_ == o.basis_, ErrorCode::DimensionMismatch, "adding mismatched form fields");
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        coeffs_[i] += o.coeffs_[i];
    }
    compact_ = compact_ && o.compact_;
    return *this;
}

FormField& FormField::operator*=(double s)
{
    for (double& c : coeffs_) {
        c *= s;
    }
    return *this;
}

FormField wedge_field(const FormField& a, const FormField& b)
{
    require(a.grid().same_as(b.grid()), ErrorCode::DimensionMismatch, "wedge of fields on different grids");
    auto table = WedgeTable::get(a.dim(), a.degree(), b.degree());
    FormField out(a.grid(), a.degree() + b.degree(), a.compact() || b.compact());
    for (std::size_t i = 0; i < a.grid().node_count(); ++i) {
        table->apply(a.node(i), b.node(i), out.node(i));
    }
    return out;
}

FormField exterior_derivative(const FormField& a)
{
    const GridSpec& g = a.grid();
    const int d = g.dim();
    require(a.degree() < d, ErrorCode::InvalidArgument, "exterior derivative of a top-degree form");
    for (int ax = 0; ax < d; ++ax) {
        require(g.points()[ax] >= 4, ErrorCode::InvalidArgument, "degenerate grid: fewer than 4 points on an axis");
    }
    const auto& in_basis = a.basis();
    const auto out_basis = MultiIndexBasis::get(d, a.degree() + 1);
    const std::size_t nin = in_basis.size();

    // (axis, input component) -> (output component, sign)
    struct Route {
        std::size_t out;
        double sign;
    };
    std::vector<Route> routes(static_cast<std::size_t>(d) * nin, Route{MultiIndexBasis::npos, 0.0});
    for (int ax = 0; ax < d; ++ax) {
        for (std::size_t c = 0; c < nin; ++c) {
            const std::uint32_t m = in_basis.mask(c);
            if (m & (1u << ax)) {
                continue;
            }
            routes[ax * nin + c] = {out_basis->find(m | (1u << ax)), static_cast<double>(concat_sign(1u << ax, m))};
        }
    }

    FormField out(g, a.degree() + 1, a.compact());
    std::vector<int> idx(d);
    std::vector<double> deriv(nin);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        g.multi_index(i, idx);
        auto o = out.node(i);
        for (int ax = 0; ax < d; ++ax) {
            const int n = g.points()[ax];
            const double h = g.spacing(ax);
            const std::size_t s = g.stride(ax);
            const int k = idx[ax];
            if (k > 0 && k < n - 1) {
                auto p = a.node(i + s);
                auto q = a.node(i - s);
                for (std::size_t c = 0; c < nin; ++c) {
                    deriv[c] = (p[c] - q[c]) / (2.0 * h);
                }
            } else if (a.compact()) {
                continue;
            } else if (k == 0) {
                auto f0 = a.node(i);
                auto f1 = a.node(i + s);
                auto f2 = a.node(i + 2 * s);
                for (std::size_t c = 0; c < nin; ++c) {
                    deriv[c] = (-3.0 * f0[c] + 4.0 * f1[c] - f2[c]) / (2.0 * h);
                }
            } else {
                auto f0 = a.node(i);
                auto f1 = a.node(i - s);
                auto f2 = a.node(i - 2 * s);
                for (std::size_t c = 0; c < nin; ++c) {
                    deriv[c] = (3.0 * f0[c] - 4.0 * f1[c] + f2[c]) / (2.0 * h);
                }
            }
            for (std::size_t c = 0; c < nin; ++c) {
                const Route& r = routes[ax * nin + c];
                if (r.out != MultiIndexBasis::npos) {
                    o[r.out] += r.sign * deriv[c];
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

JetField SmoothMap::sample(const GridSpec& grid) const
{
    require(grid.dim() == source_dim, ErrorCode::DimensionMismatch, "map source dimension differs from grid");
    JetField jf;
    jf.grid = grid;
    jf.target_dim = target_dim;
    jf.values.resize(grid.node_count() * target_dim);
    jf.jacobians.resize(grid.node_count() * target_dim * source_dim);
    std::vector<double> x(source_dim);
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        grid.node_point(i, x);
        eval(x, {jf.values.data() + i * target_dim, static_cast<std::size_t>(target_dim)},
             {jf.jacobians.data() + i * target_dim * source_dim, static_cast<std::size_t>(target_dim * source_dim)});
    }
    return jf;
}

namespace {

double small_det(double* a, int k)
{
    double det = 1.0;
    for (int c = 0; c < k; ++c) {
        int piv = c;
        for (int r = c + 1; r < k; ++r) {
            if (std::abs(a[r * k + c]) > std::abs(a[piv * k + c])) {
                piv = r;
            }
        }
        if (a[piv * k + c] == 0.0) {
            return 0.0;
        }
        if (piv != c) {
            for (int j = 0; j < k; ++j) {
                std::swap(a[c * k + j], a[piv * k + j]);
            }
            det = -det;
        }
        det *= a[c * k + c];
        for (int r = c + 1; r < k; ++r) {
            const double f = a[r * k + c] / a[c * k + c];
            for (int j = c; j < k; ++j) {
                a[r * k + j] -= f * a[c * k + j];
            }
        }
    }
    return det;
}

// out_J = sum_I a_I det(J[I, J]).
void pullback_coeffs(std::span<const double> jac, int target_dim, int source_dim, const MultiIndexBasis& tb,
                     const MultiIndexBasis& sb, std::span<const double> a, std::span<double> out)
{
    const int k = tb.degree();
    if (k == 0) {
        out[0] = a[0];
        return;
    }
    int rows[24];
    int cols[24];
    double m[24 * 24];
    for (std::size_t j = 0; j < sb.size(); ++j) {
        std::uint32_t cm = sb.mask(j);
        for (int q = 0; q < k; ++q) {
            cols[q] = std::countr_zero(cm);
            cm &= cm - 1;
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < tb.size(); ++i) {
            if (a[i] == 0.0) {
                continue;
            }
            std::uint32_t rm = tb.mask(i);
            for (int q = 0; q < k; ++q) {
                rows[q] = std::countr_zero(rm);
                rm &= rm - 1;
            }
            for (int r = 0; r < k; ++r) {
                for (int c = 0; c < k; ++c) {
                    m[r * k + c] = jac[rows[r] * source_dim + cols[c]];
                }
            }
            acc += a[i] * small_det(m, k);
        }
        out[j] = acc;
    }
    (void)target_dim;
}

} // namespace

ConstForm pullback(std::span<const double> jacobian, int target_dim, int source_dim, const ConstForm& a)
{
    require(a.dim() == target_dim, ErrorCode::DimensionMismatch, "form lives on a different space than the map target");
    require(jacobian.size() == static_cast<std::size_t>(target_dim * source_dim), ErrorCode::DimensionMismatch,
            "Jacobian has the wrong shape");
    ConstForm out(source_dim, std::min(a.degree(), source_dim));
    if (a.degree() > source_dim) {
        return ConstForm(source_dim, 0);
    }
    pullback_coeffs(jacobian, target_dim, source_dim, a.basis(), out.basis(), a.coeffs(), out.coeffs());
    return out;
}

FormField pullback(const JetField& f, const FormFunction& a)
{
    require(a.dim == f.target_dim, ErrorCode::DimensionMismatch, "form lives on a different space than the map target");
    const int m = f.grid.dim();
    require(a.degree <= m, ErrorCode::InvalidArgument, "pullback degree exceeds source dimension");
    const auto tb = MultiIndexBasis::get(a.dim, a.degree);
    const auto sb = MultiIndexBasis::get(m, a.degree);
    FormField out(f.grid, a.degree);
    std::vector<double> buf(tb->size());
    for (std::size_t i = 0; i < f.grid.node_count(); ++i) {
        a.eval(f.value(i), buf);
        bool any = false;
        for (double c : buf) {
            any = any || c != 0.0;
        }
        if (!any) {
            continue;
        }
        pullback_coeffs(f.jacobian(i), f.target_dim, m, *tb, *sb, buf, out.node(i));
    }
    return out;
}

// ---------------------------------------------------------------------------

bool domain_contains(const Domain& d, std::span<const double> x)
{
    return std::visit(
        [&](const auto& dom) -> bool {
            using T = std::decay_t<decltype(dom)>;
            if constexpr (std::is_same_v<T, WholeGrid>) {
                return true;
            } else if constexpr (std::is_same_v<T, Ball>) {
                double r2 = 0.0;
                for (std::size_t a = 0; a < x.size(); ++a) {
                    const double c = dom.center.empty() ? 0.0 : dom.center[a];
                    r2 += (x[a] - c) * (x[a] - c);
                }
                return r2 <= dom.radius * dom.radius;
            } else {
                for (std::size_t a = 0; a < x.size(); ++a) {
                    if (x[a] < dom.lo[a] || x[a] > dom.hi[a]) {
                        return false;
                    }
                }
                return true;
            }
        },
        d);
}

namespace {

template <class Fn>
void for_each_cell(const GridSpec& g, Fn&& fn)
{
    const int d = g.dim();
    std::vector<int> c(d, 0);
    std::vector<double> center(d);
    for (;;) {
        for (int a = 0; a < d; ++a) {
            center[a] = g.lo()[a] + (c[a] + 0.5) * g.spacing(a);
        }
        fn(std::span<const int>(c), std::span<const double>(center));
        int a = d - 1;
        while (a >= 0 && ++c[a] == g.points()[a] - 1) {
            c[a] = 0;
            --a;
        }
        if (a < 0) {
            break;
        }
    }
}

} // namespace

double integrate_top(const FormField& a, const Domain& domain)
{
    const GridSpec& g = a.grid();
    const int d = g.dim();
    require(a.degree() == d, ErrorCode::InvalidArgument, "integrate_top needs a form of degree equal to the grid dimension");
    double cell = 1.0;
    for (int ax = 0; ax < d; ++ax) {
        cell *= g.spacing(ax);
    }
    const int corners = 1 << d;
    double sum = 0.0;
    for_each_cell(g, [&](std::span<const int> c, std::span<const double> center) {
        if (!domain_contains(domain, center)) {
            return;
        }
        const std::size_t base = g.linear_index(c);
        double v = 0.0;
        for (int k = 0; k < corners; ++k) {
            std::size_t l = base;
            for (int ax = 0; ax < d; ++ax) {
                if ((k >> ax) & 1) {
                    l += g.stride(ax);
                }
            }
            v += a.node(l)[0];
        }
        sum += v / corners;
    });
    return sum * cell;
}

double domain_cell_volume(const GridSpec& g, const Domain& domain)
{
    double cell = 1.0;
    for (int ax = 0; ax < g.dim(); ++ax) {
        cell *= g.spacing(ax);
    }
    std::size_t count = 0;
    for_each_cell(g, [&](std::span<const int>, std::span<const double> center) {
        if (domain_contains(domain, center)) {
            ++count;
        }
    });
    return count * cell;
}

} // namespace heisen
