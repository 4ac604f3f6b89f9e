#include <heisen/linking.hpp>

#include <boost/math/constants/constants.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace heisen {

double smoothstep(double u)
{
    if (u <= 0.0) {
        return 0.0;
    }
    if (u >= 1.0) {
        return 1.0;
    }
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

double smoothstep_derivative(double u)
{
    if (u <= 0.0 || u >= 1.0) {
        return 0.0;
    }
    const double v = u * (1.0 - u);
    return 30.0 * v * v;
}

// ---------------------------------------------------------------------------
// PointCloud

PointCloud::PointCloud(int dim, std::vector<double> points, double cell)
    : dim_(dim), cell_(cell), points_(std::move(points))
{
    require(dim >= 1 && dim <= 24, ErrorCode::InvalidArgument, "point cloud dimension must lie in [1, 24]");
    require(points_.size() % dim == 0, ErrorCode::DimensionMismatch, "point cloud coordinates do not split into points");
    require(cell > 0.0 && std::isfinite(cell), ErrorCode::InvalidArgument, "point cloud cell size must be positive");
    int c[24];
    for (std::size_t i = 0; i < size(); ++i) {
        auto p = point(i);
        for (int a = 0; a < dim_; ++a) {
            require(std::isfinite(p[a]), ErrorCode::Numerical, "point cloud coordinates must be finite");
            c[a] = static_cast<int>(std::floor(p[a] / cell_));
        }
        buckets_[key({c, static_cast<std::size_t>(dim_)})].push_back(i);
    }
}

std::uint64_t PointCloud::key(std::span<const int> c) const
{
    std::uint64_t h = 1469598103934665603ull;
    for (int v : c) {
        h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
        h *= 1099511628211ull;
    }
    return h;
}

PointCloud::Hit PointCloud::nearest(std::span<const double> p, double limit) const
{
    Hit best;
    auto consider = [&](std::size_t i) {
        auto q = point(i);
        double d2 = 0.0;
        for (int a = 0; a < dim_; ++a) {
            d2 += (p[a] - q[a]) * (p[a] - q[a]);
        }
        const double d = std::sqrt(d2);
        if (d < best.distance) {
            best.distance = d;
            best.index = i;
        }
    };
    const double rings_d = std::ceil(limit / cell_);
    // Scanning the hash only pays off when the ring box is small.
    const bool brute = !std::isfinite(limit) || rings_d > 8 || std::pow(2 * rings_d + 1, dim_) > static_cast<double>(size());
    if (brute) {
        for (std::size_t i = 0; i < size(); ++i) {
            consider(i);
        }
    } else {
        const int rings = static_cast<int>(rings_d);
        int base[24], c[24], o[24];
        for (int a = 0; a < dim_; ++a) {
            base[a] = static_cast<int>(std::floor(p[a] / cell_));
            o[a] = -rings;
        }
        for (;;) {
            for (int a = 0; a < dim_; ++a) {
                c[a] = base[a] + o[a];
            }
            auto it = buckets_.find(key({c, static_cast<std::size_t>(dim_)}));
            if (it != buckets_.end()) {
                for (std::size_t i : it->second) {
                    consider(i);
                }
            }
            int a = dim_ - 1;
            while (a >= 0 && ++o[a] > rings) {
                o[a] = -rings;
                --a;
            }
            if (a < 0) {
                break;
            }
        }
    }
    if (best.distance > limit) {
        return Hit{};
    }
    return best;
}

void PointCloud::for_each_within(std::span<const double> p, double radius,
                                 const std::function<void(std::size_t, double)>& fn) const
{
    const int rings = static_cast<int>(std::ceil(radius / cell_));
    int base[24], c[24], o[24];
    for (int a = 0; a < dim_; ++a) {
        base[a] = static_cast<int>(std::floor(p[a] / cell_));
        o[a] = -rings;
    }
    for (;;) {
        for (int a = 0; a < dim_; ++a) {
            c[a] = base[a] + o[a];
        }
        auto it = buckets_.find(key({c, static_cast<std::size_t>(dim_)}));
        if (it != buckets_.end()) {
            for (std::size_t i : it->second) {
                auto q = point(i);
                double d2 = 0.0;
                for (int a = 0; a < dim_; ++a) {
                    d2 += (p[a] - q[a]) * (p[a] - q[a]);
                }
                if (d2 <= radius * radius) {
                    fn(i, std::sqrt(d2));
                }
            }
        }
        int a = dim_ - 1;
        while (a >= 0 && ++o[a] > rings) {
            o[a] = -rings;
            --a;
        }
        if (a < 0) {
            break;
        }
    }
}

// ---------------------------------------------------------------------------
// Cutoffs

Cutoff::Cutoff(int dim, std::vector<double> targets, double r_in, double r_out)
    : cloud_(dim, std::move(targets), r_out > 0.0 ? r_out : 1.0), r_in_(r_in), r_out_(r_out)
{
    require(r_in > 0.0 && r_out > r_in, ErrorCode::InvalidArgument, "cutoff radii must satisfy 0 < r_in < r_out");
    require(cloud_.size() > 0, ErrorCode::InvalidArgument, "cutoff needs at least one target point");
}

double Cutoff::value(std::span<const double> p) const
{
    const auto hit = cloud_.nearest(p, r_out_);
    if (!std::isfinite(hit.distance)) {
        return 0.0;
    }
    return smoothstep((r_out_ - hit.distance) / (r_out_ - r_in_));
}

double Cutoff::value_gradient(std::span<const double> p, std::span<double> grad) const
{
    const int d = dim();
    std::fill(grad.begin(), grad.begin() + d, 0.0);
    const auto hit = cloud_.nearest(p, r_out_);
    if (!std::isfinite(hit.distance)) {
        return 0.0;
    }
    const double w = r_out_ - r_in_;
    const double u = (r_out_ - hit.distance) / w;
    const double ds = smoothstep_derivative(u);
    if (ds != 0.0 && hit.distance > 0.0) {
        auto q = cloud_.point(hit.index);
        const double f = -ds / (w * hit.distance);
        for (int a = 0; a < d; ++a) {
            grad[a] = f * (p[a] - q[a]);
        }
    }
    return smoothstep(u);
}

CutoffField smooth_cutoff(int dim, std::span<const double> targets, const GridSpec& grid, double r_in, double r_out)
{
    require(grid.dim() == dim, ErrorCode::DimensionMismatch, "cutoff grid dimension differs from the targets");
    require(r_in >= 2.0 * grid.max_spacing() * (1.0 - 1e-12), ErrorCode::Domain,
            "cutoff inner radius must span at least two grid spacings");
    Cutoff chi(dim, {targets.begin(), targets.end()}, r_in, r_out);
    FormField f(grid, 0);
    std::vector<double> x(dim);
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        grid.node_point(i, x);
        f.node(i)[0] = chi.value(x);
    }
    return {std::move(f), r_in, r_out};
}

// ---------------------------------------------------------------------------
// Embedded spheres

namespace {

// Unit vectors of R^{k+1} sampling S^k.  For k >= 1 the samples are organised
// by latitude of the last coordinate; `side` is +1 / -1 for the open upper /
// lower hemisphere and 0 on the equator.
void sphere_params(int k, int resolution, std::vector<double>& params, std::vector<int>& side)
{
    const double pi = boost::math::constants::pi<double>();
    params.clear();
    side.clear();
    if (k == 0) {
        params = {1.0, -1.0};
        side = {1, -1};
        return;
    }
    if (k == 1) {
        const int n = resolution;
        for (int j = 0; j < n; ++j) {
            const double th = 2.0 * pi * j / n;
            const bool eq = (j == 0 || 2 * j == n);
            params.push_back(eq ? (j == 0 ? 1.0 : -1.0) : std::cos(th));
            params.push_back(eq ? 0.0 : std::sin(th));
            side.push_back(eq ? 0 : (2 * j < n ? 1 : -1));
        }
        return;
    }
    const int lat = resolution / 2;
    for (int j = 0; j <= lat; ++j) {
        const double ph = -0.5 * pi + pi * j / lat;
        const int s = (2 * j == lat) ? 0 : (2 * j > lat ? 1 : -1);
        const double c = (2 * j == lat) ? 1.0 : std::cos(ph);
        const double sn = (2 * j == lat) ? 0.0 : std::sin(ph);
        if (j == 0 || j == lat) {
            for (int a = 0; a < k; ++a) {
                params.push_back(0.0);
            }
            params.push_back(j == 0 ? -1.0 : 1.0);
            side.push_back(s);
            continue;
        }
        std::vector<double> ring;
        std::vector<int> ring_side;
        int res = (2 * j == lat) ? resolution : std::max(4, 2 * static_cast<int>(std::ceil(0.5 * resolution * c)));
        sphere_params(k - 1, res, ring, ring_side);
        for (std::size_t r = 0; r < ring_side.size(); ++r) {
            for (int a = 0; a < k; ++a) {
                params.push_back(c * ring[r * k + a]);
            }
            params.push_back(sn);
            side.push_back(s);
        }
    }
}

} // namespace

EmbeddedSphere EmbeddedSphere::sample(int k, int m, Map map, int resolution)
{
    require(k >= 0 && k < m, ErrorCode::InvalidArgument, "embedded sphere needs 0 <= k < m");
    require(m <= 24, ErrorCode::InvalidArgument, "ambient dimension must not exceed 24");
    require(static_cast<bool>(map), ErrorCode::InvalidArgument, "embedded sphere needs a parameterization");
    require(k == 0 || (resolution >= 8 && resolution % 4 == 0), ErrorCode::InvalidArgument,
            "sphere resolution must be a multiple of 4 and at least 8");
    EmbeddedSphere s;
    s.k_ = k;
    s.m_ = m;
    s.resolution_ = resolution;
    s.map_ = std::move(map);
    sphere_params(k, resolution, s.params_, s.side_);
    s.images_.resize(s.side_.size() * m);
    for (std::size_t i = 0; i < s.side_.size(); ++i) {
        s.map_(s.param(i), {s.images_.data() + i * m, static_cast<std::size_t>(m)});
        for (int a = 0; a < m; ++a) {
            require(std::isfinite(s.images_[i * m + a]), ErrorCode::Numerical, "sphere image is not finite");
        }
    }

    if (k == 0) {
        double d2 = 0.0;
        for (int a = 0; a < m; ++a) {
            d2 += (s.images_[a] - s.images_[m + a]) * (s.images_[a] - s.images_[m + a]);
        }
        s.margin_ = s.spacing_ = std::sqrt(d2);
        require(s.margin_ > 0.0, ErrorCode::Domain, "f(+1) and f(-1) coincide: the samples are not injective");
        return s;
    }

    // Sample spacing: largest nearest-neighbour image distance.
    const double pi = boost::math::constants::pi<double>();
    const double step = 2.0 * pi / resolution;
    double diam = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) {
        double d2 = 0.0;
        for (int a = 0; a < m; ++a) {
            d2 += (s.images_[i * m + a] - s.images_[a]) * (s.images_[i * m + a] - s.images_[a]);
        }
        diam = std::max(diam, std::sqrt(d2));
    }
    require(diam > 0.0, ErrorCode::Domain, "sphere samples collapse to a point: the samples are not injective");
    const double cell = std::max(diam * 8.0 / resolution, 1e-300);
    PointCloud cloud(m, s.images_, cell);
    double spacing = 0.0;
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto p = s.image(i);
        auto u = s.param(i);
        double nn = std::numeric_limits<double>::infinity();
        cloud.for_each_within(p, 2.0 * cell, [&](std::size_t j, double d) {
            if (j == i) {
                return;
            }
            nn = std::min(nn, d);
            auto v = s.param(j);
            double pu = 0.0;
            for (int a = 0; a <= k; ++a) {
                pu += (u[a] - v[a]) * (u[a] - v[a]);
            }
            if (std::sqrt(pu) >= 3.0 * step * (1.0 - 1e-9)) {
                margin = std::min(margin, d);
            }
        });
        if (std::isfinite(nn)) {
            spacing = std::max(spacing, nn);
        }
    }
    require(margin > 1e-12 * diam, ErrorCode::Domain,
            "sphere samples are not injective: distinct parameters map to the same point");
    s.margin_ = std::isfinite(margin) ? margin : 2.0 * cell;
    s.spacing_ = spacing > 0.0 ? spacing : cell;
    return s;
}

std::vector<double> EmbeddedSphere::hemisphere_images(int sign) const
{
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i) {
        if (side_[i] == 0 || side_[i] == sign) {
            auto p = image(i);
            out.insert(out.end(), p.begin(), p.end());
        }
    }
    return out;
}

EmbeddedSphere EmbeddedSphere::equator() const
{
    require(k_ >= 1, ErrorCode::InvalidArgument, "the 0-sphere has no equator");
    Map inner = map_;
    const int k = k_;
    return sample(k_ - 1, m_,
                  [inner, k](std::span<const double> u, std::span<double> out) {
                      double v[25];
                      std::copy(u.begin(), u.begin() + k, v);
                      v[k] = 0.0;
                      inner({v, static_cast<std::size_t>(k + 1)}, out);
                  },
                  std::max(resolution_, 8));
}

// ---------------------------------------------------------------------------
// Construction

namespace {

// Smooth forms of the induction, evaluated pointwise.
struct KappaNode {
    virtual ~KappaNode() = default;
    int m = 0;
    int degree = 0;
    virtual void kappa(std::span<const double> p, std::span<double> out) const = 0;
};

struct BaseNode final : KappaNode {
    Cutoff eta;
    explicit BaseNode(Cutoff c) : eta(std::move(c))
    {
        m = eta.dim();
        degree = 1;
    }
    void kappa(std::span<const double> p, std::span<double> out) const override { eta.value_gradient(p, out); }
};

// kappa = s d psi_+ ^ kappa~ with psi_+ = chi_+ / (chi_+ + chi_- + chi_U).
struct StepNode final : KappaNode {
    std::shared_ptr<const KappaNode> child;
    Cutoff near_minus; // chi_+ = 1 - near_minus
    Cutoff near_plus;  // chi_- = 1 - near_plus
    Cutoff tube;       // chi_U
    int sign = 1;
    double min_denominator = 1e-3;
    std::shared_ptr<const WedgeTable> table;

    StepNode(std::shared_ptr<const KappaNode> c, Cutoff nm, Cutoff np, Cutoff t, int s, double mind)
        : child(std::move(c)), near_minus(std::move(nm)), near_plus(std::move(np)), tube(std::move(t)), sign(s),
          min_denominator(mind)
    {
        m = child->m;
        degree = child->degree + 1;
        table = WedgeTable::get(m, 1, child->degree);
    }

    /// psi_+ and its gradient; returns the partition denominator.
    double psi(std::span<const double> p, double& value, std::span<double> grad) const
    {
        double gm[24], gp[24], gu[24];
        const double cm = near_minus.value_gradient(p, {gm, static_cast<std::size_t>(m)});
        const double cp = near_plus.value_gradient(p, {gp, static_cast<std::size_t>(m)});
        const double cu = tube.value_gradient(p, {gu, static_cast<std::size_t>(m)});
        const double chi_plus = 1.0 - cm;
        const double chi_minus = 1.0 - cp;
        const double den = chi_plus + chi_minus + cu;
        if (den <= min_denominator) {
            std::ostringstream os;
            os << "partition of unity denominator " << den << " <= " << min_denominator
               << ": the tube and hemisphere cutoffs do not cover the space";
            fail(ErrorCode::Numerical, os.str());
        }
        value = chi_plus / den;
        for (int a = 0; a < m; ++a) {
            const double dplus = -gm[a];
            const double dden = -gm[a] - gp[a] + gu[a];
            grad[a] = (dplus * den - chi_plus * dden) / (den * den);
        }
        return den;
    }

    void kappa(std::span<const double> p, std::span<double> out) const override
    {
        const std::size_t nin = binomial(m, child->degree);
        double kt[4096];
        require(nin <= 4096, ErrorCode::InvalidArgument, "form too large for pointwise evaluation");
        std::span<double> ktilde(kt, nin);
        child->kappa(p, ktilde);
        std::fill(out.begin(), out.begin() + binomial(m, degree), 0.0);
        bool zero = true;
        for (double c : ktilde) {
            zero = zero && c == 0.0;
        }
        if (zero) {
            return;
        }
        double v = 0.0;
        double g[24];
        psi(p, v, {g, static_cast<std::size_t>(m)});
        table->apply({g, static_cast<std::size_t>(m)}, ktilde, out);
        for (std::size_t c = 0; c < binomial(m, degree); ++c) {
            out[c] *= sign;
        }
    }
};

double distance(std::span<const double> a, std::span<const double> b)
{
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d2 += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(d2);
}

// Box around the sphere images with `pad` plus three cells on each side and
// `points` nodes per axis.
GridSpec padded_box(const EmbeddedSphere& f, double pad, int points)
{
    const int m = f.m();
    require(points >= 11, ErrorCode::InvalidArgument, "linking grid needs at least 11 points per axis");
    std::vector<double> lo(m, std::numeric_limits<double>::infinity());
    std::vector<double> hi(m, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto p = f.image(i);
        for (int a = 0; a < m; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    }
    std::vector<int> pts(m, points);
    for (int a = 0; a < m; ++a) {
        const double h = (hi[a] - lo[a] + 2.0 * pad) / (points - 7);
        lo[a] -= pad + 3.0 * h;
        hi[a] += pad + 3.0 * h;
    }
    return GridSpec(lo, hi, pts);
}

void flush_roundoff(FormField& f)
{
    const double tol = 1e-10 * std::max(1.0, f.sup_norm());
    for (double& c : f.data()) {
        if (std::abs(c) <= tol) {
            c = 0.0;
        }
    }
}

void finish(LinkingForm& out, const EmbeddedSphere& f)
{
    const GridSpec& g = out.kappa.grid();
    require(out.kappa.vanishes_near_boundary(2), ErrorCode::Domain,
            "linking form reaches the grid boundary; enlarge the grid");
    double diam = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
        diam += (g.hi()[a] - g.lo()[a]) * (g.hi()[a] - g.lo()[a]);
    }
    PointCloud cloud(f.m(), f.images(), std::max(g.max_spacing(), 1e-12));
    out.clearance = support_clearance(out.kappa, cloud, std::sqrt(diam));
    require(out.clearance > 0.0, ErrorCode::Domain, "linking form support touches the sphere: resolution too coarse");
    out.closedness_residual = (out.kappa.degree() < g.dim()) ? exterior_derivative(out.kappa).sup_norm() : 0.0;
}

} // namespace

double support_clearance(const FormField& field, const PointCloud& targets, double limit)
{
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> x(field.dim());
    const GridSpec& g = field.grid();
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        bool nz = false;
        for (double c : field.node(i)) {
            nz = nz || c != 0.0;
        }
        if (!nz) {
            continue;
        }
        g.node_point(i, x);
        const auto hit = targets.nearest(x, std::min(limit, best));
        best = std::min(best, hit.distance);
    }
    return std::isfinite(best) ? best : limit;
}

LinkingForm construct_kappa_base(const EmbeddedSphere& f, const LinkingParams& params)
{
    require(f.k() == 0, ErrorCode::InvalidArgument, "base construction needs the 0-sphere");
    const int m = f.m();
    const double sep = distance(f.image(0), f.image(1));
    require(sep > 0.0, ErrorCode::Domain, "f(+1) and f(-1) coincide");
    require(params.base_inner > 0.0 && params.base_outer > params.base_inner && params.base_outer < 0.5,
            ErrorCode::InvalidArgument, "base cutoff radii must satisfy 0 < inner < outer < 1/2 (of the separation)");
    const double r_in = params.base_inner * sep;
    const double r_out = params.base_outer * sep;
    const GridSpec grid = params.grid ? *params.grid : padded_box(f, r_out, params.points);
    require(r_in >= 2.0 * grid.max_spacing(), ErrorCode::Domain,
            "grid does not resolve the two points: inner cutoff radius below two grid spacings");

    auto node = std::make_shared<BaseNode>(Cutoff(m, {f.image(0).begin(), f.image(0).end()}, r_in, r_out));
    FormField eta(grid, 0, true);
    std::vector<double> x(m);
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        grid.node_point(i, x);
        eta.node(i)[0] = node->eta.value(x);
    }
    require(eta.vanishes_near_boundary(3), ErrorCode::Domain, "cutoff reaches the grid boundary; enlarge the grid");

    LinkingForm out;
    out.k = 0;
    out.m = m;
    out.kappa = exterior_derivative(eta);
    out.kappa.set_compact(true);
    out.orientation = 1;
    out.levels.push_back({0, 0.0, r_in, 1.0});
    std::shared_ptr<const KappaNode> keep = node;
    out.exact = FormFunction{m, 1, [keep](std::span<const double> p, std::span<double> o) { keep->kappa(p, o); }};
    finish(out, f);
    return out;
}

LinkingForm construct_kappa(const EmbeddedSphere& f, const LinkingParams& params)
{
    if (f.k() == 0) {
        return construct_kappa_base(f, params);
    }
    const int k = f.k();
    const int m = f.m();
    require(params.tube_inner > 0.0 && params.tube_inner < 1.0, ErrorCode::InvalidArgument, "tube_inner must lie in (0, 1)");
    require(params.hemi_inner > 0.0 && params.hemi_outer > params.hemi_inner, ErrorCode::InvalidArgument,
            "hemisphere cutoff radii must satisfy 0 < inner < outer");
    require(params.hemi_inner < params.tube_inner, ErrorCode::InvalidArgument,
            "hemisphere inner radius must stay below the tube plateau for the cutoffs to cover");

    // chain[j] is the j-sphere: chain[k] = f, chain[j-1] = equator of chain[j].
    std::vector<EmbeddedSphere> chain(k + 1);
    chain[k] = f;
    for (int j = k; j >= 1; --j) {
        chain[j - 1] = chain[j].equator();
    }
    const double sep = distance(chain[0].image(0), chain[0].image(1));
    require(sep > 0.0, ErrorCode::Domain, "the equatorial points coincide");
    const double r_in = params.base_inner * sep;
    const double r_out = params.base_outer * sep;

    // Radii per level; only the outermost tube is floored at three grid spacings.
    std::vector<double> rho(k + 1, 0.0), clearance(k + 1, 0.0);
    clearance[0] = r_in;
    for (int j = 1; j <= k; ++j) {
        rho[j] = 0.5 * clearance[j - 1];
        clearance[j] = params.hemi_inner * rho[j];
    }
    auto pad_for = [&]() {
        double pad = 0.0;
        for (int j = 1; j <= k; ++j) {
            pad = std::max(pad, params.hemi_outer * rho[j]);
        }
        return pad;
    };
    GridSpec grid;
    if (params.grid) {
        grid = *params.grid;
        rho[k] = std::max(rho[k], 3.0 * grid.max_spacing());
    } else {
        grid = padded_box(f, pad_for(), params.points);
        for (int it = 0; it < 50 && 3.0 * grid.max_spacing() > rho[k] * (1.0 + 1e-12); ++it) {
            rho[k] = 3.0 * grid.max_spacing();
            grid = padded_box(f, pad_for(), params.points);
        }
    }
    clearance[k] = params.hemi_inner * rho[k];
    const double h = grid.max_spacing();
    require(rho[k] < clearance[k - 1], ErrorCode::Domain,
            "grid too coarse: the tube around the equator would meet the support of the equatorial form");
    require(r_in >= 2.0 * h, ErrorCode::Domain, "grid too coarse for the base cutoff");
    for (int j = 1; j <= k; ++j) {
        require(params.hemi_inner * rho[j] >= 2.0 * h * (1.0 - 1e-12) && params.tube_inner * rho[j] >= 2.0 * h * (1.0 - 1e-12),
                ErrorCode::Domain, "grid too coarse for the tube and hemisphere radii");
    }

    LinkingForm out;
    out.k = k;
    out.m = m;
    std::vector<double> x(m);

    // Base level on the common grid.
    std::shared_ptr<const KappaNode> node =
        std::make_shared<BaseNode>(Cutoff(m, {chain[0].image(0).begin(), chain[0].image(0).end()}, r_in, r_out));
    FormField eta(grid, 0);
    {
        const auto& base = static_cast<const BaseNode&>(*node);
        for (std::size_t i = 0; i < grid.node_count(); ++i) {
            grid.node_point(i, x);
            eta.node(i)[0] = base.eta.value(x);
        }
    }
    FormField kappa = exterior_derivative(eta);
    out.levels.push_back({0, 0.0, r_in, 1.0});

    for (int j = 1; j <= k; ++j) {
        const EmbeddedSphere& s = chain[j];
        const double a_in = params.hemi_inner * rho[j];
        const double a_out = params.hemi_outer * rho[j];
        const int sign = (j % 2 == 0) ? 1 : -1;
        auto step = std::make_shared<StepNode>(node, Cutoff(m, s.hemisphere_images(-1), a_in, a_out),
                                               Cutoff(m, s.hemisphere_images(1), a_in, a_out),
                                               Cutoff(m, chain[j - 1].images(), params.tube_inner * rho[j], rho[j]),
                                               sign, params.min_denominator);

        // sigma' = (psi_+ - 1/2) kappa~ has compact support near the sphere and
        // the same exterior derivative as psi_+ kappa~.
        FormField sigma(grid, kappa.degree(), true);
        double den_min = std::numeric_limits<double>::infinity();
        double g[24];
        for (std::size_t i = 0; i < grid.node_count(); ++i) {
            grid.node_point(i, x);
            double v = 0.0;
            den_min = std::min(den_min, step->psi(x, v, {g, static_cast<std::size_t>(m)}));
            const double w = v - 0.5;
            if (w == 0.0) {
                continue;
            }
            auto src = kappa.node(i);
            auto dst = sigma.node(i);
            for (std::size_t c = 0; c < src.size(); ++c) {
                dst[c] = w * src[c];
            }
        }
        require(sigma.vanishes_near_boundary(3), ErrorCode::Domain,
                "partition support reaches the grid boundary; enlarge the grid");
        kappa = exterior_derivative(sigma);
        kappa *= static_cast<double>(sign);
        flush_roundoff(kappa);
        out.levels.push_back({j, rho[j], clearance[j], den_min});
        node = step;
        if (j == k) {
            out.orientation = sign;
        }
    }

    kappa.set_compact(true);
    out.kappa = std::move(kappa);
    std::shared_ptr<const KappaNode> keep = node;
    out.exact = FormFunction{m, k + 1, [keep](std::span<const double> p, std::span<double> o) { keep->kappa(p, o); }};
    finish(out, f);
    return out;
}

LinkingIntegral linking_integral(const SmoothMap& g, const LinkingForm& kappa, int points, KappaEvaluation mode)
{
    const int src = kappa.k + 1;
    require(g.source_dim == src, ErrorCode::DimensionMismatch, "filling must be defined on the (k+1)-ball");
    require(g.target_dim == kappa.m, ErrorCode::DimensionMismatch, "filling target differs from the ambient space");
    require(points >= 3, ErrorCode::InvalidArgument, "filling grid needs at least three points per axis");
    const GridSpec grid = GridSpec::cube(src, -1.0, 1.0, points);
    const JetField jets = g.sample(grid);

    // Boundary guard: images of nodes near the sphere must stay clear of supp kappa.
    const GridSpec& amb = kappa.kappa.grid();
    double amb_diag = 0.0;
    for (int a = 0; a < amb.dim(); ++a) {
        amb_diag += amb.spacing(a) * amb.spacing(a);
    }
    amb_diag = std::sqrt(amb_diag);
    std::vector<double> support;
    std::vector<double> y(amb.dim());
    for (std::size_t i = 0; i < amb.node_count(); ++i) {
        bool nz = false;
        for (double c : kappa.kappa.node(i)) {
            nz = nz || c != 0.0;
        }
        if (nz) {
            amb.node_point(i, y);
            support.insert(support.end(), y.begin(), y.end());
        }
    }
    LinkingIntegral result;
    result.boundary_distance = std::numeric_limits<double>::infinity();
    if (!support.empty()) {
        PointCloud cloud(amb.dim(), std::move(support), amb.max_spacing() * 4.0);
        // Boundary points: nodes near the unit sphere projected radially onto it.
        const double src_diag = grid.spacing(0) * std::sqrt(static_cast<double>(src));
        std::vector<double> x(src), val(kappa.m), jac(static_cast<std::size_t>(kappa.m) * src);
        for (std::size_t i = 0; i < grid.node_count(); ++i) {
            grid.node_point(i, x);
            double r2 = 0.0;
            for (double c : x) {
                r2 += c * c;
            }
            const double r = std::sqrt(r2);
            if (r < 1.0 - 2.0 * src_diag || r > 1.0 + 2.0 * src_diag) {
                continue;
            }
            for (double& c : x) {
                c /= r;
            }
            g.eval(x, val, jac);
            const auto hit = cloud.nearest(val, std::numeric_limits<double>::infinity());
            result.boundary_distance = std::min(result.boundary_distance, hit.distance);
        }
        if (result.boundary_distance <= amb_diag) {
            std::ostringstream os;
            os << "filling boundary comes within " << result.boundary_distance
               << " of the support of kappa (needs more than " << amb_diag << ")";
            fail(ErrorCode::Domain, os.str());
        }
    }

    FormField pb;
    if (mode == KappaEvaluation::Exact) {
        require(kappa.exact.has_value(), ErrorCode::InvalidArgument, "linking form has no exact evaluator");
        pb = pullback(jets, *kappa.exact);
    } else {
        pb = pullback(jets, kappa.kappa.as_function());
    }
    result.value = integrate_top(pb, Ball{std::vector<double>(src, 0.0), 1.0});
    return result;
}

} // namespace heisen
