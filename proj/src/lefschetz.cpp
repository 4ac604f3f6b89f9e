#include <heisen/lefschetz.hpp>

#include <cmath>
#include <map>
#include <mutex>

namespace heisen {

ConstForm symplectic_form(int n)
{
    HeisenbergDim dim(n);
    ConstForm w(2 * n, 2);
    for (int j = 0; j < n; ++j) {
        w += ConstForm::basis_element(2 * n, {j, n + j});
    }
    return w;
}

LefschetzMatrix lefschetz_matrix(int n)
{
    HeisenbergDim dim(n);
    const std::size_t size = binomial(2 * n, n - 1);
    require(size <= kLefschetzBudget, ErrorCode::InvalidArgument, "Lefschetz basis exceeds the combinatorial budget");
    require(size == binomial(2 * n, n + 1), ErrorCode::Internal, "binomial(2n, n-1) != binomial(2n, n+1)");

    const ConstForm omega = symplectic_form(n);
    const auto src = MultiIndexBasis::get(2 * n, n - 1);
    LefschetzMatrix L{n, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size))};
    auto table = WedgeTable::get(2 * n, 2, n - 1);
    std::vector<double> e(src->size(), 0.0);
    std::vector<double> col(size, 0.0);
    for (std::size_t c = 0; c < src->size(); ++c) {
        std::fill(e.begin(), e.end(), 0.0);
        e[c] = 1.0;
        table->apply(omega.coeffs(), e, col);
        for (std::size_t r = 0; r < size; ++r) {
            L.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = col[r];
        }
    }
    return L;
}

namespace {

const Eigen::PartialPivLU<Eigen::MatrixXd>& lefschetz_lu(int n)
{
    static std::mutex mu;
    static std::map<int, Eigen::PartialPivLU<Eigen::MatrixXd>> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) {
        it = cache.emplace(n, Eigen::PartialPivLU<Eigen::MatrixXd>(lefschetz_matrix(n).matrix)).first;
    }
    return it->second;
}

// Positions of the dt-free multi-indices of R^{2n+1} inside the R^{2n} basis
// coincide, because t is the last axis; this maps one onto the other.
std::vector<std::size_t> horizontal_positions(int n, int degree)
{
    const auto small = MultiIndexBasis::get(2 * n, degree);
    const auto big = MultiIndexBasis::get(2 * n + 1, degree);
    std::vector<std::size_t> pos(small->size());
    for (std::size_t i = 0; i < small->size(); ++i) {
        pos[i] = big->find(small->mask(i));
    }
    return pos;
}

} // namespace

ConstForm lefschetz_invert(int n, const ConstForm& target)
{
    HeisenbergDim dim(n);
    require(target.dim() == 2 * n && target.degree() == n + 1, ErrorCode::DimensionMismatch,
            "Lefschetz inversion expects an (n+1)-form on R^{2n}");
    const auto& lu = lefschetz_lu(n);
    Eigen::Map<const Eigen::VectorXd> rhs(target.coeffs().data(), static_cast<Eigen::Index>(target.coeffs().size()));
    Eigen::VectorXd sol = lu.solve(rhs);
    ConstForm out(2 * n, n - 1, std::vector<double>(sol.data(), sol.data() + sol.size()));

    const ConstForm back = wedge(symplectic_form(n), out);
    double err = 0.0;
    for (std::size_t i = 0; i < back.coeffs().size(); ++i) {
        err = std::max(err, std::abs(back[i] - target[i]));
    }
    require(err <= 1e-10 * std::max(target.max_abs(), 1e-300) || err == 0.0, ErrorCode::Internal,
            "Lefschetz inversion residual above tolerance");
    return out;
}

ConstForm contact_reconstruct(const ConstForm& beta, const ConstForm& delta, std::span<const double> p, int n)
{
    const int d = 2 * n + 1;
    ConstForm alpha(d, 1);
    contact_alpha(p, n, alpha.coeffs());
    return wedge(alpha, beta) + wedge(d_alpha(n), delta);
}

ContactDecomposition decompose_pointwise(const ConstForm& kappa, const HPoint& p)
{
    return decompose_pointwise(kappa, p.coords());
}

ContactDecomposition decompose_pointwise(const ConstForm& kappa, std::span<const double> p)
{
    require(kappa.dim() >= 3 && kappa.dim() % 2 == 1, ErrorCode::DimensionMismatch, "kappa must live on R^{2n+1}");
    const int d = kappa.dim();
    const int n = (d - 1) / 2;
    require(kappa.degree() == n + 1, ErrorCode::DimensionMismatch, "kappa must have degree n+1");
    require(static_cast<int>(p.size()) == d, ErrorCode::DimensionMismatch, "point dimension differs from kappa");

    const auto eta_pos = horizontal_positions(n, n + 1);
    const auto beta_pos = horizontal_positions(n, n);
    const std::size_t N = kappa.coeffs().size();
    const std::size_t ne = eta_pos.size();
    const std::size_t nb = beta_pos.size();
    require(ne + nb == N, ErrorCode::Internal, "contact basis has the wrong size");

    // Columns: dx_I ^ dy_J (|I|+|J| = n+1), then alpha(p) ^ dx_I' ^ dy_J' (|I'|+|J'| = n).
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    for (std::size_t c = 0; c < ne; ++c) {
        B(static_cast<Eigen::Index>(eta_pos[c]), static_cast<Eigen::Index>(c)) = 1.0;
    }
    std::vector<double> alpha(d);
    contact_alpha(p, n, alpha);
    auto table = WedgeTable::get(d, 1, n);
    std::vector<double> e(binomial(d, n), 0.0);
    std::vector<double> col(N);
    for (std::size_t c = 0; c < nb; ++c) {
        std::fill(e.begin(), e.end(), 0.0);
        e[beta_pos[c]] = 1.0;
        table->apply(alpha, e, col);
        for (std::size_t r = 0; r < N; ++r) {
            B(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(ne + c)) = col[r];
        }
    }

    Eigen::Map<const Eigen::VectorXd> rhs(kappa.coeffs().data(), static_cast<Eigen::Index>(N));
    Eigen::VectorXd sol = B.partialPivLu().solve(rhs);

    ConstForm eta(2 * n, n + 1);
    for (std::size_t c = 0; c < ne; ++c) {
        eta[c] = sol(static_cast<Eigen::Index>(c)) / 4.0;
    }
    ConstForm beta(d, n);
    for (std::size_t c = 0; c < nb; ++c) {
        beta[beta_pos[c]] = sol(static_cast<Eigen::Index>(ne + c));
    }
    const ConstForm delta_small = lefschetz_invert(n, eta);
    const auto delta_pos = horizontal_positions(n, n - 1);
    ConstForm delta(d, n - 1);
    for (std::size_t c = 0; c < delta_pos.size(); ++c) {
        delta[delta_pos[c]] = delta_small[c];
    }

    ContactDecomposition out{std::move(beta), std::move(delta), 0.0};
    const double scale = kappa.max_abs();
    if (scale > 0.0) {
        const ConstForm back = contact_reconstruct(out.beta, out.delta, p, n);
        out.residual = (back - kappa).max_abs() / scale;
        require(out.residual <= 1e-10, ErrorCode::Internal, "contact decomposition residual above tolerance");
    }
    return out;
}

ContactDecompositionField decompose_field(const FormField& kappa)
{
    const GridSpec& g = kappa.grid();
    const int d = g.dim();
    require(d >= 3 && d % 2 == 1, ErrorCode::DimensionMismatch, "kappa must live on R^{2n+1}");
    const int n = (d - 1) / 2;
    require(kappa.degree() == n + 1, ErrorCode::DimensionMismatch, "kappa must have degree n+1");
    require(kappa.compact(), ErrorCode::InvalidArgument, "decompose_field expects a compactly supported field");
    for (int a = 0; a < d; ++a) {
        require(g.points()[a] >= 4, ErrorCode::InvalidArgument, "degenerate grid: fewer than 4 points on an axis");
    }

    ContactDecompositionField out{FormField(g, n, true), FormField(g, n - 1, true), FormField(), 0.0};
    std::vector<double> x(d);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        auto k = kappa.node(i);
        bool zero = true;
        for (double c : k) {
            zero = zero && c == 0.0;
        }
        if (zero) {
            continue;
        }
        g.node_point(i, x);
        ContactDecomposition cd = decompose_pointwise(kappa.node_form(i), x);
        std::copy(cd.beta.coeffs().begin(), cd.beta.coeffs().end(), out.beta.node(i).begin());
        std::copy(cd.delta.coeffs().begin(), cd.delta.coeffs().end(), out.delta.node(i).begin());
        out.max_residual = std::max(out.max_residual, cd.residual);
    }
    out.d_delta = exterior_derivative(out.delta);
    return out;
}

double dt_component_max(const ConstForm& f, int t_axis)
{
    double m = 0.0;
    for (std::size_t i = 0; i < f.basis().size(); ++i) {
        if (f.basis().mask(i) & (1u << t_axis)) {
            m = std::max(m, std::abs(f[i]));
        }
    }
    return m;
}

double dt_component_max(const FormField& f, int t_axis)
{
    double m = 0.0;
    const std::size_t nc = f.components();
    for (std::size_t c = 0; c < nc; ++c) {
        if (!(f.basis().mask(c) & (1u << t_axis))) {
            continue;
        }
        for (std::size_t i = 0; i < f.grid().node_count(); ++i) {
            m = std::max(m, std::abs(f.node(i)[c]));
        }
    }
    return m;
}

} // namespace heisen
