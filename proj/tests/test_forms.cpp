#include <heisen/forms.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

using namespace heisen;

namespace {

// Oracle: forms as maps from sorted axis tuples to coefficients; the wedge
// sums over all ways to split a tuple, with the sign of the shuffle counted
// by inversions.
using Tuple = std::vector<int>;
using Sparse = std::map<Tuple, double>;

Sparse to_sparse(const ConstForm& f)
{
    Sparse s;
    for (std::size_t i = 0; i < f.coeffs().size(); ++i) {
        s[f.basis().indices(i)] = f[i];
    }
    return s;
}

int inversions_sign(const Tuple& seq)
{
    int inv = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        for (std::size_t j = i + 1; j < seq.size(); ++j) {
            if (seq[i] == seq[j]) {
                return 0;
            }
            inv += seq[i] > seq[j];
        }
    }
    return inv % 2 ? -1 : 1;
}

Sparse ref_wedge(const Sparse& a, const Sparse& b)
{
    Sparse out;
    for (const auto& [ia, ca] : a) {
        for (const auto& [ib, cb] : b) {
            Tuple cat = ia;
            cat.insert(cat.end(), ib.begin(), ib.end());
            const int s = inversions_sign(cat);
            if (s == 0) {
                continue;
            }
            Tuple sorted = cat;
            std::sort(sorted.begin(), sorted.end());
            out[sorted] += s * ca * cb;
        }
    }
    return out;
}

ConstForm random_form(std::mt19937_64& rng, int d, int k)
{
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    ConstForm f(d, k);
    for (double& c : f.coeffs()) {
        c = U(rng);
    }
    return f;
}

double max_diff(const ConstForm& a, const ConstForm& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.coeffs().size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

FormFunction scalar_fn(int dim, std::function<double(std::span<const double>)> f)
{
    return {dim, 0, [f](std::span<const double> p, std::span<double> out) { out[0] = f(p); }};
}

} // namespace

TEST_SUITE("forms")
{
    TEST_CASE("basis sizes and lexicographic layout")
    {
        for (int d = 0; d <= 8; ++d) {
            for (int k = 0; k <= d; ++k) {
                const auto b = MultiIndexBasis::get(d, k);
                CHECK(b->size() == binomial(d, k));
                for (std::size_t i = 0; i + 1 < b->size(); ++i) {
                    CHECK(b->indices(i) < b->indices(i + 1));
                }
            }
        }
        const auto b = MultiIndexBasis::get(3, 2);
        CHECK(b->indices(0) == Tuple{0, 1});
        CHECK(b->indices(1) == Tuple{0, 2});
        CHECK(b->indices(2) == Tuple{1, 2});
    }

    TEST_CASE("wedge examples")
    {
        const ConstForm dxdy = wedge(ConstForm::basis_element(2, {0}), ConstForm::basis_element(2, {1}));
        const ConstForm dydx = wedge(ConstForm::basis_element(2, {1}), ConstForm::basis_element(2, {0}));
        CHECK(dxdy[0] == 1.0);
        CHECK(dydx[0] == -1.0);

        // d = 4 with axes x1, x2, y1, y2 = 0, 1, 2, 3.
        const ConstForm omega = ConstForm::basis_element(4, {0, 2}) + ConstForm::basis_element(4, {1, 3});
        const ConstForm w = wedge(omega, ConstForm::basis_element(4, {0}));
        CHECK(max_diff(w, ConstForm::basis_element(4, {0, 1, 3})) == 0.0);

        std::mt19937_64 rng(1);
        for (int d = 2; d <= 6; ++d) {
            const ConstForm a = random_form(rng, d, 1);
            CHECK(wedge(a, a).max_abs() <= 1e-15);
        }
    }

    TEST_CASE("wedge agrees with the shuffle oracle; anticommutativity and associativity for d <= 6")
    {
        std::mt19937_64 rng(42);
        for (int d = 1; d <= 6; ++d) {
            for (int p = 0; p <= d; ++p) {
                for (int q = 0; p + q <= d; ++q) {
                    const ConstForm a = random_form(rng, d, p);
                    const ConstForm b = random_form(rng, d, q);
                    const ConstForm ab = wedge(a, b);
                    const Sparse want = ref_wedge(to_sparse(a), to_sparse(b));
                    for (std::size_t i = 0; i < ab.coeffs().size(); ++i) {
                        const auto it = want.find(ab.basis().indices(i));
                        const double w = it == want.end() ? 0.0 : it->second;
                        CHECK(std::abs(ab[i] - w) <= 1e-13);
                    }
                    const double sign = (p * q) % 2 ? -1.0 : 1.0;
                    CHECK(max_diff(ab, sign * wedge(b, a)) <= 1e-13);
                    for (int r = 0; p + q + r <= d; ++r) {
                        const ConstForm c = random_form(rng, d, r);
                        CHECK(max_diff(wedge(wedge(a, b), c), wedge(a, wedge(b, c))) <= 1e-12);
                    }
                }
            }
        }
    }

    TEST_CASE("basis_element applies the permutation sign")
    {
        CHECK(ConstForm::basis_element(3, {2, 0}).coefficient({0, 2}) == -1.0);
        CHECK(ConstForm::basis_element(4, {3, 1, 0}).coefficient({0, 1, 3}) == -1.0);
        CHECK(ConstForm::basis_element(4, {1, 3, 0}).coefficient({0, 1, 3}) == 1.0);
        CHECK(ConstForm::basis_element(3, {1, 1}).max_abs() == 0.0);
        CHECK_THROWS_AS(wedge(ConstForm::basis_element(3, {0, 1}), ConstForm::basis_element(3, {0, 2})), Error);
    }

    TEST_CASE("grid indexing round trip")
    {
        const GridSpec g({-1.0, 0.0, 2.0}, {1.0, 3.0, 2.5}, {5, 4, 3});
        CHECK(g.node_count() == 60);
        std::vector<int> idx(3);
        std::vector<double> x(3);
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            g.multi_index(i, idx);
            CHECK(g.linear_index(idx) == i);
            g.node_point(i, x);
            for (int a = 0; a < 3; ++a) {
                CHECK(x[a] == doctest::Approx(g.coordinate(a, idx[a])));
            }
        }
        CHECK(g.spacing(1) == doctest::Approx(1.0));
        CHECK_THROWS_AS(GridSpec::cube(2, 0.0, 1.0, 1), Error);
    }

    TEST_CASE("exterior derivative examples")
    {
        const GridSpec g = GridSpec::cube(2, -1.0, 1.0, 17);
        const FormField c = FormField::sample(g, FormFunction::constant(ConstForm::basis_element(2, {0})));
        CHECK(exterior_derivative(c).sup_norm() == 0.0);

        // d(y dx) = -dx^dy, exact for affine coefficients.
        const FormField ydx = FormField::sample(g, {2, 1, [](std::span<const double> p, std::span<double> o) {
                                                       o[0] = p[1];
                                                       o[1] = 0.0;
                                                   }});
        const FormField d = exterior_derivative(ydx);
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            CHECK(std::abs(d.node(i)[0] + 1.0) <= 1e-10);
        }
    }

    TEST_CASE("d o d on cubic coefficients is O(h)")
    {
        auto cubic = [](std::span<const double> p) {
            return p[0] * p[0] * p[1] - 2.0 * p[1] * p[1] * p[1] + p[0] * p[1] * p[2] + 0.5 * p[2] * p[2] * p[0];
        };
        std::vector<double> res;
        std::vector<double> hs;
        for (int pts : {9, 17, 33}) {
            const GridSpec g = GridSpec::cube(3, -1.0, 1.0, pts);
            const FormField f = FormField::sample(g, scalar_fn(3, cubic));
            const FormField dd = exterior_derivative(exterior_derivative(f));
            res.push_back(dd.sup_norm());
            hs.push_back(g.max_spacing());
            // A 1-form with cubic coefficients as well.
            const FormField a = FormField::sample(g, {3, 1, [&](std::span<const double> p, std::span<double> o) {
                                                         o[0] = cubic(p);
                                                         o[1] = p[0] * p[0] * p[0];
                                                         o[2] = p[1] * p[2] * p[2];
                                                     }});
            CHECK(exterior_derivative(exterior_derivative(a)).sup_norm() <= 20.0 * g.max_spacing());
        }
        for (std::size_t i = 0; i < res.size(); ++i) {
            CHECK(res[i] <= 20.0 * hs[i]);
        }
    }

    TEST_CASE("pullback examples")
    {
        const GridSpec g = GridSpec::cube(2, 0.1, 1.0, 9);
        const FormFunction area = FormFunction::constant(ConstForm::basis_element(2, {0, 1}));

        const SmoothMap id{2, 2, [](std::span<const double> x, std::span<double> v, std::span<double> j) {
                               v[0] = x[0];
                               v[1] = x[1];
                               j[0] = 1.0;
                               j[1] = 0.0;
                               j[2] = 0.0;
                               j[3] = 1.0;
                           }};
        const FormField pid = pullback(id.sample(g), area);
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            CHECK(pid.node(i)[0] == 1.0);
        }

        const SmoothMap polar{2, 2, [](std::span<const double> x, std::span<double> v, std::span<double> j) {
                                  const double r = x[0], th = x[1];
                                  v[0] = r * std::cos(th);
                                  v[1] = r * std::sin(th);
                                  j[0] = std::cos(th);
                                  j[1] = -r * std::sin(th);
                                  j[2] = std::sin(th);
                                  j[3] = r * std::cos(th);
                              }};
        const FormField pp = pullback(polar.sample(g), area);
        std::vector<double> x(2);
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            g.node_point(i, x);
            CHECK(pp.node(i)[0] == doctest::Approx(x[0]).epsilon(1e-14));
        }

        const SmoothMap constant{2, 3, [](std::span<const double>, std::span<double> v, std::span<double> j) {
                                     std::fill(v.begin(), v.end(), 0.3);
                                     std::fill(j.begin(), j.end(), 0.0);
                                 }};
        CHECK(pullback(constant.sample(g), FormFunction::constant(ConstForm::basis_element(3, {1}))).sup_norm() == 0.0);
    }

    TEST_CASE("pullback respects wedge and commutes with d up to O(h)")
    {
        // f(u, v) = (u + v^2, sin u, u v) into R^3.
        const SmoothMap f{2, 3, [](std::span<const double> x, std::span<double> v, std::span<double> j) {
                              v[0] = x[0] + x[1] * x[1];
                              v[1] = std::sin(x[0]);
                              v[2] = x[0] * x[1];
                              j[0] = 1.0;
                              j[1] = 2.0 * x[1];
                              j[2] = std::cos(x[0]);
                              j[3] = 0.0;
                              j[4] = x[1];
                              j[5] = x[0];
                          }};
        const FormFunction a{3, 1, [](std::span<const double> p, std::span<double> o) {
                                 o[0] = p[1];
                                 o[1] = p[2] * p[0];
                                 o[2] = 1.0 + p[0];
                             }};
        const FormFunction b{3, 1, [](std::span<const double> p, std::span<double> o) {
                                 o[0] = std::cos(p[2]);
                                 o[1] = 0.5;
                                 o[2] = p[1] * p[1];
                             }};
        const FormFunction ab{3, 2, [&](std::span<const double> p, std::span<double> o) {
                                  double va[3], vb[3];
                                  a.eval(p, va);
                                  b.eval(p, vb);
                                  const ConstForm w = wedge(ConstForm(3, 1, {va, va + 3}), ConstForm(3, 1, {vb, vb + 3}));
                                  std::copy(w.coeffs().begin(), w.coeffs().end(), o.begin());
                              }};
        // a = y dx + zx dy + (1 + x) dz, so da = (z - 1) dx^dy + dx^dz - x dy^dz.
        const FormFunction da{3, 2, [](std::span<const double> p, std::span<double> o) {
                                  o[0] = p[2] - 1.0; // dx^dy
                                  o[1] = 1.0;        // dx^dz
                                  o[2] = -p[0];      // dy^dz
                              }};
        double prev = INFINITY;
        for (int pts : {17, 33, 65}) {
            const GridSpec g = GridSpec::cube(2, -1.0, 1.0, pts);
            const JetField jf = f.sample(g);
            const FormField lhs = pullback(jf, ab);
            const FormField rhs = wedge_field(pullback(jf, a), pullback(jf, b));
            for (std::size_t i = 0; i < g.node_count(); ++i) {
                CHECK(std::abs(lhs.node(i)[0] - rhs.node(i)[0]) <= 1e-12);
            }
            FormField nat = exterior_derivative(pullback(jf, a));
            FormField exact = pullback(jf, da);
            exact *= -1.0;
            nat += exact;
            const double err = nat.sup_norm();
            CHECK(err <= 10.0 * g.max_spacing());
            CHECK(err < prev);
            prev = err;
        }
    }

    TEST_CASE("integration examples")
    {
        const FormFunction area = FormFunction::constant(ConstForm::basis_element(2, {0, 1}));
        const GridSpec unit = GridSpec::cube(2, 0.0, 1.0, 33);
        CHECK(integrate_top(FormField::sample(unit, area)) == doctest::Approx(1.0).epsilon(1e-14));
        const FormField xa = FormField::sample(unit, {2, 2, [](std::span<const double> p, std::span<double> o) { o[0] = p[0]; }});
        CHECK(integrate_top(xa) == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(integrate_top(xa, Box{{0.0, 0.0}, {0.5, 1.0}}) == doctest::Approx(0.125).epsilon(1e-12));

        for (int pts : {65, 129, 257}) {
            const GridSpec g = GridSpec::cube(2, -1.0, 1.0, pts);
            const double h = g.max_spacing();
            const double v = integrate_top(FormField::sample(g, area), Ball{{0.0, 0.0}, 1.0});
            CHECK(std::abs(v - std::numbers::pi) <= 4.0 * h);
            CHECK(v == doctest::Approx(domain_cell_volume(g, Ball{{0.0, 0.0}, 1.0})).epsilon(1e-12));
        }
        CHECK_THROWS_AS(integrate_top(FormField::sample(unit, FormFunction::constant(ConstForm::basis_element(2, {0})))), Error);
    }

    TEST_CASE("interpolation and compact evaluation")
    {
        const GridSpec g = GridSpec::cube(2, -1.0, 1.0, 5);
        const FormField f = FormField::sample(g, scalar_fn(2, [](std::span<const double> p) { return 2.0 * p[0] - p[1] + 0.5; }));
        const double p[2] = {0.3, -0.45};
        CHECK(f.evaluate(p)[0] == doctest::Approx(2.0 * 0.3 + 0.45 + 0.5).epsilon(1e-14));
        const double out[2] = {1.5, 0.0};
        CHECK_THROWS_AS(f.evaluate(out), Error);
        FormField c(g, 0, true);
        CHECK(c.evaluate(out)[0] == 0.0);
        CHECK(c.vanishes_near_boundary(2));
    }
}
