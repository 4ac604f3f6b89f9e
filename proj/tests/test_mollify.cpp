#include <heisen/mollify.hpp>

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace heisen;

namespace {

// Composite Simpson on [0, 1] of r^{m-1} g(r) times the sphere area.
double radial_integral(int m, const std::function<double(double)>& g, int panels = 20000)
{
    const double h = 1.0 / panels;
    double s = 0.0;
    for (int i = 0; i <= panels; ++i) {
        const double r = i * h;
        const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        s += w * std::pow(r, m - 1) * g(r);
    }
    const double area = 2.0 * std::pow(std::numbers::pi, m / 2.0) / std::tgamma(m / 2.0);
    return area * s * h / 3.0;
}

SeminormQuery query(double gamma, double eps, Metric metric)
{
    SeminormQuery q;
    q.gamma = gamma;
    q.epsilon = eps;
    q.metric = metric;
    return q;
}

double bump(double r)
{
    return r < 1.0 ? std::exp(-1.0 / (1.0 - r * r)) : 0.0;
}

double bump_slope(double r)
{
    return r < 1.0 ? bump(r) * 2.0 * r / ((1.0 - r * r) * (1.0 - r * r)) : 0.0;
}

SampledMap vertical_line(double half, double h)
{
    return SampledMap::sample(GridSpec::centered(1, half, h), 3, [](std::span<const double> s, std::span<double> o) {
        o[0] = 0.0;
        o[1] = 0.0;
        o[2] = s[0];
    });
}

} // namespace

TEST_SUITE("mollify")
{
    TEST_CASE("mollifier constants against an independent radial quadrature")
    {
        for (int m = 1; m <= 4; ++m) {
            const Mollifier& phi = Mollifier::standard(m);
            const double mass = radial_integral(m, bump);
            CHECK(phi.normalization() * mass == doctest::Approx(1.0).epsilon(1e-8));
            const double grad = phi.normalization() * radial_integral(m, bump_slope);
            CHECK(phi.gradient_l1() == doctest::Approx(grad).epsilon(1e-7));
            const std::vector<double> out(m, 0.0);
            std::vector<double> far(m, 0.0);
            far[0] = 1.0;
            CHECK(phi.value(far) == 0.0);
            CHECK(phi.value(out) == doctest::Approx(phi.normalization() * std::exp(-1.0)));
        }
        // In one dimension ||phi'||_1 is the total variation 2 phi(0).
        const Mollifier& p1 = Mollifier::standard(1);
        CHECK(p1.gradient_l1() == doctest::Approx(2.0 * p1.normalization() / std::numbers::e).epsilon(1e-10));
    }

    TEST_CASE("radial extension")
    {
        const GridSpec g = GridSpec::centered(1, 1.0, 1.0 / 16);
        const SampledMap id = SampledMap::sample(g, 1, [](std::span<const double> x, std::span<double> o) { o[0] = x[0]; });
        const SampledMap ext = radial_extend(id);
        CHECK(ext.radially_extended());
        std::vector<double> x(1), v(1);
        for (std::size_t i = 0; i < ext.grid().node_count(); ++i) {
            ext.grid().node_point(i, x);
            ext.value(i, v);
            const double want = std::clamp(x[0], -1.0, 1.0);
            CHECK(v[0] == doctest::Approx(want).epsilon(1e-14));
        }

        const GridSpec g2 = GridSpec::centered(2, 1.0, 1.0 / 8);
        const SampledMap c = SampledMap::sample(g2, 3, [](std::span<const double>, std::span<double> o) {
            o[0] = 1.0;
            o[1] = -2.0;
            o[2] = 0.5;
        });
        const SampledMap ce = radial_extend(c);
        std::vector<double> w(3);
        for (std::size_t i = 0; i < ce.grid().node_count(); ++i) {
            ce.value(i, w);
            CHECK(std::abs(w[0] - 1.0) + std::abs(w[1] + 2.0) + std::abs(w[2] - 0.5) <= 1e-14);
        }

        // Inside the unit ball the extension reproduces the original samples (dense and lazy).
        auto gen = [](std::span<const double> p, std::span<double> o) {
            o[0] = p[0] * p[1];
            o[1] = std::sin(p[0]);
            o[2] = p[1];
        };
        const SampledMap dense = radial_extend(SampledMap::sample(g2, 3, gen));
        const SampledMap lazy = radial_extend(SampledMap::lazy(g2, 3, gen));
        std::vector<double> p(2), a(3), b(3), o(3);
        for (std::size_t i = 0; i < dense.grid().node_count(); ++i) {
            dense.grid().node_point(i, p);
            dense.value(i, a);
            lazy.value(i, b);
            const double r = std::hypot(p[0], p[1]);
            std::vector<double> proj = p;
            if (r > 1.0) {
                proj[0] /= r;
                proj[1] /= r;
            }
            gen(proj, o);
            for (int c2 = 0; c2 < 3; ++c2) {
                // Lazy maps compose exactly; dense maps interpolate at the projection.
                CHECK(std::abs(b[c2] - o[c2]) <= 1e-15);
                CHECK(std::abs(a[c2] - o[c2]) <= (r <= 1.0 ? 0.0 : 0.01));
            }
        }
        CHECK_THROWS_AS(radial_extend(SampledMap::sample(GridSpec::centered(1, 0.5, 0.1), 1,
                                                        [](std::span<const double> s, std::span<double> o1) { o1[0] = s[0]; })),
                        Error);
    }

    TEST_CASE("mollify_map examples")
    {
        const double h = 1.0 / 64;
        const SampledMap c = SampledMap::sample(GridSpec::centered(1, 1.0, h), 3, [](std::span<const double>, std::span<double> o) {
            o[0] = 0.25;
            o[1] = 0.5;
            o[2] = -1.0;
        });
        const SampledMap cm = mollify_map(c, 0.25);
        std::vector<double> v(3), x(1);
        for (std::size_t i = 0; i < cm.grid().node_count(); ++i) {
            cm.value(i, v);
            CHECK(v[0] == doctest::Approx(0.25).epsilon(1e-14));
            CHECK(v[2] == doctest::Approx(-1.0).epsilon(1e-14));
        }
        // Offsets satisfy |z| < eps, so the margin is the largest node step below eps.
        CHECK(cm.grid().hi()[0] == doctest::Approx(1.0 - 0.25 + h).epsilon(1e-12));

        // Symmetric weights reproduce affine maps.
        const SampledMap lin = vertical_line(1.0, h);
        const SampledMap lm = mollify_map(lin, 0.2);
        for (std::size_t i = 0; i < lm.grid().node_count(); ++i) {
            lm.grid().node_point(i, x);
            lm.value(i, v);
            CHECK(std::abs(v[2] - x[0]) <= 1e-13);
        }

        // Convergence as eps -> 0 for a continuous sampled map.
        auto gen = [](std::span<const double> s, std::span<double> o) {
            o[0] = std::abs(s[0]);
            o[1] = std::sin(3.0 * s[0]);
            o[2] = 0.0;
        };
        const SampledMap f = SampledMap::sample(GridSpec::centered(1, 1.0, 1.0 / 256), 3, gen);
        double prev = INFINITY;
        for (double eps : {0.2, 0.1, 0.05, 0.025}) {
            const SampledMap fe = mollify_map(f, eps);
            double err = 0.0;
            std::vector<double> o(3);
            for (std::size_t i = 0; i < fe.grid().node_count(); ++i) {
                fe.grid().node_point(i, x);
                fe.value(i, v);
                gen(x, o);
                for (int c2 = 0; c2 < 3; ++c2) {
                    err = std::max(err, std::abs(v[c2] - o[c2]));
                }
            }
            CHECK(err < prev);
            CHECK(err <= eps);
            prev = err;
        }
        CHECK_THROWS_AS(mollify_map(f, 2.0), Error);
    }

    TEST_CASE("mollified Jacobian")
    {
        const double h = 1.0 / 64;
        const GridSpec g = GridSpec::centered(2, 1.0, h);
        const SampledMap c = SampledMap::sample(g, 3, [](std::span<const double>, std::span<double> o) {
            o[0] = 1.0;
            o[1] = 2.0;
            o[2] = 3.0;
        });
        const std::vector<double> x0 = {0.0, 0.25};
        for (double v : grad_mollified(c, 0.25, x0)) {
            CHECK(v == 0.0);
        }

        // Affine map: A = [[1, 2], [-1, 0.5], [0, 3]].
        const SampledMap aff = SampledMap::sample(g, 3, [](std::span<const double> p, std::span<double> o) {
            o[0] = p[0] + 2.0 * p[1] + 0.1;
            o[1] = -p[0] + 0.5 * p[1];
            o[2] = 3.0 * p[1];
        });
        const auto j = grad_mollified(aff, 0.25, x0);
        const double want[6] = {1.0, 2.0, -1.0, 0.5, 0.0, 3.0};
        for (int k = 0; k < 6; ++k) {
            CHECK(j[k] == doctest::Approx(want[k]).epsilon(1e-12));
        }

        // Against central differences of the mollified map.
        const SampledMap f = SampledMap::sample(g, 3, [](std::span<const double> p, std::span<double> o) {
            o[0] = std::sin(2.0 * p[0]) * p[1];
            o[1] = std::abs(p[0] - 0.1) + p[1] * p[1];
            o[2] = std::cos(p[0] + p[1]);
        });
        const double eps = 0.25;
        const SampledMap fe = mollify_map(f, eps);
        const std::vector<double> at = {0.125, -0.0625};
        const auto jac = grad_mollified(f, eps, at);
        for (int a = 0; a < 2; ++a) {
            std::vector<double> xp = at, xm = at, vp(3), vm(3);
            xp[a] += h;
            xm[a] -= h;
            fe.interpolate(xp, vp);
            fe.interpolate(xm, vm);
            for (int r = 0; r < 3; ++r) {
                const double fd = (vp[r] - vm[r]) / (2.0 * h);
                CHECK(std::abs(jac[r * 2 + a] - fd) <= 0.05 * h / (eps * eps) + 1e-3);
            }
        }
    }

    TEST_CASE("Holder seminorm examples and monotonicity")
    {
        const double h = 1.0 / 128;
        const SampledMap id = SampledMap::sample(GridSpec::centered(1, 1.0, h), 1, [](std::span<const double> s, std::span<double> o) { o[0] = s[0]; });
        CHECK(holder_seminorm(id, query(1.0, 0.1, Metric::Euclidean)) == doctest::Approx(1.0).epsilon(1e-12));

        const SampledMap vert = vertical_line(1.0, h);
        CHECK(holder_seminorm(vert, query(0.5, 0.1, Metric::Koranyi)) == doctest::Approx(1.0).epsilon(1e-12));

        const SampledMap c = SampledMap::sample(GridSpec::centered(1, 1.0, h), 3, [](std::span<const double>, std::span<double> o) {
            o[0] = 1.0;
            o[1] = 1.0;
            o[2] = 1.0;
        });
        CHECK(holder_seminorm(c, query(0.5, 0.2, Metric::Koranyi)) == 0.0);

        // A horizontal segment is 1/2-little-Holder into H^1: [f]_{1/2, eps} = eps^{1/2}.
        const SampledMap hor = SampledMap::sample(GridSpec::centered(1, 1.0, h), 3, [](std::span<const double> s, std::span<double> o) {
            o[0] = s[0];
            o[1] = 0.0;
            o[2] = 0.0;
        });
        double prev = INFINITY;
        for (double eps : {0.5, 0.125, 0.03125}) {
            const double s = holder_seminorm(hor, query(0.5, eps, Metric::Koranyi));
            CHECK(s == doctest::Approx(std::sqrt(eps)).epsilon(1e-9));
            CHECK(s <= prev);
            prev = s;
        }

        // Nondecreasing in eps on a rough map.
        const TestMap w = make_test_map("weierstrass", 1, 1, 0.7);
        const SampledMap wf = SampledMap::sample(GridSpec::centered(1, 1.0, h), 3, w.generator);
        double last = 0.0;
        for (double eps : {0.02, 0.05, 0.1, 0.3}) {
            const double s = holder_seminorm(wf, query(0.35, eps, Metric::Koranyi));
            CHECK(s >= last);
            last = s;
        }
    }

    TEST_CASE("mollified contact pullback examples")
    {
        const double h = 1.0 / 128;
        const Ball region{{0.0}, 0.5};
        const SampledMap c = SampledMap::sample(GridSpec::centered(1, 1.0, h), 3, [](std::span<const double>, std::span<double> o) {
            o[0] = 0.3;
            o[1] = 0.1;
            o[2] = 2.0;
        });
        CHECK(pullback_alpha_mollified(c, 0.125, region).sup == 0.0);

        const AlphaPullback v = pullback_alpha_mollified(vertical_line(1.0, h), 0.125, region, 8);
        CHECK(v.sup == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(v.path_gap <= 1e-6);
        CHECK(v.probes == 8);

        const SampledMap hor = SampledMap::sample(GridSpec::centered(1, 1.0, h), 3, [](std::span<const double> s, std::span<double> o) {
            o[0] = s[0];
            o[1] = 0.0;
            o[2] = 0.0;
        });
        CHECK(pullback_alpha_mollified(hor, 0.125, region).sup <= 1e-12);

        const TestMap helix = make_test_map("horizontal_helix", 1, 1);
        const SampledMap hf = SampledMap::sample(GridSpec::centered(1, 1.0, h), 3, helix.generator);
        const AlphaPullback hp = pullback_alpha_mollified(hf, 0.125, region, 16);
        CHECK(hp.path_gap <= 1e-6);
        CHECK(hp.sup < 0.01);
    }

    TEST_CASE("mollified form pullback examples")
    {
        const double h = 1.0 / 64;
        const Ball region{{0.0, 0.0}, 0.5};
        const GridSpec g = GridSpec::centered(2, 1.0, h);
        auto gen = [](std::span<const double> p, std::span<double> o) {
            o[0] = p[0] + 0.2 * p[1] * p[1];
            o[1] = p[1];
            o[2] = 0.1 * p[0];
        };
        const SampledMap f = SampledMap::sample(g, 3, gen);

        // k = 0: the pullback is composition with f_eps.
        const FormFunction fn{3, 0, [](std::span<const double> p, std::span<double> o) { o[0] = p[0] - 2.0 * p[2]; }};
        const MollifiedPullback p0 = pullback_form_mollified(f, 0.25, fn, region);
        const SampledMap fe = mollify_map(f, 0.25);
        std::vector<double> x(2), v(3);
        for (std::size_t i = 0; i < p0.field.grid().node_count(); ++i) {
            p0.field.grid().node_point(i, x);
            if (x[0] * x[0] + x[1] * x[1] > 0.25) {
                continue;
            }
            fe.interpolate(x, v);
            CHECK(p0.field.node(i)[0] == doctest::Approx(v[0] - 2.0 * v[2]).epsilon(1e-12));
        }

        const SampledMap c = SampledMap::sample(g, 3, [](std::span<const double>, std::span<double> o) {
            o[0] = 0.3;
            o[1] = 0.1;
            o[2] = 2.0;
        });
        CHECK(pullback_form_mollified(c, 0.25, FormFunction::constant(ConstForm::basis_element(3, {0, 2})), region).sup == 0.0);
    }

    TEST_CASE("scaling exponent fit")
    {
        std::vector<std::pair<double, double>> sq, root;
        for (double e : {0.5, 0.25, 0.125, 0.0625}) {
            sq.emplace_back(e, e * e);
            root.emplace_back(e, 3.0 * std::sqrt(e));
        }
        CHECK(scaling_exponent_fit(sq).slope == doctest::Approx(2.0).epsilon(1e-12));
        const PowerFit r = scaling_exponent_fit(root);
        CHECK(r.slope == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(r.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
        CHECK(r.residual <= 1e-12);
        CHECK_THROWS_AS(scaling_exponent_fit(std::vector<std::pair<double, double>>{{0.5, 1.0}, {0.25, -1.0}, {0.1, 1.0}}), Error);
    }

    TEST_CASE("bounds are explicit formulas")
    {
        CHECK(contact_pullback_bound(0.5, 2.0, 0.1, 1.5) == doctest::Approx(2.0 * 1.5 * 4.0).epsilon(1e-14));
        CHECK(form_pullback_bound(2, 3, 0.5, 1.0, 0.25, 1.0, 2.0) == doctest::Approx(3.0 * 0.5 * 4.0).epsilon(1e-14));
    }
}
