// Acceptance driver: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <heisen/experiment.hpp>
#include <heisen/heisenberg.hpp>
#include <heisen/lefschetz.hpp>

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

using namespace heisen;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool ok = true;
    std::string detail;

    void need(bool cond, const std::string& what)
    {
        if (!cond) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

const Check* failed_check(const RunReport& r)
{
    for (const auto& c : r.checks) {
        if (!c.passed) {
            return &c;
        }
    }
    return nullptr;
}

ExperimentConfig config(std::initializer_list<std::pair<const char*, const char*>> kv)
{
    ExperimentConfig c;
    for (auto [k, v] : kv) {
        c.set(k, v);
    }
    return c;
}

Outcome lefschetz_iso()
{
    Outcome o;
    const auto t0 = Clock::now();
    for (int n = 1; n <= 5; ++n) {
        const auto l = lefschetz_matrix(n);
        o.need(l.matrix.rows() == l.matrix.cols(), "n = " + std::to_string(n) + " not square");
        Eigen::FullPivLU<Eigen::MatrixXd> lu(l.matrix);
        o.need(lu.determinant() != 0.0, "singular at n = " + std::to_string(n));
        const double err = (lu.inverse() * l.matrix - Eigen::MatrixXd::Identity(l.matrix.rows(), l.matrix.cols())).cwiseAbs().maxCoeff();
        o.need(err <= 1e-12, "n = " + std::to_string(n) + " inverse error " + num(err));
    }
    const double s = seconds_since(t0);
    o.need(s < 1.0, "took " + num(s) + " s");
    o.note(num(s) + " s");
    return o;
}

Outcome contact_decomposition()
{
    Outcome o;
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double worst = 0.0;
    bool dt_free = true;
    for (int n = 1; n <= 3; ++n) {
        const int d = 2 * n + 1;
        for (int i = 0; i < 200; ++i) {
            ConstForm k(d, n + 1);
            for (double& c : k.coeffs()) {
                c = U(rng);
            }
            std::vector<double> p(d);
            for (double& c : p) {
                c = 2.0 * U(rng);
            }
            const auto r = decompose_pointwise(k, p);
            worst = std::max(worst, r.residual / std::max(1.0, k.max_abs()));
            dt_free = dt_free && dt_component_max(r.beta, 2 * n) == 0.0 && dt_component_max(r.delta, 2 * n) == 0.0;
            const auto z = decompose_pointwise(ConstForm(d, n + 1), p);
            o.need(z.beta.max_abs() == 0.0 && z.delta.max_abs() == 0.0, "zero covector gave nonzero parts");
        }
    }
    o.need(worst <= 1e-10, "relative residual " + num(worst));
    o.need(dt_free, "dt components present");

    const std::vector<double> p = {0.7, -0.4, 1.3};
    const auto a = decompose_pointwise(ConstForm::basis_element(3, {0, 1}), p);
    o.need(a.beta.max_abs() <= 1e-12 && std::abs(a.delta[0] - 0.25) <= 1e-12, "dx^dy hand case");
    const auto b = decompose_pointwise(ConstForm::basis_element(3, {2, 0}), p);
    o.need(std::abs(b.beta.coefficient({0}) - 1.0) <= 1e-12 && std::abs(b.beta.coefficient({1})) <= 1e-12 &&
               std::abs(b.delta[0] - p[0] / 2.0) <= 1e-12,
           "dt^dx hand case");
    o.note("max relative residual " + num(worst));
    return o;
}

Outcome metric_layer()
{
    Outcome o;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    auto point = [&](int n) {
        std::vector<double> c(2 * n + 1);
        for (double& v : c) {
            v = U(rng);
        }
        return HPoint::from_coords(c);
    };
    double formula = 0.0, invariance = 0.0, antisym = 0.0, slack = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const int n = 1 + i % 3;
        const HPoint p = point(n), q = point(n), r = point(n), g = point(n);
        const double d = koranyi_dist(p, q);
        formula = std::max(formula, std::abs(d - koranyi_dist_projected(p, q)) / std::max(1.0, d));
        invariance = std::max(invariance, std::abs(koranyi_dist(group_mul(g, p), group_mul(g, q)) - d) / std::max(1.0, d));
        antisym = std::max(antisym, std::abs(phi(p, q) + phi(q, p)));
        slack = std::min(slack, koranyi_dist(p, q) + koranyi_dist(q, r) - koranyi_dist(p, r));
    }
    o.need(formula <= 1e-12, "formulas differ by " + num(formula));
    o.need(invariance <= 1e-12, "left invariance off by " + num(invariance));
    o.need(antisym <= 1e-12, "phi antisymmetry off by " + num(antisym));
    o.need(slack >= -1e-12, "triangle slack " + num(slack));
    o.note("formula gap " + num(formula) + ", invariance " + num(invariance));
    return o;
}

Outcome vertical_rate()
{
    Outcome o;
    const auto t0 = Clock::now();
    const RunReport r = run_scaling(config({{"map", "vertical"}, {"gamma", "1/2"}, {"eps_min_exp", "3"}, {"eps_max_exp", "8"}}));
    const double s = seconds_since(t0);
    if (const auto* c = failed_check(r)) {
        o.need(false, c->name + " " + c->detail);
    }
    const auto& fit = r.data["fit_alpha"];
    o.need(!fit.is_null(), "no fit");
    if (!fit.is_null()) {
        const double slope = fit["slope"].get<double>();
        o.need(std::abs(slope) <= 0.1, "slope " + num(slope));
        o.note("slope " + num(slope));
    }
    o.need(s < 60.0, "took " + num(s) + " s");
    o.note("path gap " + num(r.data["max_path_gap"].get<double>()) + ", " + num(s) + " s");
    return o;
}

Outcome lipschitz_and_horizontal_rates()
{
    Outcome o;
    const RunReport lip = run_scaling(config({{"map", "kink"}, {"kappa", "dx"}, {"gamma", "1/2"}}));
    const auto& fk = lip.data["fit_kappa"];
    o.need(!fk.is_null() && std::abs(fk["slope"].get<double>()) <= 0.15, "kink slope");
    const RunReport hor = run_scaling(config({{"map", "horizontal_helix"}}));
    const auto& fa = hor.data["fit_alpha"];
    o.need(!fa.is_null() && fa["slope"].get<double>() >= 0.9, "helix slope");
    o.need(lip.passed() && hor.passed(), "bound checks failed");
    if (!fk.is_null() && !fa.is_null()) {
        o.note("kink kappa slope " + num(fk["slope"].get<double>()) + ", helix alpha slope " + num(fa["slope"].get<double>()));
    }
    return o;
}

Outcome linking_base()
{
    Outcome o;
    for (int m = 1; m <= 3; ++m) {
        const std::string ms = std::to_string(m);
        const RunReport r = run_linking(config({{"k", "0"}, {"m", ms.c_str()}, {"sphere", "points"}}));
        const double v = r.data["integral_exact"].get<double>();
        const double w = r.data["integral_swapped"].get<double>();
        o.need(std::abs(v - 1.0) <= 1e-6, "m = " + ms + " integral " + num(v));
        o.need(std::abs(w + 1.0) <= 1e-6, "m = " + ms + " swapped " + num(w));
        o.need(r.passed(), "m = " + ms + " checks failed");
        char buf[96];
        std::snprintf(buf, sizeof buf, "m=%d: %.10f / %.10f", m, v, w);
        o.note(buf);
    }
    return o;
}

Outcome linking_desk()
{
    Outcome o;
    const auto t0 = Clock::now();
    const RunReport r = run_linking(config({{"k", "1"}, {"m", "3"}, {"ambient_points", "65"}, {"source_points", "129"}}));
    const double s = seconds_since(t0);
    const double flat = r.data["integral_flat"].get<double>();
    const double dome = r.data["integral_dome"].get<double>();
    const double res = r.data["closedness_residual"].get<double>();
    const double h = r.data["grid_spacing"].get<double>();
    o.need(std::abs(flat - 1.0) <= 0.05, "flat integral " + num(flat));
    o.need(std::abs(flat - dome) <= 0.02, "fillings differ: " + num(flat) + " vs " + num(dome));
    o.need(res <= 10.0 * h, "||d kappa|| " + num(res));
    o.need(s < 300.0, "took " + num(s) + " s");
    if (const auto* c = failed_check(r)) {
        o.need(false, c->name);
    }
    o.note("flat " + num(flat) + ", dome " + num(dome) + ", ||d kappa|| " + num(res) + " (h " + num(h) + "), " + num(s) + " s");
    return o;
}

Outcome gromov_chain()
{
    Outcome o;
    const auto t0 = Clock::now();
    const RunReport r = run_gromov(config({{"map", "planar_disk"}, {"ledger_gammas", "1/2, 3/5, 2/3"}}));
    for (const auto& c : r.checks) {
        o.need(c.passed, c.name);
    }
    double amin = INFINITY, amax = -INFINITY, bmin = INFINITY, bmax = -INFINITY;
    for (const auto& row : r.csv_rows) {
        amin = std::min(amin, row[1]);
        amax = std::max(amax, row[1]);
        bmin = std::min(bmin, row[2]);
        bmax = std::max(bmax, row[2]);
        o.need(row[3] >= row[2], "P < B at eps " + num(row[0]));
    }
    for (const auto& l : r.data["exponent_ledger"]) {
        o.need(l["ledger"].get<std::string>() == "0/1", "ledger " + l["ledger"].get<std::string>());
    }
    o.note("A in [" + num(amin) + ", " + num(amax) + "], B in [" + num(bmin) + ", " + num(bmax) + "], " + num(seconds_since(t0)) +
           " s");
    return o;
}

Outcome theta_pairs()
{
    Outcome o;
    for (int n = 1; n <= 5; ++n) {
        o.need(std::abs(critical_theta(n, 0.5) - 1.0) <= 1e-15, "gamma = 1/2 at n = " + std::to_string(n));
        const double g = (n + 1.0) / (n + 2.0);
        o.need(std::abs(critical_theta(n, g) - g) <= 1e-15, "gamma = (n+1)/(n+2) at n = " + std::to_string(n));
    }
    o.need(std::abs(critical_theta(1, 2.0 / 3.0) - 2.0 / 3.0) <= 1e-15, "n = 1, gamma = 2/3");
    return o;
}

Outcome hygiene()
{
    Outcome o;
    // d o d on cubic coefficients, at two resolutions.
    const FormFunction cubic{3, 1, [](std::span<const double> p, std::span<double> out) {
                                 out[0] = p[0] * p[0] * p[1] - 2.0 * p[1] * p[1] * p[2];
                                 out[1] = p[0] * p[1] * p[2] + p[2] * p[2] * p[2];
                                 out[2] = p[0] * p[0] * p[0] - p[1] * p[2] * p[2];
                             }};
    for (int pts : {17, 33}) {
        const GridSpec g = GridSpec::cube(3, -1.0, 1.0, pts);
        const double dd = exterior_derivative(exterior_derivative(FormField::sample(g, cubic))).sup_norm();
        o.need(dd <= 20.0 * g.max_spacing(), "d o d residual " + num(dd) + " at h " + num(g.max_spacing()));
    }
    // dx^dy over the unit disk.
    for (int pts : {65, 129, 257}) {
        const GridSpec g = GridSpec::cube(2, -1.0, 1.0, pts);
        const double v = integrate_top(FormField::sample(g, FormFunction::constant(ConstForm::basis_element(2, {0, 1}))),
                                       Ball{{0.0, 0.0}, 1.0});
        o.need(std::abs(v - std::numbers::pi) <= 4.0 * g.max_spacing(), "disk area " + num(v) + " at h " + num(g.max_spacing()));
    }
    // Determinism under a fixed seed.
    const ExperimentConfig sc = config({{"map", "weierstrass"}, {"map_param", "0.7"}, {"gamma", "0.6"}, {"seed", "7"}});
    o.need(run_scaling(sc).to_csv() == run_scaling(sc).to_csv(), "scaling CSV differs between runs");
    const ExperimentConfig dc = config({{"form", "bump"}, {"n", "1"}, {"ambient_points", "17"}, {"seed", "7"}});
    RunReport a = run_decomposition(dc), b = run_decomposition(dc);
    a.data.erase("seconds");
    b.data.erase("seconds");
    o.need(a.to_json() == b.to_json(), "decomposition report differs between runs");
    return o;
}

} // namespace

int main()
{
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const Criterion all[] = {
        {1, "Lefschetz isomorphism n = 1..5", lefschetz_iso},
        {2, "contact decomposition", contact_decomposition},
        {3, "Koranyi metric layer", metric_layer},
        {4, "contact pullback bound and rate (vertical map)", vertical_rate},
        {5, "form pullback rates (Lipschitz and horizontal maps)", lipschitz_and_horizontal_rates},
        {6, "linking base case k = 0, m = 1..3", linking_base},
        {7, "linking desk case k = 1, m = 3", linking_desk},
        {8, "integral chain on the planar disk", gromov_chain},
        {9, "critical theta exponent pairs", theta_pairs},
        {10, "numerical hygiene", hygiene},
    };
    int failures = 0;
    for (const auto& c : all) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.ok = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += !o.ok;
        std::printf("%s criterion %d: %s (%s) [%.2f s]\n", o.ok ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
