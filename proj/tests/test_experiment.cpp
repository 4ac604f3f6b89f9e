#include <heisen/experiment.hpp>

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace heisen;

TEST_SUITE("experiment")
{
    TEST_CASE("critical theta examples")
    {
        CHECK(std::abs(critical_theta(1, 0.5) - 1.0) <= 1e-15);
        CHECK(std::abs(critical_theta(1, 2.0 / 3.0) - 2.0 / 3.0) <= 1e-15);
        CHECK(std::abs(critical_theta(2, 0.5) - 1.0) <= 1e-15);
        CHECK(std::abs(critical_theta(2, 0.75) - 0.75) <= 1e-15);
        CHECK(critical_theta(1, Rational(2, 3)) == Rational(2, 3));
        CHECK(critical_theta(3, Rational(1, 2)) == Rational(1));
        // gamma = (n+1)/(n+2) gives theta = gamma.
        for (int n = 1; n <= 6; ++n) {
            const Rational g(n + 1, n + 2);
            CHECK(critical_theta(n, g) == g);
        }
    }

    TEST_CASE("exponent ledger vanishes at the critical theta")
    {
        for (int n = 1; n <= 4; ++n) {
            for (long long p = 1; p <= 12; ++p) {
                const Rational g(p, 13);
                CHECK(exponent_ledger(n, g, critical_theta(n, g)) == Rational(0));
                CHECK(exponent_ledger(n, g, critical_theta(n, g) + Rational(1, 100)) < Rational(0));
            }
        }
    }

    TEST_CASE("rational parsing")
    {
        CHECK(parse_rational("2/3") == Rational(2, 3));
        CHECK(parse_rational(" 4/6 ") == Rational(2, 3));
        CHECK(parse_rational("0.6") == Rational(3, 5));
        CHECK(parse_rational("1") == Rational(1));
        CHECK(parse_rational("0.125") == Rational(1, 8));
        CHECK_THROWS_AS(parse_rational("1/0"), Error);
        CHECK_THROWS_AS(parse_rational("abc"), Error);
        CHECK_THROWS_AS(parse_rational(""), Error);
        CHECK_THROWS_AS(parse_rational("1e-3"), Error);
    }

    TEST_CASE("configuration parsing and validation")
    {
        const ExperimentConfig c = ExperimentConfig::parse("# comment\nn = 2\ngamma = 3/5   # inline\nmap = kink\n\nseed=42\n");
        CHECK(c.n == 2);
        CHECK(c.gamma == Rational(3, 5));
        CHECK(c.map == "kink");
        CHECK(c.seed == 42);
        CHECK(c.theta_value() == doctest::Approx(critical_theta(2, 0.6)));

        ExperimentConfig d;
        d.set("eps_min_exp", "2");
        d.set("eps_max_exp", "4");
        CHECK(d.epsilons() == std::vector<double>{0.25, 0.125, 0.0625});

        auto config_error = [](const std::string& text) {
            try {
                ExperimentConfig::parse(text);
            } catch (const Error& e) {
                return e.code() == ErrorCode::Config;
            }
            return false;
        };
        CHECK(config_error("bogus = 1"));
        CHECK(config_error("gamma = 3/2"));
        CHECK(config_error("gamma = 0"));
        CHECK(config_error("n = 0"));
        CHECK(config_error("samples = 10"));
        CHECK(config_error("n 2"));
        CHECK(config_error("ambient_points = five"));
        try {
            ExperimentConfig::parse("n = 1\nwhat = 3\n");
            CHECK(false);
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
        CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/heisen.cfg"), Error);
    }

    TEST_CASE("constant form parsing")
    {
        const ConstForm a = parse_constant_form("dx^dy", 1);
        CHECK(a.coefficient({0, 1}) == 1.0);
        const ConstForm b = parse_constant_form("dy^dx", 1);
        CHECK(b.coefficient({0, 1}) == -1.0);
        const ConstForm c = parse_constant_form("dx1^dy2^dt", 2);
        CHECK(c.degree() == 3);
        CHECK(c.coefficient({0, 3, 4}) == 1.0);
        CHECK_THROWS_AS(parse_constant_form("dx^dx", 1), Error);
        CHECK(parse_constant_form("1", 1).degree() == 0);
        CHECK_THROWS_AS(parse_constant_form("dz", 1), Error);
        CHECK_THROWS_AS(parse_constant_form("dx3", 2), Error);
    }

    TEST_CASE("reports serialize checks and rows")
    {
        RunReport r;
        r.kind = "demo";
        r.csv_header = {"epsilon", "value"};
        r.csv_rows = {{0.5, 1.0 / 3.0}, {0.25, 2.0}};
        r.check("first", true);
        CHECK(r.passed());
        r.check("second", false, "why");
        CHECK_FALSE(r.passed());
        const auto j = nlohmann::json::parse(r.to_json());
        CHECK(j["kind"] == "demo");
        CHECK(j["passed"] == false);
        CHECK(j["checks"].size() == 2);
        std::istringstream csv(r.to_csv());
        std::string line;
        std::getline(csv, line);
        CHECK(line == "epsilon,value");
        std::getline(csv, line);
        CHECK(std::stod(line.substr(line.find(',') + 1)) == 1.0 / 3.0);
    }

    TEST_CASE("scaling runs are deterministic")
    {
        ExperimentConfig c;
        c.set("map", "weierstrass");
        c.set("map_param", "0.7");
        c.set("gamma", "0.6");
        c.set("eps_min_exp", "3");
        c.set("eps_max_exp", "5");
        c.set("points_per_epsilon", "8");
        const RunReport a = run_scaling(c);
        const RunReport b = run_scaling(c);
        CHECK(a.passed());
        CHECK(a.to_csv() == b.to_csv());
        CHECK(a.csv_rows.size() == 3);
        CHECK_THROWS_AS(run_named(c, "nothing"), Error);
    }

    TEST_CASE("plot: slopes and errors")
    {
        std::ostringstream csv;
        csv.precision(17);
        csv << "epsilon,square,root\n";
        for (double e : {0.5, 0.25, 0.125, 0.0625}) {
            csv << e << "," << e * e << "," << 3.0 * std::sqrt(e) << "\n";
        }
        PlotResult pr;
        const std::string svg = render_plot(csv.str(), "t", &pr);
        CHECK(svg.find("<svg") != std::string::npos);
        REQUIRE(pr.slopes.size() == 2);
        CHECK(pr.slopes[0] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(pr.slopes[1] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(pr.series == std::vector<std::string>{"square", "root"});

        CHECK_THROWS_AS(render_plot("epsilon,a\n", "", nullptr), Error);
        CHECK_THROWS_AS(render_plot("", "", nullptr), Error);
        CHECK_THROWS_AS(render_plot("epsilon,a\n0.5,1,2\n", "", nullptr), Error);
        CHECK_THROWS_AS(render_plot("epsilon,a\n0.5,x\n", "", nullptr), Error);

        // Series with too few positive values are drawn without a slope.
        PlotResult zero;
        render_plot("epsilon,z,w\n0.5,0,1\n0.25,0,1\n0.125,0,1\n", "", &zero);
        REQUIRE(zero.slopes.size() == 2);
        CHECK(std::isnan(zero.slopes[0]));
        CHECK(zero.slopes[1] == 0.0);
        CHECK_THROWS_AS(render_plot("epsilon,z\n0.5,0\n0.25,0\n0.125,0\n", "", nullptr), Error);
    }

    TEST_CASE("plot from a scaling run on disk")
    {
        ExperimentConfig c;
        c.set("map", "horizontal_helix");
        c.set("eps_min_exp", "3");
        c.set("eps_max_exp", "6");
        c.set("points_per_epsilon", "8");
        const RunReport r = run_scaling(c);
        const auto dir = std::filesystem::temp_directory_path() / "heisen_test_plot";
        std::filesystem::remove_all(dir);
        r.write(dir.string());
        CHECK(std::filesystem::exists(dir / "scaling.json"));
        REQUIRE(std::filesystem::exists(dir / "scaling.csv"));
        const PlotResult p = emit_plot((dir / "scaling.csv").string(), (dir / "scaling.svg").string(), "helix");
        CHECK(std::filesystem::file_size(dir / "scaling.svg") > 0);
        REQUIRE(p.series.size() == 4);
        CHECK(p.series[0] == "norm_alpha");
        // A horizontal curve: the contact pullback of the mollification decays like eps^2.
        CHECK(p.slopes[0] == doctest::Approx(2.0).epsilon(0.05));
        std::filesystem::remove_all(dir);
    }
}
