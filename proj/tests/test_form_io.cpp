#include <heisen/form_io.hpp>

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>

using namespace heisen;

namespace {

FormField random_field(std::mt19937_64& rng, int dim, int degree, int points)
{
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    FormField f(GridSpec::cube(dim, -0.5, 1.5, points), degree, true);
    for (std::size_t i = 0; i < f.grid().node_count(); ++i) {
        for (double& c : f.node(i)) {
            c = U(rng);
        }
    }
    return f;
}

void check_same(const FormField& a, const FormField& b)
{
    CHECK(a.dim() == b.dim());
    CHECK(a.degree() == b.degree());
    CHECK(a.compact() == b.compact());
    CHECK(a.grid().points() == b.grid().points());
    CHECK(a.grid().lo() == b.grid().lo());
    CHECK(a.grid().hi() == b.grid().hi());
    REQUIRE(a.data().size() == b.data().size());
    CHECK(std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0);
}

} // namespace

TEST_SUITE("form_io")
{
    TEST_CASE("form field round trip is bit exact")
    {
        std::mt19937_64 rng(1);
        for (auto [dim, deg] : {std::pair{1, 0}, {2, 1}, {3, 2}, {3, 3}, {5, 3}}) {
            const FormField f = random_field(rng, dim, deg, dim >= 5 ? 4 : 7);
            std::stringstream ss;
            write_form_field(ss, f);
            check_same(f, read_form_field(ss));
        }
        FormField nc(GridSpec::cube(2, 0.0, 1.0, 3), 1, false);
        nc.node(4)[1] = -0.0;
        std::stringstream ss;
        write_form_field(ss, nc);
        check_same(nc, read_form_field(ss));
    }

    TEST_CASE("sampled map round trip, lazy maps are materialized")
    {
        const GridSpec g = GridSpec::centered(2, 1.0, 0.25);
        const auto gen = [](std::span<const double> x, std::span<double> o) {
            o[0] = x[0] * 0.1;
            o[1] = std::sin(x[1]);
            o[2] = 1.0 / 3.0;
        };
        const SampledMap lazy = SampledMap::lazy(g, 3, gen);
        std::stringstream ss;
        write_sampled_map(ss, lazy);
        const SampledMap back = read_sampled_map(ss);
        CHECK(back.dense());
        CHECK(back.target_dim() == 3);
        CHECK(back.grid().points() == g.points());
        const SampledMap dense = SampledMap::sample(g, 3, gen);
        REQUIRE(back.values().size() == dense.values().size());
        for (std::size_t i = 0; i < dense.values().size(); ++i) {
            CHECK(back.values()[i] == dense.values()[i]);
        }

        const SampledMap ext = radial_extend(SampledMap::sample(GridSpec::centered(1, 1.0, 0.125), 1,
                                                                [](std::span<const double> x, std::span<double> o) { o[0] = x[0]; }));
        std::stringstream s2;
        write_sampled_map(s2, ext);
        CHECK(read_sampled_map(s2).radially_extended());
    }

    TEST_CASE("linking form round trip through a file")
    {
        LinkingParams lp;
        lp.points = 33;
        const LinkingForm lf = construct_kappa(EmbeddedSphere::sample(0, 2,
                                                                      [](std::span<const double> u, std::span<double> o) {
                                                                          o[0] = u[0];
                                                                          o[1] = 0.0;
                                                                      },
                                                                      0),
                                               lp);
        const auto path = std::filesystem::temp_directory_path() / "heisen_test_kappa.heisenlf";
        save_linking_form(path.string(), lf);
        const LinkingForm back = load_linking_form(path.string());
        std::filesystem::remove(path);
        CHECK(back.k == 0);
        CHECK(back.m == 2);
        CHECK(back.orientation == lf.orientation);
        CHECK(back.clearance == lf.clearance);
        CHECK(back.closedness_residual == lf.closedness_residual);
        CHECK_FALSE(back.exact.has_value());
        check_same(lf.kappa, back.kappa);
    }

    TEST_CASE("corrupt input is rejected")
    {
        std::mt19937_64 rng(2);
        const FormField f = random_field(rng, 2, 1, 5);
        std::stringstream ss;
        write_form_field(ss, f);
        const std::string bytes = ss.str();

        std::string bad = bytes;
        bad[0] = 'X';
        std::istringstream b1(bad);
        CHECK_THROWS_AS(read_form_field(b1), Error);

        bad = bytes;
        bad[8] = 9; // version
        std::istringstream b2(bad);
        CHECK_THROWS_AS(read_form_field(b2), Error);

        std::istringstream b3(bytes.substr(0, bytes.size() - 3));
        CHECK_THROWS_AS(read_form_field(b3), Error);

        // A field is not a map.
        std::istringstream b4(bytes);
        CHECK_THROWS_AS(read_sampled_map(b4), Error);

        try {
            std::istringstream b5(bad);
            read_form_field(b5);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Io);
        }
        CHECK_THROWS_AS(load_form_field("/nonexistent/dir/x.heisenff"), Error);
    }
}
