#pragma once

// Experiment harness: configuration, the scaling / decomposition / linking /
// contradiction-chain runs, and their reports.

#include <heisen/linking.hpp>

#include <json.hpp>

#include <boost/rational.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace heisen {

using Rational = boost::rational<long long>;

/// "p/q", an integer, or a finite decimal such as "0.6" (read exactly as 3/5).
Rational parse_rational(std::string_view text);

/// theta = (n+1)/n - 2 gamma / n.
double critical_theta(int n, double gamma);
Rational critical_theta(int n, Rational gamma);

/// (1 - 2 gamma) + n (1 - theta) evaluated in exact arithmetic.
Rational exponent_ledger(int n, Rational gamma, Rational theta);

/// Flat `key = value` configuration; `#` starts a comment.  Unset optional
/// entries take per-run defaults (see README).
struct ExperimentConfig {
    int n = 1;
    /// Source dimension of the map for scaling / gromov runs, ambient
    /// dimension of the sphere for linking runs.
    std::optional<int> m;
    int k = 1;
    Rational gamma{1, 2};
    std::optional<Rational> theta;
    int eps_min_exp = 3;
    int eps_max_exp = 8;
    std::vector<Rational> ledger_gammas{Rational(1, 2), Rational(3, 5), Rational(2, 3)};
    std::string map = "vertical";
    double map_param = 0.8;
    std::string kappa = "dx";
    std::optional<int> points_per_epsilon;
    double region_radius = 0.5;
    int ambient_points = 65;
    int source_points = 129;
    std::string sphere = "circle";
    std::string form = "linking";
    int samples = 1024;
    std::uint64_t seed = 1;
    double rotation = 0.0;
    int probes = 16;

    static ExperimentConfig parse(std::string_view text);
    static ExperimentConfig load(const std::string& path);
    /// Config error on unknown keys or malformed values.
    void set(std::string_view key, std::string_view value);

    double gamma_value() const { return boost::rational_cast<double>(gamma); }
    double theta_value() const;
    std::vector<double> epsilons() const;
    int source_dim(int fallback) const { return m.value_or(fallback); }
};

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct RunReport {
    std::string kind;
    nlohmann::ordered_json data = nlohmann::ordered_json::object();
    std::vector<std::string> csv_header;
    std::vector<std::vector<double>> csv_rows;
    std::vector<Check> checks;
    /// Extra binary outputs (file name, bytes) written next to the report.
    std::vector<std::pair<std::string, std::string>> artifacts;

    bool passed() const;
    void check(std::string name, bool ok, std::string detail = {});
    std::string to_json() const;
    std::string to_csv() const;
    /// Writes <kind>.json, <kind>.csv (when there are rows) and the artifacts.
    void write(const std::string& out_dir) const;
};

RunReport run_scaling(const ExperimentConfig& config);
RunReport run_decomposition(const ExperimentConfig& config);
RunReport run_linking(const ExperimentConfig& config);
RunReport run_gromov(const ExperimentConfig& config);
RunReport run_named(const ExperimentConfig& config, std::string_view kind);

/// A constant covector written as wedges of axis names joined by '^', e.g.
/// "dx", "dt", "dx^dy", "dx1^dy1^dt"; axes are x1..xn, y1..yn, t (x, y for n = 1).
ConstForm parse_constant_form(std::string_view text, int n);

/// Log-log plot of every CSV column against the first one, with fitted slopes.
struct PlotResult {
    std::vector<std::string> series;
    std::vector<double> slopes;
};
PlotResult emit_plot(const std::string& csv_path, const std::string& out_path, const std::string& title = {});
/// Same, on CSV text already in memory; returns the SVG document.
std::string render_plot(std::string_view csv_text, const std::string& title, PlotResult* result = nullptr);

} // namespace heisen
