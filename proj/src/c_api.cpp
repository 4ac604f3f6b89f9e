#include <heisen/heisen.h>

#include <heisen/experiment.hpp>
#include <heisen/form_io.hpp>
#include <heisen/heisenberg.hpp>
#include <heisen/lefschetz.hpp>

#include <algorithm>
#include <exception>
#include <new>
#include <string>

using namespace heisen;

struct heisen_config {
    ExperimentConfig config;
};

struct heisen_report {
    RunReport report;
    std::string json;
    std::string csv;
};

struct heisen_form_field {
    FormField field;
};

namespace {

thread_local std::string g_last_error;

heisen_status to_status(ErrorCode c)
{
    switch (c) {
    case ErrorCode::InvalidArgument: return HEISEN_INVALID_ARGUMENT;
    case ErrorCode::DimensionMismatch: return HEISEN_DIMENSION_MISMATCH;
    case ErrorCode::Domain: return HEISEN_DOMAIN;
    case ErrorCode::Numerical: return HEISEN_NUMERICAL;
    case ErrorCode::Io: return HEISEN_IO;
    case ErrorCode::Config: return HEISEN_CONFIG;
    case ErrorCode::Internal: return HEISEN_INTERNAL;
    }
    return HEISEN_INTERNAL;
}

template <typename F>
heisen_status guarded(F&& fn)
{
    try {
        fn();
        g_last_error.clear();
        return HEISEN_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return HEISEN_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return HEISEN_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return HEISEN_INTERNAL;
    }
}

void need(const void* p, const char* what)
{
    require(p != nullptr, ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

std::span<const double> packed(const double* p, int n)
{
    return {p, static_cast<std::size_t>(2 * n + 1)};
}

} // namespace

extern "C" {

const char* heisen_last_error(void)
{
    return g_last_error.c_str();
}

const char* heisen_version(void)
{
    return "1.0.0";
}

heisen_status heisen_config_create(heisen_config** out)
{
    return guarded([&] {
        need(out, "out");
        *out = new heisen_config{};
    });
}

heisen_status heisen_config_load(const char* path, heisen_config** out)
{
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new heisen_config{ExperimentConfig::load(path)};
    });
}

heisen_status heisen_config_parse(const char* text, heisen_config** out)
{
    return guarded([&] {
        need(text, "text");
        need(out, "out");
        *out = new heisen_config{ExperimentConfig::parse(text)};
    });
}

heisen_status heisen_config_set(heisen_config* config, const char* key, const char* value)
{
    return guarded([&] {
        need(config, "config");
        need(key, "key");
        need(value, "value");
        config->config.set(key, value);
    });
}

void heisen_config_destroy(heisen_config* config)
{
    delete config;
}

heisen_status heisen_run(const heisen_config* config, const char* kind, heisen_report** out)
{
    return guarded([&] {
        need(config, "config");
        need(kind, "kind");
        need(out, "out");
        *out = new heisen_report{run_named(config->config, kind), {}, {}};
    });
}

heisen_status heisen_report_passed(const heisen_report* report, int* passed)
{
    return guarded([&] {
        need(report, "report");
        need(passed, "passed");
        *passed = report->report.passed() ? 1 : 0;
    });
}

heisen_status heisen_report_json(heisen_report* report, const char** json)
{
    return guarded([&] {
        need(report, "report");
        need(json, "json");
        report->json = report->report.to_json();
        *json = report->json.c_str();
    });
}

heisen_status heisen_report_csv(heisen_report* report, const char** csv)
{
    return guarded([&] {
        need(report, "report");
        need(csv, "csv");
        report->csv = report->report.to_csv();
        *csv = report->csv.c_str();
    });
}

heisen_status heisen_report_write(const heisen_report* report, const char* out_dir)
{
    return guarded([&] {
        need(report, "report");
        need(out_dir, "out_dir");
        report->report.write(out_dir);
    });
}

void heisen_report_destroy(heisen_report* report)
{
    delete report;
}

heisen_status heisen_emit_plot(const char* csv_path, const char* svg_path, const char* title, double* slopes,
                               size_t max_slopes, size_t* count)
{
    return guarded([&] {
        need(csv_path, "csv_path");
        need(svg_path, "svg_path");
        const PlotResult r = emit_plot(csv_path, svg_path, title ? title : "");
        if (slopes) {
            for (size_t i = 0; i < r.slopes.size() && i < max_slopes; ++i) {
                slopes[i] = r.slopes[i];
            }
        }
        if (count) {
            *count = r.slopes.size();
        }
    });
}

heisen_status heisen_critical_theta(int n, double gamma, double* theta)
{
    return guarded([&] {
        need(theta, "theta");
        *theta = critical_theta(n, gamma);
    });
}

heisen_status heisen_group_mul(int n, const double* p, const double* q, double* out)
{
    return guarded([&] {
        need(p, "p");
        need(q, "q");
        need(out, "out");
        HeisenbergDim hd(n);
        const auto r = group_mul(HPoint::from_coords(packed(p, n)), HPoint::from_coords(packed(q, n))).coords();
        std::copy(r.begin(), r.end(), out);
    });
}

heisen_status heisen_koranyi_dist(int n, const double* p, const double* q, double* dist)
{
    return guarded([&] {
        need(p, "p");
        need(q, "q");
        need(dist, "dist");
        HeisenbergDim hd(n);
        *dist = koranyi_dist(packed(p, n), packed(q, n), n);
    });
}

heisen_status heisen_phi(int n, const double* p, const double* q, double* value)
{
    return guarded([&] {
        need(p, "p");
        need(q, "q");
        need(value, "value");
        HeisenbergDim hd(n);
        *value = phi(packed(p, n), packed(q, n), n);
    });
}

heisen_status heisen_decompose_point(int n, const double* kappa, const double* p, double* beta, double* delta,
                                     double* residual)
{
    return guarded([&] {
        need(kappa, "kappa");
        need(p, "p");
        need(beta, "beta");
        HeisenbergDim hd(n);
        const int d = hd.ambient();
        ConstForm k(d, n + 1);
        std::copy(kappa, kappa + k.coeffs().size(), k.coeffs().begin());
        const auto r = decompose_pointwise(k, packed(p, n));
        std::copy(r.beta.coeffs().begin(), r.beta.coeffs().end(), beta);
        if (r.delta.coeffs().size() > 0) {
            need(delta, "delta");
            std::copy(r.delta.coeffs().begin(), r.delta.coeffs().end(), delta);
        }
        if (residual) {
            *residual = r.residual;
        }
    });
}

heisen_status heisen_form_field_load(const char* path, heisen_form_field** out)
{
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new heisen_form_field{load_form_field(path)};
    });
}

heisen_status heisen_form_field_save(const heisen_form_field* field, const char* path)
{
    return guarded([&] {
        need(field, "field");
        need(path, "path");
        save_form_field(path, field->field);
    });
}

heisen_status heisen_form_field_info(const heisen_form_field* field, int* dim, int* degree, size_t* nodes,
                                     size_t* components)
{
    return guarded([&] {
        need(field, "field");
        if (dim) {
            *dim = field->field.dim();
        }
        if (degree) {
            *degree = field->field.degree();
        }
        if (nodes) {
            *nodes = field->field.grid().node_count();
        }
        if (components) {
            *components = field->field.components();
        }
    });
}

heisen_status heisen_form_field_data(const heisen_form_field* field, const double** data, size_t* count)
{
    return guarded([&] {
        need(field, "field");
        need(data, "data");
        *data = field->field.data().data();
        if (count) {
            *count = field->field.data().size();
        }
    });
}

heisen_status heisen_form_field_evaluate(const heisen_form_field* field, const double* p, double* out)
{
    return guarded([&] {
        need(field, "field");
        need(p, "p");
        need(out, "out");
        field->field.evaluate({p, static_cast<std::size_t>(field->field.dim())}, {out, field->field.components()});
    });
}

void heisen_form_field_destroy(heisen_form_field* field)
{
    delete field;
}

} // extern "C"
