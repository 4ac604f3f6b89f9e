#include <heisen/form_io.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace heisen {

namespace {

constexpr char kFieldMagic[8] = {'H', 'E', 'I', 'S', 'E', 'N', 'F', 'F'};
constexpr char kMapMagic[8] = {'H', 'E', 'I', 'S', 'E', 'N', 'S', 'M'};
constexpr char kLinkMagic[8] = {'H', 'E', 'I', 'S', 'E', 'N', 'L', 'F'};

template <typename T>
void put(std::ostream& os, T v)
{
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(b, b + sizeof(T));
    }
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get(std::istream& is)
{
    unsigned char b[sizeof(T)];
    is.read(reinterpret_cast<char*>(b), sizeof(T));
    require(static_cast<bool>(is), ErrorCode::Io, "unexpected end of file");
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(b, b + sizeof(T));
    }
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

void put_header(std::ostream& os, const char (&magic)[8])
{
    os.write(magic, 8);
    put<std::uint32_t>(os, kFormatVersion);
}

void get_header(std::istream& is, const char (&magic)[8], const char* what)
{
    char m[8];
    is.read(m, 8);
    require(static_cast<bool>(is) && std::memcmp(m, magic, 8) == 0, ErrorCode::Io,
            std::string("not a ") + what + " file (bad magic)");
    const auto v = get<std::uint32_t>(is);
    require(v == kFormatVersion, ErrorCode::Io, std::string("unsupported ") + what + " format version");
}

void put_grid(std::ostream& os, const GridSpec& g)
{
    for (int p : g.points()) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(p));
    }
    for (double v : g.lo()) {
        put<double>(os, v);
    }
    for (double v : g.hi()) {
        put<double>(os, v);
    }
}

GridSpec get_grid(std::istream& is, int dim)
{
    std::vector<int> pts(dim);
    std::vector<double> lo(dim), hi(dim);
    for (int& p : pts) {
        p = static_cast<int>(get<std::uint32_t>(is));
    }
    for (double& v : lo) {
        v = get<double>(is);
    }
    for (double& v : hi) {
        v = get<double>(is);
    }
    return GridSpec(lo, hi, pts);
}

void put_values(std::ostream& os, std::span<const double> v)
{
    put<std::uint64_t>(os, v.size());
    for (double c : v) {
        put<double>(os, c);
    }
}

std::vector<double> get_values(std::istream& is, std::size_t expected)
{
    const auto n = get<std::uint64_t>(is);
    require(n == expected, ErrorCode::Io, "coefficient count does not match the header");
    std::vector<double> v(n);
    for (double& c : v) {
        c = get<double>(is);
    }
    return v;
}

template <typename F>
void with_out(const std::string& path, F&& fn)
{
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), ErrorCode::Io, "cannot open '" + path + "' for writing");
    fn(os);
    require(static_cast<bool>(os), ErrorCode::Io, "write to '" + path + "' failed");
}

template <typename F>
auto with_in(const std::string& path, F&& fn)
{
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), ErrorCode::Io, "cannot open '" + path + "'");
    return fn(is);
}

} // namespace

void write_form_field(std::ostream& os, const FormField& f)
{
    put_header(os, kFieldMagic);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(f.dim()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(f.degree()));
    put<std::uint32_t>(os, f.compact() ? 1u : 0u);
    put_grid(os, f.grid());
    put_values(os, f.data());
}

FormField read_form_field(std::istream& is)
{
    get_header(is, kFieldMagic, "form field");
    const int dim = static_cast<int>(get<std::uint32_t>(is));
    const int degree = static_cast<int>(get<std::uint32_t>(is));
    const auto flags = get<std::uint32_t>(is);
    require(dim >= 1 && dim <= 24 && degree >= 0 && degree <= dim, ErrorCode::Io, "form field header out of range");
    GridSpec g = get_grid(is, dim);
    auto values = get_values(is, g.node_count() * binomial(dim, degree));
    return FormField(std::move(g), degree, std::move(values), (flags & 1u) != 0);
}

void write_sampled_map(std::ostream& os, const SampledMap& f)
{
    const SampledMap dense = f.materialize();
    put_header(os, kMapMagic);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dense.source_dim()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dense.target_dim()));
    put<std::uint32_t>(os, dense.radially_extended() ? 1u : 0u);
    put_grid(os, dense.grid());
    put_values(os, dense.values());
}

SampledMap read_sampled_map(std::istream& is)
{
    get_header(is, kMapMagic, "sampled map");
    const int src = static_cast<int>(get<std::uint32_t>(is));
    const int tgt = static_cast<int>(get<std::uint32_t>(is));
    const auto flags = get<std::uint32_t>(is);
    require(src >= 1 && src <= 24 && tgt >= 1 && tgt <= 24, ErrorCode::Io, "sampled map header out of range");
    GridSpec g = get_grid(is, src);
    auto values = get_values(is, g.node_count() * tgt);
    return SampledMap::from_values(std::move(g), tgt, std::move(values), (flags & 1u) != 0);
}

void write_linking_form(std::ostream& os, const LinkingForm& f)
{
    put_header(os, kLinkMagic);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(f.k));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(f.m));
    put<std::int32_t>(os, f.orientation);
    put<double>(os, f.clearance);
    put<double>(os, f.closedness_residual);
    write_form_field(os, f.kappa);
}

LinkingForm read_linking_form(std::istream& is)
{
    get_header(is, kLinkMagic, "linking form");
    LinkingForm f;
    f.k = static_cast<int>(get<std::uint32_t>(is));
    f.m = static_cast<int>(get<std::uint32_t>(is));
    f.orientation = get<std::int32_t>(is);
    f.clearance = get<double>(is);
    f.closedness_residual = get<double>(is);
    f.kappa = read_form_field(is);
    require(f.kappa.dim() == f.m && f.kappa.degree() == f.k + 1, ErrorCode::Io,
            "linking form metadata disagrees with its field");
    return f;
}

void save_form_field(const std::string& path, const FormField& f)
{
    with_out(path, [&](std::ostream& os) { write_form_field(os, f); });
}
FormField load_form_field(const std::string& path)
{
    return with_in(path, [](std::istream& is) { return read_form_field(is); });
}
void save_sampled_map(const std::string& path, const SampledMap& f)
{
    with_out(path, [&](std::ostream& os) { write_sampled_map(os, f); });
}
SampledMap load_sampled_map(const std::string& path)
{
    return with_in(path, [](std::istream& is) { return read_sampled_map(is); });
}
void save_linking_form(const std::string& path, const LinkingForm& f)
{
    with_out(path, [&](std::ostream& os) { write_linking_form(os, f); });
}
LinkingForm load_linking_form(const std::string& path)
{
    return with_in(path, [](std::istream& is) { return read_linking_form(is); });
}

} // namespace heisen
