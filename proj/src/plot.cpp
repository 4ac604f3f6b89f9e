#include <heisen/experiment.hpp>
#include <heisen/mollify.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace heisen {

namespace {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

Table parse_csv(std::string_view text)
{
    Table t;
    std::istringstream is{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            cells.push_back(cell);
        }
        if (t.header.empty()) {
            t.header = cells;
            continue;
        }
        require(cells.size() == t.header.size(), ErrorCode::InvalidArgument,
                "csv line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) + " fields, expected " +
                    std::to_string(t.header.size()));
        std::vector<double> row;
        for (const auto& c : cells) {
            char* end = nullptr;
            const double v = std::strtod(c.c_str(), &end);
            require(!c.empty() && end == c.c_str() + c.size(), ErrorCode::InvalidArgument,
                    "csv line " + std::to_string(line_no) + ": '" + c + "' is not a number");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    require(t.header.size() >= 2, ErrorCode::InvalidArgument, "csv needs a header with at least two columns");
    require(!t.rows.empty(), ErrorCode::InvalidArgument, "csv has no data rows");
    return t;
}

std::string esc(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

} // namespace

std::string render_plot(std::string_view csv_text, const std::string& title, PlotResult* result)
{
    const Table t = parse_csv(csv_text);
    const std::size_t cols = t.header.size();

    // Points with positive coordinates only; log-log axes.
    double lx0 = INFINITY, lx1 = -INFINITY, ly0 = INFINITY, ly1 = -INFINITY;
    std::vector<std::vector<std::pair<double, double>>> pts(cols);
    for (std::size_t c = 1; c < cols; ++c) {
        for (const auto& r : t.rows) {
            if (r[0] > 0.0 && r[c] > 0.0 && std::isfinite(r[0]) && std::isfinite(r[c])) {
                const double lx = std::log10(r[0]);
                const double ly = std::log10(r[c]);
                pts[c].emplace_back(lx, ly);
                lx0 = std::min(lx0, lx);
                lx1 = std::max(lx1, lx);
                ly0 = std::min(ly0, ly);
                ly1 = std::max(ly1, ly);
            }
        }
    }
    require(std::isfinite(lx0), ErrorCode::InvalidArgument, "csv has no positive values to plot on log axes");
    lx0 = std::floor(lx0 * 2.0) / 2.0;
    lx1 = std::max(std::ceil(lx1 * 2.0) / 2.0, lx0 + 0.5);
    ly0 = std::floor(ly0);
    ly1 = std::max(std::ceil(ly1), ly0 + 1.0);

    const double W = 720, H = 480, L = 80, R = 220, T = 50, B = 60;
    auto sx = [&](double lx) { return L + (lx - lx0) / (lx1 - lx0) * (W - L - R); };
    auto sy = [&](double ly) { return H - B - (ly - ly0) / (ly1 - ly0) * (H - T - B); };

    std::ostringstream os;
    os.precision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty()) {
        os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << esc(title) << "</text>\n";
    }
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double e = ly0; e <= ly1 + 1e-9; e += 1.0) {
        os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << sy(e) << "\" y2=\"" << sy(e)
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << sy(e) + 4 << "\" text-anchor=\"end\">1e" << e << "</text>\n";
    }
    for (double e = lx0; e <= lx1 + 1e-9; e += 0.5) {
        os << "<line y1=\"" << T << "\" y2=\"" << H - B << "\" x1=\"" << sx(e) << "\" x2=\"" << sx(e)
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << sx(e) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << std::pow(10.0, e)
           << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\">" << esc(t.header[0])
       << "</text>\n";

    PlotResult res;
    for (std::size_t c = 1; c < cols; ++c) {
        const char* color = kColors[(c - 1) % std::size(kColors)];
        double slope = NAN;
        if (pts[c].size() >= 3) {
            std::vector<std::pair<double, double>> s;
            for (const auto& [lx, ly] : pts[c]) {
                s.emplace_back(std::pow(10.0, lx), std::pow(10.0, ly));
            }
            slope = scaling_exponent_fit(s).slope;
        }
        res.series.push_back(t.header[c]);
        res.slopes.push_back(slope);
        if (!pts[c].empty()) {
            os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (const auto& [lx, ly] : pts[c]) {
                os << sx(lx) << ',' << sy(ly) << ' ';
            }
            os << "\"/>\n";
            for (const auto& [lx, ly] : pts[c]) {
                os << "<circle cx=\"" << sx(lx) << "\" cy=\"" << sy(ly) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
            }
        }
        const double ly = T + 16.0 * c;
        os << "<rect x=\"" << W - R + 14 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
        os << "<text x=\"" << W - R + 30 << "\" y=\"" << ly << "\">" << esc(t.header[c]);
        if (std::isfinite(slope)) {
            os << " (slope " << slope << ")";
        }
        os << "</text>\n";
    }
    os << "</svg>\n";
    if (result) {
        *result = std::move(res);
    }
    return os.str();
}

PlotResult emit_plot(const std::string& csv_path, const std::string& out_path, const std::string& title)
{
    std::ifstream is(csv_path);
    require(static_cast<bool>(is), ErrorCode::Io, "cannot read '" + csv_path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    PlotResult res;
    const std::string svg = render_plot(ss.str(), title.empty() ? csv_path : title, &res);
    std::ofstream os(out_path);
    require(static_cast<bool>(os), ErrorCode::Io, "cannot write '" + out_path + "'");
    os << svg;
    return res;
}

} // namespace heisen
