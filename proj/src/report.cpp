#include "aimdmf/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "aimdmf/error.hpp"

namespace aimdmf {

const char* to_string(Status s) {
    switch (s) {
        case Status::pass:
            return "pass";
        case Status::inconclusive:
            return "inconclusive";
        case Status::fail:
            return "fail";
    }
    return "?";
}

Status combine(Status a, Status b) { return static_cast<int>(a) > static_cast<int>(b) ? a : b; }

Criterion mc_criterion(std::string name, bool holds, double se, double band, std::string detail) {
    Criterion c{std::move(name), holds ? Status::pass : Status::fail, std::move(detail)};
    if (holds && !(se <= band)) {
        c.status = Status::inconclusive;
        c.detail += fmt::format("; standard error {:.3g} exceeds the band {:.3g}, increase N/M/R", se, band);
    }
    return c;
}

std::string markdown_table(const std::vector<std::string>& header,
                           const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream os;
    os << '|';
    for (const auto& h : header) os << ' ' << h << " |";
    os << "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) os << " --- |";
    os << '\n';
    for (const auto& r : rows) {
        if (r.size() != header.size()) throw Error("markdown row width does not match the header");
        os << '|';
        for (const auto& c : r) os << ' ' << c << " |";
        os << '\n';
    }
    return os.str();
}

namespace {

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '&':
                out += "&amp;";
                break;
            default:
                out += c;
        }
    }
    return out;
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                           const std::vector<Series>& series) {
    constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    const auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream os;
    os << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">)",
                      W, H)
       << '\n';
    os << fmt::format(R"(<rect width="{}" height="{}" fill="white"/>)", W, H) << '\n';
    os << fmt::format(R"(<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>)", W / 2, escape(title))
       << '\n';
    os << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>)", L, T,
                      W - L - R, H - T - B)
       << '\n';
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
        os << fmt::format(R"(<text x="{:.1f}" y="{}" text-anchor="middle">{:.3g}</text>)", px(xv), H - B + 16, xv)
           << '\n';
        os << fmt::format(R"(<text x="{}" y="{:.1f}" text-anchor="end">{:.3g}</text>)", L - 6, py(yv) + 4, yv)
           << '\n';
    }
    os << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{}</text>)", L + (W - L - R) / 2, H - 12,
                      escape(xlabel))
       << '\n';
    os << fmt::format(R"svg(<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>)svg",
                      T + (H - T - B) / 2, T + (H - T - B) / 2, escape(ylabel))
       << '\n';
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = colors[k % std::size(colors)];
        os << R"(<polyline fill="none" stroke-width="1.5" stroke=")" << color << R"(" points=")";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            os << fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
        }
        os << "\"/>\n";
        const double ly = T + 14 + 18 * static_cast<double>(k);
        os << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="2"/>)", W - R + 10, ly,
                          W - R + 30, ly, color)
           << '\n';
        os << fmt::format(R"(<text x="{}" y="{}">{}</text>)", W - R + 36, ly + 4, escape(s.name)) << '\n';
    }
    os << "</svg>\n";
    return os.str();
}

void write_text(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    out << text;
    if (!out) throw Error(fmt::format("write to '{}' failed", path.string()));
}

void ensure_writable(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw ConfigError(fmt::format("output directory '{}' cannot be created", dir.string()));
    }
    const auto probe = dir / ".write_probe";
    {
        std::ofstream out(probe);
        if (!out) throw ConfigError(fmt::format("output directory '{}' is not writable", dir.string()));
    }
    std::filesystem::remove(probe, ec);
}

}  // namespace aimdmf
