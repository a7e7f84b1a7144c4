#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ad1d/error.hpp"

namespace ad1d::tools {

namespace {

constexpr double kWidth = 960, kHeight = 420;
constexpr double kLeft = 60, kRight = 20, kTop = 40, kBottom = 40;

const char* class_color(int cls) {
    static const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"};
    return colors[static_cast<std::size_t>(cls) % 5];
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Frame {
    double x0, x1, y0, y1;  // data range
    double px0, px1, py0, py1;  // pixel box

    double px(double x) const { return px0 + (x - x0) / (x1 - x0) * (px1 - px0); }
    double py(double y) const { return py1 - (y - y0) / (y1 - y0) * (py1 - py0); }
};

void header(std::ostringstream& o, double w, double h, const std::string& title) {
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
}

void axes(std::ostringstream& o, const Frame& f, const std::string& xlabel, const std::string& ylabel, int yticks,
          bool log_y = false) {
    o << "<rect x=\"" << f.px0 << "\" y=\"" << f.py0 << "\" width=\"" << f.px1 - f.px0 << "\" height=\""
      << f.py1 - f.py0 << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= yticks; ++i) {
        const double v = f.y0 + (f.y1 - f.y0) * i / yticks;
        const double y = f.py(v);
        o << "<line x1=\"" << f.px0 << "\" x2=\"" << f.px1 << "\" y1=\"" << y << "\" y2=\"" << y
          << "\" stroke=\"#eee\"/>\n";
        std::ostringstream label;
        label.precision(3);
        label << (log_y ? std::pow(10.0, v) : v);
        o << "<text x=\"" << f.px0 - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << label.str() << "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
        const double v = f.x0 + (f.x1 - f.x0) * i / 5;
        std::ostringstream label;
        label.precision(4);
        label << v;
        o << "<text x=\"" << f.px(v) << "\" y=\"" << f.py1 + 16 << "\" text-anchor=\"middle\">" << label.str()
          << "</text>\n";
    }
    o << "<text x=\"" << (f.px0 + f.px1) / 2 << "\" y=\"" << f.py1 + 32 << "\" text-anchor=\"middle\">"
      << escape(xlabel) << "</text>\n";
    o << "<text transform=\"translate(16," << (f.py0 + f.py1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(ylabel) << "</text>\n";
}

void polyline(std::ostringstream& o, const Frame& f, const std::vector<std::pair<double, double>>& pts,
              const char* color, double width = 1.2) {
    if (pts.empty()) return;
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\" points=\"";
    for (const auto& [x, y] : pts) o << f.px(x) << ',' << f.py(y) << ' ';
    o << "\"/>\n";
}

}  // namespace

std::string series_svg(const Sample& sample, const std::vector<Detection>& detections,
                       const std::vector<std::string>& class_names, const std::string& title) {
    std::ostringstream o;
    o.precision(5);
    header(o, kWidth, kHeight, title);
    const double n = static_cast<double>(std::max<std::size_t>(sample.values.size(), 2));
    double lo = kMaxMer, hi = 0;
    for (float v : sample.values) {
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
    }
    lo = std::floor(std::max(0.0, lo - 2) / 5) * 5;
    hi = std::ceil((hi + 8) / 5) * 5;
    if (hi <= lo) hi = lo + 5;
    const Frame f{0, n - 1, lo, hi, kLeft, kWidth - kRight, kTop, kHeight - kBottom};
    axes(o, f, "sub-carrier", "RxMER (dB)", 5);

    auto name = [&](int c) { return c >= 0 && c < static_cast<int>(class_names.size()) ? class_names[c] : "?"; };
    for (const auto& a : sample.annotations) {
        const double x0 = f.px(std::max(0.0, a.start()) * (n - 1));
        const double x1 = f.px(std::min(1.0, a.end()) * (n - 1));
        o << "<rect x=\"" << x0 << "\" y=\"" << f.py0 << "\" width=\"" << std::max(1.0, x1 - x0) << "\" height=\""
          << f.py1 - f.py0 << "\" fill=\"" << class_color(a.cls) << "\" fill-opacity=\"0.15\"><title>"
          << escape(name(a.cls)) << "</title></rect>\n";
    }
    std::vector<std::pair<double, double>> pts;
    pts.reserve(sample.values.size());
    for (std::size_t i = 0; i < sample.values.size(); ++i) pts.emplace_back(static_cast<double>(i), sample.values[i]);
    polyline(o, f, pts, "#222", 1.0);

    // Detections stack in rows at the top of the panel.
    std::vector<double> row_end;
    for (const auto& d : detections) {
        const double x0 = f.px(d.start() * (n - 1));
        const double x1 = f.px(d.end() * (n - 1));
        std::size_t row = 0;
        while (row < row_end.size() && row_end[row] > x0) ++row;
        if (row == row_end.size()) row_end.push_back(0);
        row_end[row] = x1 + 60;
        const double y = f.py0 + 6 + 16 * static_cast<double>(row);
        o << "<rect x=\"" << x0 << "\" y=\"" << y << "\" width=\"" << std::max(2.0, x1 - x0)
          << "\" height=\"5\" fill=\"" << class_color(d.cls) << "\"/>\n";
        o << "<text x=\"" << x0 << "\" y=\"" << y + 15 << "\" font-size=\"10\" fill=\"" << class_color(d.cls) << "\">"
          << escape(name(d.cls)) << ' ' << std::lround(d.confidence * 100) << "%</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string metrics_svg(const std::vector<MetricsRow>& rows, const std::string& title) {
    std::ostringstream o;
    o.precision(5);
    const double h = 2 * kHeight - 60;
    header(o, kWidth, h, title);
    if (rows.empty()) {
        o << "</svg>\n";
        return o.str();
    }
    const double x1 = static_cast<double>(std::max<long long>(rows.back().batch, rows.front().batch + 1));
    const double x0 = static_cast<double>(rows.front().batch);

    double lmin = 1e300, lmax = -1e300;
    for (const auto& r : rows)
        for (double v : {r.l1, r.l2, r.l3, r.total})
            if (v > 0) {
                lmin = std::min(lmin, std::log10(v));
                lmax = std::max(lmax, std::log10(v));
            }
    if (lmin > lmax) lmin = -1, lmax = 0;
    lmin = std::floor(lmin);
    lmax = std::ceil(lmax);
    if (lmax <= lmin) lmax = lmin + 1;
    const Frame top{x0, x1, lmin, lmax, kLeft, kWidth - kRight - 110, kTop, kHeight - kBottom};
    axes(o, top, "mini-batch", "loss (log10)", static_cast<int>(lmax - lmin), true);

    // Thin the series to roughly one point per pixel.
    const std::size_t step = std::max<std::size_t>(1, rows.size() / 900);
    auto series = [&](auto get) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < rows.size(); i += step) {
            const double v = get(rows[i]);
            if (v > 0) pts.emplace_back(static_cast<double>(rows[i].batch), std::log10(v));
        }
        return pts;
    };
    const std::pair<const char*, const char*> legend[] = {
        {"L1", "#1f77b4"}, {"L2", "#ff7f0e"}, {"L3", "#2ca02c"}, {"L_total", "#222"}};
    polyline(o, top, series([](const MetricsRow& r) { return r.l1; }), legend[0].second);
    polyline(o, top, series([](const MetricsRow& r) { return r.l2; }), legend[1].second);
    polyline(o, top, series([](const MetricsRow& r) { return r.l3; }), legend[2].second);
    polyline(o, top, series([](const MetricsRow& r) { return r.total; }), legend[3].second, 1.6);
    for (int i = 0; i < 4; ++i) {
        const double y = kTop + 14 + 18 * i;
        o << "<line x1=\"" << kWidth - 120 << "\" x2=\"" << kWidth - 96 << "\" y1=\"" << y << "\" y2=\"" << y
          << "\" stroke=\"" << legend[i].second << "\" stroke-width=\"2\"/><text x=\"" << kWidth - 90 << "\" y=\""
          << y + 4 << "\">" << legend[i].first << "</text>\n";
    }

    const Frame bottom{x0, x1, 0, 1, kLeft, kWidth - kRight - 110, kHeight, h - kBottom};
    axes(o, bottom, "mini-batch", "mAP", 5);
    std::vector<std::pair<double, double>> m50, m75;
    for (const auto& r : rows) {
        if (r.map50 >= 0) m50.emplace_back(static_cast<double>(r.batch), r.map50);
        if (r.map75 >= 0) m75.emplace_back(static_cast<double>(r.batch), r.map75);
    }
    polyline(o, bottom, m50, "#d62728", 1.6);
    polyline(o, bottom, m75, "#9467bd", 1.6);
    o << "<text x=\"" << kWidth - 90 << "\" y=\"" << kHeight + 18 << "\" fill=\"#d62728\">mAP50</text>\n";
    o << "<text x=\"" << kWidth - 90 << "\" y=\"" << kHeight + 36 << "\" fill=\"#9467bd\">mAP75</text>\n";
    o << "</svg>\n";
    return o.str();
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open metrics file " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("batch,", 0) != 0) throw InputError(path + ": missing metrics header");
    std::vector<MetricsRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 8) throw InputError(path + ":" + std::to_string(lineno) + ": expected 8 fields");
        try {
            MetricsRow r;
            r.batch = std::stoll(f[0]);
            r.l1 = std::stod(f[2]);
            r.l2 = std::stod(f[3]);
            r.l3 = std::stod(f[4]);
            r.total = std::stod(f[5]);
            if (!f[6].empty()) r.map50 = std::stod(f[6]);
            if (!f[7].empty()) r.map75 = std::stod(f[7]);
            rows.push_back(r);
        } catch (const std::logic_error&) {
            throw InputError(path + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    return rows;
}

}  // namespace ad1d::tools
