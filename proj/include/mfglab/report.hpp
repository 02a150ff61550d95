#pragma once

// CSV and SVG emission.  Numbers are printed with 17 significant digits so
// identical runs produce byte-identical files; SVG plots are simple line
// charts (axes, ticks, one polyline per series, legend).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfglab {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_fixed(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

/// Row-oriented CSV writer.  `front_matter` lines (already including any
/// leading '#') are emitted before the header.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void set_front_matter(std::string json_line) { front_matter_ = std::move(json_line); }

    void add_row(std::vector<std::string> cells) {
        if (cells.size() != header_.size())
            throw std::invalid_argument("CsvWriter: row width != header width");
        rows_.push_back(std::move(cells));
    }

    void write(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);  // binary: no newline translation
        if (!os) throw std::runtime_error("CsvWriter: cannot open " + path);
        if (!front_matter_.empty()) os << "# " << front_matter_ << "\n";
        os << join(header_) << "\n";
        for (const auto& r : rows_) os << join(r) << "\n";
        if (!os) throw std::runtime_error("CsvWriter: write failed for " + path);
    }

    std::size_t row_count() const { return rows_.size(); }

private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string out;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        return out;
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
    std::string front_matter_;
};

/// Minimal line chart.  Callers pre-transform data (e.g. log10) and say so
/// in the axis labels.
class SvgLinePlot {
public:
    SvgLinePlot(std::string title, std::string xlabel, std::string ylabel)
        : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

    void add_series(std::string name, std::vector<double> xs, std::vector<double> ys) {
        if (xs.size() != ys.size())
            throw std::invalid_argument("SvgLinePlot: series length mismatch");
        series_.push_back({std::move(name), std::move(xs), std::move(ys)});
    }

    void write(const std::string& path) const {
        const double W = 720, H = 480;
        const double ml = 70, mr = 160, mt = 44, mb = 56;  // margins
        double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
        bool any = false;
        for (const auto& s : series_)
            for (std::size_t i = 0; i < s.xs.size(); ++i) {
                if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
                if (!any) {
                    xmin = xmax = s.xs[i];
                    ymin = ymax = s.ys[i];
                    any = true;
                } else {
                    xmin = std::min(xmin, s.xs[i]);
                    xmax = std::max(xmax, s.xs[i]);
                    ymin = std::min(ymin, s.ys[i]);
                    ymax = std::max(ymax, s.ys[i]);
                }
            }
        if (!any) { xmin = ymin = 0; xmax = ymax = 1; }
        if (xmax == xmin) { xmax += 0.5; xmin -= 0.5; }
        if (ymax == ymin) { ymax += 0.5; ymin -= 0.5; }

        auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
        auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

        static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                       "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("SvgLinePlot: cannot open " + path);
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
           << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
           << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
           << title_ << "</text>\n";
        // axes
        os << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
           << H - mb << "\" stroke=\"black\"/>\n"
           << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
           << H - mb << "\" stroke=\"black\"/>\n";
        for (int i = 0; i <= 4; ++i) {
            const double fx = xmin + (xmax - xmin) * i / 4.0;
            const double fy = ymin + (ymax - ymin) * i / 4.0;
            os << "<text x=\"" << px(fx) << "\" y=\"" << H - mb + 18
               << "\" text-anchor=\"middle\" font-size=\"11\">" << format_fixed(fx, 3)
               << "</text>\n";
            os << "<text x=\"" << ml - 6 << "\" y=\"" << py(fy) + 4
               << "\" text-anchor=\"end\" font-size=\"11\">" << format_fixed(fy, 3)
               << "</text>\n";
        }
        os << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 14
           << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel_ << "</text>\n";
        os << "<text x=\"18\" y=\"" << (mt + H - mb) / 2
           << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
           << (mt + H - mb) / 2 << ")\">" << ylabel_ << "</text>\n";

        for (std::size_t si = 0; si < series_.size(); ++si) {
            const auto& s = series_[si];
            const char* col = colors[si % 8];
            std::string pts;
            for (std::size_t i = 0; i < s.xs.size(); ++i) {
                if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
                pts += format_fixed(px(s.xs[i]), 2) + "," + format_fixed(py(s.ys[i]), 2) + " ";
            }
            os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\""
               << pts << "\"/>\n";
            const double ly = mt + 18.0 * double(si);
            os << "<line x1=\"" << W - mr + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - mr + 34
               << "\" y2=\"" << ly << "\" stroke=\"" << col << "\" stroke-width=\"1.5\"/>\n"
               << "<text x=\"" << W - mr + 40 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
               << s.name << "</text>\n";
        }
        os << "</svg>\n";
        if (!os) throw std::runtime_error("SvgLinePlot: write failed for " + path);
    }

private:
    struct Series {
        std::string name;
        std::vector<double> xs, ys;
    };
    std::string title_, xlabel_, ylabel_;
    std::vector<Series> series_;
};

/// Least-squares slope of y against x (used for order fits and the
/// perturbation-response slope).
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_slope: need >= 2 matched points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(x.size());
    my /= double(x.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    if (den == 0.0) throw std::invalid_argument("fit_slope: degenerate abscissae");
    return num / den;
}

}  // namespace mfglab
