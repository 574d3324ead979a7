#include "l2lab/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "l2lab/config.hpp"

namespace l2lab {

namespace {

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string short_num(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

}  // namespace

std::string render_svg(const Plot& plot, int width, int height) {
    const double left = 80.0;
    const double right = 20.0;
    const double top = 40.0;
    const double bottom = 50.0;
    double x_lo = std::numeric_limits<double>::infinity();
    double x_hi = -x_lo;
    double y_lo = x_lo;
    double y_hi = -x_lo;
    for (const auto& s : plot.series) {
        for (double v : s.x) {
            x_lo = std::min(x_lo, v);
            x_hi = std::max(x_hi, v);
        }
        for (double v : s.y) {
            y_lo = std::min(y_lo, v);
            y_hi = std::max(y_hi, v);
        }
    }
    for (const auto& r : plot.references) {
        y_lo = std::min(y_lo, r.y);
        y_hi = std::max(y_hi, r.y);
    }
    if (!std::isfinite(x_lo)) x_lo = 0.0, x_hi = 1.0;
    if (!std::isfinite(y_lo)) y_lo = 0.0, y_hi = 1.0;
    if (plot.bars) y_lo = std::min(0.0, y_lo);
    if (x_hi <= x_lo) x_hi = x_lo + 1.0;
    if (y_hi <= y_lo) y_hi = y_lo + 1.0;

    const double pw = width - left - right;
    const double ph = height - top - bottom;
    auto sx = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
    auto sy = [&](double y) { return top + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(plot.title)
       << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << left << "\" y=\"" << height - 10 << "\">" << short_num(x_lo) << "</text>\n";
    os << "<text x=\"" << left + pw << "\" y=\"" << height - 10 << "\" text-anchor=\"end\">" << short_num(x_hi)
       << "</text>\n";
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">"
       << escape(plot.x_label) << "</text>\n";
    os << "<text x=\"5\" y=\"" << top + 10 << "\">" << short_num(y_hi) << "</text>\n";
    os << "<text x=\"5\" y=\"" << top + ph << "\">" << short_num(y_lo) << "</text>\n";
    os << "<text x=\"5\" y=\"" << top + ph / 2 << "\">" << escape(plot.y_label) << "</text>\n";

    int legend_y = static_cast<int>(top) + 15;
    for (const auto& s : plot.series) {
        if (plot.bars && s.x.size() > 0) {
            const double bw = s.x.size() > 1 ? (sx(s.x[1]) - sx(s.x[0])) : pw;
            for (std::size_t k = 0; k < s.x.size(); ++k) {
                const double y0 = sy(std::max(0.0, y_lo));
                const double y1 = sy(s.y[k]);
                os << "<rect x=\"" << format_double(sx(s.x[k]) - bw / 2) << "\" y=\"" << format_double(std::min(y0, y1))
                   << "\" width=\"" << format_double(bw) << "\" height=\"" << format_double(std::abs(y0 - y1))
                   << "\" fill=\"" << s.color << "\" fill-opacity=\"0.6\"/>\n";
            }
        } else {
            os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1\" points=\"";
            for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
                os << (k ? " " : "") << format_double(sx(s.x[k])) << "," << format_double(sy(s.y[k]));
            }
            os << "\"/>\n";
        }
        os << "<text x=\"" << left + pw - 5 << "\" y=\"" << legend_y << "\" text-anchor=\"end\" fill=\"" << s.color
           << "\">" << escape(s.label) << "</text>\n";
        legend_y += 15;
    }
    for (const auto& r : plot.references) {
        const double y = sy(r.y);
        os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << format_double(y) << "\" y2=\""
           << format_double(y) << "\" stroke=\"" << r.color << "\" stroke-dasharray=\"6,4\"/>\n";
        os << "<text x=\"" << left + 5 << "\" y=\"" << format_double(y - 4) << "\" fill=\"" << r.color << "\">"
           << escape(r.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_svg(const std::string& path, const Plot& plot) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << render_svg(plot);
}

PlotSeries histogram(const std::string& label, const std::vector<double>& values, double lo, double hi, int bins) {
    if (bins < 1 || !(hi > lo)) throw std::invalid_argument("histogram: need bins >= 1 and hi > lo");
    PlotSeries s;
    s.label = label;
    s.y.assign(static_cast<std::size_t>(bins), 0.0);
    const double w = (hi - lo) / bins;
    for (int b = 0; b < bins; ++b) s.x.push_back(lo + (b + 0.5) * w);
    for (double v : values) {
        if (v < lo || v > hi) continue;
        const int b = std::min(bins - 1, static_cast<int>((v - lo) / w));
        s.y[static_cast<std::size_t>(b)] += 1.0;
    }
    return s;
}

double histogram_mode(const std::vector<double>& values, double lo, double hi, int bins) {
    const PlotSeries h = histogram("", values, lo, hi, bins);
    const auto it = std::max_element(h.y.begin(), h.y.end());
    return h.x[static_cast<std::size_t>(it - h.y.begin())];
}

void write_scenario_plots(const std::string& dir, const Trajectory& t, double f_star, double p_star, double fee_hi) {
    std::vector<double> idx;
    std::vector<double> f;
    std::vector<double> p;
    std::vector<double> ifrac;
    std::vector<double> jfrac;
    // Thin long series to at most ~2000 points per line.
    const std::size_t stride = std::max<std::size_t>(1, t.records.size() / 2000);
    for (std::size_t k = 0; k < t.records.size(); k += stride) {
        const auto& r = t.records[k];
        idx.push_back(static_cast<double>(r.update_index));
        f.push_back(r.f_last);
        p.push_back(r.p_last);
        ifrac.push_back(r.i_frac);
        jfrac.push_back(r.j_frac);
    }

    Plot fees{"Fee sequences", "update", "fee (ETH/tx)", {}, {}, false};
    fees.series.push_back({"f (budget balance)", idx, f, "#1f77b4"});
    fees.series.push_back({"p (congestion)", idx, p, "#ff7f0e"});
    fees.references.push_back({"f*", f_star, "#1f77b4"});
    fees.references.push_back({"p*", p_star, "#ff7f0e"});
    write_svg(dir + "/fees.svg", fees);

    Plot props{"Regime proportions", "update", "fraction", {}, {}, false};
    props.series.push_back({"i(t)/t", idx, ifrac, "#1f77b4"});
    props.series.push_back({"j(t)/t", idx, jfrac, "#ff7f0e"});
    write_svg(dir + "/proportions.svg", props);

    std::vector<double> f_tail;
    std::vector<double> p_tail;
    for (std::size_t k = t.records.size() / 2; k < t.records.size(); ++k) {
        f_tail.push_back(t.records[k].f_last);
        p_tail.push_back(t.records[k].p_last);
    }
    Plot hf{"Histogram of f (last half)", "fee (ETH/tx)", "count", {histogram("f", f_tail, 0.0, fee_hi, 100)},
            {}, true};
    write_svg(dir + "/hist_f.svg", hf);
    Plot hp{"Histogram of p (last half)", "fee (ETH/tx)", "count", {histogram("p", p_tail, 0.0, fee_hi, 100)},
            {}, true};
    hp.series[0].color = "#ff7f0e";
    write_svg(dir + "/hist_p.svg", hp);
}

}  // namespace l2lab
