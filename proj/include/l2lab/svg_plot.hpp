#pragma once

#include <string>
#include <vector>

#include "l2lab/simulator.hpp"

namespace l2lab {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
};

struct ReferenceLine {
    std::string label;
    double y = 0.0;
    std::string color = "#d62728";
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    std::vector<ReferenceLine> references;
    /// Draw series as bars (histogram bins) instead of polylines.
    bool bars = false;
};

std::string render_svg(const Plot& plot, int width = 720, int height = 400);
void write_svg(const std::string& path, const Plot& plot);

/// Histogram of values over [lo, hi] with `bins` equal cells, as a bar series
/// (x = bin centre, y = count).
PlotSeries histogram(const std::string& label, const std::vector<double>& values, double lo, double hi, int bins);

/// Centre of the most populated bin.
double histogram_mode(const std::vector<double>& values, double lo, double hi, int bins);

/// Fee series, regime proportions and last-half histograms of f and p for one replica.
void write_scenario_plots(const std::string& dir, const Trajectory& trajectory, double f_star, double p_star,
                          double fee_hi);

}  // namespace l2lab
