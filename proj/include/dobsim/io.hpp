#pragma once

#include "dobsim/scenario.hpp"
#include "dobsim/simulation.hpp"

#include <string>
#include <utility>
#include <vector>

namespace dobsim {

/// Fixed per-run CSV schema:
/// t,q1..qn,e1..en,eD_norm,V,Vdot,tau1..taun,tau_dis_hat1..n,gamma_post,margin
void write_run_csv(const std::string& path, const RunLog& log);

/// Verdict, measured suprema, Gamma, beta constants, preflight checks.
void write_summary_json(const std::string& path, const Scenario& sc, const RunLog& log);

/// One curve of a line plot: label plus (x, y) points.
struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

/// Static SVG 1.1 line plot with axes, ticks and a legend.
void write_svg_plot(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series);

/// error-norm / Lyapunov / Lyapunov-rate plots for one run.
void write_run_plots(const std::string& out_dir, const RunLog& log);

}  // namespace dobsim
