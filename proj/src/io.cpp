#include "dobsim/io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace dobsim {
namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

void write_run_csv(const std::string& path, const RunLog& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    const int n = log.n;
    out << "t";
    for (int i = 1; i <= n; ++i) out << ",q" << i;
    for (int i = 1; i <= n; ++i) out << ",e" << i;
    out << ",eD_norm,V,Vdot";
    for (int i = 1; i <= n; ++i) out << ",tau" << i;
    for (int i = 1; i <= n; ++i) out << ",tau_dis_hat" << i;
    out << ",gamma_post,margin\n";
    for (const auto& s : log.steps) {
        out << fmt(s.t);
        for (int i = 0; i < n; ++i) out << ',' << fmt(s.q[i]);
        for (int i = 0; i < n; ++i) out << ',' << fmt(s.e[i]);
        out << ',' << fmt(s.eD_norm) << ',' << fmt(s.V) << ',' << fmt(s.Vdot);
        for (int i = 0; i < n; ++i) out << ',' << fmt(s.tau[i]);
        for (int i = 0; i < n; ++i) out << ',' << fmt(s.tau_dis_hat[i]);
        out << ',' << fmt(log.gamma_post) << ',' << fmt(s.margin) << '\n';
    }
}

void write_summary_json(const std::string& path, const Scenario& sc, const RunLog& log) {
    nlohmann::json j;
    j["verdict"] = to_string(log.verdict);
    j["gamma_violated"] = log.gamma_violated;
    j["diverged_at"] = log.diverged_at;
    j["saturated"] = log.saturated;
    j["suprema"] = {{"qddot_des", log.sup_qddot_des},
                    {"qdot", log.sup_qdot},
                    {"qdot_des", log.sup_qdot_des},
                    {"e_D", log.sup_eD}};
    j["settled"] = {{"start", log.settle_start},
                    {"max_e", log.settled_max_e},
                    {"max_eD", log.settled_max_eD}};
    j["gamma_post"] = log.gamma_post;
    if (sc.analysis.declared_sups) {
        const auto& s = *sc.analysis.declared_sups;
        j["gamma_apriori"] = ultimate_bound_gamma(log.betas, sc.controller.g_dob.minCoeff(),
                                                  s.qddot_des, s.qdot, s.qdot_des);
    }
    j["betas"] = {{"beta_M_min", log.betas.beta_M_min},
                  {"beta_M_max", log.betas.beta_M_max},
                  {"beta_C", log.betas.beta_C},
                  {"beta_g", log.betas.beta_g},
                  {"beta_dM_min", log.betas.beta_dM_min},
                  {"beta_dM_max", log.betas.beta_dM_max},
                  {"beta_fric_max", log.betas.beta_fric_max},
                  {"beta_load_max", log.betas.beta_load_max},
                  {"beta_Mn_min", log.betas.beta_Mn_min},
                  {"beta_Mn_max", log.betas.beta_Mn_max}};
    const double g_bound = bandwidth_upper_bound(log.betas, sc.controller.g_v);
    j["bandwidth_upper_bound"] =
        std::isfinite(g_bound) ? nlohmann::json(g_bound) : nlohmann::json("unconstrained");
    j["bandwidth_ok"] = sc.controller.g_dob.maxCoeff() <= g_bound;
    j["passivity_infimum"] = log.passivity_infimum;
    j["max_error_dynamics_residual"] = log.max_error_dynamics_residual;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    constexpr double W = 860, H = 380;
    constexpr double ml = 70, mr = 20, mt = 40, mb = 50;
    const double pw = W - ml - mr, ph = H - mt - mb;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (!std::isfinite(xmin)) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) { ymax = ymin + 1; ymin -= 1; }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W
        << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\""
        << " font-size=\"15\">" << title << "</text>\n";

    // axes + ticks
    out << "<g stroke=\"#333\" stroke-width=\"1\">\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\"/>\n</g>\n";
    constexpr int ticks = 5;
    out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
    for (int i = 0; i <= ticks; ++i) {
        const double xv = xmin + (xmax - xmin) * i / ticks;
        const double yv = ymin + (ymax - ymin) * i / ticks;
        out << "<line x1=\"" << px(xv) << "\" y1=\"" << mt + ph << "\" x2=\"" << px(xv)
            << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"#333\"/>\n";
        out << "<text x=\"" << px(xv) << "\" y=\"" << mt + ph + 18
            << "\" text-anchor=\"middle\">" << fmt6(xv) << "</text>\n";
        out << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(yv) << "\" x2=\"" << ml << "\" y2=\""
            << py(yv) << "\" stroke=\"#333\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
            << "\" text-anchor=\"end\">" << fmt6(yv) << "</text>\n";
    }
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10
        << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
    out << "<text x=\"16\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << mt + ph / 2 << ")\">"
        << y_label << "</text>\n</g>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const char* color = palette[si % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : series[si].points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            out << fmt6(px(x)) << ',' << fmt6(py(y)) << ' ';
        }
        out << "\"/>\n";
        out << "<g font-family=\"sans-serif\" font-size=\"12\">"
            << "<rect x=\"" << ml + pw - 150 << "\" y=\"" << mt + 6 + 16 * si
            << "\" width=\"12\" height=\"3\" fill=\"" << color << "\"/>"
            << "<text x=\"" << ml + pw - 132 << "\" y=\"" << mt + 12 + 16 * si << "\">"
            << series[si].label << "</text></g>\n";
    }
    out << "</svg>\n";
}

void write_run_plots(const std::string& out_dir, const RunLog& log) {
    PlotSeries err{"||e||", {}}, lyap{"V", {}}, rate{"dV/dt", {}};
    for (const auto& s : log.steps) {
        err.points.emplace_back(s.t, s.e.norm());
        lyap.points.emplace_back(s.t, s.V);
        rate.points.emplace_back(s.t, s.Vdot);
    }
    write_svg_plot(out_dir + "/error_norm.svg", "Position error norm", "t [s]", "||e|| [rad]",
                   {err});
    write_svg_plot(out_dir + "/lyapunov.svg", "Lyapunov function", "t [s]", "V", {lyap});
    write_svg_plot(out_dir + "/lyapunov_rate.svg", "Lyapunov function rate", "t [s]", "dV/dt",
                   {rate});
}

}  // namespace dobsim
