// Command-line front end: generate instances, run message passing and the
// spectral baseline on them, evaluate state evolution and the phase
// diagram, and rebuild the figure datasets.
//
// Exit codes: 0 success, 2 usage error, 3 numerical failure,
// 4 non-convergence.

#include "CLI11.hpp"

#include "gmmamp/gmmamp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Minimal SVG line charts, enough to eyeball a curve without leaving the
// terminal's working directory.

struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;
  bool line = true;
};

std::string svg_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

void write_svg_chart(const fs::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<SvgSeries>& series) {
  const double width = 640, height = 440;
  const double left = 64, right = 24, top = 40, bottom = 48;
  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (x_min > x_max) {
    x_min = 0;
    x_max = 1;
    y_min = 0;
    y_max = 1;
  }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) y_max = y_min + 1;
  const double y_pad = 0.05 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;
  auto px = [&](double x) {
    return left + (x - x_min) / (x_max - x_min) * (width - left - right);
  };
  auto py = [&](double y) {
    return height - bottom - (y - y_min) / (y_max - y_min) * (height - top - bottom);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_number(width) +
         "\" height=\"" + svg_number(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + svg_number(width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
         title + "</text>\n";
  // axes
  svg += "<line x1=\"" + svg_number(left) + "\" y1=\"" + svg_number(height - bottom) +
         "\" x2=\"" + svg_number(width - right) + "\" y2=\"" + svg_number(height - bottom) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + svg_number(left) + "\" y1=\"" + svg_number(top) + "\" x2=\"" +
         svg_number(left) + "\" y2=\"" + svg_number(height - bottom) + "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = x_min + (x_max - x_min) * t / 4;
    const double fy = y_min + (y_max - y_min) * t / 4;
    svg += "<line x1=\"" + svg_number(px(fx)) + "\" y1=\"" + svg_number(height - bottom) +
           "\" x2=\"" + svg_number(px(fx)) + "\" y2=\"" + svg_number(height - bottom + 4) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + svg_number(px(fx)) + "\" y=\"" + svg_number(height - bottom + 18) +
           "\" text-anchor=\"middle\">" + svg_number(fx) + "</text>\n";
    svg += "<line x1=\"" + svg_number(left - 4) + "\" y1=\"" + svg_number(py(fy)) + "\" x2=\"" +
           svg_number(left) + "\" y2=\"" + svg_number(py(fy)) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + svg_number(left - 8) + "\" y=\"" + svg_number(py(fy) + 4) +
           "\" text-anchor=\"end\">" + svg_number(fy) + "</text>\n";
  }
  svg += "<text x=\"" + svg_number((left + width - right) / 2) + "\" y=\"" +
         svg_number(height - 10) + "\" text-anchor=\"middle\">" + x_label + "</text>\n";
  svg += "<text x=\"16\" y=\"" + svg_number((top + height - bottom) / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         svg_number((top + height - bottom) / 2) + ")\">" + y_label + "</text>\n";

  double legend_y = top + 8;
  for (const auto& s : series) {
    if (s.line) {
      std::string pts;
      for (const auto& [x, y] : s.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        pts += svg_number(px(x)) + "," + svg_number(py(y)) + " ";
      }
      svg += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"" +
             pts + "\"/>\n";
    } else {
      for (const auto& [x, y] : s.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        svg += "<circle cx=\"" + svg_number(px(x)) + "\" cy=\"" + svg_number(py(y)) +
               "\" r=\"3\" fill=\"" + s.color + "\"/>\n";
      }
    }
    svg += "<rect x=\"" + svg_number(width - right - 150) + "\" y=\"" + svg_number(legend_y - 8) +
           "\" width=\"10\" height=\"10\" fill=\"" + s.color + "\"/>\n";
    svg += "<text x=\"" + svg_number(width - right - 135) + "\" y=\"" + svg_number(legend_y + 1) +
           "\">" + s.label + "</text>\n";
    legend_y += 16;
  }
  svg += "</svg>\n";
  gmmamp::write_text_atomic(path, svg);
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

// ---------------------------------------------------------------------------

void write_manifest(const fs::path& out, const std::string& subcommand, json config) {
  config["threads"] = gmmamp::num_threads();
  gmmamp::write_json_atomic(out / "manifest.json", gmmamp::make_manifest(subcommand, config));
}

void write_assignments(const fs::path& path, const Eigen::VectorXi& labels) {
  std::string text;
  for (Eigen::Index j = 0; j < labels.size(); ++j) {
    text += std::to_string(labels(j) + 1);
    text += '\n';
  }
  gmmamp::write_text_atomic(path, text);
}

struct GenerateArgs {
  gmmamp::ModelParams params;
  std::string out;
};

int run_generate(const GenerateArgs& args) {
  const gmmamp::GmmInstance inst = gmmamp::generate_instance(args.params);
  const fs::path out(args.out);
  gmmamp::write_instance(out, inst);
  write_manifest(out, "generate", gmmamp::params_to_json(args.params));
  std::cout << "instance written to " << out.string() << " (n=" << args.params.n
            << ", m=" << args.params.m << ", r=" << args.params.r << ")\n";
  return 0;
}

struct AmpArgs {
  std::string instance;
  std::string out;
  std::string init = "uninformative";
  gmmamp::AmpConfig config;
  bool write_posteriors = false;
};

int run_amp(const AmpArgs& args) {
  gmmamp::GmmInstance inst = gmmamp::read_instance(args.instance);
  gmmamp::AmpConfig config = args.config;
  config.init = args.init == "informative" ? gmmamp::AmpInit::kInformative
                                           : gmmamp::AmpInit::kUninformative;
  const gmmamp::AmpResult result = gmmamp::amp_iterate(inst, config);
  const gmmamp::OrderParams fits = gmmamp::empirical_order_params(result, inst);

  const fs::path out(args.out);
  fs::create_directories(out);
  json res{{"converged", result.converged},
           {"iterations", result.iterations},
           {"overlap", result.overlap.overlap},
           {"correct_rate", result.overlap.correct_rate},
           {"b_s_empirical", gmmamp::fit_b_s(fits.M_s)},
           {"b_v_empirical", gmmamp::fit_b_v(fits.M_v)}};
  gmmamp::write_json_atomic(out / "result.json", res);
  write_assignments(out / "assignments.csv", gmmamp::hard_assign(result.s_hat));
  Eigen::MatrixXd traj(result.trajectory.size(), 3);
  for (size_t i = 0; i < result.trajectory.size(); ++i) {
    traj(i, 0) = result.trajectory[i].iteration;
    traj(i, 1) = result.trajectory[i].max_change;
    traj(i, 2) = result.trajectory[i].overlap;
  }
  gmmamp::write_csv(out / "trajectory.csv", {"iteration", "max_change", "overlap"}, traj);
  if (args.write_posteriors) gmmamp::write_csv(out / "s_hat.csv", {}, result.s_hat);
  write_manifest(out, "amp",
                 json{{"instance", args.instance},
                      {"init", args.init},
                      {"max_iters", config.max_iters},
                      {"tol", config.tol},
                      {"damping", config.damping},
                      {"init_noise", config.init_noise},
                      {"seed", config.seed},
                      {"onsager", config.onsager}});
  std::cout << (result.converged ? "converged" : "did not converge") << " after "
            << result.iterations << " iterations, overlap " << result.overlap.overlap
            << "\n";
  return result.converged ? 0 : 4;
}

struct SeArgs {
  int r = 2;
  double alpha = 2.0;
  std::optional<double> rho;
  double rho_min = 0.5, rho_max = 4.0;
  int rho_steps = 36;
  std::string init = "both";
  gmmamp::SeOptions options;
  std::string out;
  std::string format = "csv";
  bool svg = false;
};

int run_se(const SeArgs& args) {
  std::vector<double> rhos;
  if (args.rho) {
    rhos.push_back(*args.rho);
  } else {
    if (args.rho_steps < 1 || args.rho_max <= args.rho_min)
      throw std::invalid_argument("se: bad rho grid");
    for (int i = 0; i <= args.rho_steps; ++i)
      rhos.push_back(args.rho_min + (args.rho_max - args.rho_min) * i / args.rho_steps);
  }
  const bool want_amp = args.init != "informative";
  const bool want_inf = args.init != "uninformative";

  Eigen::MatrixXd table(rhos.size(), 5);
  for (size_t i = 0; i < rhos.size(); ++i) {
    const double rho = rhos[i];
    double b_amp = kNan, b_inf = kNan, gap = kNan, err = 0.0;
    if (want_amp) {
      const auto fp = gmmamp::se_fixed_point(gmmamp::SeInit::kUninformative, rho,
                                             args.alpha, args.r, args.options);
      b_amp = fp.b_s;
      err = std::max(err, fp.std_error);
    }
    if (want_inf) {
      const auto fp = gmmamp::se_fixed_point(gmmamp::SeInit::kInformative, rho,
                                             args.alpha, args.r, args.options);
      b_inf = fp.b_s;
      err = std::max(err, fp.std_error);
      const double x_fp = gmmamp::se_arg(fp.b_s, rho, args.alpha, args.r);
      gap = x_fp > 0 ? gmmamp::free_energy_gap(x_fp, rho, args.alpha, args.r,
                                               args.options.samples, args.options.seed)
                     : 0.0;
    }
    table(i, 0) = rho;
    table(i, 1) = b_amp;
    table(i, 2) = b_inf;
    table(i, 3) = gap;
    table(i, 4) = err;
    std::cout << "rho=" << rho;
    if (want_amp) std::cout << " b_amp=" << b_amp;
    if (want_inf) std::cout << " b_inf=" << b_inf << " phi_gap=" << gap;
    std::cout << "\n";
  }

  const fs::path out(args.out);
  fs::create_directories(out);
  gmmamp::write_csv(out / "se_curve.csv", {"rho", "b_amp", "b_inf", "phi_gap", "std_error"},
                    table);
  if (args.format == "json") {
    json rows = json::array();
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
      rows.push_back(json{{"rho", table(i, 0)},
                          {"b_amp", table(i, 1)},
                          {"b_inf", table(i, 2)},
                          {"phi_gap", table(i, 3)},
                          {"std_error", table(i, 4)}});
    }
    gmmamp::write_json_atomic(out / "se_curve.json", rows);
  }
  if (args.svg) {
    std::vector<SvgSeries> series;
    SvgSeries amp_series{"b_amp", kPalette[0], {}, true};
    SvgSeries inf_series{"b_inf", kPalette[1], {}, true};
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
      if (std::isfinite(table(i, 1))) amp_series.points.emplace_back(table(i, 0), table(i, 1));
      if (std::isfinite(table(i, 2))) inf_series.points.emplace_back(table(i, 0), table(i, 2));
    }
    if (want_amp) series.push_back(std::move(amp_series));
    if (want_inf) series.push_back(std::move(inf_series));
    write_svg_chart(out / "se_curve.svg", "state evolution overlap", "rho", "b", series);
  }
  write_manifest(out, "se",
                 json{{"r", args.r},
                      {"alpha", args.alpha},
                      {"rho", args.rho ? json(*args.rho) : json(nullptr)},
                      {"rho_min", args.rho_min},
                      {"rho_max", args.rho_max},
                      {"rho_steps", args.rho_steps},
                      {"init", args.init},
                      {"samples", args.options.samples},
                      {"seed", args.options.seed}});
  return 0;
}

struct PhaseArgs {
  std::optional<int> r;
  int r_min = 5, r_max = 30;
  double alpha = 2.0;
  gmmamp::PhaseOptions options;
  double rel_rho_min = 0.1, rel_rho_max = 1.25;
  int rho_steps = 24;
  std::string out;
  std::string format = "csv";
};

int run_phase(const PhaseArgs& args) {
  std::vector<int> rs;
  if (args.r) {
    rs.push_back(*args.r);
  } else {
    if (args.r_min < 2 || args.r_max < args.r_min)
      throw std::invalid_argument("phase-diagram: bad r range");
    for (int r = args.r_min; r <= args.r_max; ++r) rs.push_back(r);
  }

  Eigen::MatrixXd thresholds(rs.size(), 7);
  std::vector<std::string> grid_lines;
  for (size_t i = 0; i < rs.size(); ++i) {
    const int r = rs[i];
    const gmmamp::PhasePoint point = gmmamp::phase_point(r, args.alpha, args.options);
    thresholds(i, 0) = r;
    thresholds(i, 1) = args.alpha;
    thresholds(i, 2) = point.rho_c_value;
    thresholds(i, 3) = point.rho_sp_value ? point.rho_sp_value->value : kNan;
    thresholds(i, 4) = point.rho_sp_value ? point.rho_sp_value->std_error : kNan;
    thresholds(i, 5) = point.rho_it_value ? point.rho_it_value->value : kNan;
    thresholds(i, 6) = point.rho_it_value ? point.rho_it_value->std_error : kNan;
    std::cout << "r=" << r << " rho_c=" << point.rho_c_value;
    if (point.rho_sp_value)
      std::cout << " rho_sp=" << point.rho_sp_value->value << "+-"
                << point.rho_sp_value->std_error;
    if (point.rho_it_value)
      std::cout << " rho_it=" << point.rho_it_value->value << "+-"
                << point.rho_it_value->std_error;
    std::cout << "\n";

    for (int k = 0; k <= args.rho_steps; ++k) {
      const double rho = point.rho_c_value *
                         (args.rel_rho_min +
                          (args.rel_rho_max - args.rel_rho_min) * k / args.rho_steps);
      const gmmamp::Phase phase = point.phase_at(rho);
      grid_lines.push_back(std::to_string(r) + "," + gmmamp::format_double(args.alpha) +
                           "," + gmmamp::format_double(rho) + "," +
                           gmmamp::phase_name(phase));
    }
  }

  const fs::path out(args.out);
  fs::create_directories(out);
  gmmamp::write_csv(out / "phase.csv",
                    {"r", "alpha", "rho_c", "rho_sp", "rho_sp_err", "rho_it", "rho_it_err"},
                    thresholds);
  std::string grid_text = "r,alpha,rho,phase\n";
  for (const auto& line : grid_lines) {
    grid_text += line;
    grid_text += '\n';
  }
  gmmamp::write_text_atomic(out / "phase_grid.csv", grid_text);
  if (args.format == "json") {
    json rows = json::array();
    for (Eigen::Index i = 0; i < thresholds.rows(); ++i) {
      rows.push_back(json{{"r", static_cast<int>(thresholds(i, 0))},
                          {"alpha", thresholds(i, 1)},
                          {"rho_c", thresholds(i, 2)},
                          {"rho_sp", thresholds(i, 3)},
                          {"rho_sp_err", thresholds(i, 4)},
                          {"rho_it", thresholds(i, 5)},
                          {"rho_it_err", thresholds(i, 6)}});
    }
    gmmamp::write_json_atomic(out / "phase.json", rows);
  }
  write_manifest(out, "phase-diagram",
                 json{{"r", args.r ? json(*args.r) : json(nullptr)},
                      {"r_min", args.r_min},
                      {"r_max", args.r_max},
                      {"alpha", args.alpha},
                      {"samples", args.options.samples},
                      {"seed", args.options.seed},
                      {"grid_points", args.options.grid_points}});
  return 0;
}

struct PcaArgs {
  std::string instance;
  std::string out;
  gmmamp::PcaOptions options;
  bool write_projected = false;
};

int run_pca(const PcaArgs& args) {
  const gmmamp::GmmInstance inst = gmmamp::read_instance(args.instance);
  const gmmamp::PcaResult result = gmmamp::pca_cluster(inst, args.options);
  const double rho_eff = inst.params.rho / inst.params.delta;
  const double alpha = inst.params.alpha();

  const fs::path out(args.out);
  fs::create_directories(out);
  json res{{"overlap", result.overlap.overlap},
           {"correct_rate", result.overlap.correct_rate},
           {"theory_correct_rate", gmmamp::pca_correct_rate_theory(rho_eff, alpha, inst.params.r)},
           {"theory_overlap", gmmamp::pca_overlap_theory(rho_eff, alpha, inst.params.r)},
           {"theory_mse", gmmamp::pca_mse_theory(rho_eff, alpha, inst.params.r)},
           {"singular_values", std::vector<double>(result.singular_values.data(),
                                                   result.singular_values.data() +
                                                       result.singular_values.size())}};
  gmmamp::write_json_atomic(out / "pca_result.json", res);
  write_assignments(out / "assignments.csv", result.assignments);
  if (args.write_projected) gmmamp::write_csv(out / "projected.csv", {}, result.projected);
  write_manifest(out, "pca",
                 json{{"instance", args.instance},
                      {"kmeans_restarts", args.options.kmeans_restarts},
                      {"seed", args.options.seed}});
  std::cout << "pca overlap " << result.overlap.overlap << " (theory "
            << res["theory_overlap"].get<double>() << ")\n";
  return 0;
}

struct ReproduceArgs {
  std::string figure;
  std::string scale = "desk";
  std::uint64_t seed = 1;
  std::string out;
  bool svg = false;
};

void reproduce_fig1(const ReproduceArgs& args, const fs::path& out) {
  const bool desk = args.scale == "desk";
  gmmamp::PhaseOptions options;
  options.samples = desk ? 50000 : gmmamp::kDefaultMcSamples;

  std::vector<int> rs;
  for (int r = 5; r <= 30; ++r) rs.push_back(r);
  Eigen::MatrixXd thresholds(rs.size(), 7);
  Eigen::MatrixXd asym(rs.size(), 3);
  for (size_t i = 0; i < rs.size(); ++i) {
    const int r = rs[i];
    const auto point = gmmamp::phase_point(r, 2.0, options);
    thresholds(i, 0) = r;
    thresholds(i, 1) = 2.0;
    thresholds(i, 2) = point.rho_c_value;
    thresholds(i, 3) = point.rho_sp_value ? point.rho_sp_value->value : kNan;
    thresholds(i, 4) = point.rho_sp_value ? point.rho_sp_value->std_error : kNan;
    thresholds(i, 5) = point.rho_it_value ? point.rho_it_value->value : kNan;
    thresholds(i, 6) = point.rho_it_value ? point.rho_it_value->std_error : kNan;
    asym(i, 0) = r;
    asym(i, 1) = gmmamp::asymptotic_rho_sp(r, 2.0);
    asym(i, 2) = gmmamp::asymptotic_rho_it(r, 2.0);
    std::cout << "fig1 r=" << r << " done\n";
  }
  gmmamp::write_csv(out / "phase.csv",
                    {"r", "alpha", "rho_c", "rho_sp", "rho_sp_err", "rho_it", "rho_it_err"},
                    thresholds);
  gmmamp::write_csv(out / "asymptotics.csv", {"r", "rho_sp_asym", "rho_it_asym"}, asym);
  if (args.svg) {
    std::vector<SvgSeries> series(3);
    series[0] = {"rho_c", kPalette[0], {}, true};
    series[1] = {"rho_sp", kPalette[1], {}, true};
    series[2] = {"rho_it", kPalette[2], {}, true};
    for (Eigen::Index i = 0; i < thresholds.rows(); ++i) {
      series[0].points.emplace_back(thresholds(i, 0), thresholds(i, 2));
      if (std::isfinite(thresholds(i, 3)))
        series[1].points.emplace_back(thresholds(i, 0), thresholds(i, 3));
      if (std::isfinite(thresholds(i, 5)))
        series[2].points.emplace_back(thresholds(i, 0), thresholds(i, 5));
    }
    write_svg_chart(out / "phase.svg", "thresholds at alpha = 2", "r", "rho", series);
  }
}

void reproduce_fig2(const ReproduceArgs& args, const fs::path& out) {
  const bool desk = args.scale == "desk";
  const int r = 2;
  const double alpha = 2.0;
  const int n = 1000;
  gmmamp::SeOptions se_options;

  const double rho_step = desk ? 0.05 : 0.02;
  std::vector<double> curve_rhos;
  for (double rho = 0.5; rho <= 4.0 + 1e-9; rho += rho_step) curve_rhos.push_back(rho);

  Eigen::MatrixXd curve(curve_rhos.size(), 5);
  Eigen::MatrixXd theory(curve_rhos.size(), 3);
  for (size_t i = 0; i < curve_rhos.size(); ++i) {
    const double rho = curve_rhos[i];
    const auto fp_amp =
        gmmamp::se_fixed_point(gmmamp::SeInit::kUninformative, rho, alpha, r, se_options);
    const auto fp_inf =
        gmmamp::se_fixed_point(gmmamp::SeInit::kInformative, rho, alpha, r, se_options);
    const double x_fp = gmmamp::se_arg(fp_inf.b_s, rho, alpha, r);
    curve(i, 0) = rho;
    curve(i, 1) = fp_amp.b_s;
    curve(i, 2) = fp_inf.b_s;
    curve(i, 3) = x_fp > 0 ? gmmamp::free_energy_gap(x_fp, rho, alpha, r,
                                                     se_options.samples, se_options.seed)
                           : 0.0;
    curve(i, 4) = std::max(fp_amp.std_error, fp_inf.std_error);
    theory(i, 0) = rho;
    theory(i, 1) = gmmamp::predicted_overlap(fp_amp.b_s, rho, alpha, r);
    theory(i, 2) = gmmamp::pca_overlap_theory(rho, alpha, r);
  }
  gmmamp::write_csv(out / "se_curve.csv", {"rho", "b_amp", "b_inf", "phi_gap", "std_error"},
                    curve);
  gmmamp::write_csv(out / "theory_curve.csv", {"rho", "amp_overlap", "pca_overlap"}, theory);

  const int n_seeds = desk ? 2 : 10;
  const double point_step = desk ? 0.25 : 0.125;
  std::vector<double> point_rhos;
  for (double rho = 0.5; rho <= 4.0 + 1e-9; rho += point_step) point_rhos.push_back(rho);

  Eigen::MatrixXd amp_points(point_rhos.size() * n_seeds, 6);
  Eigen::MatrixXd pca_points(point_rhos.size() * n_seeds, 4);
  Eigen::Index row = 0;
  for (const double rho : point_rhos) {
    for (int s = 0; s < n_seeds; ++s) {
      gmmamp::ModelParams params;
      params.n = n;
      params.m = static_cast<int>(alpha * n);
      params.r = r;
      params.rho = rho;
      params.seed = gmmamp::mix64(args.seed, static_cast<std::uint64_t>(row));
      const auto inst = gmmamp::generate_instance(params);
      gmmamp::AmpConfig config;
      config.record_trajectory = false;
      const auto result = gmmamp::amp_iterate(inst, config);
      const auto fits = gmmamp::empirical_order_params(result, inst);
      amp_points(row, 0) = rho;
      amp_points(row, 1) = s;
      amp_points(row, 2) = result.overlap.overlap;
      amp_points(row, 3) = result.overlap.correct_rate;
      amp_points(row, 4) = result.iterations;
      amp_points(row, 5) = gmmamp::fit_b_s(fits.M_s);
      const auto pca = gmmamp::pca_cluster(inst);
      pca_points(row, 0) = rho;
      pca_points(row, 1) = s;
      pca_points(row, 2) = pca.overlap.overlap;
      pca_points(row, 3) = pca.overlap.correct_rate;
      ++row;
    }
    std::cout << "fig2 rho=" << rho << " done\n";
  }
  gmmamp::write_csv(out / "amp_points.csv",
                    {"rho", "seed", "overlap", "correct_rate", "iterations", "b_s_fit"},
                    amp_points);
  gmmamp::write_csv(out / "pca_points.csv", {"rho", "seed", "overlap", "correct_rate"},
                    pca_points);

  if (args.svg) {
    std::vector<SvgSeries> series;
    SvgSeries se_s{"amp theory", kPalette[0], {}, true};
    SvgSeries pca_s{"pca theory", kPalette[2], {}, true};
    for (Eigen::Index i = 0; i < theory.rows(); ++i) {
      se_s.points.emplace_back(theory(i, 0), theory(i, 1));
      pca_s.points.emplace_back(theory(i, 0), theory(i, 2));
    }
    SvgSeries amp_s{"amp runs", kPalette[1], {}, false};
    for (Eigen::Index i = 0; i < amp_points.rows(); ++i)
      amp_s.points.emplace_back(amp_points(i, 0), amp_points(i, 2));
    SvgSeries pca_e{"pca runs", kPalette[3], {}, false};
    for (Eigen::Index i = 0; i < pca_points.rows(); ++i)
      pca_e.points.emplace_back(pca_points(i, 0), pca_points(i, 2));
    series.push_back(std::move(se_s));
    series.push_back(std::move(pca_s));
    series.push_back(std::move(amp_s));
    series.push_back(std::move(pca_e));
    write_svg_chart(out / "overlap.svg", "overlap vs rho (r=2, alpha=2)", "rho", "overlap",
                    series);
  }
}

void reproduce_fig3(const ReproduceArgs& args, const fs::path& out) {
  const bool desk = args.scale == "desk";
  const int r = 20;
  const double alpha = 2.0;
  const int n = desk ? 4000 : 10000;
  gmmamp::SeOptions se_options;
  se_options.samples = desk ? 50000 : gmmamp::kDefaultMcSamples;

  const double rho_step = desk ? 0.25 : 0.1;
  std::vector<double> curve_rhos;
  for (double rho = 10.0; rho <= 20.0 + 1e-9; rho += rho_step) curve_rhos.push_back(rho);
  Eigen::MatrixXd curve(curve_rhos.size(), 5);
  for (size_t i = 0; i < curve_rhos.size(); ++i) {
    const double rho = curve_rhos[i];
    const auto fp_amp =
        gmmamp::se_fixed_point(gmmamp::SeInit::kUninformative, rho, alpha, r, se_options);
    const auto fp_inf =
        gmmamp::se_fixed_point(gmmamp::SeInit::kInformative, rho, alpha, r, se_options);
    const double x_fp = gmmamp::se_arg(fp_inf.b_s, rho, alpha, r);
    curve(i, 0) = rho;
    curve(i, 1) = fp_amp.b_s;
    curve(i, 2) = fp_inf.b_s;
    curve(i, 3) = x_fp > 0 ? gmmamp::free_energy_gap(x_fp, rho, alpha, r,
                                                     se_options.samples, se_options.seed)
                           : 0.0;
    curve(i, 4) = std::max(fp_amp.std_error, fp_inf.std_error);
  }
  gmmamp::write_csv(out / "se_curve.csv", {"rho", "b_amp", "b_inf", "phi_gap", "std_error"},
                    curve);
  std::cout << "fig3 curve done\n";

  std::vector<double> point_rhos;
  if (desk) {
    point_rhos = {11.0, 13.0, 15.0, 17.0, 19.0};
  } else {
    for (double rho = 10.5; rho <= 19.5 + 1e-9; rho += 0.5) point_rhos.push_back(rho);
  }
  const int n_seeds = desk ? 1 : 3;
  Eigen::MatrixXd amp_points(point_rhos.size() * n_seeds * 2, 7);
  Eigen::Index row = 0;
  for (const double rho : point_rhos) {
    for (int s = 0; s < n_seeds; ++s) {
      gmmamp::ModelParams params;
      params.n = n;
      params.m = static_cast<int>(alpha * n);
      params.r = r;
      params.rho = rho;
      params.seed = gmmamp::mix64(args.seed, static_cast<std::uint64_t>(row) + 1000);
      const auto inst = gmmamp::generate_instance(params);
      for (const auto init : {gmmamp::AmpInit::kUninformative, gmmamp::AmpInit::kInformative}) {
        gmmamp::AmpConfig config;
        config.init = init;
        config.record_trajectory = false;
        const auto result = gmmamp::amp_iterate(inst, config);
        const auto fits = gmmamp::empirical_order_params(result, inst);
        amp_points(row, 0) = rho;
        amp_points(row, 1) = s;
        amp_points(row, 2) = init == gmmamp::AmpInit::kInformative ? 1 : 0;
        amp_points(row, 3) = result.overlap.overlap;
        amp_points(row, 4) = result.overlap.correct_rate;
        amp_points(row, 5) = result.iterations;
        amp_points(row, 6) = gmmamp::fit_b_s(fits.M_s);
        ++row;
      }
    }
    std::cout << "fig3 rho=" << rho << " done\n";
  }
  gmmamp::write_csv(
      out / "amp_points.csv",
      {"rho", "seed", "informative", "overlap", "correct_rate", "iterations", "b_s_fit"},
      amp_points);

  if (args.svg) {
    std::vector<SvgSeries> series;
    SvgSeries a{"b_amp", kPalette[0], {}, true};
    SvgSeries b{"b_inf", kPalette[1], {}, true};
    for (Eigen::Index i = 0; i < curve.rows(); ++i) {
      a.points.emplace_back(curve(i, 0), curve(i, 1));
      b.points.emplace_back(curve(i, 0), curve(i, 2));
    }
    SvgSeries pts{"amp runs", kPalette[2], {}, false};
    for (Eigen::Index i = 0; i < amp_points.rows(); ++i)
      pts.points.emplace_back(amp_points(i, 0), amp_points(i, 6));
    series.push_back(std::move(a));
    series.push_back(std::move(b));
    series.push_back(std::move(pts));
    write_svg_chart(out / "hysteresis.svg", "overlap branches (r=20, alpha=2)", "rho", "b",
                    series);
  }
}

int run_reproduce(const ReproduceArgs& args) {
  const fs::path out(args.out);
  fs::create_directories(out);
  if (args.figure == "fig1") {
    reproduce_fig1(args, out);
  } else if (args.figure == "fig2") {
    reproduce_fig2(args, out);
  } else if (args.figure == "fig3") {
    reproduce_fig3(args, out);
  } else {
    throw std::invalid_argument("reproduce: unknown figure " + args.figure);
  }
  write_manifest(out, "reproduce",
                 json{{"figure", args.figure}, {"scale", args.scale}, {"seed", args.seed}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  gmmamp::set_num_threads(gmmamp::num_threads());

  CLI::App app{"Bayes-optimal clustering of high-dimensional Gaussian mixtures"};
  app.require_subcommand(1);
  // lets --config / --threads appear after the subcommand name
  app.fallthrough();
  app.set_config("--config", "", "key=value config file; command-line flags override");
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: all cores or GMMAMP_THREADS)");

  GenerateArgs generate_args;
  auto* generate = app.add_subcommand("generate", "draw a mixture instance to disk");
  generate->add_option("--n", generate_args.params.n, "ambient dimension")->required();
  generate->add_option("--m", generate_args.params.m, "number of points")->required();
  generate->add_option("--r", generate_args.params.r, "number of clusters")->required();
  generate->add_option("--rho", generate_args.params.rho, "center strength")->required();
  generate->add_option("--delta", generate_args.params.delta, "noise variance");
  generate->add_option("--seed", generate_args.params.seed, "master seed");
  generate->add_option("--out", generate_args.out, "output directory")->required();

  AmpArgs amp_args;
  auto* amp = app.add_subcommand("amp", "run message passing on an instance");
  amp->add_option("--instance", amp_args.instance, "instance directory")->required();
  amp->add_option("--out", amp_args.out, "output directory")->required();
  amp->add_option("--init", amp_args.init, "uninformative or informative")
      ->check(CLI::IsMember({"uninformative", "informative"}));
  amp->add_option("--max-iters", amp_args.config.max_iters, "iteration budget");
  amp->add_option("--tol", amp_args.config.tol, "convergence tolerance");
  amp->add_option("--damping", amp_args.config.damping, "fraction of old iterate kept");
  amp->add_option("--init-noise", amp_args.config.init_noise, "uninformative start spread");
  amp->add_option("--seed", amp_args.config.seed, "extra entropy for the start");
  amp->add_flag("!--no-onsager", amp_args.config.onsager,
                "drop the memory terms (ablation)");
  amp->add_flag("--write-posteriors", amp_args.write_posteriors, "also write s_hat.csv");

  SeArgs se_args;
  auto* se = app.add_subcommand("se", "state-evolution fixed points over rho");
  se->add_option("--r", se_args.r, "number of clusters")->required();
  se->add_option("--alpha", se_args.alpha, "points per dimension")->required();
  double se_rho = 0.0;
  auto* se_rho_opt = se->add_option("--rho", se_rho, "single rho (otherwise a grid)");
  se->add_option("--rho-min", se_args.rho_min, "grid start");
  se->add_option("--rho-max", se_args.rho_max, "grid end");
  se->add_option("--rho-steps", se_args.rho_steps, "grid steps");
  se->add_option("--init", se_args.init, "uninformative, informative, or both")
      ->check(CLI::IsMember({"uninformative", "informative", "both"}));
  se->add_option("--samples", se_args.options.samples, "MC samples per step");
  se->add_option("--seed", se_args.options.seed, "MC seed");
  se->add_option("--tol", se_args.options.tol, "fixed-point tolerance");
  se->add_option("--out", se_args.out, "output directory")->required();
  se->add_option("--format", se_args.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  se->add_flag("--svg", se_args.svg, "also write an svg chart");

  PhaseArgs phase_args;
  auto* phase = app.add_subcommand("phase-diagram", "thresholds and phase grid");
  phase->alias("phase");
  int phase_r = 0;
  auto* phase_r_opt = phase->add_option("--r", phase_r, "single r (otherwise a range)");
  phase->add_option("--r-min", phase_args.r_min, "range start");
  phase->add_option("--r-max", phase_args.r_max, "range end");
  phase->add_option("--alpha", phase_args.alpha, "points per dimension")->required();
  phase->add_option("--samples", phase_args.options.samples, "MC samples");
  phase->add_option("--seed", phase_args.options.seed, "MC seed");
  phase->add_option("--grid-points", phase_args.options.grid_points, "x-grid size");
  phase->add_option("--rel-rho-min", phase_args.rel_rho_min, "phase grid start, in rho_c units");
  phase->add_option("--rel-rho-max", phase_args.rel_rho_max, "phase grid end, in rho_c units");
  phase->add_option("--rho-steps", phase_args.rho_steps, "phase grid steps");
  phase->add_option("--out", phase_args.out, "output directory")->required();
  phase->add_option("--format", phase_args.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  PcaArgs pca_args;
  auto* pca = app.add_subcommand("pca", "spectral baseline on an instance");
  pca->add_option("--instance", pca_args.instance, "instance directory")->required();
  pca->add_option("--out", pca_args.out, "output directory")->required();
  pca->add_option("--restarts", pca_args.options.kmeans_restarts, "k-means restarts");
  pca->add_option("--seed", pca_args.options.seed, "k-means seed");
  pca->add_flag("--write-projected", pca_args.write_projected, "also write projected.csv");

  ReproduceArgs repro_args;
  auto* repro = app.add_subcommand("reproduce", "rebuild a figure dataset");
  repro->add_option("--figure", repro_args.figure, "fig1, fig2, or fig3")
      ->required()
      ->check(CLI::IsMember({"fig1", "fig2", "fig3"}));
  repro->add_option("--scale", repro_args.scale, "desk or full")
      ->check(CLI::IsMember({"desk", "full"}));
  repro->add_option("--seed", repro_args.seed, "master seed for instances");
  repro->add_option("--out", repro_args.out, "output directory")->required();
  repro->add_flag("--svg", repro_args.svg, "also write svg charts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (threads > 0) gmmamp::set_num_threads(threads);
  if (se_rho_opt->count() > 0) se_args.rho = se_rho;
  if (phase_r_opt->count() > 0) phase_args.r = phase_r;

  try {
    if (generate->parsed()) return run_generate(generate_args);
    if (amp->parsed()) return run_amp(amp_args);
    if (se->parsed()) return run_se(se_args);
    if (phase->parsed()) return run_phase(phase_args);
    if (pca->parsed()) return run_pca(pca_args);
    if (repro->parsed()) return run_reproduce(repro_args);
  } catch (const gmmamp::NotFirstOrderError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const gmmamp::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const gmmamp::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
