#include "gsr/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gsr/errors.hpp"
#include "gsr/metrics.hpp"
#include "gsr/montecarlo.hpp"
#include "gsr/optimizer.hpp"
#include "gsr/parallel.hpp"

namespace gsr::cli {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kTableHeader =
    "gamma,mu,r_star,a_star,sadd,lower_bound,arl_achieved,gap";
constexpr const char* kErrorMarker = "error";

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_key(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string fmt_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot open output file: " + path);
  out << text;
  if (!out) throw std::runtime_error("failed writing output file: " + path);
}

int resolve_jobs(int jobs) {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

ordered_json profile_json(const DelayProfile& profile) {
  ordered_json j;
  std::vector<long> k(profile.add.size());
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<long>(i);
  j["k"] = k;
  j["add"] = profile.add;
  j["survival"] = profile.survival;
  j["steady_state_add"] = profile.steady_state_add;
  j["converged"] = profile.converged;
  j["capped"] = profile.capped;
  j["survival_sum"] = profile.survival_sum;
  j["survival_tail"] = profile.survival_tail;
  j["iadd_sum"] = profile.iadd_sum;
  j["iadd_tail"] = profile.iadd_tail;
  return j;
}

ordered_json report_json(const PerformanceReport& report) {
  ordered_json j;
  j["arl"] = report.arl;
  j["add0"] = report.add0;
  j["sadd"] = report.sadd;
  j["sadd_argmax"] = report.sadd_argmax;
  j["iadd"] = report.iadd;
  j["riadd"] = report.riadd;
  j["stadd"] = report.stadd;
  j["lower_bound"] = report.lower_bound;
  j["resolution"] = report.resolution;
  j["profile"] = profile_json(report.profile);
  return j;
}

TableRow row_from(const DesignResult& d) {
  TableRow row;
  row.gamma = d.gamma;
  row.mu = d.mu;
  row.ok = true;
  row.r_star = d.r_star;
  row.a_star = d.a_star;
  row.sadd = d.sadd;
  row.lower_bound = d.lower_bound;
  row.arl_achieved = d.arl_achieved;
  row.gap = d.gap;
  return row;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_number(const std::string& field) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw config_error("malformed CSV field: '" + field + "'");
  return v;
}

}  // namespace

std::string format_table_csv(const std::vector<TableRow>& rows) {
  std::string text = kTableHeader;
  text += '\n';
  for (const TableRow& row : rows) {
    text += fmt_key(row.gamma);
    text += ',';
    text += fmt_key(row.mu);
    if (row.ok) {
      for (double v : {row.r_star, row.a_star, row.sadd, row.lower_bound,
                       row.arl_achieved, row.gap}) {
        text += ',';
        text += fmt2(v);
      }
    } else {
      for (int i = 0; i < 6; ++i) {
        text += ',';
        text += kErrorMarker;
      }
    }
    text += '\n';
  }
  return text;
}

std::vector<TableRow> parse_table_csv(const std::string& text) {
  std::vector<std::string> lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines.front() != kTableHeader)
    throw config_error("CSV is missing the design-table header");
  std::vector<TableRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> fields = split(lines[i], ',');
    if (fields.size() != 8)
      throw config_error("CSV row has " + std::to_string(fields.size()) +
                         " fields, expected 8");
    TableRow row;
    row.gamma = parse_number(fields[0]);
    row.mu = parse_number(fields[1]);
    if (fields[2] == kErrorMarker) {
      row.ok = false;
    } else {
      row.ok = true;
      row.r_star = parse_number(fields[2]);
      row.a_star = parse_number(fields[3]);
      row.sadd = parse_number(fields[4]);
      row.lower_bound = parse_number(fields[5]);
      row.arl_achieved = parse_number(fields[6]);
      row.gap = parse_number(fields[7]);
    }
    rows.push_back(row);
  }
  return rows;
}

int run(int argc, char** argv) {
  CLI::App app{
      "Operating characteristics and optimal design of the headstarted "
      "Shiryaev-Roberts chart for a Gaussian mean shift"};
  app.require_subcommand(1);
  int status = kExitOk;

  // xi ----------------------------------------------------------------
  double xi_mu = 0.0;
  std::string xi_format = "json", xi_out;
  auto* cmd_xi = app.add_subcommand(
      "xi", "Limiting average overshoot factor for a given shift magnitude");
  cmd_xi->add_option("--mu", xi_mu, "shift magnitude, nonzero")->required();
  cmd_xi->add_option("--format", xi_format, "csv or json (default json)")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd_xi->add_option("--out", xi_out, "write output to this file");
  cmd_xi->callback([&] {
    const XiResult res = xi_detail(ModelParams{xi_mu});
    std::string text;
    if (xi_format == "json") {
      ordered_json j;
      j["mu"] = xi_mu;
      j["xi"] = res.value;
      j["terms"] = res.terms;
      text = j.dump(2) + "\n";
    } else {
      text = "mu,xi,terms\n";
      text += fmt_key(xi_mu);
      text += ',';
      text += fmt_full(res.value);
      text += ',';
      text += std::to_string(res.terms);
      text += '\n';
    }
    write_output(text, xi_out);
  });

  // calibrate -----------------------------------------------------------
  double cal_mu = 0.0, cal_gamma = 0.0, cal_r = 0.0, cal_rel_tol = 1e-4;
  int cal_resolution = 0;
  std::string cal_format = "json", cal_out;
  auto* cmd_calibrate = app.add_subcommand(
      "calibrate", "Find the control limit giving a target in-control ARL");
  cmd_calibrate->add_option("--mu", cal_mu, "shift magnitude, nonzero")->required();
  cmd_calibrate->add_option("--gamma", cal_gamma, "target ARL, > 1")->required();
  cmd_calibrate->add_option("--r", cal_r, "headstart (default 0)");
  cmd_calibrate->add_option("--resolution", cal_resolution,
                            "quadrature nodes (default: automatic)");
  cmd_calibrate->add_option("--rel-tol", cal_rel_tol,
                            "relative ARL tolerance (default 1e-4)");
  cmd_calibrate->add_option("--format", cal_format, "csv or json (default json)")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd_calibrate->add_option("--out", cal_out, "write output to this file");
  cmd_calibrate->callback([&] {
    NumericsConfig cfg;
    cfg.resolution = cal_resolution;
    cfg.rel_tol = cal_rel_tol;
    const CalibrationResult res =
        calibrate_threshold(ModelParams{cal_mu}, cal_r, cal_gamma, cfg);
    std::string text;
    if (cal_format == "json") {
      ordered_json j;
      j["mu"] = cal_mu;
      j["r"] = cal_r;
      j["gamma"] = cal_gamma;
      j["limit"] = res.limit;
      j["arl_achieved"] = res.arl_achieved;
      j["evaluations"] = res.evaluations;
      j["resolution"] = res.resolution;
      j["seed_limit"] = res.seed_limit;
      j["xi"] = res.xi_value;
      text = j.dump(2) + "\n";
    } else {
      text = "mu,r,gamma,limit,arl_achieved,evaluations,resolution\n";
      text += fmt_key(cal_mu);
      text += ',';
      text += fmt_key(cal_r);
      text += ',';
      text += fmt_key(cal_gamma);
      text += ',';
      text += fmt_full(res.limit);
      text += ',';
      text += fmt_full(res.arl_achieved);
      text += ',';
      text += std::to_string(res.evaluations);
      text += ',';
      text += std::to_string(res.resolution);
      text += '\n';
    }
    write_output(text, cal_out);
  });

  // evaluate ------------------------------------------------------------
  double ev_mu = 0.0, ev_r = 0.0, ev_limit = 0.0;
  int ev_resolution = 0;
  std::string ev_format = "json", ev_out;
  auto* cmd_evaluate = app.add_subcommand(
      "evaluate", "All operating characteristics of one chart (r, A)");
  cmd_evaluate->add_option("--mu", ev_mu, "shift magnitude, nonzero")->required();
  cmd_evaluate->add_option("--limit", ev_limit, "control limit A")->required();
  cmd_evaluate->add_option("--r", ev_r, "headstart (default 0)");
  cmd_evaluate->add_option("--resolution", ev_resolution,
                           "quadrature nodes (default: automatic)");
  cmd_evaluate->add_option("--format", ev_format, "csv or json (default json)")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd_evaluate->add_option("--out", ev_out, "write output to this file");
  cmd_evaluate->callback([&] {
    NumericsConfig cfg;
    cfg.resolution = ev_resolution;
    const ChartDesign design{ModelParams{ev_mu}, ev_r, ev_limit};
    const PerformanceReport report = evaluate(design, cfg);
    std::string text;
    if (ev_format == "json") {
      ordered_json j;
      j["mu"] = ev_mu;
      j["r"] = ev_r;
      j["limit"] = ev_limit;
      j.update(report_json(report));
      text = j.dump(2) + "\n";
    } else {
      text =
          "mu,r,limit,arl,add0,sadd,sadd_argmax,iadd,riadd,stadd,lower_bound\n";
      text += fmt_key(ev_mu);
      text += ',';
      text += fmt_key(ev_r);
      text += ',';
      text += fmt_key(ev_limit);
      for (double v : {report.arl, report.add0, report.sadd}) {
        text += ',';
        text += fmt_full(v);
      }
      text += ',';
      text += std::to_string(report.sadd_argmax);
      for (double v : {report.iadd, report.riadd, report.stadd,
                       report.lower_bound}) {
        text += ',';
        text += fmt_full(v);
      }
      text += '\n';
    }
    write_output(text, ev_out);
  });

  // optimize ------------------------------------------------------------
  double opt_mu = 0.0, opt_gamma = 0.0, opt_rel_tol = 1e-4;
  int opt_resolution = 0;
  std::string opt_format = "csv", opt_out;
  auto* cmd_optimize = app.add_subcommand(
      "optimize", "Best headstart and control limit for a target ARL");
  cmd_optimize->add_option("--mu", opt_mu, "shift magnitude, nonzero")->required();
  cmd_optimize->add_option("--gamma", opt_gamma, "target ARL, > 1")->required();
  cmd_optimize->add_option("--resolution", opt_resolution,
                           "quadrature nodes (default: automatic)");
  cmd_optimize->add_option("--rel-tol", opt_rel_tol,
                           "relative ARL tolerance (default 1e-4)");
  cmd_optimize->add_option("--format", opt_format, "csv or json (default csv)")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd_optimize->add_option("--out", opt_out, "write output to this file");
  cmd_optimize->callback([&] {
    OptimizerConfig cfg;
    cfg.numerics.resolution = opt_resolution;
    cfg.numerics.rel_tol = opt_rel_tol;
    const DesignResult res = optimize_design(ModelParams{opt_mu}, opt_gamma, cfg);
    std::string text;
    if (opt_format == "json") {
      ordered_json j;
      j["mu"] = res.mu;
      j["gamma"] = res.gamma;
      j["r_star"] = res.r_star;
      j["a_star"] = res.a_star;
      j["sadd"] = res.sadd;
      j["lower_bound"] = res.lower_bound;
      j["gap"] = res.gap;
      j["arl_achieved"] = res.arl_achieved;
      j["resolution"] = res.resolution;
      j["evaluations"] = res.evaluations;
      j["extensions"] = res.extensions;
      j["escalations"] = res.escalations;
      j["dense_fallback"] = res.dense_fallback;
      j["report"] = report_json(res.report);
      ordered_json probes = ordered_json::array();
      for (const ProbePoint& p : res.probes) {
        ordered_json row;
        row["r"] = p.r;
        row["limit"] = p.limit;
        row["arl"] = p.arl;
        row["sadd"] = p.sadd;
        row["lower_bound"] = p.lower_bound;
        row["gap"] = p.gap;
        probes.push_back(row);
      }
      j["probes"] = probes;
      text = j.dump(2) + "\n";
    } else {
      text = format_table_csv({row_from(res)});
    }
    write_output(text, opt_out);
  });

  // table ---------------------------------------------------------------
  std::vector<double> tab_gammas, tab_mus;
  int tab_paper = 0, tab_resolution = 0, tab_jobs = 0;
  double tab_rel_tol = 1e-4;
  std::string tab_format = "csv", tab_out;
  auto* cmd_table = app.add_subcommand(
      "table", "Optimal designs over a grid of (gamma, mu) cells");
  cmd_table->add_option("--gamma", tab_gammas, "target ARLs, comma separated")
      ->delimiter(',');
  cmd_table->add_option("--mu", tab_mus, "shift magnitudes, comma separated")
      ->delimiter(',');
  cmd_table
      ->add_option("--paper-tables", tab_paper,
                   "preset grid 1 (gamma 100..500) or 2 (gamma 600..1000)")
      ->check(CLI::IsMember({1, 2}));
  cmd_table->add_option("--resolution", tab_resolution,
                        "quadrature nodes (default: automatic)");
  cmd_table->add_option("--rel-tol", tab_rel_tol,
                        "relative ARL tolerance (default 1e-4)");
  cmd_table->add_option("--jobs", tab_jobs,
                        "worker threads (default: available cores)");
  cmd_table->add_option("--format", tab_format, "csv or json (default csv)")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd_table->add_option("--out", tab_out, "write output to this file");
  cmd_table->callback([&] {
    std::vector<double> gammas = tab_gammas;
    std::vector<double> mus = tab_mus;
    if (tab_paper == 1) {
      if (gammas.empty()) gammas = {100, 200, 300, 400, 500};
      if (mus.empty()) mus = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    } else if (tab_paper == 2) {
      if (gammas.empty()) gammas = {600, 700, 800, 900, 1000};
      if (mus.empty()) mus = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    }
    if (gammas.empty() || mus.empty())
      throw config_error(
          "table needs --paper-tables or both --gamma and --mu lists");
    std::sort(gammas.begin(), gammas.end());
    gammas.erase(std::unique(gammas.begin(), gammas.end()), gammas.end());
    std::sort(mus.begin(), mus.end());
    mus.erase(std::unique(mus.begin(), mus.end()), mus.end());

    struct Cell {
      double gamma, mu;
    };
    std::vector<Cell> cells;
    for (double g : gammas)
      for (double m : mus) cells.push_back({g, m});

    std::vector<TableRow> rows(cells.size());
    std::vector<std::string> failures(cells.size());
    parallel_for_blocks(
        static_cast<std::int64_t>(cells.size()), resolve_jobs(tab_jobs),
        [&](std::int64_t i) {
          const Cell& cell = cells[static_cast<std::size_t>(i)];
          TableRow& row = rows[static_cast<std::size_t>(i)];
          row.gamma = cell.gamma;
          row.mu = cell.mu;
          try {
            OptimizerConfig cfg;
            cfg.numerics.resolution = tab_resolution;
            cfg.numerics.rel_tol = tab_rel_tol;
            row = row_from(optimize_design(ModelParams{cell.mu}, cell.gamma, cfg));
          } catch (const std::exception& e) {
            row.ok = false;
            failures[static_cast<std::size_t>(i)] = e.what();
          }
        });

    int failed = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].ok) continue;
      ++failed;
      std::cerr << "cell gamma=" << fmt_key(cells[i].gamma)
                << " mu=" << fmt_key(cells[i].mu) << " failed: " << failures[i]
                << '\n';
    }

    std::string text;
    if (tab_format == "json") {
      ordered_json j;
      ordered_json arr = ordered_json::array();
      for (const TableRow& row : rows) {
        ordered_json r;
        r["gamma"] = row.gamma;
        r["mu"] = row.mu;
        r["ok"] = row.ok;
        if (row.ok) {
          r["r_star"] = row.r_star;
          r["a_star"] = row.a_star;
          r["sadd"] = row.sadd;
          r["lower_bound"] = row.lower_bound;
          r["arl_achieved"] = row.arl_achieved;
          r["gap"] = row.gap;
        }
        arr.push_back(r);
      }
      j["rows"] = arr;
      j["failed"] = failed;
      text = j.dump(2) + "\n";
    } else {
      text = format_table_csv(rows);
    }
    write_output(text, tab_out);
    if (failed > 0) status = kExitPartial;
  });

  // simulate ------------------------------------------------------------
  double sim_mu = 0.0, sim_r = 0.0, sim_limit = 0.0, sim_z_max = 4.0;
  std::int64_t sim_change = -1, sim_reps = 100000, sim_max_steps = 0;
  std::uint64_t sim_seed = 1;
  int sim_jobs = 1, sim_resolution = 0;
  std::string sim_format = "json", sim_out;
  auto* cmd_simulate = app.add_subcommand(
      "simulate", "Monte Carlo cross-check of the integral-equation values");
  cmd_simulate->add_option("--mu", sim_mu, "shift magnitude, nonzero")->required();
  cmd_simulate->add_option("--limit", sim_limit, "control limit A")->required();
  cmd_simulate->add_option("--r", sim_r, "headstart (default 0)");
  cmd_simulate->add_option("--change-point", sim_change,
                           "last in-control sample; -1 = no change (default)");
  cmd_simulate->add_option("--replications", sim_reps,
                           "number of replications (default 100000)");
  cmd_simulate->add_option("--seed", sim_seed, "RNG seed (default 1)");
  cmd_simulate->add_option("--max-steps", sim_max_steps,
                           "per-run step cap (default: automatic)");
  cmd_simulate->add_option("--jobs", sim_jobs, "worker threads (default 1)");
  cmd_simulate->add_option("--z-max", sim_z_max,
                           "largest |z| accepted against the solver (default 4)");
  cmd_simulate->add_option("--resolution", sim_resolution,
                           "solver quadrature nodes (default: automatic)");
  cmd_simulate->add_option("--format", sim_format, "csv or json (default json)")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd_simulate->add_option("--out", sim_out, "write output to this file");
  cmd_simulate->callback([&] {
    SimulationPlan plan;
    plan.design = ChartDesign{ModelParams{sim_mu}, sim_r, sim_limit};
    plan.change_point = sim_change;
    plan.replications = sim_reps;
    plan.seed = sim_seed;
    plan.max_steps = sim_max_steps;
    validate_design(plan.design);

    const int jobs = resolve_jobs(sim_jobs);
    const bool never = plan.change_point < 0;
    const EstimateWithError est =
        never ? estimate_arl(plan, jobs) : estimate_add_k(plan, jobs);

    NumericsConfig cfg;
    cfg.resolution = sim_resolution;
    ChartSolver solver(plan.design.params, plan.design.limit, cfg);
    double solver_value = 0.0;
    if (never) {
      solver_value = solver.arl(sim_r);
    } else {
      const DelayProfile profile =
          solver.profile(sim_r, /*k_max=*/0);
      const std::size_t k = static_cast<std::size_t>(plan.change_point);
      solver_value = k < profile.add.size() ? profile.add[k]
                                            : profile.steady_state_add;
    }
    const double z =
        est.se > 0.0
            ? (est.estimate - solver_value) / est.se
            : (est.estimate == solver_value
                   ? 0.0
                   : std::numeric_limits<double>::infinity());

    std::string text;
    const char* quantity = never ? "arl" : "add";
    if (sim_format == "json") {
      ordered_json j;
      j["mu"] = sim_mu;
      j["r"] = sim_r;
      j["limit"] = sim_limit;
      j["change_point"] = plan.change_point;
      j["replications"] = plan.replications;
      j["seed"] = plan.seed;
      j["quantity"] = quantity;
      j["estimate"] = est.estimate;
      j["se"] = est.se;
      j["effective_replications"] = est.effective_replications;
      j["solver_value"] = solver_value;
      j["z"] = z;
      j["resolution"] = solver.resolution();
      text = j.dump(2) + "\n";
    } else {
      text = "quantity,estimate,se,effective_replications,solver_value,z\n";
      text += quantity;
      text += ',';
      text += fmt_full(est.estimate);
      text += ',';
      text += fmt_full(est.se);
      text += ',';
      text += std::to_string(est.effective_replications);
      text += ',';
      text += fmt_full(solver_value);
      text += ',';
      text += fmt_full(z);
      text += '\n';
    }
    write_output(text, sim_out);
    if (!(std::abs(z) <= sim_z_max)) status = kExitOracle;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const numerical_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return status;
}

}  // namespace gsr::cli
