// bfm-ot: command-line driver for the grid transport solver.
//
// Exit codes: 0 solved (tolerance, exact-cost target, or stationary state),
// 2 usage/parse/IO errors, 3 infeasible input densities, 4 iteration budget
// exhausted before the stopping rule, 5 numerical blowup.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bfm/benchmark.hpp"
#include "bfm/cost.hpp"
#include "bfm/grid.hpp"
#include "bfm/interpolation.hpp"
#include "bfm/io.hpp"
#include "bfm/solver.hpp"

using nlohmann::json;

namespace {

struct SolveOpts {
  std::string mu_file, nu_file, builtin_mu, builtin_nu;
  bool invert = false;
  int n = 0;
  std::string cost = "quadratic";
  double tol = 1e-4;
  std::optional<double> exact_cost;
  double exact_tol = 1e-4;
  int max_iters = 2000;
  std::string mode = "bfm";
  int threads = 0;
  std::string out_dir = ".";
  bool dump_fields = false;
  int frames = 6;
};

struct BenchOpts {
  std::vector<std::string> cases;
  std::vector<int> sizes;
  std::vector<double> tols;
  int threads = 0;
  std::string out_dir = ".";
  bool skip_ga = false;
};

int effective_threads(int cli_threads) {
  if (const char* env = std::getenv("BFM_OT_THREADS")) {
    try {
      std::size_t pos = 0;
      const int v = std::stoi(env, &pos);
      if (pos != std::string(env).size() || v < 0) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw bfm::InvalidArgument("BFM_OT_THREADS must be a nonnegative integer");
    }
  }
  return cli_threads;
}

bfm::DensityField load_density(const std::string& file, const std::string& builtin,
                               bool invert, int n, const char* which) {
  if (!file.empty() && !builtin.empty())
    throw bfm::InvalidArgument(std::string(which) +
                               ": give a file or a builtin spec, not both");
  if (!builtin.empty()) {
    if (n <= 0)
      throw bfm::InvalidArgument("--n is required with builtin densities");
    const int d = bfm::builtin_dim(builtin);
    bfm::Grid g = d == 2 ? bfm::Grid({n, n}) : bfm::Grid({n, n, n});
    return bfm::normalize(g, bfm::builtin_density(g, builtin).values);
  }
  if (file.empty())
    throw bfm::InvalidArgument(std::string(which) + ": no density given");
  if (file.ends_with(".pgm")) {
    bfm::DensityField f = bfm::density_from_pgm(bfm::read_pgm(file), invert);
    return bfm::normalize(f.grid, f.values);
  }
  if (file.ends_with(".csv")) {
    bfm::DensityField f = bfm::read_csv(file);
    return bfm::normalize(f.grid, f.values);
  }
  if (file.ends_with(".bfmg")) {
    bfm::BfmgData d = bfm::read_bfmg(file);
    return bfm::normalize(d.grid, d.values);
  }
  throw bfm::IoError(std::string(which) + ": unrecognized extension in '" + file +
                     "' (expected .pgm, .csv, or .bfmg)");
}

json trace_json(const bfm::SolveReport& rep) {
  json trace = json::array();
  for (const auto& st : rep.trace) {
    trace.push_back({{"iteration", st.iteration},
                     {"residual", st.residual},
                     {"dual_value", st.dual_value},
                     {"sigma_first", st.sigma_first},
                     {"sigma_second", st.sigma_second},
                     {"grad_norm_sq_first", st.grad_norm_sq_first},
                     {"grad_norm_sq_second", st.grad_norm_sq_second},
                     {"increase_first", st.increase_first},
                     {"increase_second", st.increase_second}});
  }
  return trace;
}

json report_json(const char* command, const SolveOpts& o, const bfm::Grid& grid,
                 const bfm::SolveReport& rep) {
  json rpt = {{"schema", 1},
              {"command", command},
              {"cost", o.cost},
              {"grid", grid.extents()},
              {"mode", o.mode},
              {"tolerance", o.tol},
              {"max_iterations", o.max_iters},
              {"termination", bfm::termination_name(rep.termination)},
              {"iterations", rep.iterations},
              {"dual_value", rep.dual_value},
              {"primal_cost", rep.primal_cost},
              {"residual", rep.residual},
              {"wall_seconds", rep.wall_seconds},
              {"sigma_trace", trace_json(rep)}};
  if (o.exact_cost) {
    rpt["exact_cost"] = *o.exact_cost;
    rpt["exact_tolerance"] = o.exact_tol;
  }
  return rpt;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw bfm::IoError("cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
  if (!f) throw bfm::IoError("write failed for '" + path + "'");
}

bfm::SolveReport run_solver(const SolveOpts& o, bfm::DensityField& mu,
                            bfm::DensityField& nu) {
  mu = load_density(o.mu_file, o.builtin_mu, o.invert, o.n, "mu");
  nu = load_density(o.nu_file, o.builtin_nu, o.invert, o.n, "nu");
  bfm::CostModel model = bfm::parse_cost_spec(o.cost, mu.grid.dim());

  bfm::SolverConfig cfg;
  cfg.mode = o.mode == "gradient-ascent" ? bfm::SolverMode::gradient_ascent
                                         : bfm::SolverMode::back_and_forth;
  cfg.tolerance = o.tol;
  cfg.max_iterations = o.max_iters;
  cfg.threads = effective_threads(o.threads);
  if (o.exact_cost) {
    cfg.exact_cost = *o.exact_cost;
    cfg.exact_tolerance = o.exact_tol;
  }
  return bfm::solve(model, mu, nu, cfg);
}

void dump_fields(const std::string& dir, const bfm::SolveReport& rep) {
  bfm::write_bfmg(dir + "/phi.bfmg", rep.phi);
  bfm::write_bfmg(dir + "/psi.bfmg", rep.psi);
  const char* axis_names[3] = {"x", "y", "z"};
  for (int a = 0; a < rep.map.grid.dim(); ++a) {
    bfm::write_bfmg(dir + "/map_" + axis_names[a] + ".bfmg", rep.map.grid,
                    rep.map.displacement[static_cast<std::size_t>(a)]);
  }
}

int exit_code_for(const bfm::SolveReport& rep) {
  return rep.termination == bfm::Termination::max_iterations ? 4 : 0;
}

int cmd_solve(const SolveOpts& o) {
  bfm::DensityField mu, nu;
  bfm::SolveReport rep = run_solver(o, mu, nu);

  std::filesystem::create_directories(o.out_dir);
  write_json(o.out_dir + "/report.json", report_json("solve", o, mu.grid, rep));
  if (o.dump_fields) dump_fields(o.out_dir, rep);

  std::printf("termination=%s iterations=%d dual=%.10g primal=%.10g residual=%.3g wall=%.3gs\n",
              bfm::termination_name(rep.termination), rep.iterations,
              rep.dual_value, rep.primal_cost, rep.residual, rep.wall_seconds);
  std::printf("report: %s/report.json\n", o.out_dir.c_str());
  return exit_code_for(rep);
}

int cmd_interpolate(const SolveOpts& o) {
  bfm::DensityField mu, nu;
  bfm::SolveReport rep = run_solver(o, mu, nu);
  if (mu.grid.dim() != 2)
    throw bfm::InvalidArgument("interpolate: PGM frames are 2-D only");

  std::filesystem::create_directories(o.out_dir);
  write_json(o.out_dir + "/report.json", report_json("interpolate", o, mu.grid, rep));

  const auto frames = bfm::frame_sequence(rep.map, mu, o.frames);
  json files = json::array();
  json masses = json::array();
  json times = json::array();
  for (std::size_t k = 0; k < frames.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03zu.pgm", k);
    bfm::write_pgm(o.out_dir + "/" + name, bfm::pgm_from_density(frames[k]));
    files.push_back(name);
    masses.push_back(bfm::integrate(frames[k]));
    times.push_back(static_cast<double>(k) / static_cast<double>(frames.size() - 1));
  }
  json manifest = {{"schema", 1},
                   {"command", "interpolate"},
                   {"grid", mu.grid.extents()},
                   {"frames", o.frames},
                   {"times", times},
                   {"mass", masses},
                   {"files", files},
                   {"termination", bfm::termination_name(rep.termination)},
                   {"iterations", rep.iterations},
                   {"dual_value", rep.dual_value}};
  write_json(o.out_dir + "/interpolation.json", manifest);

  std::printf("termination=%s iterations=%d dual=%.10g frames=%d\n",
              bfm::termination_name(rep.termination), rep.iterations,
              rep.dual_value, o.frames);
  std::printf("manifest: %s/interpolation.json\n", o.out_dir.c_str());
  return exit_code_for(rep);
}

void print_row(const bfm::BenchmarkRow& r) {
  char expected[32] = "-";
  if (r.expected)
    std::snprintf(expected, sizeof expected, "%d..%d", r.expected->lo,
                  r.expected->hi);
  std::printf("%-14s %5d  %7.0e  %-15s %5d  %8.2fs  %-7s %s\n", r.case_name.c_str(),
              r.n, r.tolerance,
              r.mode == bfm::SolverMode::back_and_forth ? "bfm" : "gradient-ascent",
              r.iterations, r.seconds, expected, r.status.c_str());
}

int cmd_benchmark(const BenchOpts& o) {
  const auto all = bfm::standard_benchmark_cases();
  std::vector<bfm::BenchmarkCase> selected;
  if (o.cases.empty()) {
    selected = all;
  } else {
    for (const auto& name : o.cases) {
      const auto it = std::find_if(all.begin(), all.end(),
                                   [&](const auto& c) { return c.name == name; });
      if (it == all.end())
        throw bfm::InvalidArgument("unknown benchmark case '" + name + "'");
      selected.push_back(*it);
    }
  }
  const int threads = effective_threads(o.threads);
  const bool custom = !o.sizes.empty() || !o.tols.empty();

  std::printf("%-14s %5s  %7s  %-15s %5s  %9s  %-7s %s\n", "case", "n", "tol",
              "mode", "iters", "seconds", "expect", "status");
  std::vector<bfm::BenchmarkRow> rows;
  auto run = [&](const bfm::BenchmarkCase& c, int n, double tol,
                 bfm::SolverMode mode) {
    rows.push_back(bfm::run_benchmark_case(c, n, tol, mode, threads));
    print_row(rows.back());
    std::fflush(stdout);
  };

  for (const auto& c : selected) {
    if (custom) {
      const std::vector<int> sizes =
          !o.sizes.empty() ? o.sizes : std::vector<int>{c.dim == 2 ? 512 : 128};
      const std::vector<double> tols =
          !o.tols.empty() ? o.tols
                          : std::vector<double>{c.name == "eight_cubes" ? 1e-3 : 1e-4};
      for (int n : sizes)
        for (double tol : tols) run(c, n, tol, bfm::SolverMode::back_and_forth);
      continue;
    }
    if (c.name == "two_discs") {
      run(c, 128, 1e-4, bfm::SolverMode::back_and_forth);
      run(c, 256, 1e-4, bfm::SolverMode::back_and_forth);
      run(c, 512, 1e-4, bfm::SolverMode::back_and_forth);
      run(c, 512, 1e-8, bfm::SolverMode::back_and_forth);
    } else if (c.name == "two_balls") {
      run(c, 128, 1e-4, bfm::SolverMode::back_and_forth);
    } else if (c.name == "four_squares") {
      run(c, 256, 1e-4, bfm::SolverMode::back_and_forth);
      run(c, 512, 1e-4, bfm::SolverMode::back_and_forth);
      run(c, 512, 1e-6, bfm::SolverMode::back_and_forth);
    } else if (c.name == "eight_cubes") {
      run(c, 128, 1e-3, bfm::SolverMode::back_and_forth);
    }
  }

  // Gradient-ascent baseline: the published comparison is a ratio claim, and
  // absolute baseline counts are step-schedule sensitive, so the check is
  // "at least 5x the BFM iterations" on the same instance.
  if (!custom && !o.skip_ga) {
    const auto disc = std::find_if(selected.begin(), selected.end(),
                                   [](const auto& c) { return c.name == "two_discs"; });
    const auto ref = std::find_if(rows.begin(), rows.end(), [](const auto& r) {
      return r.case_name == "two_discs" && r.n == 512 && r.tolerance == 1e-4 &&
             r.mode == bfm::SolverMode::back_and_forth;
    });
    if (disc != selected.end() && ref != rows.end()) {
      bfm::BenchmarkRow ga = bfm::run_benchmark_case(
          *disc, 512, 1e-4, bfm::SolverMode::gradient_ascent, threads);
      ga.status = ga.converged && ga.iterations >= 5 * ref->iterations ? "ok" : "FAIL";
      rows.push_back(ga);
      print_row(rows.back());
      std::printf("gradient-ascent/bfm iteration ratio: %.1fx (needs >= 5x)\n",
                  static_cast<double>(ga.iterations) / ref->iterations);
    }
  }

  std::filesystem::create_directories(o.out_dir);
  const std::string csv_path = o.out_dir + "/benchmark.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw bfm::IoError("cannot open '" + csv_path + "' for writing");
  bfm::write_benchmark_csv(csv, rows);
  std::printf("table: %s\n", csv_path.c_str());

  const bool any_fail = std::any_of(rows.begin(), rows.end(),
                                    [](const auto& r) { return r.status == "FAIL"; });
  return any_fail ? 1 : 0;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const bfm::InfeasibleInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const bfm::NegativeInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const bfm::AllZeroInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const bfm::NumericalBlowup& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 5;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

void add_solve_flags(CLI::App* cmd, SolveOpts& o, bool with_frames) {
  cmd->add_option("--mu", o.mu_file, "source density file (.pgm, .csv, .bfmg)");
  cmd->add_option("--nu", o.nu_file, "target density file (.pgm, .csv, .bfmg)");
  cmd->add_option("--builtin-mu", o.builtin_mu,
                  "source shape spec, e.g. disc:0.25,0.25,0.125");
  cmd->add_option("--builtin-nu", o.builtin_nu, "target shape spec");
  cmd->add_flag("--invert", o.invert, "treat dark image pixels as mass");
  cmd->add_option("--n", o.n, "grid points per axis for builtin densities");
  cmd->add_option("--cost", o.cost, "quadratic or power:p1,p2[,p3]");
  cmd->add_option("--tol", o.tol, "residual tolerance; negative disables");
  cmd->add_option("--exact-cost", o.exact_cost,
                  "stop once |dual - exact| <= --exact-tol");
  cmd->add_option("--exact-tol", o.exact_tol, "tolerance for --exact-cost");
  cmd->add_option("--max-iters", o.max_iters, "iteration budget");
  cmd->add_option("--mode", o.mode, "bfm or gradient-ascent")
      ->check(CLI::IsMember({"bfm", "gradient-ascent"}));
  cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)");
  cmd->add_option("--out", o.out_dir, "output directory");
  if (with_frames)
    cmd->add_option("--frames", o.frames, "number of interpolation frames");
  else
    cmd->add_flag("--dump-fields", o.dump_fields,
                  "write phi, psi, and map components as .bfmg");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grid optimal transport via back-and-forth dual ascent"};
  app.require_subcommand(1);

  SolveOpts solve_opts;
  CLI::App* solve_cmd = app.add_subcommand("solve", "solve a transport problem");
  add_solve_flags(solve_cmd, solve_opts, /*with_frames=*/false);

  SolveOpts interp_opts;
  CLI::App* interp_cmd =
      app.add_subcommand("interpolate", "solve and write displacement frames");
  add_solve_flags(interp_cmd, interp_opts, /*with_frames=*/true);

  BenchOpts bench_opts;
  CLI::App* bench_cmd =
      app.add_subcommand("benchmark", "run the reference cases and check counts");
  bench_cmd->add_option("--cases", bench_opts.cases,
                        "subset of: two_discs two_balls four_squares eight_cubes")
      ->delimiter(',');
  bench_cmd->add_option("--n", bench_opts.sizes, "grid sizes (overrides protocol)")
      ->delimiter(',');
  bench_cmd->add_option("--tol", bench_opts.tols, "tolerances (overrides protocol)")
      ->delimiter(',');
  bench_cmd->add_option("--threads", bench_opts.threads, "worker threads");
  bench_cmd->add_option("--out", bench_opts.out_dir, "output directory");
  bench_cmd->add_flag("--skip-ga", bench_opts.skip_ga,
                      "skip the gradient-ascent comparison row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (solve_cmd->parsed()) return guarded([&] { return cmd_solve(solve_opts); });
  if (interp_cmd->parsed())
    return guarded([&] { return cmd_interpolate(interp_opts); });
  return guarded([&] { return cmd_benchmark(bench_opts); });
}
