// Command line front end: mesh generation, skeleton solves, the
// verification suite, and relaxation-rate studies. Reports go to a CSV
// (iteration history) and a JSON file (full run record).
//
// Exit codes: 0 success, 1 failed convergence or failed checks,
// 2 usage or configuration errors, 3 unexpected runtime errors.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mtfdd/skeleton_solver.hpp"
#include "mtfdd/verify.hpp"
#include "mtfdd/version.hpp"

using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  int sectors = 3;
  double r_skeleton = 1.0;
  double r_outer = 1.5;
  double h = 0.1;
  double kappa0 = 2.0;
  double omega = 0.0;  // 0: use kappa0
  double gamma = 0.0;  // 0: use 1/kappa0
  std::string closure = "robin";
  std::map<int, double> mu;
  std::map<int, std::array<double, 2>> kappa_sq;
  double source_amp = 1.0;
  double source_x = 0.4;
  double source_y = 0.35;
  double source_width = 12.0;
  std::string solver = "gmres";
  std::string variant = "reflected";
  double beta = 0.5;
  double tol = 1e-10;
  int max_iterations = 500;
  int restart = 100;
  std::string mesh_file;
  std::vector<double> study_betas = {0.1, 0.2, 0.3, 0.4, 0.5,
                                     0.6, 0.7, 0.8, 0.9};
  int study_iterations = 40;
  int trials = 20;
  bool coercivity = false;
  unsigned long long seed = 1;
};

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for '" + key + "': " + v);
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad integer value for '" + key + "': " + v);
  }
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw ConfigError("empty list for '" + key + "'");
  return out;
}

// flat key=value file; '#' starts a comment
void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key == "sectors")
      cfg.sectors = to_int(key, val);
    else if (key == "r_skeleton")
      cfg.r_skeleton = to_double(key, val);
    else if (key == "r_outer")
      cfg.r_outer = to_double(key, val);
    else if (key == "h")
      cfg.h = to_double(key, val);
    else if (key == "kappa0")
      cfg.kappa0 = to_double(key, val);
    else if (key == "omega")
      cfg.omega = to_double(key, val);
    else if (key == "gamma")
      cfg.gamma = to_double(key, val);
    else if (key == "closure")
      cfg.closure = val;
    else if (key == "source_amp")
      cfg.source_amp = to_double(key, val);
    else if (key == "source_x")
      cfg.source_x = to_double(key, val);
    else if (key == "source_y")
      cfg.source_y = to_double(key, val);
    else if (key == "source_width")
      cfg.source_width = to_double(key, val);
    else if (key == "solver")
      cfg.solver = val;
    else if (key == "variant")
      cfg.variant = val;
    else if (key == "beta")
      cfg.beta = to_double(key, val);
    else if (key == "tol")
      cfg.tol = to_double(key, val);
    else if (key == "max_iterations")
      cfg.max_iterations = to_int(key, val);
    else if (key == "restart")
      cfg.restart = to_int(key, val);
    else if (key == "mesh_file")
      cfg.mesh_file = val;
    else if (key == "study_betas")
      cfg.study_betas = parse_list(key, val);
    else if (key == "study_iterations")
      cfg.study_iterations = to_int(key, val);
    else if (key == "trials")
      cfg.trials = to_int(key, val);
    else if (key == "coercivity")
      cfg.coercivity = (val == "on" || val == "true" || val == "1");
    else if (key == "seed")
      cfg.seed = static_cast<unsigned long long>(to_int(key, val));
    else if (key.rfind("mu_", 0) == 0)
      cfg.mu[to_int(key, key.substr(3))] = to_double(key, val);
    else if (key.rfind("kappa_sq_re_", 0) == 0)
      cfg.kappa_sq[to_int(key, key.substr(12))][0] = to_double(key, val);
    else if (key.rfind("kappa_sq_im_", 0) == 0)
      cfg.kappa_sq[to_int(key, key.substr(12))][1] = to_double(key, val);
    else
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": unknown key '" + key + "'");
  }
}

void validate(const RunConfig& cfg) {
  if (cfg.sectors < 1) throw ConfigError("sectors must be >= 1");
  if (!(cfg.h > 0.0)) throw ConfigError("h must be positive");
  if (!(cfg.r_skeleton > 0.0) || !(cfg.r_outer > cfg.r_skeleton))
    throw ConfigError("need 0 < r_skeleton < r_outer");
  if (!(cfg.kappa0 > 0.0)) throw ConfigError("kappa0 must be positive");
  if (cfg.closure != "robin" && cfg.closure != "exact_circle")
    throw ConfigError("closure must be 'robin' or 'exact_circle'");
  if (cfg.solver != "gmres" && cfg.solver != "richardson")
    throw ConfigError("solver must be 'gmres' or 'richardson'");
  if (cfg.variant != "reflected" && cfg.variant != "direct")
    throw ConfigError("variant must be 'reflected' or 'direct'");
  for (const auto& kv : cfg.kappa_sq)
    if (kv.second[1] < 0.0)
      throw ConfigError("kappa_sq_im must be nonnegative (dissipative media)");
}

double effective_omega(const RunConfig& cfg) {
  return cfg.omega > 0.0 ? cfg.omega : cfg.kappa0;
}

double effective_gamma(const RunConfig& cfg) {
  return cfg.gamma > 0.0 ? cfg.gamma : 1.0 / cfg.kappa0;
}

mtfdd::CoefficientField make_field(const RunConfig& cfg) {
  mtfdd::CoefficientField cf;
  cf.kappa0 = cfg.kappa0;
  auto mu_table = cfg.mu;
  cf.mu = [mu_table](int j, const Eigen::Vector2d&) {
    auto it = mu_table.find(j);
    return it != mu_table.end() ? it->second : 1.0;
  };
  auto ks_table = cfg.kappa_sq;
  double k0sq = cfg.kappa0 * cfg.kappa0;
  cf.kappa_sq = [ks_table, k0sq](int j, const Eigen::Vector2d&) {
    auto it = ks_table.find(j);
    if (it != ks_table.end())
      return mtfdd::complexd(it->second[0], it->second[1]);
    return mtfdd::complexd(k0sq, 0.0);
  };
  if (cfg.source_amp != 0.0) {
    Eigen::Vector2d c(cfg.source_x, cfg.source_y);
    double amp = cfg.source_amp, w = cfg.source_width;
    cf.source = [c, amp, w](const Eigen::Vector2d& x) {
      return mtfdd::complexd(amp * std::exp(-w * (x - c).squaredNorm()), 0.0);
    };
  }
  return cf;
}

mtfdd::Mesh obtain_mesh(const RunConfig& cfg) {
  if (!cfg.mesh_file.empty()) return mtfdd::load_mesh(cfg.mesh_file);
  return mtfdd::generate_partitioned_disk(cfg.sectors, cfg.r_skeleton,
                                          cfg.r_outer, cfg.h);
}

mtfdd::DtnOptions dtn_options(const RunConfig& cfg) {
  mtfdd::DtnOptions opt;
  opt.gamma = effective_gamma(cfg);
  opt.closure = cfg.closure == "exact_circle"
                    ? mtfdd::ClosureKind::exact_circle
                    : mtfdd::ClosureKind::robin;
  return opt;
}

json config_json(const RunConfig& cfg) {
  json j;
  j["sectors"] = cfg.sectors;
  j["r_skeleton"] = cfg.r_skeleton;
  j["r_outer"] = cfg.r_outer;
  j["h"] = cfg.h;
  j["kappa0"] = cfg.kappa0;
  j["omega"] = effective_omega(cfg);
  j["gamma"] = effective_gamma(cfg);
  j["closure"] = cfg.closure;
  j["solver"] = cfg.solver;
  j["variant"] = cfg.variant;
  j["beta"] = cfg.beta;
  j["tol"] = cfg.tol;
  j["max_iterations"] = cfg.max_iterations;
  j["restart"] = cfg.restart;
  j["seed"] = cfg.seed;
  j["source"] = {{"amp", cfg.source_amp},
                 {"x", cfg.source_x},
                 {"y", cfg.source_y},
                 {"width", cfg.source_width}};
  for (const auto& kv : cfg.mu) j["mu"][std::to_string(kv.first)] = kv.second;
  for (const auto& kv : cfg.kappa_sq)
    j["kappa_sq"][std::to_string(kv.first)] = {kv.second[0], kv.second[1]};
  if (!cfg.mesh_file.empty()) j["mesh_file"] = cfg.mesh_file;
  return j;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << body;
}

using msclock = std::chrono::steady_clock;

double ms_since(msclock::time_point t0) {
  return std::chrono::duration<double, std::milli>(msclock::now() - t0)
      .count();
}

int run_mesh(const RunConfig& cfg, const std::string& out) {
  mtfdd::Mesh m = obtain_mesh(cfg);
  mtfdd::Skeleton sk = mtfdd::extract_skeleton(m);
  mtfdd::save_mesh(m, out);
  std::cout << "mesh: " << m.vertices.size() << " vertices, "
            << m.triangles.size() << " triangles, " << sk.vertices.size()
            << " skeleton vertices, " << sk.cross_points.size()
            << " cross points -> " << out << "\n";
  return 0;
}

int run_solve(const RunConfig& cfg, const std::string& out) {
  auto t0 = msclock::now();
  mtfdd::Mesh m = obtain_mesh(cfg);
  mtfdd::Skeleton sk = mtfdd::extract_skeleton(m);
  mtfdd::TraceSpace ts = mtfdd::build_trace_space(m, sk, dtn_options(cfg));
  mtfdd::CoefficientField cf = make_field(cfg);
  double omega = effective_omega(cfg);
  mtfdd::SkeletonSystem sys(m, ts, cf, omega);
  double build_ms = ms_since(t0);

  mtfdd::SolveOptions so;
  so.variant = cfg.variant == "direct" ? mtfdd::SkeletonVariant::direct
                                       : mtfdd::SkeletonVariant::reflected;
  so.tol = cfg.tol;
  so.max_iterations = cfg.max_iterations;
  so.restart = cfg.restart;
  so.beta = cfg.beta;
  auto t1 = msclock::now();
  auto solved = cfg.solver == "richardson" ? mtfdd::solve_richardson(sys, so)
                                           : mtfdd::solve_gmres(sys, so);
  double solve_ms = ms_since(t1);
  const mtfdd::MultiTrace& p = solved.first;
  const mtfdd::IterationReport& rep = solved.second;

  mtfdd::Reconstruction rec = mtfdd::reconstruct(sys, p);

  std::ostringstream csv;
  csv << "iteration,residual\n";
  for (size_t k = 0; k < rep.residuals.size(); ++k)
    csv << k << "," << fmt(rep.residuals[k]) << "\n";
  write_text(out + ".csv", csv.str());

  std::ostringstream field;
  field << "vertex,x,y,re,im\n";
  for (int v = 0; v < rec.global.size(); ++v)
    field << v << "," << fmt(m.vertices[v].x()) << ","
          << fmt(m.vertices[v].y()) << "," << fmt(rec.global(v).real()) << ","
          << fmt(rec.global(v).imag()) << "\n";
  write_text(out + "_field.csv", field.str());

  json j;
  j["version"] = mtfdd::version_string;
  j["config"] = config_json(cfg);
  j["iterations"] = rep.iterations;
  j["converged"] = rep.converged;
  j["residuals"] = rep.residuals;
  j["trace_mismatch"] = rec.trace_mismatch;
  j["trace_scale"] = rec.trace_scale;
  j["skeleton_dofs"] = sys.size();
  if (cfg.coercivity && sys.size() <= 2000) {
    mtfdd::CoercivityReport cr = mtfdd::estimate_coercivity_dense(sys);
    j["alpha_est"] = cr.alpha;
    j["sigma_min"] = cr.sigma_min;
  }
  j["timings_ms"] = {{"build", build_ms}, {"solve", solve_ms}};
  write_text(out + ".json", j.dump(2) + "\n");

  std::cout << (rep.converged ? "converged" : "NOT converged") << " in "
            << rep.iterations << " iterations; reports -> " << out
            << ".json\n";
  return rep.converged ? 0 : 1;
}

int run_verify(const RunConfig& cfg, const std::string& out) {
  auto t0 = msclock::now();
  mtfdd::Mesh m = obtain_mesh(cfg);
  mtfdd::Skeleton sk = mtfdd::extract_skeleton(m);
  mtfdd::TraceSpace ts = mtfdd::build_trace_space(m, sk, dtn_options(cfg));
  mtfdd::CoefficientField cf = make_field(cfg);
  mtfdd::VerifyOptions vo;
  vo.trials = cfg.trials;
  vo.seed = cfg.seed;
  vo.solver_tol = cfg.tol;
  vo.max_iterations = cfg.max_iterations;
  vo.with_coercivity = true;
  mtfdd::VerifyReport rep =
      mtfdd::verify_suite(m, ts, cf, effective_omega(cfg), vo);
  double total_ms = ms_since(t0);

  json j;
  j["version"] = mtfdd::version_string;
  j["config"] = config_json(cfg);
  json checks = json::array();
  for (const auto& c : rep.checks) {
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << "  measured "
              << c.measured << "  limit " << c.limit << "\n";
    checks.push_back({{"name", c.name},
                      {"measured", c.measured},
                      {"limit", c.limit},
                      {"pass", c.pass}});
  }
  j["checks"] = checks;
  j["all_pass"] = rep.all_pass();
  j["timings_ms"] = {{"total", total_ms}};
  write_text(out + ".json", j.dump(2) + "\n");
  std::cout << (rep.all_pass() ? "all checks passed" : "CHECKS FAILED")
            << "; report -> " << out << ".json\n";
  return rep.all_pass() ? 0 : 1;
}

int run_study(const RunConfig& cfg, const std::string& out) {
  auto t0 = msclock::now();
  mtfdd::Mesh m = obtain_mesh(cfg);
  mtfdd::Skeleton sk = mtfdd::extract_skeleton(m);
  mtfdd::TraceSpace ts = mtfdd::build_trace_space(m, sk, dtn_options(cfg));
  mtfdd::CoefficientField cf = make_field(cfg);
  mtfdd::SkeletonSystem sys(m, ts, cf, effective_omega(cfg));

  double alpha = sys.size() <= 2000
                     ? mtfdd::estimate_coercivity_dense(sys).alpha
                     : mtfdd::estimate_coercivity_probe(sys, 120, cfg.seed);

  mtfdd::SolveOptions refopt;
  refopt.tol = 1e-12;
  refopt.max_iterations = std::max(cfg.max_iterations, 2000);
  auto reference = mtfdd::solve_gmres(sys, refopt);
  if (!reference.second.converged) {
    std::cerr << "reference solve did not converge\n";
    return 1;
  }

  std::ostringstream csv;
  csv << "beta,iterations,final_error,mean_rate,max_rate,certified_bound\n";
  json rows = json::array();
  double best_beta = 0.0, best_error = -1.0;
  for (double beta : cfg.study_betas) {
    mtfdd::SolveOptions so;
    so.beta = beta;
    so.tol = 0.0;
    so.max_iterations = cfg.study_iterations;
    auto run = mtfdd::solve_richardson(sys, so, &reference.first);
    const auto& e = run.second.errors;
    double mean_rate = 0.0, max_rate = 0.0;
    int counted = 0;
    for (size_t k = 0; k + 1 < e.size(); ++k) {
      if (e[k] <= 1e-13 * e[0]) break;
      max_rate = std::max(max_rate, e[k + 1] / e[k]);
      ++counted;
    }
    if (counted > 0) mean_rate = std::pow(e[counted] / e[0], 1.0 / counted);
    double bound = std::sqrt(1.0 - alpha * alpha * beta * (1.0 - beta));
    csv << fmt(beta) << "," << run.second.iterations << ","
        << fmt(e.back()) << "," << fmt(mean_rate) << "," << fmt(max_rate)
        << "," << fmt(bound) << "\n";
    rows.push_back({{"beta", beta},
                    {"iterations", run.second.iterations},
                    {"final_error", e.back()},
                    {"mean_rate", mean_rate},
                    {"max_rate", max_rate},
                    {"certified_bound", bound}});
    if (best_error < 0.0 || e.back() < best_error) {
      best_error = e.back();
      best_beta = beta;
    }
  }
  write_text(out + ".csv", csv.str());

  json j;
  j["version"] = mtfdd::version_string;
  j["config"] = config_json(cfg);
  j["alpha_est"] = alpha;
  j["rows"] = rows;
  j["best_beta"] = best_beta;
  j["timings_ms"] = {{"total", ms_since(t0)}};
  write_text(out + ".json", j.dump(2) + "\n");
  std::cout << "study over " << cfg.study_betas.size()
            << " weights; best beta " << best_beta << "; reports -> " << out
            << ".json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-point robust interface solver for partitioned "
               "Helmholtz problems"};
  app.set_version_flag("--version", std::string(mtfdd::version_string));
  app.require_subcommand(1);

  std::string config_path;
  std::string out = "mtfdd_run";
  RunConfig cfg;
  std::optional<double> beta_flag, omega_flag, gamma_flag;
  std::optional<std::string> solver_flag;
  std::optional<unsigned long long> seed_flag;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value configuration file");
    sub->add_option("--out", out, "output path prefix");
    sub->add_option("--seed", seed_flag, "seed for randomized checks");
    sub->add_option("--omega", omega_flag, "impedance weight (default kappa0)");
    sub->add_option("--gamma", gamma_flag,
                    "trace-metric length scale (default 1/kappa0)");
  };

  CLI::App* mesh = app.add_subcommand("mesh", "generate and save a mesh");
  add_common(mesh);

  CLI::App* solve = app.add_subcommand("solve", "solve the skeleton system");
  add_common(solve);
  solve->add_option("--solver", solver_flag, "richardson or gmres");
  solve->add_option("--beta", beta_flag, "relaxation weight");

  CLI::App* verify = app.add_subcommand("verify", "run the identity checks");
  add_common(verify);

  CLI::App* study = app.add_subcommand("study", "relaxation rate study");
  add_common(study);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    if (seed_flag) cfg.seed = *seed_flag;
    if (omega_flag) cfg.omega = *omega_flag;
    if (gamma_flag) cfg.gamma = *gamma_flag;
    if (beta_flag) cfg.beta = *beta_flag;
    if (solver_flag) cfg.solver = *solver_flag;
    validate(cfg);
    if (mesh->parsed()) return run_mesh(cfg, out);
    if (solve->parsed()) return run_solve(cfg, out);
    if (verify->parsed()) return run_verify(cfg, out);
    if (study->parsed()) return run_study(cfg, out);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
