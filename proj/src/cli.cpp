#include "coulvil/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "coulvil/estimators.hpp"
#include "coulvil/ig.hpp"
#include "coulvil/oracle.hpp"
#include "coulvil/serialize.hpp"
#include "coulvil/transforms.hpp"

namespace coulvil {

namespace {

constexpr const char* kSchemaVersion = "coulvil-v1";
constexpr double kTwoPiSq = 4.0 * M_PI * M_PI;

std::string fmt(double x) {
  char buf[40];
  snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string resolve_out(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* dir = std::getenv("COULVIL_OUT");
  if (!dir || !*dir) return path;
  return std::string(dir) + "/" + path;
}

void emit(const std::string& out, const std::string& contents) {
  if (out.empty()) {
    std::cout << contents;
    return;
  }
  write_file_atomic(resolve_out(out), contents);
}

BoundaryCondition parse_bc(const std::string& s) {
  if (s == "free") return BoundaryCondition::Free;
  if (s == "zero") return BoundaryCondition::Zero;
  throw CLI::ValidationError("--bc", "must be 'free' or 'zero'");
}

nlohmann::json report_json(const EstimateReport& r) {
  nlohmann::json j;
  j["schema"] = kSchemaVersion;
  j["observable"] = r.observable;
  j["estimate"] = r.estimate;
  j["stderr"] = r.stderr_;
  j["tau_int"] = r.tau_int;
  j["samples"] = r.samples;
  j["batches"] = r.batches;
  j["seed"] = r.seed;
  j["geometry_hash"] = hash_hex(r.geometry_hash);
  j["config_hash"] = hash_hex(r.config_hash);
  j["extras"] = r.extras;
  return j;
}

struct CommonOpts {
  int n = 1;
  std::string bc = "free";
  double beta = 1.0;
  ChainConfig chain;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_chain = true) {
  cmd->fallthrough();
  cmd->add_option("--n", o.n, "lattice radius");
  cmd->add_option("--bc", o.bc, "boundary condition: free|zero")
      ->check(CLI::IsMember({"free", "zero"}));
  cmd->add_option("--beta", o.beta, "inverse temperature");
  cmd->add_option("--out", o.out, "output path (default: stdout)");
  if (with_chain) {
    cmd->add_option("--seed", o.chain.seed, "master seed");
    cmd->add_option("--samples", o.chain.samples, "retained samples");
    cmd->add_option("--sweeps", o.chain.sweeps, "sweeps between samples");
    cmd->add_option("--burnin", o.chain.burnin_sweeps, "burn-in sweeps (-1: heuristic)");
  }
}

int run_ig(const CommonOpts& o, int asteps) {
  std::ostringstream os;
  os << "a,mu,var,third_abs,M_beta,jacobi_residual\n";
  double m = error_function_M(o.beta);
  double jr = jacobi_residual(o.beta);
  for (int i = 0; i < asteps; ++i) {
    double a = 0.5 * double(i) / double(std::max(1, asteps - 1));
    IGStats st = ig_stats({a, kTwoPiSq * o.beta});
    os << fmt(a) << ',' << fmt(st.mean) << ',' << fmt(st.var) << ',' << fmt(st.third_abs) << ','
       << fmt(m) << ',' << fmt(jr) << '\n';
  }
  emit(o.out, os.str());
  return 0;
}

int run_green(const CommonOpts& o, int degree) {
  LatticeGeometry g = build_lattice(o.n, parse_bc(o.bc));
  const Operators& ops = ops_for(g);
  std::ostringstream os;
  if (parse_bc(o.bc) == BoundaryCondition::Zero) {
    int v = vertex_index(g, 0, 0);
    double g00 = ops.green(degree, v, v);
    os << "n,G00,G00_minus_logn_over_2pi\n";
    os << o.n << ',' << fmt(g00) << ',' << fmt(g00 - std::log(double(o.n)) / (2.0 * M_PI)) << '\n';
  } else {
    os << "x,Gvv,Gvv_minus_logx_over_pi\n";
    for (int x = 1; x <= o.n; x *= 2) {
      int v = vertex_index(g, x, 0);
      double gv = ops.green(degree, v, v);
      os << x << ',' << fmt(gv) << ',' << fmt(gv - std::log(double(x)) / M_PI) << '\n';
    }
  }
  emit(o.out, os.str());
  return 0;
}

int run_sample(const CommonOpts& o, const std::string& model) {
  LatticeGeometry g = build_lattice(o.n, parse_bc(o.bc));
  const LatticeGeometry& gr = ops_for(g).geometry();
  nlohmann::json j;
  j["schema"] = kSchemaVersion;
  j["model"] = model;
  j["beta"] = o.beta;
  j["geometry_hash"] = hash_hex(gr.hash);
  j["seed"] = o.chain.seed;
  j["config"] = {{"samples", o.chain.samples},
                 {"sweeps", o.chain.sweeps},
                 {"burnin", o.chain.burnin_sweeps}};
  nlohmann::json samples = nlohmann::json::array();

  if (model == "coulomb") {
    LocalCoulombChain chain(gr, o.beta, o.chain);
    for (long i = 0; i < o.chain.samples; ++i) {
      const IntForm& q = chain.next();
      std::vector<int64_t> vals(q.values.data(), q.values.data() + q.values.size());
      samples.push_back(vals);
    }
  } else if (model == "villain") {
    VillainSweeper sw(gr, o.beta);
    Rng rng(o.chain.seed);
    Form theta(gr, 0);
    int burn = o.chain.burnin_sweeps >= 0 ? o.chain.burnin_sweeps : default_burnin(gr, o.beta);
    for (int i = 0; i < burn; ++i) sw.sweep(theta, rng);
    for (long i = 0; i < o.chain.samples; ++i) {
      for (int s = 0; s < std::max(1, o.chain.sweeps); ++s) sw.sweep(theta, rng);
      std::vector<double> vals(theta.values.data(), theta.values.data() + theta.values.size());
      samples.push_back(vals);
    }
  } else if (model == "gff") {
    Rng rng(o.chain.seed);
    for (long i = 0; i < o.chain.samples; ++i) {
      Form phi = gff_sample(gr, 0, o.beta, rng);
      std::vector<double> vals(phi.values.data(), phi.values.data() + phi.values.size());
      samples.push_back(vals);
    }
  } else if (model == "ivgff") {
    IvHeatBath hb(gr, 0, 1.0 / o.beta);
    Rng rng(o.chain.seed);
    IVState st = hb.make_state();
    int burn = o.chain.burnin_sweeps >= 0 ? o.chain.burnin_sweeps : default_burnin(gr, o.beta);
    for (int i = 0; i < burn; ++i) hb.sweep(st.psi, rng);
    for (long i = 0; i < o.chain.samples; ++i) {
      for (int s = 0; s < std::max(1, o.chain.sweeps); ++s) hb.sweep(st.psi, rng);
      std::vector<int64_t> vals(st.psi.values.data(), st.psi.values.data() + st.psi.values.size());
      samples.push_back(vals);
    }
  } else {
    throw CLI::ValidationError("--model", "unknown model " + model);
  }
  j["samples"] = std::move(samples);
  emit(o.out, j.dump(2) + "\n");
  return 0;
}

int run_verify(const CommonOpts& o, std::vector<double> betas) {
  if (betas.empty()) betas = {0.5, 1.0, 2.0};
  nlohmann::json checks = nlohmann::json::array();
  bool all_ok = true;
  auto record = [&](const std::string& name, double lhs, double rhs, double tol) {
    double rel = std::abs(lhs - rhs) / std::max({1e-300, std::abs(lhs), std::abs(rhs)});
    bool ok = rel < tol;
    all_ok &= ok;
    checks.push_back({{"check", name},
                      {"lhs", lhs},
                      {"rhs", rhs},
                      {"rel_error", rel},
                      {"tol", tol},
                      {"pass", ok}});
  };

  LatticeGeometry g22 = build_grid(2, 2);
  for (double beta : betas) {
    double z_vil = exact_Z_villain(g22, beta).log_value;
    double z_gff_v = exact_Z_gff(g22, 0, beta).log_value;
    double z_coul = exact_Z_coulomb(g22, beta).log_value;
    record("Z_vil = Z_gff * Z_coul @beta=" + fmt(beta), z_vil, z_gff_v + z_coul, 1e-6);

    double z_iv = exact_Z_iv(g22, 1.0 / beta).log_value;
    double z_gff_f = exact_Z_gff(g22, 2, 1.0 / beta).log_value;
    record("Z_iv = Z_gff * Z_coul (faces) @beta=" + fmt(beta), z_iv, z_gff_f + z_coul, 1e-6);

    int nv = g22.num_vertices - 1, nf = g22.num_faces - 1;
    double shift = 0.5 * (nv + nf) * std::log(beta) - 0.5 * (nv - nf) * std::log(2.0 * M_PI);
    record("Z_iv = Z_vil * beta-power @beta=" + fmt(beta), z_iv, z_vil + shift, 1e-6);
  }

  {
    // Coulomb/IV duality on the requested lattice (enumeration permitting)
    LatticeGeometry g = build_lattice(o.n, parse_bc(o.bc));
    if (g.num_faces - 1 <= 5) {
      for (double beta : betas) {
        double z_iv = exact_Z_iv(g, 1.0 / beta).log_value;
        double z_gff_f = exact_Z_gff(g, 2, 1.0 / beta).log_value;
        double z_coul = exact_Z_coulomb(g, beta).log_value;
        record("Z_iv = Z_gff * Z_coul on lattice @beta=" + fmt(beta), z_iv, z_gff_f + z_coul,
               1e-6);
      }
      double z_iv = exact_Z_iv(g, 1.0).log_value;
      double z_gff = exact_Z_gff(g, 2, 1.0).log_value;
      double bound = free_energy_bound_exponent(g.num_faces - 1, 1.0);
      bool ok = std::exp(z_iv - z_gff) >= bound;
      all_ok &= ok;
      checks.push_back({{"check", "Z_iv/Z_gff >= free-energy bound @beta=1"},
                        {"lhs", std::exp(z_iv - z_gff)},
                        {"rhs", bound},
                        {"pass", ok}});
    }
  }

  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    double beta = 0.1 * std::pow(100.0, double(i) / 19.0);
    worst = std::max(worst, jacobi_residual(beta));
  }
  bool jac_ok = worst < 1e-10;
  all_ok &= jac_ok;
  checks.push_back({{"check", "jacobi identity (20 betas in [0.1,10])"},
                    {"lhs", worst},
                    {"rhs", 0.0},
                    {"tol", 1e-10},
                    {"pass", jac_ok}});

  nlohmann::json j;
  j["schema"] = kSchemaVersion;
  j["command"] = "verify";
  j["pass"] = all_ok;
  j["checks"] = std::move(checks);
  emit(o.out, j.dump(2) + "\n");
  return all_ok ? 0 : 1;
}

int run_measure(const CommonOpts& o, const std::string& observable, int x1, int y1, int x2,
                int y2, int window_radius, double eps, const std::string& sizes) {
  LatticeGeometry g = build_lattice(o.n, parse_bc(o.bc));
  const LatticeGeometry& gr = ops_for(g).geometry();
  nlohmann::json j;
  j["schema"] = kSchemaVersion;
  j["command"] = "measure";
  j["observable"] = observable;

  if (observable == "two-point") {
    TwoPointReport tp = villain_two_point(gr, vertex_index(gr, x1, y1), vertex_index(gr, x2, y2),
                                          o.beta, o.chain);
    j["direct"] = report_json(tp.direct);
    j["vortex"] = report_json(tp.vortex);
    j["gff_factor"] = tp.gff_factor;
    j["factorized"] = tp.factorized;
    j["factorized_stderr"] = tp.factorized_stderr;
  } else if (observable == "coulomb-variance") {
    Form gform(gr, 2);
    int f = square_face_index(gr, x1, y1);
    if (f < 0 || f == gr.root_face) throw CLI::ValidationError("--x1/--y1", "not a free face");
    gform[f] = 1.0;
    j["report"] = report_json(coulomb_potential_variance(gform, o.beta, o.chain));
  } else if (observable == "char-function") {
    int f1 = square_face_index(gr, x1, y1), f2 = square_face_index(gr, x2, y2);
    if (f1 < 0 || f2 < 0) throw CLI::ValidationError("--x1..", "not faces");
    j["report"] = report_json(coulomb_char_function(gr, f1, f2, o.beta, o.chain));
  } else if (observable == "tilde-m") {
    int v1 = vertex_index(gr, x1, y1), v2 = vertex_index(gr, x2, y2);
    int e = edge_between(gr, v1, v2);
    if (e < 0) throw CLI::ValidationError("--x1..", "not an edge");
    j["report"] = report_json(tilde_M_estimator(gr, e, o.beta, o.chain));
  } else if (observable == "gradient-window") {
    int v = vertex_index(gr, x1, y1);
    j["report"] =
        report_json(gradient_window_probability(gr, window_radius, eps, o.beta, v, o.chain));
  } else if (observable == "ivgff-max") {
    std::vector<int> ns;
    std::stringstream ss(sizes);
    for (std::string tok; std::getline(ss, tok, ',');) ns.push_back(std::stoi(tok));
    auto rows = ivgff_max_statistics(ns, o.beta, o.chain);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json row = {{"n", r.n},          {"samples", r.samples},
                            {"threshold", r.threshold}, {"exceed_freq", r.exceed_freq},
                            {"mean_max", r.mean_max}};
      for (const auto& [a, f] : r.site_tail_freq) row["site_tail"][fmt(a)] = f;
      arr.push_back(std::move(row));
    }
    j["rows"] = std::move(arr);
  } else {
    throw CLI::ValidationError("--observable", "unknown observable " + observable);
  }
  emit(o.out, j.dump(2) + "\n");
  return 0;
}

int run_bench(const CommonOpts& o) {
  LatticeGeometry g = build_lattice(o.n, parse_bc(o.bc));
  const LatticeGeometry& gr = ops_for(g).geometry();
  Form gform(gr, 2);
  int f = square_face_index(gr, 0, 0);
  gform[f] = 1.0;
  auto rows = sampler_benchmark(gform, o.beta, o.chain);
  std::ostringstream os;
  os << "sampler,mean,stderr,tau_int,seconds_per_sample,seconds_per_eff_sample,"
        "cells_touched_per_move,samples\n";
  for (const auto& r : rows)
    os << r.sampler << ',' << fmt(r.mean) << ',' << fmt(r.stderr_) << ',' << fmt(r.tau_int) << ','
       << fmt(r.seconds_per_sample) << ',' << fmt(r.seconds_per_eff_sample) << ','
       << r.cells_touched_per_move << ',' << r.samples << '\n';
  emit(o.out, os.str());
  return 0;
}

}  // namespace

int cli_run(const std::vector<std::string>& args) {
  CLI::App app{"Lattice Coulomb gas / Villain model / integer-valued GFF toolkit"};
  app.set_config("--config");
  app.require_subcommand(1);

  CommonOpts o;
  int asteps = 11;
  int degree = 0;
  std::string model = "coulomb";
  std::string observable;
  int x1 = 0, y1 = 0, x2 = 1, y2 = 0;
  int window_radius = 1;
  double eps = 0.5;
  std::string sizes = "16,32";
  std::vector<double> betas;

  auto* ig = app.add_subcommand("ig", "integer-Gaussian statistics table (CSV)");
  add_common(ig, o, false);
  ig->add_option("--asteps", asteps, "grid points over a in [0, 1/2]");
  ig->add_flag("--table", "emit the CSV table (default)");

  auto* green = app.add_subcommand("green", "Green function values (CSV)");
  add_common(green, o, false);
  green->add_option("--degree", degree)->check(CLI::IsMember({0, 2}));

  auto* geometry = app.add_subcommand("geometry", "cell complex dump (JSON)");
  add_common(geometry, o, false);
  bool dump_dual = false;
  geometry->add_flag("--dual", dump_dual, "dump the dual complex instead");

  auto* sample = app.add_subcommand("sample", "run a chain, stream states to JSON");
  add_common(sample, o);
  sample->add_option("--model", model)->check(CLI::IsMember({"villain", "coulomb", "gff", "ivgff"}));

  auto* measure = app.add_subcommand("measure", "Monte Carlo estimate (JSON report)");
  add_common(measure, o);
  measure->add_option("--observable", observable)->required();
  measure->add_option("--x1", x1);
  measure->add_option("--y1", y1);
  measure->add_option("--x2", x2);
  measure->add_option("--y2", y2);
  measure->add_option("--window-radius", window_radius);
  measure->add_option("--eps", eps);
  measure->add_option("--sizes", sizes, "comma-separated lattice radii");

  auto* verify = app.add_subcommand("verify", "exact identity suite (JSON pass/fail report)");
  add_common(verify, o, false);
  verify->add_option("--betas", betas, "beta values for the identities");

  auto* bench = app.add_subcommand("bench", "local vs baseline sampler comparison (CSV)");
  add_common(bench, o);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (ig->parsed()) return run_ig(o, asteps);
    if (green->parsed()) return run_green(o, degree);
    if (geometry->parsed()) {
      LatticeGeometry g = build_lattice(o.n, parse_bc(o.bc));
      if (dump_dual) g = dual_geometry(g);
      emit(o.out, geometry_to_json(g).dump(2) + "\n");
      return 0;
    }
    if (sample->parsed()) return run_sample(o, model);
    if (measure->parsed())
      return run_measure(o, observable, x1, y1, x2, y2, window_radius, eps, sizes);
    if (verify->parsed()) return run_verify(o, betas);
    if (bench->parsed()) return run_bench(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace coulvil
