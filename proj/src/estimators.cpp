#include "coulvil/estimators.hpp"

#include <chrono>
#include <functional>
#include <cmath>
#include <future>
#include <thread>

#include "coulvil/ig.hpp"

namespace coulvil {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kTwoPiSq = 4.0 * M_PI * M_PI;

uint64_t fnv_mix(uint64_t h, uint64_t x) {
  for (int i = 0; i < 8; ++i) {
    h ^= (x >> (8 * i)) & 0xff;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Villain chain with one-time burn-in; retained samples are cfg.sweeps apart.
struct VillainRunner {
  VillainRunner(const LatticeGeometry& g, double beta, const ChainConfig& cfg)
      : sweeper(g, beta), theta(g, 0), rng(cfg.seed), beta_(beta), thin(std::max(1, cfg.sweeps)) {
    int burn = cfg.burnin_sweeps >= 0 ? cfg.burnin_sweeps : default_burnin(g, beta);
    for (int i = 0; i < burn; ++i) sweeper.sweep(theta, rng);
  }
  void advance() {
    for (int i = 0; i < thin; ++i) sweeper.sweep(theta, rng);
  }
  VillainSweeper sweeper;
  Form theta;
  Rng rng;
  double beta_;
  int thin;
};

// Splits cfg.samples across cfg.chains independent chains (seeds forked from
// cfg.seed) and concatenates the per-chain series in chain order, so results
// do not depend on scheduling.  fn(per_chain_cfg) returns one vector per
// observable series.
std::vector<std::vector<double>> run_chains(
    const ChainConfig& cfg,
    const std::function<std::vector<std::vector<double>>(const ChainConfig&)>& fn) {
  int nchains = std::max(1, cfg.chains);
  long per = std::max<long>(1, cfg.samples / nchains);
  Rng master(cfg.seed);
  std::vector<std::future<std::vector<std::vector<double>>>> futs;
  for (int c = 0; c < nchains; ++c) {
    ChainConfig sub = cfg;
    sub.seed = master.fork(c).seed();
    sub.samples = per;
    futs.push_back(std::async(std::launch::async, fn, sub));
  }
  std::vector<std::vector<double>> out;
  for (auto& f : futs) {
    auto part = f.get();
    if (out.empty()) out.resize(part.size());
    for (size_t s = 0; s < part.size(); ++s)
      out[s].insert(out[s].end(), part[s].begin(), part[s].end());
  }
  return out;
}

EstimateReport fill_report(std::string name, const BatchStats& bs, const LatticeGeometry& g,
                           const ChainConfig& cfg) {
  EstimateReport r;
  r.observable = std::move(name);
  r.estimate = bs.mean;
  r.stderr_ = bs.stderr_mean;
  r.tau_int = bs.tau_int;
  r.samples = bs.n;
  r.batches = bs.batches;
  r.seed = cfg.seed;
  r.geometry_hash = g.hash;
  r.config_hash = chain_config_hash(cfg);
  return r;
}

}  // namespace

uint64_t chain_config_hash(const ChainConfig& cfg) {
  uint64_t h = 0xcbf29ce484222325ull;
  h = fnv_mix(h, cfg.seed);
  h = fnv_mix(h, static_cast<uint64_t>(cfg.burnin_sweeps + 1));
  h = fnv_mix(h, static_cast<uint64_t>(cfg.sweeps));
  h = fnv_mix(h, static_cast<uint64_t>(cfg.samples));
  h = fnv_mix(h, static_cast<uint64_t>(cfg.k_cutoff));
  h = fnv_mix(h, static_cast<uint64_t>(cfg.chains));
  return h;
}

EstimateReport coulomb_potential_variance(const Form& g_form, double beta,
                                          const ChainConfig& cfg) {
  if (g_form.degree != 2) throw std::invalid_argument("test function must be a 2-form");
  const LatticeGeometry& g = *g_form.geom;
  const Operators& ops = ops_for(g);
  Form w = ops.solve_poisson(g_form);  // <lap^-1 q, g> = <q, w>

  std::vector<double> xs;
  bool zero_obs = g_form.values.cwiseAbs().maxCoeff() == 0.0;
  if (zero_obs) {
    xs.assign(std::max<long>(cfg.samples, 2), 0.0);
  } else {
    auto series = run_chains(cfg, [&](const ChainConfig& sub) {
      std::vector<double> part;
      part.reserve(sub.samples);
      LocalCoulombChain chain(g, beta, sub);
      for (long i = 0; i < sub.samples; ++i) {
        const IntForm& q = chain.next();
        double x = 0.0;
        for (int f = 0; f < g.num_faces; ++f) x += double(q[f]) * w[f];
        part.push_back(x);
      }
      return std::vector<std::vector<double>>{part};
    });
    xs = std::move(series[0]);
  }
  VarianceStats vs = variance_stats(xs);
  BatchStats bs = batch_stats(xs);
  EstimateReport r = fill_report("coulomb_potential_variance", bs, g, cfg);
  r.estimate = vs.variance;
  r.stderr_ = vs.stderr_variance;
  r.batches = vs.batches;
  double quad = -inner(g_form, w);  // <g, (-lap)^-1 g>
  r.extras["quad_form"] = quad;
  r.extras["lower_bound"] = error_function_M(beta) / (kTwoPiSq * beta) * quad;
  r.extras["mean"] = bs.mean;
  return r;
}

EstimateReport coulomb_char_function(const LatticeGeometry& g, int f1, int f2, double beta,
                                     const ChainConfig& cfg) {
  if (f1 == f2) {
    EstimateReport r;
    r.observable = "coulomb_char_function";
    r.estimate = 1.0;
    r.samples = cfg.samples;
    r.seed = cfg.seed;
    r.geometry_hash = g.hash;
    r.config_hash = chain_config_hash(cfg);
    return r;
  }
  const Operators& ops = ops_for(g);
  Form rhs(g, 2);
  if (f1 != g.root_face) rhs[f1] += 1.0;
  if (f2 != g.root_face) rhs[f2] -= 1.0;
  Form w = ops.solve_poisson(rhs);

  auto series = run_chains(cfg, [&](const ChainConfig& sub) {
    std::vector<double> part;
    part.reserve(sub.samples);
    LocalCoulombChain chain(g, beta, sub);
    for (long i = 0; i < sub.samples; ++i) {
      const IntForm& q = chain.next();
      double x = 0.0;
      for (int f = 0; f < g.num_faces; ++f) x += double(q[f]) * w[f];
      part.push_back(std::cos(kTwoPi * x));
    }
    return std::vector<std::vector<double>>{part};
  });
  const std::vector<double>& xs = series[0];
  BatchStats bs = batch_stats(xs);
  EstimateReport r = fill_report("coulomb_char_function", bs, g, cfg);
  double quad = -inner(rhs, w);
  r.extras["quad_form"] = quad;
  r.extras["bound_exponent"] =
      0.5 * error_function_M(beta) / (2.0 * kTwoPiSq * beta) * quad;
  return r;
}

TwoPointReport villain_two_point(const LatticeGeometry& g, int v1, int v2, double beta,
                                 const ChainConfig& cfg) {
  TwoPointReport out;
  const Operators& ops = ops_for(g);
  out.gff_factor = std::exp(-(ops.green(0, v1, v1) + ops.green(0, v2, v2) -
                              2.0 * ops.green(0, v1, v2)) /
                            (2.0 * beta));
  if (v1 == v2) {
    out.direct.estimate = 1.0;
    out.vortex.estimate = 1.0;
    out.factorized = 1.0;
    return out;
  }
  Form rhs(g, 0);
  if (v1 != g.root_vertex) rhs[v1] += 1.0;
  if (v2 != g.root_vertex) rhs[v2] -= 1.0;
  // B(v1) - B(v2) = -<m, d lap^-1 (1_v1 - 1_v2)>
  Form w = d(ops.solve_poisson(rhs));

  auto series = run_chains(cfg, [&](const ChainConfig& sub) {
    std::vector<double> part_direct, part_vortex;
    part_direct.reserve(sub.samples);
    part_vortex.reserve(sub.samples);
    VillainRunner run(g, beta, sub);
    for (long i = 0; i < sub.samples; ++i) {
      run.advance();
      part_direct.push_back(std::cos(run.theta[v1] - run.theta[v2]));
      IntForm m = sample_m_given_theta(run.theta, beta, run.rng);
      double b = 0.0;
      for (int e = 0; e < g.num_edges; ++e) b -= double(m[e]) * w[e];
      part_vortex.push_back(std::cos(kTwoPi * b));
    }
    return std::vector<std::vector<double>>{part_direct, part_vortex};
  });
  out.direct = fill_report("villain_two_point_direct", batch_stats(series[0]), g, cfg);
  out.vortex = fill_report("villain_two_point_vortex", batch_stats(series[1]), g, cfg);
  out.factorized = out.gff_factor * out.vortex.estimate;
  out.factorized_stderr = out.gff_factor * out.vortex.stderr_;
  return out;
}

EstimateReport tilde_M_estimator(const LatticeGeometry& g, int edge, double beta,
                                 const ChainConfig& cfg) {
  const double big = kTwoPiSq * beta;
  const auto& ee = g.edge_endpoints[edge];
  auto series = run_chains(cfg, [&](const ChainConfig& sub) {
    std::vector<double> part;
    part.reserve(sub.samples);
    VillainRunner run(g, beta, sub);
    for (long i = 0; i < sub.samples; ++i) {
      run.advance();
      double dtheta = run.theta[ee[1]] - run.theta[ee[0]];
      part.push_back(big * ig_stats({-dtheta / kTwoPi, big}).var);
    }
    return std::vector<std::vector<double>>{part};
  });
  EstimateReport r = fill_report("tilde_M", batch_stats(series[0]), g, cfg);
  r.extras["M_beta"] = error_function_M(beta);
  return r;
}

std::vector<MaxStatsRow> ivgff_max_statistics(const std::vector<int>& n_list, double beta,
                                              const ChainConfig& cfg,
                                              const std::vector<double>& alphas) {
  const double u = 1.0 / beta;
  std::vector<MaxStatsRow> rows;
  for (int n : n_list) {
    LatticeGeometry g = build_lattice(n, BoundaryCondition::Zero);
    const LatticeGeometry& gr = ops_for(g).geometry();
    MaxStatsRow row;
    row.n = n;
    row.samples = cfg.samples;
    double m_beta = error_function_M(beta);
    row.threshold = std::sqrt((1.0 - 0.5 * m_beta) * 2.0 * beta / M_PI) * std::log(double(n));
    for (double a : alphas)
      row.site_threshold[a] = a * std::sqrt(beta / kTwoPi) * std::log(double(n));

    int burn = cfg.burnin_sweeps >= 0 ? cfg.burnin_sweeps : 128;
    Rng master(cfg.seed);

    // one task per chain: warm start from a rounded exact free-field draw,
    // then local heat-bath sweeps
    auto run_chain = [&](long idx) {
      Rng rng = master.fork(static_cast<uint64_t>(idx) + 1000003ull * n);
      IvHeatBath hb(gr, 0, u);
      Form warm = gff_sample(gr, 0, u, rng);
      IVState st = hb.make_state();
      for (int v = 0; v < gr.num_vertices; ++v) st.psi[v] = llround(warm[v]);
      st.psi.enforce_root();
      for (int s = 0; s < burn; ++s) hb.sweep(st.psi, rng);
      int64_t mx = 0;
      std::vector<long> site_exceed(alphas.size(), 0);
      for (int v = 0; v < gr.num_vertices; ++v) {
        mx = std::max(mx, st.psi[v]);
        for (size_t ai = 0; ai < alphas.size(); ++ai)
          if (double(st.psi[v]) >= row.site_threshold.at(alphas[ai])) ++site_exceed[ai];
      }
      return std::make_pair(double(mx), site_exceed);
    };

    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<double> maxima(cfg.samples);
    std::vector<std::vector<long>> exceeds(cfg.samples);
    for (long base = 0; base < cfg.samples; base += workers) {
      std::vector<std::future<std::pair<double, std::vector<long>>>> futs;
      for (long i = base; i < std::min<long>(cfg.samples, base + workers); ++i)
        futs.push_back(std::async(std::launch::async, run_chain, i));
      for (long i = base; i < std::min<long>(cfg.samples, base + workers); ++i) {
        auto res = futs[i - base].get();
        maxima[i] = res.first;
        exceeds[i] = std::move(res.second);
      }
    }

    long over = 0;
    double mean_max = 0.0;
    std::vector<long> site_tot(alphas.size(), 0);
    for (long i = 0; i < cfg.samples; ++i) {
      if (maxima[i] >= row.threshold) ++over;
      mean_max += maxima[i];
      for (size_t ai = 0; ai < alphas.size(); ++ai) site_tot[ai] += exceeds[i][ai];
    }
    row.exceed_freq = double(over) / double(cfg.samples);
    row.mean_max = mean_max / double(cfg.samples);
    for (size_t ai = 0; ai < alphas.size(); ++ai)
      row.site_tail_freq[alphas[ai]] =
          double(site_tot[ai]) / (double(cfg.samples) * double(gr.num_vertices));
    rows.push_back(std::move(row));
  }
  return rows;
}

EstimateReport gradient_window_probability(const LatticeGeometry& g, int R, double eps,
                                           double beta, int center_vertex,
                                           const ChainConfig& cfg) {
  const auto& cc = g.vertex_coord[center_vertex];
  if (g.is_infinite_vertex(center_vertex))
    throw std::invalid_argument("window centre must be a finite vertex");
  if (g.n > 0 && (std::abs(cc[0] / 2) + R > g.n || std::abs(cc[1] / 2) + R > g.n))
    throw std::invalid_argument("window reaches the boundary");
  std::vector<int> window_edges;
  for (int e = 0; e < g.num_edges; ++e) {
    bool inside = true;
    for (int side : {0, 1}) {
      int v = g.edge_endpoints[e][side];
      if (g.is_infinite_vertex(v)) { inside = false; break; }
      if (std::abs(g.vertex_coord[v][0] - cc[0]) > 2 * R ||
          std::abs(g.vertex_coord[v][1] - cc[1]) > 2 * R)
        inside = false;
    }
    if (inside) window_edges.push_back(e);
  }

  auto series = run_chains(cfg, [&](const ChainConfig& sub) {
    std::vector<double> part;
    part.reserve(sub.samples);
    VillainRunner run(g, beta, sub);
    for (long i = 0; i < sub.samples; ++i) {
      run.advance();
      bool ok = true;
      for (int e : window_edges) {
        double dtheta = run.theta[g.edge_endpoints[e][1]] - run.theta[g.edge_endpoints[e][0]];
        if (std::abs(std::remainder(dtheta, kTwoPi)) >= eps) { ok = false; break; }
      }
      part.push_back(ok ? 1.0 : 0.0);
    }
    return std::vector<std::vector<double>>{part};
  });
  EstimateReport r = fill_report("gradient_window_probability", batch_stats(series[0]), g, cfg);
  r.extras["window_edges"] = double(window_edges.size());
  return r;
}

std::vector<BenchRow> sampler_benchmark(const Form& g_form, double beta, const ChainConfig& cfg) {
  const LatticeGeometry& g = *g_form.geom;
  const Operators& ops = ops_for(g);
  Form w = ops.solve_poisson(g_form);
  using clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;

  {
    BenchRow row;
    row.sampler = "local";
    row.cells_touched_per_move = 1;
    std::vector<double> xs;
    xs.reserve(cfg.samples);
    LocalCoulombChain chain(g, beta, cfg);
    auto t0 = clock::now();
    for (long i = 0; i < cfg.samples; ++i) {
      const IntForm& q = chain.next();
      double x = 0.0;
      for (int f = 0; f < g.num_faces; ++f) x += double(q[f]) * w[f];
      xs.push_back(x);
    }
    double secs = std::chrono::duration<double>(clock::now() - t0).count();
    BatchStats bs = batch_stats(xs);
    row.mean = bs.mean;
    row.stderr_ = bs.stderr_mean;
    row.tau_int = bs.tau_int;
    row.samples = bs.n;
    row.seconds_per_sample = secs / double(cfg.samples);
    row.seconds_per_eff_sample = row.seconds_per_sample * 2.0 * bs.tau_int;
    rows.push_back(row);
  }

  {
    BenchRow row;
    row.sampler = "metropolis_baseline";
    CoulombMetropolisChain chain(g, beta, cfg.seed, 2);
    row.cells_touched_per_move = chain.cells_touched_per_accept();
    int burn = cfg.burnin_sweeps >= 0 ? cfg.burnin_sweeps : default_burnin(g, beta);
    for (int i = 0; i < burn; ++i) chain.sweep();
    std::vector<double> xs;
    xs.reserve(cfg.samples);
    auto t0 = clock::now();
    for (long i = 0; i < cfg.samples; ++i) {
      for (int s = 0; s < std::max(1, cfg.sweeps); ++s) chain.sweep();
      double x = 0.0;
      const IntForm& q = chain.q();
      for (int f = 0; f < g.num_faces; ++f) x += double(q[f]) * w[f];
      xs.push_back(x);
    }
    double secs = std::chrono::duration<double>(clock::now() - t0).count();
    BatchStats bs = batch_stats(xs);
    row.mean = bs.mean;
    row.stderr_ = bs.stderr_mean;
    row.tau_int = bs.tau_int;
    row.samples = bs.n;
    row.seconds_per_sample = secs / double(cfg.samples);
    row.seconds_per_eff_sample = row.seconds_per_sample * 2.0 * bs.tau_int;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace coulvil
