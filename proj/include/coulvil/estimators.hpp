#pragma once

#include <map>
#include <string>

#include "coulvil/samplers.hpp"
#include "coulvil/stats.hpp"

namespace coulvil {

// Monte Carlo estimate with batch-means error bar and chain metadata.
struct EstimateReport {
  std::string observable;
  double estimate = 0.0;
  double stderr_ = 0.0;
  double tau_int = 0.5;
  long samples = 0;
  int batches = 0;
  uint64_t seed = 0;
  uint64_t geometry_hash = 0;
  uint64_t config_hash = 0;
  std::map<std::string, double> extras;  // bundled analytic references
};

uint64_t chain_config_hash(const ChainConfig& cfg);

// Var[<lap^-1 q, g>] under the local Coulomb sampler.  extras carry the
// analytic lower bound M(beta)/((2 pi)^2 beta) <g, (-lap)^-1 g>.
EstimateReport coulomb_potential_variance(const Form& g_form, double beta,
                                          const ChainConfig& cfg);

// Re E[exp(2 pi i (u(f1) - u(f2)))] with u = lap^-1 q.  extras carry the
// Gaussian-shape exponent of the upper bound (its constant K is unknown).
EstimateReport coulomb_char_function(const LatticeGeometry& g, int f1, int f2, double beta,
                                     const ChainConfig& cfg);

// E[cos(theta(v1) - theta(v2))] measured directly and through the
// GFF x vortex factorization.
struct TwoPointReport {
  EstimateReport direct;
  EstimateReport vortex;      // Re E[e^{2 pi i (B(v1) - B(v2))}], B = d* lap^-1 m
  double gff_factor = 1.0;    // exp(-(G(v1,v1)+G(v2,v2)-2G(v1,v2)) / (2 beta))
  double factorized = 0.0;    // gff_factor * vortex.estimate
  double factorized_stderr = 0.0;
};
TwoPointReport villain_two_point(const LatticeGeometry& g, int v1, int v2, double beta,
                                 const ChainConfig& cfg);

// (2 pi)^2 beta E^Vil[ Var^IG(-d theta(e)/2 pi, (2 pi)^2 beta) ].
EstimateReport tilde_M_estimator(const LatticeGeometry& g, int edge, double beta,
                                 const ChainConfig& cfg);

// Maximum of the IV-GFF on zero-bc lattices at inverse temperature 1/beta,
// from cfg.samples independent warm-started chains per size.
struct MaxStatsRow {
  int n = 0;
  long samples = 0;
  double threshold = 0.0;    // sqrt((1 - M/2) 2 beta / pi) log n
  double exceed_freq = 0.0;  // fraction of chains with max >= threshold
  double mean_max = 0.0;
  // per-site tails, pooled over sites and samples, keyed by alpha
  std::map<double, double> site_tail_freq;
  std::map<double, double> site_threshold;
};
std::vector<MaxStatsRow> ivgff_max_statistics(const std::vector<int>& n_list, double beta,
                                              const ChainConfig& cfg,
                                              const std::vector<double>& alphas = {1.5, 2.0});

// P( d theta(e) in (-eps, eps) mod 2 pi for every edge of the window
// centred at `center` with radius R ).
EstimateReport gradient_window_probability(const LatticeGeometry& g, int R, double eps,
                                           double beta, int center_vertex,
                                           const ChainConfig& cfg);

// Autocorrelation / wall-clock comparison of the local pipeline against the
// dense-Green Metropolis baseline on the observable <lap^-1 q, g>.
struct BenchRow {
  std::string sampler;
  double mean = 0.0;
  double stderr_ = 0.0;
  double tau_int = 0.5;
  double seconds_per_sample = 0.0;
  double seconds_per_eff_sample = 0.0;
  long cells_touched_per_move = 0;
  long samples = 0;
};
std::vector<BenchRow> sampler_benchmark(const Form& g_form, double beta, const ChainConfig& cfg);

}  // namespace coulvil
