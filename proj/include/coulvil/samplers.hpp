#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>

#include "coulvil/calculus.hpp"
#include "coulvil/ig.hpp"
#include "coulvil/rng.hpp"

namespace coulvil {

// Villain coupling (theta, m): joint density prop. to
// exp(-(beta/2) <d theta + 2 pi m, d theta + 2 pi m>).
struct VillainState {
  Form theta;  // values in [0, 2 pi), theta(v0) = 0
  IntForm m;
};

struct CoulombState {
  IntForm q;  // degree 0 or 2, root value 0
};

struct IVState {
  IntForm psi;  // degree 0 or 2, root value 0
};

struct ChainConfig {
  uint64_t seed = 1;
  int burnin_sweeps = -1;  // -1: heuristic default_burnin()
  int sweeps = 1;          // sweeps between retained samples
  long samples = 10000;
  int k_cutoff = 0;        // m-sum cutoff; 0 = 5 + ceil(4/sqrt(beta))
  int chains = 4;          // independent chains the samples are split across
};

// Heuristic 100 * n sweeps (flagged as such; convergence is monitored by the
// energy trace in the estimator layer, no mixing bound is claimed).
int default_burnin(const LatticeGeometry& g, double beta);

VillainState make_villain_state(const LatticeGeometry& g);

// Exact draw from the single-site conditional density
//   prop. to prod_j sum_k exp(-(beta/2)(x - nbr_j + 2 pi k)^2)  on [0, 2 pi).
// Rejection from a piecewise wrapped-normal proposal; truncation tails are
// certified below 1e-15.
double sample_villain_conditional(std::span<const double> nbrs, double beta, Rng& rng);

// One sequential lexicographic sweep of single-site heat-bath updates; v0 is
// never touched.
class VillainSweeper {
 public:
  VillainSweeper(const LatticeGeometry& g, double beta);
  void sweep(Form& theta, Rng& rng) const;
  double beta() const { return beta_; }

 private:
  const LatticeGeometry* g_;
  double beta_;
  std::vector<int> nbr_;
  std::vector<int> off_;
};

VillainState villain_heat_bath_sweep(VillainState state, double beta, Rng& rng);

// m(e) | theta ~ N^IG(-d theta(e) / 2 pi, (2 pi)^2 beta), independent per edge.
IntForm sample_m_given_theta(const Form& theta, double beta, Rng& rng);

// Exact GFF draw via the cached factorization of -laplacian; covariance G/beta.
Form gff_sample(const LatticeGeometry& g, int degree, double beta, Rng& rng);

// White-noise decomposition: W iid N(0, 1/beta) per edge;
// returns (lap^-1 d* W  on vertices, lap^-1 d W  on faces).
std::pair<Form, Form> gff_from_white_noise(const LatticeGeometry& g, double beta, Rng& rng);
std::pair<Form, Form> gff_pair_from_noise(const Form& W);

// Single-site heat bath for the IV-GFF at inverse temperature u:
// psi(x) | rest ~ N^IG(neighbour mean, deg(x) * u).  Tables are memoised per
// (degree of the cell, neighbour-sum residue); a sampler instance serves one
// chain and is not thread-safe.
class IvHeatBath {
 public:
  IvHeatBath(const LatticeGeometry& g, int degree, double inv_temp_u);
  void sweep(IntForm& psi, Rng& rng) const;
  IVState make_state() const;

 private:
  struct Table {
    std::vector<double> cum;
    int64_t j_min = 0;
    double total = 0.0, tail = 0.0;
  };
  const Table& table_for(int deg, int64_t residue) const;

  const LatticeGeometry* g_;
  int degree_;
  double u_;
  int root_;
  std::vector<int> nbr_;
  std::vector<int> off_;
  mutable std::map<std::pair<int, int64_t>, Table> tables_;
};

IVState ivgff_heat_bath_sweep(IVState state, double inv_temp_u, Rng& rng);

// Local Coulomb pipeline: Villain sweeps, then m | theta, then q = d m.
class LocalCoulombChain {
 public:
  LocalCoulombChain(const LatticeGeometry& g, double beta, const ChainConfig& cfg);
  // Runs cfg.sweeps sweeps (after one-time burn-in) and returns the next q.
  const IntForm& next();
  const VillainState& coupling() const { return state_; }
  Rng& rng() { return rng_; }

 private:
  const LatticeGeometry* g_;
  double beta_;
  ChainConfig cfg_;
  VillainSweeper sweeper_;
  VillainState state_;
  IntForm q_;
  Rng rng_;
  bool burned_ = false;
};

CoulombState coulomb_sample_local(const LatticeGeometry& g, double beta, const ChainConfig& cfg);

// Non-local single-site +-1 Metropolis baseline on q, with the potential
// u = (-lap)^-1 q maintained by dense Green columns.  Needs the dense Green
// matrix, which bounds the usable lattice size.
class CoulombMetropolisChain {
 public:
  CoulombMetropolisChain(const LatticeGeometry& g, double beta, uint64_t seed, int degree = 2);
  void step();
  void sweep() { for (int i = 0; i < free_count_; ++i) step(); }
  const IntForm& q() const { return q_; }
  double potential_at(int cell) const;  // (-lap)^-1 q
  double tracked_energy() const { return energy_; }
  double recomputed_energy() const;
  long proposals() const { return proposals_; }
  long accepts() const { return accepts_; }
  // Green-column length touched per accepted move (cost accounting).
  int cells_touched_per_accept() const { return free_count_; }

 private:
  const LatticeGeometry* g_;
  double beta_;
  int degree_;
  int free_count_;
  std::vector<int> free_cells_;
  std::vector<int> to_free_;
  Eigen::MatrixXd green_;
  IntForm q_;
  Eigen::VectorXd pot_;
  Rng rng_;
  double energy_ = 0.0;
  long proposals_ = 0, accepts_ = 0;
};

// <d theta + 2 pi m, d theta + 2 pi m>
double villain_coupling_energy(const VillainState& s);

}  // namespace coulvil
