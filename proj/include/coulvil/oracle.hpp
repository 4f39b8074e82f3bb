#pragma once

#include <complex>
#include <map>

#include "coulvil/calculus.hpp"
#include "coulvil/rng.hpp"

namespace coulvil {

struct OracleConfig {
  int k_max = 0;             // charge/height cutoff; 0 = auto from the tail bound
  double tail_tol = 1e-8;    // certified truncation bound, relative
  int quad_nodes = 16;       // starting nodes per angle; doubled until converged
  int quad_nodes_max = 1024;
  double quad_tol = 1e-9;    // doubling stops below this relative change
  int max_free_cells = 5;
  int max_angles = 3;
};

// A certified desk-scale number: the value plus a truncation/quadrature
// error bound established during the computation.
struct CertifiedValue {
  double log_value = 0.0;
  double rel_error = 0.0;
};

// Closed form sqrt(2 pi / beta)^{free} * det(-lap)^{-1/2} on rooted forms.
CertifiedValue exact_Z_gff(const LatticeGeometry& g, int degree, double beta);

// Sum over integer charges of exp(-(2 pi)^2 beta <q, (-lap)^-1 q> / 2).
CertifiedValue exact_Z_coulomb(const LatticeGeometry& g, double beta,
                               const OracleConfig& cfg = {}, int degree = 2);

// Sum over integer heights of exp(-(u/2) <psi, (-lap) psi>), u = 1/beta.
CertifiedValue exact_Z_iv(const LatticeGeometry& g, double inv_temp_u,
                          const OracleConfig& cfg = {}, int degree = 2);
// Same quantity through Poisson summation (log Z^GFF_u plus a dual theta
// sum); usable at small u where direct enumeration explodes.  Cross-checked
// against the direct route in tests at moderate u.
CertifiedValue exact_Z_iv_poisson(const LatticeGeometry& g, double inv_temp_u,
                                  const OracleConfig& cfg = {}, int degree = 2);

// Tensor-product trapezoid over the free angles (periodic integrand), node
// count doubled until the relative change certifies quad_tol.
CertifiedValue exact_Z_villain(const LatticeGeometry& g, double beta,
                               const OracleConfig& cfg = {});

// Ground-truth law of a discrete model on a tiny graph.
struct LawTable {
  std::vector<int> cells;  // free cells in reduced order
  std::map<std::vector<int64_t>, double> prob;
  double tail_bound = 0.0;

  double prob_of(const std::vector<int64_t>& key) const {
    auto it = prob.find(key);
    return it == prob.end() ? 0.0 : it->second;
  }
};

enum class DiscreteModel { Coulomb, IVGFF };

LawTable exact_model_law(DiscreteModel model, const LatticeGeometry& g, double beta_or_u,
                         const OracleConfig& cfg = {}, int degree = 2);

// E^Vil_beta[ exp(i <d theta + 2 pi m, h>) ] for real 1-forms h.
std::complex<double> villain_charfun(const LatticeGeometry& g, double beta, const Form& h,
                                     const OracleConfig& cfg = {});

// E^IV_{1/beta}[ exp((1/beta) <d* Psi, h>) ], Psi an integer 2-form.
double iv_laplace_dstar(const LatticeGeometry& g, double beta, const Form& h,
                        const OracleConfig& cfg = {});
// E^IV_{1/beta}[ exp((1/beta) <Psi, g2>) ]
double iv_laplace(const LatticeGeometry& g, double beta, const Form& g2,
                  const OracleConfig& cfg = {});
// E^Coul_beta[ exp(2 pi i <lap^-1 q, g2>) ]
std::complex<double> coulomb_charfun(const LatticeGeometry& g, double beta, const Form& g2,
                                     const OracleConfig& cfg = {});

// Bin probabilities of the Villain theta-marginal at one vertex (quadrature).
std::vector<double> villain_theta_bins(const LatticeGeometry& g, double beta, int vertex,
                                       int nbins, const OracleConfig& cfg = {});

// iid draws from the Villain theta law on a tiny graph by rejection from the
// uniform law on the angle cube; exact, with expected cost
// (2 pi)^k rho(0)^|E| / Z per draw.
class VillainOracleSampler {
 public:
  VillainOracleSampler(const LatticeGeometry& g, double beta);
  Form sample(Rng& rng) const;

 private:
  const LatticeGeometry* g_;
  double beta_;
  std::vector<int> free_;
};

// exp(((free cells)/2) * int_0^{1/beta} M(1/u)/u du), the finite-n free
// energy bound; the integral uses adaptive Simpson plus an analytic bound on
// the u -> 0 tail.
double free_energy_bound_exponent(int free_cells, double beta);

}  // namespace coulvil
