#pragma once

#include <cstdint>

#include "coulvil/rng.hpp"

namespace coulvil {

// Integer-valued Gaussian N^IG(a, beta): pmf on k in Z proportional to
// exp(-beta (k-a)^2 / 2).
struct IGParams {
  double a = 0.0;
  double beta = 1.0;
};

struct IGStats {
  double mean = 0.0;
  double var = 0.0;
  double third_abs = 0.0;  // E|X - mean|^3
};

// Truncated summation with tail mass below 1e-15 of the total; results are
// accurate to ~1e-12 relative.
IGStats ig_stats(const IGParams& p);

// Exact draw up to 1e-15 total variation: the table is extended until the
// certified residual drops below that level and the residual event resamples.
int64_t ig_sample(const IGParams& p, Rng& rng);

// Error function M(beta) = (2pi)^2 beta inf_{a in [0,1/2]} Var^IG(a, (2pi)^2 beta).
// The infimum is located numerically (grid bracket + golden section to 1e-9
// in a); monotonicity in a is expected but not assumed.
double error_function_M(double beta);
// Location of the infimum, reported alongside M.
double error_function_argmin(double beta);

struct KBetaResult {
  double value = 0.0;
  double beta = 0.0;
  double beta_cap = 0.0;   // grid covers [beta, beta_cap]; beyond it the
  double tail_band = 0.0;  // analytic band 2 + 4 exp(-3 beta_cap / 4) applies
  int grid_a = 0;
  int grid_beta = 0;
};

// Numerical sup over a and beta' >= beta of T^IG / Var^IG.
KBetaResult k_beta(double beta, int grid_a = 257, int grid_beta = 129, double beta_cap = 40.0);

// |1 - (2pi)^2 beta Var^IG(0,(2pi)^2 beta) - Var^IG(0, 1/beta)/beta|.
double jacobi_residual(double beta);

// sum_k exp(-beta (u + 2 pi k)^2 / 2), truncated at |k| <= wrapped_sum_kmax.
double wrapped_gauss_weight(double u, double beta);
int wrapped_sum_kmax(double beta);

}  // namespace coulvil
