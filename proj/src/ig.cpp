#include "coulvil/ig.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace coulvil {

namespace {

constexpr double kTwoPiSq = 4.0 * M_PI * M_PI;  // (2 pi)^2

void check(const IGParams& p) {
  if (!(p.beta > 0)) throw std::invalid_argument("IG: beta must be positive");
}

// Terms at distance > J from round(a) carry relative mass below ~1e-16 once
// exp(-beta (J - 1/2)^2 / 2) is negligible against the mode weight 1.
int stats_radius(double beta) {
  double J = std::sqrt(2.0 * 45.0 / beta) + 2.0;
  return std::max(3, static_cast<int>(std::ceil(J)));
}

}  // namespace

IGStats ig_stats(const IGParams& p) {
  check(p);
  const int64_t k0 = llround(p.a);
  const int J = stats_radius(p.beta);
  const double dbest = double(k0) - p.a;  // |dbest| <= 1/2
  double s0 = 0.0, s1 = 0.0;
  std::vector<double> w(2 * J + 1);
  for (int j = -J; j <= J; ++j) {
    double dk = double(j) + dbest;
    double lw = -0.5 * p.beta * (dk * dk - dbest * dbest);
    double wj = std::exp(lw);
    w[j + J] = wj;
    s0 += wj;
    s1 += double(j) * wj;
  }
  IGStats st;
  double frac = s1 / s0;
  st.mean = double(k0) + frac;
  double v = 0.0, t = 0.0;
  for (int j = -J; j <= J; ++j) {
    double c = double(j) - frac;
    v += c * c * w[j + J];
    t += std::abs(c * c * c) * w[j + J];
  }
  st.var = v / s0;
  st.third_abs = t / s0;
  return st;
}

int64_t ig_sample(const IGParams& p, Rng& rng) {
  check(p);
  const int64_t k0 = llround(p.a);
  const double dbest = double(k0) - p.a;
  // outward from the mode: k0, k0+1, k0-1, k0+2, ...
  std::vector<double> w;
  std::vector<int64_t> ks;
  double s = 0.0;
  int j = 0;
  double tail = 1.0;
  while (true) {
    for (int sign : {+1, -1}) {
      if (j == 0 && sign < 0) continue;
      double dk = double(sign * j) + dbest;
      double wj = std::exp(-0.5 * p.beta * (dk * dk - dbest * dbest));
      ks.push_back(k0 + sign * j);
      w.push_back(wj);
      s += wj;
    }
    // remaining mass beyond distance j on either side
    double r = double(j) + 0.5;  // |k - a| >= r for the next shell
    double rho = std::exp(-p.beta * (r + 0.5));
    tail = 2.0 * std::exp(-0.5 * p.beta * (r * r - dbest * dbest)) / std::max(1e-300, 1.0 - rho);
    if (rho < 1.0 && tail < 1e-15 * s && j >= 1) break;
    ++j;
    if (j > 10000) throw std::runtime_error("ig_sample: truncation failed to certify");
  }
  while (true) {
    double u = rng.uniform() * (s + tail);
    double acc = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (u < acc) return ks[i];
    }
    // landed in the certified residual: resample
  }
}

namespace {
double var_at(double a, double beta_ig) { return ig_stats({a, beta_ig}).var; }
}  // namespace

double error_function_argmin(double beta) {
  if (!(beta > 0)) throw std::invalid_argument("error_function_M: beta must be positive");
  const double bi = kTwoPiSq * beta;
  const int n = 65;
  int best = 0;
  double fbest = 0.0;
  for (int i = 0; i < n; ++i) {
    double a = 0.5 * double(i) / double(n - 1);
    double f = var_at(a, bi);
    if (i == 0 || f < fbest) { fbest = f; best = i; }
  }
  double lo = 0.5 * double(std::max(0, best - 1)) / double(n - 1);
  double hi = 0.5 * double(std::min(n - 1, best + 1)) / double(n - 1);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  double fc = var_at(c, bi), fd = var_at(d, bi);
  while (hi - lo > 1e-9) {
    if (fc < fd) {
      hi = d; d = c; fd = fc;
      c = hi - gr * (hi - lo);
      fc = var_at(c, bi);
    } else {
      lo = c; c = d; fc = fd;
      d = lo + gr * (hi - lo);
      fd = var_at(d, bi);
    }
  }
  return 0.5 * (lo + hi);
}

double error_function_M(double beta) {
  double a = error_function_argmin(beta);
  double bi = kTwoPiSq * beta;
  double v = std::min({var_at(a, bi), var_at(0.0, bi), var_at(0.5, bi)});
  return bi * v;
}

KBetaResult k_beta(double beta, int grid_a, int grid_beta, double beta_cap) {
  if (!(beta > 0)) throw std::invalid_argument("k_beta: beta must be positive");
  KBetaResult r;
  r.beta = beta;
  r.beta_cap = std::max(beta, beta_cap);
  r.grid_a = grid_a;
  r.grid_beta = grid_beta;
  r.tail_band = 2.0 + 4.0 * std::exp(-0.75 * r.beta_cap);
  double sup = 0.0;
  for (int ib = 0; ib < grid_beta; ++ib) {
    double b = beta * std::pow(r.beta_cap / beta, double(ib) / double(std::max(1, grid_beta - 1)));
    for (int ia = 0; ia < grid_a; ++ia) {
      double a = 0.5 * double(ia) / double(grid_a - 1);
      IGStats st = ig_stats({a, b});
      if (st.var > 0) sup = std::max(sup, st.third_abs / st.var);
    }
  }
  r.value = std::max(sup, r.tail_band);
  return r;
}

double jacobi_residual(double beta) {
  if (!(beta > 0)) throw std::invalid_argument("jacobi_residual: beta must be positive");
  double lhs = kTwoPiSq * beta * ig_stats({0.0, kTwoPiSq * beta}).var;
  double rhs = ig_stats({0.0, 1.0 / beta}).var / beta;
  return std::abs(1.0 - lhs - rhs);
}

int wrapped_sum_kmax(double beta) {
  return 5 + static_cast<int>(std::ceil(4.0 / std::sqrt(beta)));
}

double wrapped_gauss_weight(double u, double beta) {
  double r = std::remainder(u, 2.0 * M_PI);
  int kmax = wrapped_sum_kmax(beta);
  double s = 0.0;
  for (int k = -kmax; k <= kmax; ++k) {
    double t = r + 2.0 * M_PI * k;
    s += std::exp(-0.5 * beta * t * t);
  }
  return s;
}

}  // namespace coulvil
