#include "coulvil/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coulvil {

BatchStats batch_stats(std::span<const double> xs, int target_batches) {
  BatchStats s;
  s.n = static_cast<long>(xs.size());
  if (s.n == 0) return s;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= double(s.n);
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= std::max<long>(1, s.n - 1);
  s.mean = mean;
  s.sample_var = var;

  int nb = std::min<long>(target_batches, s.n);
  long bs = s.n / nb;
  nb = static_cast<int>(s.n / bs);
  double bvar = 0.0;
  int used = 0;
  for (int b = 0; b < nb; ++b) {
    double bm = 0.0;
    for (long i = b * bs; i < (b + 1) * bs; ++i) bm += xs[i];
    bm /= double(bs);
    bvar += (bm - mean) * (bm - mean);
    ++used;
  }
  s.batches = used;
  if (used > 1) bvar /= (used - 1);
  s.stderr_mean = std::sqrt(bvar / used);
  if (var > 0) s.tau_int = std::max(0.5, double(s.n) * s.stderr_mean * s.stderr_mean / (2.0 * var));
  return s;
}

VarianceStats variance_stats(std::span<const double> xs, int target_batches) {
  VarianceStats v;
  v.n = static_cast<long>(xs.size());
  if (v.n < 2) return v;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= double(v.n);
  std::vector<double> sq(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - mean) * (xs[i] - mean);
  BatchStats bs = batch_stats(sq, target_batches);
  v.variance = bs.mean * double(v.n) / std::max<long>(1, v.n - 1);
  v.stderr_variance = bs.stderr_mean;
  v.batches = bs.batches;
  return v;
}

double gamma_p(double a, double x) {
  if (x < 0 || a <= 0) throw std::invalid_argument("gamma_p domain");
  if (x == 0) return 0.0;
  if (x < a + 1.0) {  // series
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  // continued fraction for Q
  double b = x + 1.0 - a, c = 1e308, dd = 1.0 / b, h = dd;
  for (int i = 1; i < 500; ++i) {
    double an = -double(i) * (double(i) - a);
    b += 2.0;
    dd = an * dd + b;
    if (std::abs(dd) < 1e-300) dd = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    dd = 1.0 / dd;
    double del = dd * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  double q = std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  return 1.0 - q;
}

double gamma_q(double a, double x) { return 1.0 - gamma_p(a, x); }

double chi_square_pvalue(double stat, double dof) {
  if (dof <= 0) return 1.0;
  return gamma_q(dof / 2.0, stat / 2.0);
}

double chi_square_pvalue_counts(std::span<const long> observed, std::span<const double> prob,
                                double min_expected) {
  if (observed.size() != prob.size()) throw std::invalid_argument("chi_square: size mismatch");
  long total = 0;
  for (long o : observed) total += o;
  double stat = 0.0;
  int dof = -1;
  double pool_o = 0.0, pool_e = 0.0;
  for (size_t i = 0; i < observed.size(); ++i) {
    double e = prob[i] * double(total);
    if (e < min_expected) {
      pool_o += double(observed[i]);
      pool_e += e;
      continue;
    }
    stat += (observed[i] - e) * (observed[i] - e) / e;
    ++dof;
  }
  if (pool_e >= min_expected) {
    stat += (pool_o - pool_e) * (pool_o - pool_e) / pool_e;
    ++dof;
  }
  if (dof < 1) return 1.0;
  return chi_square_pvalue(stat, dof);
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("tv_distance: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace coulvil
