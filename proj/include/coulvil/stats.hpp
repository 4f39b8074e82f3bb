#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace coulvil {

// Batch-means error bar for a correlated scalar chain.
struct BatchStats {
  double mean = 0.0;
  double stderr_mean = 0.0;   // batch-means standard error of the mean
  double sample_var = 0.0;    // plain variance of the samples
  double tau_int = 0.5;       // sigma_inf^2 / (2 sigma^2); 0.5 for iid
  long n = 0;
  int batches = 0;
};

BatchStats batch_stats(std::span<const double> xs, int target_batches = 32);

// Variance of the chain with a batch-means error bar (batched on centred
// squares, so correlations are accounted for).
struct VarianceStats {
  double variance = 0.0;
  double stderr_variance = 0.0;
  long n = 0;
  int batches = 0;
};

VarianceStats variance_stats(std::span<const double> xs, int target_batches = 32);

// Regularized incomplete gamma functions (series / continued fraction).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Upper-tail p-value of a chi-square statistic with dof degrees of freedom.
double chi_square_pvalue(double stat, double dof);

// Pearson chi-square statistic for observed counts against probabilities;
// bins with expected count below min_expected are pooled.
double chi_square_pvalue_counts(std::span<const long> observed, std::span<const double> prob,
                                double min_expected = 5.0);

// Total variation distance between an empirical distribution (counts) and a
// reference law given as (key, probability) pairs aligned by index.
double tv_distance(std::span<const double> p, std::span<const double> q);

}  // namespace coulvil
