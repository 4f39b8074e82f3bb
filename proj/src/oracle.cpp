#include "coulvil/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <sstream>

#include "coulvil/ig.hpp"

namespace coulvil {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kTwoPiSq = 4.0 * M_PI * M_PI;

// Quadratic lattice sum: exponent(x) = -(c/2) x^T A x + b^T x over integer
// vectors in a box around the continuous maximiser.
struct QuadSpec {
  Eigen::MatrixXd a;
  double c = 1.0;
  Eigen::VectorXd b;
  Eigen::VectorXd center;
  std::vector<int64_t> base;  // rounded center
  double e0 = 0.0;            // exponent at the maximiser
  double lam_min = 1.0;
  int k = 0;                  // box radius
  int dim = 0;
};

QuadSpec make_spec(const Eigen::MatrixXd& a, double c, const Eigen::VectorXd& b,
                   const OracleConfig& cfg) {
  QuadSpec s;
  s.a = a;
  s.c = c;
  s.b = b;
  s.dim = static_cast<int>(a.rows());
  if (s.dim > cfg.max_free_cells)
    throw std::invalid_argument("oracle enumeration limited to 5 free cells");
  if (s.dim == 0) {
    s.e0 = 0.0;
    s.k = 0;
    return s;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  s.lam_min = es.eigenvalues().minCoeff();
  if (s.lam_min <= 0) throw std::runtime_error("quadratic form not positive definite");
  s.center = a.ldlt().solve(b) / c;
  s.e0 = 0.5 * b.dot(s.center);
  for (int i = 0; i < s.dim; ++i) s.base.push_back(llround(s.center[i]));
  s.k = cfg.k_max > 0
            ? cfg.k_max
            : std::max<int>(3, static_cast<int>(std::ceil(std::sqrt(2.0 * 46.0 / (c * s.lam_min)))) + 1);
  if (std::pow(2.0 * s.k + 1.0, s.dim) > 2e8)
    throw std::invalid_argument(
        "oracle enumeration too large; use the Poisson route or a tighter cutoff");
  return s;
}

// Mass outside the box, relative to exp(e0): a coordinate at distance r from
// base is at least r - 1/2 from the center, so the exponent drops by at least
// (c lam_min / 2)(r - 1/2)^2.
double spec_tail(const QuadSpec& s) {
  if (s.dim == 0) return 0.0;
  double tail = 0.0;
  for (int r = s.k + 1; r < s.k + 400; ++r) {
    double cnt = std::pow(2.0 * r + 1.0, s.dim) - std::pow(2.0 * r - 1.0, s.dim);
    double t = cnt * std::exp(-0.5 * s.c * s.lam_min * (r - 0.5) * (r - 0.5));
    tail += t;
    if (t < 1e-280) break;
  }
  return tail;
}

// Calls fn(x, w) with w = exp(exponent(x) - e0); returns sum of w.
template <class Fn>
double enumerate_spec(const QuadSpec& s, Fn&& fn) {
  if (s.dim == 0) {
    std::vector<int64_t> x;
    fn(x, 1.0);
    return 1.0;
  }
  std::vector<int64_t> x(s.dim);
  std::vector<int> digit(s.dim, 0);
  const int side = 2 * s.k + 1;
  Eigen::VectorXd xv(s.dim);
  double total = 0.0;
  while (true) {
    for (int i = 0; i < s.dim; ++i) {
      x[i] = s.base[i] + digit[i] - s.k;
      xv[i] = double(x[i]);
    }
    double expo = -0.5 * s.c * xv.dot(s.a * xv) + s.b.dot(xv) - s.e0;
    double w = std::exp(expo);
    fn(x, w);
    total += w;
    int i = 0;
    while (i < s.dim && ++digit[i] == side) digit[i++] = 0;
    if (i == s.dim) break;
  }
  return total;
}

struct LogSum {
  double log_value;
  double rel_tail;
};

LogSum certified_log_sum(const QuadSpec& s, const OracleConfig& cfg) {
  double total = enumerate_spec(s, [](const std::vector<int64_t>&, double) {});
  double tail = spec_tail(s);
  if (!(tail <= cfg.tail_tol * total)) {
    std::ostringstream os;
    os << "uncertified truncation: tail bound " << tail << " vs sum " << total;
    throw std::runtime_error(os.str());
  }
  return {s.e0 + std::log(total), tail / total};
}

Eigen::VectorXd reduce(const Operators& ops, const Form& f, int degree) {
  const auto& cells = ops.free_cells(degree);
  Eigen::VectorXd v(cells.size());
  for (size_t i = 0; i < cells.size(); ++i) v[i] = f[cells[i]];
  return v;
}

// --- Villain angle quadrature -------------------------------------------

struct AngleGrid {
  const LatticeGeometry* g;
  std::vector<int> free_v;       // angle index per free vertex
  std::vector<int> vidx;         // vertex -> angle index (-1 = root)
  std::vector<std::array<int, 2>> edge_idx;  // (tail angle idx, head angle idx)

  explicit AngleGrid(const LatticeGeometry& gg, const OracleConfig& cfg) : g(&gg) {
    vidx.assign(gg.num_vertices, -1);
    for (int v = 0; v < gg.num_vertices; ++v) {
      if (v == gg.root_vertex) continue;
      vidx[v] = static_cast<int>(free_v.size());
      free_v.push_back(v);
    }
    if (static_cast<int>(free_v.size()) > cfg.max_angles)
      throw std::invalid_argument("villain quadrature limited to 3 free angles");
    for (int e = 0; e < gg.num_edges; ++e)
      edge_idx.push_back({vidx[gg.edge_endpoints[e][0]], vidx[gg.edge_endpoints[e][1]]});
  }

  // Sums prod_e table_e[(head - tail) mod N] over the N^k angle grid.
  template <typename T>
  T grid_sum(int n, const std::vector<std::vector<T>>& edge_table) const {
    const int k = static_cast<int>(free_v.size());
    std::vector<int> digit(k, 0);
    T total{};
    while (true) {
      T w = T{1};
      for (size_t e = 0; e < edge_idx.size(); ++e) {
        int it = edge_idx[e][0] < 0 ? 0 : digit[edge_idx[e][0]];
        int ih = edge_idx[e][1] < 0 ? 0 : digit[edge_idx[e][1]];
        w *= edge_table[e][(ih - it + n) % n];
      }
      total += w;
      int i = 0;
      while (i < k && ++digit[i] == n) digit[i++] = 0;
      if (i == k) break;
    }
    return total;
  }
};

std::vector<std::vector<double>> rho_tables(const LatticeGeometry& g, double beta, int n) {
  std::vector<double> row(n);
  for (int i = 0; i < n; ++i) row[i] = wrapped_gauss_weight(kTwoPi * i / n, beta);
  return std::vector<std::vector<double>>(g.num_edges, row);
}

// Doubles nodes until the relative change of `value(n)` is below quad_tol.
template <class ValueFn>
std::pair<double, double> quad_converge(const OracleConfig& cfg, ValueFn&& value) {
  double prev = 0.0;
  bool have_prev = false;
  for (int n = cfg.quad_nodes; n <= cfg.quad_nodes_max; n *= 2) {
    double cur = value(n);
    if (have_prev) {
      double change = std::abs(cur - prev) / std::max(1e-300, std::abs(cur));
      if (change < cfg.quad_tol) return {cur, change};
    }
    prev = cur;
    have_prev = true;
  }
  throw std::runtime_error("uncertified quadrature: node doubling did not converge");
}

}  // namespace

CertifiedValue exact_Z_gff(const LatticeGeometry& g, int degree, double beta) {
  if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
  const Operators& ops = ops_for(g);
  int m = ops.free_count(degree);
  double log_z = 0.5 * m * std::log(kTwoPi / beta) - 0.5 * ops.logdet_neg_laplacian(degree);
  return {log_z, 1e-14};
}

CertifiedValue exact_Z_coulomb(const LatticeGeometry& g, double beta, const OracleConfig& cfg,
                               int degree) {
  if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
  const Operators& ops = ops_for(g);
  Eigen::MatrixXd green = ops.dense_green(degree, 64);
  QuadSpec s = make_spec(green, kTwoPiSq * beta, Eigen::VectorXd::Zero(green.rows()), cfg);
  LogSum ls = certified_log_sum(s, cfg);
  return {ls.log_value, ls.rel_tail};
}

CertifiedValue exact_Z_iv(const LatticeGeometry& g, double inv_temp_u, const OracleConfig& cfg,
                          int degree) {
  if (!(inv_temp_u > 0)) throw std::invalid_argument("inverse temperature must be positive");
  const Operators& ops = ops_for(g);
  Eigen::MatrixXd neg_lap = ops.dense_neg_laplacian(degree, 64);
  QuadSpec s = make_spec(neg_lap, inv_temp_u, Eigen::VectorXd::Zero(neg_lap.rows()), cfg);
  LogSum ls = certified_log_sum(s, cfg);
  return {ls.log_value, ls.rel_tail};
}

CertifiedValue exact_Z_iv_poisson(const LatticeGeometry& g, double inv_temp_u,
                                  const OracleConfig& cfg, int degree) {
  CertifiedValue gff = exact_Z_gff(g, degree, inv_temp_u);
  const Operators& ops = ops_for(g);
  Eigen::MatrixXd green = ops.dense_green(degree, 64);
  QuadSpec s = make_spec(green, kTwoPiSq / inv_temp_u, Eigen::VectorXd::Zero(green.rows()), cfg);
  LogSum ls = certified_log_sum(s, cfg);
  return {gff.log_value + ls.log_value, gff.rel_error + ls.rel_tail};
}

CertifiedValue exact_Z_villain(const LatticeGeometry& g, double beta, const OracleConfig& cfg) {
  if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
  AngleGrid grid(g, cfg);
  const int k = static_cast<int>(grid.free_v.size());
  auto value = [&](int n) {
    auto tables = rho_tables(g, beta, n);
    double s = grid.grid_sum<double>(n, tables);
    return std::log(s) + k * std::log(kTwoPi / n);
  };
  auto [log_z, change] = quad_converge(cfg, value);
  return {log_z, change};
}

LawTable exact_model_law(DiscreteModel model, const LatticeGeometry& g, double beta_or_u,
                         const OracleConfig& cfg, int degree) {
  const Operators& ops = ops_for(g);
  QuadSpec s;
  if (model == DiscreteModel::Coulomb) {
    Eigen::MatrixXd green = ops.dense_green(degree, 64);
    s = make_spec(green, kTwoPiSq * beta_or_u, Eigen::VectorXd::Zero(green.rows()), cfg);
  } else {
    Eigen::MatrixXd neg_lap = ops.dense_neg_laplacian(degree, 64);
    s = make_spec(neg_lap, beta_or_u, Eigen::VectorXd::Zero(neg_lap.rows()), cfg);
  }
  LawTable out;
  out.cells = ops.free_cells(degree);
  double total = 0.0;
  enumerate_spec(s, [&](const std::vector<int64_t>& x, double w) {
    out.prob[x] = w;
    total += w;
  });
  double tail = spec_tail(s);
  if (!(tail <= cfg.tail_tol * total))
    throw std::runtime_error("uncertified truncation in exact_model_law");
  for (auto& [key, p] : out.prob) p /= total;
  out.tail_bound = tail / total;
  return out;
}

std::complex<double> villain_charfun(const LatticeGeometry& g, double beta, const Form& h,
                                     const OracleConfig& cfg) {
  if (h.degree != 1) throw std::invalid_argument("villain_charfun: h must be a 1-form");
  AngleGrid grid(g, cfg);
  const int kmax = wrapped_sum_kmax(beta);
  auto value = [&](int n) {
    std::vector<std::vector<std::complex<double>>> tables(g.num_edges);
    for (int e = 0; e < g.num_edges; ++e) {
      tables[e].resize(n);
      for (int i = 0; i < n; ++i) {
        double dtheta = kTwoPi * i / n;
        std::complex<double> w{0.0, 0.0};
        for (int m = -kmax; m <= kmax; ++m) {
          double t = dtheta + kTwoPi * m;
          w += std::exp(std::complex<double>(-0.5 * beta * t * t, h[e] * t));
        }
        tables[e][i] = w;
      }
    }
    std::complex<double> num = grid.grid_sum<std::complex<double>>(n, tables);
    double den = grid.grid_sum<double>(n, rho_tables(g, beta, n));
    return num / den;
  };
  std::complex<double> prev;
  bool have = false;
  for (int n = cfg.quad_nodes; n <= cfg.quad_nodes_max; n *= 2) {
    std::complex<double> cur = value(n);
    if (have && std::abs(cur - prev) < cfg.quad_tol * std::max(1.0, std::abs(cur))) return cur;
    prev = cur;
    have = true;
  }
  throw std::runtime_error("uncertified quadrature in villain_charfun");
}

double iv_laplace_dstar(const LatticeGeometry& g, double beta, const Form& h,
                        const OracleConfig& cfg) {
  if (h.degree != 1) throw std::invalid_argument("iv_laplace_dstar: h must be a 1-form");
  // <d* psi, h> = -<psi, d h>
  Form dh = d(h);
  Form minus(g, 2);
  minus.values = -dh.values;
  return iv_laplace(g, beta, minus, cfg);
}

double iv_laplace(const LatticeGeometry& g, double beta, const Form& g2, const OracleConfig& cfg) {
  if (g2.degree != 2) throw std::invalid_argument("iv_laplace: test function must be a 2-form");
  const Operators& ops = ops_for(g);
  Eigen::MatrixXd neg_lap = ops.dense_neg_laplacian(2, 64);
  Eigen::VectorXd b = reduce(ops, g2, 2) / beta;
  QuadSpec plain = make_spec(neg_lap, 1.0 / beta, Eigen::VectorXd::Zero(neg_lap.rows()), cfg);
  QuadSpec tilt = make_spec(neg_lap, 1.0 / beta, b, cfg);
  LogSum l0 = certified_log_sum(plain, cfg);
  LogSum l1 = certified_log_sum(tilt, cfg);
  return std::exp(l1.log_value - l0.log_value);
}

std::complex<double> coulomb_charfun(const LatticeGeometry& g, double beta, const Form& g2,
                                     const OracleConfig& cfg) {
  if (g2.degree != 2) throw std::invalid_argument("coulomb_charfun: test function must be a 2-form");
  const Operators& ops = ops_for(g);
  Eigen::MatrixXd green = ops.dense_green(2, 64);
  Eigen::VectorXd v = green * reduce(ops, g2, 2);  // <lap^-1 q, g> = -q . v
  QuadSpec s = make_spec(green, kTwoPiSq * beta, Eigen::VectorXd::Zero(green.rows()), cfg);
  std::complex<double> num{0.0, 0.0};
  double den = enumerate_spec(s, [&](const std::vector<int64_t>& x, double w) {
    double phase = 0.0;
    for (size_t i = 0; i < x.size(); ++i) phase -= kTwoPi * double(x[i]) * v[i];
    num += w * std::exp(std::complex<double>(0.0, phase));
  });
  double tail = spec_tail(s);
  if (!(tail <= cfg.tail_tol * den))
    throw std::runtime_error("uncertified truncation in coulomb_charfun");
  return num / den;
}

std::vector<double> villain_theta_bins(const LatticeGeometry& g, double beta, int vertex,
                                       int nbins, const OracleConfig& cfg) {
  AngleGrid grid(g, cfg);
  int target = grid.vidx[vertex];
  if (target < 0) throw std::invalid_argument("villain_theta_bins: vertex is the root");
  const int k = static_cast<int>(grid.free_v.size());
  // Marginal node values on the aligned grid are spectrally convergent; the
  // bin masses then come exactly from the trigonometric interpolant.
  auto bins_at = [&](int n) {
    auto tables = rho_tables(g, beta, n);
    std::vector<double> marg(n, 0.0);
    std::vector<int> digit(k, 0);
    while (true) {
      double w = 1.0;
      for (size_t e = 0; e < grid.edge_idx.size(); ++e) {
        int it = grid.edge_idx[e][0] < 0 ? 0 : digit[grid.edge_idx[e][0]];
        int ih = grid.edge_idx[e][1] < 0 ? 0 : digit[grid.edge_idx[e][1]];
        w *= tables[e][(ih - it + n) % n];
      }
      marg[digit[target]] += w;
      int i = 0;
      while (i < k && ++digit[i] == n) digit[i++] = 0;
      if (i == k) break;
    }
    std::vector<std::complex<double>> coef(n);
    for (int m = 0; m < n; ++m) {
      std::complex<double> c{0.0, 0.0};
      for (int i = 0; i < n; ++i)
        c += marg[i] * std::exp(std::complex<double>(0.0, -kTwoPi * m * i / n));
      coef[m] = c / double(n);
    }
    std::vector<double> bins(nbins, 0.0);
    for (int b = 0; b < nbins; ++b) {
      double a0 = kTwoPi * b / nbins, a1 = kTwoPi * (b + 1) / nbins;
      std::complex<double> mass = coef[0] * (a1 - a0);
      for (int m = 1; m < n; ++m) {
        int freq = m <= n / 2 ? m : m - n;  // signed frequency of the interpolant
        if (2 * m == n) continue;           // drop the unpaired Nyquist mode
        std::complex<double> im{0.0, double(freq)};
        mass += coef[m] * (std::exp(im * a1) - std::exp(im * a0)) / im;
      }
      bins[b] = mass.real();
    }
    double total = coef[0].real() * kTwoPi;
    for (double& x : bins) x /= total;
    return bins;
  };
  std::vector<double> prev;
  for (int n = std::max(cfg.quad_nodes, 2 * nbins); n <= cfg.quad_nodes_max; n *= 2) {
    auto cur = bins_at(n);
    if (!prev.empty()) {
      double diff = 0.0;
      for (int i = 0; i < nbins; ++i) diff = std::max(diff, std::abs(cur[i] - prev[i]));
      if (diff < cfg.quad_tol) return cur;
    }
    prev = std::move(cur);
  }
  throw std::runtime_error("uncertified quadrature in villain_theta_bins");
}

VillainOracleSampler::VillainOracleSampler(const LatticeGeometry& g, double beta)
    : g_(&g), beta_(beta) {
  for (int v = 0; v < g.num_vertices; ++v)
    if (v != g.root_vertex) free_.push_back(v);
  if (free_.size() > 4) throw std::invalid_argument("oracle sampler limited to tiny graphs");
}

Form VillainOracleSampler::sample(Rng& rng) const {
  // rejection from the uniform law on [0, 2 pi)^k with the exact density
  const double rho_max = wrapped_gauss_weight(0.0, beta_);
  const double bound = std::pow(rho_max, double(g_->num_edges));
  Form theta(*g_, 0);
  while (true) {
    for (int v : free_) theta[v] = rng.uniform() * kTwoPi;
    Form dtheta = d(theta);
    double w = 1.0;
    for (int e = 0; e < g_->num_edges; ++e) w *= wrapped_gauss_weight(dtheta[e], beta_);
    if (rng.uniform() * bound <= w) return theta;
  }
}

double free_energy_bound_exponent(int free_cells, double beta) {
  const double upper = 1.0 / beta;
  const double lower = std::min(0.02, 0.5 * upper);
  auto f = [](double u) { return error_function_M(1.0 / u) / u; };
  // adaptive Simpson
  struct Rec {
    static double go(const std::function<double(double)>& fn, double a, double b, double fa,
                     double fb, double fm, double tol, int depth) {
      double m = 0.5 * (a + b);
      double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      double flm = fn(lm), frm = fn(rm);
      double s1 = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
      double s2 = (b - a) / 12.0 * (fa + 4.0 * flm + 2.0 * fm + 4.0 * frm + fb);
      if (depth > 30 || std::abs(s2 - s1) < tol) return s2 + (s2 - s1) / 15.0;
      return go(fn, a, m, fa, fm, flm, tol / 2, depth + 1) +
             go(fn, m, b, fm, fb, frm, tol / 2, depth + 1);
    }
  };
  std::function<double(double)> fn = f;
  double fa = f(lower), fb = f(upper), fm = f(0.5 * (lower + upper));
  double integral = Rec::go(fn, lower, upper, fa, fb, fm, 1e-14, 0);
  // u < lower tail: M(1/u) <= 3 (2pi)^2 / u exp(-(2pi)^2/(2u))
  integral += 6.0 * std::exp(-0.5 * kTwoPiSq / lower);
  return std::exp(0.5 * double(free_cells) * integral);
}

}  // namespace coulvil
