#include "coulvil/samplers.hpp"

#include <algorithm>
#include <cmath>

namespace coulvil {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kTwoPiSq = 4.0 * M_PI * M_PI;

double wrap_angle(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

// sum_k exp(-(beta/2)((delta + 2 pi k)^2 - delta^2)) for |delta| <= pi; the
// k = 0 term is 1.  Terms decay monotonically in |k|, so the sum is cut when
// they drop below 1e-17.  Convex in delta.
double branch_ratio(double delta, double beta) {
  double s = 1.0;
  for (int k = 1; k <= 6; ++k) {
    double dk = 2.0 * M_PI * k;
    double t1 = std::exp(-0.5 * beta * (dk * dk + 2.0 * dk * delta));
    double t2 = std::exp(-0.5 * beta * (dk * dk - 2.0 * dk * delta));
    s += t1 + t2;
    if (t1 + t2 < 1e-17) break;
  }
  return s;
}

// One-exp upper bound of branch_ratio on |delta| <= pi, valid for
// beta >= 0.15 (validated in tests); below that the full sum is used.
// Convex in delta, so interval maxima sit at endpoints.
double branch_ratio_bound(double delta, double beta) {
  if (beta < 0.15) return branch_ratio(delta, beta);
  return 1.0 + 2.1 * std::exp(-kTwoPi * beta * (M_PI - std::abs(delta)));
}

struct Segment {
  double a, b;      // interval on the real line
  double mu, c;     // product-of-branches quadratic: (d beta/2)(y-mu)^2 + (beta/2) c
  double inflate;   // envelope factor covering non-nearest branches
  double weight;
};

}  // namespace

int default_burnin(const LatticeGeometry& g, double beta) {
  (void)beta;
  int n = std::max(1, g.n);
  return 100 * n;
}

VillainState make_villain_state(const LatticeGeometry& g) {
  return {Form(g, 0), IntForm(g, 1)};
}

double sample_villain_conditional(std::span<const double> nbrs, double beta, Rng& rng) {
  if (nbrs.empty()) return rng.uniform() * kTwoPi;
  if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
  const int d = static_cast<int>(nbrs.size());
  const double ref = nbrs[d - 1];
  const double L = std::sqrt(2.0 * 46.0 / beta);
  const double lo = ref - L, hi = ref + L;

  // Breakpoints: nearest-branch switches of the wrapped factors.
  thread_local std::vector<double> cuts;
  thread_local std::vector<Segment> segs;
  cuts.clear();
  segs.clear();
  cuts.push_back(lo);
  cuts.push_back(hi);
  for (int j = 0; j + 1 < d; ++j) {
    double base = nbrs[j] + M_PI;
    long kmin = static_cast<long>(std::ceil((lo - base) / kTwoPi));
    long kmax = static_cast<long>(std::floor((hi - base) / kTwoPi));
    for (long k = kmin; k <= kmax; ++k) cuts.push_back(base + kTwoPi * k);
  }
  std::sort(cuts.begin(), cuts.end());

  const double s = std::sqrt(0.5 * d * beta);
  double cmin = 1e300;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    Segment sg;
    sg.a = cuts[i];
    sg.b = cuts[i + 1];
    if (sg.b - sg.a < 1e-14) continue;
    double mid = 0.5 * (sg.a + sg.b);
    double sum = 0.0, sumsq = 0.0;
    for (int j = 0; j < d; ++j) {
      double c = (j + 1 == d) ? ref : nbrs[j] + kTwoPi * std::round((mid - nbrs[j]) / kTwoPi);
      sum += c;
      sumsq += c * c;
    }
    sg.mu = sum / d;
    sg.c = sumsq - double(d) * sg.mu * sg.mu;
    cmin = std::min(cmin, sg.c);
    segs.push_back(sg);
  }

  // Segments whose quadratic offset alone certifies relative mass below
  // e^{-50} are dropped before any exp/erf is spent on them.
  double total = 0.0;
  size_t kept = 0;
  for (size_t i = 0; i < segs.size(); ++i) {
    Segment sg = segs[i];
    if (0.5 * beta * (sg.c - cmin) > 50.0) continue;
    sg.inflate = 1.0;
    double mid = 0.5 * (sg.a + sg.b);
    for (int j = 0; j + 1 < d; ++j) {
      double c = nbrs[j] + kTwoPi * std::round((mid - nbrs[j]) / kTwoPi);
      sg.inflate *=
          std::max(branch_ratio_bound(sg.a - c, beta), branch_ratio_bound(sg.b - c, beta));
    }
    double mass = (std::erf(s * (sg.b - sg.mu)) - std::erf(s * (sg.a - sg.mu)));
    sg.weight = sg.inflate * std::exp(-0.5 * beta * (sg.c - cmin)) * mass;
    total += sg.weight;
    segs[kept++] = sg;
  }
  segs.resize(kept);

  while (true) {
    double u = rng.uniform() * total;
    size_t pick = segs.size() - 1;
    for (size_t i = 0; i < segs.size(); ++i) {
      u -= segs[i].weight;
      if (u < 0) { pick = i; break; }
    }
    const Segment& sg = segs[pick];
    double y;
    do {
      y = sg.mu + rng.normal() / (s * std::sqrt(2.0));
    } while (y < sg.a || y > sg.b);
    double ratio = 1.0;
    for (int j = 0; j + 1 < d; ++j) {
      double c = nbrs[j] + kTwoPi * std::round((0.5 * (sg.a + sg.b) - nbrs[j]) / kTwoPi);
      ratio *= branch_ratio(y - c, beta);
    }
    if (rng.uniform() * sg.inflate <= ratio) return wrap_angle(y);
  }
}

VillainSweeper::VillainSweeper(const LatticeGeometry& g, double beta) : g_(&g), beta_(beta) {
  if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
  off_.push_back(0);
  for (int v = 0; v < g.num_vertices; ++v) {
    for (const auto& inc : g.vertex_edges[v]) {
      const auto& ee = g.edge_endpoints[inc.cell];
      nbr_.push_back(ee[0] == v ? ee[1] : ee[0]);
    }
    off_.push_back(static_cast<int>(nbr_.size()));
  }
}

void VillainSweeper::sweep(Form& theta, Rng& rng) const {
  const int root = g_->root_vertex;
  std::vector<double> local;
  for (int v = 0; v < g_->num_vertices; ++v) {
    if (v == root) continue;
    local.clear();
    for (int i = off_[v]; i < off_[v + 1]; ++i) local.push_back(theta[nbr_[i]]);
    theta[v] = sample_villain_conditional(local, beta_, rng);
  }
}

VillainState villain_heat_bath_sweep(VillainState state, double beta, Rng& rng) {
  VillainSweeper sw(*state.theta.geom, beta);
  sw.sweep(state.theta, rng);
  return state;
}

IntForm sample_m_given_theta(const Form& theta, double beta, Rng& rng) {
  const auto& g = *theta.geom;
  Form dtheta = d(theta);
  IntForm m(g, 1);
  const double big_beta = kTwoPiSq * beta;
  for (int e = 0; e < g.num_edges; ++e)
    m[e] = ig_sample({-dtheta[e] / kTwoPi, big_beta}, rng);
  return m;
}

Form gff_sample(const LatticeGeometry& g, int degree, double beta, Rng& rng) {
  return ops_for(g).gaussian_free_field(degree, beta, rng);
}

std::pair<Form, Form> gff_pair_from_noise(const Form& W) {
  if (W.degree != 1) throw std::invalid_argument("white noise must be a 1-form");
  const Operators& ops = ops_for(*W.geom);
  Form phi = ops.solve_poisson(dstar(W));
  Form phit = ops.solve_poisson(d(W));
  return {phi, phit};
}

std::pair<Form, Form> gff_from_white_noise(const LatticeGeometry& g, double beta, Rng& rng) {
  if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
  Form W(g, 1);
  double sd = 1.0 / std::sqrt(beta);
  for (int e = 0; e < g.num_edges; ++e) W[e] = sd * rng.normal();
  return gff_pair_from_noise(W);
}

IvHeatBath::IvHeatBath(const LatticeGeometry& g, int degree, double inv_temp_u)
    : g_(&g), degree_(degree), u_(inv_temp_u) {
  if (!(inv_temp_u > 0)) throw std::invalid_argument("inverse temperature must be positive");
  if (degree != 0 && degree != 2) throw std::invalid_argument("IV-GFF lives on degree 0 or 2");
  root_ = degree == 0 ? g.root_vertex : g.root_face;
  off_.push_back(0);
  int n = g.cell_count(degree);
  for (int c = 0; c < n; ++c) {
    if (degree == 0) {
      for (const auto& inc : g.vertex_edges[c]) {
        const auto& ee = g.edge_endpoints[inc.cell];
        nbr_.push_back(ee[0] == c ? ee[1] : ee[0]);
      }
    } else {
      for (const auto& inc : g.face_edges[c]) {
        const auto& ef = g.edge_faces[inc.cell];
        nbr_.push_back(ef[0].cell == c ? ef[1].cell : ef[0].cell);
      }
    }
    off_.push_back(static_cast<int>(nbr_.size()));
  }
}

IVState IvHeatBath::make_state() const { return {IntForm(*g_, degree_)}; }

const IvHeatBath::Table& IvHeatBath::table_for(int deg, int64_t residue) const {
  auto key = std::make_pair(deg, residue);
  auto it = tables_.find(key);
  if (it != tables_.end()) return it->second;

  Table t;
  double big = u_ * double(deg);  // IG inverse temperature
  double a = double(residue) / double(deg);
  int64_t j0 = llround(a);
  int J = std::max(3, static_cast<int>(std::ceil(std::sqrt(2.0 * 45.0 / big))) + 2);
  t.j_min = j0 - J;
  double s = 0.0;
  for (int64_t jj = j0 - J; jj <= j0 + J; ++jj) {
    double dk = double(jj) - a;
    s += std::exp(-0.5 * big * (dk * dk - (double(j0) - a) * (double(j0) - a)));
    t.cum.push_back(s);
  }
  double r = double(J) + 0.5;
  double rho = std::exp(-big * (r + 0.5));
  t.tail = 2.0 * std::exp(-0.5 * big * (r * r - 0.25)) / std::max(1e-300, 1.0 - rho);
  t.total = s;
  return tables_.emplace(key, std::move(t)).first->second;
}

void IvHeatBath::sweep(IntForm& psi, Rng& rng) const {
  int n = g_->cell_count(degree_);
  for (int c = 0; c < n; ++c) {
    if (c == root_) continue;
    int deg = off_[c + 1] - off_[c];
    int64_t sum = 0;
    for (int i = off_[c]; i < off_[c + 1]; ++i) sum += psi[nbr_[i]];
    // split sum = q * deg + residue, residue in [0, deg)
    int64_t q = sum >= 0 ? sum / deg : -((-sum + deg - 1) / deg);
    int64_t residue = sum - q * deg;
    const Table& t = table_for(deg, residue);
    while (true) {
      double u = rng.uniform() * (t.total + t.tail);
      auto it = std::lower_bound(t.cum.begin(), t.cum.end(), u);
      if (it == t.cum.end()) continue;  // certified residual: resample
      psi[c] = q + t.j_min + (it - t.cum.begin());
      break;
    }
  }
}

IVState ivgff_heat_bath_sweep(IVState state, double inv_temp_u, Rng& rng) {
  IvHeatBath hb(*state.psi.geom, state.psi.degree, inv_temp_u);
  hb.sweep(state.psi, rng);
  return state;
}

LocalCoulombChain::LocalCoulombChain(const LatticeGeometry& g, double beta, const ChainConfig& cfg)
    : g_(&g),
      beta_(beta),
      cfg_(cfg),
      sweeper_(g, beta),
      state_(make_villain_state(g)),
      q_(g, 2),
      rng_(cfg.seed) {}

const IntForm& LocalCoulombChain::next() {
  if (!burned_) {
    int burn = cfg_.burnin_sweeps >= 0 ? cfg_.burnin_sweeps : default_burnin(*g_, beta_);
    for (int i = 0; i < burn; ++i) sweeper_.sweep(state_.theta, rng_);
    burned_ = true;
  }
  for (int i = 0; i < std::max(1, cfg_.sweeps); ++i) sweeper_.sweep(state_.theta, rng_);
  state_.m = sample_m_given_theta(state_.theta, beta_, rng_);
  q_ = d(state_.m);
  return q_;
}

CoulombState coulomb_sample_local(const LatticeGeometry& g, double beta, const ChainConfig& cfg) {
  LocalCoulombChain chain(g, beta, cfg);
  return {chain.next()};
}

CoulombMetropolisChain::CoulombMetropolisChain(const LatticeGeometry& g, double beta,
                                               uint64_t seed, int degree)
    : g_(&g), beta_(beta), degree_(degree), q_(g, degree), rng_(seed) {
  const Operators& ops = ops_for(g);
  green_ = ops.dense_green(degree, 5000);
  free_cells_ = ops.free_cells(degree);
  free_count_ = static_cast<int>(free_cells_.size());
  to_free_.assign(g.cell_count(degree), -1);
  for (int i = 0; i < free_count_; ++i) to_free_[free_cells_[i]] = i;
  pot_ = Eigen::VectorXd::Zero(free_count_);
}

void CoulombMetropolisChain::step() {
  ++proposals_;
  int i = static_cast<int>(rng_.below(free_count_));
  int sgn = rng_.uniform() < 0.5 ? 1 : -1;
  double dE = kTwoPiSq * beta_ * (sgn * pot_[i] + 0.5 * green_(i, i));
  if (dE <= 0 || rng_.uniform() < std::exp(-dE)) {
    ++accepts_;
    q_[free_cells_[i]] += sgn;
    pot_ += double(sgn) * green_.col(i);
    energy_ += dE;
  }
}

double CoulombMetropolisChain::potential_at(int cell) const {
  int i = to_free_[cell];
  return i < 0 ? 0.0 : pot_[i];
}

double CoulombMetropolisChain::recomputed_energy() const {
  Eigen::VectorXd qv(free_count_);
  for (int i = 0; i < free_count_; ++i) qv[i] = double(q_[free_cells_[i]]);
  return 0.5 * kTwoPiSq * beta_ * qv.dot(green_ * qv);
}

double villain_coupling_energy(const VillainState& s) {
  Form dtheta = d(s.theta);
  double e = 0.0;
  for (int i = 0; i < dtheta.size(); ++i) {
    double t = dtheta[i] + kTwoPi * double(s.m[i]);
    e += t * t;
  }
  return e;
}

}  // namespace coulvil
