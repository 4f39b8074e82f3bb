#include "coulvil/calculus.hpp"

#include <cmath>
#include <deque>
#include <sstream>

namespace coulvil {

Operators::Operators(const LatticeGeometry& g) : g_(&g) {}

int Operators::root_cell(int degree) const {
  if (degree == 0) return g_->root_vertex;
  if (degree == 2) return g_->root_face;
  return -1;
}

int Operators::free_count(int degree) const {
  return g_->cell_count(degree) - (degree == 1 ? 0 : 1);
}

const std::vector<int>& Operators::free_cells(int degree) const {
  return degree_data(degree).free;
}

const Operators::DegreeData& Operators::degree_data(int degree) const {
  if (degree < 0 || degree > 2) throw std::invalid_argument("degree must be 0, 1 or 2");
  std::lock_guard<std::mutex> lock(mu_);
  DegreeData& dd = deg_[degree];
  if (dd.ready) return dd;

  const auto& g = *g_;
  int n = g.cell_count(degree);
  int root = root_cell(degree);
  dd.to_free.assign(n, -1);
  for (int c = 0; c < n; ++c) {
    if (c == root) continue;
    dd.to_free[c] = static_cast<int>(dd.free.size());
    dd.free.push_back(c);
  }
  int m = static_cast<int>(dd.free.size());

  std::vector<Eigen::Triplet<double>> trips;
  auto add = [&](int a, int b, double v) {
    int ia = dd.to_free[a], ib = dd.to_free[b];
    if (ia >= 0 && ib >= 0) trips.emplace_back(ia, ib, v);
  };
  if (degree == 0) {
    for (int e = 0; e < g.num_edges; ++e) {
      int t = g.edge_endpoints[e][0], h = g.edge_endpoints[e][1];
      add(t, t, 1.0); add(h, h, 1.0); add(t, h, -1.0); add(h, t, -1.0);
    }
  } else if (degree == 2) {
    for (int e = 0; e < g.num_edges; ++e) {
      int f1 = g.edge_faces[e][0].cell, f2 = g.edge_faces[e][1].cell;
      add(f1, f1, 1.0); add(f2, f2, 1.0); add(f1, f2, -1.0); add(f2, f1, -1.0);
    }
  } else {
    // -lap_1 = d0 gate(v0) d0^t + d1^t gate(f0) d1
    SpMat d0(g.num_edges, g.num_vertices), d1(g.num_faces, g.num_edges);
    std::vector<Eigen::Triplet<double>> t0, t1;
    for (int e = 0; e < g.num_edges; ++e) {
      t0.emplace_back(e, g.edge_endpoints[e][1], 1.0);
      t0.emplace_back(e, g.edge_endpoints[e][0], -1.0);
    }
    for (int f = 0; f < g.num_faces; ++f) {
      if (f == g.root_face) continue;
      for (const auto& inc : g.face_edges[f]) t1.emplace_back(f, inc.cell, double(inc.sign));
    }
    d0.setFromTriplets(t0.begin(), t0.end());
    d1.setFromTriplets(t1.begin(), t1.end());
    Eigen::VectorXd gate = Eigen::VectorXd::Ones(g.num_vertices);
    gate[g.root_vertex] = 0.0;
    SpMat a = d0 * gate.asDiagonal() * SpMat(d0.transpose());
    SpMat b = SpMat(d1.transpose()) * d1;
    dd.neg_lap = a + b;
    dd.ldlt.compute(dd.neg_lap);
    if (dd.ldlt.info() != Eigen::Success) throw std::runtime_error("laplacian factorization failed");
    dd.ready = true;
    return dd;
  }
  dd.neg_lap.resize(m, m);
  dd.neg_lap.setFromTriplets(trips.begin(), trips.end());
  dd.ldlt.compute(dd.neg_lap);
  if (dd.ldlt.info() != Eigen::Success) throw std::runtime_error("laplacian factorization failed");
  dd.ready = true;
  return dd;
}

Eigen::VectorXd Operators::solve_reduced(int degree, const Eigen::VectorXd& rhs) const {
  const DegreeData& dd = degree_data(degree);
  Eigen::VectorXd x = dd.ldlt.solve(rhs);
  if (dd.ldlt.info() != Eigen::Success) throw std::runtime_error("poisson solve failed");
  return x;
}

Form Operators::solve_poisson(const Form& f) const {
  if (f.geom->hash != g_->hash) throw std::invalid_argument("solve_poisson: geometry mismatch");
  const DegreeData& dd = degree_data(f.degree);
  Eigen::VectorXd rhs;
  if (f.degree == 1) {
    rhs = -f.values;
  } else {
    rhs.resize(dd.free.size());
    for (size_t i = 0; i < dd.free.size(); ++i) rhs[i] = -f.values[dd.free[i]];
  }
  Eigen::VectorXd x = solve_reduced(f.degree, rhs);
  Form u(*g_, f.degree);
  if (f.degree == 1) {
    u.values = x;
  } else {
    for (size_t i = 0; i < dd.free.size(); ++i) u.values[dd.free[i]] = x[i];
  }
  double fmax = f.values.cwiseAbs().maxCoeff();
  if (fmax > 0) {
    Form r = laplacian(u);
    double res = (r.values - f.values).cwiseAbs().maxCoeff();
    if (res > 1e-10 * fmax) {
      std::ostringstream os;
      os << "poisson solve did not converge: residual " << res << " for ||f|| " << fmax;
      throw std::runtime_error(os.str());
    }
  }
  return u;
}

Form Operators::green_column(int degree, int b) const {
  if (degree != 0 && degree != 2) throw std::invalid_argument("green: degree must be 0 or 2");
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = green_cache_.find(degree * (int64_t(1) << 33) + b);
    if (it != green_cache_.end()) return it->second;
  }
  Form rhs(*g_, degree);
  if (b != root_cell(degree)) rhs[b] = -1.0;
  Form u = solve_poisson(rhs);
  {
    std::lock_guard<std::mutex> lock(mu_);
    green_cache_.emplace(degree * (int64_t(1) << 33) + b, u);
  }
  return u;
}

double Operators::green(int degree, int a, int b) const {
  if (a == root_cell(degree) || b == root_cell(degree)) return 0.0;
  return green_column(degree, b)[a];
}

Form Operators::gaussian_free_field(int degree, double beta, Rng& rng) const {
  if (degree != 0 && degree != 2) throw std::invalid_argument("gff: degree must be 0 or 2");
  if (beta <= 0) throw std::invalid_argument("gff: beta must be positive");
  const DegreeData& dd = degree_data(degree);
  int m = static_cast<int>(dd.free.size());
  Eigen::VectorXd z(m);
  for (int i = 0; i < m; ++i) z[i] = rng.normal();
  Eigen::VectorXd dvec = dd.ldlt.vectorD();
  Eigen::VectorXd w = z.array() / dvec.array().sqrt();
  Eigen::VectorXd y = dd.ldlt.matrixU().solve(w);
  Eigen::VectorXd x = (dd.ldlt.permutationPinv() * y) / std::sqrt(beta);
  Form out(*g_, degree);
  for (int i = 0; i < m; ++i) out.values[dd.free[i]] = x[i];
  return out;
}

double Operators::logdet_neg_laplacian(int degree) const {
  const DegreeData& dd = degree_data(degree);
  return dd.ldlt.vectorD().array().log().sum();
}

const Operators::TreeData& Operators::trees() const {
  std::lock_guard<std::mutex> lock(mu_);
  if (trees_.ready) return trees_;
  const auto& g = *g_;

  trees_.parent_edge.assign(g.num_faces, -1);
  trees_.parent_sign.assign(g.num_faces, 0);
  std::vector<char> seen(g.num_faces, 0);
  std::deque<int> queue{g.root_face};
  seen[g.root_face] = 1;
  while (!queue.empty()) {
    int f = queue.front();
    queue.pop_front();
    trees_.face_order.push_back(f);
    for (const auto& inc : g.face_edges[f]) {
      const auto& ef = g.edge_faces[inc.cell];
      int other = ef[0].cell == f ? ef[1].cell : ef[0].cell;
      if (ef[0].cell == f && ef[1].cell == f) continue;  // bigon against itself
      if (seen[other]) continue;
      seen[other] = 1;
      trees_.parent_edge[other] = inc.cell;
      int s = ef[0].cell == other ? ef[0].sign : ef[1].sign;
      trees_.parent_sign[other] = s;
      queue.push_back(other);
    }
  }

  trees_.vparent_edge.assign(g.num_vertices, -1);
  std::vector<char> vseen(g.num_vertices, 0);
  std::deque<int> vq{g.root_vertex};
  vseen[g.root_vertex] = 1;
  while (!vq.empty()) {
    int v = vq.front();
    vq.pop_front();
    trees_.vertex_order.push_back(v);
    for (const auto& inc : g.vertex_edges[v]) {
      const auto& ee = g.edge_endpoints[inc.cell];
      int other = ee[0] == v ? ee[1] : ee[0];
      if (vseen[other]) continue;
      vseen[other] = 1;
      trees_.vparent_edge[other] = inc.cell;
      vq.push_back(other);
    }
  }
  trees_.ready = true;
  return trees_;
}

IntForm Operators::integer_primitive(const IntForm& q) const {
  if (q.degree != 2) throw std::invalid_argument("integer_primitive: expects a 2-form");
  if (q.geom->hash != g_->hash) throw std::invalid_argument("integer_primitive: geometry mismatch");
  const auto& g = *g_;
  const TreeData& t = trees();
  IntForm n(g, 1);
  // Deepest faces first: when a face is processed its boundary holds already
  // assigned child edges plus zeros, and its own parent edge closes the sum.
  for (auto it = t.face_order.rbegin(); it != t.face_order.rend(); ++it) {
    int f = *it;
    if (f == g.root_face) continue;
    int64_t cur = 0;
    for (const auto& inc : g.face_edges[f]) cur += inc.sign * n[inc.cell];
    n[t.parent_edge[f]] += t.parent_sign[f] * (q[f] - cur);
  }
  return n;
}

IntForm Operators::scalar_primitive(const IntForm& h) const {
  if (h.degree != 1) throw std::invalid_argument("scalar_primitive: expects a 1-form");
  IntForm dh = d(h);
  for (int f = 0; f < g_->num_faces; ++f)
    if (dh[f] != 0) {
      std::ostringstream os;
      os << "scalar_primitive: input not closed at face " << f;
      throw std::invalid_argument(os.str());
    }
  const TreeData& t = trees();
  IntForm psi(*g_, 0);
  for (int v : t.vertex_order) {
    int e = t.vparent_edge[v];
    if (e < 0) continue;
    const auto& ee = g_->edge_endpoints[e];
    if (ee[1] == v) psi[v] = psi[ee[0]] + h[e];
    else psi[v] = psi[ee[1]] - h[e];
  }
  return psi;
}

Form Operators::scalar_primitive(const Form& h, double tol) const {
  if (h.degree != 1) throw std::invalid_argument("scalar_primitive: expects a 1-form");
  Form dh = d(h);
  for (int f = 0; f < g_->num_faces; ++f)
    if (std::abs(dh[f]) > tol) {
      std::ostringstream os;
      os << "scalar_primitive: input not closed at face " << f << " (|dh| = " << std::abs(dh[f]) << ")";
      throw std::invalid_argument(os.str());
    }
  const TreeData& t = trees();
  Form psi(*g_, 0);
  for (int v : t.vertex_order) {
    int e = t.vparent_edge[v];
    if (e < 0) continue;
    const auto& ee = g_->edge_endpoints[e];
    if (ee[1] == v) psi[v] = psi[ee[0]] + h[e];
    else psi[v] = psi[ee[1]] - h[e];
  }
  return psi;
}

Eigen::MatrixXd Operators::dense_green(int degree, int max_cells) const {
  const DegreeData& dd = degree_data(degree);
  int m = static_cast<int>(dd.free.size());
  if (m > max_cells) {
    std::ostringstream os;
    os << "dense Green storage limit: " << m << " free cells > " << max_cells;
    throw std::invalid_argument(os.str());
  }
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(m, m);
  return dd.ldlt.solve(id);
}

Eigen::MatrixXd Operators::dense_neg_laplacian(int degree, int max_cells) const {
  const DegreeData& dd = degree_data(degree);
  int m = static_cast<int>(dd.free.size());
  if (m > max_cells) throw std::invalid_argument("dense Laplacian storage limit exceeded");
  return Eigen::MatrixXd(dd.neg_lap);
}

namespace {
struct OpsRegistry {
  std::mutex mu;
  struct Entry {
    LatticeGeometry g;
    std::unique_ptr<Operators> ops;
  };
  std::unordered_map<uint64_t, std::unique_ptr<Entry>> map;
};
OpsRegistry& registry() {
  static OpsRegistry* r = new OpsRegistry;
  return *r;
}
}  // namespace

const Operators& ops_for(const LatticeGeometry& g) {
  auto& r = registry();
  std::lock_guard<std::mutex> lock(r.mu);
  auto it = r.map.find(g.hash);
  if (it == r.map.end()) {
    auto entry = std::make_unique<OpsRegistry::Entry>();
    entry->g = g;
    entry->ops = std::make_unique<Operators>(entry->g);
    it = r.map.emplace(g.hash, std::move(entry)).first;
  }
  return *it->second->ops;
}

Form solve_poisson(const LatticeGeometry& g, const Form& f) { return ops_for(g).solve_poisson(f); }

double green(const LatticeGeometry& g, int degree, int a, int b) {
  return ops_for(g).green(degree, a, b);
}

std::pair<Form, double> harmonic_two_point(int R) {
  if (R < 2) throw std::invalid_argument("harmonic_two_point: R must be >= 2");
  LatticeGeometry g0 = build_lattice(R, BoundaryCondition::Zero);
  int origin = vertex_index(g0, 0, 0);
  LatticeGeometry g = with_roots(g0, origin, g0.root_face);
  const Operators& ops = ops_for(g);
  int one = vertex_index(ops.geometry(), 1, 0);
  Form col = ops.green_column(0, one);
  double g11 = col[one];
  Form fhat = col;
  fhat.values /= g11;
  double energy = inner(d(fhat), d(fhat));
  return {fhat, energy};
}

}  // namespace coulvil
