#include "coulvil/transforms.hpp"

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

// lap^-1 d* n_q computed as d* lap^-1 on the 0-form side.
Form vortex_potential(const IntForm& n_q) {
  const Operators& ops = ops_for(*n_q.geom);
  return ops.solve_poisson(dstar(to_real(n_q)));
}

void check_same_complex(const LatticeGeometry& a, const LatticeGeometry& b) {
  if (a.structural_hash != b.structural_hash)
    throw std::invalid_argument("reroot: geometries differ structurally");
}
}  // namespace

DecoupledPair decouple(const VillainState& state) {
  const auto& g = *state.theta.geom;
  const Operators& ops = ops_for(g);
  IntForm q = d(state.m);
  IntForm n_q = ops.integer_primitive(q);
  IntForm rest = state.m;
  rest.values -= n_q.values;
  IntForm psi = ops.scalar_primitive(rest);
  Form u = vortex_potential(n_q);
  Form phi(g, 0);
  phi.values = state.theta.values + kTwoPi * psi.values.cast<double>() + kTwoPi * u.values;
  phi.enforce_root();
  return {std::move(phi), std::move(q)};
}

VillainState recouple(const DecoupledPair& pair) {
  const auto& g = *pair.phi.geom;
  const Operators& ops = ops_for(g);
  IntForm n_q = ops.integer_primitive(pair.q);
  Form u = vortex_potential(n_q);
  Form shifted(g, 0);
  shifted.values = pair.phi.values - kTwoPi * u.values;
  VillainState out = make_villain_state(g);
  IntForm floors(g, 0);
  for (int v = 0; v < g.num_vertices; ++v) {
    out.theta[v] = wrap_angle(shifted[v]);
    floors[v] = static_cast<int64_t>(std::floor(shifted[v] / kTwoPi));
  }
  out.theta.enforce_root();
  floors.enforce_root();  // shifted(v0) = 0 exactly, floor 0
  IntForm dfl = d(floors);
  out.m = n_q;
  out.m.values += dfl.values;
  return out;
}

IntForm recouple_m_gradient_form(const DecoupledPair& pair, const VillainState& reconstructed) {
  const auto& g = *pair.phi.geom;
  const Operators& ops = ops_for(g);
  IntForm n_q = ops.integer_primitive(pair.q);
  Form u = vortex_potential(n_q);
  Form shifted(g, 0);
  shifted.values = pair.phi.values - kTwoPi * u.values;
  Form grad = d(shifted);
  Form dtheta = d(reconstructed.theta);
  IntForm m(g, 1);
  for (int e = 0; e < g.num_edges; ++e)
    m[e] = n_q[e] + llround((grad[e] - dtheta[e]) / kTwoPi);
  return m;
}

double decoupled_energy(const DecoupledPair& pair) {
  const Operators& ops = ops_for(*pair.phi.geom);
  Form dphi = d(pair.phi);
  Form qr = to_real(pair.q);
  Form minus_q(*pair.q.geom, 2);
  minus_q.values = -qr.values;
  Form pot = ops.solve_poisson(minus_q);  // (-lap)^-1 q
  return inner(dphi, dphi) + kTwoPiSq * inner(qr, pot);
}

Form reroot_gff(const Form& phi, const LatticeGeometry& g_new) {
  check_same_complex(*phi.geom, g_new);
  if (phi.degree != 0) throw std::invalid_argument("reroot_gff: degree mismatch");
  Form out(g_new, 0);
  out.values = phi.values.array() - phi[g_new.root_vertex];
  out.enforce_root();
  return out;
}

IntForm reroot_ivgff(const IntForm& psi, const LatticeGeometry& g_new) {
  check_same_complex(*psi.geom, g_new);
  if (psi.degree != 0) throw std::invalid_argument("reroot_ivgff: degree mismatch");
  IntForm out(g_new, 0);
  out.values = psi.values.array() - psi[g_new.root_vertex];
  out.enforce_root();
  return out;
}

IntForm reroot_coulomb(const IntForm& q, const LatticeGeometry& g_new) {
  check_same_complex(*q.geom, g_new);
  int old_root = q.degree == 0 ? q.geom->root_vertex : q.geom->root_face;
  int new_root = q.degree == 0 ? g_new.root_vertex : g_new.root_face;
  IntForm out(g_new, q.degree);
  out.values = q.values;
  if (new_root != old_root) {
    int64_t total = q.values.sum();
    out[old_root] = -total;
    out[new_root] = 0;
  }
  return out;
}

VillainState reroot_villain(const VillainState& s, const LatticeGeometry& g_new) {
  check_same_complex(*s.theta.geom, g_new);
  const double shift = s.theta[g_new.root_vertex];
  VillainState out{Form(g_new, 0), IntForm(g_new, 1)};
  IntForm jumps(g_new, 0);
  for (int v = 0; v < g_new.num_vertices; ++v) {
    double t = s.theta[v] - shift;
    out.theta[v] = wrap_angle(t);
    jumps[v] = llround((out.theta[v] - t) / kTwoPi);  // 0 or +1
  }
  out.theta.enforce_root();
  jumps.enforce_root();
  // d theta'(e) = d theta(e) + 2 pi d jumps(e); keep d theta + 2 pi m fixed.
  IntForm dj = d(jumps);
  out.m.values = s.m.values - dj.values;
  return out;
}

}  // namespace coulvil
