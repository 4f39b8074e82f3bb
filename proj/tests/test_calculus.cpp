#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <algorithm>

#include "coulvil/calculus.hpp"
#include "coulvil/rng.hpp"

using namespace coulvil;

namespace {

Form random_form(const LatticeGeometry& g, int degree, Rng& rng) {
  Form f(g, degree);
  for (int i = 0; i < f.size(); ++i) f[i] = rng.normal();
  f.enforce_root();
  return f;
}

IntForm random_int_form(const LatticeGeometry& g, int degree, Rng& rng, int spread = 3) {
  IntForm f(g, degree);
  for (int i = 0; i < f.size(); ++i)
    f[i] = static_cast<int64_t>(rng.below(2 * spread + 1)) - spread;
  f.enforce_root();
  return f;
}

double max_abs(const Form& f) { return f.values.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("d basics") {
  auto g = build_lattice(1, BoundaryCondition::Free);
  Form zero(g, 0);
  CHECK(max_abs(d(zero)) == 0.0);

  Form w(g, 0);
  int v = vertex_index(g, 1, 0);
  w[v] = 1.0;
  Form dw = d(w);
  int nonzero = 0;
  for (int e = 0; e < g.num_edges; ++e) {
    if (dw[e] != 0.0) {
      ++nonzero;
      CHECK(std::abs(dw[e]) == 1.0);
      bool incident = g.edge_endpoints[e][0] == v || g.edge_endpoints[e][1] == v;
      CHECK(incident);
    }
  }
  CHECK(nonzero == g.vertex_degree(v));
}

TEST_CASE("d compose d is zero, integer exact") {
  auto g = build_lattice(2, BoundaryCondition::Free);
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    IntForm w = random_int_form(g, 0, rng);
    IntForm ddw = d(d(w));
    CHECK(ddw.values.cwiseAbs().maxCoeff() == 0);
  }
  for (int trial = 0; trial < 20; ++trial) {
    IntForm q = random_int_form(g, 2, rng);
    IntForm dsds = dstar(dstar(q));
    CHECK(dsds.values.cwiseAbs().maxCoeff() == 0);
  }
}

TEST_CASE("degree errors") {
  auto g = build_lattice(1, BoundaryCondition::Free);
  Form g2(g, 2), w(g, 0);
  CHECK_THROWS_WITH_AS(d(g2), "d: top degree", std::invalid_argument);
  CHECK_THROWS_WITH_AS(dstar(w), "dstar: bottom degree", std::invalid_argument);
}

TEST_CASE("adjointness and orthogonality") {
  for (auto bc : {BoundaryCondition::Free, BoundaryCondition::Zero}) {
    auto g = build_lattice(2, bc);
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      Form w = random_form(g, 0, rng);
      Form h = random_form(g, 1, rng);
      CHECK(std::abs(inner(d(w), h) + inner(w, dstar(h))) < 1e-11);
      Form q = random_form(g, 2, rng);
      CHECK(std::abs(inner(d(h), q) + inner(h, dstar(q))) < 1e-11);
      CHECK(std::abs(inner(d(w), dstar(q))) < 1e-11);
    }
  }
}

TEST_CASE("path indicator divergence") {
  auto g = build_lattice(2, BoundaryCondition::Free);
  std::vector<int> path = {vertex_index(g, -1, -1), vertex_index(g, 0, -1), vertex_index(g, 1, -1),
                           vertex_index(g, 1, 0), vertex_index(g, 1, 1)};
  IntForm e_gamma = path_indicator(g, path);
  IntForm div = dstar(e_gamma);
  for (int v = 0; v < g.num_vertices; ++v) {
    int64_t expect = 0;
    if (v == path.front()) expect = 1;
    if (v == path.back()) expect = -1;
    CHECK(div[v] == expect);
  }
}

TEST_CASE("laplacian stencil and symmetry") {
  auto g = build_lattice(2, BoundaryCondition::Free);
  Rng rng(3);
  Form w = random_form(g, 0, rng);
  Form lw = laplacian(w);
  int v = vertex_index(g, 1, 1);  // interior, not the root
  double stencil = 0.0;
  for (const auto& inc : g.vertex_edges[v]) {
    const auto& ee = g.edge_endpoints[inc.cell];
    int other = ee[0] == v ? ee[1] : ee[0];
    stencil += w[other] - w[v];
  }
  CHECK(lw[v] == doctest::Approx(stencil).epsilon(1e-12));

  for (int trial = 0; trial < 10; ++trial) {
    Form a = random_form(g, 0, rng), b = random_form(g, 0, rng);
    CHECK(std::abs(inner(laplacian(a), b) - inner(a, laplacian(b))) < 1e-11);
  }
}

TEST_CASE("laplacian commutes with d and dstar") {
  auto g = build_lattice(2, BoundaryCondition::Zero);
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    Form w = random_form(g, 0, rng);
    Form lhs = laplacian(d(w));
    Form rhs = d(laplacian(w));
    CHECK((lhs.values - rhs.values).cwiseAbs().maxCoeff() < 1e-10);
    Form q = random_form(g, 2, rng);
    Form lhs2 = laplacian(dstar(q));
    Form rhs2 = dstar(laplacian(q));
    CHECK((lhs2.values - rhs2.values).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("negative definiteness on the smallest lattice") {
  auto g = build_lattice(1, BoundaryCondition::Free);
  const Operators& ops = ops_for(g);
  for (int degree : {0, 1, 2}) {
    Eigen::MatrixXd neg = ops.dense_neg_laplacian(degree);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(neg);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
  CHECK(ops.dense_neg_laplacian(0).rows() == 8);
}

TEST_CASE("poisson solve round trips") {
  for (auto bc : {BoundaryCondition::Free, BoundaryCondition::Zero}) {
    auto g = build_lattice(8, bc);
    const Operators& ops = ops_for(g);
    Rng rng(13);
    Form zero(ops.geometry(), 0);
    CHECK(max_abs(ops.solve_poisson(zero)) == 0.0);
    for (int degree : {0, 1, 2}) {
      Form f = random_form(ops.geometry(), degree, rng);
      Form u = ops.solve_poisson(f);
      CHECK((laplacian(u).values - f.values).cwiseAbs().maxCoeff() < 1e-10 * max_abs(f));
      Form back = ops.solve_poisson(laplacian(u));
      CHECK((back.values - u.values).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("green function basics") {
  auto g = build_lattice(3, BoundaryCondition::Free);
  const Operators& ops = ops_for(g);
  int v0 = g.root_vertex;
  for (int b = 0; b < g.num_vertices; b += 5) CHECK(ops.green(0, v0, b) == 0.0);
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    int a = static_cast<int>(rng.below(g.num_vertices));
    int b = static_cast<int>(rng.below(g.num_vertices));
    CHECK(ops.green(0, a, b) == doctest::Approx(ops.green(0, b, a)).epsilon(1e-10));
  }
  CHECK(ops.green(0, vertex_index(g, 1, 0), vertex_index(g, 1, 0)) > 0.0);
}

TEST_CASE("integer primitive") {
  auto g = build_lattice(3, BoundaryCondition::Free);
  const Operators& ops = ops_for(g);
  Rng rng(23);
  IntForm zero(g, 2);
  CHECK(ops.integer_primitive(zero).values.cwiseAbs().maxCoeff() == 0);
  for (int trial = 0; trial < 50; ++trial) {
    IntForm q = random_int_form(g, 2, rng);
    IntForm n_q = ops.integer_primitive(q);
    IntForm dq = d(n_q);
    CHECK((dq.values - q.values).cwiseAbs().maxCoeff() == 0);
  }
  // n_{dm} differs from m by a closed integer 1-form
  for (int trial = 0; trial < 10; ++trial) {
    IntForm m = random_int_form(g, 1, rng);
    IntForm n_q = ops.integer_primitive(d(m));
    IntForm diff(g, 1);
    diff.values = m.values - n_q.values;
    CHECK(d(diff).values.cwiseAbs().maxCoeff() == 0);
  }
}

TEST_CASE("scalar primitive") {
  auto g = build_lattice(3, BoundaryCondition::Zero);
  const Operators& ops = ops_for(g);
  Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    IntForm w = random_int_form(g, 0, rng);
    IntForm psi = ops.scalar_primitive(d(w));
    CHECK((psi.values - w.values).cwiseAbs().maxCoeff() == 0);  // uniqueness
  }
  for (int trial = 0; trial < 10; ++trial) {
    IntForm m = random_int_form(g, 1, rng);
    IntForm n_q = ops.integer_primitive(d(m));
    IntForm closed(g, 1);
    closed.values = m.values - n_q.values;
    IntForm psi = ops.scalar_primitive(closed);
    CHECK((d(psi).values - closed.values).cwiseAbs().maxCoeff() == 0);
  }
  IntForm bad(g, 1);
  bad[0] = 1;  // a single nonzero edge is never closed here
  CHECK_THROWS_WITH_AS(ops.scalar_primitive(bad), doctest::Contains("not closed at face"),
                       std::invalid_argument);
}

TEST_CASE("real scalar primitive tolerance") {
  auto g = build_lattice(2, BoundaryCondition::Free);
  const Operators& ops = ops_for(g);
  Rng rng(31);
  Form w = random_form(g, 0, rng);
  Form psi = ops.scalar_primitive(d(w));
  CHECK((psi.values - w.values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("harmonic two point extension") {
  auto [fhat, energy] = harmonic_two_point(8);
  const auto& g = *fhat.geom;
  CHECK(fhat[vertex_index(g, 0, 0)] == 0.0);
  CHECK(fhat[vertex_index(g, 1, 0)] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(energy >= 1.0);
  CHECK(energy == doctest::Approx(inner(d(fhat), d(fhat))).epsilon(1e-10));
  Form lap = laplacian(fhat);
  for (int v = 0; v < g.num_vertices; ++v) {
    if (v == vertex_index(g, 0, 0) || v == vertex_index(g, 1, 0)) continue;
    CHECK(std::abs(lap[v]) < 1e-9);  // harmonic away from the marked pair
  }
  auto [fhat16, energy16] = harmonic_two_point(16);
  (void)fhat16;
  CHECK(std::abs(energy16 - 2.0) < std::abs(energy - 2.0) + 0.02);
}

TEST_CASE("green asymptotics at moderate size") {
  double c16 = 0.0, c32 = 0.0;
  {
    auto g = build_lattice(16, BoundaryCondition::Zero);
    const Operators& ops = ops_for(g);
    int v = vertex_index(ops.geometry(), 0, 0);
    c16 = ops.green(0, v, v) - std::log(16.0) / (2.0 * M_PI);
  }
  {
    auto g = build_lattice(32, BoundaryCondition::Zero);
    const Operators& ops = ops_for(g);
    int v = vertex_index(ops.geometry(), 0, 0);
    c32 = ops.green(0, v, v) - std::log(32.0) / (2.0 * M_PI);
  }
  CHECK(std::abs(c16 - c32) < 0.05);
}

TEST_CASE("free bc diagonal green growth") {
  auto g = build_lattice(64, BoundaryCondition::Free);
  const Operators& ops = ops_for(g);
  std::vector<double> dev;
  for (int x : {4, 8, 16, 32}) {
    int v = vertex_index(ops.geometry(), x, 0);
    dev.push_back(ops.green(0, v, v) - std::log(double(x)) / M_PI);
  }
  double lo = *std::min_element(dev.begin(), dev.end());
  double hi = *std::max_element(dev.begin(), dev.end());
  CHECK(hi - lo < 0.1);
}
