#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "coulvil/lattice.hpp"

namespace coulvil {

// A k-form: values over the cells of one degree.  0-forms vanish at v0 and
// 2-forms at f0; 1-form values are stored on the oriented representative edge
// and negate on the reversed edge.
template <typename Scalar>
struct FormT {
  int degree = 0;
  const LatticeGeometry* geom = nullptr;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;

  FormT() = default;
  FormT(const LatticeGeometry& g, int deg)
      : degree(deg), geom(&g), values(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(g.cell_count(deg))) {}

  Scalar operator[](int cell) const { return values[cell]; }
  Scalar& operator[](int cell) { return values[cell]; }
  int size() const { return static_cast<int>(values.size()); }

  // Re-pins the root slot after arithmetic on the raw value vector.
  void enforce_root() {
    if (degree == 0) values[geom->root_vertex] = Scalar(0);
    if (degree == 2) values[geom->root_face] = Scalar(0);
  }
};

using Form = FormT<double>;
using IntForm = FormT<int64_t>;

namespace detail {
template <typename S>
void check_rooted(const FormT<S>& f) {
  if (!f.geom) throw std::invalid_argument("form has no geometry");
  if (f.degree == 0 && f.values[f.geom->root_vertex] != S(0))
    throw std::invalid_argument("0-form must vanish at the root vertex");
  if (f.degree == 2 && f.values[f.geom->root_face] != S(0))
    throw std::invalid_argument("2-form must vanish at the root face");
}
}  // namespace detail

// Exterior derivative.  Throws on degree-2 input ("top degree").
template <typename S>
FormT<S> d(const FormT<S>& f) {
  detail::check_rooted(f);
  const auto& g = *f.geom;
  if (f.degree == 0) {
    FormT<S> out(g, 1);
    for (int e = 0; e < g.num_edges; ++e)
      out[e] = f[g.edge_endpoints[e][1]] - f[g.edge_endpoints[e][0]];
    return out;
  }
  if (f.degree == 1) {
    FormT<S> out(g, 2);
    for (int fc = 0; fc < g.num_faces; ++fc) {
      if (fc == g.root_face) continue;
      S s(0);
      for (const auto& inc : g.face_edges[fc]) s += S(inc.sign) * f[inc.cell];
      out[fc] = s;
    }
    return out;
  }
  throw std::invalid_argument("d: top degree");
}

// Codifferential d* = -d^t.  Throws on degree-0 input ("bottom degree").
template <typename S>
FormT<S> dstar(const FormT<S>& f) {
  detail::check_rooted(f);
  const auto& g = *f.geom;
  if (f.degree == 1) {
    FormT<S> out(g, 0);
    for (int v = 0; v < g.num_vertices; ++v) {
      if (v == g.root_vertex) continue;
      S s(0);
      for (const auto& inc : g.vertex_edges[v]) s += S(inc.sign) * f[inc.cell];
      out[v] = s;
    }
    return out;
  }
  if (f.degree == 2) {
    FormT<S> out(g, 1);
    for (int e = 0; e < g.num_edges; ++e) {
      S s(0);
      for (const auto& inc : g.edge_faces[e]) s -= S(inc.sign) * f[inc.cell];
      out[e] = s;
    }
    return out;
  }
  throw std::invalid_argument("dstar: bottom degree");
}

template <typename S>
FormT<S> laplacian(const FormT<S>& f) {
  detail::check_rooted(f);
  if (f.degree == 0) return dstar(d(f));
  if (f.degree == 2) return d(dstar(f));
  auto a = d(dstar(f));
  auto b = dstar(d(f));
  a.values += b.values;
  return a;
}

template <typename S>
S inner(const FormT<S>& a, const FormT<S>& b) {
  if (a.degree != b.degree || a.geom->structural_hash != b.geom->structural_hash)
    throw std::invalid_argument("inner: mismatched forms");
  return a.values.dot(b.values);
}

inline Form to_real(const IntForm& f) {
  Form out(*f.geom, f.degree);
  out.values = f.values.cast<double>();
  return out;
}

// Signed indicator 1-form E_gamma of an oriented vertex path.
IntForm path_indicator(const LatticeGeometry& g, std::span<const int> vertex_path);

}  // namespace coulvil
