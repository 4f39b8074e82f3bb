#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <utility>

#include "coulvil/forms.hpp"
#include "coulvil/rng.hpp"

namespace coulvil {

using SpMat = Eigen::SparseMatrix<double>;

// Per-geometry cache of Laplacian factorizations, Green columns and the
// spanning trees behind the Poincare primitives.  Immutable geometry makes
// this safe to share; lazy members are built under a mutex.
class Operators {
 public:
  explicit Operators(const LatticeGeometry& g);

  const LatticeGeometry& geometry() const { return *g_; }

  // Solves laplacian(u) = f on the rooted forms of f's degree.  Residual is
  // checked against 1e-10 * ||f||_inf.
  Form solve_poisson(const Form& f) const;

  // Green function of the graph Laplacian, G = (-laplacian)^{-1}, degree 0 or
  // 2.  Returns 0 when either argument is the root cell.
  double green(int degree, int a, int b) const;
  // Full column G(., b) as a rooted form.
  Form green_column(int degree, int b) const;

  // Exact Gaussian draw: the form has covariance G / beta.  The consumed
  // randomness does not depend on beta.
  Form gaussian_free_field(int degree, double beta, Rng& rng) const;

  // log det of -laplacian restricted to the rooted forms of the degree.
  double logdet_neg_laplacian(int degree) const;

  // Deterministic integer 1-form with d(n_q) = q, built from a BFS spanning
  // tree of the faces rooted at f0.
  IntForm integer_primitive(const IntForm& q) const;

  // The unique rooted 0-form with d(psi) = h; requires dh = 0.
  IntForm scalar_primitive(const IntForm& h) const;
  Form scalar_primitive(const Form& h, double tol = 1e-10) const;

  // Dense (-laplacian)^{-1} on the free cells of the degree (oracle /
  // Metropolis baseline use only; guarded by size).
  Eigen::MatrixXd dense_green(int degree, int max_cells = 8192) const;
  Eigen::MatrixXd dense_neg_laplacian(int degree, int max_cells = 8192) const;

  int free_count(int degree) const;
  int root_cell(int degree) const;
  // Maps between full cell indices and the reduced (root-dropped) indexing.
  const std::vector<int>& free_cells(int degree) const;

 private:
  struct DegreeData {
    std::vector<int> free;          // cell ids without the root
    std::vector<int> to_free;       // cell id -> reduced index or -1
    SpMat neg_lap;                  // reduced -laplacian, SPD
    Eigen::SimplicialLDLT<SpMat> ldlt;
    bool ready = false;
  };

  const DegreeData& degree_data(int degree) const;
  Eigen::VectorXd solve_reduced(int degree, const Eigen::VectorXd& rhs) const;

  const LatticeGeometry* g_;
  mutable std::mutex mu_;
  mutable DegreeData deg_[3];
  mutable std::unordered_map<int64_t, Form> green_cache_;

  struct TreeData {
    // dual BFS tree over faces (for integer_primitive)
    std::vector<int> face_order;       // increasing BFS depth, f0 first
    std::vector<int> parent_edge;      // per face, -1 at f0
    std::vector<int> parent_sign;      // sign of parent edge in this face's boundary
    // primal BFS tree over vertices (for scalar_primitive)
    std::vector<int> vertex_order;     // increasing BFS depth, v0 first
    std::vector<int> vparent_edge;     // per vertex, -1 at v0
    bool ready = false;
  };
  const TreeData& trees() const;
  mutable TreeData trees_;
};

// Process-wide cache: one Operators instance per geometry hash.  The
// geometry is copied in, so the argument may be a temporary.
const Operators& ops_for(const LatticeGeometry& g);

// Convenience wrappers matching the operation names.
Form solve_poisson(const LatticeGeometry& g, const Form& f);
double green(const LatticeGeometry& g, int degree, int a, int b);

// Harmonic extension taking 0 at the origin and 1 at (1,0) on the radius-R
// zero-boundary graph re-rooted at the origin; energy <d f, d f> = 1/G(1,1).
std::pair<Form, double> harmonic_two_point(int R);

}  // namespace coulvil
