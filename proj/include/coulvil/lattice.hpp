#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace coulvil {

enum class BoundaryCondition { Free, Zero };

std::string to_string(BoundaryCondition bc);

// Signed incidence of an edge in a cell boundary/star.
struct OrientedIncidence {
  int cell = -1;
  int sign = 0;  // +1 / -1
};

// A square-lattice cell complex embedded in the sphere.
//
// Free bc:  [-n,n]^2 grid; the outer face is the root face f0, v0 = (0,0).
// Zero bc:  [-n,n]^2 grid plus a wired vertex at infinity; every boundary
//           vertex carries one edge to infinity, v0 = infinity, f0 = the unit
//           square with south-west corner (0,0).
//
// Indexing is deterministic: vertices lexicographic by (x,y) with infinity
// last, edges sorted by (tail, head), faces are unit squares lexicographic by
// south-west corner followed by the remaining faces by smallest incident edge
// (outer face last for Free bc).  Edges are oriented tail -> head with
// tail = lexicographically smaller endpoint; edges to infinity point to
// infinity.  Coordinates are stored doubled so that dual face centers stay
// integral.
struct LatticeGeometry {
  BoundaryCondition bc = BoundaryCondition::Free;
  int n = -1;  // lattice radius; -1 for grids and duals

  int num_vertices = 0;
  int num_edges = 0;
  int num_faces = 0;

  // Doubled coordinates; {kInfCoord, kInfCoord} marks the point at infinity
  // (or the outer face center).
  std::vector<std::array<int, 2>> vertex_coord;
  std::vector<std::array<int, 2>> face_coord;

  std::vector<std::array<int, 2>> edge_endpoints;  // {tail, head}

  // Cyclic oriented boundary of each face; sign +1 when the stored edge
  // orientation agrees with the traversal.
  std::vector<std::vector<OrientedIncidence>> face_edges;
  // Edges incident to each vertex; sign +1 when the vertex is the tail.
  std::vector<std::vector<OrientedIncidence>> vertex_edges;
  // The two faces flanking each edge, with their boundary sign (+1 = face on
  // the left of the oriented edge).
  std::vector<std::array<OrientedIncidence, 2>> edge_faces;

  // Counterclockwise cyclic order of incident edges around each vertex.
  std::vector<std::vector<int>> vertex_rotation;

  int root_vertex = 0;  // v0, 0-forms vanish here
  int root_face = 0;    // f0, 2-forms vanish here

  uint64_t hash = 0;             // includes roots
  uint64_t structural_hash = 0;  // cells and incidence only

  static constexpr int kInfCoord = INT32_MAX;

  int cell_count(int degree) const;
  bool is_infinite_vertex(int v) const { return vertex_coord[v][0] == kInfCoord; }
  int vertex_degree(int v) const { return static_cast<int>(vertex_edges[v].size()); }
  int face_degree(int f) const { return static_cast<int>(face_edges[f].size()); }
};

// Builds the canonical radius-n lattice; n >= 1.
LatticeGeometry build_lattice(int n, BoundaryCondition bc);

// nx-by-ny rectangular grid with free boundary, vertices at [0,nx) x [0,ny);
// v0 = (0,0), f0 = outer face.  Used by the desk-scale enumeration oracles.
LatticeGeometry build_grid(int nx, int ny);

// Planar dual: faces become vertices, roots swap roles.  Applying it twice
// yields a geometry with the cell counts of g.
LatticeGeometry dual_geometry(const LatticeGeometry& g);

// Same complex, different marked cells.
LatticeGeometry with_roots(const LatticeGeometry& g, int root_vertex, int root_face);

// Lookups in lattice coordinates (not doubled); -1 when absent.
int vertex_index(const LatticeGeometry& g, int x, int y);
int square_face_index(const LatticeGeometry& g, int sw_x, int sw_y);
int edge_between(const LatticeGeometry& g, int v1, int v2);
int infinite_vertex(const LatticeGeometry& g);

}  // namespace coulvil
