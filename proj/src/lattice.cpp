#include "coulvil/lattice.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <stdexcept>

namespace coulvil {

namespace {

constexpr int kInf = LatticeGeometry::kInfCoord;

uint64_t fnv1a(uint64_t h, uint64_t x) {
  for (int i = 0; i < 8; ++i) {
    h ^= (x >> (8 * i)) & 0xff;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t structural_hash_of(const LatticeGeometry& g) {
  uint64_t h = 0xcbf29ce484222325ull;
  h = fnv1a(h, static_cast<uint64_t>(g.num_vertices));
  h = fnv1a(h, static_cast<uint64_t>(g.num_edges));
  h = fnv1a(h, static_cast<uint64_t>(g.num_faces));
  for (const auto& e : g.edge_endpoints) {
    h = fnv1a(h, static_cast<uint64_t>(e[0]));
    h = fnv1a(h, static_cast<uint64_t>(e[1]));
  }
  for (const auto& fb : g.face_edges) {
    h = fnv1a(h, fb.size());
    for (const auto& inc : fb) {
      h = fnv1a(h, static_cast<uint64_t>(inc.cell));
      h = fnv1a(h, static_cast<uint64_t>(inc.sign + 2));
    }
  }
  return h;
}

uint64_t full_hash_of(const LatticeGeometry& g) {
  uint64_t h = g.structural_hash;
  h = fnv1a(h, static_cast<uint64_t>(g.bc == BoundaryCondition::Zero ? 1 : 0));
  h = fnv1a(h, static_cast<uint64_t>(g.root_vertex));
  h = fnv1a(h, static_cast<uint64_t>(g.root_face));
  return h;
}

// Combinatorial map: darts are 2*edge + dir, dir 0 = tail -> head.
struct MapCore {
  const std::vector<std::array<int, 2>>* ends;
  std::vector<std::vector<int>> rot;  // outgoing darts, ccw, per vertex
};

int dart_head(const MapCore& m, int d) { return (*m.ends)[d >> 1][(d & 1) ^ 1]; }

// Face orbits with the face kept on the left of each dart: the successor of
// dart d is the rotational predecessor of its reversal at head(d).
std::vector<std::vector<int>> trace_faces(const MapCore& m, int num_edges) {
  std::vector<int> pos(2 * num_edges, -1);
  for (const auto& darts : m.rot)
    for (size_t i = 0; i < darts.size(); ++i) pos[darts[i]] = static_cast<int>(i);

  std::vector<char> seen(2 * num_edges, 0);
  std::vector<std::vector<int>> orbits;
  for (int d0 = 0; d0 < 2 * num_edges; ++d0) {
    if (seen[d0]) continue;
    std::vector<int> orbit;
    int d = d0;
    do {
      seen[d] = 1;
      orbit.push_back(d);
      int r = d ^ 1;
      int v = dart_head(m, d);
      const auto& darts = m.rot[v];
      int i = pos[r];
      d = darts[(i + darts.size() - 1) % darts.size()];
    } while (d != d0);
    orbits.push_back(std::move(orbit));
  }
  return orbits;
}

void finish_incidence(LatticeGeometry& g) {
  g.vertex_edges.assign(g.num_vertices, {});
  for (int e = 0; e < g.num_edges; ++e) {
    g.vertex_edges[g.edge_endpoints[e][0]].push_back({e, +1});
    g.vertex_edges[g.edge_endpoints[e][1]].push_back({e, -1});
  }
  g.edge_faces.assign(g.num_edges, {OrientedIncidence{}, OrientedIncidence{}});
  std::vector<int> count(g.num_edges, 0);
  for (int f = 0; f < g.num_faces; ++f) {
    for (const auto& inc : g.face_edges[f]) {
      int e = inc.cell;
      if (count[e] >= 2) throw std::logic_error("edge in more than two face boundaries");
      g.edge_faces[e][count[e]++] = {f, inc.sign};
    }
  }
  for (int e = 0; e < g.num_edges; ++e) {
    if (count[e] != 2 || g.edge_faces[e][0].sign + g.edge_faces[e][1].sign != 0)
      throw std::logic_error("inconsistent face orientation");
  }
  g.structural_hash = structural_hash_of(g);
  g.hash = full_hash_of(g);
}

// Shared builder for free grids and radius-n lattices of either boundary
// condition.  Vertices span [x0,x1] x [y0,y1].
LatticeGeometry build_core(int x0, int x1, int y0, int y1, BoundaryCondition bc, int n) {
  LatticeGeometry g;
  g.bc = bc;
  g.n = n;

  const int nx = x1 - x0 + 1, ny = y1 - y0 + 1;
  auto vid = [&](int x, int y) { return (x - x0) * ny + (y - y0); };
  for (int x = x0; x <= x1; ++x)
    for (int y = y0; y <= y1; ++y) g.vertex_coord.push_back({2 * x, 2 * y});
  int inf = -1;
  if (bc == BoundaryCondition::Zero) {
    inf = static_cast<int>(g.vertex_coord.size());
    g.vertex_coord.push_back({kInf, kInf});
  }
  g.num_vertices = static_cast<int>(g.vertex_coord.size());

  auto boundary = [&](int x, int y) { return x == x0 || x == x1 || y == y0 || y == y1; };

  // Edge list comes out sorted by (tail, head): for a fixed tail the head
  // indices are N < E < infinity.
  struct PendingEdge { int tail, head, angle_tail, angle_head; };
  std::vector<PendingEdge> edges;
  for (int x = x0; x <= x1; ++x) {
    for (int y = y0; y <= y1; ++y) {
      int v = vid(x, y);
      if (y < y1) edges.push_back({v, vid(x, y + 1), 90, 270});
      if (x < x1) edges.push_back({v, vid(x + 1, y), 0, 180});
      if (bc == BoundaryCondition::Zero && boundary(x, y)) {
        int ang = 0;
        if (x == x1 && y == y1) ang = 45;
        else if (x == x0 && y == y1) ang = 135;
        else if (x == x0 && y == y0) ang = 225;
        else if (x == x1 && y == y0) ang = 315;
        else if (x == x1) ang = 0;
        else if (y == y1) ang = 90;
        else if (x == x0) ang = 180;
        else ang = 270;
        edges.push_back({v, inf, ang, -1});
      }
    }
  }
  g.num_edges = static_cast<int>(edges.size());
  for (const auto& e : edges) g.edge_endpoints.push_back({e.tail, e.head});

  // Rotation system: finite vertices ccw by angle from east; infinity gets
  // its spokes in clockwise boundary order, which is counterclockwise as seen
  // from the point at infinity on the sphere.
  std::vector<std::vector<std::pair<int, int>>> ang(g.num_vertices);  // (angle, dart)
  for (int e = 0; e < g.num_edges; ++e) {
    ang[edges[e].tail].push_back({edges[e].angle_tail, 2 * e});
    if (edges[e].head != inf) ang[edges[e].head].push_back({edges[e].angle_head, 2 * e + 1});
  }
  MapCore core;
  core.ends = &g.edge_endpoints;
  core.rot.assign(g.num_vertices, {});
  for (int v = 0; v < g.num_vertices; ++v) {
    if (v == inf) continue;
    std::sort(ang[v].begin(), ang[v].end());
    for (auto& [a, d] : ang[v]) core.rot[v].push_back(d);
  }
  if (inf >= 0) {
    std::vector<int> cw;  // boundary vertices, clockwise from the NE corner
    for (int y = y1; y > y0; --y) cw.push_back(vid(x1, y));
    for (int x = x1; x > x0; --x) cw.push_back(vid(x, y0));
    for (int y = y0; y < y1; ++y) cw.push_back(vid(x0, y));
    for (int x = x0; x < x1; ++x) cw.push_back(vid(x, y1));
    std::map<int, int> spoke_of;  // boundary vertex -> edge id
    for (int e = 0; e < g.num_edges; ++e)
      if (edges[e].head == inf) spoke_of[edges[e].tail] = e;
    for (int v : cw) core.rot[inf].push_back(2 * spoke_of.at(v) + 1);
  }
  g.vertex_rotation.assign(g.num_vertices, {});
  for (int v = 0; v < g.num_vertices; ++v)
    for (int d : core.rot[v]) g.vertex_rotation[v].push_back(d >> 1);

  auto orbits = trace_faces(core, g.num_edges);

  // Order faces: unit squares lexicographic by SW corner, then the rest by
  // smallest incident edge (the outer face of a free grid lands last).
  struct PendingFace {
    std::array<int, 3> key;
    std::array<int, 2> coord;
    std::vector<OrientedIncidence> bdry;
  };
  std::vector<PendingFace> faces;
  for (auto& orbit : orbits) {
    PendingFace pf;
    int min_edge = g.num_edges;
    bool touches_inf = false;
    long cx = 0, cy = 0;
    for (int d : orbit) {
      pf.bdry.push_back({d >> 1, (d & 1) ? -1 : +1});
      min_edge = std::min(min_edge, d >> 1);
      int head = g.edge_endpoints[d >> 1][(d & 1) ^ 1];
      if (head == inf) touches_inf = true;
    }
    bool is_square = orbit.size() == 4 && !touches_inf;
    if (is_square) {
      int sx = INT32_MAX, sy = INT32_MAX;
      for (const auto& inc : pf.bdry) {
        for (int side : {0, 1}) {
          const auto& c = g.vertex_coord[g.edge_endpoints[inc.cell][side]];
          sx = std::min(sx, c[0]);
          sy = std::min(sy, c[1]);
        }
      }
      pf.key = {0, sx, sy};
      pf.coord = {sx + 1, sy + 1};
    } else {
      pf.key = {1, min_edge, 0};
      if (touches_inf) {
        int k = 0;
        for (int d : orbit) {
          for (int side : {0, 1}) {
            int v = g.edge_endpoints[d >> 1][side];
            if (v != inf) { cx += g.vertex_coord[v][0]; cy += g.vertex_coord[v][1]; ++k; }
          }
        }
        pf.coord = {static_cast<int>(cx / k), static_cast<int>(cy / k)};
      } else {
        pf.coord = {kInf, kInf};  // outer face
      }
    }
    faces.push_back(std::move(pf));
  }
  std::sort(faces.begin(), faces.end(),
            [](const PendingFace& a, const PendingFace& b) { return a.key < b.key; });
  g.num_faces = static_cast<int>(faces.size());
  for (auto& pf : faces) {
    g.face_coord.push_back(pf.coord);
    g.face_edges.push_back(std::move(pf.bdry));
  }

  if (bc == BoundaryCondition::Free) {
    g.root_vertex = vid(std::max(x0, std::min(0, x1)), std::max(y0, std::min(0, y1)));
    g.root_face = g.num_faces - 1;
  } else {
    g.root_vertex = inf;
    g.root_face = -1;
    for (int f = 0; f < g.num_faces; ++f)
      if (g.face_coord[f][0] == 1 && g.face_coord[f][1] == 1) g.root_face = f;
    if (g.root_face < 0) throw std::logic_error("central face not found");
  }

  finish_incidence(g);
  return g;
}

}  // namespace

std::string to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::Free ? "free" : "zero";
}

int LatticeGeometry::cell_count(int degree) const {
  switch (degree) {
    case 0: return num_vertices;
    case 1: return num_edges;
    case 2: return num_faces;
    default: throw std::invalid_argument("degree must be 0, 1 or 2");
  }
}

LatticeGeometry build_lattice(int n, BoundaryCondition bc) {
  if (n < 1) throw std::invalid_argument("lattice radius must be >= 1");
  return build_core(-n, n, -n, n, bc, n);
}

LatticeGeometry build_grid(int nx, int ny) {
  if (nx < 1 || ny < 1 || nx * ny < 2)
    throw std::invalid_argument("grid needs at least two vertices");
  return build_core(0, nx - 1, 0, ny - 1, BoundaryCondition::Free, -1);
}

LatticeGeometry dual_geometry(const LatticeGeometry& g) {
  LatticeGeometry d;
  d.bc = g.bc;
  d.n = g.n;
  d.num_vertices = g.num_faces;
  d.num_edges = g.num_edges;
  d.vertex_coord = g.face_coord;

  // Dual edge k crosses primal edge k, oriented left face -> right face.
  d.edge_endpoints.resize(d.num_edges);
  for (int e = 0; e < g.num_edges; ++e) {
    const auto& inc = g.edge_faces[e];
    int left = inc[0].sign > 0 ? inc[0].cell : inc[1].cell;
    int right = inc[0].sign > 0 ? inc[1].cell : inc[0].cell;
    d.edge_endpoints[e] = {left, right};
  }

  MapCore core;
  core.ends = &d.edge_endpoints;
  core.rot.assign(d.num_vertices, {});
  for (int f = 0; f < g.num_faces; ++f)
    for (const auto& inc : g.face_edges[f])
      core.rot[f].push_back(2 * inc.cell + (inc.sign > 0 ? 0 : 1));
  d.vertex_rotation.assign(d.num_vertices, {});
  for (int v = 0; v < d.num_vertices; ++v)
    for (int dart : core.rot[v]) d.vertex_rotation[v].push_back(dart >> 1);

  auto orbits = trace_faces(core, d.num_edges);

  // Each dual face wraps one primal vertex; order dual faces by it.
  std::vector<int> around(orbits.size(), -1);
  for (size_t i = 0; i < orbits.size(); ++i) {
    std::vector<int> cand;
    for (int side : {0, 1}) cand.push_back(g.edge_endpoints[orbits[i][0] >> 1][side]);
    for (size_t j = 1; j < orbits[i].size() && cand.size() > 1; ++j) {
      int e = orbits[i][j] >> 1;
      if (e == (orbits[i][0] >> 1)) continue;
      std::vector<int> keep;
      for (int v : cand)
        if (g.edge_endpoints[e][0] == v || g.edge_endpoints[e][1] == v) keep.push_back(v);
      if (!keep.empty()) cand = keep;
    }
    if (cand.size() != 1) throw std::logic_error("ambiguous dual face");
    around[i] = cand[0];
  }
  std::vector<int> order(orbits.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return around[a] < around[b]; });

  d.num_faces = static_cast<int>(orbits.size());
  for (int i : order) {
    std::vector<OrientedIncidence> bdry;
    for (int dart : orbits[i]) bdry.push_back({dart >> 1, (dart & 1) ? -1 : +1});
    d.face_edges.push_back(std::move(bdry));
    d.face_coord.push_back(g.vertex_coord[around[i]]);
  }

  d.root_vertex = g.root_face;
  d.root_face = -1;
  for (size_t i = 0; i < order.size(); ++i)
    if (around[order[i]] == g.root_vertex) d.root_face = static_cast<int>(i);
  if (d.root_face < 0) throw std::logic_error("dual root face not found");

  finish_incidence(d);
  return d;
}

LatticeGeometry with_roots(const LatticeGeometry& g, int root_vertex, int root_face) {
  if (root_vertex < 0 || root_vertex >= g.num_vertices || root_face < 0 ||
      root_face >= g.num_faces)
    throw std::invalid_argument("root cell out of range");
  LatticeGeometry h = g;
  h.root_vertex = root_vertex;
  h.root_face = root_face;
  h.hash = full_hash_of(h);
  return h;
}

int vertex_index(const LatticeGeometry& g, int x, int y) {
  std::array<int, 2> c = {2 * x, 2 * y};
  for (int v = 0; v < g.num_vertices; ++v)
    if (g.vertex_coord[v] == c) return v;
  return -1;
}

int square_face_index(const LatticeGeometry& g, int sw_x, int sw_y) {
  std::array<int, 2> c = {2 * sw_x + 1, 2 * sw_y + 1};
  for (int f = 0; f < g.num_faces; ++f)
    if (g.face_coord[f] == c && g.face_edges[f].size() == 4) return f;
  return -1;
}

int edge_between(const LatticeGeometry& g, int v1, int v2) {
  for (const auto& inc : g.vertex_edges[v1]) {
    const auto& ee = g.edge_endpoints[inc.cell];
    if (ee[0] == v2 || ee[1] == v2) return inc.cell;
  }
  return -1;
}

int infinite_vertex(const LatticeGeometry& g) {
  for (int v = 0; v < g.num_vertices; ++v)
    if (g.is_infinite_vertex(v)) return v;
  return -1;
}

}  // namespace coulvil
