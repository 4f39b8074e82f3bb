#include "coulvil/forms.hpp"

namespace coulvil {

IntForm path_indicator(const LatticeGeometry& g, std::span<const int> vertex_path) {
  IntForm out(g, 1);
  for (size_t i = 0; i + 1 < vertex_path.size(); ++i) {
    int a = vertex_path[i], b = vertex_path[i + 1];
    int e = edge_between(g, a, b);
    if (e < 0) throw std::invalid_argument("path_indicator: not an edge path");
    out[e] += g.edge_endpoints[e][0] == a ? 1 : -1;
  }
  return out;
}

}  // namespace coulvil
