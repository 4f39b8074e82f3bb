#include "coulvil/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace coulvil {

std::string hash_hex(uint64_t h) {
  char buf[17];
  snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json geometry_to_json(const LatticeGeometry& g) {
  nlohmann::json j;
  j["schema"] = "coulvil-geometry-v1";
  j["bc"] = to_string(g.bc);
  j["n"] = g.n;
  j["hash"] = hash_hex(g.hash);
  j["structural_hash"] = hash_hex(g.structural_hash);
  j["counts"] = {g.num_vertices, g.num_edges, g.num_faces};
  j["root_vertex"] = g.root_vertex;
  j["root_face"] = g.root_face;
  j["vertex_coord"] = g.vertex_coord;
  j["edge_endpoints"] = g.edge_endpoints;
  nlohmann::json faces = nlohmann::json::array();
  for (const auto& fb : g.face_edges) {
    nlohmann::json f = nlohmann::json::array();
    for (const auto& inc : fb) f.push_back({inc.cell, inc.sign});
    faces.push_back(std::move(f));
  }
  j["face_edges"] = std::move(faces);
  return j;
}

namespace {
template <typename S>
nlohmann::json form_json(const FormT<S>& f) {
  nlohmann::json j;
  j["schema"] = "coulvil-form-v1";
  j["degree"] = f.degree;
  j["geometry"] = hash_hex(f.geom->hash);
  std::vector<S> vals(f.values.data(), f.values.data() + f.values.size());
  j["values"] = vals;
  return j;
}

template <typename S>
FormT<S> form_parse(const nlohmann::json& j, const LatticeGeometry& g) {
  if (j.at("geometry").get<std::string>() != hash_hex(g.hash))
    throw std::invalid_argument("form geometry hash mismatch");
  FormT<S> f(g, j.at("degree").get<int>());
  auto vals = j.at("values").get<std::vector<S>>();
  if (static_cast<int>(vals.size()) != f.size())
    throw std::invalid_argument("form value count mismatch");
  for (int i = 0; i < f.size(); ++i) f[i] = vals[i];
  detail::check_rooted(f);
  return f;
}
}  // namespace

nlohmann::json form_to_json(const Form& f) { return form_json(f); }
nlohmann::json form_to_json(const IntForm& f) { return form_json(f); }
Form form_from_json(const nlohmann::json& j, const LatticeGeometry& g) {
  return form_parse<double>(j, g);
}
IntForm int_form_from_json(const nlohmann::json& j, const LatticeGeometry& g) {
  return form_parse<int64_t>(j, g);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp);
    out << contents;
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename failed: " + path);
}

}  // namespace coulvil
