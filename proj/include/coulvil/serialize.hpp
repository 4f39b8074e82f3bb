#pragma once

#include <string>

#include "json.hpp"

#include "coulvil/forms.hpp"
#include "coulvil/lattice.hpp"

namespace coulvil {

// Geometry dump: cells, incidence, roots.  Used for fixtures and
// cross-implementation comparison.
nlohmann::json geometry_to_json(const LatticeGeometry& g);

// Flat value array with degree and geometry hash header.
nlohmann::json form_to_json(const Form& f);
nlohmann::json form_to_json(const IntForm& f);
Form form_from_json(const nlohmann::json& j, const LatticeGeometry& g);
IntForm int_form_from_json(const nlohmann::json& j, const LatticeGeometry& g);

// Atomic file write (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& contents);

std::string hash_hex(uint64_t h);

}  // namespace coulvil
