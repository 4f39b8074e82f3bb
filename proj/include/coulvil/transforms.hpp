#pragma once

#include "coulvil/samplers.hpp"

namespace coulvil {

// Image of the decoupling map: independent GFF on the vertices and Coulomb
// gas on the faces, both rooted.
struct DecoupledPair {
  Form phi;   // 0-form
  IntForm q;  // 2-form
};

// (theta, m) -> (phi, q):  q = d m,  phi = theta + 2 pi psi + 2 pi lap^-1 d* n_q
// with d n_q = q and d psi = m - n_q.  The coupling energy splits as
// <d theta + 2 pi m, .> = <d phi, d phi> + (2 pi)^2 <q, (-lap)^-1 q>.
DecoupledPair decouple(const VillainState& state);

// Inverse map; theta is reduced mod 2 pi and m uses the floor expression.
VillainState recouple(const DecoupledPair& pair);

// m via the gradient expression of the inverse map (equal to the floor form;
// asserted in tests rather than silently assumed).
IntForm recouple_m_gradient_form(const DecoupledPair& pair, const VillainState& reconstructed);

// <d phi, d phi> + (2 pi)^2 <q, (-lap)^-1 q>
double decoupled_energy(const DecoupledPair& pair);

enum class Model { GFF, IVGFF, Coulomb, VillainCoupling };

// Re-rooting maps; g_new must be the same complex with the new marked cells.
Form reroot_gff(const Form& phi, const LatticeGeometry& g_new);
IntForm reroot_ivgff(const IntForm& psi, const LatticeGeometry& g_new);
// Charge transport: the old root cell receives minus the total charge.
IntForm reroot_coulomb(const IntForm& q, const LatticeGeometry& g_new);
// Angle shift with m compensation keeping d theta + 2 pi m invariant.
VillainState reroot_villain(const VillainState& s, const LatticeGeometry& g_new);

}  // namespace coulvil
