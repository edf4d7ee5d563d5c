#pragma once

#include <string>

#include "madiag/diagram.hpp"
#include "madiag/dsl.hpp"
#include "madiag/rewrite.hpp"

// Closed-form expressions of the calculus, frozen as DSL text. These are the
// reference right-hand sides the rewrite engine and the numeric checks are
// certified against.

namespace madiag::sums {

/// L[Phi_i] alternative form: -W_i + trace of the third derivative.
inline const char* d1_rhs_trace() { return "-1*W(i) + Phi(k,l)*Phi(i,k,l)"; }

/// L[Phi_ij] = -V_ij + W_ij + g_ij.
inline const char* d2_rhs() { return "-1*V(i,j) + W(i,j) + Phi(i,a,b)*Phi(j,a,b)"; }

/// L[Phi_ijk]: five-shape sum.
inline const char* d3_rhs() {
  return "-1*V(i,j,k) + W(i,j,k)"
         " + W(s,i)*Phi(s,j,k) + W(s,j)*Phi(s,i,k) + W(s,k)*Phi(s,i,j)"
         " + Phi(a,b,i)*Phi(a,b,j,k) + Phi(a,b,j)*Phi(a,b,i,k) + Phi(a,b,k)*Phi(a,b,i,j)"
         " - 2*Phi(a,b,i)*Phi(b,c,j)*Phi(c,a,k)";
}

/// L Phi_i (tensor Laplacian of the gradient one-form).
inline const char* lphi1_rhs() {
  return "1/2*V(i,k)*Phi(k) - 1/2*W(i,k)*Phi(k)"
         " + 1/4*Phi(i,a,b)*Phi(k,a,b)*Phi(k) - 1*W(i)";
}

/// L Phi_iab (tensor Laplacian of the third-derivative tensor).
inline const char* lphi3_rhs() {
  return "-1*V(i,j,k) + W(i,j,k)"
         " + 1/2*V(m,i)*Phi(m,j,k) + 1/2*V(m,j)*Phi(m,i,k) + 1/2*V(m,k)*Phi(m,i,j)"
         " + 1/2*W(m,i)*Phi(m,j,k) + 1/2*W(m,j)*Phi(m,i,k) + 1/2*W(m,k)*Phi(m,i,j)"
         " - 1/2*Phi(a,i,b)*Phi(b,j,c)*Phi(c,k,a)"
         " + 1/4*Phi(i,c,d)*Phi(m,c,d)*Phi(m,j,k)"
         " + 1/4*Phi(j,c,d)*Phi(m,c,d)*Phi(m,i,k)"
         " + 1/4*Phi(k,c,d)*Phi(m,c,d)*Phi(m,i,j)";
}

/// L g_ij minus the gradient-square and curvature-square parts: the
/// four-shape combination.
inline const char* lg_rhs_reduced() {
  return "-1*V(i,a,b)*Phi(j,a,b) + W(i,a,b)*Phi(j,a,b)"
         " - 1*V(j,a,b)*Phi(i,a,b) + W(j,a,b)*Phi(i,a,b)"
         " + 1/2*V(i,s)*Phi(s,c,d)*Phi(j,c,d) + 1/2*W(i,s)*Phi(s,c,d)*Phi(j,c,d)"
         " + 1/2*V(j,s)*Phi(s,c,d)*Phi(i,c,d) + 1/2*W(j,s)*Phi(s,c,d)*Phi(i,c,d)"
         " + 2*V(a,m)*Phi(m,i,b)*Phi(a,b,j) + 2*W(a,m)*Phi(m,i,b)*Phi(a,b,j)"
         " + 1/2*Phi(i,a,b)*Phi(k,a,b)*Phi(k,c,d)*Phi(j,c,d)";
}

/// nabla_p Phi_iab written out with the three leg corrections.
inline const char* grad_phi3() {
  return "Phi(i,a,b,p)"
         " - 1/2*Phi(a,b,m)*Phi(m,i,p)"
         " - 1/2*Phi(i,b,m)*Phi(m,a,p)"
         " - 1/2*Phi(i,a,m)*Phi(m,b,p)";
}

/// 8 R_iabc R_j^abc as the difference of the two third-derivative quartics
/// (the cycle with one doubled side minus the near-complete quadrilateral).
inline const char* rr8_cycle() { return "Phi(k,c,d)*Phi(a,c,d)*Phi(k,i,b)*Phi(j,a,b)"; }
inline const char* rr8_k4e() { return "Phi(l,i,k)*Phi(m,a,l)*Phi(k,b,m)*Phi(a,b,j)"; }

/// Loop rule with two endpoints, right-hand side.
inline const char* loop_k2_rhs() {
  return "Phi(i,a,b)*Phi(j,a,b) - 1*V(i,j) + W(i,j) + Phi(i,j,k)*W(k)";
}

// -- assembled sums ------------------------------------------------------

/// Symmetric-mode g diagram (two Phi vertices, doubled edge, one leg each).
inline DiagramSum g_diagram() {
  return symmetrize(parse_diagrams("Phi(i,a,b)*Phi(j,a,b)"));
}

/// Symmetric-mode gradient of the third-derivative tensor (order-4 tensor).
inline DiagramSum grad_phi3_sum() { return symmetrize(parse_diagrams(grad_phi3())); }

/// Symmetric-mode contraction nabla_p Phi_iab nabla^p Phi_j^ab.
inline DiagramSum grad_phi3_square() {
  DiagramSum t = grad_phi3_sum();
  return contract(t, t, 3);
}

/// Symmetric-mode 8 R_iabc R_j^abc.
inline DiagramSum rr8_sum() {
  return symmetrize(parse_diagrams(rr8_cycle()) - parse_diagrams(rr8_k4e()));
}

/// Full right side of the L g formula: four shapes plus gradient-square and
/// curvature-square parts (symmetric mode).
inline DiagramSum lg_rhs_full() {
  DiagramSum s = symmetrize(parse_diagrams(lg_rhs_reduced()));
  s += Rational(2) * grad_phi3_square();
  s += rr8_sum();
  return s;
}

}  // namespace madiag::sums
