#pragma once

#include <vector>

#include "sojourn/flow.hpp"
#include "sojourn/geometry.hpp"

namespace sojourn {

// One nondegenerate geodesic from z to a boundary point: initial unit
// codirection, boundary limit, |dy/ddir| Jacobian and conjugate count.
struct Branch {
  Vecd z;
  Vecd dir;  // unit covector at z
  BoundaryLimit limit;
  double jacobian = 0.0;
  double jacobian_err = 0.0;
  int conj_count = 0;
  bool nondegenerate = true;
  double newton_residual = 0.0;
  int newton_iters = 0;
};

struct SearchMeta {
  int starts = 0;
  int converged = 0;
  int deduped = 0;
};

struct BranchSet {
  Vecd z;
  Vecd y_target;
  std::vector<Branch> branches;
  SearchMeta meta;
};

struct BranchOptions {
  int multistart = 0;           // 0: 64 for n=2, 256 for n=3
  double dedupe_radius = 1e-4;  // radians between initial codirections
  double newton_tol = 1e-9;
  int max_newton = 40;
  double fd_step = 1e-5;        // radians, base step for FD Jacobians
  double degeneracy_threshold = 1e-8;
  bool compute_jacobian = true;
  bool compute_conjugate = true;
  FlowOptions flow;
};

// Boundary point reached by the forward geodesic with codirection dir.
Vecd asymptotic_direction_map(const Model& model, const Vecd& z, const Vecd& dir,
                              const FlowOptions& opts = {});

BranchSet find_branches(const Model& model, const Vecd& z, const Vecd& y_target,
                        const BranchOptions& opts = {});

// |det dy/ddir| over the unit codirection sphere, by central differences with
// Richardson refinement; includes the sqrt(det h0) boundary density so the
// value is chart-independent. err_out reports the Richardson disagreement.
double boundary_jacobian(const Model& model, const Vecd& z, const Vecd& dir, double* err_out,
                         const BranchOptions& opts = {});

// Same Jacobian from the variational (Jacobi) flow pushed through the collar
// to the x = 0 event; the independent second route of the dual-route check.
double boundary_jacobian_variational(const Model& model, const Vecd& z, const Vecd& dir,
                                     const FlowOptions& opts = {});

// Number of zeros of det J, J'' + R(J, g')g' = 0, J(0) = 0, along the
// interior segment of the branch (counting stops at collar entry).
int conjugate_count(const Model& model, const Vecd& z, const Vecd& dir,
                    const FlowOptions& opts = {}, bool check_stability = true);

struct NondegeneracyReport {
  std::vector<int> degenerate_indices;
  bool all_nondegenerate = true;
};

// Flags each branch nondegenerate iff |det dy/ddir| exceeds the threshold and
// the shooting Newton converged; updates the set in place.
NondegeneracyReport nondegeneracy_check(const Model& model, BranchSet& set,
                                        const BranchOptions& opts = {});

// Helpers shared with tests: g-orthonormal covector basis tangent to the unit
// codirection sphere at (z, dir), and the perturbed unit covector.
std::vector<Vecd> sphere_tangent_basis(const Model& model, const Vecd& z, const Vecd& dir);
Vecd perturb_direction(const Model& model, const Vecd& z, const Vecd& dir,
                       const std::vector<Vecd>& basis, const Vecd& eps);

// Chart-aware boundary coordinate difference (wraps the angle chart).
Vecd boundary_difference(const Model& model, const Vecd& y, const Vecd& y_ref);

// sqrt(det h0(y)): boundary volume density making Jacobians chart-independent.
double boundary_density(const Model& model, const Vecd& y);

}  // namespace sojourn
