#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bodyfit/objectives.hpp"

namespace bodyfit {

struct TermCheck {
  Term term = Term::kTPose;
  double epsilon = 0.0;
  double tolerance = 0.0;
  double max_relative_error = 0.0;
  std::string worst_group;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // gradient entries at the worst index
  double numeric = 0.0;
  bool passed = false;
};

struct CertifyOptions {
  std::uint64_t seed = 0;
  int points = 10;
  int vertex_target = 250;
  int frames = 2;
  int resolution = 64;
  double softness_tau = 2.0;
  /// Random entries probed per parameter group (0 = all). Rendering makes
  /// the silhouette far costlier than the other terms, so it gets fewer.
  std::size_t coordinates_per_group = 96;
  std::size_t silhouette_coordinates_per_group = 16;
  /// Test hook: corrupts the analytic gradient of this term.
  std::optional<Term> inject_fault;
};

/// Tolerance and step for a term: 1e-5/1e-5 for smooth 3D terms, 1e-4/1e-5
/// for projected 2D terms, 1e-3/1e-4 for the silhouette.
TermCheck term_tolerance(Term term);

/// Finite-difference certification of every registered term at
/// `options.points` random parameter settings.
std::vector<TermCheck> certify_gradients(const CertifyOptions& options);

}  // namespace bodyfit
