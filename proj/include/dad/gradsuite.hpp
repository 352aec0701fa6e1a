#pragma once

// Finite-difference suite over every differentiable op and the composed
// blocks. Analytic gradients run in float; the reference is a central
// difference in double over the same leaf values.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dad/gradcheck.hpp"

namespace dad {

struct GradCase {
  std::string name;
  bool composite = false;
  double tolerance = 1e-4;
  std::function<GradCheckResult(std::uint64_t seed)> run;
};

struct GradSuiteOptions {
  double op_tolerance = 1e-4;
  double composite_tolerance = 1e-3;
  // Coordinates sampled per leaf for composite cases (ops check all of them).
  std::size_t composite_coords_per_leaf = 6;
  // Relative-error denominator floor as a fraction of the case's largest
  // gradient coordinate (see GradCheckOptions::scale_floor).
  double scale_floor = 1e-3;
  // Adds a case whose backward is deliberately wrong (negative control).
  bool include_corrupted = false;
};

std::vector<GradCase> gradient_suite(const GradSuiteOptions& options = {});

struct GradCaseOutcome {
  std::string name;
  double tolerance = 0.0;
  double worst_error = 0.0;
  std::uint64_t worst_seed = 0;
  std::size_t coords = 0;
  bool passed = true;
};

// Runs every case on seeds [first_seed, first_seed + seeds).
std::vector<GradCaseOutcome> run_gradient_suite(const std::vector<GradCase>& cases,
                                                std::uint64_t first_seed, std::size_t seeds);

}  // namespace dad
