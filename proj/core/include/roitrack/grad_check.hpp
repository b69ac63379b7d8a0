#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "roitrack/tensor.hpp"

namespace roitrack::nn {

/// A layer under test: forward maps inputs to one output tensor, backward
/// maps (inputs, dL/doutput) to one gradient per input.
struct DifferentiableOp {
  std::function<Tensor(std::span<const Tensor>)> forward;
  std::function<std::vector<Tensor>(std::span<const Tensor>, const Tensor&)> backward;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<double> per_input_max;
  std::size_t elements_checked = 0;
  /// One entry per element whose relative error exceeds the tolerance.
  std::vector<std::string> failures;

  bool passed() const { return failures.empty(); }
};

/// Relative errors are |a - n| / max(|a|, |n|, floor); the floor keeps
/// elements whose true gradient is ~0 from reporting pure roundoff.
inline constexpr double kGradCheckFloor = 1e-6;

/// Compares the analytic gradient of L = sum(w * forward(inputs)) against
/// central finite differences, w being a fixed random projection drawn from
/// `seed`. Every element of every input is perturbed. Throws ParameterError
/// when epsilon is outside (0, 1e-2].
GradCheckReport grad_check(const DifferentiableOp& op, std::vector<Tensor> inputs, double epsilon,
                           double tolerance, std::uint64_t seed = 0);

}  // namespace roitrack::nn
