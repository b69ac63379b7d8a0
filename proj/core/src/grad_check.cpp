#include "roitrack/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "roitrack/error.hpp"
#include "roitrack/rng.hpp"

namespace roitrack::nn {
namespace {

double projected(const DifferentiableOp& op, std::span<const Tensor> inputs, const Tensor& weights) {
  const Tensor out = op.forward(inputs);
  if (out.shape() != weights.shape()) throw ShapeError("grad_check: forward output shape changed");
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * weights[i];
  return acc;
}

}  // namespace

GradCheckReport grad_check(const DifferentiableOp& op, std::vector<Tensor> inputs, double epsilon,
                           double tolerance, std::uint64_t seed) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2)) {
    throw ParameterError("grad_check epsilon must lie in (0, 1e-2]");
  }
  const Tensor reference = op.forward(inputs);
  Rng rng(seed);
  Tensor weights(reference.shape());
  for (double& w : weights.data()) w = rng.uniform(-1.0, 1.0);

  const std::vector<Tensor> analytic = op.backward(inputs, weights);
  if (analytic.size() != inputs.size()) {
    throw ShapeError("grad_check: backward returned " + std::to_string(analytic.size()) +
                     " gradients for " + std::to_string(inputs.size()) + " inputs");
  }

  GradCheckReport report;
  report.per_input_max.assign(inputs.size(), 0.0);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (analytic[t].shape() != inputs[t].shape()) {
      throw ShapeError("grad_check: gradient " + std::to_string(t) + " has shape " +
                       to_string(analytic[t].shape()) + ", input has " +
                       to_string(inputs[t].shape()));
    }
    for (std::size_t i = 0; i < inputs[t].size(); ++i) {
      const double saved = inputs[t][i];
      inputs[t][i] = saved + epsilon;
      const double up = projected(op, inputs, weights);
      inputs[t][i] = saved - epsilon;
      const double down = projected(op, inputs, weights);
      inputs[t][i] = saved;

      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[t][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      const double rel = std::abs(a - numeric) / denom;
      report.per_input_max[t] = std::max(report.per_input_max[t], rel);
      report.max_rel_error = std::max(report.max_rel_error, rel);
      ++report.elements_checked;
      if (rel >= tolerance) {
        std::ostringstream msg;
        msg << "input " << t << " element " << i << ": analytic " << a << " numeric " << numeric
            << " rel " << rel;
        report.failures.push_back(msg.str());
      }
    }
  }
  return report;
}

}  // namespace roitrack::nn
