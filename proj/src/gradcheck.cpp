#include "bodyfit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "bodyfit/errors.hpp"

namespace bodyfit {

void FunctionObjective::check_layout(const ParamVector& params) const {
  if (!params.same_layout(layout_)) throw ContractViolation("parameter layout mismatch");
}

double FunctionObjective::evaluate(const ParamVector& params, ParamVector* gradient) const {
  check_layout(params);
  if (gradient) gradient->set_zero();
  return fn_(params, gradient);
}

GradientReport evaluate_with_gradient(const Objective& objective, const ParamVector& params) {
  objective.check_layout(params);
  GradientReport report;
  report.gradient = params.zeros_like();
  report.value = objective.evaluate(params, &report.gradient);
  return report;
}

FiniteDifferenceResult finite_difference_report(const Objective& objective,
                                                const ParamVector& params, double epsilon,
                                                const CoordinateSample& sample) {
  if (!(epsilon > 0.0)) throw InvalidArgument("finite_difference_check: epsilon must be > 0");
  const GradientReport report = evaluate_with_gradient(objective, params);

  FiniteDifferenceResult result;
  ParamVector probe = params;
  std::mt19937_64 rng(sample.seed);
  for (std::size_t g = 0; g < probe.group_count(); ++g) {
    auto values = probe.group_at(g);
    const auto analytic = report.gradient.group_at(g);
    std::vector<std::size_t> indices(values.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (sample.max_per_group > 0 && indices.size() > sample.max_per_group) {
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(sample.max_per_group);
      std::sort(indices.begin(), indices.end());
    }
    for (const std::size_t i : indices) {
      const double original = values[i];
      values[i] = original + epsilon;
      const double plus = objective.evaluate(probe, nullptr);
      values[i] = original - epsilon;
      const double minus = objective.evaluate(probe, nullptr);
      values[i] = original;

      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (rel > result.max_relative_error || std::isnan(rel)) {
        result.max_relative_error = rel;
        result.worst_group = probe.names()[g];
        result.worst_index = i;
        result.analytic = analytic[i];
        result.numeric = numeric;
      }
    }
  }
  return result;
}

double finite_difference_check(const Objective& objective, const ParamVector& params,
                               double epsilon) {
  return finite_difference_report(objective, params, epsilon).max_relative_error;
}

}  // namespace bodyfit
