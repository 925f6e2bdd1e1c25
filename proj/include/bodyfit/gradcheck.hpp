#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "bodyfit/params.hpp"

namespace bodyfit {

/// A scalar function of a ParamVector with an exact reverse-mode gradient.
class Objective {
 public:
  virtual ~Objective() = default;

  /// Throws ContractViolation if `params` does not match the objective.
  virtual void check_layout(const ParamVector& params) const = 0;

  /// Returns the value. When `gradient` is non-null it must share the
  /// layout of `params`; its contents are overwritten with d value/d params.
  virtual double evaluate(const ParamVector& params, ParamVector* gradient) const = 0;
};

/// Wraps a callable as an Objective; used by tests and small harnesses.
class FunctionObjective final : public Objective {
 public:
  using Fn = std::function<double(const ParamVector&, ParamVector*)>;

  FunctionObjective(ParamVector layout, Fn fn) : layout_(std::move(layout)), fn_(std::move(fn)) {}

  void check_layout(const ParamVector& params) const override;
  double evaluate(const ParamVector& params, ParamVector* gradient) const override;

 private:
  ParamVector layout_;
  Fn fn_;
};

GradientReport evaluate_with_gradient(const Objective& objective, const ParamVector& params);

struct FiniteDifferenceResult {
  double max_relative_error = 0.0;
  std::string worst_group;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Probes at most `max_per_group` entries of each group (0 = all), chosen
/// without replacement from `seed`.
struct CoordinateSample {
  std::size_t max_per_group = 0;
  std::uint64_t seed = 0;
};

/// Central differences compared with the reverse-mode gradient. Relative
/// error is |a - b| / max(|a|, |b|, 1e-8).
FiniteDifferenceResult finite_difference_report(const Objective& objective,
                                                const ParamVector& params, double epsilon,
                                                const CoordinateSample& sample = {});

double finite_difference_check(const Objective& objective, const ParamVector& params,
                               double epsilon);

}  // namespace bodyfit
