#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bodyfit {

/// Ordered set of named, flat parameter groups. Insertion order is the
/// canonical order for flat indexing and for serialization.
class ParamVector {
 public:
  ParamVector() = default;

  void add_group(std::string name, std::vector<double> values);

  bool has(std::string_view name) const;
  std::span<double> group(std::string_view name);
  std::span<const double> group(std::string_view name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::size_t group_count() const { return names_.size(); }
  std::span<double> group_at(std::size_t i) { return values_[i]; }
  std::span<const double> group_at(std::size_t i) const { return values_[i]; }

  /// Total number of scalar entries across all groups.
  std::size_t size() const;

  /// Same names and lengths, all values zero.
  ParamVector zeros_like() const;
  bool same_layout(const ParamVector& other) const;
  bool all_finite() const;
  void set_zero();

 private:
  std::size_t index_of(std::string_view name) const;

  std::vector<std::string> names_;
  std::vector<std::vector<double>> values_;
};

/// Objective value and its gradient, aligned with the evaluated ParamVector.
struct GradientReport {
  double value = 0.0;
  ParamVector gradient;
};

inline constexpr std::string_view kShapeGroup = "shape";
inline constexpr std::string_view kOffsetsGroup = "offsets";
std::string pose_group(std::size_t frame);
std::string trans_group(std::size_t frame);

}  // namespace bodyfit
