#include "bodyfit/params.hpp"

#include <algorithm>
#include <cmath>

#include "bodyfit/errors.hpp"

namespace bodyfit {

void ParamVector::add_group(std::string name, std::vector<double> values) {
  if (has(name)) throw ContractViolation("duplicate parameter group '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(values));
}

bool ParamVector::has(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ParamVector::index_of(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) {
    throw ContractViolation("unknown parameter group '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - names_.begin());
}

std::span<double> ParamVector::group(std::string_view name) { return values_[index_of(name)]; }

std::span<const double> ParamVector::group(std::string_view name) const {
  return values_[index_of(name)];
}

std::size_t ParamVector::size() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

ParamVector ParamVector::zeros_like() const {
  ParamVector out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    out.add_group(names_[i], std::vector<double>(values_[i].size(), 0.0));
  }
  return out;
}

bool ParamVector::same_layout(const ParamVector& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i].size() != other.values_[i].size()) return false;
  }
  return true;
}

bool ParamVector::all_finite() const {
  for (const auto& v : values_) {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

void ParamVector::set_zero() {
  for (auto& v : values_) std::fill(v.begin(), v.end(), 0.0);
}

std::string pose_group(std::size_t frame) { return "pose_" + std::to_string(frame); }
std::string trans_group(std::size_t frame) { return "trans_" + std::to_string(frame); }

}  // namespace bodyfit
