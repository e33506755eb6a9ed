#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace quba {

// The nine quality dimensions, in reporting order.
enum class Dimension : std::size_t {
  kAccuracy,
  kAdvRobustness,
  kCRobustness,
  kOodRobustness,
  kCalibrationError,
  kClassBalance,
  kObjectFocus,
  kShapeBias,
  kParams,
};

inline constexpr std::size_t kNumDimensions = 9;

inline constexpr std::array<Dimension, kNumDimensions> kAllDimensions = {
    Dimension::kAccuracy,         Dimension::kAdvRobustness, Dimension::kCRobustness,
    Dimension::kOodRobustness,    Dimension::kCalibrationError, Dimension::kClassBalance,
    Dimension::kObjectFocus,      Dimension::kShapeBias,     Dimension::kParams,
};

constexpr std::size_t Index(Dimension d) { return static_cast<std::size_t>(d); }

// Canonical key as used in weight files and serialized profiles.
constexpr std::string_view Key(Dimension d) {
  constexpr std::array<std::string_view, kNumDimensions> kKeys = {
      "accuracy",          "adv_robustness", "c_robustness", "ood_robustness", "calibration_error",
      "class_balance",     "object_focus",   "shape_bias",   "params"};
  return kKeys[Index(d)];
}

// Lower is better for calibration error and parameter count.
constexpr bool LowerIsBetter(Dimension d) {
  return d == Dimension::kCalibrationError || d == Dimension::kParams;
}

// Returns true and sets `out` if `key` names a dimension.
constexpr bool ParseDimension(std::string_view key, Dimension& out) {
  for (Dimension d : kAllDimensions) {
    if (Key(d) == key) {
      out = d;
      return true;
    }
  }
  return false;
}

}  // namespace quba
