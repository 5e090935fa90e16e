#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "pmc/error.hpp"

namespace pmc {

// Standard normal CDF via the C library's erfc (sub-ulp accurate over R).
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

enum class SmootherKind { indicator, positive_part, adjusted_normal_cdf };

// One-sided sign-preserving G: G(z) = 0 for z <= 0, G(z) > 0 for z > 0.
//   indicator            1{z > 0}
//   positive_part        [z]_+
//   adjusted_normal_cdf  2 Phi([z]_+) - 1, bounded by 1
struct Smoother {
  SmootherKind kind = SmootherKind::adjusted_normal_cdf;

  double operator()(double z) const {
    if (!(z > 0.0)) return 0.0;
    switch (kind) {
      case SmootherKind::indicator:
        return 1.0;
      case SmootherKind::positive_part:
        return z;
      case SmootherKind::adjusted_normal_cdf:
        // 2 Phi(z) - 1 == erf(z / sqrt 2), without the cancellation near 0.
        return std::erf(z / std::numbers::sqrt2);
    }
    return 0.0;
  }
};

inline const char* to_string(SmootherKind k) {
  switch (k) {
    case SmootherKind::indicator:
      return "indicator";
    case SmootherKind::positive_part:
      return "positive-part";
    case SmootherKind::adjusted_normal_cdf:
      return "adjusted-normal-cdf";
  }
  return "?";
}

inline SmootherKind parse_smoother(const std::string& name) {
  if (name == "indicator") return SmootherKind::indicator;
  if (name == "positive-part") return SmootherKind::positive_part;
  if (name == "adjusted-normal-cdf" || name == "adjusted-cdf") return SmootherKind::adjusted_normal_cdf;
  throw ValidationError("unknown smoother '" + name + "' (expected indicator|positive-part|adjusted-normal-cdf)");
}

}  // namespace pmc
