#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "tvc/errors.hpp"

namespace tvc {

enum class KernelKind { epanechnikov, uniform, quartic };

// Symmetric density on [-1, 1] plus the two moments the plug-in bandwidth
// needs: mu2 = int u^2 k(u) du and nu0 = int k(u)^2 du.
struct Kernel {
  KernelKind kind = KernelKind::epanechnikov;
  double mu2 = 0.2;
  double nu0 = 0.6;

  double operator()(double u) const {
    if (u < -1.0 || u > 1.0) return 0.0;
    switch (kind) {
      case KernelKind::epanechnikov:
        return 0.75 * (1.0 - u * u);
      case KernelKind::uniform:
        return 0.5;
      case KernelKind::quartic: {
        double w = 1.0 - u * u;
        return 0.9375 * w * w;
      }
    }
    return 0.0;
  }

  const char* name() const {
    switch (kind) {
      case KernelKind::epanechnikov: return "epanechnikov";
      case KernelKind::uniform: return "uniform";
      case KernelKind::quartic: return "quartic";
    }
    return "?";
  }

  static Kernel epanechnikov() { return {KernelKind::epanechnikov, 0.2, 0.6}; }
  static Kernel uniform() { return {KernelKind::uniform, 1.0 / 3.0, 0.5}; }
  static Kernel quartic() { return {KernelKind::quartic, 1.0 / 7.0, 5.0 / 7.0}; }

  static Kernel from_name(std::string_view name) {
    if (name == "epanechnikov") return epanechnikov();
    if (name == "uniform") return uniform();
    if (name == "quartic") return quartic();
    throw Error(ErrorKind::config, "unknown kernel: " + std::string(name));
  }
};

}  // namespace tvc
