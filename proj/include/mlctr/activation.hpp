#pragma once

#include <cmath>
#include <string>

#include "mlctr/errors.hpp"

namespace mlctr {

enum class ActKind { relu, elu, sigmoid, identity };

// Scalar activation applied element-wise inside the embedding networks.
struct Activation {
  ActKind kind = ActKind::elu;
  double elu_alpha = 1.0;

  double value(double x) const {
    switch (kind) {
      case ActKind::relu:
        return x > 0.0 ? x : 0.0;
      case ActKind::elu:
        return x > 0.0 ? x : elu_alpha * std::expm1(x);
      case ActKind::sigmoid:
        return 1.0 / (1.0 + std::exp(-x));
      case ActKind::identity:
        return x;
    }
    return x;
  }

  // Derivative at the pre-activation.  relu uses the subgradient 0 at the
  // kink so a coordinate sitting exactly at 0 stays off.
  double deriv(double x) const {
    switch (kind) {
      case ActKind::relu:
        return x > 0.0 ? 1.0 : 0.0;
      case ActKind::elu:
        return x > 0.0 ? 1.0 : elu_alpha * std::exp(x);
      case ActKind::sigmoid: {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 - s);
      }
      case ActKind::identity:
        return 1.0;
    }
    return 1.0;
  }

  std::string name() const {
    switch (kind) {
      case ActKind::relu: return "relu";
      case ActKind::elu: return "elu";
      case ActKind::sigmoid: return "sigmoid";
      case ActKind::identity: return "identity";
    }
    return "?";
  }

  // Accepts "relu", "elu", "sigmoid", "identity", and "elu:<alpha>" for a
  // custom negative-saturation level.
  static Activation parse(const std::string& s) {
    if (s == "relu") return {ActKind::relu};
    if (s == "elu") return {ActKind::elu};
    if (s == "sigmoid") return {ActKind::sigmoid};
    if (s == "identity") return {ActKind::identity};
    if (s.rfind("elu:", 0) == 0) {
      try {
        std::size_t used = 0;
        const double alpha = std::stod(s.substr(4), &used);
        if (used == s.size() - 4 && alpha > 0.0 && std::isfinite(alpha))
          return {ActKind::elu, alpha};
      } catch (const std::exception&) {
      }
      throw ConfigError("bad elu alpha in '" + s + "'");
    }
    throw ConfigError("unknown activation '" + s + "'");
  }
};

}  // namespace mlctr
