#pragma once

namespace fshapes {

/// Parts of an objective value. Each part already carries its weight
/// coefficient, so total == geometric + functional + attachment.
struct EnergyBreakdown {
  double geometric = 0.0;
  double functional = 0.0;
  double attachment = 0.0;
  double total = 0.0;

  static EnergyBreakdown make(double geometric, double functional, double attachment) {
    return {geometric, functional, attachment, geometric + functional + attachment};
  }
  static EnergyBreakdown scalar(double total) { return {0.0, 0.0, 0.0, total}; }
};

}  // namespace fshapes
