#pragma once

#include <vector>

namespace starme {

// equal-width binning of [lo, hi]; latent-covariate design rows are looked up
// at bin midpoints so proposals cost O(1) instead of a basis evaluation
struct BinGrid {
  double lo = 0.0;
  double hi = 1.0;
  int g = 0;

  int index(double x) const {
    int idx = static_cast<int>((x - lo) / (hi - lo) * g);
    if (idx < 0) return 0;
    if (idx >= g) return g - 1;
    return idx;
  }

  double midpoint(int idx) const {
    return lo + (idx + 0.5) * (hi - lo) / g;
  }

  std::vector<double> midpoints() const {
    std::vector<double> m(g);
    for (int i = 0; i < g; ++i) m[i] = midpoint(i);
    return m;
  }
};

BinGrid build_bin_grid(double lo, double hi, int g);

}  // namespace starme
