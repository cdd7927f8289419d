#include "starme/bingrid.hpp"

#include <stdexcept>

namespace starme {

BinGrid build_bin_grid(double lo, double hi, int g) {
  if (!(hi > lo)) throw std::invalid_argument("bin grid: hi must exceed lo");
  if (g < 1) throw std::invalid_argument("bin grid: need at least one bin");
  BinGrid b;
  b.lo = lo;
  b.hi = hi;
  b.g = g;
  return b;
}

}  // namespace starme
