#pragma once

#include <algorithm>

namespace partfree {

/// [-2 t_L + v, 2 t_L + v] intersected with [-2 t_L, 2 t_L]: energies where both leads propagate.
struct BandIntersection {
    double lo = 0.0;
    double hi = 0.0;
    bool empty = true;

    double width() const { return empty ? 0.0 : hi - lo; }
};

inline BandIntersection band_support(double t_hop, double v) {
    const double lo = std::max(-2.0 * t_hop, -2.0 * t_hop + v);
    const double hi = std::min(2.0 * t_hop, 2.0 * t_hop + v);
    if (!(lo < hi)) return {0.0, 0.0, true};
    return {lo, hi, false};
}

}  // namespace partfree
