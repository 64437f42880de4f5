#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace partfree {

/// Family of switching functions phi(t) used to turn the lead-1 bias on.
enum class SwitchShape { sudden, linear, smooth_cos };

inline std::string_view to_string(SwitchShape shape) {
    switch (shape) {
        case SwitchShape::sudden: return "sudden";
        case SwitchShape::linear: return "linear";
        case SwitchShape::smooth_cos: return "smooth_cos";
    }
    return "unknown";
}

inline SwitchShape parse_switch_shape(std::string_view name) {
    if (name == "sudden") return SwitchShape::sudden;
    if (name == "linear") return SwitchShape::linear;
    if (name == "smooth_cos") return SwitchShape::smooth_cos;
    throw std::invalid_argument("unknown switch shape '" + std::string(name) +
                                "' (expected sudden, linear or smooth_cos)");
}

/// Bias v*phi(t) applied to lead 1. phi vanishes for t < 0 and equals one after t1.
struct BiasProtocol {
    double v = 0.0;
    double t1 = 0.0;
    SwitchShape shape = SwitchShape::sudden;

    static BiasProtocol sudden(double v) { return {v, 0.0, SwitchShape::sudden}; }
    static BiasProtocol linear(double v, double t1) { return {v, t1, SwitchShape::linear}; }
    static BiasProtocol smooth_cos(double v, double t1) { return {v, t1, SwitchShape::smooth_cos}; }

    void validate() const {
        if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("protocol.v must be finite and >= 0");
        if (!std::isfinite(t1) || t1 < 0.0) throw std::invalid_argument("protocol.t1 must be finite and >= 0");
        if (shape == SwitchShape::sudden && t1 != 0.0)
            throw std::invalid_argument("protocol.t1 must be 0 for the sudden shape");
        if (shape != SwitchShape::sudden && t1 <= 0.0)
            throw std::invalid_argument("protocol.t1 must be > 0 for linear and smooth_cos shapes");
    }
};

/// phi(t) in [0, 1].
inline double switching_value(const BiasProtocol& protocol, double t) {
    if (t < 0.0) return 0.0;
    if (t >= protocol.t1) return 1.0;
    // here 0 <= t < t1, so t1 > 0
    const double s = t / protocol.t1;
    switch (protocol.shape) {
        case SwitchShape::sudden: return 1.0;
        case SwitchShape::linear: return s;
        case SwitchShape::smooth_cos: return 0.5 * (1.0 - std::cos(std::numbers::pi * s));
    }
    return 1.0;
}

}  // namespace partfree
