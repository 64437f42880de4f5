#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "partfree/band.hpp"
#include "partfree/dynamics.hpp"
#include "partfree/equilibrium.hpp"
#include "partfree/quadrature.hpp"
#include "partfree/scattering.hpp"

namespace partfree {

struct QuadratureSpec {
    int panels = 16;
    int nodes_per_panel = 32;
    double edge_inset = 1e-8;  // relative to the width of the band intersection
    double rel_tol = 1e-13;    // panel refinement target, relative to int |integrand|
    std::size_t max_panels = 4096;

    void validate() const {
        if (!(rel_tol > 0.0)) throw std::invalid_argument("quadrature.rel_tol must be positive");
        if (panels < 4) throw std::invalid_argument("quadrature.panels must be >= 4");
        if (max_panels < std::size_t(2 * panels)) throw std::invalid_argument("quadrature.max_panels too small");
        if (nodes_per_panel < 1) throw std::invalid_argument("quadrature.nodes_per_panel must be >= 1");
        if (!(edge_inset > 0.0 && edge_inset < 0.5)) throw std::invalid_argument("quadrature.edge_inset must lie in (0, 0.5)");
    }
};

struct SteadyCurrentResult {
    double value = 0.0;
    double quad_error = 0.0;
    BandIntersection band;
    int panels = 0;
};

namespace detail {

/// Panel boundaries on [lo, hi]: the interval is cut at `cuts`, every piece is halved and each half
/// gets `panels / 2` panels graded cubically toward its outer end. Doubling `panels` shrinks every panel.
inline std::vector<double> graded_breaks(double lo, double hi, std::vector<double> cuts, int panels) {
    std::vector<double> nodes{lo};
    std::sort(cuts.begin(), cuts.end());
    for (double c : cuts)
        if (c > lo && c < hi) nodes.push_back(c);
    nodes.push_back(hi);

    const int per_half = std::max(1, panels / 2);
    auto grade = [per_half](int j) { return std::pow(double(j) / per_half, 3); };
    std::vector<double> breaks{lo};
    for (std::size_t s = 0; s + 1 < nodes.size(); ++s) {
        const double a = nodes[s];
        const double b = nodes[s + 1];
        const double half = 0.5 * (b - a);
        for (int j = 1; j <= per_half; ++j) breaks.push_back(a + half * grade(j));
        for (int j = per_half - 1; j >= 1; --j) breaks.push_back(b - half * grade(j));
        breaks.push_back(b);
    }
    return breaks;
}

struct SteadySum {
    double value = 0.0;
    double error = 0.0;
    std::size_t panels = 0;
};

struct Panel {
    double a, b;
    double value;  // two-half rule
    double error;  // |two-half rule - whole-panel rule|
    bool operator<(const Panel& other) const { return error < other.error; }
};

template <class F>
Panel measure_panel(F& f, double a, double b, const GaussLegendreRule& rule) {
    const double whole = integrate_panels(f, {a, b}, rule);
    const double m = 0.5 * (a + b);
    const double halves = integrate_panels(f, {a, m}, rule) + integrate_panels(f, {m, b}, rule);
    return {a, b, halves, std::abs(halves - whole)};
}

/// Globally adaptive bisection: the panel with the largest halving difference is split until the
/// summed difference drops below `target` or `budget` panels exist.
template <class F>
SteadySum adaptive_panels(F& f, const std::vector<double>& breaks, const GaussLegendreRule& rule, double target,
                          std::size_t budget) {
    std::priority_queue<Panel> queue;
    double error = 0.0;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const Panel panel = measure_panel(f, breaks[p], breaks[p + 1], rule);
        error += panel.error;
        queue.push(panel);
    }
    while (error > target && queue.size() < budget) {
        const Panel worst = queue.top();
        const double m = 0.5 * (worst.a + worst.b);
        if (!(m > worst.a && m < worst.b)) break;
        queue.pop();
        const Panel left = measure_panel(f, worst.a, m, rule);
        const Panel right = measure_panel(f, m, worst.b, rule);
        error += left.error + right.error - worst.error;
        queue.push(left);
        queue.push(right);
    }
    SteadySum sum;
    sum.panels = queue.size();
    for (; !queue.empty(); queue.pop()) {
        sum.value += queue.top().value;
        sum.error += queue.top().error;
    }
    return sum;
}

}  // namespace detail

/// Integrand f(lambda - v) - f(lambda) times T_12(lambda), without the 2 pi prefactor.
inline double landauer_integrand(const SystemSpec& spec, double v, double lambda) {
    const double occupation = fermi_weight(lambda - v, spec.thermal) - fermi_weight(lambda, spec.thermal);
    if (occupation == 0.0) return 0.0;
    return occupation * std::norm(t_matrix(spec, lambda, v).entries(0, 1));
}

/// Stationary current 2 pi * int [f(lambda - v) - f(lambda)] T_12(lambda) dlambda over the band intersection.
///
/// Oriented like I(t, n): positive when charge flows into lead 2. Panels are bisected where halving
/// changes their contribution; the error estimate is the sum of the remaining halving differences.
inline SteadyCurrentResult steady_current(const SystemSpec& spec, double v, const QuadratureSpec& quad = {}) {
    quad.validate();
    SteadyCurrentResult out;
    out.band = band_support(spec.lead.t_hop, v);
    if (v == 0.0 || out.band.empty || spec.coupling.tau == 0.0) return out;

    const double inset = quad.edge_inset * out.band.width();
    const double lo = out.band.lo + inset;
    const double hi = out.band.hi - inset;
    std::vector<double> cuts;
    if (spec.thermal.beta > 0.0) cuts = {spec.thermal.mu, spec.thermal.mu + v};

    const GaussLegendreRule rule = gauss_legendre(quad.nodes_per_panel);
    auto f = [&](double lambda) { return landauer_integrand(spec, v, lambda); };
    auto abs_f = [&](double lambda) { return std::abs(f(lambda)); };
    const auto breaks = detail::graded_breaks(lo, hi, cuts, quad.panels);
    const double scale = integrate_panels(abs_f, breaks, rule);
    const double target = quad.rel_tol * std::max(scale, std::numeric_limits<double>::min());

    const detail::SteadySum sum = detail::adaptive_panels(f, breaks, rule, target, quad.max_panels);
    out.panels = int(sum.panels);
    out.value = 2.0 * std::numbers::pi * sum.value;
    out.quad_error = 2.0 * std::numbers::pi * sum.error;
    return out;
}

class HorizonError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

struct ReconcileOptions {
    TraceOptions trace;
    double tolerance = 0.02;     // relative deviation allowed
    double zero_current = 1e-8;  // absolute tolerance when the stationary current vanishes
    double margin = 0.9;
    QuadratureSpec quad;
};

struct ReconcileRow {
    BiasProtocol protocol;
    Index site = 0;
    double ergodic = 0.0;
    double deviation = 0.0;  // relative to I_inf, absolute when I_inf == 0
    bool ok = false;
};

struct ReconcileReport {
    SteadyCurrentResult steady;
    std::vector<ReconcileRow> rows;
    double horizon = 0.0;

    bool all_ok() const {
        return std::all_of(rows.begin(), rows.end(), [](const ReconcileRow& r) { return r.ok; });
    }
};

/// Throws HorizonError when T exceeds the reflection-safe horizon of the farthest site in `sites`.
inline void check_horizon(const LeadSpec& lead, const std::vector<Index>& sites, double horizon, double margin) {
    for (Index n : sites) {
        if (n < 0 || n >= lead.trunc_len - 1)
            throw std::out_of_range("measurement site " + std::to_string(n) + " must satisfy 0 <= n < N-1 (N=" +
                                    std::to_string(lead.trunc_len) + ")");
        const double safe = safe_horizon(lead, n, margin);
        if (horizon > safe)
            throw HorizonError("horizon T=" + std::to_string(horizon) + " exceeds the reflection-safe horizon " +
                               std::to_string(safe) + " at site n=" + std::to_string(n) + " for N=" +
                               std::to_string(lead.trunc_len) + "; raise N to at least " +
                               std::to_string(Index(std::ceil(2.0 * lead.t_hop * horizon / margin)) + n) +
                               " or lower T");
    }
}

/// Ergodic averages of every protocol at every site against the Landauer current.
/// All protocols must share the same bias v.
inline ReconcileReport reconcile(const SystemSpec& spec, const std::vector<BiasProtocol>& protocols, Index trunc_len,
                                 double horizon, const std::vector<Index>& sites, const ReconcileOptions& options = {}) {
    if (protocols.empty()) throw std::invalid_argument("reconcile: no protocols given");
    for (const BiasProtocol& p : protocols) {
        p.validate();
        if (p.v != protocols.front().v) throw std::invalid_argument("reconcile: protocols must share the bias v");
    }
    SystemSpec truncated = spec;
    truncated.lead.trunc_len = trunc_len;
    check_horizon(truncated.lead, sites, horizon, options.margin);

    ReconcileReport report;
    report.horizon = horizon;
    const double v = protocols.front().v;
    report.steady = steady_current(truncated, v, options.quad);

    const TruncatedSystem sys = build_system(truncated);
    const DensityMatrix rho0 = equilibrium_density(sys);
    const auto post = std::make_shared<const SpectralDecomposition>(decompose(biased_dense_hamiltonian(sys, v)));
    const double steady = report.steady.value;
    for (const BiasProtocol& p : protocols) {
        const auto traces = record_traces(sys, p, rho0, sites, horizon, options.trace, post);
        for (const CurrentTrace& trace : traces) {
            ReconcileRow row;
            row.protocol = p;
            row.site = trace.site;
            row.ergodic = ergodic_average(trace, horizon);
            if (steady == 0.0) {
                row.deviation = std::abs(row.ergodic);
                row.ok = row.deviation <= options.zero_current;
            } else {
                row.deviation = std::abs(row.ergodic - steady) / std::abs(steady);
                row.ok = row.deviation <= options.tolerance;
            }
            report.rows.push_back(row);
        }
    }
    return report;
}

}  // namespace partfree
