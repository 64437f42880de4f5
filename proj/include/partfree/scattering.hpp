#pragma once

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "partfree/band.hpp"
#include "partfree/equilibrium.hpp"
#include "partfree/model.hpp"

namespace partfree {

/// Boundary condition at the real axis: retarded (lambda + i0) or advanced (lambda - i0).
enum class Branch { retarded, advanced };

/// Relative distance to a band edge below which energies are rejected.
inline constexpr double kEdgeGuard = 1e-9;

class BandEdgeError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Real energy where lambda - H^S - Sigma(lambda) is singular, i.e. a bound state.
class ResolventPoleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline bool in_open_band(double lambda, double t_hop, double shift) {
    return std::abs(lambda - shift) < 2.0 * t_hop;
}

inline void check_band_edge(double lambda, double t_hop, double shift) {
    if (std::abs(std::abs(lambda - shift) - 2.0 * t_hop) <= kEdgeGuard * t_hop)
        throw BandEdgeError("energy " + std::to_string(lambda) + " is at a band edge of the lead with shift " +
                            std::to_string(shift));
}

/// Propagating lead state: lambda - shift = 2 t_L cos k with k in (0, pi).
struct LeadMode {
    double lambda = 0.0;
    double k = 0.0;
    double shift = 0.0;
    double t_hop = 1.0;
};

inline LeadMode lead_mode(double lambda, double t_hop, double shift = 0.0) {
    check_band_edge(lambda, t_hop, shift);
    if (!in_open_band(lambda, t_hop, shift))
        throw std::domain_error("lead_mode: energy " + std::to_string(lambda) + " lies outside the band");
    return {lambda, std::acos((lambda - shift) / (2.0 * t_hop)), shift, t_hop};
}

/// Normalized generalized eigenfunction sin(k(m+1)) / sqrt(pi t_L sin k).
inline double lead_amplitude(const LeadMode& mode, Index m) {
    return std::sin(mode.k * double(m + 1)) / std::sqrt(std::numbers::pi * mode.t_hop * std::sin(mode.k));
}

/// Boundary element g = <0|(lambda +- i0 - H^L - shift)^{-1}|0> of a semi-infinite lead,
/// the root of t_L^2 g^2 - (lambda - shift) g + 1 = 0 selected by the boundary condition.
inline Complex surface_green(double lambda, double t_hop, double shift = 0.0, Branch branch = Branch::retarded) {
    check_band_edge(lambda, t_hop, shift);
    const double x = lambda - shift;
    const double t2 = t_hop * t_hop;
    if (std::abs(x) < 2.0 * t_hop) {
        const double root = std::sqrt(4.0 * t2 - x * x);
        const double sign = branch == Branch::retarded ? -1.0 : 1.0;
        return {x / (2.0 * t2), sign * root / (2.0 * t2)};
    }
    const double root = std::sqrt(x * x - 4.0 * t2);
    return {(x - std::copysign(root, x)) / (2.0 * t2), 0.0};
}

/// Same element at complex energy z off the real axis (decaying root |t_L g| < 1).
inline Complex surface_green(Complex z, double t_hop, double shift = 0.0) {
    const Complex x = z - shift;
    const double t2 = t_hop * t_hop;
    const Complex root = std::sqrt(x * x - 4.0 * t2);
    const Complex a = (x + root) / (2.0 * t2);
    const Complex b = (x - root) / (2.0 * t2);
    return std::abs(a) < std::abs(b) ? a : b;
}

namespace detail {

inline CMatrix solve_sample_resolvent(const SystemSpec& spec, Complex z, Complex sigma1, Complex sigma2) {
    const Index ns = spec.sample.site_count;
    CMatrix a = z * CMatrix::Identity(ns, ns) - spec.sample.h_sample;
    const double tau2 = spec.coupling.tau * spec.coupling.tau;
    a(spec.sample.contact1, spec.sample.contact1) -= tau2 * sigma1;
    a(spec.sample.contact2, spec.sample.contact2) -= tau2 * sigma2;
    Eigen::PartialPivLU<CMatrix> lu(a);
    const double rcond = lu.rcond();
    if (!(rcond > 64.0 * std::numeric_limits<double>::epsilon()))
        throw ResolventPoleError("effective resolvent is singular at energy " + std::to_string(z.real()) +
                                 " (rcond " + std::to_string(rcond) + ")");
    return lu.inverse();
}

}  // namespace detail

/// G_S(lambda) = (lambda - H^S - Sigma_1 - Sigma_2)^{-1}, Sigma_a = tau^2 g_a |S^a><S^a| with lead 1 shifted by v.
inline CMatrix effective_resolvent(const SystemSpec& spec, double lambda, double v, Branch branch = Branch::retarded) {
    const Complex g1 = surface_green(lambda, spec.lead.t_hop, v, branch);
    const Complex g2 = surface_green(lambda, spec.lead.t_hop, 0.0, branch);
    return detail::solve_sample_resolvent(spec, Complex(lambda, 0.0), g1, g2);
}

/// Effective resolvent at complex energy z.
inline CMatrix effective_resolvent(const SystemSpec& spec, Complex z, double v) {
    return detail::solve_sample_resolvent(spec, z, surface_green(z, spec.lead.t_hop, v),
                                          surface_green(z, spec.lead.t_hop, 0.0));
}

/// On-shell 2x2 T-matrix t_ab(lambda), a, b in {lead 1, lead 2} (index 0 is lead 1).
struct TMatrix {
    double lambda = 0.0;
    Eigen::Matrix2cd entries = Eigen::Matrix2cd::Zero();

    Complex operator()(Lead a, Lead b) const { return entries(a == Lead::one ? 0 : 1, b == Lead::one ? 0 : 1); }
};

/// t_ab = tau^2 Psi_a(0) Psi_b(0) conj(G_S[S^b, S^a]); Psi_1 uses lambda - v and vanishes outside its band.
inline TMatrix t_matrix(const SystemSpec& spec, double lambda, double v, Branch branch = Branch::retarded) {
    const double t_hop = spec.lead.t_hop;
    check_band_edge(lambda, t_hop, v);
    check_band_edge(lambda, t_hop, 0.0);
    TMatrix out;
    out.lambda = lambda;
    const double tau = spec.coupling.tau;
    if (tau == 0.0) return out;

    const double psi[2] = {
        in_open_band(lambda, t_hop, v) ? lead_amplitude(lead_mode(lambda, t_hop, v), 0) : 0.0,
        in_open_band(lambda, t_hop, 0.0) ? lead_amplitude(lead_mode(lambda, t_hop, 0.0), 0) : 0.0,
    };
    if (psi[0] == 0.0 && psi[1] == 0.0) return out;

    const CMatrix g = effective_resolvent(spec, lambda, v, branch);
    const Index contact[2] = {spec.sample.contact1, spec.sample.contact2};
    const double tau2 = tau * tau;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            out.entries(a, b) = tau2 * psi[a] * psi[b] * std::conj(g(contact[b], contact[a]));
    return out;
}

/// Im t_22 - pi (|t_22|^2 + |t_12|^2); zero when S = 1 - 2 pi i T is unitary.
inline double optical_residual(const TMatrix& tm) {
    const Complex t22 = tm.entries(1, 1);
    const Complex t12 = tm.entries(0, 1);
    return t22.imag() - std::numbers::pi * (std::norm(t22) + std::norm(t12));
}

struct SpectrumGrid {
    Index points = 200;
    double edge_inset = 1e-8;  // relative to the width of the band intersection
};

struct TransmissionSpectrum {
    std::vector<double> grid;
    std::vector<double> transmittance;  // |t_12|^2
    std::vector<double> reverse;        // |t_21|^2
    std::vector<double> optical_residual;

    bool empty() const { return grid.empty(); }
};

/// Uniform energy grid strictly inside the band intersection.
inline std::vector<double> spectrum_energies(const BandIntersection& band, const SpectrumGrid& grid) {
    std::vector<double> out;
    if (band.empty || grid.points <= 0) return out;
    const double inset = grid.edge_inset * band.width();
    const double lo = band.lo + inset;
    const double hi = band.hi - inset;
    if (grid.points == 1) return {0.5 * (lo + hi)};
    for (Index i = 0; i < grid.points; ++i) out.push_back(lo + (hi - lo) * double(i) / double(grid.points - 1));
    return out;
}

inline TransmissionSpectrum transmittance_spectrum(const SystemSpec& spec, double v, const SpectrumGrid& grid = {}) {
    TransmissionSpectrum out;
    for (double lambda : spectrum_energies(band_support(spec.lead.t_hop, v), grid)) {
        const TMatrix tm = t_matrix(spec, lambda, v);
        out.grid.push_back(lambda);
        out.transmittance.push_back(std::norm(tm.entries(0, 1)));
        out.reverse.push_back(std::norm(tm.entries(1, 0)));
        out.optical_residual.push_back(optical_residual(tm));
    }
    return out;
}

struct BoundState {
    double energy = 0.0;
    double localization_length = 0.0;  // sites; NaN for states embedded in a band
    double weight_near_sample = 0.0;
};

/// Localized eigenstates of the truncated H + v P_1.
struct BoundStateReport {
    std::vector<BoundState> bound;     // outside both bands
    std::vector<BoundState> embedded;  // localized but inside a band, reported without interpretation
    Index trunc_len = 0;

    std::size_t count() const { return bound.size(); }
};

inline constexpr Index kLocalizationWindow = 20;
inline constexpr double kLocalizedWeight = 0.99;

/// Eigenvalues of the truncated H + v P_1 with >= 99% weight within 20 lead sites of the sample.
inline BoundStateReport bound_states(const SystemSpec& spec, double v, Index trunc_len = 500) {
    if (trunc_len < 500) throw std::invalid_argument("bound_states: truncation must be >= 500 sites");
    SystemSpec truncated = spec;
    truncated.lead.trunc_len = trunc_len;
    const TruncatedSystem sys = build_system(truncated);
    const SpectralDecomposition dec = decompose(biased_dense_hamiltonian(sys, v));

    const double t_hop = spec.lead.t_hop;
    const double gap = 1e-6 * t_hop;
    auto outside_closed_band = [&](double e, double shift) { return std::abs(e - shift) > 2.0 * t_hop + gap; };

    std::vector<Index> near;
    for (Index i = 0; i < sys.sample_sites(); ++i) near.push_back(sys.sample_index(i));
    for (Index m = 0; m < std::min(kLocalizationWindow, trunc_len); ++m) {
        near.push_back(sys.lead_index(Lead::one, m));
        near.push_back(sys.lead_index(Lead::two, m));
    }

    BoundStateReport report;
    report.trunc_len = trunc_len;
    for (Index k = 0; k < dec.eigenvalues.size(); ++k) {
        const double e = dec.eigenvalues(k);
        double weight = 0.0;
        for (Index site : near) weight += std::norm(dec.eigenvectors(site, k));
        if (weight < kLocalizedWeight) continue;

        const bool isolated = outside_closed_band(e, v) && outside_closed_band(e, 0.0);
        BoundState state{e, std::numeric_limits<double>::quiet_NaN(), weight};
        if (isolated) {
            // amplitude decays like |t_L g(E)|^m along each lead
            double length = 0.0;
            for (double shift : {v, 0.0}) {
                const double ratio = std::abs(t_hop * surface_green(e, t_hop, shift).real());
                length = std::max(length, -1.0 / std::log(ratio));
            }
            state.localization_length = length;
            report.bound.push_back(state);
        } else {
            report.embedded.push_back(state);
        }
    }
    return report;
}

}  // namespace partfree
