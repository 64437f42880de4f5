#pragma once

// Independent reference computations. None of these call into the scattering or
// dynamics code paths they are used to check.

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "partfree/model.hpp"

namespace oracle {

using partfree::CMatrix;
using partfree::Complex;
using partfree::CVector;
using partfree::Index;

/// i (H P - P H) with P the diagonal 0/1 mask, straight from the dense matrices.
inline CMatrix commutator_current(const CMatrix& h, const std::vector<bool>& mask) {
    CMatrix p = CMatrix::Zero(h.rows(), h.cols());
    for (Index i = 0; i < h.rows(); ++i)
        if (mask[std::size_t(i)]) p(i, i) = 1.0;
    return Complex(0.0, 1.0) * (h * p - p * h);
}

/// Lead-2 tail mask {n, ..., N-1}.
inline std::vector<bool> tail_mask(const partfree::TruncatedSystem& sys, Index n) {
    std::vector<bool> mask(std::size_t(sys.dim()), false);
    for (Index m = n; m < sys.trunc_len(); ++m) mask[std::size_t(sys.lead_index(partfree::Lead::two, m))] = true;
    return mask;
}

/// e^{-i t H} by Pade scaling and squaring, no eigendecomposition.
inline CMatrix pade_evolution(const CMatrix& h, double t) {
    const CMatrix a = Complex(0.0, -t) * h;
    return a.exp();
}

/// Tr{rho A} with full dense matrices.
inline Complex dense_trace(const CMatrix& rho, const CMatrix& a) { return (rho * a).trace(); }

/// Fermi function evaluated in long double, without the overflow-safe branch.
inline double fermi_long(double lambda, double beta, double mu) {
    const long double x = (long double)beta * ((long double)lambda - mu);
    if (x > 11000.0L) return 0.0;
    return double(1.0L / (std::exp(x) + 1.0L));
}

/// <sample| (H_N + v P_1 - lambda - i eta)^{-1} |sample> via sparse LU of the truncated system.
inline CMatrix truncated_resolvent(const partfree::TruncatedSystem& sys, double v, double lambda, double eta) {
    const Index dim = sys.dim();
    std::vector<Eigen::Triplet<Complex>> trip;
    const CMatrix& h = sys.hamiltonian();
    for (Index j = 0; j < dim; ++j)
        for (Index i = 0; i < dim; ++i)
            if (h(i, j) != 0.0) trip.emplace_back(i, j, -h(i, j));
    for (Index i = 0; i < dim; ++i) {
        double shift = 0.0;
        if (i >= sys.lead_index(partfree::Lead::one, 0) && i < sys.lead_index(partfree::Lead::two, 0)) shift = v;
        trip.emplace_back(i, i, Complex(lambda - shift, eta));
    }
    Eigen::SparseMatrix<Complex> a(dim, dim);
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu(a);
    const Index ns = sys.sample_sites();
    CMatrix rhs = CMatrix::Zero(dim, ns);
    for (Index i = 0; i < ns; ++i) rhs(i, i) = 1.0;
    const CMatrix x = lu.solve(rhs);
    return x.topRows(ns);
}

/// Adaptive Simpson to absolute tolerance `tol`.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 50) {
    std::function<double(double, double, double, double, double, double, double, int)> rec =
        [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps, int d) {
            const double mid = 0.5 * (lo + hi);
            const double lm = 0.5 * (lo + mid);
            const double rm = 0.5 * (mid + hi);
            const double flm = f(lm);
            const double frm = f(rm);
            const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
            const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
            if (d <= 0 || std::abs(left + right - whole) <= 15.0 * eps)
                return left + right + (left + right - whole) / 15.0;
            return rec(lo, mid, flo, flm, fmid, left, 0.5 * eps, d - 1) +
                   rec(mid, hi, fmid, frm, fhi, right, 0.5 * eps, d - 1);
        };
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, depth);
}

/// Root of E - eps0 - 2 tau^2 g(E) = 0 above the band (single site, both leads unbiased), by bisection.
/// g(E) is the decaying root (E - sqrt(E^2 - 4 t^2)) / (2 t^2), written out here independently.
inline double single_site_bound_state(double eps0, double tau, double t_hop) {
    auto g = [&](double e) { return (e - std::sqrt(e * e - 4.0 * t_hop * t_hop)) / (2.0 * t_hop * t_hop); };
    auto f = [&](double e) { return e - eps0 - 2.0 * tau * tau * g(e); };
    double lo = 2.0 * t_hop + 1e-14;
    double hi = std::max(eps0, 2.0 * t_hop) + 10.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Wave-packet transmission through a single resonant level between two chains.
///
/// A Gaussian packet sent from lead 1 toward the sample is propagated on a long open chain
/// until it has left the scattering region; the probability found in lead 2 is compared with
/// int |c(lambda)|^2 4 pi^2 T(lambda) dlambda, where c(lambda) is the packet's overlap with the
/// generalized eigenfunctions of the lead.
struct WavePacketResult {
    double transmitted = 0.0;        // from time propagation
    double predicted = 0.0;          // from the transmittance curve supplied
    double energy_spread = 0.0;      // rms energy width of the packet
    double norm_defect = 0.0;
};

inline WavePacketResult wave_packet_transmission(double eps0, double tau, double t_hop, Index lead_sites,
                                                 double center, double width, double k0,
                                                 const std::function<double(double)>& transmittance) {
    // chain: lead-1 sites m = 0..L-1 are at positions L-1-m, sample at L, lead-2 site m at L+1+m
    const Index L = lead_sites;
    const Index dim = 2 * L + 1;
    std::vector<Eigen::Triplet<Complex>> trip;
    for (Index i = 0; i + 1 < dim; ++i) {
        const double hop = (i == L - 1 || i == L) ? tau : t_hop;
        trip.emplace_back(i, i + 1, hop);
        trip.emplace_back(i + 1, i, hop);
    }
    trip.emplace_back(L, L, eps0);
    Eigen::SparseMatrix<Complex> h(dim, dim);
    h.setFromTriplets(trip.begin(), trip.end());

    // packet on lead-1 site index m (distance from the sample); with hopping +t the group velocity
    // is -2t sin k, so e^{+i k0 m} moves toward decreasing m, i.e. toward the sample
    CVector psi = CVector::Zero(dim);
    std::vector<Complex> lead_psi(static_cast<std::size_t>(L));
    double norm = 0.0;
    for (Index m = 0; m < L; ++m) {
        const double x = double(m) - center;
        const Complex a = std::exp(-x * x / (4.0 * width * width)) * std::exp(Complex(0.0, k0 * double(m)));
        lead_psi[std::size_t(m)] = a;
        norm += std::norm(a);
    }
    for (Index m = 0; m < L; ++m) psi(L - 1 - m) = lead_psi[std::size_t(m)] / std::sqrt(norm);

    // spectral weight |c(lambda)|^2 with c(lambda) = sum_m Psi(lambda; m) psi(m) on the Dirichlet lead
    auto weight = [&](double lambda) {
        const double k = std::acos(lambda / (2.0 * t_hop));
        const double scale = 1.0 / std::sqrt(std::numbers::pi * t_hop * std::sin(k));
        Complex c = 0.0;
        for (Index m = 0; m < L; ++m) c += std::sin(k * double(m + 1)) * scale * psi(L - 1 - m);
        return std::norm(c);
    };
    WavePacketResult out;
    const double edge = 2.0 * t_hop * (1.0 - 1e-9);
    out.predicted = adaptive_simpson(
        [&](double lambda) { return weight(lambda) * 4.0 * std::numbers::pi * std::numbers::pi * transmittance(lambda); },
        -edge, edge, 1e-12, 30);
    const double mean = adaptive_simpson([&](double l) { return l * weight(l); }, -edge, edge, 1e-12, 30);
    const double second = adaptive_simpson([&](double l) { return l * l * weight(l); }, -edge, edge, 1e-12, 30);
    out.energy_spread = std::sqrt(std::max(0.0, second - mean * mean));

    // group velocity 2 t sin k0; travel until the packet is well past the sample
    const double velocity = 2.0 * t_hop * std::sin(k0);
    const double t_total = (2.0 * center) / velocity;
    const double dt = 0.25 / (2.0 * t_hop + std::abs(eps0) + tau);
    const auto steps = long(std::ceil(t_total / dt));
    const double h_dt = t_total / double(steps);
    for (long s = 0; s < steps; ++s) {
        // Taylor series of exp(-i h dt) applied to the state, carried to machine precision
        CVector term = psi;
        CVector acc = psi;
        for (int k = 1; k < 40; ++k) {
            term = (h * term) * Complex(0.0, -h_dt / double(k));
            acc += term;
            if (term.norm() < 1e-18) break;
        }
        psi = acc;
    }
    out.norm_defect = std::abs(psi.squaredNorm() - 1.0);
    for (Index i = L + 1; i < dim; ++i) out.transmitted += std::norm(psi(i));
    return out;
}

/// Deterministic generator for property tests.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    Index index(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(engine_); }

    CVector vector(Index n) {
        CVector x(n);
        for (Index i = 0; i < n; ++i) x(i) = Complex(uniform(-1, 1), uniform(-1, 1));
        return x;
    }

    /// Random Hermitian sample block with entries in [-1, 1].
    CMatrix hermitian(Index n) {
        CMatrix a(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) a(i, j) = Complex(uniform(-1, 1), uniform(-1, 1));
        return 0.5 * (a + a.adjoint());
    }

    /// Random valid system: 1..4 sample sites, random contacts and couplings.
    partfree::SystemSpec system(Index trunc_len) {
        partfree::SystemSpec s;
        const Index ns = index(1, 4);
        s.sample.site_count = ns;
        s.sample.h_sample = hermitian(ns);
        s.sample.contact1 = index(0, ns - 1);
        s.sample.contact2 = index(0, ns - 1);
        s.lead = {uniform(0.5, 1.5), trunc_len};
        s.coupling = {uniform(0.1, 1.0)};
        s.thermal = {uniform(0.5, 20.0), uniform(-0.5, 0.5)};
        return s;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace oracle
