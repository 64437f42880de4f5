#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "partfree/dynamics.hpp"
#include "partfree/equilibrium.hpp"
#include "partfree/landauer.hpp"
#include "partfree/model.hpp"
#include "partfree/scattering.hpp"

namespace partfree {

struct CheckResult {
    std::string name;
    bool ok = false;
    std::string detail;
};

struct VerifyReport {
    std::vector<CheckResult> checks;

    bool all_ok() const {
        return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.ok; });
    }
};

struct VerifySettings {
    SystemSpec system;  // lead.trunc_len is the truncation N
    BiasProtocol protocol;
    TraceOptions trace;
    double horizon = 150.0;
    std::vector<Index> n_list{0};
    QuadratureSpec quad;
    Index spectrum_points = 200;
    double margin = 0.9;
    double tolerance = 0.02;
};

/// [A, P] for the projector onto `mask`: entries A(i, j) (m_j - m_i).
inline CMatrix commutator_with_projector(const CMatrix& a, const std::vector<bool>& mask) {
    CMatrix out = CMatrix::Zero(a.rows(), a.cols());
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i) {
            const int d = int(mask[std::size_t(j)]) - int(mask[std::size_t(i)]);
            if (d != 0) out(i, j) = double(d) * a(i, j);
        }
    return out;
}

inline std::vector<bool> support_mask(const FiniteRankOperator& op, Index dim) {
    std::vector<bool> mask(std::size_t(dim), false);
    for (Index s : op.support) mask[std::size_t(s)] = true;
    return mask;
}

namespace detail {

inline std::string sci(double x) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << x;
    return os.str();
}

/// Splits h_total into sample, lead and tunnelling parts.
struct HamiltonianParts {
    CMatrix sample, leads, tunnel;
};

inline HamiltonianParts split_hamiltonian(const TruncatedSystem& sys) {
    const CMatrix& h = sys.hamiltonian();
    const Index ns = sys.sample_sites();
    HamiltonianParts parts{CMatrix::Zero(h.rows(), h.cols()), CMatrix::Zero(h.rows(), h.cols()),
                           CMatrix::Zero(h.rows(), h.cols())};
    for (Index j = 0; j < h.cols(); ++j)
        for (Index i = 0; i < h.rows(); ++i) {
            const bool si = i < ns;
            const bool sj = j < ns;
            if (si && sj) parts.sample(i, j) = h(i, j);
            else if (!si && !sj) parts.leads(i, j) = h(i, j);
            else parts.tunnel(i, j) = h(i, j);
        }
    return parts;
}

}  // namespace detail

/// Runs the invariant suites of all modules on one configuration.
///
/// The reflection-safe horizon is checked first; a violation aborts before any propagation.
inline VerifyReport run_verification(const VerifySettings& settings,
                                     const std::function<void(const CheckResult&)>& on_check = {}) {
    VerifyReport report;
    auto record = [&](std::string name, bool ok, std::string detail) {
        report.checks.push_back({std::move(name), ok, std::move(detail)});
        if (on_check) on_check(report.checks.back());
    };

    const SystemSpec& spec = settings.system;
    const double v = settings.protocol.v;
    const double t_hop = spec.lead.t_hop;
    const Index n_lead = spec.lead.trunc_len;

    try {
        check_horizon(spec.lead, settings.n_list, settings.horizon, settings.margin);
        record("dynamics: horizon inside reflection-safe window", true,
               "T=" + std::to_string(settings.horizon));
    } catch (const std::out_of_range& e) {
        record("dynamics: horizon inside reflection-safe window", false, e.what());
        return report;
    }

    const TruncatedSystem sys = build_system(spec);
    const Index dim = sys.dim();
    const CMatrix& h = sys.hamiltonian();

    // model
    record("model: h_total exactly Hermitian", (h - h.adjoint()).cwiseAbs().maxCoeff() == 0.0, "");
    {
        bool ok = true;
        for (Lead lead : {Lead::one, Lead::two}) {
            for (Index m = 0; m + 1 < n_lead; ++m)
                ok = ok && h(sys.lead_index(lead, m), sys.lead_index(lead, m + 1)) == Complex(t_hop, 0.0);
            for (Index m = 0; m < n_lead; ++m) ok = ok && h(sys.lead_index(lead, m), sys.lead_index(lead, m)) == 0.0;
        }
        Index sample_nnz = 0;
        for (Index i = 0; i < sys.sample_sites(); ++i)
            for (Index j = 0; j < sys.sample_sites(); ++j) sample_nnz += h(i, j) != 0.0;
        Index nnz = 0;
        for (Index j = 0; j < dim; ++j)
            for (Index i = 0; i < dim; ++i) nnz += h(i, j) != 0.0;
        const Index expected = sample_nnz + 4 * (n_lead - 1) + (spec.coupling.tau != 0.0 ? 4 : 0);
        ok = ok && nnz == expected;
        record("model: lead hopping and coupling pattern", ok,
               "nonzeros " + std::to_string(nnz) + " expected " + std::to_string(expected));
    }
    {
        const auto parts = detail::split_hamiltonian(sys);
        const auto p1 = support_mask(projector_lead1(sys), dim);
        bool ok = true;
        std::string detail;
        std::vector<Index> probe{0, 1, 2, n_lead / 2, n_lead - 1};
        for (Index n : probe) {
            if (n < 0 || n >= n_lead) continue;
            const auto p2 = support_mask(projector_lead2_tail(sys, n), dim);
            bool overlap = false;
            for (Index i = 0; i < dim; ++i) overlap = overlap || (p1[std::size_t(i)] && p2[std::size_t(i)]);
            const double hs = commutator_with_projector(parts.sample, p2).cwiseAbs().maxCoeff();
            const double ht = commutator_with_projector(parts.tunnel, p2).cwiseAbs().maxCoeff();
            const double hl = commutator_with_projector(parts.leads, p2).cwiseAbs().maxCoeff();
            const bool this_ok = !overlap && hs == 0.0 && (n == 0 || ht == 0.0) && (n == 0 ? hl == 0.0 : hl != 0.0);
            if (!this_ok) detail += " n=" + std::to_string(n);
            ok = ok && this_ok;
        }
        record("model: projector support relations", ok, detail.empty() ? "" : "violated at" + detail);
    }
    {
        bool ok = true;
        for (Index n : settings.n_list) {
            const FiniteRankOperator j = current_operator(sys, n);
            ok = ok && j.support.size() <= 2 && std::abs(j.block.trace()) == 0.0 &&
                 (j.block - j.block.adjoint()).cwiseAbs().maxCoeff() == 0.0;
        }
        record("model: current operators Hermitian, rank <= 2, traceless", ok, "");
    }

    // equilibrium
    const SpectralDecomposition h_dec = decompose(h);
    const DensityMatrix rho0 = equilibrium_density(h_dec, spec.thermal);
    {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(rho0.rho, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        record("equilibrium: spectrum of f(H) in [0, 1]", lo >= -1e-10 && hi <= 1.0 + 1e-10,
               "min " + detail::sci(lo) + " max " + detail::sci(hi));
        const double comm = (rho0.rho * h - h * rho0.rho).norm();
        const double bound = 1e-10 * std::max(1.0, h.norm());
        record("equilibrium: [f(H), H] = 0", comm <= bound, "norm " + detail::sci(comm));
    }
    {
        std::vector<Index> sites = settings.n_list;
        for (Index n : {0, 1, 5, 20})
            if (n < n_lead - 1) sites.push_back(n);
        double worst = 0.0;
        for (Index n : sites) worst = std::max(worst, std::abs(current_operator(sys, n).trace_with(rho0.rho)));
        record("equilibrium: null current Tr{f(H) j_n}", worst <= 1e-10, "max " + detail::sci(worst));
    }

    // scattering
    {
        double quad = 0.0;
        double density = 0.0;
        for (int i = 1; i < 400; ++i) {
            const double lambda = -4.0 * t_hop + 8.0 * t_hop * i / 400.0;
            if (std::abs(std::abs(lambda) - 2.0 * t_hop) < 1e-6 * t_hop) continue;
            const Complex g = surface_green(lambda, t_hop);
            quad = std::max(quad, std::abs(t_hop * t_hop * g * g - lambda * g + 1.0));
            if (std::abs(lambda) < 2.0 * t_hop) {
                const double psi = lead_amplitude(lead_mode(lambda, t_hop), 0);
                density = std::max(density, std::abs(-g.imag() / std::numbers::pi - psi * psi));
            }
        }
        record("scattering: surface Green quadratic and spectral-density identities", quad <= 1e-12 && density <= 1e-12,
               "quadratic " + detail::sci(quad) + " density " + detail::sci(density));
    }
    {
        const auto spectrum = transmittance_spectrum(spec, v, {settings.spectrum_points, settings.quad.edge_inset});
        double residual = 0.0;
        double asym = 0.0;
        double peak = 0.0;
        for (std::size_t i = 0; i < spectrum.grid.size(); ++i) {
            residual = std::max(residual, std::abs(spectrum.optical_residual[i]));
            asym = std::max(asym, std::abs(spectrum.transmittance[i] - spectrum.reverse[i]));
            peak = std::max(peak, spectrum.transmittance[i]);
        }
        record("scattering: optical theorem on spectrum grid", residual <= 1e-10, "max " + detail::sci(residual));
        record("scattering: T12 = T21", asym <= 1e-12, "max " + detail::sci(asym));
        const double bound = 1.0 / (4.0 * std::numbers::pi * std::numbers::pi);
        record("scattering: 0 <= T12 <= 1/(4 pi^2)", peak <= bound + 1e-10, "peak " + detail::sci(peak));
    }
    {
        const auto states = bound_states(spec, v, std::max<Index>(500, n_lead));
        std::string detail = std::to_string(states.count()) + " bound, " + std::to_string(states.embedded.size()) +
                             " embedded";
        if (states.count() > 0) detail += " (persistent oscillations expected in I(t,n))";
        record("scattering: bound-state scan", true, detail);
    }

    // landauer
    const SteadyCurrentResult steady = steady_current(spec, v, settings.quad);
    record("landauer: quadrature converged", std::isfinite(steady.value) &&
                                                 steady.quad_error <= 1e-8 * std::max(1.0, std::abs(steady.value)),
           "I_inf " + detail::sci(steady.value) + " error " + detail::sci(steady.quad_error));

    // dynamics
    {
        const double t_check = std::min(10.0, settings.horizon);
        const Index n_far = Index(std::floor(2.0 * t_hop * t_check + 20.0)) + 1;
        if (n_far < n_lead - 1) {
            const double norm = light_cone_norm(sys, h_dec, t_check, n_far);
            record("dynamics: light cone ||P1 exp(itH) P2^(n-1)||", norm <= 1e-6,
                   "t=" + std::to_string(t_check) + " n=" + std::to_string(n_far) + " norm " + detail::sci(norm));
            PropagationState state = start_propagation(sys, settings.protocol);
            state = propagate_to(std::move(state), sys, settings.protocol, t_check, settings.trace.dt);
            double worst = 0.0;
            for (Index n = n_far; n < n_lead - 1; n += std::max<Index>(1, (n_lead - 1 - n_far) / 16))
                worst = std::max(worst, std::abs(transient_current(sys, state, rho0, n)));
            record("dynamics: far-site current vanishes at fixed t", worst <= 1e-6, "max " + detail::sci(worst));
        } else {
            record("dynamics: light cone", true, "skipped: N too short for t=" + std::to_string(t_check));
        }
    }
    {
        const double trace0 = rho0.rho.trace().real();
        const RVector spectrum0 = Eigen::SelfAdjointEigenSolver<CMatrix>(rho0.rho, Eigen::EigenvaluesOnly).eigenvalues();
        double unitarity = 0.0;
        double trace_drift = 0.0;
        double spectral_drift = 0.0;
        PropagationState state = start_propagation(sys, settings.protocol);
        for (double frac : {1.0 / 3.0, 2.0 / 3.0, 1.0}) {
            state = propagate_to(std::move(state), sys, settings.protocol, frac * settings.horizon, settings.trace.dt);
            const CMatrix u = evolution(state);
            unitarity = std::max(unitarity, unitarity_defect(u));
            const CMatrix rho = u * rho0.rho * u.adjoint();
            trace_drift = std::max(trace_drift, std::abs(rho.trace().real() - trace0) / std::max(1.0, std::abs(trace0)));
            const RVector spectrum = Eigen::SelfAdjointEigenSolver<CMatrix>(rho, Eigen::EigenvaluesOnly).eigenvalues();
            spectral_drift = std::max(spectral_drift, (spectrum - spectrum0).cwiseAbs().maxCoeff());
        }
        record("dynamics: unitarity ||U^dagger U - 1||", unitarity <= 1e-8, "max " + detail::sci(unitarity));
        record("dynamics: trace conservation", trace_drift <= 1e-8, "max " + detail::sci(trace_drift));
        record("dynamics: spectrum of rho(t) equals that of f(H)", spectral_drift <= 1e-8,
               "max " + detail::sci(spectral_drift));
    }

    // Landauer vs ergodic average
    {
        ReconcileOptions options;
        options.trace = settings.trace;
        options.tolerance = settings.tolerance;
        options.margin = settings.margin;
        options.quad = settings.quad;
        const ReconcileReport rec = reconcile(spec, {settings.protocol}, n_lead, settings.horizon, settings.n_list, options);
        for (const ReconcileRow& row : rec.rows) {
            record("reconcile: ergodic average vs Landauer at n=" + std::to_string(row.site) + " (" +
                       std::string(to_string(row.protocol.shape)) + ")",
                   row.ok,
                   "ergodic " + detail::sci(row.ergodic) + " I_inf " + detail::sci(rec.steady.value) + " deviation " +
                       detail::sci(row.deviation));
        }
    }
    return report;
}

}  // namespace partfree
