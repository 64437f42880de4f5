#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "partfree/equilibrium.hpp"
#include "partfree/model.hpp"
#include "partfree/protocol.hpp"

namespace partfree {

/// Replaces `block` by exp(-i dt H) * block, H sparse Hermitian.
///
/// Truncated Taylor series on sub-intervals with ||H dt_sub||_1 <= 1/2, summed until the terms drop
/// below double precision; the result is unitary to rounding.
inline void apply_exponential(const SparseCMatrix& h, double dt, CMatrix& block) {
    if (dt == 0.0) return;
    double norm1 = 0.0;
    for (Index c = 0; c < h.outerSize(); ++c) {
        double col = 0.0;
        for (SparseCMatrix::InnerIterator it(h, c); it; ++it) col += std::abs(it.value());
        norm1 = std::max(norm1, col);
    }
    const int substeps = std::max(1, int(std::ceil(norm1 * std::abs(dt) / 0.5)));
    const double h_dt = dt / substeps;
    const double scale = std::max(1.0, block.cwiseAbs().maxCoeff());
    CMatrix term;
    for (int s = 0; s < substeps; ++s) {
        term = block;
        for (int k = 1; k < 64; ++k) {
            term = (h * term) * Complex(0.0, -h_dt / k);
            block += term;
            if (term.cwiseAbs().maxCoeff() < 1e-18 * scale) break;
        }
    }
}

/// Evolution operator U(t) for H + V_1(t).
///
/// While t < t1 the full U is stepped with the exponential midpoint rule. From t1 on,
/// U(t) = exp(-i (t - t1)(H + v P_1)) U(t1), kept as Q^dagger U(t1) in the eigenbasis of H + v P_1.
struct PropagationState {
    enum class Mode { integrating, spectral };

    double t_now = 0.0;
    Mode mode = Mode::integrating;
    CMatrix u;  // U(t_now) while integrating, U(t1) afterwards
    double t_switch = 0.0;
    std::shared_ptr<const SpectralDecomposition> post_switch;
    CMatrix mixed;  // Q^dagger U(t1), spectral mode only
};

namespace detail {

inline void enter_spectral_mode(PropagationState& state, const TruncatedSystem& sys, const BiasProtocol& protocol) {
    if (!state.post_switch)
        state.post_switch = std::make_shared<const SpectralDecomposition>(
            decompose(biased_dense_hamiltonian(sys, protocol.v)));
    state.t_switch = state.t_now;
    state.mixed = state.post_switch->eigenvectors.adjoint() * state.u;
    state.mode = PropagationState::Mode::spectral;
}

inline CVector post_switch_phases(const PropagationState& state) {
    const double elapsed = state.t_now - state.t_switch;
    const RVector& w = state.post_switch->eigenvalues;
    CVector phase(w.size());
    for (Index k = 0; k < w.size(); ++k) phase(k) = std::exp(Complex(0.0, -elapsed * w(k)));
    return phase;
}

}  // namespace detail

/// U(0) = identity. Pass `post_switch` to reuse a decomposition of H + v P_1.
inline PropagationState start_propagation(const TruncatedSystem& sys, const BiasProtocol& protocol,
                                          std::shared_ptr<const SpectralDecomposition> post_switch = nullptr) {
    protocol.validate();
    PropagationState state;
    state.u = CMatrix::Identity(sys.dim(), sys.dim());
    state.post_switch = std::move(post_switch);
    if (protocol.t1 == 0.0) detail::enter_spectral_mode(state, sys, protocol);
    return state;
}

inline PropagationState propagate_to(PropagationState state, const TruncatedSystem& sys,
                                     const BiasProtocol& protocol, double t_target, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("propagate_to: dt must be > 0");
    if (t_target < state.t_now - 1e-12 * std::max(1.0, std::abs(state.t_now)))
        throw std::invalid_argument("propagate_to: t_target precedes the current time");

    if (state.mode == PropagationState::Mode::integrating) {
        const double t_stop = std::min(t_target, protocol.t1);
        const double span = t_stop - state.t_now;
        if (span > 0.0) {
            const auto steps = std::max<long>(1, long(std::ceil(span / dt - 1e-9)));
            const double h = span / double(steps);
            const double t_begin = state.t_now;
            for (long s = 0; s < steps; ++s) {
                const double mid = t_begin + (double(s) + 0.5) * h;
                apply_exponential(biased_hamiltonian(sys, protocol.v * switching_value(protocol, mid)), h, state.u);
            }
            state.t_now = t_stop;
        }
        if (state.t_now >= protocol.t1) {
            state.t_now = protocol.t1;
            detail::enter_spectral_mode(state, sys, protocol);
        }
    }
    if (state.mode == PropagationState::Mode::spectral) state.t_now = std::max(state.t_now, t_target);
    return state;
}

/// Dense U(t_now).
inline CMatrix evolution(const PropagationState& state) {
    if (state.mode == PropagationState::Mode::integrating) return state.u;
    const CVector phase = detail::post_switch_phases(state);
    return state.post_switch->eigenvectors * phase.asDiagonal() * state.mixed;
}

/// Selected rows of U(t_now), O(rows * dim^2).
inline CMatrix evolution_rows(const PropagationState& state, const std::vector<Index>& rows) {
    const auto k = static_cast<Index>(rows.size());
    if (state.mode == PropagationState::Mode::integrating) {
        CMatrix out(k, state.u.cols());
        for (Index r = 0; r < k; ++r) out.row(r) = state.u.row(rows[std::size_t(r)]);
        return out;
    }
    const CVector phase = detail::post_switch_phases(state);
    const CMatrix& q = state.post_switch->eigenvectors;
    CMatrix left(k, q.cols());
    for (Index r = 0; r < k; ++r) left.row(r) = q.row(rows[std::size_t(r)]).cwiseProduct(phase.transpose());
    return left * state.mixed;
}

/// I(t, n) = Tr{U f(H) U^dagger j_n}, using only the rows of U on the support of j_n.
inline double transient_current(const TruncatedSystem& sys, const PropagationState& state,
                                 const DensityMatrix& rho0, Index n) {
    const FiniteRankOperator j = current_operator(sys, n);
    if (j.is_zero()) return 0.0;
    const CMatrix rows = evolution_rows(state, j.support);
    const CMatrix local = rows * rho0.rho * rows.adjoint();
    Complex acc = 0.0;
    for (Index a = 0; a < local.rows(); ++a)
        for (Index b = 0; b < local.cols(); ++b) acc += local(a, b) * j.block(b, a);
    return acc.real();
}

/// Sampled I(t, n) for one measurement site.
struct CurrentTrace {
    std::vector<double> times;
    std::vector<double> values;
    Index site = 0;
    BiasProtocol protocol;
};

/// (1/T) * int_0^T I(t) dt, trapezoid on the sample grid.
inline double ergodic_average(const CurrentTrace& trace, double horizon) {
    if (trace.times.size() < 2) throw std::invalid_argument("ergodic_average: trace needs at least two samples");
    if (!(horizon > 0.0)) throw std::invalid_argument("ergodic_average: horizon must be > 0");
    if (trace.times.front() > 1e-12)
        throw std::invalid_argument("ergodic_average: trace must start at t = 0");
    if (horizon > trace.times.back() * (1.0 + 1e-12) + 1e-12)
        throw std::out_of_range("ergodic_average: horizon " + std::to_string(horizon) +
                                " exceeds trace end " + std::to_string(trace.times.back()));
    double integral = 0.0;
    for (std::size_t k = 0; k + 1 < trace.times.size(); ++k) {
        const double t0 = trace.times[k];
        if (t0 >= horizon) break;
        const double t1 = trace.times[k + 1];
        const double y0 = trace.values[k];
        double y1 = trace.values[k + 1];
        double end = t1;
        if (t1 > horizon) {
            end = horizon;
            y1 = y0 + (trace.values[k + 1] - y0) * (horizon - t0) / (t1 - t0);
        }
        integral += 0.5 * (y0 + y1) * (end - t0);
    }
    return integral / horizon;
}

/// Latest time at which a signal travelling at the maximal lead group velocity 2 t_L
/// from the truncated end cannot have reached site n, scaled by `margin`.
inline double safe_horizon(const LeadSpec& lead, Index n, double margin = 0.9) {
    if (n < 0 || n >= lead.trunc_len) throw std::out_of_range("safe_horizon: n must satisfy 0 <= n < N");
    if (!(margin > 0.0 && margin < 1.0)) throw std::invalid_argument("safe_horizon: margin must lie in (0, 1)");
    return margin * double(lead.trunc_len - n) / (2.0 * lead.t_hop);
}

struct TraceOptions {
    double dt = 0.02;
    double dt_sample = 0.1;
};

/// Records I(t, n) on t = 0, dt_sample, ..., t_end for every n in `sites` in a single propagation.
inline std::vector<CurrentTrace> record_traces(const TruncatedSystem& sys, const BiasProtocol& protocol,
                                               const DensityMatrix& rho0, const std::vector<Index>& sites,
                                               double t_end, TraceOptions options = {},
                                               std::shared_ptr<const SpectralDecomposition> post_switch = nullptr) {
    if (!(options.dt_sample > 0.0)) throw std::invalid_argument("record_traces: dt_sample must be > 0");
    if (!(t_end >= 0.0)) throw std::invalid_argument("record_traces: t_end must be >= 0");
    const long samples = long(std::floor(t_end / options.dt_sample + 1e-9)) + 1;

    std::vector<FiniteRankOperator> currents;
    std::vector<CurrentTrace> traces;
    for (Index n : sites) {
        currents.push_back(current_operator(sys, n));
        CurrentTrace tr;
        tr.site = n;
        tr.protocol = protocol;
        tr.times.reserve(std::size_t(samples));
        tr.values.reserve(std::size_t(samples));
        traces.push_back(std::move(tr));
    }

    PropagationState state = start_propagation(sys, protocol, std::move(post_switch));
    CMatrix eigen_rho;  // Q^dagger U(t1) f(H) U(t1)^dagger Q, built once the state is spectral
    for (long k = 0; k < samples; ++k) {
        const double t = double(k) * options.dt_sample;
        state = propagate_to(std::move(state), sys, protocol, t, options.dt);
        const bool spectral = state.mode == PropagationState::Mode::spectral;
        if (spectral && eigen_rho.size() == 0) eigen_rho = state.mixed * rho0.rho * state.mixed.adjoint();
        CVector phase;
        if (spectral) phase = detail::post_switch_phases(state);

        for (std::size_t s = 0; s < sites.size(); ++s) {
            const FiniteRankOperator& j = currents[s];
            double value = 0.0;
            if (!j.is_zero()) {
                const Index a = j.support[0];
                const Index b = j.support[1];
                Complex rho_ab;
                if (spectral) {
                    const CMatrix& q = state.post_switch->eigenvectors;
                    const CVector xa = q.row(a).transpose().cwiseProduct(phase);
                    const CVector xb = q.row(b).transpose().cwiseProduct(phase);
                    rho_ab = xa.cwiseProduct(eigen_rho * xb.conjugate()).sum();
                } else {
                    rho_ab = state.u.row(a).transpose().cwiseProduct(rho0.rho * state.u.row(b).adjoint()).sum();
                }
                // Tr{rho j} = rho_ab j_ba + rho_ba j_ab with rho_ba = conj(rho_ab)
                value = (rho_ab * j.block(1, 0) + std::conj(rho_ab) * j.block(0, 1)).real();
            }
            traces[s].times.push_back(t);
            traces[s].values.push_back(value);
        }
    }
    return traces;
}

/// ||P_1 e^{itH} P_2^(n-1)||, operator norm of the lead-1 x lead-2-tail block of e^{itH}.
inline double light_cone_norm(const TruncatedSystem& sys, const SpectralDecomposition& h_decomposition, double t,
                              Index n) {
    if (n < 1 || n > sys.trunc_len()) throw std::out_of_range("light_cone_norm: n must satisfy 1 <= n <= N");
    const CMatrix& q = h_decomposition.eigenvectors;
    CVector phase(q.cols());
    for (Index k = 0; k < q.cols(); ++k) phase(k) = std::exp(Complex(0.0, t * h_decomposition.eigenvalues(k)));
    const Index n_lead = sys.trunc_len();
    const Index first_tail = sys.lead_index(Lead::two, n - 1);
    const Index tail = n_lead - (n - 1);
    const CMatrix rows = q.middleRows(sys.lead_index(Lead::one, 0), n_lead) * phase.asDiagonal();
    const CMatrix block = rows * q.middleRows(first_tail, tail).adjoint();
    Eigen::JacobiSVD<CMatrix> svd(block);
    return svd.singularValues()(0);
}

inline double unitarity_defect(const CMatrix& u) {
    return (u.adjoint() * u - CMatrix::Identity(u.cols(), u.cols())).norm();
}

}  // namespace partfree
