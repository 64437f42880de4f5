#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "partfree/protocol.hpp"

namespace partfree {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using SparseCMatrix = Eigen::SparseMatrix<Complex>;

inline constexpr Complex kI{0.0, 1.0};

enum class Lead { one, two };

/// Finite sample: |Gamma| sites, Hermitian on-site/hopping block, contact sites for both leads.
struct SampleSpec {
    Index site_count = 1;
    CMatrix h_sample = CMatrix::Zero(1, 1);
    Index contact1 = 0;
    Index contact2 = 0;

    /// Single site of energy eps, contacted by both leads.
    static SampleSpec single_site(double eps) {
        SampleSpec s;
        s.h_sample = CMatrix::Constant(1, 1, Complex(eps, 0.0));
        return s;
    }

    /// Open chain of `sites` sites with on-site eps and hopping t; lead 1 on site 0, lead 2 on the last site.
    static SampleSpec chain(Index sites, double eps, double t) {
        SampleSpec s;
        s.site_count = sites;
        s.h_sample = CMatrix::Zero(sites, sites);
        for (Index i = 0; i < sites; ++i) s.h_sample(i, i) = eps;
        for (Index i = 0; i + 1 < sites; ++i) s.h_sample(i, i + 1) = s.h_sample(i + 1, i) = t;
        s.contact1 = 0;
        s.contact2 = sites - 1;
        return s;
    }

    void validate() const {
        if (site_count <= 0) throw std::invalid_argument("sample.site_count must be positive");
        if (h_sample.rows() != site_count || h_sample.cols() != site_count)
            throw std::invalid_argument("sample.h must be site_count x site_count");
        if (!h_sample.allFinite()) throw std::invalid_argument("sample.h has non-finite entries");
        const double scale = std::max(1.0, h_sample.norm());
        if ((h_sample - h_sample.adjoint()).norm() > 1e-12 * scale)
            throw std::invalid_argument("sample.h is not Hermitian");
        if (contact1 < 0 || contact1 >= site_count)
            throw std::out_of_range("sample.contact1 out of range");
        if (contact2 < 0 || contact2 >= site_count)
            throw std::out_of_range("sample.contact2 out of range");
    }
};

/// Both leads share the hopping t_L and are truncated to `trunc_len` sites with a Dirichlet end.
struct LeadSpec {
    double t_hop = 1.0;
    Index trunc_len = 400;

    void validate() const {
        if (!(t_hop > 0.0) || !std::isfinite(t_hop)) throw std::invalid_argument("lead.t_hop must be > 0");
        if (trunc_len < 2) throw std::invalid_argument("lead.trunc_len must be >= 2");
    }
};

struct CouplingSpec {
    double tau = 0.5;

    void validate() const {
        if (!(tau >= 0.0) || !std::isfinite(tau)) throw std::invalid_argument("coupling.tau must be >= 0");
    }
};

struct ThermalSpec {
    double beta = 10.0;
    double mu = 0.0;

    void validate() const {
        if (!(beta >= 0.0) || !std::isfinite(beta))
            throw std::invalid_argument("thermal.beta must be finite and >= 0");
        if (!std::isfinite(mu)) throw std::invalid_argument("thermal.mu must be finite");
    }
};

struct SystemSpec {
    SampleSpec sample;
    LeadSpec lead;
    CouplingSpec coupling;
    ThermalSpec thermal;

    void validate() const {
        sample.validate();
        lead.validate();
        coupling.validate();
        thermal.validate();
    }

    /// Single-site resonant level used throughout the tests and the default config.
    static SystemSpec benchmark() {
        SystemSpec s;
        s.sample = SampleSpec::single_site(0.0);
        s.lead = {1.0, 400};
        s.coupling = {0.5};
        s.thermal = {10.0, 0.0};
        return s;
    }
};

/// Operator supported on a handful of sites; `block` is its matrix on `support`.
struct FiniteRankOperator {
    std::vector<Index> support;
    CMatrix block;

    bool is_zero() const { return block.size() == 0 || block.cwiseAbs().maxCoeff() == 0.0; }

    CMatrix dense(Index dim) const {
        CMatrix out = CMatrix::Zero(dim, dim);
        for (std::size_t a = 0; a < support.size(); ++a)
            for (std::size_t b = 0; b < support.size(); ++b)
                out(support[a], support[b]) = block(Index(a), Index(b));
        return out;
    }

    CVector apply(const CVector& x) const {
        CVector out = CVector::Zero(x.size());
        for (std::size_t a = 0; a < support.size(); ++a)
            for (std::size_t b = 0; b < support.size(); ++b)
                out(support[a]) += block(Index(a), Index(b)) * x(support[b]);
        return out;
    }

    /// Tr{rho * A}, touching only the support of A.
    Complex trace_with(const CMatrix& rho) const {
        Complex acc = 0.0;
        for (std::size_t a = 0; a < support.size(); ++a)
            for (std::size_t b = 0; b < support.size(); ++b)
                acc += rho(support[a], support[b]) * block(Index(b), Index(a));
        return acc;
    }
};

/// Truncated one-particle Hamiltonian on sample + 2 x N lead sites.
///
/// Site ordering: sample sites [0, |Gamma|), lead-1 sites |Gamma| + m, lead-2 sites |Gamma| + N + m,
/// with m = 0 the site touching the sample.
class TruncatedSystem {
public:
    TruncatedSystem(SystemSpec spec, CMatrix h_total)
        : spec_(std::move(spec)), h_total_(std::move(h_total)) {
        h_sparse_ = h_total_.sparseView(0.0, 0.0);
        h_sparse_.makeCompressed();
    }

    const SystemSpec& spec() const { return spec_; }
    Index dim() const { return h_total_.rows(); }
    Index sample_sites() const { return spec_.sample.site_count; }
    Index trunc_len() const { return spec_.lead.trunc_len; }
    double t_hop() const { return spec_.lead.t_hop; }

    Index sample_index(Index site) const { return site; }

    Index lead_index(Lead lead, Index m) const {
        const Index base = sample_sites() + (lead == Lead::one ? 0 : trunc_len());
        return base + m;
    }

    Index contact_index(Lead lead) const {
        return lead == Lead::one ? spec_.sample.contact1 : spec_.sample.contact2;
    }

    const CMatrix& hamiltonian() const { return h_total_; }
    const SparseCMatrix& sparse_hamiltonian() const { return h_sparse_; }

private:
    SystemSpec spec_;
    CMatrix h_total_;
    SparseCMatrix h_sparse_;
};

inline TruncatedSystem build_system(const SystemSpec& spec) {
    spec.validate();
    const Index ns = spec.sample.site_count;
    const Index n = spec.lead.trunc_len;
    const Index dim = ns + 2 * n;

    // lower triangle first, mirrored below
    CMatrix h = CMatrix::Zero(dim, dim);
    for (Index i = 0; i < ns; ++i) {
        h(i, i) = Complex(spec.sample.h_sample(i, i).real(), 0.0);
        for (Index j = 0; j < i; ++j) h(i, j) = spec.sample.h_sample(i, j);
    }
    for (Index lead = 0; lead < 2; ++lead) {
        const Index base = ns + lead * n;
        for (Index m = 0; m + 1 < n; ++m) h(base + m + 1, base + m) = spec.lead.t_hop;
        const Index contact = lead == 0 ? spec.sample.contact1 : spec.sample.contact2;
        h(base, contact) = spec.coupling.tau;
    }
    for (Index i = 0; i < dim; ++i)
        for (Index j = 0; j < i; ++j) h(j, i) = std::conj(h(i, j));

    return TruncatedSystem(spec, std::move(h));
}

inline FiniteRankOperator index_projector(std::vector<Index> support) {
    const auto k = static_cast<Index>(support.size());
    return {std::move(support), CMatrix::Identity(k, k)};
}

/// P_1: projector onto all lead-1 sites.
inline FiniteRankOperator projector_lead1(const TruncatedSystem& sys) {
    std::vector<Index> support;
    support.reserve(std::size_t(sys.trunc_len()));
    for (Index m = 0; m < sys.trunc_len(); ++m) support.push_back(sys.lead_index(Lead::one, m));
    return index_projector(std::move(support));
}

/// P_2^(n): projector onto lead-2 sites {n, ..., N-1}.
inline FiniteRankOperator projector_lead2_tail(const TruncatedSystem& sys, Index n) {
    if (n < 0 || n >= sys.trunc_len())
        throw std::out_of_range("projector_lead2_tail: n must satisfy 0 <= n < N (n=" + std::to_string(n) + ")");
    std::vector<Index> support;
    for (Index m = n; m < sys.trunc_len(); ++m) support.push_back(sys.lead_index(Lead::two, m));
    return index_projector(std::move(support));
}

/// Current operator j_n = i[H, P_2^(n)]; rank <= 2, supported on the bond entering the tail.
///
/// Entries follow the literal commutator: j(a, b) = i H(a, b) for a outside and b inside the tail,
/// j(b, a) = -i H(b, a). A positive expectation is charge flowing into the tail.
inline FiniteRankOperator current_operator(const TruncatedSystem& sys, Index n) {
    if (n < 0 || n >= sys.trunc_len() - 1)
        throw std::out_of_range("current_operator: n must satisfy 0 <= n < N-1 (n=" + std::to_string(n) + ")");
    const Index inside = sys.lead_index(Lead::two, n);
    const Index outside = n == 0 ? sys.sample_index(sys.contact_index(Lead::two))
                                 : sys.lead_index(Lead::two, n - 1);
    const Complex hop = sys.hamiltonian()(outside, inside);
    CMatrix block = CMatrix::Zero(2, 2);
    block(0, 1) = kI * hop;
    block(1, 0) = -kI * std::conj(hop);
    return {{outside, inside}, std::move(block)};
}

/// V_1(t) = v * phi(t) * P_1.
inline FiniteRankOperator bias_operator(const TruncatedSystem& sys, const BiasProtocol& protocol, double t) {
    FiniteRankOperator p1 = projector_lead1(sys);
    p1.block *= protocol.v * switching_value(protocol, t);
    return p1;
}

/// Sparse H + c * P_1.
inline SparseCMatrix biased_hamiltonian(const TruncatedSystem& sys, double bias) {
    SparseCMatrix h = sys.sparse_hamiltonian();
    if (bias != 0.0) {
        std::vector<Eigen::Triplet<Complex>> diag;
        diag.reserve(std::size_t(sys.trunc_len()));
        for (Index m = 0; m < sys.trunc_len(); ++m) {
            const Index k = sys.lead_index(Lead::one, m);
            diag.emplace_back(k, k, Complex(bias, 0.0));
        }
        SparseCMatrix shift(sys.dim(), sys.dim());
        shift.setFromTriplets(diag.begin(), diag.end());
        h += shift;
        h.makeCompressed();
    }
    return h;
}

/// Dense H + c * P_1.
inline CMatrix biased_dense_hamiltonian(const TruncatedSystem& sys, double bias) {
    CMatrix h = sys.hamiltonian();
    for (Index m = 0; m < sys.trunc_len(); ++m) {
        const Index k = sys.lead_index(Lead::one, m);
        h(k, k) += bias;
    }
    return h;
}

}  // namespace partfree
