#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

#include "partfree/model.hpp"

namespace partfree {

/// H = Q diag(eigenvalues) Q^dagger, eigenvalues ascending.
struct SpectralDecomposition {
    RVector eigenvalues;
    CMatrix eigenvectors;

    /// Q diag(f(lambda)) Q^dagger for a real or complex valued f.
    template <class F>
    CMatrix apply(F&& f) const {
        const Index n = eigenvalues.size();
        CVector weights(n);
        for (Index k = 0; k < n; ++k) weights(k) = f(eigenvalues(k));
        return eigenvectors * weights.asDiagonal() * eigenvectors.adjoint();
    }

    /// e^{-i t H}.
    CMatrix evolution(double t) const {
        return apply([t](double e) { return std::exp(Complex(0.0, -t * e)); });
    }
};

/// Dense Hermitian eigendecomposition; takes the real symmetric path when H has no imaginary part.
inline SpectralDecomposition decompose(const CMatrix& h) {
    SpectralDecomposition out;
    if (h.imag().cwiseAbs().maxCoeff() == 0.0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h.real());
        if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition did not converge");
        out.eigenvalues = solver.eigenvalues();
        out.eigenvectors = solver.eigenvectors().cast<Complex>();
    } else {
        Eigen::SelfAdjointEigenSolver<CMatrix> solver(h);
        if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition did not converge");
        out.eigenvalues = solver.eigenvalues();
        out.eigenvectors = solver.eigenvectors();
    }
    return out;
}

/// One-particle density matrix; its trace is the mean particle number.
struct DensityMatrix {
    CMatrix rho;
};

/// 1 / (e^{beta (lambda - mu)} + 1), without overflow for large beta.
inline double fermi_weight(double lambda, const ThermalSpec& thermal) {
    const double x = thermal.beta * (lambda - thermal.mu);
    if (x > 0.0) {
        const double e = std::exp(-x);
        return e / (1.0 + e);
    }
    return 1.0 / (std::exp(x) + 1.0);
}

inline DensityMatrix equilibrium_density(const SpectralDecomposition& decomposition, const ThermalSpec& thermal) {
    return {decomposition.apply([&](double e) { return Complex(fermi_weight(e, thermal), 0.0); })};
}

/// f(H) of the coupled, unbiased system.
inline DensityMatrix equilibrium_density(const TruncatedSystem& sys, const ThermalSpec& thermal) {
    return equilibrium_density(decompose(sys.hamiltonian()), thermal);
}

inline DensityMatrix equilibrium_density(const TruncatedSystem& sys) {
    return equilibrium_density(sys, sys.spec().thermal);
}

}  // namespace partfree
