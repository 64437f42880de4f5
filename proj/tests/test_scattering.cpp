#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "partfree/equilibrium.hpp"
#include "partfree/scattering.hpp"

using namespace partfree;

namespace {

constexpr double kPi = std::numbers::pi;

SystemSpec single(double eps, double tau) {
    SystemSpec s = SystemSpec::benchmark();
    s.sample = SampleSpec::single_site(eps);
    s.coupling.tau = tau;
    return s;
}

}  // namespace

TEST(LeadAmplitude, BandCentre) {
    const auto mode = lead_mode(0.0, 1.0);
    EXPECT_NEAR(mode.k, kPi / 2, 1e-15);
    EXPECT_NEAR(lead_amplitude(mode, 0), 1.0 / std::sqrt(kPi), 1e-15);
    EXPECT_NEAR(lead_amplitude(mode, 1), 0.0, 1e-15);
}

TEST(LeadAmplitude, DispersionAndShift) {
    oracle::Rng rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        const double t = rng.uniform(0.5, 2.0);
        const double shift = rng.uniform(-1.0, 1.0);
        const double lambda = shift + rng.uniform(-1.99, 1.99) * t;
        const auto mode = lead_mode(lambda, t, shift);
        EXPECT_NEAR(lambda - shift, 2.0 * t * std::cos(mode.k), 1e-12);
        EXPECT_GT(std::sin(mode.k), 0.0);
    }
}

TEST(LeadAmplitude, EdgesAndOutsideRejected) {
    EXPECT_THROW(lead_mode(2.0, 1.0), BandEdgeError);
    EXPECT_THROW(lead_mode(-2.0 + 1e-10, 1.0), BandEdgeError);
    EXPECT_THROW(lead_mode(2.5, 1.0), std::domain_error);
    EXPECT_THROW(surface_green(1.5 + 2.0, 1.0, 1.5), BandEdgeError);
}

TEST(LeadAmplitude, GeneralizedFourierOrthonormality) {
    // substitution lambda = 2 cos k removes the edge singularity of the integrand
    for (Index m = 0; m <= 5; ++m)
        for (Index mp = 0; mp <= 5; ++mp) {
            auto integrand = [&](double k) {
                const double lambda = 2.0 * std::cos(k);
                const auto mode = lead_mode(lambda, 1.0);
                return lead_amplitude(mode, m) * lead_amplitude(mode, mp) * 2.0 * std::sin(k);
            };
            // irregular pieces, so the first Simpson samples cannot all land on zeros of sin((m+1)k)
            double value = 0.0;
            const double lo = 1e-4;
            const double hi = kPi - 1e-4;
            for (int piece = 0; piece < 7; ++piece)
                value += oracle::adaptive_simpson(integrand, lo + (hi - lo) * std::pow(piece / 7.0, 1.1),
                                                  lo + (hi - lo) * std::pow((piece + 1) / 7.0, 1.1), 1e-13);
            EXPECT_NEAR(value, m == mp ? 1.0 : 0.0, 1e-6) << m << "," << mp;
        }
    // and directly in lambda, as stated for the zeroth and second site
    auto direct = [](double lambda) {
        const auto mode = lead_mode(lambda, 1.0);
        return lead_amplitude(mode, 0) * lead_amplitude(mode, 2);
    };
    EXPECT_NEAR(oracle::adaptive_simpson(direct, -2.0 + 1e-8, 2.0 - 1e-8, 1e-12), 0.0, 1e-8);
}

TEST(SurfaceGreen, Examples) {
    const Complex g0 = surface_green(0.0, 1.0);
    EXPECT_NEAR(g0.real(), 0.0, 1e-15);
    EXPECT_NEAR(g0.imag(), -1.0, 1e-15);
    const Complex g3 = surface_green(3.0, 1.0);
    EXPECT_NEAR(g3.real(), (3.0 - std::sqrt(5.0)) / 2.0, 1e-15);
    EXPECT_EQ(g3.imag(), 0.0);
}

TEST(SurfaceGreen, MatchesTruncatedChainOutsideBand) {
    SystemSpec s = single(0.0, 0.0);
    s.lead.trunc_len = 2000;
    const auto sys = build_system(s);
    // <0_1| (lambda - H_N)^{-1} |0_1> on the decoupled chain, by sparse solve
    for (double lambda : {3.0, -2.7, 2.2}) {
        const Index dim = sys.trunc_len();
        Eigen::SparseMatrix<Complex> a(dim, dim);
        std::vector<Eigen::Triplet<Complex>> trip;
        for (Index m = 0; m < dim; ++m) {
            trip.emplace_back(m, m, lambda);
            if (m + 1 < dim) {
                trip.emplace_back(m, m + 1, -1.0);
                trip.emplace_back(m + 1, m, -1.0);
            }
        }
        a.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu(a);
        CVector e0 = CVector::Zero(dim);
        e0(0) = 1.0;
        const Complex expected = lu.solve(e0)(0);
        EXPECT_LE(std::abs(surface_green(lambda, 1.0) - expected), 1e-6) << "lambda=" << lambda;
    }
}

TEST(SurfaceGreen, IdentitiesAcrossTheLine) {
    oracle::Rng rng(47);
    for (int trial = 0; trial < 500; ++trial) {
        const double t = rng.uniform(0.3, 2.0);
        const double shift = rng.uniform(-1.0, 1.0);
        const double lambda = shift + rng.uniform(-4.0, 4.0) * t;
        if (std::abs(std::abs(lambda - shift) - 2.0 * t) < 1e-6) continue;
        const Complex g = surface_green(lambda, t, shift);
        EXPECT_LE(std::abs(t * t * g * g - (lambda - shift) * g + 1.0), 1e-12);
        if (in_open_band(lambda, t, shift)) {
            EXPECT_LT(g.imag(), 0.0);
            EXPECT_NEAR(-g.imag() / kPi, std::pow(lead_amplitude(lead_mode(lambda, t, shift), 0), 2), 1e-12);
            EXPECT_EQ(surface_green(lambda, t, shift, Branch::advanced), std::conj(g));
        } else {
            EXPECT_EQ(g.imag(), 0.0);
            EXPECT_LT(std::abs(t * g), 1.0);
        }
    }
}

TEST(SurfaceGreen, ComplexEnergyApproachesRetardedBoundary) {
    for (double lambda : {-1.7, -0.2, 0.0, 0.9, 3.5}) {
        const Complex z(lambda, 1e-9);
        EXPECT_LE(std::abs(surface_green(z, 1.0) - surface_green(lambda, 1.0)), 1e-6) << lambda;
    }
}

TEST(EffectiveResolvent, DecoupledIsBareSampleResolvent) {
    SystemSpec s = single(0.0, 0.0);
    s.sample = SampleSpec::chain(3, 0.1, 0.6);
    for (double lambda : {-1.3, 0.05, 0.77}) {
        const CMatrix expected = (lambda * CMatrix::Identity(3, 3) - s.sample.h_sample).inverse();
        EXPECT_LE((effective_resolvent(s, lambda, 0.3) - expected).norm(), 1e-12);
    }
}

TEST(EffectiveResolvent, SingleSiteAtBandCentre) {
    const CMatrix g = effective_resolvent(single(0.0, 0.5), 0.0, 0.0);
    EXPECT_NEAR(g(0, 0).real(), 0.0, 1e-15);
    EXPECT_NEAR(g(0, 0).imag(), -2.0, 1e-15);
}

TEST(EffectiveResolvent, PoleIsReported) {
    // decoupled level at 3.0 sits outside the band: the resolvent is singular there
    EXPECT_THROW(effective_resolvent(single(3.0, 0.0), 3.0, 0.0), ResolventPoleError);
}

TEST(EffectiveResolvent, AgreesWithTruncatedSystemOffAxis) {
    // at eta well above the level spacing of N = 2000 the truncated chain is a faithful lead
    SystemSpec s = single(0.0, 0.5);
    s.sample = SampleSpec::chain(2, 0.2, 0.8);
    s.lead.trunc_len = 2000;
    const auto sys = build_system(s);
    oracle::Rng rng(53);
    for (int trial = 0; trial < 10; ++trial) {
        const double lambda = rng.uniform(-1.4, 1.9);
        const double eta = 0.02;
        const CMatrix expected = oracle::truncated_resolvent(sys, 0.5, lambda, eta);
        const CMatrix got = effective_resolvent(s, Complex(lambda, eta), 0.5);
        EXPECT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-6) << "lambda=" << lambda;
    }
}

TEST(TMatrix, DecoupledIsZero) {
    const auto tm = t_matrix(single(0.0, 0.0), 0.4, 0.2);
    EXPECT_EQ(tm.entries.norm(), 0.0);
    EXPECT_EQ(optical_residual(tm), 0.0);
}

TEST(TMatrix, PerfectResonantTransmission) {
    const auto tm = t_matrix(single(0.0, 0.5), 0.0, 0.0);
    EXPECT_NEAR(std::norm(tm(Lead::one, Lead::two)), 1.0 / (4.0 * kPi * kPi), 1e-15);
    EXPECT_LE(std::abs(optical_residual(tm)), 1e-15);
}

TEST(TMatrix, LeadOneRowVanishesOutsideItsBand) {
    const auto tm = t_matrix(single(0.0, 0.5), -1.8, 1.0);  // lead-1 band is [-1, 3]
    EXPECT_EQ(tm.entries.row(0).norm(), 0.0);
    EXPECT_EQ(tm.entries.col(0).norm(), 0.0);
    EXPECT_GT(std::abs(tm(Lead::two, Lead::two)), 0.0);
}

TEST(TMatrix, OpticalTheoremAndSymmetryOnRandomSamples) {
    oracle::Rng rng(59);
    for (int trial = 0; trial < 60; ++trial) {
        SystemSpec s = rng.system(400);
        const double v = rng.uniform(0.0, 2.0 * s.lead.t_hop);
        const auto band = band_support(s.lead.t_hop, v);
        for (int k = 0; k < 10; ++k) {
            const double lambda = rng.uniform(-1.99, 1.99) * s.lead.t_hop;
            if (std::abs(std::abs(lambda - v) - 2.0 * s.lead.t_hop) < 1e-6) continue;
            TMatrix tm;
            try {
                tm = t_matrix(s, lambda, v);
            } catch (const ResolventPoleError&) {
                continue;
            }
            EXPECT_LE(std::abs(optical_residual(tm)), 1e-10) << "trial " << trial << " lambda " << lambda;
            if (!band.empty && lambda > band.lo && lambda < band.hi) {
                EXPECT_NEAR(std::norm(tm.entries(0, 1)), std::norm(tm.entries(1, 0)), 1e-12);
                EXPECT_LE(std::norm(tm.entries(0, 1)), 1.0 / (4.0 * kPi * kPi) + 1e-10);
            }
        }
    }
}

TEST(TMatrix, WrongBranchBreaksOpticalTheorem) {
    const auto tm = t_matrix(single(0.0, 0.5), 0.7, 0.5, Branch::advanced);
    EXPECT_GT(std::abs(optical_residual(tm)), 1e-3);
    EXPECT_LE(std::abs(optical_residual(t_matrix(single(0.0, 0.5), 0.7, 0.5))), 1e-10);
}

TEST(TransmissionSpectrum, GridAndBounds) {
    const auto s = single(0.0, 0.5);
    EXPECT_TRUE(transmittance_spectrum(s, 4.5).empty());
    const auto spectrum = transmittance_spectrum(s, 0.0, {201, 1e-8});
    ASSERT_EQ(spectrum.grid.size(), 201u);
    EXPECT_NEAR(spectrum.grid[100], 0.0, 1e-15);
    const auto peak = std::max_element(spectrum.transmittance.begin(), spectrum.transmittance.end());
    EXPECT_EQ(peak - spectrum.transmittance.begin(), 100);
    EXPECT_NEAR(*peak, 1.0 / (4.0 * kPi * kPi), 1e-12);
    for (std::size_t i = 0; i < spectrum.grid.size(); ++i) {
        EXPECT_GE(spectrum.transmittance[i], 0.0);
        EXPECT_LE(spectrum.transmittance[i], 1.0 / (4.0 * kPi * kPi) + 1e-10);
        EXPECT_LE(std::abs(spectrum.optical_residual[i]), 1e-10);
    }
}

TEST(BoundStates, DecoupledLevelOutsideBand) {
    const auto report = bound_states(single(5.0, 0.0), 0.0);
    ASSERT_EQ(report.count(), 1u);
    EXPECT_NEAR(report.bound[0].energy, 5.0, 1e-12);
    EXPECT_GE(report.bound[0].weight_near_sample, 0.99);
}

TEST(BoundStates, DecoupledLevelInsideBandIsNotBound) {
    const auto report = bound_states(single(1.0, 0.0), 0.0);
    EXPECT_EQ(report.count(), 0u);
    // the isolated site is still a localized eigenvector; it is reported as embedded
    ASSERT_EQ(report.embedded.size(), 1u);
    EXPECT_NEAR(report.embedded[0].energy, 1.0, 1e-12);
}

TEST(BoundStates, CoupledLevelMatchesSelfEnergyRoot) {
    const double expected = oracle::single_site_bound_state(3.0, 0.5, 1.0);
    const auto coarse = bound_states(single(3.0, 0.5), 0.0, 500);
    const auto fine = bound_states(single(3.0, 0.5), 0.0, 1000);
    ASSERT_EQ(coarse.count(), 1u);
    ASSERT_EQ(fine.count(), 1u);
    EXPECT_NEAR(coarse.bound[0].energy, expected, 1e-10);
    EXPECT_NEAR(coarse.bound[0].energy, fine.bound[0].energy, 1e-6);
    EXPECT_GT(coarse.bound[0].localization_length, 0.0);
    EXPECT_LT(coarse.bound[0].localization_length, 5.0);
}

TEST(BoundStates, BenchmarkHasNone) {
    EXPECT_EQ(bound_states(single(0.0, 0.5), 0.5).count(), 0u);
    EXPECT_THROW(bound_states(single(0.0, 0.5), 0.5, 100), std::invalid_argument);
}
