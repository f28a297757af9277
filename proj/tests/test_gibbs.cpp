#include "lrlab/gibbs.hpp"

#include <gtest/gtest.h>

using namespace lrlab;

namespace {

InteractionSpec random_spec(std::uint64_t seed, double omega0 = 0.2) {
    std::vector<double> t;
    for (int n = 0; n < 4; ++n) t.push_back(omega0 * std::exp(-double(n)));
    return sample_random_interaction(seed, 2, make_profile(t), 4);
}

// Boltzmann weights of -J sum s_i s_{i+1} - h sum s_i over all 2^n spin strings
double classical_magnetisation(int n, double J, double h, double beta, int site) {
    double z = 0.0, m = 0.0;
    for (int c = 0; c < (1 << n); ++c) {
        double e = 0.0;
        auto s = [&](int i) { return (c >> (n - 1 - i)) & 1 ? -1.0 : 1.0; };
        for (int i = 0; i < n; ++i) {
            e -= h * s(i);
            if (i + 1 < n) e -= J * s(i) * s(i + 1);
        }
        const double w = std::exp(-beta * e);
        z += w;
        m += w * s(site);
    }
    return m / z;
}

}  // namespace

TEST(GibbsState, InfiniteTemperature) {
    auto g = gibbs_density(random_spec(1), 1, 4, 0.0);
    EXPECT_LE((g.density - Mat::Identity(16, 16) / 16.0).norm(), 1e-15);
}

TEST(GibbsState, UnitTraceAndPositive) {
    for (double beta : {0.1, 1.0, 5.0}) {
        auto g = gibbs_density(random_spec(2, 0.25), 1, 5, beta);
        EXPECT_NEAR(g.density.trace().real(), 1.0, 1e-13);
        EXPECT_GE(eigh(g.density, false).values.minCoeff(), -1e-15);
    }
}

TEST(GibbsState, ClassicalBoltzmann) {
    auto spec = transverse_ising(0.7, 0.0);
    spec.generator.push_back({{0}, -0.4 * pauli('Z')});
    auto g = gibbs_density(spec, 1, 6, 0.8);
    for (int site = 1; site <= 6; ++site) {
        auto z = LocalOperator::on(pauli('Z'), 2, site);
        EXPECT_NEAR(g.expect(z).real(), classical_magnetisation(6, 0.7, 0.4, 0.8, site - 1), 1e-12);
    }
}

TEST(GibbsState, RejectsNegativeBeta) { EXPECT_THROW(gibbs_density(field_spec(1), 1, 2, -1.0), Error); }

TEST(Correlation, OpenIsingChain) {
    const double J = 0.6, beta = 1.0;
    auto z = LocalOperator::on(pauli('Z'), 2, 1);
    auto pts = correlation_profile(classical_ising(J), 1, 12, beta, z, z, {1, 2, 3, 4, 5, 11, 12});
    for (const auto& p : pts) {
        if (p.k == 12) {
            EXPECT_TRUE(p.skipped);
            continue;
        }
        EXPECT_NEAR(p.value.real(), std::pow(std::tanh(beta * J), p.k), 1e-12) << p.k;
        EXPECT_NEAR(p.value.imag(), 0.0, 1e-14);
    }
}

TEST(Correlation, ProductStatesVanish) {
    auto x = LocalOperator::on(pauli('X'), 2, 1);
    for (const auto& spec : {InteractionSpec{}, field_spec(0.7)}) {
        for (const auto& p : correlation_profile(spec, 1, 6, 1.0, x, x, {1, 2, 3, 4}))
            EXPECT_LE(std::abs(p.value), 1e-14);
    }
}

TEST(Correlation, LinearityAndNormBound) {
    auto spec = random_spec(3, 0.25);
    CounterRng rng(3, 5);
    auto q1 = LocalOperator::on(random_hermitian(rng, 2), 2, 1);
    auto q2 = LocalOperator::on(random_hermitian(rng, 2), 2, 1);
    std::vector<int> ks{1, 2, 3, 4};
    auto fwd = correlation_profile(spec, 1, 6, 1.0, q1, q2, ks);
    const double bound = 2 * operator_norm(q1) * operator_norm(q2);
    for (const auto& p : fwd) EXPECT_LE(std::abs(p.value), bound);
    // complex linear in Q1
    auto q1a = q1;
    q1a.matrix = (kI * q1.matrix).eval();
    auto a = correlation_profile(spec, 1, 6, 1.0, q1a, q2, ks);
    for (std::size_t i = 0; i < ks.size(); ++i) EXPECT_LE(std::abs(a[i].value - kI * fwd[i].value), 1e-13);
}

TEST(DecayFit, ExactExponential) {
    std::vector<double> k, v;
    for (int i = 1; i <= 8; ++i) {
        k.push_back(i);
        v.push_back(0.5 * std::exp(-1.3 * i));
    }
    auto f = decay_fit(k, v, 3);
    EXPECT_NEAR(f.delta, 1.3, 1e-12);
    EXPECT_NEAR(f.C, 0.5, 1e-12);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
}

TEST(DecayFit, NoisyWithinFivePercent) {
    CounterRng rng(8, 1);
    std::vector<double> k, v;
    for (int i = 0; i < 12; ++i) {
        k.push_back(i);
        v.push_back(std::exp(-0.7 * i) * (1 + 0.05 * rng.uniform(-1, 1)));
    }
    EXPECT_NEAR(decay_fit(k, v, 3).delta, 0.7, 0.035);
}

TEST(DecayFit, DegenerateAndTooFew) {
    auto f = decay_fit({1, 2, 3}, {0.0, 1e-16, 0.0}, 3);
    EXPECT_TRUE(f.degenerate);
    EXPECT_FALSE(f.ok());
    EXPECT_THROW(decay_fit({1, 2, 3}, {1e-3, 1e-15, 1e-20}, 3), Error);
    auto g = decay_fit({1, 2, 3, 4}, {1e-2, 1e-3, 1e-4, 1e-20}, 3);
    EXPECT_EQ(g.excluded, 1);
    EXPECT_EQ(g.points_used, 3);
}

TEST(ConvergenceAudit, ZeroInteraction) {
    ConvergenceOptions opt;
    opt.k_max = 2;
    opt.a_max = 6;
    opt.window_a = 5;
    opt.window_m = 3;
    auto rep = convergence_audit(InteractionSpec{}, LocalOperator::on(pauli('X'), 2, 1), 1.0, opt);
    for (double v : rep.seq_a.values) EXPECT_LE(v, 1e-15);
    for (double v : rep.seq_b.values) EXPECT_LE(v, 1e-15);
    for (double v : rep.seq_c.values) EXPECT_LE(v, 1e-15);
    EXPECT_TRUE(rep.seq_a.fit.degenerate);
}

TEST(ConvergenceAudit, RandomSpecDecays) {
    for (std::uint64_t seed = 1; seed <= 2; ++seed) {
        CounterRng rng(seed, 6);
        auto q = LocalOperator::on(random_hermitian(rng, 2), 2, 1);
        auto rep = convergence_audit(random_spec(seed, 0.25), q, 1.0);
        EXPECT_TRUE(rep.nu_converged);
        EXPECT_TRUE(rep.seq_a.monotone);
        EXPECT_TRUE(rep.seq_a.fitted) << rep.seq_a.note;
        EXPECT_GT(rep.seq_a.fit.delta, 0.0);
        EXPECT_TRUE(rep.seq_b.fitted) << rep.seq_b.note;
        EXPECT_GT(rep.seq_b.fit.delta, 0.0);
    }
}
