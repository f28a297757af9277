#include "lrlab/expansionals.hpp"

#include <gtest/gtest.h>

using namespace lrlab;

namespace {

InteractionSpec random_spec(std::uint64_t seed, double omega0 = 0.2) {
    std::vector<double> t;
    for (int n = 0; n < 4; ++n) t.push_back(omega0 * std::exp(-double(n)));
    return sample_random_interaction(seed, 2, make_profile(t), 4);
}

// e^{A} by scaling and squaring of a Taylor polynomial, independent of the eigensolver
Mat expm_taylor(const Mat& a) {
    int s = 0;
    double nrm = a.cwiseAbs().rowwise().sum().maxCoeff();
    while (nrm > 0.1) {
        nrm /= 2;
        ++s;
    }
    Mat x = a / std::pow(2.0, s);
    Mat r = Mat::Identity(a.rows(), a.cols()), t = r;
    for (int k = 1; k < 30; ++k) {
        t = (t * x / double(k)).eval();
        r += t;
    }
    for (int i = 0; i < s; ++i) r = (r * r).eval();
    return r;
}

}  // namespace

TEST(Expansional, ZeroPerturbation) {
    auto h = assemble_hamiltonian(random_spec(1), 1, 3);
    LocalOperator u = LocalOperator::on(Mat::Zero(2, 2), 2, 2);
    auto p = expansional_closed(h, u);
    EXPECT_LE((p.right - Mat::Identity(8, 8)).norm(), 1e-12);
    EXPECT_LE((p.left - Mat::Identity(8, 8)).norm(), 1e-12);
}

TEST(Expansional, CommutingPerturbation) {
    auto h = assemble_hamiltonian(classical_ising(0.6), 1, 3);
    auto u = LocalOperator::on(0.4 * pauli('Z'), 2, 2);
    auto p = expansional_closed(h, u);
    Mat ref = expm_taylor(-reframe_operator(u, 1, 3).matrix);
    EXPECT_LE((p.right - ref).norm(), 1e-12);
}

TEST(Expansional, InverseAndFactorisation) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto h = assemble_hamiltonian(random_spec(seed), 1, 4);
        CounterRng rng(seed, 9);
        auto u = LocalOperator::on(0.3 * random_hermitian(rng, 4), 2, 2);
        auto p = expansional_closed(h, u);
        const auto n = p.left.rows();
        EXPECT_LE(spectral_norm(p.left * p.right - Mat::Identity(n, n)), 1e-10);
        Mat uf = reframe_operator(u, 1, 4).matrix;
        Mat lhs = expm_taylor(-(h.matrix + uf));
        EXPECT_LE(spectral_norm(lhs - p.right * expm_taylor(-h.matrix)), 1e-10);
    }
}

TEST(ExpansionalOde, ZeroPerturbationAndZeroHamiltonian) {
    auto h = assemble_hamiltonian(random_spec(2), 1, 3);
    auto zero = LocalOperator::on(Mat::Zero(2, 2), 2, 1);
    EXPECT_LE((expansional_ode(h, zero, 1e-2).matrix - Mat::Identity(8, 8)).norm(), 1e-12);
    LocalOperator h0 = LocalOperator::identity(2, 1, 2);
    h0.matrix.setZero();
    CounterRng rng(2, 9);
    auto u = LocalOperator::on(random_hermitian(rng, 4) * 0.3, 2, 1);
    EXPECT_LE(spectral_norm(expansional_ode(h0, u, 1e-3).matrix - expm_taylor(u.matrix)), 1e-10);
}

TEST(ExpansionalOde, MatchesClosedForm) {
    auto h = assemble_hamiltonian(random_spec(3, 0.25), 1, 3);
    CounterRng rng(3, 9);
    auto u = LocalOperator::on(0.5 * random_hermitian(rng, 4), 2, 2);
    auto f = expansional_ode(h, u, 1e-3);
    EXPECT_LE(spectral_norm(f.matrix - expansional_closed(h, u).left), 1e-8);
    EXPECT_THROW(expansional_ode(h, u, 0.5), Error);
}

TEST(ExpansionalSeries, SecondOrderForSmallPerturbation) {
    auto h = assemble_hamiltonian(random_spec(4), 1, 3);
    CounterRng rng(4, 9);
    Mat r = random_hermitian(rng, 4);
    auto u = LocalOperator::on(1e-3 * r / spectral_norm(r), 2, 2);
    auto s2 = expansional_series2(h, u);
    // error is third order in |U|
    EXPECT_LE(spectral_norm(s2.matrix - expansional_closed(h, u).left), 1e-8);
}

TEST(WindowExpansionals, ZeroInteraction) {
    InteractionSpec spec;
    auto w = window_expansionals(spec, 2, 5, 1.0);
    EXPECT_LE((w.E - Mat::Identity(32, 32)).norm(), 0.0);
    EXPECT_LE((w.Etilde - Mat::Identity(32, 32)).norm(), 0.0);
    EXPECT_LE((w.Ebeta - Mat::Identity(w.Ebeta.rows(), w.Ebeta.cols())).norm(), 0.0);
}

TEST(WindowExpansionals, DecompositionResiduals) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        auto spec = random_spec(seed);
        for (int a : {4, 6, 8}) {
            auto w = window_expansionals(spec, 2, a, 1.0, false);
            EXPECT_LE(w.residual_tilde, 1e-10);
            EXPECT_LE(w.residual_E, 1e-10);
        }
    }
}

TEST(ExpansionalBounds, NormsAndDifferences) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto spec = random_spec(seed, 0.25);
        for (double beta : {0.25, 0.5, 1.0}) {
            auto audit = expansional_bound_audit(spec, beta, 1, 2);
            for (const auto& c : audit.certs)
                EXPECT_TRUE(c.pass()) << c.label << " beta " << beta << " " << *c.empirical << " > " << c.theoretical;
        }
    }
}

TEST(ExpansionalTail, ZeroInteraction) {
    InteractionSpec spec;
    for (const auto& r : expansional_limit_tail(spec, 1, {3, 4, 5})) {
        EXPECT_EQ(r.diff, 0.0);
        EXPECT_EQ(r.diff_inv, 0.0);
    }
}

TEST(ExpansionalTail, ClassicalFiniteRangeStabilises) {
    // commuting range-1 terms: E_(n,a) stops changing once a - n > r + 1
    auto spec = classical_ising(0.7);
    spec.generator.push_back({{0}, 0.3 * pauli('Z')});
    for (const auto& r : expansional_limit_tail(spec, 2, {5, 6, 7, 8})) {
        EXPECT_LE(r.diff, 1e-12);
        EXPECT_LE(r.diff_inv, 1e-12);
    }
}

TEST(ExpansionalTail, RandomSpecWithinEnvelope) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed)
        for (const auto& r : expansional_limit_tail(random_spec(seed, 0.25), 2, {3, 4, 5, 6, 7, 8}))
            EXPECT_TRUE(r.pass()) << "a=" << r.a << " diff=" << r.diff << " env=" << r.envelope;
}
