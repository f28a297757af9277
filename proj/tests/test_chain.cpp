#include "lrlab/chain.hpp"

#include <gtest/gtest.h>

using namespace lrlab;

namespace {

Mat I2() { return Mat::Identity(2, 2); }

// -J sum ZZ - g sum X on n sites, written out with explicit Kronecker chains
Mat tfim_by_hand(int n, double J, double g) {
    const auto dim = ipow(2, n);
    Mat h = Mat::Zero(dim, dim);
    for (int i = 0; i < n; ++i) {
        Mat t = Mat::Identity(1, 1), z = Mat::Identity(1, 1);
        for (int k = 0; k < n; ++k) {
            t = kron(t, k == i ? pauli('X') : I2());
            z = kron(z, (k == i || k == i + 1) ? pauli('Z') : I2());
        }
        h -= g * t;
        if (i + 1 < n) h -= J * z;
    }
    return h;
}

}  // namespace

TEST(Profile, NearestNeighbour) {
    auto spec = classical_ising(0.5);
    auto p = build_profile(spec, 5);
    EXPECT_NEAR(p.omegas[0], 1.0, 1e-14);
    EXPECT_NEAR(p.omegas[1], 1.0, 1e-14);
    for (int n = 2; n <= 5; ++n) EXPECT_EQ(p.omegas[n], 0.0);
}

TEST(Profile, EmptySpec) {
    InteractionSpec spec;
    auto p = build_profile(spec, 4);
    for (double v : p.omegas) EXPECT_EQ(v, 0.0);
}

TEST(Profile, IntervalTermsByEnumeration) {
    // Phi_[x, x+n] with norm e^{-n}, n <= 4
    InteractionSpec spec;
    spec.d = 2;
    for (int n = 0; n <= 4; ++n) {
        std::vector<int> off;
        Mat m = Mat::Identity(1, 1);
        for (int o = 0; o <= n; ++o) {
            off.push_back(o);
            m = kron(m, pauli('Z'));
        }
        spec.generator.push_back({off, std::exp(-double(n)) * m});
    }
    auto p = build_profile(spec, 6);
    // a fixed site lies in n + 1 placements of a diameter-n interval
    for (int k = 0; k <= 6; ++k) {
        double ref = 0.0;
        for (int n = k; n <= 4; ++n) ref += (n + 1) * std::exp(-double(n));
        EXPECT_NEAR(p.omegas[k], ref, 1e-13);
    }
}

TEST(Hamiltonian, EmptyIsZero) {
    InteractionSpec spec;
    auto h = assemble_hamiltonian(spec, 1, 3);
    EXPECT_EQ(h.matrix.norm(), 0.0);
}

TEST(Hamiltonian, TranslationCovariance) {
    auto spec = sample_random_interaction(3, 2, make_profile({0.2, 0.1, 0.05}), 3);
    auto a = assemble_hamiltonian(spec, 1, 5), b = assemble_hamiltonian(spec, 2, 6);
    EXPECT_LE((a.matrix - b.matrix).norm(), 1e-14);
}

TEST(Hamiltonian, TransverseIsingMatchesHandBuilt) {
    auto h = assemble_hamiltonian(transverse_ising(1.0, 1.0), 1, 2);
    EXPECT_LE((h.matrix - tfim_by_hand(2, 1.0, 1.0)).norm(), 1e-14);
    Eigen::SelfAdjointEigenSolver<Mat> es(tfim_by_hand(2, 1.0, 1.0));
    auto e = eigh(h.matrix);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(e.values(i), es.eigenvalues()(i), 1e-12);
    auto h5 = assemble_hamiltonian(transverse_ising(0.7, 0.3), 1, 5);
    EXPECT_LE((h5.matrix - tfim_by_hand(5, 0.7, 0.3)).norm(), 1e-13);
}

TEST(Hamiltonian, FrameCap) {
    EXPECT_THROW(assemble_hamiltonian(transverse_ising(1, 1), 1, 20), Error);
    EXPECT_EQ(max_sites(2), 12);
    EXPECT_EQ(max_sites(4), 6);
}

TEST(Reframe, SingleSiteIntoTwo) {
    auto q = LocalOperator::on(pauli('X'), 2, 1);
    EXPECT_LE((reframe_operator(q, 1, 2).matrix - kron(pauli('X'), I2())).norm(), 0.0);
    EXPECT_LE((reframe_operator(q, 0, 1).matrix - kron(I2(), pauli('X'))).norm(), 0.0);
}

TEST(Reframe, ShiftThenEmbed) {
    auto q = LocalOperator::on(kron(pauli('X'), pauli('Y')), 2, 2);
    auto shifted = q;
    shifted.lo += 1;
    shifted.hi += 1;
    EXPECT_LE((reframe_operator(q, 1, 5, 1).matrix - reframe_operator(shifted, 1, 5).matrix).norm(), 0.0);
}

TEST(Reframe, Isometry) {
    CounterRng rng(1, 1);
    auto q = LocalOperator::on(random_hermitian(rng, 4), 2, 2);
    EXPECT_NEAR(operator_norm(reframe_operator(q, 1, 5)), operator_norm(q), 1e-12);
}

TEST(PartialTrace, ProductFactorises) {
    CounterRng rng(2, 1);
    Mat A = random_hermitian(rng, 4), B = random_hermitian(rng, 2);
    auto op = LocalOperator::on(kron(A, B), 2, 1);
    auto r = partial_trace(op, {1, 2}, true);
    EXPECT_LE((r.matrix - A.trace() / 4.0 * B).norm(), 1e-13);
    EXPECT_EQ(r.lo, 3);
}

TEST(PartialTrace, IdentityStaysIdentity) {
    auto op = LocalOperator::identity(2, 1, 4);
    auto r = partial_trace(op, {2, 4}, true);
    EXPECT_LE((r.matrix - Mat::Identity(r.matrix.rows(), r.matrix.cols())).norm(), 0.0);
}

TEST(PartialTrace, TraceConsistency) {
    CounterRng rng(3, 1);
    auto op = LocalOperator::on(random_hermitian(rng, 16), 2, 1);
    auto r = partial_trace(op, {1, 3}, true);
    EXPECT_NEAR(std::abs(normalized_trace(r.matrix) - normalized_trace(op.matrix)), 0.0, 1e-13);
}

TEST(PartialTrace, OutsideSupportThrows) {
    auto op = LocalOperator::identity(2, 1, 2);
    EXPECT_THROW(partial_trace(op, {3}, true), Error);
}

TEST(OperatorNorm, Examples) {
    Mat d = Mat::Zero(2, 2);
    d(0, 0) = 3;
    d(1, 1) = -5;
    EXPECT_NEAR(spectral_norm(d), 5.0, 1e-14);
    CounterRng rng(4, 1);
    Mat h = random_hermitian(rng, 8);
    Mat u = hermitian_exp(h, kI);
    EXPECT_NEAR(spectral_norm(u), 1.0, 1e-12);
    Vec a = Vec::Random(6), b = Vec::Random(6);
    EXPECT_NEAR(spectral_norm(a * b.adjoint()), a.norm() * b.norm(), 1e-12);
    // Lanczos path above the dense threshold
    Mat big = random_hermitian(rng, 200);
    Eigen::SelfAdjointEigenSolver<Mat> es(big);
    double ref = es.eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_NEAR(spectral_norm(big), ref, 1e-9 * ref);
}

TEST(RandomInteraction, Deterministic) {
    auto t = make_profile({0.25, 0.25 * std::exp(-1.0), 0.25 * std::exp(-2.0), 0.25 * std::exp(-3.0)});
    auto a = sample_random_interaction(17, 2, t, 4), b = sample_random_interaction(17, 2, t, 4);
    ASSERT_EQ(a.generator.size(), b.generator.size());
    for (std::size_t i = 0; i < a.generator.size(); ++i) {
        EXPECT_EQ(a.generator[i].offsets, b.generator[i].offsets);
        EXPECT_TRUE((a.generator[i].matrix.array() == b.generator[i].matrix.array()).all());
    }
}

TEST(RandomInteraction, HermitianAndBelowTarget) {
    auto t = make_profile({0.25, 0.25 * std::exp(-1.0), 0.25 * std::exp(-2.0), 0.25 * std::exp(-3.0)});
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto s = sample_random_interaction(seed, 2, t, 4);
        for (const auto& g : s.generator) EXPECT_LE((g.matrix - g.matrix.adjoint()).norm(), 1e-12);
        auto p = build_profile(s, 3);
        for (int n = 0; n <= 3; ++n) EXPECT_LE(p.omegas[n], t.omegas[n] * (1 + 1e-12));
    }
}

TEST(Spec, NonHermitianRejected) {
    InteractionSpec spec;
    Mat m = Mat::Zero(2, 2);
    m(0, 1) = 1.0;
    spec.terms[{1}] = m;
    EXPECT_THROW(validate_spec(spec), Error);
}
