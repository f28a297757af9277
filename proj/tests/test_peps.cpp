#include "lrlab/peps.hpp"

#include <gtest/gtest.h>

using namespace lrlab;
using namespace lrlab::peps;

namespace {

// tensor power of the one-slot state of the product family
Mat product_rho(int slots) {
    Mat one = Mat::Zero(2, 2);
    one(0, 0) = std::sqrt(2.0);
    one(1, 1) = 1.0 / std::sqrt(2.0);
    Mat r = Mat::Identity(1, 1);
    for (int i = 0; i < slots; ++i) r = kron(r, one);
    return r;
}

double max_term(const BoundaryHamiltonian& bh, int min_len = 1) {
    double m = 0.0;
    for (const auto& t : bh.terms)
        if (t.len >= min_len) m = std::max(m, t.norm);
    return m;
}

}  // namespace

TEST(Contract, SingleVertexIsSiteTensor) {
    auto g = random_grid(1, 1, 2, 2, 3, true);
    auto t = contract_region(g, {0, 0, 1, 1});
    ASSERT_EQ(t.T.rows(), 2);
    ASSERT_EQ(t.T.cols(), 16);
    // boundary order: down, right, up, left
    for (int jd = 0; jd < 2; ++jd)
        for (int jr = 0; jr < 2; ++jr)
            for (int ju = 0; ju < 2; ++ju)
                for (int jl = 0; jl < 2; ++jl) {
                    int col_r = jd * 8 + jr * 4 + ju * 2 + jl;
                    int col_v = jr * 8 + ju * 4 + jl * 2 + jd;
                    EXPECT_EQ(t.T.col(col_r), g.at(0, 0).data.col(col_v));
                }
}

TEST(Contract, ShapeTwoByTwo) {
    auto t = contract_region(random_grid(2, 2, 2, 2, 1), {0, 0, 2, 2});
    EXPECT_EQ(t.T.rows(), 16);
    EXPECT_EQ(t.T.cols(), 256);
    EXPECT_EQ(t.slots.size(), 8u);
}

TEST(Contract, TwoSiteByHand) {
    auto g = random_grid(2, 1, 2, 2, 9);
    auto t = contract_region(g, {0, 0, 2, 1});
    // slots: (0,D) (1,D) (1,R) (1,U) (0,U) (0,L)
    const auto& a = g.at(0, 0).data;
    const auto& b = g.at(1, 0).data;
    for (int k1 = 0; k1 < 2; ++k1)
        for (int k2 = 0; k2 < 2; ++k2)
            for (int col = 0; col < 64; ++col) {
                int d0 = (col >> 5) & 1, d1 = (col >> 4) & 1, r1 = (col >> 3) & 1, u1 = (col >> 2) & 1;
                int u0 = (col >> 1) & 1, l0 = col & 1;
                cplx s = 0.0;
                for (int j = 0; j < 2; ++j)
                    s += a(k1, j * 8 + u0 * 4 + l0 * 2 + d0) * b(k2, r1 * 8 + u1 * 4 + j * 2 + d1);
                EXPECT_NEAR(std::abs(t.T(k1 * 2 + k2, col) - s / std::sqrt(2.0)), 0.0, 1e-14);
            }
}

TEST(Contract, Guardrails) {
    auto g = random_grid(4, 4, 2, 2, 1);
    EXPECT_THROW(contract_region(g, {0, 0, 4, 4}), Error);
    EXPECT_THROW(contract_region(g, {3, 3, 2, 1}), Error);
    EXPECT_THROW(random_grid(1, 1, 5, 2, 1), Error);
}

TEST(Contract, ProductFamilyFactorizes) {
    Rect r{0, 0, 2, 2};
    auto g = product_grid(2, 2, {r}, 4);
    auto t = contract_region(g, r);
    Mat rho = t.T.adjoint() * t.T;
    EXPECT_LE((rho - product_rho(8)).norm(), 1e-12);
}

TEST(BoundaryState, GluedMatchesExplicitMap) {
    struct Case {
        Rect r;
        int d;
        bool cplx_entries;
    };
    for (const auto& c : {Case{{0, 0, 2, 2}, 2, false}, Case{{0, 0, 2, 2}, 4, true}, Case{{0, 0, 3, 2}, 2, true},
                          Case{{1, 0, 2, 3}, 2, false}, Case{{0, 1, 3, 1}, 4, false}}) {
        auto g = random_grid(3, 3, c.d, 2, 11, c.cplx_entries);
        auto explicit_rho = boundary_state(contract_region(g, c.r)).rho;
        auto glued = boundary_state(g, c.r).rho;
        EXPECT_LE((explicit_rho - glued).norm(), 1e-12 * explicit_rho.norm()) << c.r.label();
    }
}

TEST(Injectivity, IsometricHasUnitSigma) {
    Rect r{0, 0, 2, 2};
    auto rep = injectivity_report(contract_region(product_grid(2, 2, {r}, 5, true), r));
    EXPECT_TRUE(rep.injective);
    EXPECT_NEAR(rep.sigma_min, 1.0, 1e-12);
    EXPECT_NEAR(rep.sigma_max, 1.0, 1e-12);
}

TEST(Injectivity, RepeatedColumn) {
    auto t = contract_region(random_grid(2, 2, 4, 2, 6), {0, 0, 2, 2});
    EXPECT_TRUE(injectivity_report(t).injective);
    t.T.col(1) = t.T.col(0);
    auto rep = injectivity_report(t);
    EXPECT_FALSE(rep.injective);
    EXPECT_LE(rep.sigma_min, 1e-10);
    EXPECT_EQ(rep.rank, 255);
}

TEST(Injectivity, RandomMatchesSvdOracle) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto t = contract_region(random_grid(2, 2, 4, 2, seed), {0, 0, 2, 2});
        Eigen::JacobiSVD<Mat> svd(t.T);
        auto rep = injectivity_report(t);
        EXPECT_TRUE(rep.injective);
        EXPECT_NEAR(rep.sigma_min, svd.singularValues().minCoeff(), 1e-10 * svd.singularValues().maxCoeff());
    }
}

TEST(Injectivity, WideMapIsNot) {
    auto rep = injectivity_report(contract_region(random_grid(2, 2, 2, 2, 1), {0, 0, 2, 2}));
    EXPECT_FALSE(rep.injective);
    EXPECT_EQ(rep.rank, 16);
}

TEST(BoundaryHamiltonianTest, RandomExpAndReconstruction) {
    for (std::uint64_t seed = 1; seed <= 2; ++seed) {
        auto g = random_grid(2, 2, 4, 2, seed, seed == 2);
        auto st = boundary_state(g, {0, 0, 2, 2});
        auto bh = boundary_hamiltonian(st);
        EXPECT_LE((hermitian_exp(bh.G, 2.0) - st.rho).norm(), 1e-10 * st.rho.norm());
        EXPECT_LE(bh.reconstruction_error, 1e-10);
        EXPECT_TRUE(is_hermitian(bh.G, 1e-12));
        for (int len : {1, 3, 7})
            for (int s : {0, 5}) EXPECT_TRUE(is_hermitian(arc_term(bh, s, len), 1e-12));
        EXPECT_EQ(bh.terms.size(), std::size_t(8 * 7 + 1));
        EXPECT_GT(bh.profile.omega(1), 1e-6);
    }
}

TEST(BoundaryHamiltonianTest, IsometricIsZero) {
    Rect r{0, 0, 2, 2};
    auto bh = boundary_hamiltonian(contract_region(product_grid(2, 2, {r}, 2, true), r));
    EXPECT_LE(bh.G.norm(), 1e-12);
    EXPECT_LE(max_term(bh), 1e-12);
}

TEST(BoundaryHamiltonianTest, ProductIsSingleSlot) {
    Rect r{0, 0, 3, 2};
    auto bh = boundary_hamiltonian(product_grid(3, 2, {r}, 8), r);
    Mat z = Mat::Zero(2, 2);
    z(0, 0) = 0.25 * std::log(2.0);
    z(1, 1) = -0.25 * std::log(2.0);
    EXPECT_NEAR(bh.constant, 0.0, 1e-14);
    for (int s = 0; s < bh.n(); ++s) EXPECT_LE((arc_term(bh, s, 1) - z).norm(), 1e-12);
    EXPECT_LE(max_term(bh, 2), 1e-12);
    for (int k = 1; k <= bh.profile.cutoff(); ++k) EXPECT_LE(bh.profile.omega(k), 1e-12);
    EXPECT_NEAR(bh.profile.omega0(), 0.25 * std::log(2.0), 1e-12);
}

TEST(BoundaryHamiltonianTest, TermsRespectTrueSupport) {
    // G acting on slots {1, 2} only: every arc not inside {1, 2} carries nothing
    CounterRng rng(4, 1);
    BoundaryHamiltonian bh;
    bh.D = 2;
    bh.slots = boundary_slots({0, 0, 2, 1});
    Mat h = random_hermitian(rng, 4);
    bh.G = peps::detail::embed_at(h, 2, 6, {1, 2});
    bh.constant = bh.G.trace().real() / 64.0;
    for (int len = 1; len < 6; ++len)
        for (int s = 0; s < 6; ++s) {
            double nrm = arc_term(bh, s, len).norm();
            bool inside = (len == 1 && (s == 1 || s == 2)) || (len == 2 && s == 1);
            if (!inside) EXPECT_LE(nrm, 1e-12) << s << " " << len;
        }
    EXPECT_LE(full_term(bh).norm(), 1e-12);
    // and the three surviving terms rebuild the traceless part of h
    Mat sum = peps::detail::embed_at(arc_term(bh, 1, 1), 2, 2, {0}) + peps::detail::embed_at(arc_term(bh, 2, 1), 2, 2, {1}) +
              arc_term(bh, 1, 2);
    EXPECT_LE((sum + bh.constant * Mat::Identity(4, 4) - h).norm(), 1e-12);
}

TEST(BoundaryHamiltonianTest, RejectsNonInjective) {
    auto g = ghz_grid(2, 2);
    EXPECT_THROW(boundary_hamiltonian(contract_region(g, {0, 0, 2, 2})), Error);
    EXPECT_THROW(boundary_hamiltonian(g, {0, 0, 2, 2}), Error);
}

TEST(Restriction, ComponentsAndFullCircle) {
    auto bh = boundary_hamiltonian(random_grid(2, 2, 4, 2, 3), {0, 0, 2, 2});
    auto ops = restrict_to(bh, {bh.slots[7], bh.slots[0], bh.slots[3]});
    ASSERT_EQ(ops.size(), 2u);
    EXPECT_EQ(ops[0].keys.size() + ops[1].keys.size(), 3u);
    auto full = restrict_to(bh, bh.slots);
    ASSERT_EQ(full.size(), 1u);
    Mat g = bh.G;
    g.diagonal().array() -= bh.constant;
    EXPECT_LE((full[0].m - g).norm(), 1e-14);
    // a wrapping arc equals the sum of its arc terms
    Mat arc = embed_ops(restrict_to(bh, {bh.slots[7], bh.slots[0]}), {bh.slots[7], bh.slots[0]}, 2);
    Mat terms = peps::detail::embed_at(arc_term(bh, 7, 1), 2, 2, {0}) + peps::detail::embed_at(arc_term(bh, 0, 1), 2, 2, {1}) +
                arc_term(bh, 7, 2);
    EXPECT_LE((arc - terms).norm(), 1e-12);
}

TEST(Geometry, SegmentTable) {
    auto geo = minimal_abc();
    EXPECT_EQ(geo.abc.slots(), 12);
    EXPECT_EQ(geo.ab.slots(), 10);
    EXPECT_EQ(geo.b.slots(), 8);
    for (const char* s : {"a", "x", "y", "c", "alpha", "gamma"}) EXPECT_FALSE(geo.seg.at(s).empty()) << s;
}

TEST(Factorization, ProductAndIsometric) {
    auto geo = minimal_abc();
    for (bool iso : {false, true}) {
        auto g = product_grid(4, 2, {geo.abc, geo.ab, geo.bc, geo.b}, 12, iso);
        auto rep = factorization_residuals(g, geo);
        ASSERT_EQ(rep.regions.size(), 4u);
        for (const auto& r : rep.regions) {
            EXPECT_LE(r.residual, 1e-10) << r.name;
            EXPECT_LE(r.reconstruction_error, 1e-10) << r.name;
            if (iso) EXPECT_NEAR(r.cond_sigma, 1.0, 1e-10);
        }
    }
}

TEST(Factorization, RandomIsFiniteAndConditioned) {
    auto geo = minimal_abc();
    auto rep = factorization_residuals(random_grid(4, 2, 4, 2, 1), geo);
    for (const auto& r : rep.regions) {
        EXPECT_TRUE(std::isfinite(r.residual)) << r.name;
        EXPECT_GT(r.residual, 1e-8) << r.name;
        EXPECT_LT(r.cond_sigma, 1e12) << r.name;
        EXPECT_LE(r.reconstruction_error, 1e-10) << r.name;
    }
}

TEST(ParentGap, ProductFrustrationFree) {
    // no injective legs: every site emits one fixed vector
    Rect r{0, 0, 2, 2};
    auto g = product_grid(2, 2, {}, 3);
    auto rep = parent_gap(g, r);
    EXPECT_EQ(rep.ground_dim, 1);
    EXPECT_LE(std::abs(rep.ground_energy), 1e-10);
    EXPECT_GT(rep.gap, 0.5);
    EXPECT_EQ(rep.ground_dim, rep.rank_TR);
    EXPECT_LE(rep.frustration, 1e-10);
    EXPECT_EQ(rep.edges, 4);
}

TEST(ParentGap, GhzDegenerateAndFlagged) {
    for (Rect r : {Rect{0, 0, 2, 2}, Rect{0, 0, 3, 2}}) {
        auto rep = parent_gap(ghz_grid(3, 2), r);
        EXPECT_FALSE(rep.edge_injective);
        EXPECT_EQ(rep.ground_dim, 2);
        EXPECT_EQ(rep.rank_TR, 2);
        EXPECT_LE(std::abs(rep.ground_energy), 1e-10);
        EXPECT_GT(rep.gap, 0.5);
    }
}

TEST(ParentGap, RandomGroundDimIsRank) {
    for (std::uint64_t seed = 1; seed <= 2; ++seed) {
        auto rep = parent_gap(random_grid(2, 2, 2, 2, seed), {0, 0, 2, 2});
        EXPECT_EQ(rep.ground_dim, rep.rank_TR);
        EXPECT_LE(rep.frustration, 1e-10);
    }
}

TEST(Homogeneity, ProductAndIsometric) {
    Rect a{0, 0, 2, 2}, ab{0, 0, 3, 2};
    auto rep = homogeneity_audit(product_grid(3, 2, {a, ab}, 6), a, ab);
    ASSERT_FALSE(rep.eta.empty());
    for (const auto& [dist, v] : rep.eta) EXPECT_LE(v, 1e-10) << dist;
    auto iso = homogeneity_audit(product_grid(3, 2, {a, ab}, 6, true), a, ab);
    for (const auto& [dist, v] : iso.eta) {
        EXPECT_EQ(v, 0.0);
        EXPECT_TRUE(iso.degenerate.at(dist));
    }
}

TEST(Homogeneity, RandomFinite) {
    Rect a{0, 0, 2, 2}, ab{0, 0, 3, 2};
    auto rep = homogeneity_audit(random_grid(3, 2, 4, 2, 2), a, ab);
    ASSERT_GE(rep.eta.size(), 2u);
    for (const auto& [dist, v] : rep.eta) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(BoundaryAudits, LocalityOnRandomBoundary) {
    auto bh = boundary_hamiltonian(random_grid(3, 2, 4, 2, 4), {0, 0, 3, 2});
    auto rows = boundary_locality_audit(bh, 3, {0.05, -0.1, 0.2}, 1);
    for (const auto& r : rows) EXPECT_TRUE(r.pass()) << r.check << " " << r.ell << " " << r.lhs << " > " << r.rhs;
}

TEST(BoundaryAudits, QuasiBoundsProductFamily) {
    Rect a{0, 0, 2, 2}, ab{0, 0, 3, 2};
    auto g = product_grid(3, 2, {a, ab}, 6);
    auto ha = boundary_hamiltonian(g, a);
    auto hab = boundary_hamiltonian(g, ab);
    auto omega = profile_max(ha.profile, hab.profile);
    auto q = quasilocality_audit(hab, a, omega, {1, 2});
    for (const auto& r : q) EXPECT_TRUE(r.pass()) << r.check << " " << r.lhs;
    auto eta = homogeneity_audit(ha, hab);
    // product boundary Hamiltonians agree slot by slot, so both sides vanish
    for (const auto& r : quasiperturbation_audit(ha, hab, eta, omega, {0, 1})) {
        EXPECT_LE(r.lhs, 1e-10);
        EXPECT_TRUE(r.pass());
    }
}
