#pragma once

#include "lrlab/chain.hpp"
#include "lrlab/series.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace lrlab {

// Conjugation by e^{isH} on one frame, with the eigendecomposition of H cached.
class Evolver {
public:
    explicit Evolver(const Mat& h) {
        if (!is_hermitian(h)) throw Error("evolve: H is not Hermitian");
        eig_ = eigh(h);
    }

    // V^dagger Q V, reused across s
    Mat to_eigenbasis(const Mat& q) const {
        if (eig_.diagonal) return q;
        Mat t = eig_.vectors.adjoint() * q;
        return t * eig_.vectors;
    }

    Mat from_eigenbasis(const Mat& b, cplx s) const {
        const auto n = eig_.dim();
        Vec ph(n), phc(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            ph(i) = std::exp(kI * s * eig_.values(i));
            phc(i) = std::exp(-kI * s * eig_.values(i));
        }
        Mat c = ph.asDiagonal() * b * phc.asDiagonal();
        if (eig_.diagonal) return c;
        Mat t = eig_.vectors * c;
        return t * eig_.vectors.adjoint();
    }

    Mat apply(const Mat& q, cplx s) const { return from_eigenbasis(to_eigenbasis(q), s); }

    const Eigh& eig() const { return eig_; }

private:
    Eigh eig_;
};

inline LocalOperator evolve_exact(const LocalOperator& h, const LocalOperator& q, cplx s) {
    LocalOperator qf = reframe_operator(q, h.lo, h.hi);
    LocalOperator out = qf;
    if (s == cplx(0.0)) return out;
    out.matrix = Evolver(h.matrix).apply(qf.matrix, s);
    return out;
}

inline LocalOperator iterated_commutator(const LocalOperator& h, const LocalOperator& q, int m) {
    if (m < 0) throw Error("iterated_commutator: m must be >= 0");
    LocalOperator cur = reframe_operator(q, h.lo, h.hi);
    for (int k = 0; k < m; ++k) cur.matrix = (kI * (h.matrix * cur.matrix - cur.matrix * h.matrix)).eval();
    return cur;
}

struct EvolutionResult {
    LocalOperator value;
    std::string method;
    int order = 0;
    double tail_estimate = 0.0;
};

// sum_{m>M} x^m / m!, summed upward from m = M + 1
inline double exp_tail(double x, int M) {
    if (x == 0.0) return 0.0;
    double term = 1.0;
    for (int m = 1; m <= M + 1; ++m) term *= x / m;
    if (!std::isfinite(term)) return kInf;
    double acc = 0.0;
    for (int m = M + 1; m < M + 100000; ++m) {
        acc += term;
        term *= x / (m + 1);
        if (term < 1e-18 * acc && m > x) break;
    }
    return acc;
}

inline EvolutionResult evolve_dyson(const LocalOperator& h, const LocalOperator& q, cplx s, int M) {
    if (M < 0) throw Error("evolve_dyson: M must be >= 0");
    EvolutionResult r;
    r.method = "dyson";
    r.order = M;
    LocalOperator cur = reframe_operator(q, h.lo, h.hi);
    r.value = cur;
    cplx coeff = 1.0;
    for (int m = 1; m <= M; ++m) {
        cur.matrix = (kI * (h.matrix * cur.matrix - cur.matrix * h.matrix)).eval();
        coeff *= s / double(m);
        r.value.matrix += coeff * cur.matrix;
    }
    r.tail_estimate = operator_norm(q) * exp_tail(2.0 * std::abs(s) * operator_norm(h), M);
    return r;
}

// W(j, k) for the nested intervals J_k = [a - k, b + k], all placements in Z
inline RMat surface_energies(const InteractionSpec& spec, int a, int b, int L) {
    int maxdiam = 0;
    for (const auto& t : spec.generator) maxdiam = std::max(maxdiam, t.offsets.back());
    for (const auto& [s, m] : spec.terms) maxdiam = std::max(maxdiam, s.back() - s.front());
    RMat W = RMat::Zero(L + 1, L + 1);
    auto terms = placed_terms(spec, a - L - maxdiam - 1, b + L + maxdiam + 1);
    for (const auto& [s, m] : terms) {
        double w = spectral_norm(m);
        if (w == 0.0) continue;
        for (int k = 0; k <= L; ++k) {
            bool shell = false;
            for (int x : s) {
                bool in_k = x >= a - k && x <= b + k;
                bool in_km1 = k > 0 && x >= a - k + 1 && x <= b + k - 1;
                if (in_k && !in_km1) shell = true;
            }
            bool touches_k = false;
            for (int x : s) touches_k = touches_k || (x >= a - k && x <= b + k);
            if (touches_k) W(k, k) += w;
            if (!shell || k == 0) continue;
            for (int j = 0; j < k; ++j) {
                bool touches = false;
                for (int x : s) touches = touches || (x >= a - j && x <= b + j);
                if (touches) W(j, k) += w;
            }
        }
    }
    return W;
}

struct CertificateOptions {
    std::optional<double> lambda;
    bool surface = true;
    int profile_cutoff = 64;
    double norm_tol = 1e-10;  // Lanczos residual target for the empirical norms
};

// Empirical |Gamma_{J_L}(A) - Gamma_{J_l}(A)| against every applicable bound family, for several
// inner frames l sharing one outer frame L. Rows come out s-major, then l.
inline std::vector<BoundCertificate> locality_certificate(const InteractionSpec& spec, const LocalOperator& A,
                                                          const std::vector<cplx>& s_grid, const std::vector<int>& ells,
                                                          int L, const CertificateOptions& opt = {}) {
    for (int ell : ells)
        if (ell < 0 || L < ell) throw Error("locality_certificate: need 0 <= ell <= L");
    const int a = A.lo, b = A.hi;
    check_frame(spec.d, b - a + 1 + 2 * L);
    LocalOperator HL = assemble_hamiltonian(spec, a - L, b + L);
    Evolver evL(HL.matrix);
    Mat bL = evL.to_eigenbasis(reframe_operator(A, a - L, b + L).matrix);
    std::vector<Evolver> evl;
    std::vector<Mat> bl;
    for (int ell : ells) {
        evl.emplace_back(assemble_hamiltonian(spec, a - ell, b + ell).matrix);
        bl.push_back(evl.back().to_eigenbasis(reframe_operator(A, a - ell, b + ell).matrix));
    }
    DecayProfile prof = build_profile(spec, std::max(opt.profile_cutoff, L + 1));
    const double anorm = operator_norm(A);
    const int J = b - a + 1;
    RMat W;
    std::vector<double> sizes;
    if (opt.surface) {
        W = surface_energies(spec, a, b, L);
        for (int k = 0; k <= L; ++k) sizes.push_back(J + 2.0 * k);
    }
    std::vector<BoundCertificate> out;
    // Gamma_{conj s}(A) = Gamma_s(A)^dagger for Hermitian A, so conjugate points share one norm
    std::vector<std::pair<cplx, std::vector<double>>> done;
    for (const cplx& s : s_grid) {
        const std::vector<double>* twin = nullptr;
        if (A.matrix.isApprox(A.matrix.adjoint(), 0.0))
            for (const auto& [t, e] : done)
                if (t == std::conj(s)) twin = &e;
        std::vector<double> emps;
        Mat gL;
        bool need_big = !twin && s != cplx(0.0) && std::any_of(ells.begin(), ells.end(), [&](int l) { return l != L; });
        if (need_big) gL = evL.from_eigenbasis(bL, s);
        for (std::size_t i = 0; i < ells.size(); ++i) {
            const int ell = ells[i];
            double emp = 0.0;
            if (twin) {
                emp = (*twin)[i];
            } else if (ell != L && s != cplx(0.0)) {
                LocalOperator gl;
                gl.d = spec.d;
                gl.lo = a - ell;
                gl.hi = b + ell;
                gl.matrix = evl[i].from_eigenbasis(bl[i], s);
                emp = spectral_norm(gL - reframe_operator(gl, a - L, b + L).matrix, opt.norm_tol);
            }
            emps.push_back(emp);
            std::vector<BoundFamily> fams{BoundFamily::fundamental};
            if (opt.lambda) {
                fams.push_back(BoundFamily::exponential);
                if (ell >= 1) {
                    fams.push_back(BoundFamily::strip);
                    fams.push_back(BoundFamily::strip_proof);
                }
                if (ell < L) fams.push_back(BoundFamily::disk);
            }
            if (s.imag() == 0.0) fams.push_back(BoundFamily::real_lr);
            for (auto f : fams) {
                BoundParams bp;
                bp.s = s;
                bp.ell = ell;
                bp.L = L;
                bp.support_size = J;
                bp.lambda = opt.lambda;
                bp.family = f;
                bp.a_norm = anorm;
                BoundCertificate c = bound_eval(bp, prof);
                c.empirical = emp;
                c.label = family_name(f);
                out.push_back(c);
            }
            if (opt.surface) {
                BoundCertificate c;
                c.params.s = s;
                c.params.ell = ell;
                c.params.L = L;
                c.params.support_size = J;
                c.theoretical = anorm * surface_bound_eval(W, sizes, prof.omega0(), s, ell, L);
                c.empirical = emp;
                c.label = "surface";
                out.push_back(c);
            }
        }
        if (!twin) done.emplace_back(s, std::move(emps));
    }
    return out;
}

inline std::vector<BoundCertificate> locality_certificate(const InteractionSpec& spec, const LocalOperator& A,
                                                          const std::vector<cplx>& s_grid, int ell, int L,
                                                          const CertificateOptions& opt = {}) {
    return locality_certificate(spec, A, s_grid, std::vector<int>{ell}, L, opt);
}

}  // namespace lrlab
