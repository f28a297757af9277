#pragma once

#include "lrlab/chain.hpp"
#include "lrlab/evolution.hpp"
#include "lrlab/series.hpp"

#include <array>
#include <vector>

namespace lrlab {

struct ExpansionalPair {
    Mat right;  // e^{-(H+U)} e^{H}
    Mat left;   // e^{-H} e^{H+U}
    int lo = 0;
    int hi = -1;
    int d = 2;
};

inline ExpansionalPair expansional_closed(const LocalOperator& h, const LocalOperator& u) {
    if (!is_hermitian(h.matrix) || !is_hermitian(u.matrix)) throw Error("expansional_closed: non-Hermitian input");
    Mat uf = reframe_operator(u, h.lo, h.hi).matrix;
    Eigh eh = eigh(h.matrix);
    Eigh ehu = eigh(h.matrix + uf);
    auto ex = [](double s) { return [s](double x) { return std::exp(s * x); }; };
    Mat ph = eigh_apply(eh, ex(1.0)), mh = eigh_apply(eh, ex(-1.0));
    Mat phu = eigh_apply(ehu, ex(1.0)), mhu = eigh_apply(ehu, ex(-1.0));
    ExpansionalPair p;
    p.right = mhu * ph;
    p.left = mh * phu;
    p.lo = h.lo;
    p.hi = h.hi;
    p.d = h.d;
    return p;
}

// F' = Gamma_H^{i tau}(U) F, F(0) = 1, classical RK4 to tau = 1, carried out in the eigenbasis of H
// where Gamma_H^{i tau}(U)_{jk} = e^{-tau (l_j - l_k)} B_{jk}.
inline LocalOperator expansional_ode(const LocalOperator& h, const LocalOperator& u, double step) {
    if (!(step > 0.0 && step <= 0.1)) throw Error("expansional_ode: step must lie in (0, 0.1]");
    Mat uf = reframe_operator(u, h.lo, h.hi).matrix;
    Evolver ev(h.matrix);
    const Eigh& e = ev.eig();
    Mat B = ev.to_eigenbasis(uf);
    const auto n = B.rows();
    auto gen = [&](double tau) {
        Mat A(n, n);
        for (Eigen::Index k = 0; k < n; ++k)
            for (Eigen::Index j = 0; j < n; ++j) A(j, k) = std::exp(-tau * (e.values(j) - e.values(k))) * B(j, k);
        return A;
    };
    const int steps = static_cast<int>(std::ceil(1.0 / step - 1e-12));
    const double dt = 1.0 / steps;
    Mat F = Mat::Identity(n, n);
    Mat A0 = gen(0.0);
    for (int s = 0; s < steps; ++s) {
        double t = s * dt;
        Mat Ah = gen(t + 0.5 * dt), A1 = gen(t + dt);
        Mat k1 = A0 * F;
        Mat k2 = Ah * (F + 0.5 * dt * k1);
        Mat k3 = Ah * (F + 0.5 * dt * k2);
        Mat k4 = A1 * (F + dt * k3);
        F += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        A0 = std::move(A1);
    }
    LocalOperator out;
    out.d = h.d;
    out.lo = h.lo;
    out.hi = h.hi;
    out.matrix = e.diagonal ? F : Mat(e.vectors * F * e.vectors.adjoint());
    return out;
}

// 1 + int_0^1 G(t1) + int_0^1 int_0^{t1} G(t1) G(t2), Gauss-Legendre nodes; cross-check for small U
inline LocalOperator expansional_series2(const LocalOperator& h, const LocalOperator& u) {
    static const std::array<double, 8> x{-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                         -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                         0.7966664774136267,  0.9602898564975363};
    static const std::array<double, 8> w{0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                         0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                         0.2223810344533745, 0.1012285362903763};
    Mat uf = reframe_operator(u, h.lo, h.hi).matrix;
    Evolver ev(h.matrix);
    const Eigh& e = ev.eig();
    Mat B = ev.to_eigenbasis(uf);
    const auto n = B.rows();
    auto gen = [&](double tau) {
        Mat A(n, n);
        for (Eigen::Index k = 0; k < n; ++k)
            for (Eigen::Index j = 0; j < n; ++j) A(j, k) = std::exp(-tau * (e.values(j) - e.values(k))) * B(j, k);
        return A;
    };
    Mat first = Mat::Zero(n, n), second = Mat::Zero(n, n);
    for (std::size_t i = 0; i < x.size(); ++i) {
        double t1 = 0.5 * (x[i] + 1.0);
        Mat g1 = gen(t1);
        first += 0.5 * w[i] * g1;
        Mat inner = Mat::Zero(n, n);
        for (std::size_t j = 0; j < x.size(); ++j) inner += 0.5 * t1 * w[j] * gen(0.5 * t1 * (x[j] + 1.0));
        second += 0.5 * w[i] * g1 * inner;
    }
    Mat F = Mat::Identity(n, n) + first + second;
    LocalOperator out;
    out.d = h.d;
    out.lo = h.lo;
    out.hi = h.hi;
    out.matrix = e.diagonal ? F : Mat(e.vectors * F * e.vectors.adjoint());
    return out;
}

// Hamiltonian of [lo, hi] embedded in [a, b]
inline Mat frame_hamiltonian(const InteractionSpec& spec, int lo, int hi, int a, int b) {
    if (hi < lo) return Mat::Zero(ipow(spec.d, b - a + 1), ipow(spec.d, b - a + 1));
    return reframe_operator(assemble_hamiltonian(spec, lo, hi), a, b).matrix;
}

// e^{c H_[lo,hi]} on the frame [a, b], built on the small interval then padded
inline Mat frame_exp(const InteractionSpec& spec, int lo, int hi, int a, int b, double c) {
    if (hi < lo) return Mat::Identity(ipow(spec.d, b - a + 1), ipow(spec.d, b - a + 1));
    LocalOperator h = assemble_hamiltonian(spec, lo, hi);
    LocalOperator e = h;
    e.matrix = hermitian_exp(h.matrix, c);
    return reframe_operator(e, a, b).matrix;
}

struct WindowExpansionals {
    int n = 0, a = 0, p = 0;
    double beta = 1.0;
    Mat E;          // on [1, a]
    Mat Etilde;     // on [1, a]
    Mat Ebeta;      // on [1, 2p + 2], cut after p + 1
    double residual_tilde = 0.0;
    double residual_E = 0.0;
};

inline WindowExpansionals window_expansionals(const InteractionSpec& spec, int n, int a, double beta,
                                              bool with_ebeta = true) {
    if (!(n >= 1 && n < a)) throw Error("window_expansionals: need 1 <= n < a");
    if (!(beta > 0.0)) throw Error("window_expansionals: beta must be > 0");
    check_frame(spec.d, a);
    InteractionSpec sp = scale_spec(spec, beta);
    WindowExpansionals w;
    w.n = n;
    w.a = a;
    w.p = a - n - 1;
    w.beta = beta;
    Mat mhalf = frame_exp(sp, 1, a, 1, a, -0.5);
    Mat left_p = frame_exp(sp, 1, n, 1, a, 0.5), right_p = frame_exp(sp, n + 1, a, 1, a, 0.5);
    Mat left_m = frame_exp(sp, 1, n, 1, a, -0.5), right_m = frame_exp(sp, n + 1, a, 1, a, -0.5);
    w.Etilde = mhalf * right_p;
    w.E = w.Etilde * left_p;
    w.residual_tilde = spectral_norm(mhalf - w.Etilde * right_m);
    w.residual_E = spectral_norm(mhalf - w.E * left_m * right_m);
    if (with_ebeta) {
        const int len = 2 * (w.p + 1);
        check_frame(spec.d, len);
        w.Ebeta = frame_exp(sp, 1, len, 1, len, -1.0) * frame_exp(sp, 1, w.p + 1, 1, len, 1.0) *
                  frame_exp(sp, w.p + 2, len, 1, len, 1.0);
    }
    return w;
}

// exp(1/2 sum_{k=1}^{top} e^{4 Omega_0 k} Omega*_k(4)) and the partial sums used by the expansional bounds
struct ExpansionalSums {
    std::vector<double> term;  // e^{4 Omega_0 k} Omega*_k(4), k = 0..K
    double sum(int lo, int hi) const {
        double s = 0.0;
        for (int k = std::max(lo, 0); k <= hi && k < static_cast<int>(term.size()); ++k) s += term[k];
        return s;
    }
};

inline ExpansionalSums expansional_sums(const DecayProfile& p, int kmax) {
    ExpansionalSums s;
    auto b = omega_star(p, 4.0, kmax);
    for (int k = 0; k <= kmax; ++k) s.term.push_back(std::exp(4.0 * p.omega0() * k) * b[k]);
    return s;
}

// U_{J_p}: terms inside [lo, hi] that cross the cut between `cut` and `cut + 1`
inline Mat crossing_terms(const InteractionSpec& spec, int lo, int hi, int cut, int a, int b) {
    const std::int64_t dim = ipow(spec.d, b - a + 1);
    Mat U = Mat::Zero(dim, dim);
    for (const auto& [s, m] : placed_terms(spec, lo, hi)) {
        if (!(s.front() <= cut && s.back() > cut)) continue;
        U += embed_sites(m, spec.d, s, a, b);
    }
    return U;
}

struct ExpansionalAudit {
    std::vector<BoundCertificate> certs;
    bool all_pass() const {
        for (const auto& c : certs)
            if (!c.pass()) return false;
        return true;
    }
};

// Norm and difference bounds for E^beta_{a,p} and E^beta_{a,q}, plus the sampled-supremum lemma.
inline ExpansionalAudit expansional_bound_audit(const InteractionSpec& spec, double beta, int p, int q) {
    if (p < 0 || q < p) throw Error("expansional_bound_audit: need 0 <= p <= q");
    const int len = 2 * (q + 1);
    check_frame(spec.d, len);
    InteractionSpec sp = scale_spec(spec, beta);
    DecayProfile prof = build_profile(sp, std::max(64, q + 2));
    ExpansionalSums S = expansional_sums(prof, q + 1);
    ExpansionalAudit out;
    auto make = [&](const std::string& label, double theo, double emp, int pp) {
        BoundCertificate c;
        c.params.s = cplx(beta, 0.0);
        c.params.ell = pp;
        c.params.L = q;
        c.params.support_size = 2;
        c.theoretical = theo;
        c.empirical = emp;
        c.label = label;
        out.certs.push_back(c);
    };
    // J_q = [1, len], cut after q + 1; J_p = [q - p + 1, q + p + 2]
    auto ebeta = [&](int pp) {
        int lo = q - pp + 1, hi = q + pp + 2, cut = q + 1;
        return Mat(frame_exp(sp, lo, hi, 1, len, -1.0) * frame_exp(sp, lo, cut, 1, len, 1.0) *
                   frame_exp(sp, cut + 1, hi, 1, len, 1.0));
    };
    auto einv = [&](int pp) {
        int lo = q - pp + 1, hi = q + pp + 2, cut = q + 1;
        return Mat(frame_exp(sp, cut + 1, hi, 1, len, -1.0) * frame_exp(sp, lo, cut, 1, len, -1.0) *
                   frame_exp(sp, lo, hi, 1, len, 1.0));
    };
    Mat Ep = ebeta(p), Eq = ebeta(q), Ip = einv(p), Iq = einv(q);
    const double bp = std::exp(0.5 * S.sum(1, p + 1)), bq = std::exp(0.5 * S.sum(1, q + 1));
    make("norm_E_p", bp, spectral_norm(Ep), p);
    make("norm_Einv_p", bp, spectral_norm(Ip), p);
    make("norm_E_q", bq, spectral_norm(Eq), q);
    make("norm_Einv_q", bq, spectral_norm(Iq), q);
    const double bd = 0.5 * S.sum(p + 1, q + 1) * bq;
    make("diff_E", bd, spectral_norm(Ep - Eq), p);
    make("diff_Einv", bd, spectral_norm(Ip - Iq), p);

    // sup_{|s| <= 1} |Gamma^s_{H_{J_p}}(U_{J_p})|, sampled on 24 boundary points and s = 0
    std::vector<cplx> grid{cplx(0.0, 0.0)};
    for (int k = 0; k < 24; ++k) grid.push_back(std::polar(1.0, 2.0 * M_PI * k / 24.0));
    auto lemma = [&](int pp) {
        int lo = q - pp + 1, hi = q + pp + 2, cut = q + 1;
        Mat H = frame_hamiltonian(sp, lo, hi, lo, hi);
        Mat U = crossing_terms(sp, lo, hi, cut, lo, hi);
        Evolver ev(H);
        Mat B = ev.to_eigenbasis(U);
        std::vector<Mat> vals;
        for (const auto& s : grid) {
            LocalOperator g;
            g.d = spec.d;
            g.lo = lo;
            g.hi = hi;
            g.matrix = ev.from_eigenbasis(B, s);
            vals.push_back(reframe_operator(g, 1, len).matrix);
        }
        return vals;
    };
    auto gp = lemma(p), gq = lemma(q);
    double sup_p = 0.0, sup_d = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        sup_p = std::max(sup_p, spectral_norm(gp[i]));
        sup_d = std::max(sup_d, spectral_norm(gp[i] - gq[i]));
    }
    make("lemma_sup_gamma_U", 0.5 * S.sum(1, p + 1), sup_p, p);
    make("lemma_sup_gamma_diff", 0.5 * S.sum(p + 1, q + 1), sup_d, p);
    return out;
}

struct TailRow {
    int a = 0, a_next = 0;
    double diff = 0.0, diff_inv = 0.0, envelope = 0.0;
    bool pass() const { return diff <= envelope + kSlack && diff_inv <= envelope + kSlack; }
};

inline std::vector<TailRow> expansional_limit_tail(const InteractionSpec& spec, int n, const std::vector<int>& a_list) {
    for (std::size_t i = 1; i < a_list.size(); ++i)
        if (a_list[i] <= a_list[i - 1]) throw Error("expansional_limit_tail: a_list must increase");
    DecayProfile prof = build_profile(spec, 64);
    int lmax = a_list.empty() ? 0 : a_list.back();
    ExpansionalConstants K = expansional_constants(prof, lmax);
    std::vector<TailRow> rows;
    for (std::size_t i = 0; i + 1 < a_list.size(); ++i) {
        int a = a_list[i], b = a_list[i + 1];
        auto w1 = window_expansionals(spec, n, a, 1.0, false);
        auto w2 = window_expansionals(spec, n, b, 1.0, false);
        LocalOperator e1 = LocalOperator::on(w1.E, spec.d, 1);
        LocalOperator i1 = LocalOperator::on(Mat(w1.E.inverse()), spec.d, 1);
        TailRow r;
        r.a = a;
        r.a_next = b;
        r.diff = spectral_norm(reframe_operator(e1, 1, b).matrix - w2.E);
        r.diff_inv = spectral_norm(reframe_operator(i1, 1, b).matrix - Mat(w2.E.inverse()));
        r.envelope = K.g_ell(a - n);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace lrlab
