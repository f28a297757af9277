#pragma once

#include "lrlab/audit.hpp"
#include "lrlab/chain.hpp"
#include "lrlab/expansionals.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace lrlab {

struct FaultInjection {
    bool corrupt_etilde = false;
    std::uint64_t seed = 0;
};

// Etilde_(n,a) = e^{-H_[1,a]/2} e^{H_[n+1,a]/2} on [1, a]
inline Mat etilde_matrix(const InteractionSpec& spec, int n, int a, const FaultInjection* fault = nullptr) {
    if (!(n >= 1 && n < a)) throw Error("transfer: need 1 <= n < a");
    check_frame(spec.d, a);
    Mat e = frame_exp(spec, 1, a, 1, a, -0.5) * frame_exp(spec, n + 1, a, 1, a, 0.5);
    if (fault && fault->corrupt_etilde) {
        CounterRng rng(fault->seed, 0xFA170000ull + static_cast<std::uint64_t>(n * 64 + a));
        Mat r = random_hermitian(rng, e.rows());
        e += 0.1 * r / spectral_norm(r);
    }
    return e;
}

// tau_{-n} tr_[1,n](Et^dagger Q Et), normalized partial trace; q lives on [1, a]
inline Mat transfer_apply_matrix(const Mat& et, int d, int n, int a, const Mat& q) {
    Mat m = et.adjoint() * q * et;
    std::vector<int> traced;
    for (int p = 0; p < n; ++p) traced.push_back(p);
    return trace_positions(m, d, a, traced, true);
}

inline LocalOperator transfer_apply(const InteractionSpec& spec, int n, int a, const LocalOperator& Q,
                                    const FaultInjection* fault = nullptr) {
    if (Q.size() > 0 && (Q.lo < 1 || Q.hi > a)) throw Error("transfer_apply: Q escapes [1, a]");
    if (Q.d != spec.d) throw Error("transfer_apply: local dimension mismatch");
    Mat et = etilde_matrix(spec, n, a, fault);
    LocalOperator out;
    out.d = spec.d;
    out.lo = 1;
    out.hi = a - n;
    out.matrix = transfer_apply_matrix(et, spec.d, n, a, reframe_operator(Q, 1, a).matrix);
    return out;
}

inline double gibbs_expectation(const Mat& h, const Mat& q) {
    Eigh e = eigh(h);
    const double m = e.values.minCoeff();
    Mat w = eigh_apply(e, [m](double x) { return std::exp(-(x - m)); });
    return (w * q).trace().real() / w.trace().real();
}

struct GibbsIdentity {
    double lhs = 0.0;       // phi^[1,a](Q)
    double rhs = 0.0;       // phi^[1,a-n](L(Q)) / phi^[1,a-n](L(1))
    double residual = 0.0;  // |lhs - rhs|
    double trace_residual = 0.0;  // |tr(e^{-H_a} Q) - tr(e^{-H_{a-n}} L(Q))|, normalized traces
};

// Q is taken Hermitian so that both sides are real
inline GibbsIdentity gibbs_identity(const InteractionSpec& spec, int n, int a, const LocalOperator& Q,
                                    const FaultInjection* fault = nullptr) {
    if (!is_hermitian(Q.matrix)) throw Error("gibbs_identity: Q must be Hermitian");
    Mat et = etilde_matrix(spec, n, a, fault);
    Mat qf = reframe_operator(Q, 1, a).matrix;
    Mat lq = transfer_apply_matrix(et, spec.d, n, a, qf);
    Mat l1 = transfer_apply_matrix(et, spec.d, n, a, Mat::Identity(qf.rows(), qf.cols()));
    Mat ha = assemble_hamiltonian(spec, 1, a).matrix;
    Mat hb = assemble_hamiltonian(spec, 1, a - n).matrix;
    Mat ea = hermitian_exp(ha, -1.0), eb = hermitian_exp(hb, -1.0);
    GibbsIdentity g;
    g.lhs = (ea * qf).trace().real() / ea.trace().real();
    g.rhs = (eb * lq).trace().real() / (eb * l1).trace().real();
    g.residual = std::abs(g.lhs - g.rhs);
    g.trace_residual = std::abs(normalized_trace(ea * qf) - normalized_trace(eb * lq));
    return g;
}

// |L_(1,a)(L_(n,a+n)(Q)) - L_(n+1,a+n)(Q)| on exact frames; Q on [1, a + n]
inline double semigroup_residual(const InteractionSpec& spec, int n, int a, const LocalOperator& Q) {
    if (n < 1 || a < 2) throw Error("semigroup_residual: need n >= 1 and a >= 2");
    check_frame(spec.d, a + n);
    LocalOperator inner = transfer_apply(spec, n, a + n, Q);
    LocalOperator left = transfer_apply(spec, 1, a, inner);
    LocalOperator right = transfer_apply(spec, n + 1, a + n, Q);
    return spectral_norm(left.matrix - right.matrix);
}

// Q on [1, m] -> compress_m L_(n,a)(Q (x) 1), vec index = row * d^m + col
struct TransferWindow {
    int d = 2, n = 1, a = 2, m = 1;
    Mat superop;
    std::int64_t dim() const { return ipow(d, m); }

    Mat apply(const Mat& q) const {
        const auto D = dim();
        Vec v(D * D);
        for (std::int64_t i = 0; i < D; ++i)
            for (std::int64_t j = 0; j < D; ++j) v(i * D + j) = q(i, j);
        Vec w = superop * v;
        Mat out(D, D);
        for (std::int64_t i = 0; i < D; ++i)
            for (std::int64_t j = 0; j < D; ++j) out(i, j) = w(i * D + j);
        return out;
    }
};

inline Vec vectorize(const Mat& q) {
    const auto D = q.rows();
    Vec v(D * D);
    for (Eigen::Index i = 0; i < D; ++i)
        for (Eigen::Index j = 0; j < D; ++j) v(i * D + j) = q(i, j);
    return v;
}

inline Mat unvectorize(const Vec& v, std::int64_t D) {
    Mat out(D, D);
    for (std::int64_t i = 0; i < D; ++i)
        for (std::int64_t j = 0; j < D; ++j) out(i, j) = v(i * D + j);
    return out;
}

// S[(k,l),(i,j)] = c sum_{r,t,u} conj(F[i,r,t,k,u]) F[j,r,t,l,u], one GEMM on a permuted copy of Etilde.
inline TransferWindow build_window(const InteractionSpec& spec, int n, int a, int m,
                                   const FaultInjection* fault = nullptr) {
    if (m < 1 || m > a - n) throw Error("build_window: need 1 <= m <= a - n");
    check_frame(spec.d, a);
    if (ipow(spec.d, 2 * m) > 4096) throw Error("build_window: superoperator exceeds the 4096 cap");
    const int d = spec.d;
    Mat et = etilde_matrix(spec, n, a, fault);
    const std::int64_t Dm = ipow(d, m), Dr = ipow(d, a - m), Dt = ipow(d, n), Du = ipow(d, a - n - m);
    // rows: (i, r); cols: (t, k, u)
    Mat P(Dm * Dm, Dr * Dt * Du);
    for (std::int64_t i = 0; i < Dm; ++i)
        for (std::int64_t r = 0; r < Dr; ++r) {
            const std::int64_t row = i * Dr + r;
            for (std::int64_t t = 0; t < Dt; ++t)
                for (std::int64_t k = 0; k < Dm; ++k)
                    for (std::int64_t u = 0; u < Du; ++u) {
                        const std::int64_t col = (t * Dm + k) * Du + u;
                        P(i * Dm + k, (r * Dt + t) * Du + u) = et(row, col);
                    }
        }
    Mat M = P.conjugate() * P.transpose();
    const double c = 1.0 / static_cast<double>(Dt * Du);
    TransferWindow w;
    w.d = d;
    w.n = n;
    w.a = a;
    w.m = m;
    w.superop.resize(Dm * Dm, Dm * Dm);
    for (std::int64_t k = 0; k < Dm; ++k)
        for (std::int64_t l = 0; l < Dm; ++l)
            for (std::int64_t i = 0; i < Dm; ++i)
                for (std::int64_t j = 0; j < Dm; ++j) w.superop(k * Dm + l, i * Dm + j) = c * M(i * Dm + k, j * Dm + l);
    return w;
}

// compress_m L_(n,a)(lift_a(Q)) by the generic route, for cross-checks
inline Mat window_reference(const InteractionSpec& spec, int n, int a, int m, const Mat& q) {
    LocalOperator Q = LocalOperator::on(q, spec.d, 1);
    LocalOperator out = transfer_apply(spec, n, a, Q);
    std::vector<int> traced;
    for (int p = m; p < a - n; ++p) traced.push_back(p);
    return trace_positions(out.matrix, spec.d, a - n, traced, true);
}

struct FixedPointReport {
    double mu = 0.0;
    Vec nu;    // nu(Q) = sum_{ij} nu[i*D+j] Q[i,j]
    Mat h;
    double eigen_nu = kInf;
    double eigen_h = kInf;
    int iterations = 0;
    bool converged = false;

    // density rho with nu(Q) = tr(rho Q)
    Mat nu_density() const {
        const auto D = h.rows();
        Mat rho(D, D);
        for (Eigen::Index i = 0; i < D; ++i)
            for (Eigen::Index j = 0; j < D; ++j) rho(j, i) = nu(i * D + j);
        return rho;
    }
    cplx nu_of(const Mat& q) const { return nu.transpose() * vectorize(q); }
};

inline double trace_norm(const Mat& m) {
    RVec s = singular_values(m);
    return s.sum();
}

inline FixedPointReport fixed_point_solve(const TransferWindow& w, double tol, int max_iter) {
    if (!(tol > 0.0)) throw Error("fixed_point_solve: tol must be > 0");
    const auto D = w.dim();
    const Mat& S = w.superop;
    Mat St = S.transpose();
    Vec one = vectorize(Mat::Identity(D, D));
    FixedPointReport rep;
    Vec f = one / static_cast<double>(D);
    Vec h = one;
    for (int it = 1; it <= max_iter; ++it) {
        Vec g = St * f;
        cplx pair = g.dot(one.conjugate());
        if (!(pair.real() > 0.0)) throw Error("fixed_point_solve: nu(L(1)) <= 0, positivity broken");
        f = g / pair;
        Vec v = S * h;
        cplx nv = f.transpose() * v;
        if (!(nv.real() > 0.0)) throw Error("fixed_point_solve: nu(L(h)) <= 0, positivity broken");
        h = v / nv;
        rep.iterations = it;
        if (it % 5 == 0 || it == max_iter) {
            cplx mu = f.transpose() * (S * one);
            Vec rn = St * f - mu * f;
            Vec rh = S * h - mu * h;
            rep.eigen_nu = trace_norm(unvectorize(rn, D));
            rep.eigen_h = spectral_norm(unvectorize(rh, D));
            rep.mu = mu.real();
            if (rep.eigen_nu <= tol && rep.eigen_h <= tol) {
                rep.converged = true;
                break;
            }
        }
    }
    cplx nh = f.transpose() * h;
    h /= nh;
    rep.nu = f;
    rep.h = unvectorize(h, D);
    rep.h = (0.5 * (rep.h + rep.h.adjoint())).eval();
    if (!(rep.mu > 0.0)) throw Error("fixed_point_solve: mu <= 0, positivity broken");
    return rep;
}

struct MuBracket {
    int n = 0;
    double mu_n = 0.0;
    double tr_normalized = 0.0;
    double tr_unnormalized = 0.0;
    double G = 1.0;
    bool pass_normalized() const {
        return mu_n >= tr_normalized / (G * G) * (1 - 1e-12) && mu_n <= tr_normalized * G * G * (1 + 1e-12);
    }
    bool pass_unnormalized() const {
        return mu_n >= tr_unnormalized / (G * G) * (1 - 1e-12) && mu_n <= tr_unnormalized * G * G * (1 + 1e-12);
    }
    bool pass() const { return pass_normalized() || pass_unnormalized(); }
    std::string convention() const {
        if (pass_normalized() && pass_unnormalized()) return "both";
        if (pass_normalized()) return "normalized";
        if (pass_unnormalized()) return "unnormalized";
        return "none";
    }
};

inline std::vector<MuBracket> mu_bracket(const InteractionSpec& spec, double mu, int nmax) {
    ExpansionalConstants K = expansional_constants(build_profile(spec, 64), 1);
    std::vector<MuBracket> out;
    for (int n = 1; n <= nmax; ++n) {
        Mat e = hermitian_exp(assemble_hamiltonian(spec, 1, n).matrix, -1.0);
        MuBracket b;
        b.n = n;
        b.mu_n = std::pow(mu, n);
        b.tr_unnormalized = e.trace().real();
        b.tr_normalized = b.tr_unnormalized / static_cast<double>(e.rows());
        b.G = K.G_upper;
        out.push_back(b);
    }
    return out;
}

struct HSandwich {
    double min_eig = 0.0, max_eig = 0.0, lower = 0.0, upper = 0.0;
    bool pass() const { return min_eig >= lower - 1e-8 && max_eig <= upper + 1e-8; }
};

inline HSandwich h_sandwich(const InteractionSpec& spec, const FixedPointReport& rep) {
    ExpansionalConstants K = expansional_constants(build_profile(spec, 64), 1);
    Eigh e = eigh(rep.h, false);
    HSandwich s;
    s.min_eig = e.values.minCoeff();
    s.max_eig = e.values.maxCoeff();
    s.lower = std::pow(K.G_upper, -4.0);
    s.upper = std::pow(K.G_upper, 4.0);
    return s;
}

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r2 = 0.0;
    int points = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit f;
    f.points = static_cast<int>(x.size());
    if (x.size() < 2) return f;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= x.size();
    my /= y.size();
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
    return f;
}

inline std::vector<cplx> general_eigenvalues(const Mat& m) {
    const auto n = m.rows();
    Mat a = m;
    std::vector<cplx> w(n);
    lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', static_cast<lapack_int>(n),
                                    reinterpret_cast<lapack_complex_double*>(a.data()), static_cast<lapack_int>(n),
                                    reinterpret_cast<lapack_complex_double*>(w.data()), nullptr, 1, nullptr, 1);
    if (info != 0) throw Error("general_eigenvalues: LAPACK failure");
    return w;
}

struct RateSample {
    std::vector<double> distance;  // |L^n(Q)/mu^n - nu(Q) h|, n = 1..n_max
    double K = 0.0, delta = 0.0, r2 = 0.0;
    bool fitted = false;
    int exact_at = -1;  // first n after which the distance stays below 1e-13
};

struct RateEstimate {
    std::vector<RateSample> samples;
    double pooled_delta = 0.0;
    bool pooled_fitted = false;
    double spectral_ratio = 0.0;  // |lambda_2| / |lambda_1|
    double spectral_delta = kInf;
    int n_skip = 0;
};

inline RateEstimate convergence_rate(const TransferWindow& w, const FixedPointReport& rep, const std::vector<Mat>& qs,
                                     int n_max, int n_skip = 0) {
    if (!rep.converged) throw Error("convergence_rate: fixed point not converged");
    RateEstimate out;
    out.n_skip = n_skip;
    const auto D = w.dim();
    Vec hv = vectorize(rep.h);
    std::vector<std::vector<double>> xs, ys;
    for (const auto& q : qs) {
        RateSample s;
        cplx nq = rep.nu_of(q);
        Vec v = vectorize(q);
        for (int n = 1; n <= n_max; ++n) {
            v = w.superop * v;
            v /= rep.mu;
            s.distance.push_back(spectral_norm(unvectorize(v - nq * hv, D)));
        }
        for (int n = n_max; n >= 1; --n) {
            if (s.distance[n - 1] > 1e-13) break;
            s.exact_at = n;
        }
        std::vector<double> x, y;
        for (int n = n_skip + 1; n <= n_max; ++n) {
            double v = s.distance[n - 1];
            if (v > 1e-13) {
                x.push_back(n);
                y.push_back(std::log(v));
            }
        }
        if (x.size() >= 3) {
            LineFit f = fit_line(x, y);
            s.K = std::exp(f.intercept);
            s.delta = -f.slope;
            s.r2 = f.r2;
            s.fitted = true;
            xs.push_back(x);
            ys.push_back(y);
        }
        out.samples.push_back(s);
    }
    // common slope, one intercept per sample
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs[k].size(); ++i) mx += xs[k][i], my += ys[k][i];
        mx /= xs[k].size();
        my /= ys[k].size();
        for (std::size_t i = 0; i < xs[k].size(); ++i) {
            sxx += (xs[k][i] - mx) * (xs[k][i] - mx);
            sxy += (xs[k][i] - mx) * (ys[k][i] - my);
        }
    }
    if (sxx > 0) {
        out.pooled_delta = -sxy / sxx;
        out.pooled_fitted = true;
    }
    if (w.superop.rows() <= 1024) {
        auto ev = general_eigenvalues(w.superop);
        std::vector<double> mod;
        for (const auto& z : ev) mod.push_back(std::abs(z));
        std::sort(mod.begin(), mod.end(), std::greater<>());
        if (mod.size() >= 2 && mod[0] > 0) {
            out.spectral_ratio = mod[1] / mod[0];
            out.spectral_delta = out.spectral_ratio > 0 ? -std::log(out.spectral_ratio) : kInf;
        }
    }
    return out;
}

// Q ~ exp(X / (2|X|)) with X random Hermitian: positive, |Q| |Q^{-1}| <= e
inline Mat random_positive(CounterRng& rng, std::int64_t dim) {
    Mat x = random_hermitian(rng, dim);
    return hermitian_exp(x, 0.5 / spectral_norm(x));
}

inline Mat random_operator(CounterRng& rng, std::int64_t dim) {
    Mat x(dim, dim);
    for (std::int64_t j = 0; j < dim; ++j)
        for (std::int64_t i = 0; i < dim; ++i) x(i, j) = cplx(rng.normal(), rng.normal());
    return x / spectral_norm(x);
}

// |X - E_l(X)| with E_l the normalized partial trace over sites > l of an n-site frame
inline double locality_proxy(const Mat& x, int d, int n, int l) {
    if (l >= n) return 0.0;
    if (l < 0) l = 0;
    std::vector<int> traced;
    for (int p = l; p < n; ++p) traced.push_back(p);
    Mat e = trace_positions(x, d, n, traced, true);
    return spectral_norm(x - kron(e, Mat::Identity(ipow(d, n - l), ipow(d, n - l))));
}

struct TransferAuditParams {
    int n = 2;
    int ell = 1;
    int a = 8;
    int samples = 3;
    std::uint64_t seed = 1;
    double x = 1.5;  // weight in the |||.|||_{1,x} proxy
    FaultInjection fault;
};

inline std::vector<AuditRow> transfer_audit(const InteractionSpec& spec, const TransferAuditParams& p) {
    const int n = p.n, l = p.ell, a = p.a, d = spec.d;
    if (n < 1 || l < 1 || n + l >= a) throw Error("transfer_audit: need n, ell >= 1 and n + ell < a");
    check_frame(d, a);
    ExpansionalConstants K = expansional_constants(build_profile(spec, 64), a);
    const double G = K.G_upper, Gl = K.g_ell(l);
    const double tr = normalized_trace(hermitian_exp(assemble_hamiltonian(spec, 1, n).matrix, -1.0)).real();
    const FaultInjection* fault = &p.fault;
    Mat et = etilde_matrix(spec, n, a, fault);
    Mat et_short = etilde_matrix(spec, n, n + l, fault);
    const std::int64_t Da = ipow(d, a);
    const Mat Id_tail = Mat::Identity(ipow(d, a - n - l), ipow(d, a - n - l));
    std::vector<AuditRow> rows;
    auto row = [&](const std::string& name, int s, double lhs, double rhs, double slack = kSlack) {
        AuditRow r;
        r.check = name;
        r.n = n;
        r.ell = l;
        r.sample = s;
        r.lhs = lhs;
        r.rhs = rhs;
        r.slack = slack;
        rows.push_back(r);
    };
    for (int s = 0; s < p.samples; ++s) {
        CounterRng rng(p.seed, 1000 + s);
        Mat q = random_positive(rng, Da);
        Mat qi = q.inverse();
        const double nq = spectral_norm(q), nqi = spectral_norm(qi);
        Mat lq = transfer_apply_matrix(et, d, n, a, q);
        lq = (0.5 * (lq + lq.adjoint())).eval();
        Eigh el = eigh(lq, false);
        const double lmin = el.values.minCoeff(), lmax = el.values.maxCoeff();
        const double nl = std::max(std::abs(lmin), std::abs(lmax));

        // Gibbs identity on Hermitian Q, both forms
        {
            Mat l1 = transfer_apply_matrix(et, d, n, a, Mat::Identity(Da, Da));
            Mat ea = hermitian_exp(assemble_hamiltonian(spec, 1, a).matrix, -1.0);
            Mat eb = hermitian_exp(assemble_hamiltonian(spec, 1, a - n).matrix, -1.0);
            double lhs = (ea * q).trace().real() / ea.trace().real();
            double rhs = (eb * lq).trace().real() / (eb * l1).trace().real();
            row("gibbs_identity", s, std::abs(lhs - rhs), 1e-10, 0.0);
        }
        row("positivity", s, -lmin, 1e-10, 0.0);
        row("prop_i_norm", s, nl, tr * G * G * nq);

        // A = E_{n+l}(Q) on [1, n + l]
        std::vector<int> traced;
        for (int x = n + l; x < a; ++x) traced.push_back(x);
        Mat A = trace_positions(q, d, a, traced, true);
        Mat Apad = kron(A, Mat::Identity(ipow(d, a - n - l), ipow(d, a - n - l)));
        Mat la = kron(transfer_apply_matrix(et_short, d, n, n + l, A), Id_tail);
        row("prop_ii_truncation", s, spectral_norm(lq - la), tr * (2 * G * Gl * nq + G * G * spectral_norm(q - Apad)));

        const double pl = locality_proxy(lq, d, a - n, l);
        const double pq = locality_proxy(q, d, a, n + l);
        row("prop_iii_locality_proxy", s, pl, 2.0 * tr * (2 * G * Gl * nq + G * G * pq));
        row("prop_iv_lower", s, tr / (G * G) / nqi, lmin);
        row("prop_iv_upper", s, lmax, tr * G * G * nq);
        const double nli = 1.0 / lmin;
        row("prop_v_ratio_proxy", s, pl * nli, 2.0 * (2 * G * G * G * Gl * nq * nqi + std::pow(G, 4) * pq * nqi));
        if (1 + l <= n) {
            const double pq2 = locality_proxy(q, d, a, n - l);
            row("flatness", s, nl * nli,
                std::pow(G, 4) * (1 + 2 * std::pow(G, 3) * Gl * nq * nqi + 2 * std::pow(G, 4) * pq2 * nqi));
        }
        {
            // |||X|||_{1,x} proxy: |X| + sum_{k >= 1} |X - E_k X| x^k
            double tri = nl;
            for (int k = 1; k < a - n; ++k) tri += locality_proxy(lq, d, a - n, k) * std::pow(p.x, k);
            AuditRow r;
            r.check = "flatness_strong_ratio";
            r.n = n;
            r.ell = l;
            r.sample = s;
            r.lhs = tri * nli;
            r.rhs = kInf;
            r.note = "reported";
            rows.push_back(r);
        }
        // homogeneity: A on [1, n], B on [1, b] placed at [n + l + 1, n + l + b]
        const int b = a - n - l;
        if (b >= 1) {
            Mat An = random_operator(rng, ipow(d, n));
            Mat B = random_operator(rng, ipow(d, b));
            Mat AB = kron(kron(An, Mat::Identity(ipow(d, l), ipow(d, l))), B);
            Mat lab = transfer_apply_matrix(et, d, n, a, AB);
            Mat la2 = transfer_apply_matrix(et, d, n, a, kron(An, Mat::Identity(ipow(d, a - n), ipow(d, a - n))));
            Mat tb = kron(Mat::Identity(ipow(d, l), ipow(d, l)), B);
            row("homogeneity", s, spectral_norm(lab - tb * la2), tr * 4 * G * Gl);
        }
    }
    return rows;
}

}  // namespace lrlab
