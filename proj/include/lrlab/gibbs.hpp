#pragma once

#include "lrlab/chain.hpp"
#include "lrlab/transfer.hpp"

#include <optional>
#include <vector>

namespace lrlab {

struct GibbsState {
    int a = 1, b = 1;
    double beta = 1.0;
    int d = 2;
    Mat density;

    cplx expect(const LocalOperator& q) const {
        return (density * reframe_operator(q, a, b).matrix).trace();
    }
};

inline GibbsState gibbs_density(const InteractionSpec& spec, int a, int b, double beta) {
    if (b < a) throw Error("gibbs_density: empty interval");
    if (beta < 0.0) throw Error("gibbs_density: beta must be >= 0");
    check_frame(spec.d, b - a + 1);
    GibbsState g;
    g.a = a;
    g.b = b;
    g.beta = beta;
    g.d = spec.d;
    Eigh e = eigh(assemble_hamiltonian(spec, a, b).matrix);
    const double lo = e.values.minCoeff();
    g.density = eigh_apply(e, [&](double x) { return std::exp(-beta * (x - lo)); });
    g.density /= g.density.trace().real();
    return g;
}

struct CorrelationPoint {
    int k = 0;
    cplx value{0.0, 0.0};
    bool skipped = false;
};

// Corr(k) = phi(Q1 tau_k(Q2)) - phi(Q1) phi(tau_k(Q2)); Q2 is moved k sites to the right of its own support
inline std::vector<CorrelationPoint> correlation_profile(const InteractionSpec& spec, int a, int b, double beta,
                                                         const LocalOperator& q1, const LocalOperator& q2,
                                                         const std::vector<int>& separations) {
    if (q1.lo < a || q1.hi > b) throw Error("correlation_profile: Q1 escapes the interval");
    GibbsState g = gibbs_density(spec, a, b, beta);
    Mat m1 = reframe_operator(q1, a, b).matrix;
    // tr(X Y) = sum_ij X_ij Y_ji
    auto tr = [](const Mat& x, const Mat& y) { return x.transpose().cwiseProduct(y).sum(); };
    const Mat rm1 = is_real(g.density) && is_real(m1) ? Mat((g.density.real() * m1.real()).cast<cplx>())
                                                      : Mat(g.density * m1);
    const cplx e1 = rm1.trace();
    std::vector<CorrelationPoint> out;
    for (int k : separations) {
        CorrelationPoint p;
        p.k = k;
        LocalOperator t = q2;
        t.lo += k;
        t.hi += k;
        if (t.lo < a || t.hi > b) {
            p.skipped = true;
            out.push_back(p);
            continue;
        }
        Mat m2 = reframe_operator(t, a, b).matrix;
        p.value = tr(rm1, m2) - e1 * tr(g.density, m2);
        out.push_back(p);
    }
    return out;
}

struct DecayFit {
    double C = 0.0;
    double delta = 0.0;
    double r2 = 0.0;
    int points_used = 0;
    int excluded = 0;
    bool degenerate = false;
    bool ok() const { return !degenerate && points_used > 0; }
};

// least squares of log v against separation; v <= 1e-13 or non-finite entries are dropped and counted
inline DecayFit decay_fit(const std::vector<double>& separations, const std::vector<double>& values, int min_points) {
    if (separations.size() != values.size()) throw Error("decay_fit: size mismatch");
    DecayFit f;
    bool any_above = false;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (std::isfinite(v) && v >= 1e-14) any_above = true;
        if (std::isfinite(v) && v > 1e-13) {
            x.push_back(separations[i]);
            y.push_back(std::log(v));
        } else {
            ++f.excluded;
        }
    }
    if (!any_above) {
        f.degenerate = true;
        return f;
    }
    if (static_cast<int>(x.size()) < std::max(min_points, 2))
        throw Error("decay_fit: only " + std::to_string(x.size()) + " usable points");
    LineFit lf = fit_line(x, y);
    f.C = std::exp(lf.intercept);
    f.delta = -lf.slope;
    f.r2 = lf.r2;
    f.points_used = lf.points;
    return f;
}

struct ConvergenceOptions {
    int k_max = 4;        // sequence (a): frames [1 - k, len + k]
    int a_max = 10;       // sequence (b): phi^[1, A] for A = len .. a_max
    int window_a = 7;     // frame of the nu window
    int window_m = 6;     // window size
    double tol = 1e-12;
    int max_iter = 2000;
};

struct ConvergenceSequence {
    std::vector<double> index;
    std::vector<double> values;
    DecayFit fit;
    bool fitted = false;
    bool monotone = true;
    std::string note;
};

struct ConvergenceReport {
    ConvergenceSequence seq_a, seq_b, seq_c;
    int reference_frame = 0;
    int window_a = 0, window_m = 0;
    bool nu_converged = false;
};

inline void finish_sequence(ConvergenceSequence& s) {
    // entries at or below the fit's noise floor cannot break monotonicity
    for (std::size_t i = 1; i < s.values.size(); ++i)
        if (s.values[i] > 1e-13 && s.values[i] > s.values[i - 1] * (1 + 1e-9)) s.monotone = false;
    try {
        s.fit = decay_fit(s.index, s.values, 3);
        s.fitted = s.fit.ok();
    } catch (const Error& e) {
        s.note = e.what();
    }
}

// Q lives on [1, len]; beta is absorbed into the interaction
inline ConvergenceReport convergence_audit(const InteractionSpec& spec, const LocalOperator& q, double beta,
                                           const ConvergenceOptions& opt = {}) {
    if (q.lo != 1) throw Error("convergence_audit: Q must start at site 1");
    const int len = q.size(), d = spec.d;
    InteractionSpec sp = scale_spec(spec, beta);
    ConvergenceReport rep;
    // (a)
    check_frame(d, len + 2 * opt.k_max);
    std::vector<cplx> vals;
    for (int k = 0; k <= opt.k_max; ++k) {
        GibbsState g = gibbs_density(sp, 1 - k, len + k, 1.0);
        vals.push_back(g.expect(q));
    }
    rep.reference_frame = len + 2 * opt.k_max;
    for (int k = 0; k < opt.k_max; ++k) {
        rep.seq_a.index.push_back(k);
        rep.seq_a.values.push_back(std::abs(vals[k] - vals[opt.k_max]));
    }
    finish_sequence(rep.seq_a);

    // nu on the window
    TransferWindow w = build_window(sp, 1, opt.window_a, opt.window_m);
    FixedPointReport fp = fixed_point_solve(w, opt.tol, opt.max_iter);
    rep.window_a = opt.window_a;
    rep.window_m = opt.window_m;
    rep.nu_converged = fp.converged;
    if (len > opt.window_m) throw Error("convergence_audit: Q does not fit in the window");
    auto nu_at = [&](int shift) {
        LocalOperator t = q;
        t.lo += shift;
        t.hi += shift;
        return fp.nu_of(reframe_operator(t, 1, opt.window_m).matrix);
    };
    // (b)
    check_frame(d, opt.a_max);
    const cplx nq = nu_at(0);
    for (int A = len; A <= opt.a_max; ++A) {
        GibbsState g = gibbs_density(sp, 1, A, 1.0);
        rep.seq_b.index.push_back(A);
        rep.seq_b.values.push_back(std::abs(g.expect(q) - nq));
    }
    finish_sequence(rep.seq_b);
    // (c)
    for (int k = 0; k + 1 + len <= opt.window_m; ++k) {
        rep.seq_c.index.push_back(k);
        rep.seq_c.values.push_back(std::abs(nu_at(k) - nu_at(k + 1)));
    }
    finish_sequence(rep.seq_c);
    return rep;
}

}  // namespace lrlab
