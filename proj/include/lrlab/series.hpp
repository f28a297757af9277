#pragma once

#include "lrlab/linalg.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace lrlab {

enum class TailKind { explicit_values, finite_range, exponential };

// Omega_0..Omega_K plus what is known beyond K.
//   explicit_values: zero beyond the stored entries
//   finite_range(r): zero for n > r
//   exponential(lambda, prefactor): Omega_n <= prefactor * exp(-lambda n) for n > K
struct DecayProfile {
    std::vector<double> omegas;
    TailKind tail = TailKind::explicit_values;
    int range = 0;
    double tail_lambda = 0.0;
    double tail_prefactor = 0.0;

    int cutoff() const { return static_cast<int>(omegas.size()) - 1; }

    double omega0() const { return omegas.empty() ? 0.0 : omegas[0]; }

    // stored value, or the declared envelope beyond the cutoff
    double omega(int n) const {
        if (n < 0) return omega0();
        if (n <= cutoff()) return omegas[n];
        if (tail == TailKind::exponential) return tail_prefactor * std::exp(-tail_lambda * n);
        return 0.0;
    }

    void validate() const {
        if (omegas.empty()) throw Error("DecayProfile: no entries");
        for (std::size_t n = 0; n < omegas.size(); ++n) {
            if (!std::isfinite(omegas[n])) throw Error("DecayProfile: Omega_" + std::to_string(n) + " not finite");
            if (omegas[n] < 0.0) throw Error("DecayProfile: Omega_" + std::to_string(n) + " negative");
            if (n > 0 && omegas[n] > omegas[n - 1] * (1.0 + 1e-12) + 1e-300)
                throw Error("DecayProfile: sequence increases at n = " + std::to_string(n));
        }
        if (tail == TailKind::finite_range) {
            for (int n = range + 1; n <= cutoff(); ++n)
                if (omegas[n] != 0.0) throw Error("DecayProfile: nonzero entry beyond declared range");
        }
        if (tail == TailKind::exponential && (tail_lambda <= 0.0 || tail_prefactor < 0.0))
            throw Error("DecayProfile: exponential tail needs lambda > 0 and prefactor >= 0");
    }
};

inline DecayProfile make_profile(std::vector<double> omegas, TailKind tail = TailKind::explicit_values,
                                 int range = 0, double lambda = 0.0, double prefactor = 0.0) {
    DecayProfile p{std::move(omegas), tail, range, lambda, prefactor};
    p.validate();
    return p;
}

// Omega*_k(x), k = 0..kmax, from k b_k = x sum_{j=1..k} j Omega_j b_{k-j}
inline std::vector<double> omega_star(const DecayProfile& p, double x, int kmax) {
    if (x < 0.0) throw Error("omega_star: negative x");
    if (kmax > p.cutoff()) throw Error("omega_star: kmax exceeds profile cutoff");
    std::vector<double> b(kmax + 1, 0.0);
    b[0] = 1.0;
    for (int k = 1; k <= kmax; ++k) {
        double acc = 0.0;
        for (int j = 1; j <= k; ++j) acc += j * p.omegas[j] * b[k - j];
        b[k] = x * acc / k;
    }
    return b;
}

// sum_{n >= first} Omega_n e^{lambda n}, analytic tail included; +inf on divergence
inline double weighted_sum(const DecayProfile& p, double lambda, int first = 0) {
    double s = 0.0;
    for (int n = std::max(first, 0); n <= p.cutoff(); ++n) s += p.omegas[n] * std::exp(lambda * n);
    if (p.tail == TailKind::exponential && p.tail_prefactor > 0.0) {
        double rate = p.tail_lambda - lambda;
        if (rate <= 0.0) return kInf;
        int start = std::max(first, p.cutoff() + 1);
        s += p.tail_prefactor * std::exp(-rate * start) / (1.0 - std::exp(-rate));
    }
    return s;
}

inline double phi_lambda_norm(const DecayProfile& p, double lambda) {
    if (lambda < 0.0) throw Error("phi_lambda_norm: negative lambda");
    return weighted_sum(p, lambda, 0);
}

// sum over n of Omega_n e^{lambda Delta(n)}; Delta(n) = n + 1 unless a table is given
inline double phi_delta_norm(const DecayProfile& p, double lambda, const std::vector<double>* delta = nullptr) {
    if (!delta) {
        double w = weighted_sum(p, lambda, 0);
        return std::isfinite(w) ? std::exp(lambda) * w : kInf;
    }
    double s = 0.0;
    for (int n = 0; n <= p.cutoff(); ++n) {
        if (p.omegas[n] == 0.0) continue;
        if (n >= static_cast<int>(delta->size())) throw Error("phi_delta_norm: Delta table too short");
        s += p.omegas[n] * std::exp(lambda * (*delta)[n]);
    }
    if (p.tail == TailKind::exponential && p.tail_prefactor > 0.0)
        throw Error("phi_delta_norm: caller Delta table cannot bound an exponential tail");
    return s;
}

// Upper bound on sum_{k > K} e^{c k} Omega*_k(x):
//   inf_{mu > c} e^{-(mu - c)(K + 1)} exp(x S_mu),  S_mu = sum_{j >= 1} Omega_j e^{mu j}
inline double series_remainder(const DecayProfile& p, double c, double x, int K) {
    if (x == 0.0) return 0.0;
    bool nonzero = p.tail == TailKind::exponential && p.tail_prefactor > 0.0;
    for (int j = 1; j <= p.cutoff() && !nonzero; ++j) nonzero = p.omegas[j] != 0.0;
    if (!nonzero) return 0.0;
    double upper = (p.tail == TailKind::exponential && p.tail_prefactor > 0.0) ? p.tail_lambda : c + 60.0;
    if (upper <= c) return kInf;
    auto logf = [&](double mu) {
        double s = weighted_sum(p, mu, 1);
        if (!std::isfinite(s)) return kInf;
        return -(mu - c) * (K + 1) + x * s;
    };
    double best = kInf, best_mu = c;
    const int grid = 400;
    for (int i = 1; i < grid; ++i) {
        double mu = c + (upper - c) * std::pow(double(i) / grid, 2.0);
        double v = logf(mu);
        if (v < best) {
            best = v;
            best_mu = mu;
        }
    }
    // golden-section refinement; any mu gives a valid bound
    double lo = std::max(c + 1e-12, best_mu - (upper - c) / grid * 4);
    double hi = std::min(upper - 1e-12, best_mu + (upper - c) / grid * 4);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
        double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
        double f1 = logf(m1), f2 = logf(m2);
        if (f1 < best) best = f1;
        if (f2 < best) best = f2;
        if (f1 < f2) hi = m2;
        else lo = m1;
    }
    return std::isfinite(best) ? std::exp(best) : kInf;
}

struct SeriesSum {
    double value = 0.0;
    double remainder = 0.0;
    double upper() const { return value + remainder; }
};

// sum_{k = lo..hi} e^{c k} Omega*_k(x); hi < 0 means infinity. Terms beyond the cutoff go to the remainder.
inline SeriesSum weighted_omega_star_sum(const DecayProfile& p, double c, double x, int lo, int hi) {
    SeriesSum out;
    const int K = p.cutoff();
    const bool infinite = hi < 0;
    const int top = infinite ? K : std::min(hi, K);
    if (lo <= top) {
        auto b = omega_star(p, x, top);
        for (int k = std::max(lo, 0); k <= top; ++k) out.value += std::exp(c * k) * b[k];
    }
    if (infinite || hi > K) out.remainder = series_remainder(p, c, x, std::max(K, lo - 1));
    return out;
}

// G = exp(sum_{k>=1} e^{2 Omega_0 k} Omega*_k(2)), G_l = G sum_{k>=l} ...
struct ExpansionalConstants {
    double G = 1.0;
    double G_upper = 1.0;
    std::vector<double> G_ell;
    std::vector<double> G_ell_upper;
    double remainder = 0.0;
    bool diverges = false;

    double g_ell(int l) const {
        if (l < 0) l = 0;
        if (l < static_cast<int>(G_ell_upper.size())) return G_ell_upper[l];
        return G_ell_upper.empty() ? 0.0 : G_ell_upper.back();
    }
};

inline ExpansionalConstants expansional_constants(const DecayProfile& p, int lmax) {
    ExpansionalConstants out;
    const double c = 2.0 * p.omega0();
    const int K = p.cutoff();
    if (p.tail == TailKind::exponential && p.tail_prefactor > 0.0 && p.tail_lambda <= c) {
        out.diverges = true;
        out.G = out.G_upper = kInf;
        out.G_ell.assign(lmax + 1, kInf);
        out.G_ell_upper.assign(lmax + 1, kInf);
        out.remainder = kInf;
        return out;
    }
    auto b = omega_star(p, 2.0, K);
    std::vector<double> terms(K + 1, 0.0);
    for (int k = 1; k <= K; ++k) terms[k] = std::exp(c * k) * b[k];
    double total = 0.0;
    for (int k = 1; k <= K; ++k) total += terms[k];
    out.remainder = series_remainder(p, c, 2.0, K);
    out.diverges = !std::isfinite(out.remainder);
    out.G = std::exp(total);
    out.G_upper = std::exp(total + out.remainder);
    out.G_ell.resize(lmax + 1);
    out.G_ell_upper.resize(lmax + 1);
    for (int l = 0; l <= lmax; ++l) {
        double tail = 0.0;
        for (int k = std::max(l, 1); k <= K; ++k) tail += terms[k];
        // the k = 0 term equals 1 and belongs to G_0 only
        double with0 = (l == 0) ? tail + 1.0 : tail;
        double rem = (l <= K + 1) ? out.remainder : series_remainder(p, c, 2.0, l - 1);
        out.G_ell[l] = out.G * with0;
        out.G_ell_upper[l] = out.G_upper * (with0 + rem);
    }
    return out;
}

// Super-exponential estimate for finite range r (paper convention Omega_k = 0 for k >= r'):
//   exp(y) y^{m+1} / (m+1)!,  y = x Omega_0 r'^2 e^{1 + x Omega_0 r'},  m = floor(l / r')
inline double finite_range_estimate(const DecayProfile& p, double x, int ell) {
    if (p.tail != TailKind::finite_range) throw Error("finite_range_estimate: profile is not finite range");
    const double rp = p.range + 1;
    const double y = x * p.omega0() * rp * rp * std::exp(1.0 + x * p.omega0() * rp);
    const int m = static_cast<int>(std::floor(ell / rp));
    return std::exp(y + (m + 1) * std::log(std::max(y, 1e-300)) - std::lgamma(m + 2.0));
}

enum class BoundFamily { disk, fundamental, exponential, strip, strip_proof, real_lr };

inline std::string family_name(BoundFamily f) {
    switch (f) {
        case BoundFamily::disk: return "disk";
        case BoundFamily::fundamental: return "fundamental";
        case BoundFamily::exponential: return "exponential";
        case BoundFamily::strip: return "strip";
        case BoundFamily::strip_proof: return "strip_proof";
        case BoundFamily::real_lr: return "real_lr";
    }
    return "unknown";
}

struct BoundParams {
    cplx s{0.0, 0.0};
    int ell = 0;
    int L = -1;  // -1 encodes infinity
    int support_size = 1;
    std::optional<double> lambda;
    BoundFamily family = BoundFamily::fundamental;
    double a_norm = 1.0;
    const std::vector<double>* delta = nullptr;  // disk family on general graphs
};

constexpr double kSlack = 1e-9;

struct BoundCertificate {
    BoundParams params;
    double theoretical = 0.0;
    std::optional<double> empirical;
    std::string label;

    double margin() const { return empirical ? theoretical - *empirical : theoretical; }
    bool pass() const { return !empirical || *empirical <= theoretical + kSlack; }
};

// Right-hand side of the selected inequality as printed. The fundamental,
// exponential and strip statements are written for |A| = 1; a_norm rescales.
inline BoundCertificate bound_eval(const BoundParams& bp, const DecayProfile& p) {
    if (bp.ell < 0 || (bp.L >= 0 && bp.L < bp.ell)) throw Error("bound_eval: need 0 <= ell <= L");
    if (bp.support_size < 1) throw Error("bound_eval: support_size must be >= 1");
    BoundCertificate cert;
    cert.params = bp;
    const double as = std::abs(bp.s);
    const double om0 = p.omega0();
    const double J = bp.support_size;
    const int ell = bp.ell;
    auto need_lambda = [&]() {
        if (!bp.lambda) throw Error("bound_eval: family " + family_name(bp.family) + " requires lambda");
        return *bp.lambda;
    };
    double v = 0.0;
    switch (bp.family) {
        case BoundFamily::fundamental: {
            if (bp.L >= 0 && bp.L == ell) break;
            auto sum = weighted_omega_star_sum(p, 4.0 * as * om0, 4.0 * as, ell + 1, bp.L);
            v = bp.a_norm * std::exp(2.0 * as * om0 * J) * sum.upper();
            break;
        }
        case BoundFamily::exponential: {
            double lam = need_lambda();
            if (as > lam / (4.0 * om0)) {
                v = kInf;
                break;
            }
            double nrm = phi_lambda_norm(p, lam);
            if (!std::isfinite(nrm)) {
                v = kInf;
                break;
            }
            v = bp.a_norm * std::exp(2.0 * as * om0 * J + 4.0 * as * nrm + (4.0 * as * om0 - lam) * ell);
            break;
        }
        case BoundFamily::strip:
        case BoundFamily::strip_proof: {
            double lam = need_lambda();
            double beta = std::abs(bp.s.imag());
            if (ell < 1 || !(4.0 * beta * om0 < lam)) {
                v = kInf;
                break;
            }
            double nrm = phi_lambda_norm(p, lam);
            if (!std::isfinite(nrm)) {
                v = kInf;
                break;
            }
            double pre = bp.family == BoundFamily::strip ? 2.0 * beta * om0 * J : 6.0 * as * om0 * J;
            int j = ell / 2;
            v = bp.a_norm * 2.0 * J * ell * std::exp(pre + 8.0 * as * nrm + (4.0 * beta * om0 - lam) * j);
            break;
        }
        case BoundFamily::real_lr: {
            if (bp.s.imag() != 0.0) {
                v = kInf;
                break;
            }
            if (as == 0.0) break;
            auto sum = weighted_omega_star_sum(p, 0.0, 4.0 * as, ell + 1, -1);
            v = bp.a_norm * J * std::exp(4.0 * as * om0) * sum.upper();
            break;
        }
        case BoundFamily::disk: {
            double lam = need_lambda();
            if (bp.L >= 0 && ell >= bp.L) throw Error("bound_eval: disk family needs ell < L");
            double nd = phi_delta_norm(p, lam, bp.delta);
            if (!std::isfinite(nd)) {
                v = kInf;
                break;
            }
            double pre = 2.0 * bp.a_norm * std::exp(lam * J);
            if (nd == 0.0) {
                // R = infinity limit of R e^{-l nd (R - |s|)} / (R - |s|)
                v = pre * std::exp(-ell * lam / 2.0);
                break;
            }
            double R = lam / (2.0 * nd);
            if (as >= R) {
                v = kInf;
                break;
            }
            v = pre * R * std::exp(-ell * nd * (R - as)) / (R - as);
            break;
        }
    }
    cert.theoretical = v;
    return cert;
}

// sum_{k=l+1..L} e^{2|s| Omega_0 |Lambda_k|} W*_k(2|s|), W*_k(x) = sum_n g_n(k) x^n / n!
inline std::vector<double> surface_star(const RMat& W, double x) {
    const int L = static_cast<int>(W.rows()) - 1;
    std::vector<double> out(L + 1, 0.0);
    out[0] = 1.0;
    // g[n][k], paths 0 = b_0 < ... < b_n = k
    std::vector<std::vector<double>> g(L + 1, std::vector<double>(L + 1, 0.0));
    for (int k = 1; k <= L; ++k) g[1][k] = W(0, k);
    for (int n = 2; n <= L; ++n)
        for (int k = n; k <= L; ++k) {
            double acc = 0.0;
            for (int j = n - 1; j < k; ++j) acc += g[n - 1][j] * W(j, k);
            g[n][k] = acc;
        }
    for (int k = 1; k <= L; ++k) {
        double term = 1.0, acc = 0.0;
        for (int n = 1; n <= k; ++n) {
            term *= x / n;
            acc += g[n][k] * term;
        }
        out[k] = acc;
    }
    return out;
}

inline double surface_bound_eval(const RMat& W, const std::vector<double>& sizes, double omega0, cplx s, int ell,
                                 int L) {
    if (W.rows() != W.cols() || W.rows() < L + 1) throw Error("surface_bound_eval: W too small");
    if (static_cast<int>(sizes.size()) < L + 1) throw Error("surface_bound_eval: sizes too short");
    const double as = std::abs(s);
    auto ws = surface_star(W.topLeftCorner(L + 1, L + 1), 2.0 * as);
    double v = 0.0;
    for (int k = ell + 1; k <= L; ++k) v += std::exp(2.0 * as * omega0 * sizes[k]) * ws[k];
    return v;
}

}  // namespace lrlab
