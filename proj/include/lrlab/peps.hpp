#pragma once

#include "lrlab/audit.hpp"
#include "lrlab/chain.hpp"
#include "lrlab/linalg.hpp"
#include "lrlab/series.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

// Square-lattice PEPS at exact-contraction scale.
//
// Site tensor layout: T[k][j1][j2][j3][j4] with legs j1 = right, j2 = up, j3 = left, j4 = down,
// stored as a d x D^4 matrix; the column index is j1 D^3 + j2 D^2 + j3 D + j4.
// Sites are addressed (x, y), y = 0 is the bottom row.
//
// A boundary slot is a virtual leg crossing the region's border, keyed by (x, y, leg) of the
// site inside the region. Slots are ordered counterclockwise from the lower-left corner:
// bottom legs left to right, right legs bottom to top, top legs right to left, left legs top
// to bottom. Slot 0 is the most significant digit of the boundary index.
//
// Physical order of a region map: rows bottom to top, x ascending within a row, first site most
// significant.
namespace lrlab::peps {

enum Leg : int { kRight = 0, kUp = 1, kLeft = 2, kDown = 3 };

constexpr int kMaxPhys = 4;
constexpr int kMaxBond = 2;
constexpr int kMaxSlots = 12;
constexpr std::int64_t kMaxMapEntries = std::int64_t(1) << 23;
constexpr std::int64_t kMaxParentDim = 4096;
constexpr double kInjectiveTol = 1e-10;

struct SiteTensor {
    int d = 2;
    int D = 2;
    Mat data;

    void validate() const {
        if (d < 1 || D < 1) throw Error("SiteTensor: dimensions must be positive");
        if (data.rows() != d || data.cols() != ipow(D, 4))
            throw Error("SiteTensor: shape " + std::to_string(data.rows()) + "x" + std::to_string(data.cols()) +
                        " does not match d = " + std::to_string(d) + ", D = " + std::to_string(D));
        if (!data.allFinite()) throw Error("SiteTensor: non-finite entry");
    }
};

struct TensorGrid {
    int width = 0;
    int height = 0;
    std::vector<SiteTensor> sites;  // y * width + x

    const SiteTensor& at(int x, int y) const { return sites.at(std::size_t(y * width + x)); }
    SiteTensor& at(int x, int y) { return sites.at(std::size_t(y * width + x)); }
    int d() const { return sites.empty() ? 0 : sites[0].d; }
    int D() const { return sites.empty() ? 0 : sites[0].D; }

    void validate() const {
        if (width < 1 || height < 1 || sites.size() != std::size_t(width * height))
            throw Error("TensorGrid: site count does not match " + std::to_string(width) + "x" +
                        std::to_string(height));
        for (const auto& s : sites) {
            s.validate();
            if (s.d != d() || s.D != D()) throw Error("TensorGrid: mixed (d, D) across sites");
        }
        if (d() > kMaxPhys || D() > kMaxBond)
            throw Error("TensorGrid: guardrail overflow (d <= 4, D <= 2), got d = " + std::to_string(d()) +
                        ", D = " + std::to_string(D()));
    }
};

struct Rect {
    int x0 = 0, y0 = 0, w = 1, h = 1;
    bool contains(int x, int y) const { return x >= x0 && x < x0 + w && y >= y0 && y < y0 + h; }
    int sites() const { return w * h; }
    int slots() const { return 2 * (w + h); }
    std::string label() const { return std::to_string(w) + "x" + std::to_string(h) + "@" + std::to_string(x0) + "," + std::to_string(y0); }
};

struct SlotKey {
    int x = 0, y = 0, leg = 0;
    auto tie() const { return std::tie(x, y, leg); }
    bool operator<(const SlotKey& o) const { return tie() < o.tie(); }
    bool operator==(const SlotKey& o) const { return tie() == o.tie(); }
};

inline SlotKey partner(const SlotKey& s) {
    switch (s.leg) {
        case kRight: return {s.x + 1, s.y, kLeft};
        case kLeft: return {s.x - 1, s.y, kRight};
        case kUp: return {s.x, s.y + 1, kDown};
        default: return {s.x, s.y - 1, kUp};
    }
}

inline std::vector<SlotKey> boundary_slots(const Rect& r) {
    std::vector<SlotKey> s;
    for (int x = r.x0; x < r.x0 + r.w; ++x) s.push_back({x, r.y0, kDown});
    for (int y = r.y0; y < r.y0 + r.h; ++y) s.push_back({r.x0 + r.w - 1, y, kRight});
    for (int x = r.x0 + r.w - 1; x >= r.x0; --x) s.push_back({x, r.y0 + r.h - 1, kUp});
    for (int y = r.y0 + r.h - 1; y >= r.y0; --y) s.push_back({r.x0, y, kLeft});
    return s;
}

inline void check_region(const TensorGrid& g, const Rect& r) {
    g.validate();
    if (r.w < 1 || r.h < 1 || r.x0 < 0 || r.y0 < 0 || r.x0 + r.w > g.width || r.y0 + r.h > g.height)
        throw Error("peps: region " + r.label() + " outside the grid");
    if (r.w > 4 || r.h > 4 || r.slots() > kMaxSlots)
        throw Error("peps: guardrail overflow, region " + r.label() + " has " + std::to_string(r.slots()) +
                    " boundary slots (max 12, sides <= 4)");
}

namespace detail {

inline std::int64_t count_of(int base, std::size_t k) { return ipow(base, int(k)); }

// index offsets of all configurations on the given digit positions of an n-digit number
inline std::vector<std::int64_t> digit_offsets(const std::vector<int>& pos, int n, int base) {
    std::vector<std::int64_t> weight(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) weight[i] = ipow(base, n - 1 - pos[i]);
    std::vector<std::int64_t> off(std::size_t(count_of(base, pos.size())), 0);
    for (std::int64_t r = 0; r < std::int64_t(off.size()); ++r) {
        std::int64_t rem = r, o = 0;
        for (int i = int(pos.size()) - 1; i >= 0; --i) {
            o += (rem % base) * weight[i];
            rem /= base;
        }
        off[r] = o;
    }
    return off;
}

inline std::vector<int> complement(const std::vector<int>& pos, int n) {
    std::vector<bool> in(n, false);
    for (int p : pos) in[p] = true;
    std::vector<int> rest;
    for (int i = 0; i < n; ++i)
        if (!in[i]) rest.push_back(i);
    return rest;
}

// normalized partial trace onto the listed digits, output digits in list order
inline Mat reduce_to(const Mat& g, int base, int n, const std::vector<int>& keep) {
    auto ok = digit_offsets(keep, n, base);
    auto ot = digit_offsets(complement(keep, n), n, base);
    const auto k = std::int64_t(ok.size());
    Mat out(k, k);
    for (std::int64_t c = 0; c < k; ++c)
        for (std::int64_t r = 0; r < k; ++r) {
            cplx s = 0.0;
            for (auto t : ot) s += g(ok[r] + t, ok[c] + t);
            out(r, c) = s;
        }
    return out / double(ot.size());
}

// op tensored with the identity on the remaining digits
inline Mat embed_at(const Mat& op, int base, int n, const std::vector<int>& pos) {
    auto o = digit_offsets(pos, n, base);
    auto ot = digit_offsets(complement(pos, n), n, base);
    const auto dim = ipow(base, n);
    Mat out = Mat::Zero(dim, dim);
    for (auto t : ot)
        for (std::int64_t c = 0; c < op.cols(); ++c)
            for (std::int64_t r = 0; r < op.rows(); ++r) out(o[r] + t, o[c] + t) = op(r, c);
    return out;
}

inline void add_embedded(Mat& acc, const Mat& op, int base, int n, const std::vector<int>& pos, double sign = 1.0) {
    auto o = digit_offsets(pos, n, base);
    auto ot = digit_offsets(complement(pos, n), n, base);
    for (auto t : ot)
        for (std::int64_t c = 0; c < op.cols(); ++c)
            for (std::int64_t r = 0; r < op.rows(); ++r) acc(o[r] + t, o[c] + t) += sign * op(r, c);
}

inline std::vector<int> positions_in(const std::vector<SlotKey>& keys, const std::vector<SlotKey>& in) {
    std::vector<int> pos;
    for (const auto& k : keys) {
        auto it = std::find(in.begin(), in.end(), k);
        if (it == in.end()) throw Error("peps: slot not present in target ordering");
        pos.push_back(int(it - in.begin()));
    }
    return pos;
}

// new index -> old index, for relabelling digits from one key order to another
inline std::vector<std::int64_t> key_permutation(const std::vector<SlotKey>& from, const std::vector<SlotKey>& to,
                                                 int base) {
    if (from.size() != to.size()) throw Error("peps: key permutation between different sets");
    return digit_offsets(positions_in(to, from), int(from.size()), base);
}

inline Mat permute_square(const Mat& m, const std::vector<std::int64_t>& p) {
    const auto n = std::int64_t(p.size());
    Mat out(n, n);
    for (std::int64_t j = 0; j < n; ++j)
        for (std::int64_t i = 0; i < n; ++i) out(i, j) = m(p[i], p[j]);
    return out;
}

inline Mat permute_cols(const Mat& m, const std::vector<std::int64_t>& p) {
    Mat out(m.rows(), m.cols());
    for (std::int64_t j = 0; j < std::int64_t(p.size()); ++j) out.col(j) = m.col(p[j]);
    return out;
}

// operand with open legs; rows are physical for maps, or the same legs for boundary states
struct Open {
    Mat m;
    std::vector<SlotKey> keys;
};

struct CutSplit {
    std::vector<SlotKey> cut_a, cut_b, rest_a, rest_b;
};

inline CutSplit split_cut(const std::vector<SlotKey>& a, const std::vector<SlotKey>& b) {
    CutSplit s;
    std::vector<bool> b_cut(b.size(), false);
    for (const auto& k : a) {
        auto it = std::find(b.begin(), b.end(), partner(k));
        if (it != b.end()) {
            s.cut_a.push_back(k);
            s.cut_b.push_back(*it);
            b_cut[std::size_t(it - b.begin())] = true;
        } else {
            s.rest_a.push_back(k);
        }
    }
    for (std::size_t i = 0; i < b.size(); ++i)
        if (!b_cut[i]) s.rest_b.push_back(b[i]);
    return s;
}

template <class V>
std::vector<V> concat(std::vector<V> a, const std::vector<V>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

// contract |omega_e> = D^{-1/2} sum_j |jj> on every shared edge of two maps
inline Open glue_maps(const Open& a, const Open& b, int D) {
    auto s = split_cut(a.keys, b.keys);
    Mat pa = permute_cols(a.m, key_permutation(a.keys, concat(s.cut_a, s.rest_a), D));
    Mat pb = permute_cols(b.m, key_permutation(b.keys, concat(s.cut_b, s.rest_b), D));
    const auto nc = count_of(D, s.cut_a.size());
    const auto ua = count_of(D, s.rest_a.size()), ub = count_of(D, s.rest_b.size());
    Open out;
    out.m = Mat::Zero(a.m.rows() * b.m.rows(), ua * ub);
    for (std::int64_t j = 0; j < nc; ++j) out.m += kron(pa.middleCols(j * ua, ua), pb.middleCols(j * ub, ub));
    out.m /= std::sqrt(double(nc));
    out.keys = concat(s.rest_a, s.rest_b);
    return out;
}

// same contraction on T^dagger T, without ever forming the maps
inline Open glue_states(const Open& a, const Open& b, int D) {
    auto s = split_cut(a.keys, b.keys);
    Mat pa = permute_square(a.m, key_permutation(a.keys, concat(s.cut_a, s.rest_a), D));
    Mat pb = permute_square(b.m, key_permutation(b.keys, concat(s.cut_b, s.rest_b), D));
    const auto nc = count_of(D, s.cut_a.size());
    const auto ua = count_of(D, s.rest_a.size()), ub = count_of(D, s.rest_b.size());
    Open out;
    out.m = Mat::Zero(ua * ub, ua * ub);
    for (std::int64_t jp = 0; jp < nc; ++jp)
        for (std::int64_t j = 0; j < nc; ++j) {
            Mat blk_b = pb.block(jp * ub, j * ub, ub, ub) / double(nc);
            for (std::int64_t c = 0; c < ua; ++c)
                for (std::int64_t r = 0; r < ua; ++r) {
                    const cplx w = pa(jp * ua + r, j * ua + c);
                    if (w != cplx(0.0)) out.m.block(r * ub, c * ub, ub, ub) += w * blk_b;
                }
        }
    out.keys = concat(s.rest_a, s.rest_b);
    return out;
}

inline std::vector<SlotKey> site_keys(int x, int y) {
    return {{x, y, kRight}, {x, y, kUp}, {x, y, kLeft}, {x, y, kDown}};
}

}  // namespace detail

struct RegionMap {
    Rect region;
    int d = 2, D = 2;
    std::vector<SlotKey> slots;
    Mat T;  // d^{|R|} x D^{|dR|}
};

inline RegionMap contract_region(const TensorGrid& g, const Rect& r) {
    check_region(g, r);
    const int d = g.d(), D = g.D();
    if (ipow(d, r.sites()) * ipow(D, r.slots()) > kMaxMapEntries)
        throw Error("contract_region: guardrail overflow, explicit map for " + r.label() + " has more than 2^23 entries");
    detail::Open all;
    for (int y = r.y0; y < r.y0 + r.h; ++y) {
        detail::Open row;
        for (int x = r.x0; x < r.x0 + r.w; ++x) {
            detail::Open site{g.at(x, y).data, detail::site_keys(x, y)};
            row = (x == r.x0) ? site : detail::glue_maps(row, site, D);
        }
        all = (y == r.y0) ? row : detail::glue_maps(all, row, D);
    }
    RegionMap out;
    out.region = r;
    out.d = d;
    out.D = D;
    out.slots = boundary_slots(r);
    out.T = detail::permute_cols(all.m, detail::key_permutation(all.keys, out.slots, D));
    return out;
}

struct InjectivityReport {
    bool injective = false;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    int rank = 0;
};

inline InjectivityReport injectivity_report(const RegionMap& t) {
    InjectivityReport rep;
    RVec s = singular_values(t.T);
    if (s.size() == 0) return rep;
    rep.sigma_max = s.maxCoeff();
    rep.sigma_min = t.T.cols() > t.T.rows() ? 0.0 : s.minCoeff();
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > kInjectiveTol) ++rep.rank;
    rep.injective = t.T.cols() <= t.T.rows() && rep.sigma_min > kInjectiveTol;
    return rep;
}

struct BoundaryState {
    Rect region;
    int D = 2;
    std::vector<SlotKey> slots;
    Mat rho;
};

inline BoundaryState boundary_state(const RegionMap& t) {
    return {t.region, t.D, t.slots, t.T.adjoint() * t.T};
}

// rho = T^dagger T assembled from per-site T_v^dagger T_v, columns glued left to right
inline BoundaryState boundary_state(const TensorGrid& g, const Rect& r) {
    check_region(g, r);
    const int D = g.D();
    detail::Open all;
    for (int x = r.x0; x < r.x0 + r.w; ++x) {
        detail::Open col;
        for (int y = r.y0; y < r.y0 + r.h; ++y) {
            const Mat& t = g.at(x, y).data;
            detail::Open site{t.adjoint() * t, detail::site_keys(x, y)};
            col = (y == r.y0) ? site : detail::glue_states(col, site, D);
        }
        all = (x == r.x0) ? col : detail::glue_states(all, col, D);
    }
    BoundaryState out;
    out.region = r;
    out.D = D;
    out.slots = boundary_slots(r);
    out.rho = detail::permute_square(all.m, detail::key_permutation(all.keys, out.slots, D));
    return out;
}

// g_X for the arc of `len` slots starting at `start`
struct ArcTerm {
    int start = 0;
    int len = 0;
    int diam = 0;
    double norm = 0.0;
};

struct BoundaryHamiltonian {
    Rect region;
    int D = 2;
    std::vector<SlotKey> slots;
    Mat G;
    Eigh rho_eig;  // rho^{1/2} v is applied through the eigenbasis
    double constant = 0.0;  // g_empty = constant * 1
    double sigma_min = 0.0;
    double rho_cond = 0.0;
    double exp_residual = 0.0;  // |exp(2G) x - rho x| / |rho| on a probe vector
    double reconstruction_error = 0.0;
    std::vector<ArcTerm> terms;  // proper arcs, then the full circle
    DecayProfile profile;

    int n() const { return int(slots.size()); }
    Vec rho_sqrt_apply(const Vec& v) const {
        RVec w = rho_eig.values.cwiseSqrt();
        if (rho_eig.diagonal) return w.cast<cplx>().cwiseProduct(v);
        Vec t = rho_eig.vectors.adjoint() * v;
        return rho_eig.vectors * Vec(w.cast<cplx>().cwiseProduct(t));
    }
    std::vector<int> arc(int start, int len) const {
        std::vector<int> p;
        for (int i = 0; i < len; ++i) p.push_back((start + i) % n());
        return p;
    }
    int cyclic_distance(int i, int j) const {
        int a = std::abs(i - j) % n();
        return std::min(a, n() - a);
    }
};

namespace detail {

inline Mat expect_on(const BoundaryHamiltonian& bh, const std::vector<int>& pos) {
    if (pos.empty()) return bh.constant * Mat::Identity(1, 1);
    return reduce_to(bh.G, bh.D, bh.n(), pos);
}

inline std::vector<int> iota(int a, int b) {
    std::vector<int> v;
    for (int i = a; i < b; ++i) v.push_back(i);
    return v;
}

}  // namespace detail

// Arc inclusion-exclusion: g_X = E_X - E_{X-first} - E_{X-last} + E_{X-both}, compact on the arc
// in arc order. Proper arcs only; the full circle is G minus everything else.
inline Mat arc_term(const BoundaryHamiltonian& bh, int start, int len) {
    const int n = bh.n(), D = bh.D;
    if (len < 1 || len >= n) throw Error("arc_term: arc length out of range");
    auto pos = bh.arc(start, len);
    Mat g = detail::expect_on(bh, pos);
    const auto dim = g.rows();
    if (len == 1) return g - bh.constant * Mat::Identity(dim, dim);
    std::vector<int> tail(pos.begin() + 1, pos.end()), head(pos.begin(), pos.end() - 1);
    detail::add_embedded(g, detail::expect_on(bh, tail), D, len, detail::iota(1, len), -1.0);
    detail::add_embedded(g, detail::expect_on(bh, head), D, len, detail::iota(0, len - 1), -1.0);
    if (len == 2) return g + bh.constant * Mat::Identity(dim, dim);
    std::vector<int> inner(pos.begin() + 1, pos.end() - 1);
    detail::add_embedded(g, detail::expect_on(bh, inner), D, len, detail::iota(1, len - 1));
    return g;
}

inline Mat full_term(const BoundaryHamiltonian& bh) {
    const int n = bh.n(), D = bh.D;
    Mat g = bh.G;
    g.diagonal().array() -= bh.constant;
    for (int s = 0; s < n; ++s) {
        detail::add_embedded(g, detail::expect_on(bh, bh.arc(s, n - 1)), D, n, bh.arc(s, n - 1), -1.0);
        detail::add_embedded(g, detail::expect_on(bh, bh.arc(s, n - 2)), D, n, bh.arc(s, n - 2), 1.0);
    }
    return g;
}

// Omega_k = max over slots of the summed |g_X| over arcs through the slot with cyclic diameter >= k
inline DecayProfile measure_profile(const BoundaryHamiltonian& bh) {
    const int n = bh.n(), kmax = n / 2;
    std::vector<double> omegas(std::size_t(kmax + 1), 0.0);
    for (int k = 0; k <= kmax; ++k) {
        double best = 0.0;
        for (int x = 0; x < n; ++x) {
            double s = 0.0;
            for (const auto& t : bh.terms) {
                if (t.diam < k) continue;
                bool hit = t.len == n || (x - t.start + n) % n < t.len;
                if (hit) s += t.norm;
            }
            best = std::max(best, s);
        }
        omegas[std::size_t(k)] = best;
    }
    for (int k = 1; k <= kmax; ++k) omegas[k] = std::min(omegas[k], omegas[k - 1]);
    return make_profile(omegas, TailKind::finite_range, kmax);
}

inline BoundaryHamiltonian boundary_hamiltonian(const BoundaryState& st) {
    const auto dim = st.rho.rows();
    if (!is_hermitian(st.rho, 1e-10)) throw Error("boundary_hamiltonian: boundary state not Hermitian");
    Mat rho = 0.5 * (st.rho + st.rho.adjoint());
    Eigh e = eigh(rho);
    const double lmin = e.values.minCoeff(), lmax = e.values.maxCoeff();
    BoundaryHamiltonian bh;
    bh.region = st.region;
    bh.D = st.D;
    bh.slots = st.slots;
    bh.sigma_min = std::sqrt(std::max(lmin, 0.0));
    // sigma_min of T is sqrt(lambda_min(rho)); below ~1e-14 lambda_max the logarithm is noise
    if (lmax <= 0.0 || lmin <= 1e-20 || lmin <= 1e-14 * lmax)
        throw Error("boundary_hamiltonian: rank-deficient boundary state on " + st.region.label() +
                    " (sigma_min = " + std::to_string(bh.sigma_min) + ")");
    bh.rho_cond = lmax / lmin;
    bh.G = eigh_apply(e, [](double x) { return 0.5 * std::log(x); });
    bh.constant = bh.G.trace().real() / double(dim);
    {
        Vec x = lrlab::detail::krylov_start(dim);
        Vec t = e.diagonal ? x : Vec(e.vectors.adjoint() * x);
        for (Eigen::Index i = 0; i < dim; ++i) t(i) *= std::exp(2 * (0.5 * std::log(e.values(i))));
        Vec y = e.diagonal ? t : Vec(e.vectors * t);
        bh.exp_residual = (y - rho * x).norm() / lmax;
    }
    bh.rho_eig = std::move(e);
    rho.resize(0, 0);

    const int n = bh.n(), D = bh.D;
    // sum of proper-arc terms against the telescoped F(n-1) - F(n-2)
    Mat acc = Mat::Zero(dim, dim);
    for (int len = 1; len < n; ++len)
        for (int s = 0; s < n; ++s) {
            Mat g = arc_term(bh, s, len);
            bh.terms.push_back({s, len, std::min(len - 1, n / 2), spectral_norm(g)});
            detail::add_embedded(acc, g, D, n, bh.arc(s, len));
        }
    Mat full = full_term(bh);
    bh.terms.push_back({0, n, n / 2, spectral_norm(full)});
    acc += full;
    acc.diagonal().array() += bh.constant;
    bh.reconstruction_error = (acc - bh.G).norm();  // Frobenius, an upper bound
    bh.profile = measure_profile(bh);
    return bh;
}

inline BoundaryHamiltonian boundary_hamiltonian(const RegionMap& t) {
    auto rep = injectivity_report(t);
    if (!rep.injective)
        throw Error("boundary_hamiltonian: map not injective on " + t.region.label() +
                    " (sigma_min = " + std::to_string(rep.sigma_min) + ")");
    return boundary_hamiltonian(boundary_state(t));
}

inline BoundaryHamiltonian boundary_hamiltonian(const TensorGrid& g, const Rect& r) {
    return boundary_hamiltonian(boundary_state(g, r));
}

// operator on an ordered list of slots
struct SlotOp {
    std::vector<SlotKey> keys;
    Mat m;
};

// sum of g_X over nonempty arcs X inside the slot set, one operator per maximal arc component
inline std::vector<SlotOp> restrict_to(const BoundaryHamiltonian& bh, const std::vector<SlotKey>& set) {
    const int n = bh.n();
    std::vector<bool> in(n, false);
    for (const auto& k : set) {
        auto it = std::find(bh.slots.begin(), bh.slots.end(), k);
        if (it == bh.slots.end()) throw Error("restrict_to: slot outside the boundary");
        in[std::size_t(it - bh.slots.begin())] = true;
    }
    std::vector<SlotOp> out;
    if (std::all_of(in.begin(), in.end(), [](bool b) { return b; })) {
        Mat g = bh.G;
        g.diagonal().array() -= bh.constant;
        out.push_back({bh.slots, g});
        return out;
    }
    for (int s = 0; s < n; ++s) {
        if (!in[s] || in[(s + n - 1) % n]) continue;
        int len = 0;
        while (in[(s + len) % n]) ++len;
        auto pos = bh.arc(s, len);
        SlotOp op;
        for (int p : pos) op.keys.push_back(bh.slots[p]);
        op.m = detail::expect_on(bh, pos);
        op.m.diagonal().array() -= bh.constant;
        out.push_back(std::move(op));
    }
    return out;
}

// dense sum of slot operators on the target ordering
inline Mat embed_ops(const std::vector<SlotOp>& ops, const std::vector<SlotKey>& target, int D) {
    const auto dim = ipow(D, int(target.size()));
    Mat acc = Mat::Zero(dim, dim);
    for (const auto& op : ops) detail::add_embedded(acc, op.m, D, int(target.size()), detail::positions_in(op.keys, target));
    return acc;
}

// slot operator placed in a fixed target ordering, applied by gather / GEMM / scatter
class PlacedOp {
public:
    PlacedOp(const SlotOp& op, const std::vector<SlotKey>& target, int D)
        : PlacedOp(op.m, detail::positions_in(op.keys, target), int(target.size()), D) {}
    PlacedOp(const Mat& m, const std::vector<int>& pos, int n, int base) : m_(m) {
        o_ = detail::digit_offsets(pos, n, base);
        ot_ = detail::digit_offsets(detail::complement(pos, n), n, base);
    }

    Vec apply(const Vec& x, bool adjoint = false) const {
        const auto k = std::int64_t(o_.size()), t = std::int64_t(ot_.size());
        Mat X(k, t);
        for (std::int64_t j = 0; j < t; ++j)
            for (std::int64_t r = 0; r < k; ++r) X(r, j) = x(o_[r] + ot_[j]);
        Mat Y = adjoint ? Mat(m_.adjoint() * X) : Mat(m_ * X);
        Vec y(x.size());
        for (std::int64_t j = 0; j < t; ++j)
            for (std::int64_t r = 0; r < k; ++r) y(o_[r] + ot_[j]) = Y(r, j);
        return y;
    }

private:
    Mat m_;
    std::vector<std::int64_t> o_, ot_;
};

// ordered product ops[0] ops[1] ... ops[m-1]
struct OpChain {
    std::vector<PlacedOp> ops;
    Vec apply(Vec v) const {
        for (auto it = ops.rbegin(); it != ops.rend(); ++it) v = it->apply(v);
        return v;
    }
    Vec apply_adjoint(Vec v) const {
        for (const auto& o : ops) v = o.apply(v, true);
        return v;
    }
};

// ---------------------------------------------------------------------------------------------
// ABC geometry and factorization

// Height-2 strip of four columns: A = column x0, B = columns x0+1..x0+2, C = column x0+3.
struct AbcGeometry {
    Rect abc, ab, bc, b;
    std::map<std::string, std::vector<SlotKey>> seg;  // a, x, y, c, alpha, gamma
    int ell = 1;
};

inline AbcGeometry minimal_abc(int x0 = 0, int y0 = 0) {
    AbcGeometry g;
    g.abc = {x0, y0, 4, 2};
    g.ab = {x0, y0, 3, 2};
    g.bc = {x0 + 1, y0, 3, 2};
    g.b = {x0 + 1, y0, 2, 2};
    const int t = y0 + 1;
    g.seg["a"] = {{x0, t, kUp}, {x0, t, kLeft}, {x0, y0, kLeft}, {x0, y0, kDown}};
    g.seg["x"] = {{x0 + 1, y0, kDown}, {x0 + 1, t, kUp}};
    g.seg["y"] = {{x0 + 2, y0, kDown}, {x0 + 2, t, kUp}};
    g.seg["c"] = {{x0 + 3, y0, kDown}, {x0 + 3, y0, kRight}, {x0 + 3, t, kRight}, {x0 + 3, t, kUp}};
    g.seg["alpha"] = {{x0 + 1, t, kLeft}, {x0 + 1, y0, kLeft}};
    g.seg["gamma"] = {{x0 + 2, y0, kRight}, {x0 + 2, t, kRight}};
    auto same = [](std::vector<SlotKey> u, std::vector<SlotKey> v) {
        std::sort(u.begin(), u.end());
        std::sort(v.begin(), v.end());
        return u == v;
    };
    auto join = [&](std::initializer_list<const char*> names) {
        std::vector<SlotKey> s;
        for (auto nm : names) s = detail::concat(s, g.seg.at(nm));
        return s;
    };
    if (!same(join({"a", "x", "y", "c"}), boundary_slots(g.abc)) ||
        !same(join({"a", "x", "y", "gamma"}), boundary_slots(g.ab)) ||
        !same(join({"alpha", "x", "y", "c"}), boundary_slots(g.bc)) ||
        !same(join({"alpha", "x", "y", "gamma"}), boundary_slots(g.b)))
        throw Error("minimal_abc: segment table does not partition the boundaries");
    return g;
}

struct RegionResidual {
    std::string name;
    Rect region;
    int slots = 0;
    double residual = 0.0;
    double cond_sigma = 0.0;
    double cond_rho = 0.0;
    double sigma_min = 0.0;
    double reconstruction_error = 0.0;
};

struct FactorizationReport {
    int ell = 1;
    std::vector<RegionResidual> regions;  // ABC, AB, BC, B
    double max_residual() const {
        double m = 0.0;
        for (const auto& r : regions) m = std::max(m, r.residual);
        return m;
    }
};

struct BoundaryFamily {
    BoundaryHamiltonian abc, ab, bc, b;
};

inline BoundaryFamily boundary_family(const TensorGrid& g, const AbcGeometry& geo) {
    return {boundary_hamiltonian(g, geo.abc), boundary_hamiltonian(g, geo.ab), boundary_hamiltonian(g, geo.bc),
            boundary_hamiltonian(g, geo.b)};
}

namespace detail {

// exp(sign * H_S) for the restriction of H to the segment union, one factor per component
struct ExpFactor {
    std::vector<SlotOp> gen;
    double sign = 1.0;
};

inline ExpFactor efactor(const BoundaryHamiltonian& h, const AbcGeometry& geo, std::initializer_list<const char*> names,
                         double sign) {
    std::vector<SlotKey> s;
    for (auto nm : names) s = concat(s, geo.seg.at(nm));
    return {restrict_to(h, s), sign};
}

inline void push_exp(OpChain& chain, const ExpFactor& f, double sign, const std::vector<SlotKey>& target, int D) {
    for (const auto& g : f.gen) chain.ops.emplace_back(SlotOp{g.keys, hermitian_exp(g.m, cplx(sign * f.sign))}, target, D);
}

inline double op_norm(const std::function<Vec(const Vec&)>& a, const std::function<Vec(const Vec&)>& adj,
                      Eigen::Index n) {
    double top = lrlab::detail::lanczos_top([&](const Vec& v) -> Vec { return adj(a(v)); }, n);
    return std::sqrt(std::max(top, 0.0));
}

}  // namespace detail

inline RegionResidual region_residual(const std::string& name, const BoundaryHamiltonian& h,
                                      const std::vector<detail::ExpFactor>& sigma) {
    const int D = h.D;
    OpChain fwd, inv;
    for (const auto& f : sigma) detail::push_exp(fwd, f, 1.0, h.slots, D);
    for (auto it = sigma.rbegin(); it != sigma.rend(); ++it) detail::push_exp(inv, *it, -1.0, h.slots, D);
    const auto dim = h.G.rows();
    RegionResidual r;
    r.name = name;
    r.region = h.region;
    r.slots = h.n();
    r.cond_rho = h.rho_cond;
    r.sigma_min = h.sigma_min;
    r.reconstruction_error = h.reconstruction_error;
    auto q = [&](const Vec& v) { return h.rho_sqrt_apply(v); };
    auto m = [&](const Vec& v) -> Vec { return q(inv.apply(q(v))) - v; };
    auto mt = [&](const Vec& v) -> Vec { return q(inv.apply_adjoint(q(v))) - v; };
    r.residual = detail::op_norm(m, mt, dim);
    double ns = detail::op_norm([&](const Vec& v) { return fwd.apply(v); }, [&](const Vec& v) { return fwd.apply_adjoint(v); }, dim);
    double ni = detail::op_norm([&](const Vec& v) { return inv.apply(v); }, [&](const Vec& v) { return inv.apply_adjoint(v); }, dim);
    r.cond_sigma = ns * ni;
    if (!(r.cond_sigma <= 1e12))
        throw Error("factorization_residuals: sigma numerically singular on " + name + " (condition " +
                    std::to_string(r.cond_sigma) + ")");
    return r;
}

inline FactorizationReport factorization_residuals(const BoundaryFamily& f, const AbcGeometry& geo) {
    using detail::efactor;
    const auto& Q = f.abc;
    const auto& T = f.b;
    // Delta_az = e^{Q_ax} e^{-Q_y} e^{Q_axy}, Delta_zc = e^{Q_xyc} e^{-Q_x} e^{Q_yc}
    std::vector<detail::ExpFactor> d_az{efactor(Q, geo, {"a", "x"}, 1), efactor(Q, geo, {"y"}, -1),
                                        efactor(Q, geo, {"a", "x", "y"}, 1)};
    std::vector<detail::ExpFactor> d_zc{efactor(Q, geo, {"x", "y", "c"}, 1), efactor(Q, geo, {"x"}, -1),
                                        efactor(Q, geo, {"y", "c"}, 1)};
    // Upsilon_alphaz = e^{T_alphax} e^{-T_y} e^{T_alphaxy}, Upsilon_zgamma = e^{T_xygamma} e^{-T_x} e^{T_ygamma}
    std::vector<detail::ExpFactor> u_az{efactor(T, geo, {"alpha", "x"}, 1), efactor(T, geo, {"y"}, -1),
                                        efactor(T, geo, {"alpha", "x", "y"}, 1)};
    std::vector<detail::ExpFactor> u_zg{efactor(T, geo, {"x", "y", "gamma"}, 1), efactor(T, geo, {"x"}, -1),
                                        efactor(T, geo, {"y", "gamma"}, 1)};
    FactorizationReport rep;
    rep.ell = geo.ell;
    rep.regions.push_back(region_residual("ABC", f.abc, detail::concat(d_zc, d_az)));
    rep.regions.push_back(region_residual("AB", f.ab, detail::concat(u_zg, d_az)));
    rep.regions.push_back(region_residual("BC", f.bc, detail::concat(d_zc, u_az)));
    rep.regions.push_back(region_residual("B", f.b, detail::concat(u_zg, u_az)));
    return rep;
}

inline FactorizationReport factorization_residuals(const TensorGrid& g, const AbcGeometry& geo) {
    return factorization_residuals(boundary_family(g, geo), geo);
}

// ---------------------------------------------------------------------------------------------
// Parent Hamiltonian

struct ParentGapReport {
    double ground_energy = 0.0;
    int ground_dim = 0;
    double gap = 0.0;  // 0 when the whole spectrum is one level
    int rank_TR = 0;
    bool edge_injective = true;
    double frustration = 0.0;  // max over ground vectors and edges of |h_e v|
    int edges = 0;
};

inline ParentGapReport parent_gap(const TensorGrid& g, const Rect& r) {
    check_region(g, r);
    const int d = g.d(), ns = r.sites();
    const auto dim = ipow(d, ns);
    if (dim > kMaxParentDim) throw Error("parent_gap: guardrail overflow, physical dimension " + std::to_string(dim));
    auto index = [&](int x, int y) { return (y - r.y0) * r.w + (x - r.x0); };
    ParentGapReport rep;
    std::vector<std::pair<Mat, std::vector<int>>> hs;
    auto add_edge = [&](const Rect& e, int i1, int i2) {
        auto t = contract_region(g, e);
        Eigen::JacobiSVD<Mat> svd(t.T, Eigen::ComputeFullU);
        const RVec& s = svd.singularValues();
        int rank = 0;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s(i) > kInjectiveTol) ++rank;
        if (!(t.T.cols() <= t.T.rows() && rank == t.T.cols())) rep.edge_injective = false;
        Mat u = svd.matrixU().leftCols(rank);
        Mat h = Mat::Identity(d * d, d * d) - u * u.adjoint();
        hs.push_back({h, {i1, i2}});
        ++rep.edges;
    };
    for (int y = r.y0; y < r.y0 + r.h; ++y)
        for (int x = r.x0; x < r.x0 + r.w; ++x) {
            if (x + 1 < r.x0 + r.w) add_edge({x, y, 2, 1}, index(x, y), index(x + 1, y));
            if (y + 1 < r.y0 + r.h) add_edge({x, y, 1, 2}, index(x, y), index(x, y + 1));
        }
    Mat H = Mat::Zero(dim, dim);
    for (const auto& [h, pos] : hs) detail::add_embedded(H, h, d, ns, pos);
    Eigh e = eigh(H);
    const double hn = e.values.cwiseAbs().maxCoeff();
    const double tol = 1e-8 * std::max(1.0, hn);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i) order[std::size_t(i)] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return e.values(a) < e.values(b); });
    rep.ground_energy = e.values(order[0]);
    std::vector<Eigen::Index> ground;
    for (auto i : order) {
        if (e.values(i) <= rep.ground_energy + tol) {
            ground.push_back(i);
        } else {
            rep.gap = e.values(i) - rep.ground_energy;
            break;
        }
    }
    rep.ground_dim = int(ground.size());
    for (auto i : ground) {
        Vec v = e.diagonal ? Vec(Vec::Unit(dim, i)) : Vec(e.vectors.col(i));
        for (const auto& [h, pos] : hs)
            rep.frustration = std::max(rep.frustration, PlacedOp(h, pos, ns, d).apply(v).norm());
    }
    if (ipow(d, ns) * ipow(g.D(), r.slots()) <= kMaxMapEntries) rep.rank_TR = injectivity_report(contract_region(g, r)).rank;
    else rep.rank_TR = -1;
    return rep;
}

// ---------------------------------------------------------------------------------------------
// Homogeneity and the boundary audits. A and B are horizontally adjacent rectangles of equal
// height with A on the left.

struct HomogeneityEntry {
    int start = 0;  // arc start on dAB
    int len = 0;
    int dist = 0;
    double num = 0.0;
    double den = 0.0;
    double ratio = 0.0;
    bool degenerate = false;
};

struct HomogeneityReport {
    std::vector<HomogeneityEntry> entries;
    std::map<int, double> eta;        // bucket maxima by distance to dB
    std::map<int, bool> degenerate;   // every entry in the bucket was 0/0
};

namespace detail {

inline Rect right_part(const Rect& a, const Rect& ab) {
    if (a.x0 != ab.x0 || a.y0 != ab.y0 || a.h != ab.h || a.w >= ab.w)
        throw Error("peps: expected A as the left part of AB with equal height");
    return {a.x0 + a.w, a.y0, ab.w - a.w, a.h};
}

inline bool in_left(const SlotKey& k, const Rect& a) { return a.contains(k.x, k.y); }

}  // namespace detail

inline HomogeneityReport homogeneity_audit(const BoundaryHamiltonian& ha, const BoundaryHamiltonian& hab) {
    const Rect B = detail::right_part(ha.region, hab.region);
    (void)B;
    const int nab = hab.n();
    std::vector<bool> shared(nab, false);
    std::vector<int> bpart;
    for (int i = 0; i < nab; ++i) {
        shared[i] = detail::in_left(hab.slots[i], ha.region);
        if (!shared[i]) bpart.push_back(i);
    }
    HomogeneityReport rep;
    for (int len = 1; len < ha.n(); ++len)
        for (int s = 0; s < nab; ++s) {
            auto pos = hab.arc(s, len);
            if (!std::all_of(pos.begin(), pos.end(), [&](int p) { return shared[p]; })) continue;
            std::vector<SlotKey> keys;
            for (int p : pos) keys.push_back(hab.slots[p]);
            auto pa = detail::positions_in(keys, ha.slots);
            bool is_arc = true;
            for (std::size_t i = 1; i < pa.size(); ++i)
                if (pa[i] != (pa[i - 1] + 1) % ha.n()) is_arc = false;
            if (!is_arc) continue;
            Mat gab = arc_term(hab, s, len);
            Mat ga = arc_term(ha, pa[0], len);
            HomogeneityEntry e;
            e.start = s;
            e.len = len;
            e.dist = nab;
            for (int p : pos)
                for (int q : bpart) e.dist = std::min(e.dist, hab.cyclic_distance(p, q));
            e.num = spectral_norm(gab - ga);
            e.den = spectral_norm(gab) + spectral_norm(ga);
            if (e.den <= 1e-14) {
                e.degenerate = true;
                e.ratio = 0.0;
            } else {
                e.ratio = e.num / e.den;
            }
            auto it = rep.eta.find(e.dist);
            if (it == rep.eta.end()) {
                rep.eta[e.dist] = e.ratio;
                rep.degenerate[e.dist] = e.degenerate;
            } else {
                it->second = std::max(it->second, e.ratio);
                rep.degenerate[e.dist] = rep.degenerate[e.dist] && e.degenerate;
            }
            rep.entries.push_back(e);
        }
    return rep;
}

inline HomogeneityReport homogeneity_audit(const TensorGrid& g, const Rect& a, const Rect& ab) {
    return homogeneity_audit(boundary_hamiltonian(g, a), boundary_hamiltonian(g, ab));
}

inline double family_lambda(const DecayProfile& p) { return 8.0 * p.omega0() + 1.0; }

inline DecayProfile profile_max(const DecayProfile& p, const DecayProfile& q) {
    std::vector<double> w(std::max(p.omegas.size(), q.omegas.size()), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::max(p.omega(int(i)), q.omega(int(i)));
    return make_profile(w, TailKind::finite_range, int(w.size()) - 1);
}

// |Gamma^s_{Lambda_L}(Q) - Gamma^s_{Lambda_ell}(Q)| for Q on one slot, Lambda_ell the arc of radius ell
inline std::vector<AuditRow> boundary_locality_audit(const BoundaryHamiltonian& bh, int L, const std::vector<double>& s_grid,
                                                     std::uint64_t seed) {
    const int n = bh.n(), D = bh.D;
    if (2 * L + 1 >= n) throw Error("boundary_locality_audit: radius too large for the boundary circle");
    const double lambda = 1.0, om0 = bh.profile.omega0();
    const double phi = phi_lambda_norm(bh.profile, lambda);
    CounterRng rng(seed, 0x70E5);
    Mat q = random_hermitian(rng, D);
    q /= spectral_norm(q);
    const int len_big = 2 * L + 1;
    auto big = bh.arc((n - L) % n, len_big);  // slot 0 sits at position L
    auto evolve = [&](int ell, double s) {
        auto pos = bh.arc((n - ell) % n, 2 * ell + 1);
        Mat g = detail::expect_on(bh, pos);
        g.diagonal().array() -= bh.constant;
        Mat u = hermitian_exp(g, cplx(0.0, s));
        Mat qq = detail::embed_at(q, D, 2 * ell + 1, {ell});
        Mat out = u * qq * u.adjoint();
        return detail::embed_at(out, D, len_big, detail::iota(L - ell, L + ell + 1));
    };
    (void)big;
    std::vector<AuditRow> rows;
    for (double s : s_grid) {
        const double as = std::abs(s);
        Mat top = evolve(L, s);
        AuditRow r0;
        r0.check = "boundary_locality_norm";
        r0.n = L;
        r0.ell = L;
        r0.lhs = spectral_norm(top);
        r0.rhs = std::exp(2 * as * om0) * std::exp(8 * as * phi);
        r0.note = "s=" + std::to_string(s);
        rows.push_back(r0);
        for (int ell = 0; ell < L; ++ell) {
            AuditRow r;
            r.check = "boundary_locality";
            r.n = L;
            r.ell = ell;
            r.lhs = spectral_norm(top - evolve(ell, s));
            if (om0 > 0.0 && as > lambda / (8 * om0)) {
                r.rhs = kInf;
                r.note = "s outside |s| <= lambda/(8 Omega_0)";
            } else {
                r.rhs = std::exp(2 * as * om0) * std::exp(8 * as * phi) * std::exp((8 * as * om0 - lambda) * ell);
                r.note = "s=" + std::to_string(s);
            }
            rows.push_back(r);
        }
    }
    return rows;
}

namespace detail {

// slots of dAB on the top and bottom rows within k columns of the A|B cut
inline std::vector<SlotKey> cut_window(const BoundaryHamiltonian& hab, const Rect& a, int k) {
    const int cut = a.x0 + a.w;
    std::vector<SlotKey> s;
    for (const auto& key : hab.slots)
        if ((key.leg == kUp || key.leg == kDown) && key.x >= cut - k && key.x < cut + k) s.push_back(key);
    return s;
}

inline std::vector<SlotKey> filter(const std::vector<SlotKey>& s, const Rect& a, bool left) {
    std::vector<SlotKey> out;
    for (const auto& k : s)
        if (in_left(k, a) == left) out.push_back(k);
    return out;
}

inline Mat exp_dense(const Mat& h, double sign) { return hermitian_exp(h, cplx(sign)); }

inline double bound_exp(double x) { return x > 700.0 ? kInf : std::exp(x); }

}  // namespace detail

// |e^G e^{-G~}| <= exp(e^{12|Omega|_lambda}) and the cut-window approximation error, with
// G = sum over all arcs of dAB and G~ the part splitting into arcs inside dA or inside dB
inline std::vector<AuditRow> quasilocality_audit(const BoundaryHamiltonian& hab, const Rect& a, const DecayProfile& omega,
                                                 const std::vector<int>& ks) {
    const int D = hab.D;
    const double lambda = family_lambda(omega);
    const double phi = phi_lambda_norm(omega, lambda);
    const double e12 = detail::bound_exp(12 * phi);
    const auto& all = hab.slots;
    Mat G = embed_ops(restrict_to(hab, all), all, D);
    Mat Gt = embed_ops(detail::concat(restrict_to(hab, detail::filter(all, a, true)), restrict_to(hab, detail::filter(all, a, false))), all, D);
    Mat prod = detail::exp_dense(G, 1) * detail::exp_dense(Gt, -1);
    std::vector<AuditRow> rows;
    AuditRow r0;
    r0.check = "quasilocality_norm";
    r0.lhs = spectral_norm(prod);
    r0.rhs = detail::bound_exp(e12);
    r0.note = std::isinf(r0.rhs) ? "vacuous" : "";
    rows.push_back(r0);
    for (int k : ks) {
        auto s = detail::cut_window(hab, a, k);
        Mat gs = embed_ops(restrict_to(hab, s), all, D);
        Mat gts = embed_ops(detail::concat(restrict_to(hab, detail::filter(s, a, true)), restrict_to(hab, detail::filter(s, a, false))), all, D);
        Mat local = detail::exp_dense(gs, 1) * detail::exp_dense(gts, -1);
        AuditRow r;
        r.check = "quasilocality_window";
        r.ell = k;
        r.lhs = spectral_norm(prod - local);
        r.rhs = detail::bound_exp(e12) * e12 * std::exp((8 * omega.omega0() - lambda) * k);
        if (std::isnan(r.rhs)) r.rhs = kInf;
        r.note = std::isinf(r.rhs) ? "vacuous" : "";
        rows.push_back(r);
    }
    return rows;
}

// |e^G e^{-G~} - 1| for G, G~ the dAB and dA terms on (dA minus dB) minus the cut window S_ell
inline std::vector<AuditRow> quasiperturbation_audit(const BoundaryHamiltonian& ha, const BoundaryHamiltonian& hab,
                                                     const HomogeneityReport& eta, const DecayProfile& omega,
                                                     const std::vector<int>& ells) {
    const int D = hab.D;
    const double lambda = family_lambda(omega);
    const double e12 = detail::bound_exp(12 * phi_lambda_norm(omega, lambda));
    std::vector<AuditRow> rows;
    for (int ell : ells) {
        auto win = detail::cut_window(hab, ha.region, ell);
        std::vector<SlotKey> set;
        for (const auto& k : detail::filter(hab.slots, ha.region, true))
            if (std::find(win.begin(), win.end(), k) == win.end()) set.push_back(k);
        AuditRow r;
        r.check = "quasiperturbation_homogeneity";
        r.ell = ell;
        double tail = 0.0;
        for (const auto& [j, v] : eta.eta)
            if (j > ell) tail += v;
        if (set.empty()) {
            r.lhs = 0.0;
        } else {
            Mat g = embed_ops(restrict_to(hab, set), set, D);
            Mat gt = embed_ops(restrict_to(ha, set), set, D);
            Mat p = detail::exp_dense(g, 1) * detail::exp_dense(gt, -1);
            p.diagonal().array() -= 1.0;
            r.lhs = spectral_norm(p);
        }
        r.rhs = detail::bound_exp(e12 * tail) * e12 * tail;
        if (std::isnan(r.rhs)) r.rhs = kInf;
        r.note = std::isinf(r.rhs) ? "vacuous" : "";
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------------------------------------
// Tensor families

// Every leg on the border of a listed region is injective, t = U diag(2^{1/4}, 2^{-1/4}) onto its
// own physical qubit (U = 1 x random rotation); every other leg is a functional chi = (chi_0, 0)
// weighted so that each contracted bond carries unit weight. The boundary state is then a
// tensor product of one-slot factors, exactly.
inline TensorGrid product_grid(int width, int height, const std::vector<Rect>& regions, std::uint64_t seed,
                               bool isometric = false) {
    const int D = 2, d = 4;
    std::set<SlotKey> inj;
    for (const auto& r : regions)
        for (const auto& k : boundary_slots(r)) inj.insert(k);
    CounterRng rng(seed, 0xB0D);
    std::map<SlotKey, Eigen::Matrix2cd> tmap;
    const double a = isometric ? 1.0 : std::pow(2.0, 0.25), b = isometric ? 1.0 : std::pow(2.0, -0.25);
    for (const auto& k : inj) {
        const double th = 2 * M_PI * rng.uniform();
        Eigen::Matrix2cd u;
        u << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
        Eigen::Matrix2cd t = u * Eigen::Vector2cd(a, b).asDiagonal();
        tmap[k] = t;
    }
    auto chi0 = [&](const SlotKey& k) {
        auto p = partner(k);
        auto it = tmap.find(p);
        if (it != tmap.end()) return std::sqrt(2.0 / (it->second.adjoint() * it->second)(0, 0).real());
        return std::pow(2.0, 0.25);
    };
    TensorGrid g;
    g.width = width;
    g.height = height;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            SiteTensor s;
            s.d = d;
            s.D = D;
            s.data = Mat::Zero(d, 16);
            auto keys = detail::site_keys(x, y);
            std::array<int, 4> qubit{-1, -1, -1, -1};
            int used = 0;
            for (int l = 0; l < 4; ++l)
                if (inj.count(keys[l])) qubit[l] = used++;
            if (used > 2) throw Error("product_grid: more than two injective legs on one site");
            for (int k = 0; k < d; ++k)
                for (int col = 0; col < 16; ++col) {
                    const int q[2] = {(k >> 1) & 1, k & 1};
                    bool free_zero = true;
                    for (int u = used; u < 2; ++u)
                        if (q[u] != 0) free_zero = false;
                    if (!free_zero) continue;
                    cplx v = 1.0;
                    for (int l = 0; l < 4; ++l) {
                        const int j = (col >> (3 - l)) & 1;
                        if (qubit[l] >= 0) v *= tmap[keys[l]](q[qubit[l]], j);
                        else v *= (j == 0 ? chi0(keys[l]) : 0.0);
                    }
                    s.data(k, col) = v;
                }
            g.sites.push_back(std::move(s));
        }
    return g;
}

inline TensorGrid random_grid(int width, int height, int d, int D, std::uint64_t seed, bool complex_entries = false) {
    CounterRng rng(seed, 0x9E95);
    TensorGrid g;
    g.width = width;
    g.height = height;
    for (int i = 0; i < width * height; ++i) {
        SiteTensor s;
        s.d = d;
        s.D = D;
        s.data.resize(d, ipow(D, 4));
        for (Eigen::Index c = 0; c < s.data.cols(); ++c)
            for (Eigen::Index r = 0; r < d; ++r) s.data(r, c) = complex_entries ? cplx(rng.normal(), rng.normal()) : cplx(rng.normal());
        s.data *= std::sqrt(double(D * D)) / s.data.norm();
        g.sites.push_back(std::move(s));
    }
    g.validate();
    return g;
}

// T = sum_k |k><k k k k|
inline TensorGrid ghz_grid(int width, int height) {
    TensorGrid g;
    g.width = width;
    g.height = height;
    for (int i = 0; i < width * height; ++i) {
        SiteTensor s;
        s.d = 2;
        s.D = 2;
        s.data = Mat::Zero(2, 16);
        s.data(0, 0) = 1.0;
        s.data(1, 15) = 1.0;
        g.sites.push_back(std::move(s));
    }
    return g;
}

}  // namespace lrlab::peps
