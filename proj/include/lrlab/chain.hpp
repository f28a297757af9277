#pragma once

#include "lrlab/linalg.hpp"
#include "lrlab/series.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace lrlab {

constexpr int kMaxSitesD2 = 12;

// Dense operator on the interval [lo, hi]; site lo is the most significant tensor factor.
// An empty interval (hi < lo) holds a 1x1 scalar.
struct LocalOperator {
    Mat matrix = Mat::Identity(1, 1);
    int lo = 0;
    int hi = -1;
    int d = 2;

    int size() const { return hi >= lo ? hi - lo + 1 : 0; }
    std::vector<int> support() const {
        std::vector<int> s;
        for (int x = lo; x <= hi; ++x) s.push_back(x);
        return s;
    }
    void check() const {
        if (d < 2) throw Error("LocalOperator: d must be >= 2");
        auto dim = ipow(d, size());
        if (matrix.rows() != dim || matrix.cols() != dim)
            throw Error("LocalOperator: matrix dimension does not match d^|support|");
    }
    static LocalOperator identity(int d, int lo, int hi) {
        LocalOperator op;
        op.d = d;
        op.lo = lo;
        op.hi = hi;
        op.matrix = Mat::Identity(ipow(d, std::max(0, hi - lo + 1)), ipow(d, std::max(0, hi - lo + 1)));
        return op;
    }
    static LocalOperator on(const Mat& m, int d, int lo) {
        LocalOperator op;
        op.d = d;
        op.lo = lo;
        int n = 0;
        for (std::int64_t dim = 1; dim < m.rows(); dim *= d) ++n;
        op.hi = lo + n - 1;
        op.matrix = m;
        op.check();
        return op;
    }
};

inline int max_sites(int d) {
    // same memory budget as 12 qubits
    int n = 0;
    while (ipow(d, n + 1) <= 4096) ++n;
    return n;
}

inline void check_frame(int d, int nsites, int cap = -1) {
    int hard = max_sites(d);
    int lim = cap > 0 ? std::min(cap, hard) : hard;
    if (nsites > lim)
        throw Error("frame of " + std::to_string(nsites) + " sites exceeds cap of " + std::to_string(lim) +
                    " sites at d = " + std::to_string(d));
}

// Add coeff * (I_{left} (x) M (x) I_{right}) into H in place.
inline void add_embedded(Mat& h, const Mat& m, std::int64_t left, std::int64_t right, cplx coeff = 1.0) {
    const std::int64_t dm = m.rows();
    const std::int64_t blk = dm * right;
    for (std::int64_t l = 0; l < left; ++l)
        for (std::int64_t j = 0; j < dm; ++j)
            for (std::int64_t i = 0; i < dm; ++i) {
                cplx v = coeff * m(i, j);
                if (v == cplx(0.0)) continue;
                const std::int64_t r0 = l * blk + i * right, c0 = l * blk + j * right;
                for (std::int64_t r = 0; r < right; ++r) h(r0 + r, c0 + r) += v;
            }
}

// Matrix acting on the sorted sites `sites` embedded into [a, b] with identity elsewhere.
inline Mat embed_sites(const Mat& m, int d, const std::vector<int>& sites, int a, int b) {
    const int n = b - a + 1;
    const int k = static_cast<int>(sites.size());
    for (int s : sites)
        if (s < a || s > b) throw Error("embed_sites: site outside target interval");
    bool contiguous = true;
    for (int i = 1; i < k; ++i) contiguous = contiguous && sites[i] == sites[i - 1] + 1;
    const std::int64_t dim = ipow(d, n);
    Mat out = Mat::Zero(dim, dim);
    if (k == 0) {
        out.diagonal().setConstant(m(0, 0));
        return out;
    }
    if (contiguous) {
        add_embedded(out, m, ipow(d, sites[0] - a), ipow(d, b - sites[k - 1]));
        return out;
    }
    std::vector<std::int64_t> place(n);
    for (int p = 0; p < n; ++p) place[p] = ipow(d, n - 1 - p);
    std::vector<bool> in(n, false);
    for (int s : sites) in[s - a] = true;
    std::vector<int> rest;
    for (int p = 0; p < n; ++p)
        if (!in[p]) rest.push_back(p);
    const std::int64_t dk = ipow(d, k), dr = ipow(d, n - k);
    std::vector<std::int64_t> off_k(dk, 0), off_r(dr, 0);
    for (std::int64_t x = 0; x < dk; ++x) {
        std::int64_t t = x;
        for (int i = k - 1; i >= 0; --i) {
            off_k[x] += (t % d) * place[sites[i] - a];
            t /= d;
        }
    }
    for (std::int64_t x = 0; x < dr; ++x) {
        std::int64_t t = x;
        for (int i = n - k - 1; i >= 0; --i) {
            off_r[x] += (t % d) * place[rest[i]];
            t /= d;
        }
    }
    for (std::int64_t r = 0; r < dr; ++r)
        for (std::int64_t j = 0; j < dk; ++j)
            for (std::int64_t i = 0; i < dk; ++i) out(off_k[i] + off_r[r], off_k[j] + off_r[r]) = m(i, j);
    return out;
}

inline LocalOperator reframe_operator(const LocalOperator& op, int a, int b, int shift = 0) {
    const int lo = op.lo + shift, hi = op.hi + shift;
    if (op.size() > 0 && (lo < a || hi > b))
        throw Error("reframe_operator: support [" + std::to_string(lo) + "," + std::to_string(hi) +
                    "] escapes target [" + std::to_string(a) + "," + std::to_string(b) + "]");
    LocalOperator out;
    out.d = op.d;
    out.lo = a;
    out.hi = b;
    if (op.size() == 0) {
        out.matrix = op.matrix(0, 0) * Mat::Identity(ipow(op.d, b - a + 1), ipow(op.d, b - a + 1));
        return out;
    }
    const std::int64_t dim = ipow(op.d, b - a + 1);
    out.matrix = Mat::Zero(dim, dim);
    add_embedded(out.matrix, op.matrix, ipow(op.d, lo - a), ipow(op.d, b - hi));
    return out;
}

// Partial trace of an n-site matrix over positions `traced` (0-based within the frame).
// Returns the matrix on the kept positions in their original order.
inline Mat trace_positions(const Mat& m, int d, int n, const std::vector<int>& traced, bool normalized) {
    std::vector<bool> tr(n, false);
    for (int p : traced) {
        if (p < 0 || p >= n) throw Error("partial_trace: traced site outside support");
        tr[p] = true;
    }
    std::vector<int> keep, gone;
    for (int p = 0; p < n; ++p) (tr[p] ? gone : keep).push_back(p);
    const int k = static_cast<int>(keep.size());
    const std::int64_t dk = ipow(d, k), dt = ipow(d, n - k);
    auto offsets = [&](const std::vector<int>& pos, std::int64_t count) {
        std::vector<std::int64_t> off(count, 0);
        const int len = static_cast<int>(pos.size());
        for (std::int64_t x = 0; x < count; ++x) {
            std::int64_t t = x;
            for (int i = len - 1; i >= 0; --i) {
                off[x] += (t % d) * ipow(d, n - 1 - pos[i]);
                t /= d;
            }
        }
        return off;
    };
    auto ok = offsets(keep, dk), ot = offsets(gone, dt);
    Mat out = Mat::Zero(dk, dk);
    for (std::int64_t j = 0; j < dk; ++j)
        for (std::int64_t i = 0; i < dk; ++i) {
            cplx acc = 0.0;
            for (std::int64_t t = 0; t < dt; ++t) acc += m(ok[i] + ot[t], ok[j] + ot[t]);
            out(i, j) = acc;
        }
    if (normalized) out /= static_cast<double>(dt);
    return out;
}

// Traced interior sites are refilled with the identity so the result lives on an interval.
inline LocalOperator partial_trace(const LocalOperator& op, const std::vector<int>& traced_sites, bool normalized) {
    std::vector<int> pos;
    for (int s : traced_sites) {
        if (s < op.lo || s > op.hi) throw Error("partial_trace: traced site outside support");
        pos.push_back(s - op.lo);
    }
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    Mat red = trace_positions(op.matrix, op.d, op.size(), pos, normalized);
    std::vector<int> kept;
    for (int s = op.lo; s <= op.hi; ++s)
        if (!std::binary_search(pos.begin(), pos.end(), s - op.lo)) kept.push_back(s);
    LocalOperator out;
    out.d = op.d;
    if (kept.empty()) {
        out.matrix = red;
        return out;
    }
    out.lo = kept.front();
    out.hi = kept.back();
    if (out.size() == static_cast<int>(kept.size())) {
        out.matrix = std::move(red);
    } else {
        // identity on the traced interior sites is the normalized conditional expectation;
        // for the unnormalized trace it keeps the same convention with weight 1
        out.matrix = embed_sites(red, op.d, kept, out.lo, out.hi);
    }
    return out;
}

inline double operator_norm(const LocalOperator& op) { return spectral_norm(op.matrix); }

inline cplx normalized_trace(const Mat& m) { return m.trace() / static_cast<double>(m.rows()); }

// ---------------------------------------------------------------- interactions

struct GeneratorTerm {
    std::vector<int> offsets;  // sorted, first entry 0 after normalization
    Mat matrix;                // acts on the offset sites in order
};

struct InteractionSpec {
    int d = 2;
    std::vector<GeneratorTerm> generator;
    std::optional<std::pair<int, int>> replication;  // placements j allowed in [first, second]
    std::map<std::vector<int>, Mat> terms;           // explicit, non-translated terms
    TailKind tail = TailKind::explicit_values;
    int tail_range = 0;
    double tail_lambda = 0.0;
    double tail_prefactor = 0.0;

    bool empty() const { return generator.empty() && terms.empty(); }
};

// shift offsets to start at 0 and merge terms with the same offset set
inline void normalize_generator(InteractionSpec& spec) {
    std::map<std::vector<int>, Mat> merged;
    for (auto& t : spec.generator) {
        if (t.offsets.empty()) throw Error("InteractionSpec: generator term with empty offsets");
        std::vector<int> o = t.offsets;
        if (!std::is_sorted(o.begin(), o.end()) || std::adjacent_find(o.begin(), o.end()) != o.end())
            throw Error("InteractionSpec: offsets must be sorted and distinct");
        int base = o.front();
        for (int& x : o) x -= base;
        if (t.matrix.rows() != ipow(spec.d, static_cast<int>(o.size())) || t.matrix.cols() != t.matrix.rows())
            throw Error("InteractionSpec: generator matrix has wrong dimension");
        auto it = merged.find(o);
        if (it == merged.end()) merged.emplace(o, t.matrix);
        else it->second += t.matrix;
    }
    spec.generator.clear();
    for (auto& [o, m] : merged) spec.generator.push_back({o, m});
}

inline void validate_spec(const InteractionSpec& spec) {
    if (spec.d < 2) throw Error("InteractionSpec: d must be >= 2");
    for (const auto& t : spec.generator)
        if (!is_hermitian(t.matrix)) throw Error("InteractionSpec: non-Hermitian generator term");
    for (const auto& [s, m] : spec.terms) {
        if (s.empty() || !std::is_sorted(s.begin(), s.end())) throw Error("InteractionSpec: bad term support");
        if (m.rows() != ipow(spec.d, static_cast<int>(s.size()))) throw Error("InteractionSpec: term dimension");
        if (!is_hermitian(m)) throw Error("InteractionSpec: non-Hermitian term");
    }
}

inline InteractionSpec scale_spec(InteractionSpec spec, double c) {
    for (auto& t : spec.generator) t.matrix *= c;
    for (auto& [s, m] : spec.terms) m *= c;
    spec.tail_prefactor *= std::abs(c);
    return spec;
}

// every term (support, matrix) with support inside [a, b]
inline std::vector<std::pair<std::vector<int>, Mat>> placed_terms(const InteractionSpec& spec, int a, int b) {
    std::map<std::vector<int>, Mat> acc;
    for (const auto& t : spec.generator) {
        const int diam = t.offsets.back();
        int jlo = a, jhi = b - diam;
        if (spec.replication) {
            jlo = std::max(jlo, spec.replication->first);
            jhi = std::min(jhi, spec.replication->second);
        }
        for (int j = jlo; j <= jhi; ++j) {
            std::vector<int> s;
            for (int o : t.offsets) s.push_back(j + o);
            auto it = acc.find(s);
            if (it == acc.end()) acc.emplace(s, t.matrix);
            else it->second += t.matrix;
        }
    }
    for (const auto& [s, m] : spec.terms) {
        if (s.front() < a || s.back() > b) continue;
        auto it = acc.find(s);
        if (it == acc.end()) acc.emplace(s, m);
        else it->second += m;
    }
    return {acc.begin(), acc.end()};
}

inline LocalOperator assemble_hamiltonian(const InteractionSpec& spec, int a, int b, int cap = -1) {
    if (b < a) throw Error("assemble_hamiltonian: empty interval");
    check_frame(spec.d, b - a + 1, cap);
    LocalOperator h;
    h.d = spec.d;
    h.lo = a;
    h.hi = b;
    const std::int64_t dim = ipow(spec.d, b - a + 1);
    h.matrix = Mat::Zero(dim, dim);
    for (const auto& [s, m] : placed_terms(spec, a, b)) {
        if (!is_hermitian(m)) throw Error("assemble_hamiltonian: non-Hermitian term");
        bool contiguous = s.back() - s.front() + 1 == static_cast<int>(s.size());
        if (contiguous) add_embedded(h.matrix, m, ipow(spec.d, s.front() - a), ipow(spec.d, b - s.back()));
        else h.matrix += embed_sites(m, spec.d, s, a, b);
    }
    return h;
}

// Omega_n = sup_x sum { |Phi_X| : X contains x, diam X >= n }
inline DecayProfile build_profile(const InteractionSpec& spec, int cutoff) {
    if (cutoff < 0) throw Error("build_profile: cutoff must be >= 0");
    std::vector<double> om(cutoff + 1, 0.0);
    auto absorb = [&](std::vector<double>& acc, int diam, double w) {
        for (int n = 0; n <= std::min(diam, cutoff); ++n) acc[n] += w;
    };
    int maxdiam = 0;
    for (const auto& t : spec.generator) maxdiam = std::max(maxdiam, t.offsets.back());
    for (const auto& [s, m] : spec.terms) maxdiam = std::max(maxdiam, s.back() - s.front());

    if (spec.terms.empty() && !spec.replication) {
        // one unit cell: each placement of an offset set S covers a site |S| times
        for (const auto& t : spec.generator) absorb(om, t.offsets.back(), t.offsets.size() * spectral_norm(t.matrix));
    } else {
        int a = std::numeric_limits<int>::max(), b = std::numeric_limits<int>::min();
        for (const auto& [s, m] : spec.terms) {
            a = std::min(a, s.front());
            b = std::max(b, s.back());
        }
        if (spec.replication) {
            a = std::min(a, spec.replication->first);
            b = std::max(b, spec.replication->second + maxdiam);
        }
        if (a > b) a = b = 0;
        a -= 2 * maxdiam + 1;
        b += 2 * maxdiam + 1;
        std::map<int, std::vector<double>> per_site;
        for (const auto& [s, m] : placed_terms(spec, a, b)) {
            double w = spectral_norm(m);
            for (int x : s) {
                auto& v = per_site[x];
                if (v.empty()) v.assign(cutoff + 1, 0.0);
                absorb(v, s.back() - s.front(), w);
            }
        }
        for (auto& [x, v] : per_site)
            for (int n = 0; n <= cutoff; ++n) om[n] = std::max(om[n], v[n]);
        if (!spec.replication) {
            std::vector<double> bulk(cutoff + 1, 0.0);
            for (const auto& t : spec.generator)
                absorb(bulk, t.offsets.back(), t.offsets.size() * spectral_norm(t.matrix));
            for (int n = 0; n <= cutoff; ++n) om[n] = std::max(om[n], bulk[n]);
        }
    }
    for (int n = 0; n <= cutoff; ++n)
        if (!std::isfinite(om[n])) throw Error("build_profile: unbounded Omega_" + std::to_string(n));
    DecayProfile p;
    p.omegas = om;
    p.tail = spec.tail;
    p.range = spec.tail == TailKind::finite_range ? spec.tail_range : 0;
    p.tail_lambda = spec.tail_lambda;
    p.tail_prefactor = spec.tail_prefactor;
    if (spec.tail == TailKind::explicit_values && maxdiam > cutoff) {
        // terms beyond the cutoff are finitely many: describe them as a finite range
        p.tail = TailKind::finite_range;
        p.range = maxdiam;
    }
    if (p.tail == TailKind::finite_range && p.range > cutoff) {
        // cannot describe the missing entries exactly; fall back to the constant envelope Omega_cutoff
        p.tail = TailKind::exponential;
        p.tail_lambda = 1e-9;
        p.tail_prefactor = om[cutoff] * std::exp(1e-9 * cutoff);
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------- random generation

// splitmix64 on a (seed, stream) counter: every stream is reproducible on its own
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : state_(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ull))) {}

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline Mat random_hermitian(CounterRng& rng, std::int64_t dim) {
    Mat g(dim, dim);
    for (std::int64_t j = 0; j < dim; ++j)
        for (std::int64_t i = 0; i < dim; ++i) g(i, j) = cplx(rng.normal(), rng.normal());
    return 0.5 * (g + g.adjoint());
}

// Terms on [0, m] for m < max_support with norm u_m (T_m - T_{m+1}) / (m + 1), u_m in [1/2, 1].
// Then Omega_n = sum_{m >= n} (m + 1) |Phi_m| <= T_n.
inline InteractionSpec sample_random_interaction(std::uint64_t seed, int d, const DecayProfile& target,
                                                 int max_support) {
    if (max_support < 1) throw Error("sample_random_interaction: max_support must be >= 1");
    InteractionSpec spec;
    spec.d = d;
    for (int m = 0; m < max_support; ++m) {
        CounterRng rng(seed, static_cast<std::uint64_t>(m));
        double drop = target.omega(m) - (m + 1 < max_support ? target.omega(m + 1) : 0.0);
        double w = rng.uniform(0.5, 1.0) * std::max(drop, 0.0) / (m + 1);
        Mat r = random_hermitian(rng, ipow(d, m + 1));
        double nr = spectral_norm(r);
        if (nr > 0.0) r *= w / nr;
        r = 0.5 * (r + r.adjoint()).eval();
        std::vector<int> off;
        for (int o = 0; o <= m; ++o) off.push_back(o);
        spec.generator.push_back({off, r});
    }
    return spec;
}

// ---------------------------------------------------------------- presets (d = 2)

inline Mat pauli(char c) {
    Mat m(2, 2);
    switch (c) {
        case 'I': m << 1, 0, 0, 1; break;
        case 'X': m << 0, 1, 1, 0; break;
        case 'Y': m << 0, cplx(0, -1), cplx(0, 1), 0; break;
        case 'Z': m << 1, 0, 0, -1; break;
        default: throw Error("pauli: unknown label");
    }
    return m;
}

// H = -J sum Z_i Z_{i+1} - g sum X_i
inline InteractionSpec transverse_ising(double J, double g) {
    InteractionSpec spec;
    spec.d = 2;
    if (J != 0.0) spec.generator.push_back({{0, 1}, -J * kron(pauli('Z'), pauli('Z'))});
    if (g != 0.0) spec.generator.push_back({{0}, -g * pauli('X')});
    spec.tail = TailKind::finite_range;
    spec.tail_range = 1;
    return spec;
}

inline InteractionSpec classical_ising(double J) { return transverse_ising(J, 0.0); }

// H = h sum Z_i
inline InteractionSpec field_spec(double h) {
    InteractionSpec spec;
    spec.d = 2;
    if (h != 0.0) spec.generator.push_back({{0}, h * pauli('Z')});
    spec.tail = TailKind::finite_range;
    spec.tail_range = 0;
    return spec;
}

}  // namespace lrlab
