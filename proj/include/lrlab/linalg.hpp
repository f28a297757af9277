#pragma once

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace lrlab {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr cplx kI{0.0, 1.0};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::int64_t ipow(std::int64_t b, int e) {
    std::int64_t r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

inline Mat kron(const Mat& a, const Mat& b) {
    Mat r(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return r;
}

inline bool is_real(const Mat& m) {
    return m.imag().cwiseAbs().maxCoeff() == 0.0;
}

inline bool is_diagonal(const Mat& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (i != j && m(i, j) != cplx(0.0)) return false;
    return true;
}

// relative check, scaled by max(1, |M|_F)
inline bool is_hermitian(const Mat& m, double tol = 1e-12) {
    if (m.rows() != m.cols()) return false;
    if (m.size() == 0) return true;
    double scale = std::max(1.0, m.norm());
    return (m - m.adjoint()).norm() <= tol * scale;
}

// Hermitian eigendecomposition, ascending except for diagonal inputs, which keep
// their original order and an empty vector matrix.
struct Eigh {
    RVec values;
    Mat vectors;
    bool diagonal = false;
    bool real_vectors = false;
    Eigen::Index dim() const { return values.size(); }
};

inline Eigh eigh(const Mat& h, bool want_vectors = true) {
    const auto n = h.rows();
    if (n != h.cols()) throw Error("eigh: matrix not square");
    Eigh out;
    if (n == 0) return out;
    if (is_diagonal(h)) {
        out.diagonal = true;
        out.values = h.diagonal().real();
        return out;
    }
    out.values.resize(n);
    const char job = want_vectors ? 'V' : 'N';
    int info = 0;
    if (is_real(h)) {
        RMat a = (0.5 * (h.real() + h.real().transpose())).eval();
        info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, job, 'U', static_cast<lapack_int>(n), a.data(),
                              static_cast<lapack_int>(n), out.values.data());
        if (want_vectors) out.vectors = a.cast<cplx>();
        out.real_vectors = true;
    } else {
        Mat a = (0.5 * (h + h.adjoint())).eval();
        info = LAPACKE_zheevd(LAPACK_COL_MAJOR, job, 'U', static_cast<lapack_int>(n),
                              reinterpret_cast<lapack_complex_double*>(a.data()),
                              static_cast<lapack_int>(n), out.values.data());
        if (want_vectors) out.vectors = std::move(a);
    }
    if (info != 0) throw Error("eigh: LAPACK failure, info = " + std::to_string(info));
    if (want_vectors && n > 64) {
        // one probe of V^dagger V = 1
        Vec x = Vec::Constant(n, cplx(1.0, 0.0));
        for (Eigen::Index i = 0; i < n; i += 3) x(i) = cplx(-0.5, 0.25);
        Vec y = out.vectors.adjoint() * (out.vectors * x);
        if ((y - x).norm() > 1e-8 * x.norm())
            throw Error("eigh: eigenvectors are not orthonormal (broken BLAS kernels? try OPENBLAS_CORETYPE=Haswell)");
    }
    return out;
}

// V f(D) V^dagger
template <class F>
Mat eigh_apply(const Eigh& e, F&& f) {
    const auto n = e.dim();
    Vec fv(n);
    for (Eigen::Index i = 0; i < n; ++i) fv(i) = cplx(f(e.values(i)));
    if (e.diagonal) return fv.asDiagonal().toDenseMatrix();
    if (e.real_vectors && fv.imag().cwiseAbs().maxCoeff() == 0.0) {
        RMat v = e.vectors.real();
        RMat left = v * fv.real().asDiagonal();
        return (left * v.transpose()).cast<cplx>();
    }
    Mat left = e.vectors * fv.asDiagonal();
    return left * e.vectors.adjoint();
}

// exp(c H) for Hermitian H and complex c
inline Mat hermitian_exp(const Mat& h, cplx c) {
    Eigh e = eigh(h);
    return eigh_apply(e, [c](double x) { return std::exp(c * x); });
}

inline RVec singular_values(const Mat& m) {
    const auto r = m.rows(), c = m.cols();
    const auto k = std::min(r, c);
    RVec s(k);
    if (k == 0) return s;
    Mat a = m;
    lapack_int info;
    if (is_real(m)) {
        RMat ar = m.real();
        info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'N', static_cast<lapack_int>(r), static_cast<lapack_int>(c),
                              ar.data(), static_cast<lapack_int>(r), s.data(), nullptr, 1, nullptr, 1);
    } else {
        info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', static_cast<lapack_int>(r), static_cast<lapack_int>(c),
                              reinterpret_cast<lapack_complex_double*>(a.data()), static_cast<lapack_int>(r),
                              s.data(), nullptr, 1, nullptr, 1);
    }
    if (info != 0) throw Error("singular_values: LAPACK failure, info = " + std::to_string(info));
    return s;
}

namespace detail {

// deterministic start vector for Krylov methods
inline Vec krylov_start(Eigen::Index n) {
    Vec v(n);
    std::uint64_t x = 0x9E3779B97F4A7C15ull;
    for (Eigen::Index i = 0; i < n; ++i) {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        double a = double(x >> 11) * 0x1.0p-53 - 0.5;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        double b = double(x >> 11) * 0x1.0p-53 - 0.5;
        v(i) = cplx(a + 0.25, b);
    }
    return v.normalized();
}

// largest eigenvalue of a positive semidefinite operator given by matvec
template <class Op>
double lanczos_top(Op&& apply, Eigen::Index n, int max_steps = 300, double tol = 1e-13) {
    const int kmax = static_cast<int>(std::min<Eigen::Index>(n, max_steps));
    std::vector<Vec> basis;
    basis.reserve(kmax + 1);
    basis.push_back(krylov_start(n));
    std::vector<double> alpha, beta;
    double prev = -1.0;
    int stable = 0;
    for (int k = 0; k < kmax; ++k) {
        Vec w = apply(basis[k]);
        double a = basis[k].dot(w).real();
        alpha.push_back(a);
        // full reorthogonalization, twice
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) w -= q * q.dot(w);
        double b = w.norm();
        Eigen::Index m = static_cast<Eigen::Index>(alpha.size());
        RMat t = RMat::Zero(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            t(i, i) = alpha[i];
            if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<RMat> es(t);
        double top = es.eigenvalues()(m - 1);
        double resid = b * std::abs(es.eigenvectors()(m - 1, m - 1));
        if (b <= 1e-14 * std::max(1.0, std::abs(top))) return top;
        if (resid <= tol * std::max(std::abs(top), 1e-300)) return top;
        if (prev >= 0.0 && std::abs(top - prev) <= 1e-13 * std::abs(top)) {
            if (++stable >= 3) return top;
        } else {
            stable = 0;
        }
        prev = top;
        beta.push_back(b);
        basis.push_back(w / b);
    }
    return prev;
}

}  // namespace detail

// tol is the Lanczos residual target relative to the top eigenvalue of M^dagger M
inline double spectral_norm(const Mat& m, double tol = 1e-13) {
    if (m.size() == 0) return 0.0;
    const auto r = m.rows(), c = m.cols();
    if (std::min(r, c) <= 96) {
        if (r == c && is_hermitian(m, 1e-14)) {
            Eigh e = eigh(m, false);
            return e.values.cwiseAbs().maxCoeff();
        }
        RVec s = singular_values(m);
        return s.size() ? s.maxCoeff() : 0.0;
    }
    double top;
    if (is_real(m)) {
        // real and imaginary parts of the Krylov vectors evolve separately
        RMat mr = m.real();
        top = detail::lanczos_top(
            [&](const Vec& v) -> Vec {
                RVec a = mr * v.real(), b = mr * v.imag();
                Vec out(c);
                out.real() = mr.transpose() * a;
                out.imag() = mr.transpose() * b;
                return out;
            },
            c, 300, tol);
    } else {
        top = detail::lanczos_top([&](const Vec& v) -> Vec { return m.adjoint() * (m * v); }, c, 300, tol);
    }
    return std::sqrt(std::max(top, 0.0));
}

inline double min_singular_value(const Mat& m) {
    RVec s = singular_values(m);
    if (s.size() == 0) return 0.0;
    if (m.cols() > m.rows()) return 0.0;
    return s.minCoeff();
}

}  // namespace lrlab
