// spectral_grid.hpp - periodic lattice on the real 4-torus with Fourier
// differentiation and spectrally accurate quadrature.
//
// Coordinates: z_j = x_j + i y_j, j = 1, 2, every real coordinate periodic
// with period 1. Lattice index p = ((a N + b) N + c) N + d over
// (x_1, y_1, x_2, y_2). The Kahler form is omega = (i/2) g_{kbar j} dz^j ^ dzbar^k
// with constant Hermitian g; omega^2/2 = det(g) dx_1 dy_1 dx_2 dy_2.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Dense>
#include <fftw3.h>

#include "ahe/field.hpp"
#include "ahe/types.hpp"

namespace ahe {

/// Flat Kahler structure on the complex 2-torus.
struct TorusGeometry {
    int N = 16;
    /// g(k, j) = g_{kbar j}; Hermitian positive definite.
    Eigen::Matrix2cd g = Eigen::Matrix2cd::Identity();

    static TorusGeometry standard(int N) {
        TorusGeometry t;
        t.N = N;
        return t;
    }

    std::size_t points() const noexcept {
        const auto n = static_cast<std::size_t>(N);
        return n * n * n * n;
    }

    double det_g() const { return g.determinant().real(); }
    Eigen::Matrix2cd g_inv() const { return g.inverse(); }
    /// int_X omega^2 / 2 for unit periods.
    double volume() const { return det_g(); }

    void validate() const {
        if (N < 4 || (N & (N - 1)) != 0)
            throw ShapeError("grid size N must be a power of two >= 4, got " + std::to_string(N));
        if ((g - g.adjoint()).norm() > 1e-13) throw ShapeError("Kahler metric g is not Hermitian");
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(g, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw ShapeError("Kahler metric g is not positive definite");
    }

    /// Rescales g so that the volume is 1.
    void normalize_volume() { g /= std::sqrt(det_g()); }
};

/// Fourier multiplier c0 + sum_a lin_a m_a + sum_ab quad_ab m_a m_b in the
/// integer wavenumbers m of (x_1, y_1, x_2, y_2), Nyquist wavenumber set to 0.
struct Symbol {
    cd constant{0.0};
    std::array<cd, 4> linear{};
    std::array<std::array<cd, 4>, 4> quadratic{};

    cd operator()(const std::array<double, 4>& m) const noexcept {
        cd s = constant;
        for (int a = 0; a < 4; ++a) {
            s += linear[a] * m[a];
            for (int b = 0; b < 4; ++b) s += quadratic[a][b] * (m[a] * m[b]);
        }
        return s;
    }

    /// d_j = (d_{x_j} - i d_{y_j}) / 2, j in {1, 2}.
    static Symbol holo(int j) {
        check_axis(j);
        Symbol s;
        s.linear[2 * (j - 1)] = cd{0.0, pi};
        s.linear[2 * (j - 1) + 1] = cd{pi, 0.0};
        return s;
    }
    /// d_kbar = (d_{x_k} + i d_{y_k}) / 2.
    static Symbol anti(int k) {
        check_axis(k);
        Symbol s;
        s.linear[2 * (k - 1)] = cd{0.0, pi};
        s.linear[2 * (k - 1) + 1] = cd{-pi, 0.0};
        return s;
    }
    /// Composition of two first-order symbols.
    static Symbol compose(const Symbol& a, const Symbol& b) {
        Symbol s;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) s.quadratic[i][j] = a.linear[i] * b.linear[j];
        return s;
    }

    Symbol& operator+=(const Symbol& o) {
        constant += o.constant;
        for (int a = 0; a < 4; ++a) {
            linear[a] += o.linear[a];
            for (int b = 0; b < 4; ++b) quadratic[a][b] += o.quadratic[a][b];
        }
        return *this;
    }
    Symbol& operator*=(cd s) {
        constant *= s;
        for (int a = 0; a < 4; ++a) {
            linear[a] *= s;
            for (int b = 0; b < 4; ++b) quadratic[a][b] *= s;
        }
        return *this;
    }
    friend Symbol operator+(Symbol a, const Symbol& b) { return a += b; }
    friend Symbol operator*(cd s, Symbol a) { return a *= s; }

    static void check_axis(int j) {
        if (j < 1 || j > 2) throw std::out_of_range("complex axis index must be 1 or 2, got " + std::to_string(j));
    }
};

namespace detail {

class FftPlans {
public:
    explicit FftPlans(int N) : N_(N) {}
    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;
    ~FftPlans() {
        std::lock_guard lock(mutex_);
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    /// In-place batched 4D transform of `howmany` interleaved components.
    void execute(cd* data, int howmany, int sign) {
        fftw_plan plan = get(howmany, sign);
        auto* buf = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(plan, buf, buf);
    }

private:
    fftw_plan get(int howmany, int sign) {
        std::lock_guard lock(mutex_);
        auto key = std::make_pair(howmany, sign);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        const std::size_t n = static_cast<std::size_t>(N_);
        AlignedVector<cd> scratch(n * n * n * n * howmany);
        const int dims[4] = {N_, N_, N_, N_};
        auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
        fftw_plan plan = fftw_plan_many_dft(4, dims, howmany, buf, nullptr, howmany, 1, buf, nullptr,
                                            howmany, 1, sign, FFTW_ESTIMATE);
        if (!plan) throw std::runtime_error("FFTW planning failed");
        plans_.emplace(key, plan);
        return plan;
    }

    int N_;
    std::mutex mutex_;
    std::map<std::pair<int, int>, fftw_plan> plans_;
};

}  // namespace detail

/// Periodic N^4 lattice with Fourier differentiation. Copies share plans.
class SpectralGrid {
public:
    explicit SpectralGrid(TorusGeometry geometry, bool dealias = false)
        : geom_(std::move(geometry)), dealias_(dealias) {
        geom_.validate();
        plans_ = std::make_shared<detail::FftPlans>(geom_.N);
        const int N = geom_.N;
        wave_.resize(N);
        deriv_wave_.resize(N);
        for (int i = 0; i < N; ++i) {
            const int m = i <= N / 2 ? i : i - N;
            wave_[i] = m;
            deriv_wave_[i] = (2 * i == N) ? 0.0 : static_cast<double>(m);
        }
    }

    const TorusGeometry& geometry() const noexcept { return geom_; }
    int n() const noexcept { return geom_.N; }
    std::size_t points() const noexcept { return geom_.points(); }
    bool dealias() const noexcept { return dealias_; }
    void set_dealias(bool on) noexcept { dealias_ = on; }

    std::array<double, 4> coordinates(std::size_t p) const noexcept {
        const auto N = static_cast<std::size_t>(geom_.N);
        std::array<double, 4> x{};
        for (int a = 3; a >= 0; --a) {
            x[a] = static_cast<double>(p % N) / static_cast<double>(N);
            p /= N;
        }
        return x;
    }

    std::size_t index(const std::array<int, 4>& idx) const noexcept {
        const auto N = static_cast<std::size_t>(geom_.N);
        std::size_t p = 0;
        for (int a = 0; a < 4; ++a) p = p * N + static_cast<std::size_t>(idx[a]);
        return p;
    }

    /// Storage index of the Fourier coefficient with integer wave vector m.
    std::size_t fourier_index(const std::array<int, 4>& m) const noexcept {
        std::array<int, 4> idx{};
        for (int a = 0; a < 4; ++a) idx[a] = ((m[a] % geom_.N) + geom_.N) % geom_.N;
        return index(idx);
    }

    /// Unnormalized forward transform of every matrix entry.
    MatrixField forward(MatrixField f) const {
        check(f);
        plans_->execute(f.data(), static_cast<int>(f.block()), FFTW_FORWARD);
        return f;
    }

    /// Inverse of forward().
    MatrixField inverse(MatrixField fhat) const { return backward(std::move(fhat), true); }

    /// Multiplies a spectrum by a symbol (or its reciprocal) and returns to
    /// physical space.
    MatrixField apply(const MatrixField& fhat, const Symbol& s, bool reciprocal = false) const {
        check(fhat);
        MatrixField out = fhat;
        const int N = geom_.N;
        const std::size_t b = out.block();
        const auto& q = s.quadratic;
        const auto& w = deriv_wave_;
        // The 1/points normalization of the inverse transform rides along.
        const double norm = 1.0 / static_cast<double>(points());
        std::size_t p = 0;
        // The symbol is accumulated one axis at a time; the innermost loop
        // only adds the terms involving m_3.
        for (int i0 = 0; i0 < N; ++i0) {
            const double m0 = w[i0];
            const cd s0 = s.constant + s.linear[0] * m0 + q[0][0] * (m0 * m0);
            for (int i1 = 0; i1 < N; ++i1) {
                const double m1 = w[i1];
                const cd s1 = s0 + (s.linear[1] + (q[0][1] + q[1][0]) * m0) * m1 + q[1][1] * (m1 * m1);
                for (int i2 = 0; i2 < N; ++i2) {
                    const double m2 = w[i2];
                    const cd s2 = s1 + (s.linear[2] + (q[0][2] + q[2][0]) * m0 + (q[1][2] + q[2][1]) * m1) * m2 +
                                  q[2][2] * (m2 * m2);
                    const cd a3 = s.linear[3] + (q[0][3] + q[3][0]) * m0 + (q[1][3] + q[3][1]) * m1 +
                                  (q[2][3] + q[3][2]) * m2;
                    for (int i3 = 0; i3 < N; ++i3, ++p) {
                        const double m3 = w[i3];
                        cd v = s2 + a3 * m3 + q[3][3] * (m3 * m3);
                        if (reciprocal) v = 1.0 / v;
                        v *= norm;
                        cd* d = out.at(p);
                        for (std::size_t c = 0; c < b; ++c) d[c] *= v;
                    }
                }
            }
        }
        return backward(std::move(out), false);
    }

    MatrixField apply_to(const MatrixField& f, const Symbol& s) const { return apply(forward(f), s); }

    /// d_j f, j in {1, 2}.
    MatrixField deriv_holo(const MatrixField& f, int j) const { return apply_to(f, Symbol::holo(j)); }
    /// d_kbar f, k in {1, 2}.
    MatrixField deriv_anti(const MatrixField& f, int k) const { return apply_to(f, Symbol::anti(k)); }

    /// Delta = 2 g^{j kbar} d_j d_kbar; non-positive spectrum.
    Symbol laplacian_symbol() const {
        const Eigen::Matrix2cd gi = geom_.g_inv();
        Symbol s;
        for (int j = 1; j <= 2; ++j)
            for (int k = 1; k <= 2; ++k)
                s += (2.0 * gi(j - 1, k - 1)) * Symbol::compose(Symbol::holo(j), Symbol::anti(k));
        return s;
    }
    MatrixField laplacian(const MatrixField& f) const { return apply_to(f, laplacian_symbol()); }

    /// Eigenvalue of Delta on exp(2 pi i m.x).
    double laplacian_eigenvalue(const std::array<int, 4>& m) const {
        std::array<double, 4> md{};
        for (int a = 0; a < 4; ++a) md[a] = m[a];
        return laplacian_symbol()(md).real();
    }

    /// int f dx_1 dy_1 dx_2 dy_2 for a scalar top-form coefficient.
    cd integrate_top(const ScalarField& f) const {
        if (f.rank() != 1) throw ShapeError("integrate_top expects a scalar field");
        check(f);
        cd s{0.0};
        for (cd v : f.values()) s += v;
        return s / static_cast<double>(points());
    }

    /// Entrywise integral of a matrix field, returned as an r x r matrix.
    Eigen::MatrixXcd integrate_matrix(const MatrixField& f) const {
        check(f);
        const int r = f.rank();
        Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(r, r);
        for (std::size_t p = 0; p < f.points(); ++p)
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < r; ++j) out(i, j) += f(p, i, j);
        return out / static_cast<double>(points());
    }

    /// sqrt(int |f|_F^2 omega^2/2).
    double l2_norm(const MatrixField& f) const {
        return std::sqrt(integrate_top(frobenius_sq(f)).real() * geom_.det_g());
    }

    /// Evaluates fn(x) on the lattice into a scalar field.
    template <class Fn>
    ScalarField sample(Fn&& fn) const {
        ScalarField f(points(), 1);
        for (std::size_t p = 0; p < points(); ++p) f.data()[p] = fn(coordinates(p));
        return f;
    }

private:
    void check(const MatrixField& f) const {
        if (f.points() != points())
            throw ShapeError("field has " + std::to_string(f.points()) + " points, grid has " +
                             std::to_string(points()));
    }

    MatrixField backward(MatrixField fhat, bool normalize) const {
        check(fhat);
        if (dealias_) truncate(fhat);
        plans_->execute(fhat.data(), static_cast<int>(fhat.block()), FFTW_BACKWARD);
        if (normalize) fhat *= cd{1.0 / static_cast<double>(points())};
        return fhat;
    }

    // 2/3-rule truncation of a spectrum.
    void truncate(MatrixField& fhat) const {
        const int N = geom_.N;
        const double cut = static_cast<double>(N) / 3.0;
        const std::size_t b = fhat.block();
        std::size_t p = 0;
        for (int i0 = 0; i0 < N; ++i0)
            for (int i1 = 0; i1 < N; ++i1)
                for (int i2 = 0; i2 < N; ++i2)
                    for (int i3 = 0; i3 < N; ++i3, ++p) {
                        if (std::abs(wave_[i0]) > cut || std::abs(wave_[i1]) > cut ||
                            std::abs(wave_[i2]) > cut || std::abs(wave_[i3]) > cut) {
                            cd* q = fhat.at(p);
                            for (std::size_t c = 0; c < b; ++c) q[c] = 0.0;
                        }
                    }
    }

    TorusGeometry geom_;
    bool dealias_ = false;
    std::shared_ptr<detail::FftPlans> plans_;
    std::vector<int> wave_;
    std::vector<double> deriv_wave_;
};

}  // namespace ahe
