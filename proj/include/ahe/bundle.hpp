// bundle.hpp - Hermitian metrics, Chern connection and curvature, the
// normalized contraction K, wedge algebra on (1,1)-forms, Chern-Weil
// integrands.
//
// Conventions. A matrix (1,1)-form is stored by its components on
// dz^j ^ dzbar^k, indexed (kbar, j) with k, j in {1, 2}. "omega-basis"
// forms carry the extra (i/2), i.e. alpha = (i/2) a_{kbar j} dz^j ^ dzbar^k,
// so omega itself is g and (i/2pi) F has omega-basis components F / pi.
// The Chern connection of H in a holomorphic frame is A_j = H^{-1} d_j H and
//     F_{kbar j} = beta g_{kbar j} I - d_kbar A_j.
// H F_{kbar j} is Hermitian under (k, j) -> (j, k).
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>

#include <Eigen/Dense>

#include "ahe/field.hpp"
#include "ahe/spectral_grid.hpp"
#include "ahe/types.hpp"

namespace ahe {

/// Bundle metric H (periodic, positive definite) plus the scalar background
/// curvature coefficient beta that carries c_1(E).
struct MetricField {
    MatrixField H;
    double beta = 0.0;

    int rank() const noexcept { return H.rank(); }

    static MetricField flat(std::size_t points, int rank, double beta = 0.0) {
        return {MatrixField::identity(points, rank), beta};
    }
};

/// Matrix-valued (1,1)-form: comp(k, j) is the (kbar, j) component.
struct Form11 {
    std::array<MatrixField, 4> c;

    Form11() = default;
    Form11(std::size_t points, int rank) {
        for (auto& f : c) f = MatrixField(points, rank);
    }

    MatrixField& operator()(int k, int j) { return c[idx(k, j)]; }
    const MatrixField& operator()(int k, int j) const { return c[idx(k, j)]; }

    int rank() const noexcept { return c[0].rank(); }
    std::size_t points() const noexcept { return c[0].points(); }

    Form11& operator+=(const Form11& o) {
        for (int i = 0; i < 4; ++i) c[i] += o.c[i];
        return *this;
    }
    Form11& operator*=(cd s) {
        for (auto& f : c) f *= s;
        return *this;
    }
    Form11& axpy(cd s, const Form11& o) {
        for (int i = 0; i < 4; ++i) c[i].axpy(s, o.c[i]);
        return *this;
    }
    friend Form11 operator*(cd s, Form11 f) { return f *= s; }
    friend Form11 operator+(Form11 a, const Form11& b) { return a += b; }

    static int idx(int k, int j) {
        if (k < 1 || k > 2 || j < 1 || j > 2) throw std::out_of_range("form index must be 1 or 2");
        return (k - 1) * 2 + (j - 1);
    }
};

/// omega (times the identity) in the omega basis.
inline Form11 omega_form(const TorusGeometry& geom, int rank) {
    Form11 w;
    for (int k = 1; k <= 2; ++k)
        for (int j = 1; j <= 2; ++j) w(k, j) = MatrixField::identity(geom.points(), rank, geom.g(k - 1, j - 1));
    return w;
}

struct PositivityReport {
    double min_eigenvalue = std::numeric_limits<double>::infinity();
    std::size_t point = 0;
};

/// Smallest eigenvalue of the Hermitian part of H over the lattice.
inline PositivityReport positivity(const MatrixField& H) {
    PositivityReport rep;
    dispatch_rank(H.rank(), [&]<int R>() {
        const int r = H.rank();
        Mat<R> herm(r, r);
        for (std::size_t p = 0; p < H.points(); ++p) {
            auto h = mat<R>(H.at(p), r);
            double lo;
            if constexpr (R == 1) {
                lo = h(0, 0).real();
            } else if constexpr (R == 2) {
                const double a = h(0, 0).real(), d = h(1, 1).real();
                const cd b = 0.5 * (h(0, 1) + std::conj(h(1, 0)));
                lo = 0.5 * (a + d) - std::hypot(0.5 * (a - d), std::abs(b));
            } else {
                herm = 0.5 * (h + h.adjoint());
                Eigen::SelfAdjointEigenSolver<Mat<R>> es(herm, Eigen::EigenvaluesOnly);
                lo = es.eigenvalues().minCoeff();
            }
            if (!(lo >= rep.min_eigenvalue)) {
                rep.min_eigenvalue = lo;
                rep.point = p;
            }
        }
    });
    return rep;
}

/// Throws PositivityError naming the worst point when H is not positive
/// definite (smallest eigenvalue <= margin).
inline void require_positive(const MatrixField& H, double margin = 0.0) {
    const auto rep = positivity(H);
    if (!(rep.min_eigenvalue > margin)) throw PositivityError(rep.point, rep.min_eigenvalue);
}

/// Pointwise inverse.
inline MatrixField pointwise_inverse(const MatrixField& H) {
    MatrixField out(H.points(), H.rank());
    dispatch_rank(H.rank(), [&]<int R>() {
        const int r = H.rank();
        for (std::size_t p = 0; p < H.points(); ++p) {
            if constexpr (R == Eigen::Dynamic) mat<R>(out.at(p), r) = mat<R>(H.at(p), r).partialPivLu().inverse();
            else mat<R>(out.at(p), r) = mat<R>(H.at(p), r).inverse();
        }
    });
    return out;
}

/// Pointwise log det H (principal branch of the complex log).
inline ScalarField log_det(const MatrixField& H) {
    ScalarField out(H.points(), 1);
    dispatch_rank(H.rank(), [&]<int R>() {
        const int r = H.rank();
        for (std::size_t p = 0; p < H.points(); ++p) {
            if constexpr (R == Eigen::Dynamic) out.data()[p] = std::log(mat<R>(H.at(p), r).partialPivLu().determinant());
            else if constexpr (R == 1) {
                // Real positive entries (the usual case) skip the complex log.
                const cd h = H.data()[p];
                out.data()[p] = h.imag() == 0.0 && h.real() > 0.0 ? cd{std::log(h.real())} : std::log(h);
            } else out.data()[p] = std::log(mat<R>(H.at(p), r).determinant());
        }
    });
    return out;
}

/// Chern connection A_j = H^{-1} d_j H of a metric.
struct Connection {
    MatrixField Hinv;
    std::array<MatrixField, 2> A;
};

inline Connection chern_connection(const SpectralGrid& grid, const MatrixField& H) {
    require_positive(H);
    Connection conn;
    conn.Hinv = pointwise_inverse(H);
    const MatrixField Hhat = grid.forward(H);
    for (int j = 1; j <= 2; ++j)
        conn.A[j - 1] = pointwise_product(conn.Hinv, grid.apply(Hhat, Symbol::holo(j)));
    return conn;
}

/// F_{kbar j} = beta g_{kbar j} I - d_kbar (H^{-1} d_j H).
inline Form11 curvature(const SpectralGrid& grid, const Connection& conn, double beta) {
    const auto& g = grid.geometry().g;
    Form11 F;
    for (int j = 1; j <= 2; ++j) {
        const MatrixField Ahat = grid.forward(conn.A[j - 1]);
        for (int k = 1; k <= 2; ++k) {
            MatrixField f = grid.apply(Ahat, Symbol::anti(k));
            f *= cd{-1.0};
            if (beta != 0.0) f.add_identity(beta * g(k - 1, j - 1));
            F(k, j) = std::move(f);
        }
    }
    return F;
}

/// Rank one: F_{kbar j} = beta g_{kbar j} - d_kbar d_j log H, from a single
/// forward transform of log H.
inline Form11 line_curvature(const SpectralGrid& grid, const ScalarField& H, double beta) {
    if (H.rank() != 1) throw ShapeError("line_curvature expects a rank-one metric");
    require_positive(H);
    const auto& g = grid.geometry().g;
    ScalarField logh(H.points(), 1);
    for (std::size_t p = 0; p < H.points(); ++p) logh.data()[p] = std::log(H.data()[p].real());
    const ScalarField lhat = grid.forward(std::move(logh));
    Form11 F;
    for (int k = 1; k <= 2; ++k)
        for (int j = 1; j <= 2; ++j) {
            F(k, j) = grid.apply(lhat, cd{-1.0} * Symbol::compose(Symbol::anti(k), Symbol::holo(j)));
            if (beta != 0.0) F(k, j).add_identity(beta * g(k - 1, j - 1));
        }
    return F;
}

inline Form11 curvature(const SpectralGrid& grid, const MetricField& m) {
    if (m.rank() == 1) return line_curvature(grid, m.H, m.beta);
    return curvature(grid, chern_connection(grid, m.H), m.beta);
}

/// omega-basis components of (i / 2 pi) F.
inline Form11 chern_form(const Form11& F) { return cd{1.0 / pi} * F; }

/// Literal g^{j kbar} F_{kbar j}, exposed for diagnostics only.
inline MatrixField raw_contract(const Form11& F, const TorusGeometry& geom) {
    const Eigen::Matrix2cd gi = geom.g_inv();
    MatrixField out(F.points(), F.rank());
    for (int j = 1; j <= 2; ++j)
        for (int k = 1; k <= 2; ++k) out.axpy(gi(j - 1, k - 1), F(k, j));
    return out;
}

/// Normalized contraction K(F) = 2 (i/2pi) F ^ omega / omega^2, i.e. the
/// omega-trace of the omega-basis form F / pi.
inline MatrixField lambda_contract(const Form11& F, const TorusGeometry& geom) {
    MatrixField K = raw_contract(F, geom);
    K *= cd{1.0 / pi};
    return K;
}

/// Top-degree coefficient of A ^ B (relative to dx_1 dy_1 dx_2 dy_2) for
/// omega-basis forms; every matrix product XY is replaced by (XY + YX)/2.
inline MatrixField wedge_top(const Form11& A, const Form11& B) {
    if (A.rank() != B.rank() || A.points() != B.points())
        throw ShapeError("wedge_top: rank mismatch " + std::to_string(A.rank()) + " vs " + std::to_string(B.rank()));
    MatrixField out(A.points(), A.rank());
    if (A.rank() == 1) {
        const cd *a11 = A(1, 1).data(), *a22 = A(2, 2).data(), *a12 = A(1, 2).data(), *a21 = A(2, 1).data();
        const cd *b11 = B(1, 1).data(), *b22 = B(2, 2).data(), *b12 = B(1, 2).data(), *b21 = B(2, 1).data();
        cd* o = out.data();
        for (std::size_t p = 0; p < A.points(); ++p)
            o[p] = a11[p] * b22[p] + a22[p] * b11[p] - a12[p] * b21[p] - a21[p] * b12[p];
        return out;
    }
    dispatch_rank(A.rank(), [&]<int R>() {
        const int r = A.rank();
        for (std::size_t p = 0; p < A.points(); ++p) {
            auto a11 = mat<R>(A(1, 1).at(p), r), a22 = mat<R>(A(2, 2).at(p), r);
            auto a12 = mat<R>(A(1, 2).at(p), r), a21 = mat<R>(A(2, 1).at(p), r);
            auto b11 = mat<R>(B(1, 1).at(p), r), b22 = mat<R>(B(2, 2).at(p), r);
            auto b12 = mat<R>(B(1, 2).at(p), r), b21 = mat<R>(B(2, 1).at(p), r);
            auto o = mat<R>(out.at(p), r);
            o.noalias() = 0.5 * (a11 * b22 + b22 * a11);
            o.noalias() += 0.5 * (a22 * b11 + b11 * a22);
            o.noalias() -= 0.5 * (a12 * b21 + b21 * a12);
            o.noalias() -= 0.5 * (a21 * b12 + b12 * a21);
        }
    });
    return out;
}

/// wedge_top(A, omega I) without materializing omega.
inline MatrixField wedge_omega(const Form11& A, const TorusGeometry& geom) {
    const auto& g = geom.g;
    MatrixField out = A(1, 1);
    out *= g(1, 1);
    out.axpy(g(0, 0), A(2, 2));
    out.axpy(-g(1, 0), A(1, 2));
    out.axpy(-g(0, 1), A(2, 1));
    return out;
}

/// Top-form partners of the Chern character: ch1 ^ omega and ch2, as
/// coefficients of dx_1 dy_1 dx_2 dy_2.
struct ChernIntegrands {
    ScalarField ch1_omega;
    ScalarField ch2;
};

/// From precomputed wedges of c = (i/2pi) F: c ^ omega and c ^ c.
inline ChernIntegrands chern_integrands(const MatrixField& c_omega, const MatrixField& c_c) {
    ChernIntegrands out;
    out.ch1_omega = trace(c_omega);
    out.ch2 = trace(c_c);
    out.ch2 *= cd{0.5};
    return out;
}

inline ChernIntegrands chern_integrands(const Form11& F, const TorusGeometry& geom) {
    const Form11 c = chern_form(F);
    return chern_integrands(wedge_omega(c, geom), wedge_top(c, c));
}

/// dbar d_H phi as a form, components on dz^j ^ dzbar^k:
///     X_{kbar j} = -d_kbar (d_j phi + [A_j, phi]).
/// The first variation of the curvature is F' = dbar d_H (H^{-1} H').
inline Form11 dbar_d_h(const SpectralGrid& grid, const Connection& conn, const MatrixField& phi) {
    Form11 X;
    const MatrixField phihat = grid.forward(phi);
    for (int j = 1; j <= 2; ++j) {
        MatrixField cov = grid.apply(phihat, Symbol::holo(j));
        if (phi.rank() > 1) {
            cov += pointwise_product(conn.A[j - 1], phi);
            cov -= pointwise_product(phi, conn.A[j - 1]);
        }
        const MatrixField covhat = grid.forward(cov);
        for (int k = 1; k <= 2; ++k) {
            X(k, j) = grid.apply(covhat, Symbol::anti(k));
            X(k, j) *= cd{-1.0};
        }
    }
    return X;
}

/// max over points and index pairs of |(H F_{kbar j})^dagger - H F_{jbar k}|.
inline double h_hermiticity_defect(const MatrixField& H, const Form11& F) {
    double d = 0.0;
    for (int k = 1; k <= 2; ++k)
        for (int j = 1; j <= 2; ++j) {
            const MatrixField a = adjoint(pointwise_product(H, F(k, j)));
            const MatrixField b = pointwise_product(H, F(j, k));
            d = std::max(d, max_abs(a - b));
        }
    return d;
}

/// max |(H X)^dagger - H X| for an endomorphism field X.
inline double h_hermiticity_defect(const MatrixField& H, const MatrixField& X) {
    const MatrixField hx = pointwise_product(H, X);
    return max_abs(hx - adjoint(hx));
}

/// Pointwise L exp(X) L^dagger for a Hermitian field X and constant-in-t
/// factor field L, together with phi = H^{-1} dH/dt given dX/dt.
struct ExpWithVelocity {
    MatrixField H;
    MatrixField phi;
};

inline ExpWithVelocity hermitian_exp(const MatrixField& L, const MatrixField& X, const MatrixField& Xdot) {
    X.check_same(Xdot);
    L.check_same(X);
    ExpWithVelocity out{MatrixField(X.points(), X.rank()), MatrixField(X.points(), X.rank())};
    dispatch_rank(X.rank(), [&]<int R>() {
        const int r = X.rank();
        using M = Mat<R>;
        using V = Eigen::Matrix<double, R, 1>;
        M herm(r, r), D(r, r), E(r, r), Linv(r, r);
        for (std::size_t p = 0; p < X.points(); ++p) {
            auto l = mat<R>(L.at(p), r);
            auto x = mat<R>(X.at(p), r);
            auto xd = mat<R>(Xdot.at(p), r);
            if constexpr (R == 1) {
                const cd e = std::exp(x(0, 0).real());
                out.H.data()[p] = l(0, 0) * e * std::conj(l(0, 0));
                out.phi.data()[p] = cd{xd(0, 0).real(), 0.0};
                continue;
            } else {
                herm = 0.5 * (x + x.adjoint());
                Eigen::SelfAdjointEigenSolver<M> es(herm);
                const M& U = es.eigenvectors();
                const V& lam = es.eigenvalues();
                // Daleckii-Krein: d exp(X) = U (Gamma o U^dag Xdot U) U^dag.
                D = U.adjoint() * (0.5 * (xd + xd.adjoint())) * U;
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < r; ++j) {
                        const double d = lam(i) - lam(j);
                        const double gamma = std::abs(d) < 1e-12 ? std::exp(0.5 * (lam(i) + lam(j)))
                                                                 : std::exp(lam(j)) * std::expm1(d) / d;
                        D(i, j) *= gamma;
                    }
                // exp(-X) d exp(X)
                E = U * (lam.array().exp().matrix().asDiagonal()) * U.adjoint();
                auto h = mat<R>(out.H.at(p), r);
                h.noalias() = l * E * l.adjoint();
                M expmx = U * ((-lam.array()).exp().matrix().asDiagonal()) * U.adjoint();
                M dexp = U * D * U.adjoint();
                // phi = H^{-1} H' = L^{-dag} exp(-X) dexp L^dag
                Linv = l.adjoint().inverse();
                mat<R>(out.phi.at(p), r).noalias() = Linv * (expmx * dexp) * l.adjoint();
            }
        }
    });
    return out;
}

/// Pointwise lower Cholesky factor L with H = L L^dagger.
inline MatrixField cholesky_factor(const MatrixField& H) {
    require_positive(H);
    MatrixField L(H.points(), H.rank());
    dispatch_rank(H.rank(), [&]<int R>() {
        const int r = H.rank();
        for (std::size_t p = 0; p < H.points(); ++p) {
            if constexpr (R == 1) {
                L.data()[p] = std::sqrt(H.data()[p].real());
            } else {
                Mat<R> h = mat<R>(H.at(p), r);
                Eigen::LLT<Mat<R>> llt(0.5 * (h + h.adjoint()));
                mat<R>(L.at(p), r) = llt.matrixL();
            }
        }
    });
    return L;
}

}  // namespace ahe
