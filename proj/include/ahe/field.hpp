// field.hpp - matrix-valued fields on the N^4 lattice and pointwise helpers
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>

#include <Eigen/Core>

#include "ahe/types.hpp"

namespace ahe {

/// An r x r complex matrix per lattice point, point-major, matrices
/// row-major within a point. Rank 1 doubles as a scalar field.
class MatrixField {
public:
    MatrixField() = default;
    MatrixField(std::size_t points, int rank, cd fill = cd{0.0})
        : points_(points), rank_(rank),
          data_(points * static_cast<std::size_t>(rank) * static_cast<std::size_t>(rank), fill) {
        if (rank < 1) throw ShapeError("MatrixField rank must be >= 1");
    }

    /// scale * identity at every point.
    static MatrixField identity(std::size_t points, int rank, cd scale = cd{1.0}) {
        MatrixField f(points, rank);
        const auto r = static_cast<std::size_t>(rank);
        for (std::size_t p = 0; p < points; ++p)
            for (std::size_t i = 0; i < r; ++i) f.data_[p * r * r + i * r + i] = scale;
        return f;
    }

    int rank() const noexcept { return rank_; }
    std::size_t points() const noexcept { return points_; }
    std::size_t block() const noexcept { return static_cast<std::size_t>(rank_) * rank_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    cd* data() noexcept { return data_.data(); }
    const cd* data() const noexcept { return data_.data(); }
    std::span<cd> values() noexcept { return {data_.data(), data_.size()}; }
    std::span<const cd> values() const noexcept { return {data_.data(), data_.size()}; }

    cd* at(std::size_t p) noexcept { return data_.data() + p * block(); }
    const cd* at(std::size_t p) const noexcept { return data_.data() + p * block(); }

    cd& operator()(std::size_t p, int i, int j) noexcept {
        return data_[p * block() + static_cast<std::size_t>(i) * rank_ + j];
    }
    cd operator()(std::size_t p, int i, int j) const noexcept {
        return data_[p * block() + static_cast<std::size_t>(i) * rank_ + j];
    }

    MatrixField& operator+=(const MatrixField& o) {
        check_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    MatrixField& operator-=(const MatrixField& o) {
        check_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    MatrixField& operator*=(cd s) noexcept {
        if (s.imag() == 0.0) {
            // Real factors scale the interleaved doubles directly.
            double* d = reinterpret_cast<double*>(data_.data());
            const double a = s.real();
            for (std::size_t i = 0; i < 2 * data_.size(); ++i) d[i] *= a;
        } else {
            for (auto& v : data_) v *= s;
        }
        return *this;
    }
    /// this += s * o
    MatrixField& axpy(cd s, const MatrixField& o) {
        check_same(o);
        if (s.imag() == 0.0) {
            double* d = reinterpret_cast<double*>(data_.data());
            const double* e = reinterpret_cast<const double*>(o.data_.data());
            const double a = s.real();
            for (std::size_t i = 0; i < 2 * data_.size(); ++i) d[i] += a * e[i];
        } else {
            for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
        }
        return *this;
    }
    /// Adds s * identity at every point.
    MatrixField& add_identity(cd s) noexcept {
        const auto r = static_cast<std::size_t>(rank_);
        for (std::size_t p = 0; p < points_; ++p)
            for (std::size_t i = 0; i < r; ++i) data_[p * r * r + i * r + i] += s;
        return *this;
    }

    friend MatrixField operator+(MatrixField a, const MatrixField& b) { return a += b; }
    friend MatrixField operator-(MatrixField a, const MatrixField& b) { return a -= b; }
    friend MatrixField operator*(cd s, MatrixField a) { return a *= s; }
    friend MatrixField operator*(MatrixField a, cd s) { return a *= s; }

    void check_same(const MatrixField& o) const {
        if (o.points_ != points_ || o.rank_ != rank_)
            throw ShapeError("field shape mismatch: rank " + std::to_string(rank_) + " vs " +
                             std::to_string(o.rank_) + ", points " + std::to_string(points_) +
                             " vs " + std::to_string(o.points_));
    }

private:
    std::size_t points_ = 0;
    int rank_ = 1;
    AlignedVector<cd> data_;
};

using ScalarField = MatrixField;

template <int R>
using Mat = Eigen::Matrix<cd, R, R, (R == 1 ? Eigen::ColMajor : Eigen::RowMajor)>;

template <int R>
Eigen::Map<Mat<R>> mat(cd* p, int r) {
    if constexpr (R == Eigen::Dynamic) return Eigen::Map<Mat<R>>(p, r, r);
    else return Eigen::Map<Mat<R>>(p);
}
template <int R>
Eigen::Map<const Mat<R>> mat(const cd* p, int r) {
    if constexpr (R == Eigen::Dynamic) return Eigen::Map<const Mat<R>>(p, r, r);
    else return Eigen::Map<const Mat<R>>(p);
}

/// Calls fn.template operator()<R>() with R the compile-time rank for
/// r in 1..4, Eigen::Dynamic otherwise.
template <class Fn>
decltype(auto) dispatch_rank(int r, Fn&& fn) {
    switch (r) {
        case 1: return fn.template operator()<1>();
        case 2: return fn.template operator()<2>();
        case 3: return fn.template operator()<3>();
        case 4: return fn.template operator()<4>();
        default: return fn.template operator()<Eigen::Dynamic>();
    }
}

/// Pointwise product A(x) B(x).
inline MatrixField pointwise_product(const MatrixField& a, const MatrixField& b) {
    a.check_same(b);
    MatrixField out(a.points(), a.rank());
    dispatch_rank(a.rank(), [&]<int R>() {
        const int r = a.rank();
        for (std::size_t p = 0; p < a.points(); ++p)
            mat<R>(out.at(p), r).noalias() = mat<R>(a.at(p), r) * mat<R>(b.at(p), r);
    });
    return out;
}

/// Pointwise s(x) * A(x) for a scalar field s.
inline MatrixField scale_by(const ScalarField& s, const MatrixField& a) {
    if (s.rank() != 1 || s.points() != a.points()) throw ShapeError("scale_by: shape mismatch");
    MatrixField out = a;
    const std::size_t b = a.block();
    for (std::size_t p = 0; p < a.points(); ++p) {
        const cd v = s.data()[p];
        cd* q = out.at(p);
        for (std::size_t i = 0; i < b; ++i) q[i] *= v;
    }
    return out;
}

/// Pointwise trace, as a scalar field.
inline ScalarField trace(const MatrixField& a) {
    ScalarField out(a.points(), 1);
    const int r = a.rank();
    for (std::size_t p = 0; p < a.points(); ++p) {
        cd s{0.0};
        for (int i = 0; i < r; ++i) s += a(p, i, i);
        out.data()[p] = s;
    }
    return out;
}

/// Pointwise tr(A B) without forming the product.
inline ScalarField trace_product(const MatrixField& a, const MatrixField& b) {
    a.check_same(b);
    ScalarField out(a.points(), 1);
    const int r = a.rank();
    const cd *pa = a.data(), *pb = b.data();
    cd* o = out.data();
    if (r == 1) {
        for (std::size_t p = 0; p < a.points(); ++p) o[p] = pa[p] * pb[p];
        return out;
    }
    const std::size_t blk = a.block();
    for (std::size_t p = 0; p < a.points(); ++p, pa += blk, pb += blk) {
        cd s{0.0};
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) s += pa[i * r + j] * pb[j * r + i];
        o[p] = s;
    }
    return out;
}

/// Pointwise adjoint A(x)^dagger.
inline MatrixField adjoint(const MatrixField& a) {
    MatrixField out(a.points(), a.rank());
    const int r = a.rank();
    for (std::size_t p = 0; p < a.points(); ++p)
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) out(p, i, j) = std::conj(a(p, j, i));
    return out;
}

/// H <- (H + H^dagger) / 2 in place.
inline void hermitian_project(MatrixField& a) {
    const int r = a.rank();
    for (std::size_t p = 0; p < a.points(); ++p)
        for (int i = 0; i < r; ++i) {
            a(p, i, i) = cd{a(p, i, i).real(), 0.0};
            for (int j = i + 1; j < r; ++j) {
                const cd v = 0.5 * (a(p, i, j) + std::conj(a(p, j, i)));
                a(p, i, j) = v;
                a(p, j, i) = std::conj(v);
            }
        }
}

/// max_x |A(x) - A(x)^dagger|_max
inline double hermiticity_defect(const MatrixField& a) {
    double d = 0.0;
    const int r = a.rank();
    for (std::size_t p = 0; p < a.points(); ++p)
        for (int i = 0; i < r; ++i)
            for (int j = i; j < r; ++j) d = std::max(d, std::abs(a(p, i, j) - std::conj(a(p, j, i))));
    return d;
}

/// Largest entry modulus over the whole field.
inline double max_abs(const MatrixField& a) {
    double m = 0.0;
    for (cd v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

/// max_x of the Frobenius norm of A(x).
inline double max_frobenius(const MatrixField& a) {
    double m = 0.0;
    const std::size_t b = a.block();
    for (std::size_t p = 0; p < a.points(); ++p) {
        double s = 0.0;
        const cd* q = a.at(p);
        for (std::size_t i = 0; i < b; ++i) s += std::norm(q[i]);
        m = std::max(m, s);
    }
    return std::sqrt(m);
}

/// Pointwise squared Frobenius norm, as a real-valued scalar field.
inline ScalarField frobenius_sq(const MatrixField& a) {
    ScalarField out(a.points(), 1);
    const std::size_t b = a.block();
    for (std::size_t p = 0; p < a.points(); ++p) {
        double s = 0.0;
        const cd* q = a.at(p);
        for (std::size_t i = 0; i < b; ++i) s += std::norm(q[i]);
        out.data()[p] = s;
    }
    return out;
}

inline bool all_finite(const MatrixField& a) {
    return std::all_of(a.values().begin(), a.values().end(),
                       [](cd v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
}

}  // namespace ahe
