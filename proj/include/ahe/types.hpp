// types.hpp - shared scalar types, aligned storage and error classes
#pragma once

#include <complex>
#include <cstddef>
#include <new>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ahe {

using cd = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cd I_unit{0.0, 1.0};

namespace detail {

// Field temporaries are large and short-lived; recycling freed blocks per
// thread avoids an mmap/munmap round trip and fresh page faults for each.
class BlockCache {
public:
    static constexpr std::size_t min_bytes = std::size_t{1} << 16;
    static constexpr std::size_t max_cached_bytes = std::size_t{1} << 28;

    static BlockCache& local() {
        // Intentionally leaked so late frees during thread teardown stay valid.
        thread_local BlockCache* cache = new BlockCache;
        return *cache;
    }

    void* take(std::size_t bytes) {
        auto it = free_.find(bytes);
        if (it == free_.end() || it->second.empty()) return nullptr;
        void* p = it->second.back();
        it->second.pop_back();
        held_ -= bytes;
        return p;
    }

    bool give(void* p, std::size_t bytes) {
        if (held_ + bytes > max_cached_bytes) return false;
        free_[bytes].push_back(p);
        held_ += bytes;
        return true;
    }

private:
    std::unordered_map<std::size_t, std::vector<void*>> free_;
    std::size_t held_ = 0;
};

}  // namespace detail

// 64-byte aligned allocator so every field buffer can be handed to a
// single set of FFTW plans through fftw_execute_dft.
template <class T, std::size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;

    AlignedAllocator() noexcept = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept {}

    template <class U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };

    T* allocate(std::size_t n) {
        const std::size_t bytes = n * sizeof(T);
        if (bytes >= detail::BlockCache::min_bytes)
            if (void* p = detail::BlockCache::local().take(bytes)) return static_cast<T*>(p);
        return static_cast<T*>(::operator new(bytes, std::align_val_t{Align}));
    }
    void deallocate(T* p, std::size_t n) noexcept {
        const std::size_t bytes = n * sizeof(T);
        if (bytes >= detail::BlockCache::min_bytes) {
            try {
                if (detail::BlockCache::local().give(p, bytes)) return;
            } catch (...) {
            }
        }
        ::operator delete(p, std::align_val_t{Align});
    }

    template <class U>
    bool operator==(const AlignedAllocator<U, Align>&) const noexcept { return true; }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Raised when a metric loses positive definiteness. Carries the worst
/// grid point and its smallest eigenvalue.
class PositivityError : public std::runtime_error {
public:
    PositivityError(std::size_t point, double min_eigenvalue)
        : std::runtime_error("metric not positive definite at grid point " +
                             std::to_string(point) + " (smallest eigenvalue " +
                             std::to_string(min_eigenvalue) + ")"),
          point_(point), min_eigenvalue_(min_eigenvalue) {}

    std::size_t point() const noexcept { return point_; }
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    std::size_t point_;
    double min_eigenvalue_;
};

/// Field shapes or ranks that do not fit together.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Time integration failed: blow-up, non-finite values, stability bound.
class FlowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ahe
