#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace kamstab {

/// Cutoffs for a truncated Fourier-Taylor space.
struct TruncationSpec {
    int n = 0;   ///< tangent dimension
    int J = 0;   ///< retained normal modes
    int K = 0;   ///< max |k|
    int D = 0;   ///< max weight 2|a|+|b|+|c|
    int m = 0;   ///< number of parameters carried as jets

    bool operator==(const TruncationSpec&) const = default;
    void validate() const;
    std::string describe() const;
};

/// Exponents of one monomial e^{i<k,x>} y^a q^b qbar^c.
///
/// Packed as [k(n) | a(n) | b(J) | c(J)] in signed bytes, so 2n+2J <= kCapacity.
class MultiIndex {
public:
    static constexpr int kCapacity = 64;

    MultiIndex() { e_.fill(0); }
    MultiIndex(int n, int J) : n_(static_cast<std::uint8_t>(n)), J_(static_cast<std::uint8_t>(J)) {
        if (n < 0 || J < 0 || 2 * n + 2 * J > kCapacity)
            throw std::invalid_argument("MultiIndex: 2n+2J exceeds capacity");
        e_.fill(0);
    }

    int n() const { return n_; }
    int J() const { return J_; }

    int k(int i) const { return e_[i]; }
    int a(int i) const { return e_[n_ + i]; }
    int b(int j) const { return e_[2 * n_ + j]; }
    int c(int j) const { return e_[2 * n_ + J_ + j]; }

    void set_k(int i, int v) { e_[i] = narrow(v); }
    void set_a(int i, int v) { e_[n_ + i] = narrow(v); }
    void set_b(int j, int v) { e_[2 * n_ + j] = narrow(v); }
    void set_c(int j, int v) { e_[2 * n_ + J_ + j] = narrow(v); }

    /// Raw slot access in packed order.
    int raw(int s) const { return e_[s]; }
    void set_raw(int s, int v) { e_[s] = narrow(v); }
    int size() const { return 2 * n_ + 2 * J_; }

    int k_abs() const {
        int s = 0;
        for (int i = 0; i < n_; ++i) s += std::abs(e_[i]);
        return s;
    }
    int a_abs() const {
        int s = 0;
        for (int i = 0; i < n_; ++i) s += e_[n_ + i];
        return s;
    }
    int z_degree() const {
        int s = 0;
        for (int j = 2 * n_; j < 2 * n_ + 2 * J_; ++j) s += e_[j];
        return s;
    }
    int weight() const { return 2 * a_abs() + z_degree(); }

    /// k = 0 and b = c: the monomial depends on y and |q_j|^2 only.
    bool is_normal() const {
        for (int i = 0; i < n_; ++i)
            if (e_[i] != 0) return false;
        for (int j = 0; j < J_; ++j)
            if (b(j) != c(j)) return false;
        return true;
    }

    bool operator==(const MultiIndex& o) const {
        return n_ == o.n_ && J_ == o.J_ && std::memcmp(e_.data(), o.e_.data(), kCapacity) == 0;
    }
    bool operator!=(const MultiIndex& o) const { return !(*this == o); }
    /// Total order: weight first, then packed exponents.
    bool operator<(const MultiIndex& o) const {
        int wa = weight(), wb = o.weight();
        if (wa != wb) return wa < wb;
        return std::memcmp(e_.data(), o.e_.data(), kCapacity) < 0;
    }

    std::size_t hash() const {
        std::uint64_t h = 1469598103934665603ull;
        const int sz = size();
        for (int i = 0; i < sz; ++i) {
            h ^= static_cast<std::uint8_t>(e_[i]);
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }

    /// Index with k -> -k and b <-> c (the conjugate monomial).
    MultiIndex conjugate() const {
        MultiIndex r(n_, J_);
        for (int i = 0; i < n_; ++i) {
            r.set_k(i, -k(i));
            r.set_a(i, a(i));
        }
        for (int j = 0; j < J_; ++j) {
            r.set_b(j, c(j));
            r.set_c(j, b(j));
        }
        return r;
    }

    std::string str() const;

private:
    static std::int8_t narrow(int v) {
        if (v < -127 || v > 127) throw std::overflow_error("MultiIndex: exponent out of range");
        return static_cast<std::int8_t>(v);
    }

    std::array<std::int8_t, kCapacity> e_;
    std::uint8_t n_ = 0;
    std::uint8_t J_ = 0;
};

struct MultiIndexHash {
    std::size_t operator()(const MultiIndex& m) const { return m.hash(); }
};

inline bool fits(const MultiIndex& m, const TruncationSpec& t) {
    return m.k_abs() <= t.K && m.weight() <= t.D;
}

}  // namespace kamstab
