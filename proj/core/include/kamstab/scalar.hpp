#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <complex>
#include <string>

namespace kamstab {

using cplx = std::complex<double>;
using Rational = boost::multiprecision::cpp_rational;

/// Exact Gaussian rational re + i*im.
struct GaussRational {
    Rational re{0};
    Rational im{0};

    GaussRational() = default;
    GaussRational(Rational r, Rational i = 0) : re(std::move(r)), im(std::move(i)) {}
    explicit GaussRational(long v) : re(v), im(0) {}

    GaussRational& operator+=(const GaussRational& o) {
        re += o.re;
        im += o.im;
        return *this;
    }
    GaussRational& operator-=(const GaussRational& o) {
        re -= o.re;
        im -= o.im;
        return *this;
    }
    friend GaussRational operator+(GaussRational a, const GaussRational& b) { return a += b; }
    friend GaussRational operator-(GaussRational a, const GaussRational& b) { return a -= b; }
    friend GaussRational operator-(const GaussRational& a) { return {-a.re, -a.im}; }
    friend GaussRational operator*(const GaussRational& a, const GaussRational& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend GaussRational operator*(const GaussRational& a, long v) { return {a.re * v, a.im * v}; }
    friend GaussRational operator/(const GaussRational& a, long v) { return {a.re / v, a.im / v}; }
    bool operator==(const GaussRational& o) const { return re == o.re && im == o.im; }
};

/// Uniform arithmetic over the two coefficient fields used by the polynomial template.
template <class S>
struct ScalarTraits;

template <>
struct ScalarTraits<cplx> {
    static cplx zero() { return {0.0, 0.0}; }
    static cplx from_int(long v) { return {static_cast<double>(v), 0.0}; }
    static cplx times_i(const cplx& v) { return {-v.imag(), v.real()}; }
    static cplx scale(const cplx& v, long f) { return v * static_cast<double>(f); }
    static cplx div_int(const cplx& v, long f) { return v / static_cast<double>(f); }
    static double magnitude(const cplx& v) { return std::abs(v); }
    /// Stored coefficients below this magnitude are pruned.
    static bool negligible(const cplx& v) { return std::abs(v.real()) < 1e-300 && std::abs(v.imag()) < 1e-300; }
    static cplx conj(const cplx& v) { return std::conj(v); }
};

template <>
struct ScalarTraits<GaussRational> {
    static GaussRational zero() { return {}; }
    static GaussRational from_int(long v) { return GaussRational(v); }
    static GaussRational times_i(const GaussRational& v) { return {-v.im, v.re}; }
    static GaussRational scale(const GaussRational& v, long f) { return v * f; }
    static GaussRational div_int(const GaussRational& v, long f) { return v / f; }
    static double magnitude(const GaussRational& v) {
        return std::hypot(static_cast<double>(v.re), static_cast<double>(v.im));
    }
    static bool negligible(const GaussRational& v) { return v.re == 0 && v.im == 0; }
    static GaussRational conj(const GaussRational& v) { return {v.re, -v.im}; }
};

}  // namespace kamstab
