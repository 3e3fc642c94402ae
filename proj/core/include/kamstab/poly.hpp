#pragma once

#include "kamstab/multi_index.hpp"
#include "kamstab/scalar.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kamstab {

/// Sparse Fourier-Taylor polynomial with first-order parameter jets.
///
/// Terms are kept sorted by MultiIndex order with no negligible entries.
/// jets() holds trunc().m derivatives per term, row-major.
template <class S>
class BasicPoly {
public:
    using Traits = ScalarTraits<S>;

    BasicPoly() = default;
    explicit BasicPoly(const TruncationSpec& t) : tr_(t) {}

    const TruncationSpec& trunc() const { return tr_; }
    int m() const { return tr_.m; }
    std::size_t size() const { return keys_.size(); }
    bool empty() const { return keys_.empty(); }

    const MultiIndex& key(std::size_t i) const { return keys_[i]; }
    const S& val(std::size_t i) const { return vals_[i]; }
    const S* jet(std::size_t i) const { return tr_.m ? &jets_[i * tr_.m] : nullptr; }
    const std::vector<MultiIndex>& keys() const { return keys_; }
    const std::vector<S>& vals() const { return vals_; }

    /// Sum of |dropped coefficients| over the operations that produced this value.
    double truncation_mass() const { return tmass_; }
    void set_truncation_mass(double v) { tmass_ = v; }

    /// Optional reality flag: coefficient(k,a,b,c) = conj coefficient(-k,a,c,b).
    bool real_flag() const { return real_; }
    void set_real_flag(bool r) { real_ = r; }

    /// Index of a key, or size() if absent.
    std::size_t find(const MultiIndex& k) const {
        auto it = std::lower_bound(keys_.begin(), keys_.end(), k);
        if (it != keys_.end() && *it == k) return static_cast<std::size_t>(it - keys_.begin());
        return keys_.size();
    }
    S coeff(const MultiIndex& k) const {
        std::size_t i = find(k);
        return i == size() ? Traits::zero() : vals_[i];
    }

    /// Sum of |coefficient| over all terms.
    double l1() const {
        double s = 0;
        for (const auto& v : vals_) s += Traits::magnitude(v);
        return s;
    }
    double max_abs() const {
        double s = 0;
        for (const auto& v : vals_) s = std::max(s, Traits::magnitude(v));
        return s;
    }

    /// Largest |c(k,a,b,c) - conj c(-k,a,c,b)|; zero for a real Hamiltonian.
    double reality_defect() const {
        double d = 0;
        for (std::size_t i = 0; i < size(); ++i) {
            S partner = coeff(keys_[i].conjugate());
            d = std::max(d, Traits::magnitude(vals_[i] - Traits::conj(partner)));
        }
        return d;
    }

    template <class Pred>
    BasicPoly filter(Pred&& keep) const {
        BasicPoly r(tr_);
        r.real_ = real_;
        for (std::size_t i = 0; i < size(); ++i) {
            if (!keep(keys_[i])) continue;
            r.keys_.push_back(keys_[i]);
            r.vals_.push_back(vals_[i]);
            for (int d = 0; d < tr_.m; ++d) r.jets_.push_back(jets_[i * tr_.m + d]);
        }
        return r;
    }

    /// Same terms under a different truncation; out-of-range terms are dropped into the mass.
    BasicPoly retruncate(const TruncationSpec& t) const;

    bool operator==(const BasicPoly& o) const {
        return tr_ == o.tr_ && keys_ == o.keys_ && vals_ == o.vals_ && jets_ == o.jets_;
    }

private:
    template <class>
    friend class PolyAccumulator;

    TruncationSpec tr_{};
    std::vector<MultiIndex> keys_;
    std::vector<S> vals_;
    std::vector<S> jets_;
    double tmass_ = 0;
    bool real_ = false;
};

/// Hash-keyed accumulator; finish() yields a sorted, pruned polynomial.
template <class S>
class PolyAccumulator {
public:
    using Traits = ScalarTraits<S>;

    explicit PolyAccumulator(const TruncationSpec& t) : tr_(t) {}

    const TruncationSpec& trunc() const { return tr_; }

    /// Adds v (and jet, when non-null) to the coefficient of key; drops if outside truncation.
    void add(const MultiIndex& key, const S& v, const S* jet) {
        if (!fits(key, tr_)) {
            tmass_ += Traits::magnitude(v);
            return;
        }
        auto [it, inserted] = slot_.try_emplace(key, keys_.size());
        const std::size_t i = it->second;
        if (inserted) {
            keys_.push_back(key);
            vals_.push_back(v);
            for (int d = 0; d < tr_.m; ++d) jets_.push_back(jet ? jet[d] : Traits::zero());
        } else {
            vals_[i] += v;
            if (jet)
                for (int d = 0; d < tr_.m; ++d) jets_[i * tr_.m + d] += jet[d];
        }
    }

    void add_mass(double v) { tmass_ += v; }

    void add_poly(const BasicPoly<S>& p) {
        for (std::size_t i = 0; i < p.size(); ++i) add(p.key(i), p.val(i), p.jet(i));
        tmass_ += p.truncation_mass();
    }
    void add_scaled(const BasicPoly<S>& p, const S& f) {
        std::vector<S> buf(tr_.m);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const S* j = p.jet(i);
            if (j)
                for (int d = 0; d < tr_.m; ++d) buf[d] = j[d] * f;
            add(p.key(i), p.val(i) * f, j ? buf.data() : nullptr);
        }
        tmass_ += p.truncation_mass() * Traits::magnitude(f);
    }

    BasicPoly<S> finish() {
        std::vector<std::size_t> order(keys_.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys_[a] < keys_[b]; });
        BasicPoly<S> r(tr_);
        r.tmass_ = tmass_;
        const int m = tr_.m;
        for (std::size_t i : order) {
            bool keep = !Traits::negligible(vals_[i]);
            for (int d = 0; d < m && !keep; ++d) keep = !Traits::negligible(jets_[i * m + d]);
            if (!keep) continue;
            r.keys_.push_back(keys_[i]);
            r.vals_.push_back(vals_[i]);
            for (int d = 0; d < m; ++d) r.jets_.push_back(jets_[i * m + d]);
        }
        slot_.clear();
        keys_.clear();
        vals_.clear();
        jets_.clear();
        tmass_ = 0;
        return r;
    }

private:
    TruncationSpec tr_;
    std::unordered_map<MultiIndex, std::size_t, MultiIndexHash> slot_;
    std::vector<MultiIndex> keys_;
    std::vector<S> vals_;
    std::vector<S> jets_;
    double tmass_ = 0;
};

template <class S>
BasicPoly<S> BasicPoly<S>::retruncate(const TruncationSpec& t) const {
    if (t.n != tr_.n || t.J != tr_.J || t.m != tr_.m)
        throw std::invalid_argument("retruncate: incompatible dimensions");
    PolyAccumulator<S> acc(t);
    acc.add_poly(*this);
    auto r = acc.finish();
    r.set_real_flag(real_);
    return r;
}

/// Bracket variants used by mutation tests; Standard is the only Poisson bracket.
enum class BracketVariant { Standard, FlippedAngleTerm };

namespace detail {

inline void check_compatible(const TruncationSpec& a, const TruncationSpec& b) {
    if (a.n != b.n || a.J != b.J || a.m != b.m)
        throw std::invalid_argument("incompatible truncation specs: " + a.describe() + " vs " + b.describe());
}

inline MultiIndex add_keys(const MultiIndex& a, const MultiIndex& b) {
    MultiIndex r(a.n(), a.J());
    for (int s = 0; s < a.size(); ++s) r.set_raw(s, a.raw(s) + b.raw(s));
    return r;
}

struct TermMasks {
    std::uint32_t k = 0, a = 0, b = 0, c = 0;
};

inline TermMasks masks_of(const MultiIndex& t) {
    TermMasks m;
    for (int i = 0; i < t.n(); ++i) {
        if (t.k(i)) m.k |= 1u << i;
        if (t.a(i)) m.a |= 1u << i;
    }
    for (int j = 0; j < t.J(); ++j) {
        if (t.b(j)) m.b |= 1u << j;
        if (t.c(j)) m.c |= 1u << j;
    }
    return m;
}

template <class S>
void product_jet(const S& u, const S* ju, const S& v, const S* jv, int m, std::vector<S>& out) {
    out.assign(m, ScalarTraits<S>::zero());
    for (int d = 0; d < m; ++d) {
        if (ju) out[d] += ju[d] * v;
        if (jv) out[d] += u * jv[d];
    }
}

}  // namespace detail

template <class S>
BasicPoly<S> poly_add(const BasicPoly<S>& u, const BasicPoly<S>& v, const TruncationSpec& t) {
    detail::check_compatible(u.trunc(), v.trunc());
    PolyAccumulator<S> acc(t);
    acc.add_poly(u);
    acc.add_poly(v);
    auto r = acc.finish();
    r.set_real_flag(u.real_flag() && v.real_flag());
    return r;
}
template <class S>
BasicPoly<S> poly_add(const BasicPoly<S>& u, const BasicPoly<S>& v) {
    return poly_add(u, v, u.trunc());
}

template <class S>
BasicPoly<S> poly_scale(const BasicPoly<S>& u, const S& f) {
    PolyAccumulator<S> acc(u.trunc());
    acc.add_scaled(u, f);
    return acc.finish();
}

template <class S>
BasicPoly<S> poly_sub(const BasicPoly<S>& u, const BasicPoly<S>& v) {
    detail::check_compatible(u.trunc(), v.trunc());
    PolyAccumulator<S> acc(u.trunc());
    acc.add_poly(u);
    acc.add_scaled(v, ScalarTraits<S>::from_int(-1));
    auto r = acc.finish();
    r.set_truncation_mass(u.truncation_mass() + v.truncation_mass());
    return r;
}

template <class S>
BasicPoly<S> poly_mul(const BasicPoly<S>& u, const BasicPoly<S>& v, const TruncationSpec& t) {
    detail::check_compatible(u.trunc(), v.trunc());
    detail::check_compatible(u.trunc(), t);
    PolyAccumulator<S> acc(t);
    std::vector<S> jet;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const int wu = u.key(i).weight();
        for (std::size_t j = 0; j < v.size(); ++j) {
            const S c = u.val(i) * v.val(j);
            if (wu + v.key(j).weight() > t.D) {
                acc.add_mass(ScalarTraits<S>::magnitude(c));
                continue;
            }
            detail::product_jet(u.val(i), u.jet(i), v.val(j), v.jet(j), t.m, jet);
            acc.add(detail::add_keys(u.key(i), v.key(j)), c, t.m ? jet.data() : nullptr);
        }
    }
    return acc.finish();
}

/// {U,V} = <U_x,V_y> - <U_y,V_x> + i sum_j (U_{q_j} V_{qbar_j} - U_{qbar_j} V_{q_j}).
///
/// Pairs landing outside t are dropped and their magnitude added to the truncation mass.
template <class S>
BasicPoly<S> poisson_bracket(const BasicPoly<S>& U, const BasicPoly<S>& V, const TruncationSpec& t,
                             BracketVariant variant = BracketVariant::Standard) {
    using Tr = ScalarTraits<S>;
    detail::check_compatible(U.trunc(), V.trunc());
    detail::check_compatible(U.trunc(), t);
    PolyAccumulator<S> acc(t);
    const int n = t.n, J = t.J, m = t.m;
    const int flip = variant == BracketVariant::FlippedAngleTerm ? -1 : 1;

    std::vector<detail::TermMasks> mv(V.size());
    std::vector<int> wv(V.size());
    for (std::size_t j = 0; j < V.size(); ++j) {
        mv[j] = detail::masks_of(V.key(j));
        wv[j] = V.key(j).weight();
    }
    std::vector<S> jet, jet_scaled(m);
    for (std::size_t i = 0; i < U.size(); ++i) {
        const MultiIndex& a = U.key(i);
        const auto ma = detail::masks_of(a);
        const int wa = a.weight();
        for (std::size_t j = 0; j < V.size(); ++j) {
            const auto& mb = mv[j];
            const std::uint32_t xy = (ma.k & mb.a) | (ma.a & mb.k);
            const std::uint32_t zz = (ma.b & mb.c) | (ma.c & mb.b);
            if (!(xy | zz)) continue;
            const MultiIndex& b = V.key(j);
            const S base = Tr::times_i(U.val(i) * V.val(j));
            const bool inside = wa + wv[j] - 2 <= t.D && detail::add_keys(a, b).k_abs() <= t.K;
            if (!inside) {
                double tot = 0;
                for (int s = 0; s < n; ++s)
                    tot += std::abs(a.k(s) * b.a(s) - flip * a.a(s) * b.k(s));
                for (int s = 0; s < J; ++s) tot += std::abs(a.b(s) * b.c(s) - a.c(s) * b.b(s));
                acc.add_mass(Tr::magnitude(base) * tot);
                continue;
            }
            if (m) {
                detail::product_jet(U.val(i), U.jet(i), V.val(j), V.jet(j), m, jet);
                for (auto& x : jet) x = Tr::times_i(x);
            }
            const MultiIndex sum = detail::add_keys(a, b);
            for (int s = 0; s < n; ++s) {
                if (!((xy >> s) & 1u)) continue;
                const int f = a.k(s) * b.a(s) - flip * a.a(s) * b.k(s);
                if (!f) continue;
                MultiIndex key = sum;
                key.set_a(s, key.a(s) - 1);
                if (m)
                    for (int d = 0; d < m; ++d) jet_scaled[d] = Tr::scale(jet[d], f);
                acc.add(key, Tr::scale(base, f), m ? jet_scaled.data() : nullptr);
            }
            for (int s = 0; s < J; ++s) {
                if (!((zz >> s) & 1u)) continue;
                const int f = a.b(s) * b.c(s) - a.c(s) * b.b(s);
                if (!f) continue;
                MultiIndex key = sum;
                key.set_b(s, key.b(s) - 1);
                key.set_c(s, key.c(s) - 1);
                if (m)
                    for (int d = 0; d < m; ++d) jet_scaled[d] = Tr::scale(jet[d], f);
                acc.add(key, Tr::scale(base, f), m ? jet_scaled.data() : nullptr);
            }
        }
    }
    auto r = acc.finish();
    r.set_truncation_mass(r.truncation_mass() + U.truncation_mass() + V.truncation_mass());
    r.set_real_flag(U.real_flag() && V.real_flag());
    return r;
}

/// Which partial derivative to take.
enum class Var { X, Y, Q, QBar };

template <class S>
BasicPoly<S> derivative(const BasicPoly<S>& W, Var var, int idx) {
    using Tr = ScalarTraits<S>;
    const auto& t = W.trunc();
    PolyAccumulator<S> acc(t);
    std::vector<S> jet(t.m);
    for (std::size_t i = 0; i < W.size(); ++i) {
        MultiIndex key = W.key(i);
        int f = 0;
        bool times_i = false;
        switch (var) {
            case Var::X: f = key.k(idx); times_i = true; break;
            case Var::Y: f = key.a(idx); if (f) key.set_a(idx, f - 1); break;
            case Var::Q: f = key.b(idx); if (f) key.set_b(idx, f - 1); break;
            case Var::QBar: f = key.c(idx); if (f) key.set_c(idx, f - 1); break;
        }
        if (!f) continue;
        auto op = [&](const S& v) { S r = Tr::scale(v, f); return times_i ? Tr::times_i(r) : r; };
        const S* j = W.jet(i);
        for (int d = 0; d < t.m; ++d) jet[d] = op(j[d]);
        acc.add(key, op(W.val(i)), t.m ? jet.data() : nullptr);
    }
    return acc.finish();
}

template <class S>
struct LieSeriesResult {
    BasicPoly<S> value;
    std::vector<double> order_norms;  ///< l1 norm of (1/j!) ad_F^j H for j = 0, 1, ...
    bool diverging = false;
    double truncation_mass = 0;
};

/// H o X_F^1 = sum_j (1/j!) ad_F^j H with ad_F H = {H,F}, stopped after max_order
/// brackets, at the first empty bracket, or once a term's l1 norm is <= rel_tol * |H|_1.
template <class S>
LieSeriesResult<S> lie_series(const BasicPoly<S>& H, const BasicPoly<S>& F, const TruncationSpec& t,
                              int max_order, double rel_tol = 0) {
    LieSeriesResult<S> out;
    PolyAccumulator<S> acc(t);
    acc.add_poly(H);
    out.order_norms.push_back(H.l1());
    BasicPoly<S> term = H;
    int rising = 0;
    for (int j = 1; j <= max_order; ++j) {
        term = poisson_bracket(term, F, t);
        out.truncation_mass += term.truncation_mass();
        term.set_truncation_mass(0);
        if (term.empty()) break;
        term = poly_scale(term, ScalarTraits<S>::div_int(ScalarTraits<S>::from_int(1), j));
        acc.add_poly(term);
        const double nrm = term.l1();
        rising = nrm > out.order_norms.back() ? rising + 1 : 0;
        out.order_norms.push_back(nrm);
        if (j == max_order && rising >= 3) out.diverging = true;
        if (nrm <= rel_tol * out.order_norms.front()) break;
    }
    out.value = acc.finish();
    out.value.set_truncation_mass(out.truncation_mass + H.truncation_mass());
    out.value.set_real_flag(H.real_flag() && F.real_flag());
    return out;
}

}  // namespace kamstab
