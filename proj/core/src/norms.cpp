#include "kamstab/norms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace kamstab {

void DomainSpec::validate() const {
    if (!(s > 0)) throw std::invalid_argument("DomainSpec: s must be > 0");
    if (!(r > 0 && r <= 1)) throw std::invalid_argument("DomainSpec: r must lie in (0,1]");
    if (!(p >= 1)) throw std::invalid_argument("DomainSpec: p must be >= 1");
}

namespace {

MultiIndex strip_k(const MultiIndex& m) {
    MultiIndex r = m;
    for (int i = 0; i < m.n(); ++i) r.set_k(i, 0);
    return r;
}

MultiIndex z_part(const MultiIndex& m) {
    MultiIndex r = strip_k(m);
    for (int i = 0; i < m.n(); ++i) r.set_a(i, 0);
    return r;
}

/// sup_j sum_k (|c_k| + |d_j c_k|) e^{|k|s} for each (a,b,c) group.
std::map<MultiIndex, double> group_angle_norms(const Poly& W, double s) {
    const int m = W.m();
    std::map<MultiIndex, std::vector<double>> acc;  // [0] plain sum, [1+j] per-jet sums
    for (std::size_t i = 0; i < W.size(); ++i) {
        auto& v = acc[strip_k(W.key(i))];
        if (v.empty()) v.assign(1 + m, 0.0);
        const double wgt = std::exp(W.key(i).k_abs() * s);
        const double base = std::abs(W.val(i));
        v[0] += base * wgt;
        const cplx* jt = W.jet(i);
        for (int d = 0; d < m; ++d) v[1 + d] += (base + std::abs(jt[d])) * wgt;
    }
    std::map<MultiIndex, double> out;
    for (auto& [k, v] : acc) out[k] = m ? *std::max_element(v.begin() + 1, v.end()) : v[0];
    return out;
}

double weight_pow(double label, double w) { return std::pow(label, w); }

double fact(int n) {
    double f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

double multiset_factorial(const std::vector<int>& sorted) {
    double f = 1;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        f *= fact(static_cast<int>(j - i));
        i = j;
    }
    return f;
}

/// Nonnegative z-form: list of (sorted slot list, coefficient).
struct NonnegForm {
    int J = 0;
    int h = 0;
    std::vector<std::pair<std::vector<int>, double>> terms;
};

NonnegForm form_from_majorant(const Poly& maj, int h) {
    NonnegForm f;
    f.J = maj.trunc().J;
    f.h = h;
    for (std::size_t i = 0; i < maj.size(); ++i) {
        const MultiIndex& k = maj.key(i);
        if (k.z_degree() != h) throw std::invalid_argument("tame norm: polynomial is not z-homogeneous");
        std::vector<int> slots;
        for (int j = 0; j < f.J; ++j)
            for (int e = 0; e < k.b(j); ++e) slots.push_back(j);
        for (int j = 0; j < f.J; ++j)
            for (int e = 0; e < k.c(j); ++e) slots.push_back(f.J + j);
        f.terms.emplace_back(std::move(slots), maj.val(i).real());
    }
    return f;
}

double slot_label(int t, const NonnegForm& f, const DomainSpec& d) { return d.label(t % f.J); }

double vec_norm(const std::vector<double>& col, const NonnegForm& f, const DomainSpec& d, double w) {
    double a = 0, b = 0;
    for (int t = 0; t < 2 * f.J; ++t) {
        const double v = col[t] * weight_pow(slot_label(t, f, d), w);
        (t < f.J ? a : b) += v * v;
    }
    return std::sqrt(a) + std::sqrt(b);
}

/// Hilbert-Schmidt style bound per q/qbar pattern block, maximized over blocks.
/// entries: (multiset, value t_m); the first sequence position carries exponent w_first.
double blockwise_hs(const std::vector<std::pair<std::vector<int>, double>>& entries, const NonnegForm& f,
                    const DomainSpec& d, double w_first) {
    std::unordered_map<std::uint64_t, double> bucket;
    for (const auto& [ms, val] : entries) {
        if (val == 0) continue;
        std::vector<int> seq = ms;
        std::sort(seq.begin(), seq.end());
        do {
            double wgt = 1;
            std::uint64_t pattern = 0;
            for (std::size_t i = 0; i < seq.size(); ++i) {
                wgt *= weight_pow(slot_label(seq[i], f, d), i == 0 ? w_first : 1.0);
                if (seq[i] >= f.J) pattern |= std::uint64_t(1) << i;
            }
            const double q = val / wgt;
            bucket[pattern] += q * q;
        } while (std::next_permutation(seq.begin(), seq.end()));
    }
    double best = 0;
    for (auto& [k, v] : bucket) best = std::max(best, v);
    return std::sqrt(best);
}

/// Upper bound for the gradient operator norm with output exponent w_out and first-slot exponent w_first.
double gradient_upper(const NonnegForm& f, const DomainSpec& d, double w_first, double w_out) {
    const int hp = f.h - 1;
    std::map<std::vector<int>, std::vector<double>> cols;
    for (const auto& [slots, c] : f.terms) {
        const double ef = multiset_factorial(slots);
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (i > 0 && slots[i] == slots[i - 1]) continue;
            std::vector<int> rest = slots;
            rest.erase(rest.begin() + static_cast<long>(i));
            auto& col = cols[rest];
            if (col.empty()) col.assign(2 * f.J, 0.0);
            col[slots[i]] += c * ef / fact(hp);
        }
    }
    std::vector<std::pair<std::vector<int>, double>> entries;
    for (auto& [ms, col] : cols) entries.emplace_back(ms, vec_norm(col, f, d, w_out));
    return blockwise_hs(entries, f, d, w_first);
}

/// Upper bound for the scalar form norm against prod ||z^(i)||_1.
double form_upper(const NonnegForm& f, const DomainSpec& d) {
    std::vector<std::pair<std::vector<int>, double>> entries;
    for (const auto& [slots, c] : f.terms) entries.emplace_back(slots, c * multiset_factorial(slots) / fact(f.h));
    return blockwise_hs(entries, f, d, 1.0);
}

double perm_of(const std::vector<int>& slots, const std::vector<std::vector<double>>& zs) {
    const int h = static_cast<int>(slots.size());
    std::vector<std::vector<double>> A(h, std::vector<double>(h));
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < h; ++c) A[r][c] = zs[c][slots[r]];
    return permanent(A);
}

std::vector<double> gradient_eval(const NonnegForm& f, const std::vector<std::vector<double>>& zs) {
    const int hp = f.h - 1;
    std::vector<double> G(2 * f.J, 0.0);
    for (const auto& [slots, c] : f.terms) {
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (i > 0 && slots[i] == slots[i - 1]) continue;
            const int mult = static_cast<int>(std::count(slots.begin(), slots.end(), slots[i]));
            std::vector<int> rest = slots;
            rest.erase(rest.begin() + static_cast<long>(i));
            G[slots[i]] += c * mult * perm_of(rest, zs) / fact(hp);
        }
    }
    return G;
}

double form_eval(const NonnegForm& f, const std::vector<std::vector<double>>& zs) {
    double v = 0;
    for (const auto& [slots, c] : f.terms) v += c * perm_of(slots, zs) / fact(f.h);
    return v;
}

/// Maximizes a positively homogeneous ratio over tuples of nonnegative vectors.
template <class Ratio>
double sample_sup(int count, int dim, const Ratio& ratio, const SamplingOptions& opt, int& evaluated) {
    if (count == 0) {
        std::vector<std::vector<double>> none;
        evaluated = 1;
        return ratio(none);
    }
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> N01(0.0, 1.0);
    std::vector<std::pair<double, std::vector<std::vector<double>>>> top;
    double best = 0;
    evaluated = 0;
    auto consider = [&](const std::vector<std::vector<double>>& zs) {
        const double r = ratio(zs);
        ++evaluated;
        if (!std::isfinite(r)) return;
        best = std::max(best, r);
        top.emplace_back(r, zs);
        if (top.size() > static_cast<std::size_t>(4 * std::max(opt.ascent_starts, 1))) {
            std::sort(top.begin(), top.end(), [](auto& a, auto& b) { return a.first > b.first; });
            top.resize(std::max(opt.ascent_starts, 1));
        }
    };
    // coordinate tuples (multisets suffice by symmetry)
    {
        std::vector<int> idx(count, 0);
        int made = 0;
        while (made < opt.max_basis_tuples) {
            std::vector<std::vector<double>> zs(count, std::vector<double>(dim, 0.0));
            for (int i = 0; i < count; ++i) zs[i][idx[i]] = 1.0;
            consider(zs);
            ++made;
            int p = count - 1;
            while (p >= 0 && idx[p] == dim - 1) --p;
            if (p < 0) break;
            ++idx[p];
            for (int q = p + 1; q < count; ++q) idx[q] = idx[p];
        }
    }
    consider(std::vector<std::vector<double>>(count, std::vector<double>(dim, 1.0)));
    for (int s = 0; s < opt.samples; ++s) {
        std::vector<std::vector<double>> zs(count, std::vector<double>(dim));
        for (auto& z : zs)
            for (auto& e : z) e = std::abs(N01(rng));
        consider(zs);
    }
    std::sort(top.begin(), top.end(), [](auto& a, auto& b) { return a.first > b.first; });
    std::uniform_int_distribution<int> pick_vec(0, count - 1), pick_ent(0, dim - 1);
    for (int st = 0; st < std::min<int>(opt.ascent_starts, static_cast<int>(top.size())); ++st) {
        auto cur = top[st].second;
        double val = top[st].first;
        double step = 0.5;
        for (int it = 0; it < opt.ascent_iters; ++it) {
            auto cand = cur;
            auto& e = cand[pick_vec(rng)][pick_ent(rng)];
            const double u = N01(rng);
            e = (e == 0.0) ? std::abs(u) * 0.1 : e * std::exp(step * u);
            if (it % 7 == 6) e = 0.0;
            const double r = ratio(cand);
            ++evaluated;
            if (std::isfinite(r) && r > val) {
                val = r;
                cur = std::move(cand);
            } else {
                step = std::max(0.02, step * 0.97);
            }
        }
        best = std::max(best, val);
    }
    return best;
}

}  // namespace

double angle_norm(const Poly& W, double s) {
    for (std::size_t i = 0; i < W.size(); ++i)
        if (W.key(i).weight() != 0) throw std::invalid_argument("angle_norm: polynomial has y/z content");
    double tot = 0;
    for (auto& [k, v] : group_angle_norms(W, s)) tot += v;
    return tot;
}

double xy_norm(const Poly& W, double s, double r) {
    for (std::size_t i = 0; i < W.size(); ++i)
        if (W.key(i).z_degree() != 0) throw std::invalid_argument("xy_norm: polynomial has z content");
    return total_xy_norm(W, s, r);
}

double total_xy_norm(const Poly& W, double s, double r) {
    double tot = 0;
    for (auto& [k, v] : group_angle_norms(W, s)) tot += v * std::pow(r, 2 * k.a_abs());
    return tot;
}

Poly majorant(const Poly& W, double s, double r) {
    PolyAccumulator<cplx> acc(W.trunc());
    for (auto& [k, v] : group_angle_norms(W, s)) acc.add(z_part(k), cplx(v * std::pow(r, 2 * k.a_abs()), 0), nullptr);
    return acc.finish();
}

double half_norm(const std::vector<double>& z, int half, const DomainSpec& d, double w) {
    const int J = static_cast<int>(z.size()) / 2;
    double a = 0;
    for (int j = 0; j < J; ++j) {
        const double v = z[half * J + j] * std::pow(d.label(j), w);
        a += v * v;
    }
    return std::sqrt(a);
}

double znorm(const std::vector<double>& z, const DomainSpec& d, double w) {
    return half_norm(z, 0, d, w) + half_norm(z, 1, d, w);
}

double gauge_p1(const std::vector<std::vector<double>>& zs, const DomainSpec& d) {
    const int h = static_cast<int>(zs.size());
    if (h == 0) return 1.0;
    double tot = 0;
    for (int j = 0; j < h; ++j) {
        double prod = 1;
        for (int i = 0; i < h; ++i) prod *= znorm(zs[i], d, i == j ? d.p : 1.0);
        tot += prod;
    }
    return tot / h;
}

double gauge_symmetrized(const std::vector<std::vector<double>>& zs, const DomainSpec& d) {
    const int m = static_cast<int>(zs.size());
    if (m == 0) return 1.0;
    std::vector<int> perm(m);
    for (int i = 0; i < m; ++i) perm[i] = i;
    double tot = 0;
    long count = 0;
    do {
        for (int j = 0; j < m; ++j) {
            double prod = 1;
            for (int i = 0; i < m; ++i) prod *= znorm(zs[perm[i]], d, i == j ? d.p : 1.0);
            tot += prod;
        }
        ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return tot / (static_cast<double>(count) * m);
}

NormEstimate ztame_norm(const Poly& W, const DomainSpec& d, const SamplingOptions& opt) {
    d.validate();
    NormEstimate est;
    est.seed = opt.seed;
    if (W.empty()) return est;
    const int h = W.key(0).z_degree();
    if (h < 1) throw std::invalid_argument("ztame_norm: requires z-degree >= 1");
    const NonnegForm f = form_from_majorant(majorant(W, d.s, d.r), h);
    const double rfac = std::pow(d.r, h - 1);
    est.upper = std::max(gradient_upper(f, d, d.p, d.p), gradient_upper(f, d, 1.0, 1.0)) * rfac;
    const DomainSpec& dd = d;
    auto ratio = [&](const std::vector<std::vector<double>>& zs) {
        const auto G = gradient_eval(f, zs);
        double p1 = 1;
        for (const auto& z : zs) p1 *= znorm(z, dd, 1.0);
        const double gp = gauge_p1(zs, dd);
        const double rp = gp > 0 ? vec_norm(G, f, dd, dd.p) / gp : 0.0;
        const double r1 = p1 > 0 ? vec_norm(G, f, dd, 1.0) / p1 : 0.0;
        return std::max(rp, r1);
    };
    int evaluated = 0;
    est.lower = std::min(sample_sup(h - 1, 2 * f.J, ratio, opt, evaluated) * rfac, est.upper);
    est.samples = evaluated;
    return est;
}

NormEstimate tangent_norm(const Poly& W, Var direction, const DomainSpec& d, const SamplingOptions& opt) {
    d.validate();
    if (direction != Var::X && direction != Var::Y) throw std::invalid_argument("tangent_norm: direction must be x or y");
    NormEstimate est;
    est.seed = opt.seed;
    if (W.empty()) return est;
    const int h = W.key(0).z_degree();
    const double rfac = std::pow(d.r, h);
    std::vector<NonnegForm> forms;
    for (int i = 0; i < W.trunc().n; ++i) {
        Poly Di = derivative(W, direction, i);
        if (Di.empty()) continue;
        forms.push_back(form_from_majorant(majorant(Di, d.s, d.r), h));
    }
    if (forms.empty()) return est;
    double up = 0;
    for (const auto& f : forms) up = std::max(up, form_upper(f, d));
    est.upper = up * rfac;
    auto ratio = [&](const std::vector<std::vector<double>>& zs) {
        double den = 1;
        for (const auto& z : zs) den *= znorm(z, d, 1.0);
        if (den <= 0) return 0.0;
        double best = 0;
        for (const auto& f : forms) best = std::max(best, form_eval(f, zs));
        return best / den;
    };
    int evaluated = 0;
    est.lower = std::min(sample_sup(h, 2 * W.trunc().J, ratio, opt, evaluated) * rfac, est.upper);
    est.samples = evaluated;
    return est;
}

NormEstimate vf_tame_norm(const Poly& W, const DomainSpec& d, const SamplingOptions& opt) {
    d.validate();
    NormEstimate est;
    est.seed = opt.seed;
    std::map<int, int> layers;
    for (std::size_t i = 0; i < W.size(); ++i) layers[W.key(i).z_degree()] = 1;
    for (auto& [h, unused] : layers) {
        (void)unused;
        const int hh = h;
        Poly Wh = W.filter([&](const MultiIndex& m) { return m.z_degree() == hh; });
        est += tangent_norm(Wh, Var::Y, d, opt);
        est += tangent_norm(Wh, Var::X, d, opt).scaled(1.0 / (d.r * d.r));
        if (h >= 1) est += ztame_norm(Wh, d, opt).scaled(1.0 / d.r);
    }
    est.seed = opt.seed;
    return est;
}

namespace {

PhasePoint sample_domain_point(int n, int J, const DomainSpec& d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::normal_distribution<double> N01(0.0, 1.0);
    PhasePoint p(n, J);
    const double two_pi = 6.283185307179586;
    for (int i = 0; i < n; ++i) {
        p.x[i] = cplx(two_pi * U(rng), d.s * (2 * U(rng) - 1) * (U(rng) < 0.5 ? 1.0 : 0.999));
        const double rad = d.r * d.r * (U(rng) < 0.5 ? 1.0 : std::sqrt(U(rng)));
        p.y[i] = std::polar(rad, two_pi * U(rng));
    }
    if (J > 0) {
        for (int j = 0; j < J; ++j) {
            p.q[j] = cplx(N01(rng), N01(rng)) / std::pow(d.label(j), d.p);
            p.qb[j] = cplx(N01(rng), N01(rng)) / std::pow(d.label(j), d.p);
        }
        double nq = 0, nqb = 0;
        for (int j = 0; j < J; ++j) {
            nq += std::norm(p.q[j]) * std::pow(d.label(j), 2 * d.p);
            nqb += std::norm(p.qb[j]) * std::pow(d.label(j), 2 * d.p);
        }
        const double tot = std::sqrt(nq) + std::sqrt(nqb);
        const double target = d.r * (U(rng) < 0.5 ? 0.999999 : U(rng));
        for (int j = 0; j < J; ++j) {
            p.q[j] *= target / tot;
            p.qb[j] *= target / tot;
        }
    }
    return p;
}

}  // namespace

double phase_point_norm(const PhasePoint& w, const DomainSpec& d) {
    double nx = 0, ny = 0, nq = 0, nqb = 0;
    for (const auto& v : w.x) nx = std::max(nx, std::abs(v));
    for (const auto& v : w.y) ny = std::max(ny, std::abs(v));
    for (int j = 0; j < w.J(); ++j) {
        const double wt = std::pow(d.label(j), 2 * d.p);
        nq += std::norm(w.q[j]) * wt;
        nqb += std::norm(w.qb[j]) * wt;
    }
    return nx + ny / (d.r * d.r) + (std::sqrt(nq) + std::sqrt(nqb)) / d.r;
}

double weighted_sup_norm(const VectorField& X, const DomainSpec& d, int sample_count, std::uint64_t seed) {
    d.validate();
    const int n = static_cast<int>(X.Wy.size());
    const int J = static_cast<int>(X.zq.size());
    std::mt19937_64 rng(seed);
    double best = 0;
    for (int s = 0; s < sample_count; ++s) {
        const PhasePoint p = sample_domain_point(n, J, d, rng);
        PhasePoint v(n, J);
        for (int i = 0; i < n; ++i) {
            v.x[i] = evaluate(X.Wy[i], p).val;
            v.y[i] = evaluate(X.Wx[i], p).val;
        }
        for (int j = 0; j < J; ++j) {
            v.q[j] = evaluate(X.zq[j], p).val;
            v.qb[j] = evaluate(X.zqb[j], p).val;
        }
        best = std::max(best, phase_point_norm(v, d));
    }
    return best;
}

CauchyReport check_cauchy(const Poly& W, double s, double sigma, double r, double sigma_p) {
    if (!(sigma > 0 && sigma < s)) throw std::invalid_argument("check_cauchy: need 0 < sigma < s");
    if (!(sigma_p > 0 && sigma_p < r)) throw std::invalid_argument("check_cauchy: need 0 < sigma' < r");
    CauchyReport rep;
    const int n = W.trunc().n;
    const double base_s = total_xy_norm(W, s, r);
    for (int i = 0; i < n; ++i) {
        rep.lhs_x = std::max(rep.lhs_x, total_xy_norm(derivative(W, Var::X, i), s - sigma, r));
        rep.lhs_y = std::max(rep.lhs_y, total_xy_norm(derivative(W, Var::Y, i), s, r - sigma_p));
    }
    rep.rhs_x = base_s / (std::exp(1.0) * sigma);
    rep.rhs_y = base_s / (r * sigma_p);
    return rep;
}

double smoothing_gap(const std::vector<double>& z, int N, const DomainSpec& d) {
    const int J = static_cast<int>(z.size()) / 2;
    for (int j = 0; j < J; ++j)
        if (d.label(j) <= N && (z[j] != 0 || z[J + j] != 0))
            throw std::invalid_argument("smoothing_gap: vector not supported on the tail");
    return znorm(z, d, d.p) / std::pow(N + 1.0, d.p - 1.0) - znorm(z, d, 1.0);
}

}  // namespace kamstab
