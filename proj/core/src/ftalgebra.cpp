#include "kamstab/ftalgebra.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace kamstab {

void TruncationSpec::validate() const {
    if (n < 0 || J < 0 || K < 0 || D < 0 || m < 0)
        throw std::invalid_argument("TruncationSpec fields must be nonnegative");
    if (2 * n + 2 * J > MultiIndex::kCapacity)
        throw std::invalid_argument("TruncationSpec: n+J too large");
    if (n > 32 || J > 32) throw std::invalid_argument("TruncationSpec: n, J must be <= 32");
}

std::string TruncationSpec::describe() const {
    std::ostringstream os;
    os << "n=" << n << " J=" << J << " K=" << K << " D=" << D << " m=" << m;
    return os.str();
}

std::string MultiIndex::str() const {
    std::ostringstream os;
    auto group = [&](int off, int len) {
        for (int i = 0; i < len; ++i) os << (i ? "," : "") << static_cast<int>(e_[off + i]);
    };
    group(0, n_);
    os << ';';
    group(n_, n_);
    os << ';';
    group(2 * n_, J_);
    os << ';';
    group(2 * n_ + J_, J_);
    return os.str();
}

std::vector<cplx> PhasePoint::flat() const {
    std::vector<cplx> v;
    v.reserve(2 * x.size() + 2 * q.size());
    v.insert(v.end(), x.begin(), x.end());
    v.insert(v.end(), y.begin(), y.end());
    v.insert(v.end(), q.begin(), q.end());
    v.insert(v.end(), qb.begin(), qb.end());
    return v;
}

PhasePoint PhasePoint::from_flat(const std::vector<cplx>& v, int n, int J) {
    PhasePoint p(n, J);
    for (int i = 0; i < n; ++i) {
        p.x[i] = v[i];
        p.y[i] = v[n + i];
    }
    for (int j = 0; j < J; ++j) {
        p.q[j] = v[2 * n + j];
        p.qb[j] = v[2 * n + J + j];
    }
    return p;
}

MultiIndex make_index(const TruncationSpec& t, const std::vector<int>& k, const std::vector<int>& a,
                      const std::vector<int>& b, const std::vector<int>& c) {
    MultiIndex m(t.n, t.J);
    for (int i = 0; i < t.n; ++i) {
        m.set_k(i, i < static_cast<int>(k.size()) ? k[i] : 0);
        m.set_a(i, i < static_cast<int>(a.size()) ? a[i] : 0);
    }
    for (int j = 0; j < t.J; ++j) {
        m.set_b(j, j < static_cast<int>(b.size()) ? b[j] : 0);
        m.set_c(j, j < static_cast<int>(c.size()) ? c[j] : 0);
    }
    return m;
}

Poly monomial(const TruncationSpec& t, const std::vector<int>& k, const std::vector<int>& a,
              const std::vector<int>& b, const std::vector<int>& c, cplx coef, const std::vector<cplx>& jet) {
    PolyAccumulator<cplx> acc(t);
    std::vector<cplx> j(t.m);
    for (int d = 0; d < t.m && d < static_cast<int>(jet.size()); ++d) j[d] = jet[d];
    acc.add(make_index(t, k, a, b, c), coef, t.m ? j.data() : nullptr);
    return acc.finish();
}

VectorField vector_field(const Poly& W) {
    const auto& t = W.trunc();
    VectorField vf;
    const cplx I(0, 1);
    for (int i = 0; i < t.n; ++i) {
        vf.Wy.push_back(derivative(W, Var::Y, i));
        vf.Wx.push_back(derivative(W, Var::X, i));
    }
    for (int j = 0; j < t.J; ++j) {
        vf.zq.push_back(poly_scale(derivative(W, Var::QBar, j), I));
        vf.zqb.push_back(poly_scale(derivative(W, Var::Q, j), -I));
    }
    return vf;
}

LieSeriesResult<cplx> lie_transform(const Poly& H, const Poly& F, const TruncationSpec& t, int max_order,
                                    double rel_tol) {
    if (max_order < 0) throw std::invalid_argument("lie_transform: max_order must be >= 0");
    return lie_series(H, F, t, max_order, rel_tol);
}

Poly prune(const Poly& W, double tol) {
    double dropped = 0;
    PolyAccumulator<cplx> acc(W.trunc());
    for (std::size_t i = 0; i < W.size(); ++i) {
        bool keep = std::abs(W.val(i)) > tol;
        const cplx* j = W.jet(i);
        for (int d = 0; d < W.m() && !keep; ++d) keep = std::abs(j[d]) > tol;
        if (keep)
            acc.add(W.key(i), W.val(i), j);
        else
            dropped += std::abs(W.val(i));
    }
    Poly r = acc.finish();
    r.set_truncation_mass(W.truncation_mass() + dropped);
    r.set_real_flag(W.real_flag());
    return r;
}

double jet_l1(const Poly& W) {
    double s = 0;
    for (std::size_t i = 0; i < W.size(); ++i) {
        s += std::abs(W.val(i));
        const cplx* j = W.jet(i);
        for (int d = 0; d < W.m(); ++d) s += std::abs(j[d]);
    }
    return s;
}

namespace {

cplx ipow(cplx b, int e) {
    cplx r(1, 0);
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

cplx monomial_value(const MultiIndex& key, const PhasePoint& p) {
    const cplx I(0, 1);
    cplx phase(0, 0);
    for (int i = 0; i < key.n(); ++i) phase += static_cast<double>(key.k(i)) * p.x[i];
    cplx v = std::exp(I * phase);
    for (int i = 0; i < key.n(); ++i) v *= ipow(p.y[i], key.a(i));
    for (int j = 0; j < key.J(); ++j) v *= ipow(p.q[j], key.b(j)) * ipow(p.qb[j], key.c(j));
    return v;
}

}  // namespace

JetValue evaluate(const Poly& W, const PhasePoint& p) {
    const auto& t = W.trunc();
    if (p.n() != t.n || p.J() != t.J) throw std::invalid_argument("evaluate: point dimension mismatch");
    JetValue out{cplx(0, 0), std::vector<cplx>(t.m)};
    for (std::size_t i = 0; i < W.size(); ++i) {
        const cplx mv = monomial_value(W.key(i), p);
        out.val += W.val(i) * mv;
        const cplx* j = W.jet(i);
        for (int d = 0; d < t.m; ++d) out.dxi[d] += j[d] * mv;
    }
    return out;
}

double permanent(const std::vector<std::vector<double>>& A) {
    const int h = static_cast<int>(A.size());
    if (h == 0) return 1.0;
    if (h > 20) throw std::invalid_argument("permanent: size too large");
    std::vector<double> dp(std::size_t(1) << h, 0.0);
    dp[0] = 1.0;
    for (std::size_t mask = 0; mask < dp.size(); ++mask) {
        if (dp[mask] == 0.0) continue;
        const int row = __builtin_popcountll(mask);
        if (row == h) continue;
        for (int c = 0; c < h; ++c)
            if (!((mask >> c) & 1u)) dp[mask | (std::size_t(1) << c)] += dp[mask] * A[row][c];
    }
    return dp.back();
}

cplx symmetric_apply(const Poly& W, const std::vector<std::vector<double>>& z, const std::vector<cplx>& x,
                     const std::vector<cplx>& y) {
    const auto& t = W.trunc();
    const int h = static_cast<int>(z.size());
    for (const auto& v : z) {
        if (static_cast<int>(v.size()) != 2 * t.J)
            throw std::invalid_argument("symmetric_apply: test vectors need 2J entries");
        for (double e : v)
            if (e < 0) throw std::invalid_argument("symmetric_apply: test vectors must be nonnegative");
    }
    PhasePoint p(t.n, 0);
    for (int i = 0; i < t.n; ++i) {
        p.x[i] = i < static_cast<int>(x.size()) ? x[i] : cplx(0);
        p.y[i] = i < static_cast<int>(y.size()) ? y[i] : cplx(0);
    }
    double fact = 1;
    for (int i = 2; i <= h; ++i) fact *= i;
    cplx total(0, 0);
    std::vector<std::vector<double>> A(h, std::vector<double>(h));
    for (std::size_t i = 0; i < W.size(); ++i) {
        const MultiIndex& key = W.key(i);
        if (key.z_degree() != h) throw std::invalid_argument("symmetric_apply: polynomial not z-homogeneous of degree h");
        cplx coef = W.val(i);
        {
            // coefficient function at (x, y)
            const cplx I(0, 1);
            cplx phase(0, 0);
            for (int s = 0; s < t.n; ++s) phase += static_cast<double>(key.k(s)) * p.x[s];
            coef *= std::exp(I * phase);
            for (int s = 0; s < t.n; ++s) coef *= ipow(p.y[s], key.a(s));
        }
        if (coef == cplx(0, 0)) continue;
        std::vector<int> slots;
        for (int j = 0; j < t.J; ++j)
            for (int e = 0; e < key.b(j); ++e) slots.push_back(j);
        for (int j = 0; j < t.J; ++j)
            for (int e = 0; e < key.c(j); ++e) slots.push_back(t.J + j);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < h; ++c) A[r][c] = z[c][slots[r]];
        total += coef * (permanent(A) / fact);
    }
    return total;
}

int tail_degree(const MultiIndex& m, int tail_start) {
    int d = 0;
    for (int j = tail_start; j < m.J(); ++j) d += m.b(j) + m.c(j);
    return d;
}

std::map<std::string, Poly> degree_split(const Poly& W, SplitRule rule, int threshold, int tail_start) {
    std::map<std::string, Poly> parts;
    switch (rule) {
        case SplitRule::LowHigh:
            parts["low"] = W.filter([&](const MultiIndex& m) { return m.weight() <= threshold; });
            parts["high"] = W.filter([&](const MultiIndex& m) { return m.weight() > threshold; });
            break;
        case SplitRule::Kuksin: {
            auto cls = [](const MultiIndex& m) -> std::string {
                const int a = m.a_abs(), z = m.z_degree();
                if (a == 0 && z == 0) return "x";
                if (a == 1 && z == 0) return "y";
                if (a == 0 && z == 1) return "1";
                if (a == 0 && z == 2) return "2";
                if (a == 2 && z == 0) return "(0)";
                if (a == 1 && z == 1) return "(1)";
                if (a == 1 && z == 2) return "(2)";
                if (a == 0 && z == 3) return "(3)";
                return "(4)";
            };
            for (const char* name : {"x", "y", "1", "2", "(0)", "(1)", "(2)", "(3)", "(4)"}) {
                const std::string s(name);
                parts[s] = W.filter([&](const MultiIndex& m) { return cls(m) == s; });
            }
            break;
        }
        case SplitRule::Tail:
            parts["P"] = W.filter([&](const MultiIndex& m) { return tail_degree(m, tail_start) <= 2; });
            parts["Q"] = W.filter([&](const MultiIndex& m) { return tail_degree(m, tail_start) > 2; });
            break;
    }
    return parts;
}

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& s) {
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument("read_poly: bad number '" + s + "'");
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<int> parse_ints(const std::string& s, int expect) {
    std::vector<int> v;
    if (!s.empty())
        for (const auto& tok : split(s, ',')) v.push_back(std::stoi(tok));
    if (static_cast<int>(v.size()) != expect) throw std::invalid_argument("read_poly: wrong exponent count");
    return v;
}

}  // namespace

void write_poly(std::ostream& os, const Poly& W) {
    const auto& t = W.trunc();
    os << "# kamstab-ftpoly v1\n";
    os << "# n=" << t.n << " J=" << t.J << " K=" << t.K << " D=" << t.D << " m=" << t.m
       << " real=" << (W.real_flag() ? 1 : 0) << " tmass=" << fmt_double(W.truncation_mass()) << "\n";
    for (std::size_t i = 0; i < W.size(); ++i) {
        os << W.key(i).str() << ';' << fmt_double(W.val(i).real()) << ';' << fmt_double(W.val(i).imag());
        const cplx* j = W.jet(i);
        for (int d = 0; d < t.m; ++d) os << ';' << fmt_double(j[d].real()) << ';' << fmt_double(j[d].imag());
        os << '\n';
    }
}

Poly read_poly(std::istream& is) {
    std::string line;
    TruncationSpec t;
    bool have_header = false, real = false;
    double tmass = 0;
    std::vector<std::string> body;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string tok;
            while (ls >> tok) {
                auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
                if (key == "n") t.n = std::stoi(val), have_header = true;
                else if (key == "J") t.J = std::stoi(val);
                else if (key == "K") t.K = std::stoi(val);
                else if (key == "D") t.D = std::stoi(val);
                else if (key == "m") t.m = std::stoi(val);
                else if (key == "real") real = val == "1";
                else if (key == "tmass") tmass = parse_double(val);
            }
            continue;
        }
        body.push_back(line);
    }
    if (!have_header) throw std::invalid_argument("read_poly: missing TruncationSpec header");
    t.validate();
    PolyAccumulator<cplx> acc(t);
    std::vector<cplx> jet(t.m);
    for (const auto& l : body) {
        auto f = split(l, ';');
        if (static_cast<int>(f.size()) != 6 + 2 * t.m) throw std::invalid_argument("read_poly: bad field count");
        MultiIndex key = make_index(t, parse_ints(f[0], t.n), parse_ints(f[1], t.n), parse_ints(f[2], t.J),
                                    parse_ints(f[3], t.J));
        if (!fits(key, t)) throw std::invalid_argument("read_poly: monomial outside truncation");
        for (int d = 0; d < t.m; ++d) jet[d] = cplx(parse_double(f[6 + 2 * d]), parse_double(f[7 + 2 * d]));
        acc.add(key, cplx(parse_double(f[4]), parse_double(f[5])), t.m ? jet.data() : nullptr);
    }
    Poly p = acc.finish();
    p.set_real_flag(real);
    p.set_truncation_mass(tmass);
    return p;
}

std::string to_text(const Poly& W) {
    std::ostringstream os;
    write_poly(os, W);
    return os.str();
}

Poly from_text(const std::string& s) {
    std::istringstream is(s);
    return read_poly(is);
}

Poly random_poly(const TruncationSpec& t, const RandomPolyOptions& opt, std::mt19937_64& rng) {
    PolyAccumulator<cplx> acc(t);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::uniform_int_distribution<int> small(-3, 3);
    auto draw = [&]() -> double { return opt.integer_coefficients ? small(rng) : U(rng) * opt.coef_scale; };
    std::vector<cplx> jet(t.m);
    const int wmax = std::min(opt.max_weight, t.D);
    int guard = 0;
    int made = 0;
    while (made < opt.terms && guard++ < 100 * opt.terms + 100) {
        const int w = std::uniform_int_distribution<int>(opt.min_weight, std::max(opt.min_weight, wmax))(rng);
        const int amax = t.n ? w / 2 : 0;
        const int atot = std::uniform_int_distribution<int>(0, amax)(rng);
        const int ztot = w - 2 * atot;
        if (ztot > 0 && t.J == 0) continue;
        MultiIndex key(t.n, t.J);
        for (int e = 0; e < atot; ++e) {
            int i = std::uniform_int_distribution<int>(0, t.n - 1)(rng);
            key.set_a(i, key.a(i) + 1);
        }
        for (int e = 0; e < ztot; ++e) {
            int s = std::uniform_int_distribution<int>(0, 2 * t.J - 1)(rng);
            if (s < t.J) key.set_b(s, key.b(s) + 1);
            else key.set_c(s - t.J, key.c(s - t.J) + 1);
        }
        const int kmax = std::min(opt.max_k, t.K);
        for (int i = 0; i < t.n; ++i) key.set_k(i, std::uniform_int_distribution<int>(-kmax, kmax)(rng));
        if (!fits(key, t)) continue;
        cplx c(draw(), draw());
        if (c == cplx(0, 0)) c = cplx(1, 0);
        for (int d = 0; d < t.m; ++d) jet[d] = opt.jets ? cplx(draw(), draw()) : cplx(0, 0);
        acc.add(key, c, t.m ? jet.data() : nullptr);
        ++made;
    }
    return acc.finish();
}

ExactPoly to_exact(const Poly& W) {
    PolyAccumulator<GaussRational> acc(W.trunc());
    std::vector<GaussRational> jet(W.m());
    for (std::size_t i = 0; i < W.size(); ++i) {
        const cplx* j = W.jet(i);
        for (int d = 0; d < W.m(); ++d) jet[d] = GaussRational(Rational(j[d].real()), Rational(j[d].imag()));
        acc.add(W.key(i), GaussRational(Rational(W.val(i).real()), Rational(W.val(i).imag())),
                W.m() ? jet.data() : nullptr);
    }
    return acc.finish();
}

Poly from_exact(const ExactPoly& W) {
    PolyAccumulator<cplx> acc(W.trunc());
    std::vector<cplx> jet(W.m());
    for (std::size_t i = 0; i < W.size(); ++i) {
        const GaussRational* j = W.jet(i);
        for (int d = 0; d < W.m(); ++d)
            jet[d] = cplx(static_cast<double>(j[d].re), static_cast<double>(j[d].im));
        acc.add(W.key(i), cplx(static_cast<double>(W.val(i).re), static_cast<double>(W.val(i).im)),
                W.m() ? jet.data() : nullptr);
    }
    return acc.finish();
}

}  // namespace kamstab
