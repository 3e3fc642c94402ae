#include "kamstab/resonance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace kamstab {

namespace {

int l1(const std::vector<int>& v, std::size_t from = 0, std::size_t to = std::string::npos) {
    int s = 0;
    to = std::min(to, v.size());
    for (std::size_t i = from; i < to; ++i) s += std::abs(v[i]);
    return s;
}

/// All integer vectors of length d with |v|_1 <= K, in order of increasing |v|_1.
std::vector<std::vector<int>> lattice_ball(int d, int K) {
    std::vector<std::vector<int>> out;
    std::vector<int> v(d, 0);
    for (int target = 0; target <= K; ++target) {
        auto rec = [&](auto&& self, int pos, int left) -> void {
            if (pos == d) {
                if (left == 0) out.push_back(v);
                return;
            }
            for (int x = -left; x <= left; ++x) {
                v[pos] = x;
                self(self, pos + 1, left - std::abs(x));
            }
            v[pos] = 0;
        };
        rec(rec, 0, target);
    }
    return out;
}

/// Tail vectors over modes [from, to) with |l| in {1,2}.
std::vector<std::vector<std::pair<int, int>>> tail_patterns(int from, int to) {
    std::vector<std::vector<std::pair<int, int>>> out;
    for (int i = from; i < to; ++i) {
        for (int s : {1, -1}) {
            out.push_back({{i, s}});
            out.push_back({{i, 2 * s}});
        }
        for (int j = i + 1; j < to; ++j)
            for (int si : {1, -1})
                for (int sj : {1, -1}) out.push_back({{i, si}, {j, sj}});
    }
    return out;
}

double omega_l1(const FrequencySet& f) {
    double s = 0;
    for (double w : f.omega) s += std::abs(w);
    return s;
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Runs shard(s, count, seed) over a fixed shard layout and sums the hits.
template <class Fn>
long sharded_count(long samples, std::uint64_t seed, Fn&& shard) {
    constexpr int kShards = 8;
    std::vector<long> hits(kShards, 0);
    std::vector<std::thread> pool;
    for (int s = 0; s < kShards; ++s) {
        long cnt = samples / kShards + (s < samples % kShards ? 1 : 0);
        pool.emplace_back([&, s, cnt] { hits[s] = shard(cnt, splitmix(seed ^ (0x1000u + s))); });
    }
    for (auto& t : pool) t.join();
    long total = 0;
    for (long h : hits) total += h;
    return total;
}

std::vector<double> sample_box(const ParameterFamily& fam, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> xi(fam.lo.size());
    for (std::size_t i = 0; i < xi.size(); ++i) xi[i] = fam.lo[i] + (fam.hi[i] - fam.lo[i]) * u(rng);
    return xi;
}

/// Canonical sign: first nonzero entry of (k, l) positive.
bool canonical(const std::vector<int>& k, const std::vector<int>& l) {
    for (int v : k)
        if (v) return v > 0;
    for (int v : l)
        if (v) return v > 0;
    return false;
}

}  // namespace

int FrequencySet::m() const {
    std::size_t m = 0;
    for (const auto& v : domega) m = std::max(m, v.size());
    for (const auto& v : dOmega) m = std::max(m, v.size());
    return static_cast<int>(m);
}

Poly FrequencySet::integrable_part(const TruncationSpec& t) const {
    if (t.n != n() || t.J != J()) throw std::invalid_argument("integrable_part: dimension mismatch");
    PolyAccumulator<cplx> acc(t);
    std::vector<cplx> jet(t.m);
    auto fill = [&](const std::vector<std::vector<double>>& d, int i) {
        std::fill(jet.begin(), jet.end(), cplx{});
        if (i < static_cast<int>(d.size()))
            for (int p = 0; p < std::min<int>(t.m, static_cast<int>(d[i].size())); ++p) jet[p] = d[i][p];
    };
    for (int i = 0; i < n(); ++i) {
        MultiIndex key(t.n, t.J);
        key.set_a(i, 1);
        fill(domega, i);
        acc.add(key, omega[i], jet.data());
    }
    for (int j = 0; j < J(); ++j) {
        MultiIndex key(t.n, t.J);
        key.set_b(j, 1);
        key.set_c(j, 1);
        fill(dOmega, j);
        acc.add(key, Omega[j], jet.data());
    }
    Poly r = acc.finish();
    r.set_real_flag(true);
    return r;
}

AsymptoticsReport check_frequency_asymptotics(const FrequencySet& f) {
    AsymptoticsReport r;
    r.best_c1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < f.J(); ++i) {
        const double li = f.label(i);
        r.best_c2 = std::max(r.best_c2, std::abs(f.Omega[i]) / (li * li));
        for (int j = i + 1; j < f.J(); ++j) {
            const double lj = f.label(j);
            const double den = std::abs(li - lj) * (li + lj);
            if (den == 0) continue;
            r.best_c1 = std::min(r.best_c1, std::abs(f.Omega[i] - f.Omega[j]) / den);
        }
    }
    constexpr double tol = 1e-12;
    r.ok = r.best_c1 >= f.c1 - tol && r.best_c2 <= f.c2 + tol;
    return r;
}

double twist_defect(const FrequencySet& f, const std::vector<int>& tparam, const std::vector<int>& nparam) {
    const int m = f.m();
    double d = 0;
    auto scan = [&](const std::vector<std::vector<double>>& jets, const std::vector<int>& target, int count) {
        for (int i = 0; i < count; ++i)
            for (int p = 0; p < m; ++p) {
                double v = (i < static_cast<int>(jets.size()) && p < static_cast<int>(jets[i].size())) ? jets[i][p] : 0;
                double want = (i < static_cast<int>(target.size()) && target[i] == p) ? 1.0 : 0.0;
                d = std::max(d, std::abs(v - want));
            }
    };
    scan(f.domega, tparam, f.n());
    scan(f.dOmega, nparam, f.J());
    return d;
}

int ResonanceQuery::low_abs() const { return l1(l, 0, static_cast<std::size_t>(std::max(Ncut, 0))); }
int ResonanceQuery::high_abs() const { return l1(l, static_cast<std::size_t>(std::max(Ncut, 0))); }

double ResonanceQuery::gap() const {
    const double kk = std::pow(l1(k) + 1.0, tau);
    if (form == GapForm::Kam) return eta / kk;
    const double lt = low_abs() + 4.0;
    const double C = Ncut <= 1 ? 1.0 : std::pow(static_cast<double>(Ncut), lt * lt);
    return eta / (std::pow(4.0, M) * kk * C);
}

std::string ResonanceQuery::str() const {
    std::ostringstream os;
    auto put = [&](const std::vector<int>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    };
    os << "k=(";
    put(k);
    os << ") l=(";
    put(l);
    os << ")";
    return os.str();
}

DivisorValue small_divisor(const ResonanceQuery& q, const FrequencySet& f) {
    if (static_cast<int>(q.k.size()) != f.n() || static_cast<int>(q.l.size()) != f.J())
        throw std::invalid_argument("small_divisor: query dimension mismatch");
    const int m = f.m();
    DivisorValue d;
    d.dxi.assign(m, 0.0);
    auto acc = [&](const std::vector<int>& c, const std::vector<double>& v, const std::vector<std::vector<double>>& jet) {
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (!c[i]) continue;
            d.value += c[i] * v[i];
            if (i < jet.size())
                for (std::size_t p = 0; p < jet[i].size(); ++p) d.dxi[p] += c[i] * jet[i][p];
        }
    };
    acc(q.k, f.omega, f.domega);
    acc(q.l, f.Omega, f.dOmega);
    return d;
}

double tail_cutoff(const FrequencySet& f, int kabs, int Ncut, int j0) {
    const double N = std::max(Ncut, 0);
    return (4.0 / f.c1) * ((kabs + 1.0) * (omega_l1(f) + 1.0) + f.c2 * j0 * N * N + 1.0);
}

NonresonanceResult check_nonresonant(const FrequencySet& f, double eta_tilde, int Ncut, int M, double tau,
                                     const NonresonanceLimits& limits) {
    if (Ncut < 0 || Ncut > f.J()) throw std::invalid_argument("check_nonresonant: Ncut out of range");
    NonresonanceResult res;
    res.min_ratio = std::numeric_limits<double>::infinity();
    const int L = M + 2;
    const auto ks = lattice_ball(f.n(), limits.Kmax);
    const auto lows = lattice_ball(Ncut, L);
    const auto tails = tail_patterns(Ncut, f.J());
    const bool tail_usable = check_frequency_asymptotics(f).ok;

    ResonanceQuery q;
    q.tau = tau;
    q.eta = eta_tilde;
    q.M = M;
    q.Ncut = Ncut;
    q.form = GapForm::Pnf;
    q.l.assign(f.J(), 0);

    auto visit = [&](const std::vector<int>& k, const std::vector<int>& l) -> bool {
        if (!canonical(k, l)) return true;
        q.k = k;
        q.l = l;
        ++res.enumerated;
        const double d = std::abs(small_divisor(q, f).value);
        const double g = q.gap();
        const double ratio = d / g;
        if (ratio < res.min_ratio) {
            res.min_ratio = ratio;
            res.argmin = q;
        }
        if (d < g) {
            res.status = CertStatus::Violated;
            res.violation = q;
            res.message = "divisor " + fmt_double(d) + " below gap " + fmt_double(g) + " at " + q.str();
            return false;
        }
        return true;
    };

    bool unresolved_tail = false;
    for (const auto& k : ks) {
        const double cut = tail_cutoff(f, l1(k), Ncut, L);
        res.tail_cutoff = std::max(res.tail_cutoff, cut);
        for (const auto& lt : lows) {
            std::vector<int> l(f.J(), 0);
            std::copy(lt.begin(), lt.end(), l.begin());
            if (!visit(k, l)) return res;
            const int room = L - l1(lt);
            for (const auto& pat : tails) {
                int mag = 0;
                bool excluded = false, unlisted = false;
                for (auto [j, v] : pat) {
                    mag += std::abs(v);
                    // Modes beyond the cutoff cannot produce a small divisor when the frequency asymptotics hold.
                    if (tail_usable && f.label(j) >= cut) excluded = true;
                    else if (f.label(j) > limits.max_tail_label) unlisted = true;
                }
                if (mag > room || excluded) continue;
                if (unlisted) {
                    unresolved_tail = true;
                    continue;
                }
                for (auto [j, v] : pat) l[j] = v;
                bool go = visit(k, l);
                for (auto [j, v] : pat) l[j] = 0;
                if (!go) return res;
            }
        }
    }
    if (unresolved_tail) {
        res.status = CertStatus::Inconclusive;
        res.message = "tail modes up to label " + fmt_double(res.tail_cutoff) +
                      " exceed the enumeration limit " + std::to_string(limits.max_tail_label);
    } else {
        res.message = "certified: min |d|/gap = " + fmt_double(res.min_ratio) +
                      (res.argmin ? " at " + res.argmin->str() : std::string());
    }
    return res;
}

double ParameterFamily::volume() const {
    double v = 1;
    for (std::size_t i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
    return v;
}

std::vector<double> ParameterFamily::center() const {
    std::vector<double> c(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) c[i] = 0.5 * (lo[i] + hi[i]);
    return c;
}

MeasureResult wilson_interval(long hits, long samples) {
    MeasureResult r;
    r.hits = hits;
    r.samples = samples;
    if (samples <= 0) return r;
    const double z = 1.959963984540054;
    const double nn = static_cast<double>(samples);
    const double ph = hits / nn;
    const double den = 1 + z * z / nn;
    const double mid = (ph + z * z / (2 * nn)) / den;
    const double half = z * std::sqrt(ph * (1 - ph) / nn + z * z / (4 * nn * nn)) / den;
    r.fraction = ph;
    // The Wilson interval touches the boundary exactly when all or no samples hit.
    r.ci_lo = hits == 0 ? 0.0 : std::max(0.0, mid - half);
    r.ci_hi = hits == samples ? 1.0 : std::min(1.0, mid + half);
    return r;
}

MeasureResult resonant_measure_mc(const ParameterFamily& fam, const ResonanceQuery& q, long samples,
                                  std::uint64_t seed) {
    return union_measure_mc(fam, {q}, samples, seed);
}

MeasureResult union_measure_mc(const ParameterFamily& fam, const std::vector<ResonanceQuery>& qs, long samples,
                               std::uint64_t seed) {
    if (samples <= 0) throw std::invalid_argument("measure: samples must be positive");
    std::vector<double> gaps;
    for (const auto& q : qs) gaps.push_back(q.gap());
    long hits = sharded_count(samples, seed, [&](long cnt, std::uint64_t s) {
        std::mt19937_64 rng(s);
        long h = 0;
        for (long i = 0; i < cnt; ++i) {
            const FrequencySet f = fam.at(sample_box(fam, rng));
            for (std::size_t j = 0; j < qs.size(); ++j)
                if (std::abs(small_divisor(qs[j], f).value) < gaps[j]) {
                    ++h;
                    break;
                }
        }
        return h;
    });
    return wilson_interval(hits, samples);
}

double strip_bound(const ParameterFamily& fam, const ResonanceQuery& q) {
    const DivisorValue d = small_divisor(q, fam.at(fam.center()));
    double best = 0;
    for (std::size_t i = 0; i < fam.lo.size() && i < d.dxi.size(); ++i)
        best = std::max(best, std::abs(d.dxi[i]) * (fam.hi[i] - fam.lo[i]));
    if (best == 0) return 1.0;
    return std::min(1.0, 2.0 * q.gap() / best);
}

std::vector<ResonanceQuery> nonempty_catalog(const ParameterFamily& fam, int Kmax, int Ncut, int M, double tau,
                                             double eta, GapForm form) {
    const std::vector<double> c = fam.center();
    const FrequencySet f = fam.at(c);
    const int L = M + 2;
    std::vector<ResonanceQuery> out;
    ResonanceQuery q;
    q.tau = tau;
    q.eta = eta;
    q.M = M;
    q.Ncut = Ncut;
    q.form = form;
    const auto ks = lattice_ball(f.n(), Kmax);
    const auto lows = lattice_ball(Ncut, L);
    auto tails = tail_patterns(Ncut, f.J());
    tails.insert(tails.begin(), std::vector<std::pair<int, int>>{});
    for (const auto& k : ks)
        for (const auto& lt : lows)
            for (const auto& pat : tails) {
                std::vector<int> l(f.J(), 0);
                std::copy(lt.begin(), lt.end(), l.begin());
                int mag = l1(lt);
                for (auto [j, v] : pat) {
                    l[j] = v;
                    mag += std::abs(v);
                }
                if (mag > L || !canonical(k, l)) continue;
                q.k = k;
                q.l = l;
                const DivisorValue d = small_divisor(q, f);
                double spread = 0;
                for (std::size_t i = 0; i < d.dxi.size() && i < fam.lo.size(); ++i)
                    spread += 0.5 * std::abs(d.dxi[i]) * (fam.hi[i] - fam.lo[i]);
                if (std::abs(d.value) < spread + q.gap()) out.push_back(q);
            }
    return out;
}

double count_A(int kabs, int ltilde_abs, int N, int j0, const FrequencySet& f) {
    const double inner = (4.0 / f.c1) * ((kabs + 1.0) * (omega_l1(f) + 1.0) + f.c2 * j0 * double(N) * N + 1.0) + 1.0;
    return std::pow(2.0 * N + 1.0, ltilde_abs) * inner * inner;
}

CountBound count_bound(const FrequencySet& f, int kabs, int ltilde_abs, int K, int Ncut, int M, double tau,
                       double eta_tilde) {
    CountBound r;
    const int j0 = M + 2;
    r.A = count_A(kabs, ltilde_abs, Ncut, j0, f);
    r.A_int = r.A >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(std::ceil(r.A));
    for (const auto& k : lattice_ball(f.n(), K)) {
        const int ka = l1(k);
        for (int lt = 0; lt <= M + 2; ++lt) {
            const double C = Ncut <= 1 ? 1.0 : std::pow(double(Ncut), (lt + 4.0) * (lt + 4.0));
            r.union_bound += 4.0 * eta_tilde * count_A(ka, lt, Ncut, j0, f) / (std::pow(4.0, M) * std::pow(ka + 1.0, tau) * C);
        }
    }
    return r;
}

}  // namespace kamstab
