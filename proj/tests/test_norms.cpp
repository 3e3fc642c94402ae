#include "experiments.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>

using namespace kamstab;

namespace {

using Tuple = std::vector<std::vector<double>>;

RandomPolyOptions opts(int terms, int maxw, int maxk, bool jets = true) {
    RandomPolyOptions o;
    o.terms = terms;
    o.max_weight = maxw;
    o.max_k = maxk;
    o.jets = jets;
    return o;
}

/// sup_j sum (|c| + |d_j c|) e^{|k|s} r^{2|a|}, grouped by (a,b,c), summed over groups.
double resum(const Poly& W, double s, double r) {
    std::map<std::vector<int>, std::vector<double>> groups;
    const int n = W.trunc().n;
    for (std::size_t i = 0; i < W.size(); ++i) {
        const auto& key = W.key(i);
        std::vector<int> g;
        int kabs = 0, aabs = 0;
        for (int t = 0; t < key.size(); ++t) (t < n ? kabs += std::abs(key.raw(t)) : (g.push_back(key.raw(t)), 0));
        for (int t = n; t < 2 * n; ++t) aabs += key.raw(t);
        auto& v = groups[g];
        v.resize(std::max(1, W.m()), 0.0);
        const double wgt = std::exp(kabs * s) * std::pow(r, 2 * aabs);
        for (int d = 0; d < std::max(1, W.m()); ++d)
            v[d] += (std::abs(W.val(i)) + (W.m() ? std::abs(W.jet(i)[d]) : 0.0)) * wgt;
    }
    double tot = 0;
    for (auto& [g, v] : groups) tot += *std::max_element(v.begin(), v.end());
    return tot;
}

double wnorm(const std::vector<double>& v, int J, const DomainSpec& d, double w) {
    double a = 0, b = 0;
    for (int j = 0; j < J; ++j) {
        const double f = std::pow(d.label(j), w);
        a += v[j] * v[j] * f * f;
        b += v[J + j] * v[J + j] * f * f;
    }
    return std::sqrt(a) + std::sqrt(b);
}

/// Multistart coordinate ascent of a scale-invariant quotient over nonnegative tuples.
double maximize(int count, int dim, const std::function<double(const Tuple&)>& f, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    double best = 0;
    // coordinate tuples and the all-ones tuple
    std::vector<int> idx(count, 0);
    while (true) {
        Tuple zs(count, std::vector<double>(dim, 0.0));
        for (int i = 0; i < count; ++i) zs[i][idx[i]] = 1;
        best = std::max(best, f(zs));
        int p = 0;
        while (p < count && ++idx[p] == dim) idx[p++] = 0;
        if (p == count) break;
    }
    best = std::max(best, f(Tuple(count, std::vector<double>(dim, 1.0))));
    for (int start = 0; start < 200; ++start) {
        Tuple zs(count, std::vector<double>(dim));
        for (auto& z : zs)
            for (auto& e : z) e = u(rng);
        double cur = f(zs);
        for (double step = 0.5; step > 1e-6; step *= 0.6) {
            bool moved = true;
            while (moved) {
                moved = false;
                for (int i = 0; i < count; ++i)
                    for (int t = 0; t < dim; ++t)
                        for (double sgn : {1.0, -1.0}) {
                            Tuple trial = zs;
                            trial[i][t] = std::max(0.0, trial[i][t] + sgn * step);
                            const double v = f(trial);
                            if (v > cur) {
                                cur = v;
                                zs = std::move(trial);
                                moved = true;
                            }
                        }
            }
        }
        best = std::max(best, cur);
    }
    return best;
}

}  // namespace

TEST(AngleNorm, SingleExponential) {
    TruncationSpec t{1, 0, 2, 0, 0};
    EXPECT_NEAR(angle_norm(monomial(t, {1}, {0}, {}, {}, 2.0), 0.5), 2 * std::exp(0.5), 1e-14);
    EXPECT_NEAR(angle_norm(monomial(t, {1}, {0}, {}, {}, 2.0), 0.5), 3.29744, 1e-5);
    EXPECT_EQ(angle_norm(Poly(t), 0.5), 0.0);
}

TEST(AngleNorm, MatchesResummation) {
    std::mt19937_64 rng(1);
    TruncationSpec t{2, 0, 4, 0, 3};
    for (int rep = 0; rep < 20; ++rep) {
        Poly W = random_poly(t, opts(5, 0, 3), rng);
        EXPECT_NEAR(angle_norm(W, 0.7), resum(W, 0.7, 1.0), 1e-14 * std::max(1.0, resum(W, 0.7, 1.0)));
    }
}

TEST(AngleNorm, RejectsActionContent) {
    TruncationSpec t{1, 0, 2, 2, 0};
    EXPECT_THROW(angle_norm(monomial(t, {0}, {1}, {}, {}, 1.0), 0.5), std::invalid_argument);
}

TEST(XyNorm, Examples) {
    TruncationSpec t{1, 0, 2, 4, 0};
    EXPECT_DOUBLE_EQ(xy_norm(monomial(t, {0}, {1}, {}, {}, 1.0), 0.3, 0.5), 0.25);
    EXPECT_NEAR(xy_norm(monomial(t, {1}, {2}, {}, {}, 1.0), 1.0, 1.0), std::exp(1.0), 1e-15);
    TruncationSpec tz{1, 1, 2, 4, 0};
    EXPECT_THROW(xy_norm(monomial(tz, {0}, {0}, {1}, {0}, 1.0), 1, 1), std::invalid_argument);
}

TEST(XyNorm, MatchesResummation) {
    std::mt19937_64 rng(2);
    TruncationSpec t{2, 0, 4, 6, 2};
    for (int rep = 0; rep < 20; ++rep) {
        Poly W = random_poly(t, opts(6, 6, 3), rng);
        EXPECT_NEAR(xy_norm(W, 0.4, 0.6), resum(W, 0.4, 0.6), 1e-14 * std::max(1.0, resum(W, 0.4, 0.6)));
    }
}

TEST(Majorant, SingleTerm) {
    TruncationSpec t{1, 1, 2, 4, 0};
    Poly M = majorant(monomial(t, {0}, {1}, {1}, {0}, -3.0), 0.0, 1.0);
    ASSERT_EQ(M.size(), 1u);
    EXPECT_EQ(M.key(0), make_index(t, {0}, {0}, {1}, {0}));
    EXPECT_EQ(M.val(0), cplx(3.0));
}

TEST(Majorant, PerMonomialOracleAndTriangleInequality) {
    std::mt19937_64 rng(3);
    TruncationSpec t{1, 2, 3, 5, 1};
    for (int rep = 0; rep < 20; ++rep) {
        Poly U = random_poly(t, opts(8, 5, 3), rng), V = random_poly(t, opts(8, 5, 3), rng);
        Poly MU = majorant(U, 0.5, 0.7);
        for (std::size_t i = 0; i < MU.size(); ++i) {
            const MultiIndex z = MU.key(i);
            Poly part = U.filter([&](const MultiIndex& m) {
                for (int j = 0; j < 2; ++j)
                    if (m.b(j) != z.b(j) || m.c(j) != z.c(j)) return false;
                return true;
            });
            EXPECT_NEAR(MU.val(i).real(), resum(part, 0.5, 0.7), 1e-13);
        }
        Poly MS = majorant(poly_add(U, V), 0.5, 0.7), MV = majorant(V, 0.5, 0.7);
        for (std::size_t i = 0; i < MS.size(); ++i)
            EXPECT_LE(MS.val(i).real(), (MU.coeff(MS.key(i)) + MV.coeff(MS.key(i))).real() * (1 + 1e-15));
    }
}

TEST(ZtameNorm, DiagonalQuadratic) {
    TruncationSpec t{0, 1, 0, 2, 0};
    DomainSpec d{0.5, 0.7, 2.0, {}};
    NormEstimate e = ztame_norm(monomial(t, {}, {}, {1}, {1}, -3.0), d);
    EXPECT_NEAR(e.upper, 3 * 0.7, 1e-14);
    EXPECT_NEAR(e.lower, 3 * 0.7, 1e-14);
    NormEstimate z = ztame_norm(Poly(t), d);
    EXPECT_EQ(z.upper, 0.0);
    EXPECT_EQ(z.lower, 0.0);
}

TEST(ZtameNorm, RejectsInhomogeneous) {
    TruncationSpec t{0, 1, 0, 4, 0};
    Poly W = poly_add(monomial(t, {}, {}, {1}, {1}, 1.0), monomial(t, {}, {}, {2}, {1}, 1.0));
    EXPECT_THROW(ztame_norm(W, DomainSpec{}), std::invalid_argument);
}

TEST(ZtameNorm, CubicBracketsAscentOracle) {
    std::mt19937_64 rng(4);
    TruncationSpec t{0, 2, 0, 3, 0};
    DomainSpec d{0.5, 0.8, 2.0, {2, 3}};
    for (int rep = 0; rep < 4; ++rep) {
        Poly W = random_poly(t, opts(5, 3, 0, false), rng).filter([](const MultiIndex& m) { return m.z_degree() == 3; });
        if (W.empty()) continue;
        Poly M = majorant(W, d.s, d.r);
        std::vector<Poly> grads;
        for (int j = 0; j < 2; ++j) grads.push_back(derivative(M, Var::Q, j));
        for (int j = 0; j < 2; ++j) grads.push_back(derivative(M, Var::QBar, j));
        auto quotient = [&](const Tuple& zs) {
            std::vector<double> G(4);
            for (int s = 0; s < 4; ++s) G[s] = grads[s].empty() ? 0.0 : symmetric_apply(grads[s], zs).real();
            const double n1a = wnorm(zs[0], 2, d, 1), n1b = wnorm(zs[1], 2, d, 1);
            const double gauge = 0.5 * (wnorm(zs[0], 2, d, d.p) * n1b + n1a * wnorm(zs[1], 2, d, d.p));
            if (gauge <= 0) return 0.0;
            return std::max(wnorm(G, 2, d, d.p) / gauge, wnorm(G, 2, d, 1) / (n1a * n1b));
        };
        const double oracle = maximize(2, 4, quotient, 77 + rep) * d.r * d.r;
        SamplingOptions so;
        so.seed = 5 + rep;
        NormEstimate e = ztame_norm(W, d, so);
        EXPECT_GE(e.upper, oracle * (1 - 1e-12));
        EXPECT_GE(e.lower, 0.99 * oracle);
        EXPECT_LE(e.lower, e.upper * (1 + 1e-9));
        EXPECT_GE(e.samples, 1000);
    }
}

TEST(TangentNorm, ActionAndZero) {
    TruncationSpec t{1, 1, 2, 4, 0};
    DomainSpec d{0.5, 0.6, 1.0, {}};
    NormEstimate e = tangent_norm(monomial(t, {0}, {1}, {0}, {0}, 1.0), Var::Y, d);
    EXPECT_DOUBLE_EQ(e.upper, 1.0);
    EXPECT_DOUBLE_EQ(e.lower, 1.0);
    EXPECT_EQ(tangent_norm(Poly(t), Var::X, d).upper, 0.0);
    EXPECT_THROW(tangent_norm(Poly(t), Var::Q, d), std::invalid_argument);
}

TEST(TangentNorm, AngleDerivativeBracketsGridOracle) {
    TruncationSpec t{1, 1, 2, 4, 0};
    DomainSpec d{0.5, 0.6, 1.0, {}};
    NormEstimate e = tangent_norm(monomial(t, {1}, {0}, {1}, {1}, 1.0), Var::X, d);
    // majorant of W_x is e^s q qb; the symmetric form (a1 b2 + a2 b1)/2 over (|a|+|b|)(|a'|+|b'|)
    double grid = 0;
    const int G = 100;
    for (int i = 0; i <= G; ++i)
        for (int j = 0; j <= G; ++j) {
            const double a1 = double(i) / G, a2 = double(j) / G;
            grid = std::max(grid, 0.5 * (a1 * (1 - a2) + a2 * (1 - a1)));
        }
    grid *= std::exp(d.s) * d.r * d.r;
    EXPECT_GE(e.upper, grid * (1 - 1e-12));
    EXPECT_LE(e.lower, grid * (1 + 1e-12));
    EXPECT_GE(e.lower, 0.99 * grid);
}

TEST(VfTameNorm, IntegrableExample) {
    TruncationSpec t{1, 1, 0, 2, 0};
    DomainSpec d{0.5, 1.0, 1.0, {}};
    Poly N = poly_add(monomial(t, {0}, {1}, {0}, {0}, 1.0), monomial(t, {0}, {0}, {1}, {1}, 1.0));
    NormEstimate e = vf_tame_norm(N, d);
    EXPECT_LE(e.lower, 2.0 + 1e-12);
    EXPECT_GE(e.upper, 2.0 - 1e-12);
    EXPECT_NEAR(e.upper, 2.0, 1e-12);
    EXPECT_EQ(vf_tame_norm(Poly(t), d).upper, 0.0);
}

TEST(VfTameNorm, Homogeneity) {
    std::mt19937_64 rng(6);
    TruncationSpec t{1, 2, 2, 4, 0};
    DomainSpec d{0.5, 0.7, 1.5, {}};
    Poly W = random_poly(t, opts(8, 4, 2, false), rng);
    const cplx c(-1.5, 2.0);
    NormEstimate a = vf_tame_norm(W, d), b = vf_tame_norm(poly_scale(W, c), d);
    EXPECT_NEAR(b.upper, std::abs(c) * a.upper, 1e-12 * b.upper);
    EXPECT_NEAR(b.lower, std::abs(c) * a.lower, 1e-12 * b.upper);
}

TEST(WeightedSupNorm, ConstantAndZeroFields) {
    TruncationSpec t{1, 1, 0, 2, 0};
    DomainSpec d{0.5, 0.6, 1.0, {}};
    EXPECT_DOUBLE_EQ(weighted_sup_norm(vector_field(monomial(t, {0}, {1}, {0}, {0}, 1.0)), d, 50, 1), 1.0);
    EXPECT_EQ(weighted_sup_norm(vector_field(Poly(t)), d, 50, 1), 0.0);
}

TEST(WeightedSupNorm, CubicFieldAgainstGrid) {
    TruncationSpec t{0, 2, 0, 3, 0};
    DomainSpec d{0.5, 0.5, 1.0, {}};
    const double c = 1.3;
    Poly W = monomial(t, {}, {}, {2, 0}, {0, 1}, c);
    // |qdot_2| = c a^2, |qbdot_1| = 2 c a b with a = |q_1|, b = |qb_2|, weights j^p
    double grid = 0;
    const int G = 400;
    for (int i = 0; i <= G; ++i)
        for (int j = 0; j <= G - i; ++j) {
            const double a = d.r * i / G, b = d.r * j / G / 2.0;
            grid = std::max(grid, (2 * c * a * a + 2 * c * a * b) / d.r);
        }
    const double sampled = weighted_sup_norm(vector_field(W), d, 4000, 3);
    EXPECT_LE(sampled, grid * (1 + 1e-9));
    EXPECT_GE(sampled, 0.5 * grid);
}

TEST(WeightedSupNorm, DominatedByTameNorm) {
    std::mt19937_64 rng(7);
    TruncationSpec t{1, 2, 2, 4, 0};
    DomainSpec d{0.4, 0.6, 1.0, {}};
    for (int rep = 0; rep < 10; ++rep) {
        Poly W = random_poly(t, opts(6, 4, 2, false), rng);
        EXPECT_LE(weighted_sup_norm(vector_field(W), d, 300, rep), vf_tame_norm(W, d).upper * (1 + 1e-12));
    }
}

TEST(GradientDomination, PointwiseBelowTameBound) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    TruncationSpec t{1, 2, 2, 5, 0};
    DomainSpec d{0.5, 0.8, 2.0, {}};
    for (int h = 2; h <= 4; ++h) {
        Poly W = random_poly(t, opts(12, 5, 2, false), rng).filter([h](const MultiIndex& m) { return m.z_degree() == h && m.a_abs() == 0; });
        if (W.empty()) continue;
        const double tame = ztame_norm(W, d).upper / std::pow(d.r, h - 1);
        for (int rep = 0; rep < 50; ++rep) {
            PhasePoint p(1, 2);
            p.x[0] = 6.283 * u(rng);
            std::vector<double> z(4);
            for (int j = 0; j < 2; ++j) {
                z[j] = u(rng);
                z[2 + j] = u(rng);
                p.q[j] = z[j];
                p.qb[j] = z[2 + j];
            }
            std::vector<double> G(4);
            for (int j = 0; j < 2; ++j) {
                G[j] = std::abs(evaluate(derivative(W, Var::Q, j), p).val);
                G[2 + j] = std::abs(evaluate(derivative(W, Var::QBar, j), p).val);
            }
            const double rhs = tame * wnorm(z, 2, d, d.p) * std::pow(wnorm(z, 2, d, 1), std::max(h - 2, 0));
            EXPECT_LE(wnorm(G, 2, d, d.p), rhs * (1 + 1e-12));
        }
    }
}

TEST(Cauchy, ClosedFormExample) {
    TruncationSpec t{1, 0, 2, 2, 0};
    CauchyReport rep = check_cauchy(monomial(t, {1}, {0}, {}, {}, 1.0), 1.0, 0.5, 1.0, 0.5);
    EXPECT_NEAR(rep.lhs_x, std::exp(0.5), 1e-14);
    EXPECT_NEAR(rep.rhs_x, 2.0, 1e-14);
    CauchyReport c = check_cauchy(monomial(t, {0}, {0}, {}, {}, 4.0), 1.0, 0.5, 1.0, 0.5);
    EXPECT_EQ(c.lhs_x, 0.0);
    EXPECT_EQ(c.lhs_y, 0.0);
}

TEST(Cauchy, NonnegativeSlackOnRandomInstances) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    TruncationSpec t{2, 1, 6, 6, 1};
    for (int rep = 0; rep < 100; ++rep) {
        Poly W = random_poly(t, opts(6, 6, 6), rng);
        const double s = 0.2 + u(rng), r = u(rng);
        CauchyReport c = check_cauchy(W, s, s * u(rng), r, r * u(rng));
        EXPECT_GE(c.slack_x(), -1e-15 * c.rhs_x);
        EXPECT_GE(c.slack_y(), -1e-15 * c.rhs_y);
    }
}

TEST(Products, Submultiplicativity) {
    std::mt19937_64 rng(10);
    TruncationSpec tx{2, 0, 8, 0, 2};
    TruncationSpec txy{2, 0, 8, 8, 2};
    for (int rep = 0; rep < 100; ++rep) {
        Poly U = random_poly(tx, opts(4, 0, 3), rng), V = random_poly(tx, opts(4, 0, 3), rng);
        EXPECT_LE(angle_norm(poly_mul(U, V, tx), 0.6), angle_norm(U, 0.6) * angle_norm(V, 0.6) * (1 + 1e-15));
        Poly A = random_poly(txy, opts(4, 4, 3), rng), B = random_poly(txy, opts(4, 4, 3), rng);
        EXPECT_LE(xy_norm(poly_mul(A, B, txy), 0.6, 0.7), xy_norm(A, 0.6, 0.7) * xy_norm(B, 0.6, 0.7) * (1 + 1e-15));
    }
}

TEST(Monotonicity, ShrinkingDomains) {
    std::mt19937_64 rng(11);
    TruncationSpec t{1, 2, 3, 4, 0};
    for (int rep = 0; rep < 10; ++rep) {
        Poly W = random_poly(t, opts(8, 4, 3, false), rng);
        EXPECT_LE(total_xy_norm(W, 0.3, 0.5), total_xy_norm(W, 0.5, 0.5));
        EXPECT_LE(total_xy_norm(W, 0.5, 0.4), total_xy_norm(W, 0.5, 0.5));
        const DomainSpec big{0.5, 0.8, 1.0, {}}, strip{0.3, 0.8, 1.0, {}}, shrunk{0.5, 0.8 * 0.6, 1.0, {}};
        const double ref = vf_tame_norm(W, big).upper;
        EXPECT_LE(vf_tame_norm(W, strip).upper, ref * (1 + 1e-15));
        EXPECT_LE(vf_tame_norm(W, shrunk).upper, 4 * ref);
    }
}

TEST(Gauge, SymmetrizationIdentity) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0, 1);
    DomainSpec d{0.5, 1.0, 2.5, {}};
    for (int m = 1; m <= 5; ++m)
        for (int rep = 0; rep < 20; ++rep) {
            Tuple zs(m, std::vector<double>(6));
            for (auto& z : zs)
                for (auto& e : z) e = u(rng);
            const double exact = gauge_p1(zs, d);
            EXPECT_NEAR(gauge_symmetrized(zs, d), exact, 1e-12 * exact);
        }
}

TEST(Smoothing, TailVectorsGainDecay) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0, 1);
    DomainSpec d{0.5, 1.0, 2.0, {}};
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> z(12, 0.0);
        for (int j = 3; j < 6; ++j) {
            z[j] = u(rng);
            z[6 + j] = u(rng);
        }
        EXPECT_GE(smoothing_gap(z, 3, d), -1e-15);
    }
    std::vector<double> bad(12, 0.0);
    bad[0] = 1;
    EXPECT_THROW(smoothing_gap(bad, 3, d), std::invalid_argument);
}

TEST(DomainSpec, Validation) {
    EXPECT_THROW((DomainSpec{0, 1, 1, {}}).validate(), std::invalid_argument);
    EXPECT_THROW((DomainSpec{1, 1.5, 1, {}}).validate(), std::invalid_argument);
    EXPECT_THROW((DomainSpec{1, 1, 0.5, {}}).validate(), std::invalid_argument);
    EXPECT_NO_THROW((DomainSpec{1, 1, 1, {}}).validate());
}

TEST(NormSuite, BracketConstantStableAcrossSeeds) {
    exp::NormSuiteOptions o;
    o.rows = 100;
    exp::NormSuiteResult r = exp::norm_suite(o);
    EXPECT_TRUE(r.report.ok());
    ASSERT_GT(r.bracket_constant, 0);
    ASSERT_GT(r.bracket_constant_second, 0);
    const double ratio = r.bracket_constant / r.bracket_constant_second;
    EXPECT_LE(std::max(ratio, 1 / ratio), 2.0);
}
