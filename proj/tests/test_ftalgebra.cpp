#include "oracles.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <numeric>
#include <random>

using namespace kamstab;

namespace {

const cplx I(0, 1);

RandomPolyOptions opts(int terms, int maxw, int maxk, bool jets = true) {
    RandomPolyOptions o;
    o.terms = terms;
    o.max_weight = maxw;
    o.max_k = maxk;
    o.jets = jets;
    return o;
}

double max_abs_coef(const Poly& W) {
    double m = 0;
    for (std::size_t i = 0; i < W.size(); ++i) {
        m = std::max(m, std::abs(W.val(i)));
        for (int d = 0; d < W.m(); ++d) m = std::max(m, std::abs(W.jet(i)[d]));
    }
    return m;
}

}  // namespace

TEST(Bracket, NormalModeAgainstLinearMonomial) {
    TruncationSpec t{0, 1, 0, 4, 0};
    Poly U = monomial(t, {}, {}, {1}, {1}, 1.0);
    Poly V = monomial(t, {}, {}, {1}, {0}, 1.0);
    Poly B = poisson_bracket(U, V, t);
    ASSERT_EQ(B.size(), 1u);
    EXPECT_EQ(B.val(0), -I);
    EXPECT_EQ(B.key(0), make_index(t, {}, {}, {1}, {0}));
}

TEST(Bracket, ActionAgainstAngleExponential) {
    TruncationSpec t{1, 0, 2, 4, 0};
    Poly B = poisson_bracket(monomial(t, {0}, {1}, {}, {}, 1.0), monomial(t, {1}, {0}, {}, {}, 1.0), t);
    ASSERT_EQ(B.size(), 1u);
    EXPECT_EQ(B.val(0), -I);
    EXPECT_EQ(B.key(0).k(0), 1);
}

TEST(Bracket, MatchesTermByTermDifferentiation) {
    std::mt19937_64 rng(11);
    TruncationSpec t{2, 2, 12, 14, 2};
    for (int rep = 0; rep < 40; ++rep) {
        Poly U = random_poly(t, opts(6, 3, 2), rng);
        Poly V = random_poly(t, opts(6, 3, 2), rng);
        Poly B = poisson_bracket(U, V, t);
        EXPECT_EQ(B.truncation_mass(), 0.0);
        EXPECT_LE(oracle::max_diff(oracle::bracket(oracle::from_poly(U), oracle::from_poly(V)), B), 1e-13);
    }
}

TEST(Bracket, DroppedTermsAreCountedAsTruncationMass) {
    // {e^{ix}, 3 e^{ix} y} = 3i e^{2ix} lies outside |k| <= 1
    TruncationSpec t{1, 0, 1, 2, 0};
    Poly U = monomial(t, {1}, {0}, {}, {}, 1.0);
    Poly V = monomial(t, {1}, {1}, {}, {}, 3.0);
    Poly B = poisson_bracket(U, V, t);
    EXPECT_TRUE(B.empty());
    EXPECT_DOUBLE_EQ(B.truncation_mass(), 3.0);
}

TEST(Bracket, IncompatibleTruncationsRejected) {
    TruncationSpec a{1, 1, 2, 4, 0}, b{1, 2, 2, 4, 0};
    EXPECT_THROW(poisson_bracket(Poly(a), Poly(b), a), std::invalid_argument);
}

TEST(BracketIdentities, AntisymmetryJacobiLeibniz) {
    std::mt19937_64 rng(5);
    TruncationSpec t{2, 2, 12, 14, 1};
    for (int rep = 0; rep < 50; ++rep) {
        Poly U = random_poly(t, opts(5, 3, 2), rng), V = random_poly(t, opts(5, 3, 2), rng), W = random_poly(t, opts(5, 3, 2), rng);
        Poly UV = poisson_bracket(U, V, t);
        EXPECT_LE(max_abs_coef(poly_add(UV, poisson_bracket(V, U, t))), 1e-12);
        Poly jac = poly_add(poly_add(poisson_bracket(U, poisson_bracket(V, W, t), t), poisson_bracket(V, poisson_bracket(W, U, t), t)),
                            poisson_bracket(W, UV, t));
        EXPECT_LE(max_abs_coef(jac), 1e-12);
        Poly l = poisson_bracket(U, poly_mul(V, W, t), t);
        Poly r = poly_add(poly_mul(UV, W, t), poly_mul(V, poisson_bracket(U, W, t), t));
        EXPECT_LE(max_abs_coef(poly_sub(l, r)), 1e-12);
    }
}

TEST(BracketIdentities, ExactRationalJacobi) {
    std::mt19937_64 rng(3);
    TruncationSpec t{1, 2, 6, 10, 1};
    RandomPolyOptions o = opts(4, 3, 2);
    o.integer_coefficients = true;
    for (int rep = 0; rep < 20; ++rep) {
        ExactPoly U = to_exact(random_poly(t, o, rng)), V = to_exact(random_poly(t, o, rng)), W = to_exact(random_poly(t, o, rng));
        ExactPoly j = poly_add(poly_add(poisson_bracket(U, poisson_bracket(V, W, t), t), poisson_bracket(V, poisson_bracket(W, U, t), t)),
                               poisson_bracket(W, poisson_bracket(U, V, t), t));
        EXPECT_TRUE(j.empty());
    }
}

TEST(BracketIdentities, FlippedAngleTermBreaksJacobi) {
    std::mt19937_64 rng(3);
    TruncationSpec t{1, 1, 6, 10, 0};
    double worst = 0;
    for (int rep = 0; rep < 10; ++rep) {
        Poly U = random_poly(t, opts(4, 3, 2, false), rng), V = random_poly(t, opts(4, 3, 2, false), rng),
             W = random_poly(t, opts(4, 3, 2, false), rng);
        auto br = [&](const Poly& a, const Poly& b) { return poisson_bracket(a, b, t, BracketVariant::FlippedAngleTerm); };
        worst = std::max(worst, max_abs_coef(poly_add(poly_add(br(U, br(V, W)), br(V, br(W, U))), br(W, br(U, V)))));
    }
    EXPECT_GT(worst, 1e-3);
}

TEST(VectorField, NormalRotation) {
    TruncationSpec t{0, 1, 0, 4, 0};
    VectorField X = vector_field(monomial(t, {}, {}, {1}, {1}, 2.5));
    ASSERT_EQ(X.zq.size(), 1u);
    EXPECT_EQ(oracle::max_diff(oracle::from_poly(monomial(t, {}, {}, {1}, {0}, 2.5 * I)), X.zq[0]), 0.0);
}

TEST(VectorField, ActionAndAngleDerivatives) {
    TruncationSpec t{1, 0, 2, 4, 0};
    VectorField X = vector_field(monomial(t, {0}, {1}, {}, {}, 1.0));
    EXPECT_EQ(X.Wy[0].size(), 1u);
    EXPECT_EQ(X.Wy[0].val(0), cplx(1));
    EXPECT_TRUE(X.Wx[0].empty());
    VectorField E = vector_field(monomial(t, {2}, {0}, {}, {}, 1.0));
    ASSERT_EQ(E.Wx[0].size(), 1u);
    EXPECT_EQ(E.Wx[0].val(0), 2.0 * I);
}

TEST(LieTransform, ZeroGeneratorIsIdentity) {
    std::mt19937_64 rng(1);
    TruncationSpec t{1, 2, 4, 4, 1};
    Poly H = random_poly(t, opts(8, 4, 2), rng);
    EXPECT_EQ(lie_transform(H, Poly(t), t, 10).value, H);
}

TEST(LieTransform, KillsAngleTermsExactly) {
    TruncationSpec t{1, 0, 2, 4, 0};
    const double eps = 0.01;
    Poly H = poly_add(monomial(t, {0}, {1}, {}, {}, 1.0),
                      poly_add(monomial(t, {1}, {0}, {}, {}, eps), monomial(t, {-1}, {0}, {}, {}, eps)));
    Poly F = poly_add(monomial(t, {1}, {0}, {}, {}, -I * eps), monomial(t, {-1}, {0}, {}, {}, I * eps));
    Poly out = lie_transform(H, F, t, 10).value;
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out.key(0), make_index(t, {0}, {1}, {}, {}));
    EXPECT_NEAR(std::abs(out.val(0) - 1.0), 0.0, 1e-15);
}

TEST(LieTransform, QuadraticGeneratorMatchesMatrixExponential) {
    TruncationSpec t{0, 1, 0, 2, 0};
    const cplx alpha(0.3, 0.1), beta(-0.2, 0.25);
    // F = (alpha q^2 + beta qb^2) / 2, H = q qb
    Poly F = poly_add(monomial(t, {}, {}, {2}, {0}, alpha / 2.0), monomial(t, {}, {}, {0}, {2}, beta / 2.0));
    Poly H = monomial(t, {}, {}, {1}, {1}, 1.0);
    Poly out = lie_transform(H, F, t, 60).value;
    // q' = i F_qb = i beta qb, qb' = -i F_q = -i alpha q
    Eigen::Matrix2cd A;
    A << 0, I * beta, -I * alpha, 0;
    Eigen::Matrix2cd P = A.exp();
    auto c = [&](int b, int cc) { return out.coeff(make_index(t, {}, {}, {b}, {cc})); };
    EXPECT_NEAR(std::abs(c(2, 0) - P(0, 0) * P(1, 0)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(c(1, 1) - (P(0, 0) * P(1, 1) + P(0, 1) * P(1, 0))), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(c(0, 2) - P(0, 1) * P(1, 1)), 0.0, 1e-14);
}

TEST(LieTransform, ReportsPerOrderNorms) {
    TruncationSpec t{0, 1, 0, 2, 0};
    Poly F = monomial(t, {}, {}, {2}, {0}, 0.1);
    auto r = lie_transform(monomial(t, {}, {}, {1}, {1}, 1.0), F, t, 5);
    ASSERT_GE(r.order_norms.size(), 2u);
    EXPECT_DOUBLE_EQ(r.order_norms[0], 1.0);
    EXPECT_FALSE(r.diverging);
}

TEST(SymmetricApply, TwoPermutationAverage) {
    TruncationSpec t{0, 2, 0, 4, 0};
    Poly W = monomial(t, {}, {}, {1, 1}, {0, 0}, 1.0);
    std::vector<double> ea{1, 0, 0, 0}, eb{0, 1, 0, 0};
    EXPECT_DOUBLE_EQ(symmetric_apply(W, {ea, eb}).real(), 0.5);
    EXPECT_DOUBLE_EQ(symmetric_apply(W, {ea, ea}).real(), 0.0);
}

TEST(SymmetricApply, DiagonalRestrictionAndPermutationInvariance) {
    std::mt19937_64 rng(9);
    TruncationSpec t{0, 2, 0, 3, 0};
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 10; ++rep) {
        Poly W = random_poly(t, opts(6, 3, 0, false), rng).filter([](const MultiIndex& m) { return m.z_degree() == 3; });
        if (W.empty()) continue;
        std::vector<double> z(4);
        for (auto& v : z) v = u(rng);
        PhasePoint p(0, 2);
        p.q = {z[0], z[1]};
        p.qb = {z[2], z[3]};
        EXPECT_NEAR(std::abs(symmetric_apply(W, {z, z, z}) - evaluate(W, p).val), 0.0, 1e-13);
        std::vector<std::vector<double>> zs(3, std::vector<double>(4));
        for (auto& v : zs)
            for (auto& e : v) e = u(rng);
        const cplx base = symmetric_apply(W, zs);
        std::vector<int> perm{0, 1, 2};
        while (std::next_permutation(perm.begin(), perm.end()))
            EXPECT_NEAR(std::abs(symmetric_apply(W, {zs[perm[0]], zs[perm[1]], zs[perm[2]]}) - base), 0.0, 1e-14);
    }
}

TEST(SymmetricApply, ProductRuleByPermutationAverage) {
    std::mt19937_64 rng(4);
    TruncationSpec t{0, 2, 0, 4, 0};
    std::uniform_real_distribution<double> u(0, 1);
    auto zdeg = [](int h) { return [h](const MultiIndex& m) { return m.z_degree() == h; }; };
    Poly F = random_poly(t, opts(4, 1, 0, false), rng).filter(zdeg(1));
    Poly G = random_poly(t, opts(6, 2, 0, false), rng).filter(zdeg(2));
    ASSERT_FALSE(F.empty());
    ASSERT_FALSE(G.empty());
    std::vector<std::vector<double>> zs(3, std::vector<double>(4));
    for (auto& v : zs)
        for (auto& e : v) e = u(rng);
    std::vector<int> perm{0, 1, 2};
    cplx avg = 0;
    int count = 0;
    do {
        avg += symmetric_apply(F, {zs[perm[0]]}) * symmetric_apply(G, {zs[perm[1]], zs[perm[2]]});
        ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    avg /= double(count);
    EXPECT_NEAR(std::abs(symmetric_apply(poly_mul(F, G, t), zs) - avg), 0.0, 1e-14);
}

TEST(SymmetricApply, RejectsMixedDegree) {
    TruncationSpec t{0, 1, 0, 4, 0};
    Poly W = poly_add(monomial(t, {}, {}, {1}, {0}, 1.0), monomial(t, {}, {}, {1}, {1}, 1.0));
    EXPECT_THROW(symmetric_apply(W, {{1, 0}}), std::invalid_argument);
}

TEST(DegreeSplit, LowHighThreshold) {
    TruncationSpec t{1, 2, 2, 4, 0};
    Poly W = poly_add(monomial(t, {0}, {1}, {0, 0}, {0, 0}, 1.0), monomial(t, {0}, {0}, {1, 1}, {1, 0}, 1.0));
    auto parts = degree_split(W, SplitRule::LowHigh, 2);
    EXPECT_EQ(parts["low"].size(), 1u);
    EXPECT_EQ(parts["high"].size(), 1u);
    EXPECT_EQ(parts["high"].key(0).z_degree(), 3);
}

TEST(DegreeSplit, AngleOnlyGoesToX) {
    TruncationSpec t{1, 1, 2, 4, 0};
    auto parts = degree_split(monomial(t, {1}, {0}, {0}, {0}, 1.0), SplitRule::Kuksin);
    for (const auto& [name, P] : parts) EXPECT_EQ(P.size(), name == "x" ? 1u : 0u) << name;
}

TEST(DegreeSplit, PartsArePartition) {
    std::mt19937_64 rng(2);
    TruncationSpec t{1, 3, 3, 6, 1};
    for (auto rule : {SplitRule::LowHigh, SplitRule::Kuksin, SplitRule::Tail}) {
        Poly W = random_poly(t, opts(30, 6, 2), rng);
        auto parts = degree_split(W, rule, 2, 1);
        Poly sum(t);
        std::size_t count = 0;
        for (const auto& [name, P] : parts) {
            sum = poly_add(sum, P);
            count += P.size();
        }
        EXPECT_EQ(count, W.size());
        EXPECT_EQ(oracle::max_diff(oracle::from_poly(W), sum), 0.0);
    }
}

TEST(Evaluate, LinearityAndProducts) {
    std::mt19937_64 rng(8);
    TruncationSpec t{1, 2, 4, 8, 2};
    TruncationSpec t1{1, 0, 2, 4, 0};
    PhasePoint z(1, 0);
    EXPECT_EQ(evaluate(monomial(t1, {1}, {0}, {}, {}, 2.0), z).val, cplx(2));
    for (int rep = 0; rep < 10; ++rep) {
        Poly U = random_poly(t, opts(5, 4, 2), rng), V = random_poly(t, opts(5, 4, 2), rng);
        PhasePoint p(1, 2);
        p.x[0] = 0.7;
        p.y[0] = 0.2;
        p.q = {cplx(0.3, 0.1), cplx(-0.2, 0.4)};
        p.qb = {cplx(0.1, -0.3), cplx(0.5, 0.2)};
        JetValue a = evaluate(U, p), b = evaluate(V, p);
        JetValue s = evaluate(poly_add(U, V), p), m = evaluate(poly_mul(U, V, t), p);
        EXPECT_NEAR(std::abs(s.val - (a.val + b.val)), 0, 1e-14);
        EXPECT_NEAR(std::abs(m.val - a.val * b.val), 0, 1e-13);
        for (int d = 0; d < 2; ++d) EXPECT_NEAR(std::abs(m.dxi[d] - (a.dxi[d] * b.val + a.val * b.dxi[d])), 0, 1e-13);
    }
}

TEST(Serialization, BitExactRoundTrip) {
    std::mt19937_64 rng(12);
    TruncationSpec t{2, 3, 5, 6, 2};
    for (int rep = 0; rep < 10; ++rep) {
        Poly W = random_poly(t, opts(20, 6, 3), rng);
        W.set_real_flag(rep % 2 == 0);
        Poly back = from_text(to_text(W));
        EXPECT_EQ(back, W);
        EXPECT_EQ(back.real_flag(), W.real_flag());
    }
}

TEST(Truncation, PolynomialsRespectCutoffs) {
    std::mt19937_64 rng(6);
    TruncationSpec t{1, 2, 2, 4, 0};
    Poly U = random_poly(t, opts(10, 4, 2, false), rng), V = random_poly(t, opts(10, 4, 2, false), rng);
    Poly P = poly_mul(U, V, t);
    for (std::size_t i = 0; i < P.size(); ++i) {
        EXPECT_LE(P.key(i).k_abs(), t.K);
        EXPECT_LE(P.key(i).weight(), t.D);
    }
}

TEST(FlowConsistency, TimeDerivativeIsBracket) {
    std::mt19937_64 rng(21);
    TruncationSpec t{1, 1, 6, 8, 0};
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    for (int rep = 0; rep < 10; ++rep) {
        Poly G = random_poly(t, opts(4, 3, 2, false), rng), F = random_poly(t, opts(4, 3, 2, false), rng);
        PhasePoint p(1, 1);
        p.x[0] = 2 * u(rng);
        p.y[0] = u(rng);
        p.q[0] = cplx(u(rng), u(rng));
        p.qb[0] = std::conj(p.q[0]);
        const double h = 1e-4;
        const cplx fd = (evaluate(G, flow(F, p, h)).val - evaluate(G, flow(F, p, -h)).val) / (2 * h);
        const cplx ex = evaluate(poisson_bracket(G, F, t), p).val;
        EXPECT_LE(std::abs(fd - ex), 1e-6 * std::max(std::abs(ex), 1e-3));
    }
}

TEST(Flow, NormalFormReproducesRotation) {
    // q' = i Omega q for N = omega y + Omega q qb
    TruncationSpec t{1, 1, 0, 2, 0};
    FrequencySet f;
    f.omega = {1.3};
    f.Omega = {2.7};
    f.domega = {{}};
    f.dOmega = {{}};
    Poly N = f.integrable_part(t);
    PhasePoint p(1, 1);
    p.x[0] = 0.1;
    p.q[0] = cplx(0.2, 0.1);
    p.qb[0] = std::conj(p.q[0]);
    PhasePoint e = flow(N, p, 0.5);
    EXPECT_NEAR(std::abs(e.q[0] - p.q[0] * std::exp(I * 2.7 * 0.5)), 0, 1e-11);
    EXPECT_NEAR(std::abs(e.x[0] - (0.1 + 1.3 * 0.5)), 0, 1e-11);
}

TEST(Reality, RealFlagMatchesConjugateSymmetry) {
    TruncationSpec t{1, 1, 2, 4, 0};
    Poly W = poly_add(monomial(t, {1}, {0}, {1}, {0}, cplx(1, 2)), monomial(t, {-1}, {0}, {0}, {1}, cplx(1, -2)));
    EXPECT_EQ(W.reality_defect(), 0.0);
    Poly B = poly_add(monomial(t, {1}, {0}, {1}, {0}, cplx(1, 2)), monomial(t, {-1}, {0}, {0}, {1}, cplx(1, 2)));
    EXPECT_GT(B.reality_defect(), 1.0);
}
