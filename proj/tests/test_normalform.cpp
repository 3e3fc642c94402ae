#include "experiments.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <filesystem>
#include <random>

using namespace kamstab;

namespace {

const cplx I(0, 1);

using oracle::coeff;
using oracle::dense_order2;
using oracle::enumerate_keys;
using oracle::exps;
using oracle::key_of;
using oracle::Layout;
using oracle::unit;

PhasePoint real_point(int n, int J, double ya, double qa, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1, 1);
    PhasePoint p(n, J);
    for (int i = 0; i < n; ++i) {
        p.x[i] = 3 * u(rng);
        p.y[i] = ya * u(rng);
    }
    for (int j = 0; j < J; ++j) {
        p.q[j] = qa * cplx(u(rng), u(rng));
        p.qb[j] = std::conj(p.q[j]);
    }
    return p;
}

NlsConfig desk_config() {
    NlsConfig cfg;
    cfg.J = 5;
    cfg.epsilon = 1e-3;
    cfg.K = 8;
    return cfg;
}

}  // namespace

TEST(Homological, SingleAngleTerm) {
    TruncationSpec t{1, 0, 2, 2, 0};
    FrequencySet f = oracle::identity_freq({1.0}, {}, false);
    const double eps = 0.01;
    Poly R = monomial(t, {1}, {0}, {}, {}, eps);
    HomologicalResult h = solve_homological_order2(f.integrable_part(t), R, f, 0.1, 2);
    ASSERT_EQ(h.F.size(), 1u);
    EXPECT_EQ(h.F.val(0), eps / I);
    EXPECT_TRUE(h.dN.empty());
    EXPECT_EQ(h.residual, 0.0);
}

TEST(Homological, DiagonalTermShiftsFrequency) {
    TruncationSpec t{1, 1, 2, 2, 0};
    FrequencySet f = oracle::identity_freq({1.0}, {2.5}, false);
    Poly R = monomial(t, {0}, {0}, {1}, {1}, 0.03);
    HomologicalResult h = solve_homological_order2(f.integrable_part(t), R, f, 0.1, 2);
    EXPECT_TRUE(h.F.empty());
    EXPECT_DOUBLE_EQ(h.f_plus.Omega[0], 2.53);
    EXPECT_DOUBLE_EQ(h.f_plus.omega[0], 1.0);
}

TEST(Homological, StagedSolveMatchesDenseLinearSystem) {
    std::mt19937_64 rng(4);
    TruncationSpec t{1, 2, 4, 4, 0};
    FrequencySet f = oracle::identity_freq({std::sqrt(2.0)}, {3.3, 7.9}, false);
    Poly N = f.integrable_part(t);
    for (int rep = 0; rep < 5; ++rep) {
        RandomPolyOptions lo;
        lo.terms = 8;
        lo.max_weight = 2;
        lo.max_k = 1;
        lo.jets = false;
        RandomPolyOptions hi = lo;
        hi.min_weight = 3;
        hi.max_weight = 4;
        hi.coef_scale = 0.3;
        Poly R = poly_add(random_poly(t, lo, rng), random_poly(t, hi, rng));
        HomologicalResult h = solve_homological_order2(N, R, f, 1e-3, 2);
        EXPECT_EQ(h.truncation_loss, 0.0);
        EXPECT_LE(h.residual, 1e-10 * h.input_norm);
        auto ref = dense_order2(N, R, t.K);
        double worst = 0;
        for (const auto& [e, v] : ref) {
            const std::size_t idx = h.F.find(key_of(t.n, t.J, e));
            worst = std::max(worst, std::abs(v - (idx == h.F.size() ? cplx{} : h.F.val(idx))));
        }
        EXPECT_LE(worst, 1e-12);
        for (std::size_t i = 0; i < h.F.size(); ++i) EXPECT_TRUE(ref.count(exps(h.F.key(i))));
    }
}

TEST(Homological, JetResidualWithParameterDependence) {
    std::mt19937_64 rng(5);
    TruncationSpec t{1, 2, 4, 4, 3};
    FrequencySet f = oracle::identity_freq({std::sqrt(2.0)}, {3.3, 7.9});
    RandomPolyOptions o;
    o.terms = 12;
    o.max_weight = 4;
    o.max_k = 1;
    o.coef_scale = 0.01;
    Poly R = random_poly(t, o, rng);
    HomologicalResult h = solve_homological_order2(f.integrable_part(t), R, f, 1e-3, 2);
    EXPECT_LE(h.residual, 1e-10 * h.input_norm);
}

TEST(Homological, SmallDivisorIsStructuredError) {
    TruncationSpec t{1, 1, 2, 2, 0};
    FrequencySet f = oracle::identity_freq({1.0}, {2.0}, false);
    Poly R = monomial(t, {2}, {0}, {0}, {1}, 0.01);
    try {
        solve_homological_order2(f.integrable_part(t), R, f, 0.1, 2);
        FAIL() << "expected SmallDivisorError";
    } catch (const SmallDivisorError& e) {
        EXPECT_EQ(e.query.k, std::vector<int>{2});
        EXPECT_EQ(e.query.l, std::vector<int>{-1});
        EXPECT_EQ(e.value, 0.0);
    }
}

TEST(KamStep, NormalHamiltonianIsIdentity) {
    TruncationSpec t{1, 1, 2, 4, 0};
    FrequencySet f = oracle::identity_freq({1.0}, {2.5}, false);
    Poly N = f.integrable_part(t);
    KamStepOutcome o = kam_step(N, Poly(t), f, IterationSchedule{}, 0);
    EXPECT_TRUE(o.F.empty());
    EXPECT_TRUE(o.R.empty());
    EXPECT_EQ(o.N, N);
}

TEST(KamStep, ExactKillOfAngleTerm) {
    TruncationSpec t{1, 0, 2, 2, 0};
    FrequencySet f = oracle::identity_freq({1.0}, {}, false);
    Poly R = poly_add(monomial(t, {1}, {0}, {}, {}, 0.01), monomial(t, {-1}, {0}, {}, {}, 0.01));
    KamStepOutcome o = kam_step(f.integrable_part(t), R, f, IterationSchedule{}, 0);
    EXPECT_LE(low_part(o.R).max_abs(), 1e-12);
}

TEST(KamStep, QuadraticContraction) {
    std::mt19937_64 rng(6);
    TruncationSpec t{1, 2, 4, 4, 0};
    FrequencySet f = oracle::identity_freq({std::sqrt(2.0)}, {3.3, 7.9}, false);
    RandomPolyOptions o;
    o.terms = 10;
    o.max_weight = 4;
    o.max_k = 1;
    o.jets = false;
    Poly R0 = random_poly(t, o, rng);
    R0.set_real_flag(false);
    std::vector<double> le, lr;
    IterationSchedule sch;
    sch.eta = 1e-3;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        KamStepOutcome out = kam_step(f.integrable_part(t), poly_scale(R0, cplx(eps)), f, sch, 0);
        le.push_back(std::log(eps));
        lr.push_back(std::log(out.report.low_after));
    }
    const double slope = (lr[2] - lr[0]) / (le[2] - le[0]);
    EXPECT_NEAR(slope, 2.0, 0.2);
}

TEST(KamIterate, ZeroRemainderTakesNoSteps) {
    TruncationSpec t{1, 1, 2, 4, 0};
    FrequencySet f = oracle::identity_freq({1.0}, {2.5}, false);
    NormalFormState st = kam_iterate(NormalFormState::from_hamiltonian(f, Poly(t)), IterationSchedule{}, 5);
    EXPECT_TRUE(st.kam_reports.empty());
    EXPECT_TRUE(st.log.empty());
}

TEST(KamIterate, DeskInstanceContractsSuperlinearly) {
    NlsConfig cfg = desk_config();
    NlsModel model = build_nls_hamiltonian(cfg);
    ASSERT_EQ(model.freq.J(), 4);
    IterationSchedule sch;
    NormalFormState st = kam_iterate(NormalFormState::from_hamiltonian(model.freq, model.R), sch, 6);
    ASSERT_GE(st.kam_reports.size(), 2u);
    std::vector<double> lows{st.kam_reports[0].low_before};
    for (const auto& r : st.kam_reports) lows.push_back(r.low_after);
    for (std::size_t i = 1; i + 1 < lows.size() && i <= 3; ++i) {
        if (lows[i] < 1e-13) break;
        // log l_{m+1} / log l_m > 1 means faster than geometric
        EXPECT_GT(std::log(lows[i + 1]) / std::log(lows[i]), 1.3) << i;
    }
    EXPECT_LT(low_part(st.R).l1(), 1e-12);
    for (std::size_t i = 0; i < st.R.size(); ++i) {
        if (st.R.key(i).weight() <= 2) {
            EXPECT_LE(std::abs(st.R.val(i)), 1e-12);
        }
    }
}

TEST(KamIterate, PlantedResonanceHaltsAtFirstStep) {
    TruncationSpec t{1, 1, 2, 4, 0};
    FrequencySet f = oracle::identity_freq({1.0}, {2.0}, false);
    Poly R = monomial(t, {2}, {0}, {0}, {1}, 1e-3);
    EXPECT_THROW(kam_iterate(NormalFormState::from_hamiltonian(f, R), IterationSchedule{}, 3), SmallDivisorError);
}

TEST(Schedule, SequencesStayAboveHalf) {
    // s_m = r_m = (1 - tau_m) sigma with tau_m < 1/2, so both stay above sigma / 2
    for (auto [s0, r0] : {std::pair{0.5, 0.5}, std::pair{0.4, 0.6}}) {
        IterationSchedule s;
        s.s0 = s0;
        s.r0 = r0;
        const double sigma = std::min(s0, r0);
        for (int m = 0; m < 40; ++m) {
            EXPECT_GT(s.s_m(m), sigma / 2);
            EXPECT_EQ(s.r_m(m), s.s_m(m));
            EXPECT_LT(s.tau_m(m), 0.5);
            EXPECT_DOUBLE_EQ(s.eta_m(m), s.eta * std::pow(2.0, -m));
            if (s0 == r0) {
                EXPECT_GT(s.s_m(m), s0 / 2);
                EXPECT_GT(s.r_m(m), r0 / 2);
            }
        }
    }
    IterationSchedule s;
    EXPECT_LT(s.eps_m(3), s.eps_m(2));
    EXPECT_DOUBLE_EQ(s.eps_m(0), std::pow(s.eta, 12) * s.epsilon);
}

TEST(PnfSolve, NormalBlockPassesThrough) {
    TruncationSpec t{1, 2, 2, 4, 0};
    FrequencySet f = oracle::identity_freq({1.3}, {4.2, 9.1}, false);
    Poly P = poly_add(monomial(t, {0}, {1}, {1, 0}, {1, 0}, 0.2), monomial(t, {0}, {0}, {1, 1}, {1, 1}, -0.1));
    PnfSolveResult r = pnf_solve(P, f, 0.1, 1, 2, 2);
    EXPECT_TRUE(r.F.empty());
    EXPECT_EQ(r.Zhat, P);
}

TEST(PnfSolve, SingleOffDiagonalTerm) {
    TruncationSpec t{1, 2, 2, 4, 0};
    FrequencySet f = oracle::identity_freq({1.3}, {4.2, 9.1}, false);
    Poly P = monomial(t, {1}, {0}, {2, 0}, {0, 1}, 0.5);
    PnfSolveResult r = pnf_solve(P, f, 0.1, 1, 2, 2);
    ASSERT_EQ(r.F.size(), 1u);
    EXPECT_EQ(r.divisions, 1);
    EXPECT_NEAR(std::abs(r.F.val(0) - 0.5 / (I * (1.3 + 2 * 4.2 - 9.1))), 0, 1e-15);
    EXPECT_TRUE(r.Zhat.empty());
}

TEST(PnfSolve, RandomBlockMatchesDenseSolve) {
    std::mt19937_64 rng(7);
    TruncationSpec t{1, 2, 3, 4, 0};
    FrequencySet f = oracle::identity_freq({std::sqrt(2.0)}, {3.3, 7.9}, false);
    RandomPolyOptions o;
    o.terms = 15;
    o.min_weight = 4;
    o.max_weight = 4;
    o.max_k = 3;
    o.jets = false;
    Poly P = random_poly(t, o, rng);
    PnfSolveResult r = pnf_solve(P, f, 1e-4, 1, 2, 2);
    const Layout L{1, 2};
    const oracle::Dense Nd = oracle::from_poly(f.integrable_part(t)), Pd = oracle::from_poly(P);
    std::vector<std::vector<int>> keys;
    for (const auto& [e, c] : Pd.terms)
        if (!L.normal(e)) keys.push_back(e);
    const int u = static_cast<int>(keys.size());
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(u, u);
    Eigen::VectorXcd b(u);
    for (int col = 0; col < u; ++col) {
        const oracle::Dense img = oracle::bracket(Nd, unit(L, keys[col]));
        for (int row = 0; row < u; ++row) A(row, col) = coeff(img, keys[row]);
        b(col) = -coeff(Pd, keys[col]);
    }
    Eigen::VectorXcd x = A.fullPivLu().solve(b);
    Poly res = poly_add(poisson_bracket(f.integrable_part(t), r.F, t), poly_sub(P, r.Zhat));
    EXPECT_LE(res.max_abs(), 1e-10 * P.max_abs());
    for (int i = 0; i < u; ++i)
        EXPECT_NEAR(std::abs(x(i) - r.F.coeff(key_of(1, 2, keys[i]))), 0, 1e-12);
}

TEST(PnfIterate, ZeroOrderIsIdentity) {
    NlsConfig cfg = desk_config();
    NlsModel model = build_nls_hamiltonian(cfg);
    NormalFormState st = NormalFormState::from_hamiltonian(model.freq, model.R);
    PnfOptions o;
    o.M = 0;
    NormalFormState out = pnf_iterate(st, o);
    EXPECT_TRUE(out.log.empty());
    EXPECT_EQ(out.hamiltonian(), st.hamiltonian());
}

TEST(PnfIterate, NlsQuarticNormalizedAtFirstOrder) {
    NlsConfig cfg = desk_config();
    PnfOptions p;
    p.M = 2;
    NormalFormState st = exp::nls_normal_form(cfg, exp::KamRunOptions{}, p);
    NormalFormCheck c = verify_normalform(st, 1e-9);
    EXPECT_TRUE(c.ok) << c.worst << " " << c.max_violation;
    EXPECT_TRUE(c.z_structural);
    for (std::size_t i = 0; i < st.Z.size(); ++i) {
        const MultiIndex& m = st.Z.key(i);
        for (int j = 0; j < m.J(); ++j) EXPECT_EQ(m.b(j), m.c(j));
        EXPECT_EQ(m.k_abs(), 0);
    }
    EXPECT_EQ(integrability_defect(st.Z), 0.0);
    ASSERT_EQ(st.pnf_reports.size(), 2u);
    EXPECT_EQ(st.pnf_reports[0].j0, 2);
    EXPECT_EQ(st.pnf_reports[1].j0, 3);
}

TEST(PnfIterate, RejectsInsufficientDegree) {
    NlsConfig cfg = desk_config();
    NlsModel model = build_nls_hamiltonian(cfg);
    PnfOptions o;
    o.M = 3;
    EXPECT_THROW(pnf_iterate(NormalFormState::from_hamiltonian(model.freq, model.R), o), std::invalid_argument);
}

TEST(Transforms, EmptyLogIsIdentity) {
    std::mt19937_64 rng(8);
    PhasePoint p = real_point(1, 2, 0.1, 0.1, rng);
    PhasePoint a = to_original({}, p), b = to_normalized({}, p);
    EXPECT_EQ(a.flat(), p.flat());
    EXPECT_EQ(b.flat(), p.flat());
}

TEST(Transforms, LinearGeneratorMatchesMatrixExponential) {
    TruncationSpec t{0, 1, 0, 2, 0};
    const cplx alpha(0.3, 0.1), beta(-0.2, 0.25);
    Poly F = poly_add(monomial(t, {}, {}, {2}, {0}, alpha / 2.0), monomial(t, {}, {}, {0}, {2}, beta / 2.0));
    std::vector<TransformRecord> log{{"kam", 0, 0.5, 0.5, F}};
    PhasePoint p(0, 1);
    p.q[0] = cplx(0.4, -0.2);
    p.qb[0] = cplx(0.1, 0.3);
    PhasePoint out = to_original(log, p);
    Eigen::Matrix2cd A;
    A << 0, I * beta, -I * alpha, 0;
    Eigen::Vector2cd v(p.q[0], p.qb[0]);
    Eigen::Vector2cd ref = A.exp() * v;
    EXPECT_NEAR(std::abs(out.q[0] - ref(0)), 0, 1e-11);
    EXPECT_NEAR(std::abs(out.qb[0] - ref(1)), 0, 1e-11);
}

TEST(Transforms, ForwardBackwardReturnsStart) {
    NlsConfig cfg = desk_config();
    PnfOptions p;
    p.M = 1;
    NormalFormState st = exp::nls_normal_form(cfg, exp::KamRunOptions{}, p);
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 5; ++rep) {
        PhasePoint w = real_point(1, 4, 0.05, 0.05, rng);
        PhasePoint back = to_normalized(st.log, to_original(st.log, w));
        DomainSpec d{0.5, 0.5, 1.0, {}};
        EXPECT_LE(displacement(back, w, d), 1e-8);
    }
}

TEST(Transforms, LoggedFlowsAreSymplectic) {
    NlsConfig cfg = desk_config();
    PnfOptions p;
    p.M = 2;
    NormalFormState st = exp::nls_normal_form(cfg, exp::KamRunOptions{}, p);
    std::mt19937_64 rng(10);
    for (const auto& rec : st.log) {
        PhasePoint w = real_point(1, 4, 0.05, 0.1, rng);
        EXPECT_LE(symplectic_defect(rec.F, w, 11), 1e-6) << rec.stage << rec.step;
    }
}

TEST(Transforms, EnergyConservedUnderComposedMap) {
    NlsConfig cfg = desk_config();
    NlsModel model = build_nls_hamiltonian(cfg);
    const Poly H0 = poly_add(model.N, model.R);
    PnfOptions p;
    p.M = 2;
    NormalFormState st = exp::nls_normal_form(cfg, exp::KamRunOptions{}, p);
    const Poly H1 = st.hamiltonian();
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 5; ++rep) {
        PhasePoint w = real_point(1, 4, 1e-3, 1e-2, rng);
        const cplx e1 = evaluate(H1, w).val;
        const cplx e0 = evaluate(H0, to_original(st.log, w)).val;
        EXPECT_LE(std::abs(e1 - e0), 1e-8 * std::abs(e0));
    }
}

TEST(Transforms, CoordinateMapAgreesWithFlows) {
    NlsConfig cfg = desk_config();
    PnfOptions p;
    p.M = 1;
    NormalFormState st = exp::nls_normal_form(cfg, exp::KamRunOptions{}, p);
    CoordinateMap to_norm = coordinate_map(st.log, true, st.trunc, 12, 1e-18);
    std::mt19937_64 rng(13);
    DomainSpec d{0.5, 0.5, 1.0, {}};
    for (int rep = 0; rep < 5; ++rep) {
        PhasePoint w = real_point(1, 4, 1e-4, 1e-2, rng);
        EXPECT_LE(displacement(to_norm(w), to_normalized(st.log, w), d), 1e-6);
    }
}

TEST(State, SaveLoadRoundTripAndResume) {
    NlsConfig cfg = desk_config();
    NlsModel model = build_nls_hamiltonian(cfg);
    IterationSchedule sch;
    NormalFormState start = NormalFormState::from_hamiltonian(model.freq, model.R);
    NormalFormState one = kam_iterate(start, sch, 1);
    const auto dir = std::filesystem::temp_directory_path() / "kamstab_state_test";
    std::filesystem::remove_all(dir);
    one.save(dir);
    NormalFormState loaded = NormalFormState::load(dir);
    EXPECT_EQ(to_text(loaded.hamiltonian()), to_text(one.hamiltonian()));
    EXPECT_EQ(loaded.log.size(), one.log.size());
    EXPECT_EQ(loaded.kam_reports.size(), 1u);
    NormalFormState resumed = kam_iterate(loaded, sch, 3);
    NormalFormState direct = kam_iterate(start, sch, 3);
    EXPECT_EQ(to_text(resumed.R), to_text(direct.R));
    EXPECT_EQ(resumed.freq.Omega, direct.freq.Omega);
    std::filesystem::remove_all(dir);
}
