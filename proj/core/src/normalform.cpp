#include "kamstab/normalform.hpp"

#include "json.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace kamstab {

SmallDivisorError::SmallDivisorError(ResonanceQuery q, double v, double g)
    : std::runtime_error("small divisor " + fmt_double(v) + " below gap " + fmt_double(g) + " at " + q.str()),
      query(std::move(q)),
      value(v),
      gap(g) {}

double IterationSchedule::eta_m(int m) const { return eta * std::ldexp(1.0, -m); }
double IterationSchedule::eps_m(int m) const { return std::pow(eta, 12) * std::pow(epsilon, std::pow(4.0 / 3.0, m)); }
double IterationSchedule::tau_m(int m) const {
    double s = 0;
    for (int j = 1; j <= m; ++j) s += 1.0 / (double(j) * j);
    return s / (2.0 * M_PI * M_PI / 6.0);
}
double IterationSchedule::s_m(int m) const { return (1 - tau_m(m)) * (sigma > 0 ? sigma : std::min(s0, r0)); }
double IterationSchedule::r_m(int m) const { return s_m(m); }

namespace {

const cplx I1(0, 1);

Poly add(const Poly& a, const Poly& b) { return poly_add(a, b); }
Poly sub(const Poly& a, const Poly& b) { return poly_sub(a, b); }

Poly weight_eq(const Poly& W, int w) {
    return W.filter([w](const MultiIndex& m) { return m.weight() == w; });
}

/// Extended truncation for intermediate brackets so that Fourier loss can be measured.
TruncationSpec widened(const TruncationSpec& t) {
    TruncationSpec e = t;
    e.K = std::min(120, 2 * t.K + 2);
    return e;
}

/// Keeps the terms that fit t; the rest is reported as loss.
Poly narrow_to(const Poly& W, const TruncationSpec& t, double& loss) {
    PolyAccumulator<cplx> acc(t);
    for (std::size_t i = 0; i < W.size(); ++i) {
        if (fits(W.key(i), t))
            acc.add(W.key(i), W.val(i), W.jet(i));
        else
            loss += std::abs(W.val(i));
    }
    Poly r = acc.finish();
    r.set_real_flag(W.real_flag());
    return r;
}

ResonanceQuery query_of(const MultiIndex& key, double tau, double eta, GapForm form, int M, int Ncut) {
    ResonanceQuery q;
    q.k.resize(key.n());
    q.l.resize(key.J());
    for (int i = 0; i < key.n(); ++i) q.k[i] = key.k(i);
    for (int j = 0; j < key.J(); ++j) q.l[j] = key.b(j) - key.c(j);
    q.tau = tau;
    q.eta = eta;
    q.form = form;
    q.M = M;
    q.Ncut = Ncut;
    return q;
}

/// Accumulates F = T / (i d) with quotient-rule jets, or routes normal terms to the normal part.
struct Divider {
    const FrequencySet& f;
    double tau, eta;
    GapForm form;
    int M = 0, Ncut = 0;
    double min_ratio = std::numeric_limits<double>::infinity();
    int divisions = 0;

    void run(const Poly& T, PolyAccumulator<cplx>& F, PolyAccumulator<cplx>* normal) {
        const int m = T.m();
        std::vector<cplx> jet(m);
        for (std::size_t i = 0; i < T.size(); ++i) {
            const MultiIndex& key = T.key(i);
            if (key.is_normal()) {
                if (!normal) throw std::logic_error("Divider: normal term without a normal sink");
                normal->add(key, T.val(i), T.jet(i));
                continue;
            }
            const ResonanceQuery q = query_of(key, tau, eta, form, M, Ncut);
            const DivisorValue d = small_divisor(q, f);
            const double g = q.gap();
            if (!(std::abs(d.value) >= g)) throw SmallDivisorError(q, d.value, g);
            min_ratio = std::min(min_ratio, std::abs(d.value) / g);
            ++divisions;
            const cplx id = I1 * d.value;
            const cplx* tj = T.jet(i);
            for (int p = 0; p < m; ++p) {
                const double dd = p < static_cast<int>(d.dxi.size()) ? d.dxi[p] : 0.0;
                jet[p] = tj[p] / id - T.val(i) * (I1 * dd) / (id * id);
            }
            F.add(key, T.val(i) / id, m ? jet.data() : nullptr);
        }
    }
};

FrequencySet shifted(const FrequencySet& f, const Poly& dN) {
    FrequencySet g = f;
    const auto& t = dN.trunc();
    const int m = f.m();
    auto bump = [&](double& v, std::vector<double>& jet, const MultiIndex& key) {
        const std::size_t idx = dN.find(key);
        if (idx == dN.size()) return;
        v += dN.val(idx).real();
        if (jet.size() < static_cast<std::size_t>(m)) jet.resize(m, 0.0);
        const cplx* j = dN.jet(idx);
        for (int p = 0; p < std::min(m, dN.m()); ++p) jet[p] += j[p].real();
    };
    g.domega.resize(f.n());
    g.dOmega.resize(f.J());
    for (int i = 0; i < f.n(); ++i) {
        MultiIndex key(t.n, t.J);
        key.set_a(i, 1);
        bump(g.omega[i], g.domega[i], key);
    }
    for (int j = 0; j < f.J(); ++j) {
        MultiIndex key(t.n, t.J);
        key.set_b(j, 1);
        key.set_c(j, 1);
        bump(g.Omega[j], g.dOmega[j], key);
    }
    return g;
}

double freq_distance(const FrequencySet& a, const FrequencySet& b) {
    double d = 0;
    for (int i = 0; i < a.n(); ++i) d = std::max(d, std::abs(a.omega[i] - b.omega[i]));
    for (int j = 0; j < a.J(); ++j) d = std::max(d, std::abs(a.Omega[j] - b.Omega[j]));
    return d;
}

}  // namespace

Poly low_part(const Poly& W) {
    return W.filter([](const MultiIndex& m) { return m.weight() <= 2; });
}
Poly high_part(const Poly& W) {
    return W.filter([](const MultiIndex& m) { return m.weight() > 2; });
}

HomologicalResult solve_homological_order2(const Poly& N, const Poly& R, const FrequencySet& f, double eta,
                                           double tau) {
    const TruncationSpec& t = R.trunc();
    const TruncationSpec te = widened(t);
    HomologicalResult out;
    out.input_norm = jet_l1(R);

    const Poly Rhigh_e = high_part(R).retruncate(te);
    Divider div{f, tau, eta, GapForm::Kam};
    PolyAccumulator<cplx> dN(t);

    // F^x from the angle-only block.
    PolyAccumulator<cplx> fx(t);
    div.run(weight_eq(R, 0), fx, &dN);
    const Poly Fx = fx.finish();

    // F^1 from R^1 + {R^high, F^x}^1.
    const Poly Wx = poisson_bracket(Rhigh_e, Fx.retruncate(te), te);
    PolyAccumulator<cplx> f1(t);
    div.run(add(weight_eq(R, 1), narrow_to(weight_eq(Wx, 1), t, out.truncation_loss)), f1, &dN);
    const Poly F1 = f1.finish();

    // F^y and F^2 from R^y + R^2 + W^low with W = {R^high, F^x + F^1}.
    const Poly W = poisson_bracket(Rhigh_e, add(Fx, F1).retruncate(te), te);
    PolyAccumulator<cplx> f2(t);
    div.run(add(weight_eq(R, 2), narrow_to(weight_eq(W, 2), t, out.truncation_loss)), f2, &dN);

    PolyAccumulator<cplx> all(t);
    all.add_poly(Fx);
    all.add_poly(F1);
    all.add_poly(f2.finish());
    out.F = all.finish();
    out.F.set_real_flag(R.real_flag());
    out.dN = dN.finish();
    out.dN.set_real_flag(R.real_flag());
    out.f_plus = shifted(f, out.dN);
    out.min_gap_ratio = div.min_ratio;
    out.divisions = div.divisions;

    // Residual of the full equation, recomputed from scratch.
    double ignore = 0;
    const Poly cross = narrow_to(low_part(poisson_bracket(Rhigh_e, out.F.retruncate(te), te)), t, ignore);
    PolyAccumulator<cplx> res(t);
    res.add_poly(poisson_bracket(N, out.F, t));
    res.add_poly(low_part(R));
    res.add_poly(cross);
    res.add_scaled(out.dN, cplx(-1));
    out.residual = jet_l1(res.finish());
    return out;
}

KamStepOutcome kam_step(const Poly& N, const Poly& R, const FrequencySet& f, const IterationSchedule& sch, int m) {
    const TruncationSpec& t = R.trunc();
    KamStepOutcome out;
    auto& rep = out.report;
    rep.step = m;
    rep.eta = sch.eta_m(m);
    rep.low_before = low_part(R).l1();
    rep.high_norm = high_part(R).l1();

    HomologicalResult hr = solve_homological_order2(N, R, f, rep.eta, sch.tau);
    rep.residual = hr.input_norm > 0 ? hr.residual / hr.input_norm : hr.residual;
    out.F = hr.F;
    out.f = hr.f_plus;
    out.N = add(N, hr.dN);

    if (hr.F.empty()) {
        out.R = sub(R, hr.dN);
    } else {
        auto lt = lie_transform(add(N, R), hr.F, t, sch.lie_order, sch.lie_tol);
        rep.lie_terms = static_cast<int>(lt.order_norms.size());
        out.R = prune(sub(lt.value, out.N), sch.prune_tol);
    }
    rep.truncation_mass = out.R.truncation_mass() + hr.truncation_loss;
    rep.low_after = low_part(out.R).l1();
    rep.freq_drift = freq_distance(f, out.f);
    rep.contracted = rep.low_after < rep.low_before || rep.low_before == 0;
    return out;
}

NormalFormState NormalFormState::from_hamiltonian(const FrequencySet& f, const Poly& R) {
    NormalFormState st;
    st.trunc = R.trunc();
    st.freq = f;
    st.N = f.integrable_part(st.trunc);
    st.R = R;
    st.Z = st.P = st.Q = Poly(st.trunc);
    return st;
}

Poly NormalFormState::hamiltonian() const { return add(N, R); }

NormalFormState kam_iterate(NormalFormState st, const IterationSchedule& sch, int m_max) {
    for (int m = static_cast<int>(st.kam_reports.size()); m < m_max; ++m) {
        if (low_part(st.R).l1() < sch.floor_tol) break;
        KamStepOutcome o = kam_step(st.N, st.R, st.freq, sch, m);
        st.N = o.N;
        st.R = o.R;
        st.freq = o.f;
        st.log.push_back({"kam", m, sch.s_m(m), sch.r_m(m), o.F});
        st.kam_reports.push_back(o.report);
    }
    st.stage = "kam";
    return st;
}

PnfSolveResult pnf_solve(const Poly& block, const FrequencySet& f, double eta_tilde, int Ncut, int M, double tau) {
    const TruncationSpec& t = block.trunc();
    PnfSolveResult out;
    Divider div{f, tau, eta_tilde, GapForm::Pnf, M, Ncut};
    PolyAccumulator<cplx> F(t), Z(t);
    div.run(block, F, &Z);
    out.F = F.finish();
    out.F.set_real_flag(block.real_flag());
    out.Zhat = Z.finish();
    out.min_gap_ratio = div.min_ratio;
    out.divisions = div.divisions;
    return out;
}

void split_zpq(const Poly& rest, int Ncut, int maxw, Poly& Z, Poly& P, Poly& Q) {
    Z = rest.filter([&](const MultiIndex& m) {
        return tail_degree(m, Ncut) <= 2 && m.is_normal() && m.weight() >= 3 && m.weight() <= maxw;
    });
    Q = rest.filter([&](const MultiIndex& m) { return tail_degree(m, Ncut) >= 3; });
    P = rest.filter([&](const MultiIndex& m) {
        return tail_degree(m, Ncut) <= 2 && !(m.is_normal() && m.weight() >= 3 && m.weight() <= maxw);
    });
}

NormalFormState pnf_iterate(NormalFormState st, const PnfOptions& opt) {
    if (opt.M < 0) throw std::invalid_argument("pnf_iterate: M must be >= 0");
    if (opt.Ncut < 0 || opt.Ncut > st.trunc.J) throw std::invalid_argument("pnf_iterate: Ncut out of range");
    const TruncationSpec& t = st.trunc;
    if (t.D < opt.M + 2) throw std::invalid_argument("pnf_iterate: truncation degree D must be >= M+2");
    st.M = opt.M;
    st.Ncut = opt.Ncut;
    Poly H = st.hamiltonian();
    for (int j0 = 2; j0 <= opt.M + 1; ++j0) {
        const Poly rest = sub(H, st.N);
        const Poly block = rest.filter([&](const MultiIndex& m) {
            return m.weight() == j0 + 1 && tail_degree(m, opt.Ncut) <= 2;
        });
        PnfSolveResult sol = pnf_solve(block, st.freq, opt.eta_tilde, opt.Ncut, opt.M, opt.tau);
        PnfStepReport rep;
        rep.j0 = j0;
        rep.block_norm = sub(block, sol.Zhat).l1();
        rep.generator_norm = sol.F.l1();
        rep.zhat_norm = sol.Zhat.l1();
        rep.min_gap_ratio = sol.min_gap_ratio;
        if (!sol.F.empty()) {
            auto lt = lie_transform(H, sol.F, t, opt.lie_order, opt.lie_tol);
            H = prune(lt.value, opt.prune_tol);
        }
        rep.truncation_mass = H.truncation_mass();
        Poly Z, P, Q;
        split_zpq(sub(H, st.N), opt.Ncut, j0 + 1, Z, P, Q);
        rep.p_weight_norms.assign(t.D + 1, 0.0);
        for (std::size_t i = 0; i < P.size(); ++i) rep.p_weight_norms[P.key(i).weight()] += std::abs(P.val(i));
        st.log.push_back({"pnf", j0, 0.0, 0.0, sol.F});
        st.pnf_reports.push_back(rep);
    }
    st.R = sub(H, st.N);
    split_zpq(st.R, opt.Ncut, opt.M + 2, st.Z, st.P, st.Q);
    st.stage = "pnf";
    return st;
}

NormalFormCheck verify_normalform(const NormalFormState& st, double tol) {
    NormalFormCheck c;
    for (std::size_t i = 0; i < st.R.size(); ++i) {
        const MultiIndex& m = st.R.key(i);
        if (m.weight() > st.M + 2 || tail_degree(m, st.Ncut) > 2 || m.is_normal()) continue;
        const double v = std::abs(st.R.val(i));
        if (v > c.max_violation) {
            c.max_violation = v;
            c.worst = m.str();
        }
    }
    c.ok = c.max_violation <= tol;
    for (std::size_t i = 0; i < st.Z.size(); ++i)
        if (!st.Z.key(i).is_normal() || tail_degree(st.Z.key(i), st.Ncut) > 2) c.z_structural = false;
    c.ok = c.ok && c.z_structural;
    return c;
}

double integrability_defect(const Poly& Z) {
    const TruncationSpec& t = Z.trunc();
    double worst = 0;
    for (int j = 0; j < t.J; ++j) {
        std::vector<int> e(t.J, 0);
        e[j] = 1;
        const Poly I = monomial(t, {}, {}, e, e, 1.0);
        worst = std::max(worst, poisson_bracket(Z, I, t).max_abs());
    }
    for (int i = 0; i < t.n; ++i) {
        std::vector<int> a(t.n, 0);
        a[i] = 1;
        const Poly Y = monomial(t, {}, a, {}, {}, 1.0);
        worst = std::max(worst, poisson_bracket(Z, Y, t).max_abs());
    }
    return worst;
}

// ---- transforms ---------------------------------------------------------

PhasePoint flow(const Poly& F, const PhasePoint& p, double t, const FlowOptions& opt) {
    if (F.empty() || t == 0) return p;
    const int n = p.n(), J = p.J();
    const VectorField X = vector_field(F);
    using State = std::vector<cplx>;
    auto rhs = [&](const State& s, State& ds, double) {
        const PhasePoint w = PhasePoint::from_flat(s, n, J);
        ds.assign(s.size(), cplx{});
        for (int i = 0; i < n; ++i) {
            ds[i] = evaluate(X.Wy[i], w).val;
            ds[n + i] = -evaluate(X.Wx[i], w).val;
        }
        for (int j = 0; j < J; ++j) {
            ds[2 * n + j] = evaluate(X.zq[j], w).val;
            ds[2 * n + J + j] = evaluate(X.zqb[j], w).val;
        }
    };
    namespace ode = boost::numeric::odeint;
    State s = p.flat();
    auto stepper = ode::make_controlled(opt.abs_tol, opt.rel_tol, ode::runge_kutta_dopri5<State>());
    ode::integrate_adaptive(stepper, rhs, s, 0.0, t, t / 64);
    return PhasePoint::from_flat(s, n, J);
}

PhasePoint to_normalized(const std::vector<TransformRecord>& log, const PhasePoint& p, const FlowOptions& opt) {
    PhasePoint w = p;
    for (const auto& rec : log) w = flow(rec.F, w, -1.0, opt);
    return w;
}

PhasePoint to_original(const std::vector<TransformRecord>& log, const PhasePoint& p, const FlowOptions& opt) {
    PhasePoint w = p;
    for (auto it = log.rbegin(); it != log.rend(); ++it) w = flow(it->F, w, 1.0, opt);
    return w;
}

Poly pull_to_normalized(const std::vector<TransformRecord>& log, const Poly& W, int order, double tol) {
    Poly r = W;
    for (const auto& rec : log) r = lie_transform(r, rec.F, W.trunc(), order, tol).value;
    return r;
}

namespace {

/// x_i o X_G^1 - x_i = sum_{j>=0} ad_G^j(G_{y_i}) / (j+1)!.
Poly angle_shift(const Poly& G, int i, const TruncationSpec& t, int order, double tol) {
    Poly term = derivative(G, Var::Y, i);
    PolyAccumulator<cplx> acc(t);
    acc.add_poly(term);
    const double ref = std::max(term.l1(), 1e-300);
    for (int j = 1; j <= order && !term.empty(); ++j) {
        term = poly_scale(poisson_bracket(term, G, t), cplx(1.0 / (j + 1)));
        acc.add_poly(term);
        if (term.l1() <= tol * ref) break;
    }
    return acc.finish();
}

}  // namespace

CoordinateMap coordinate_map(const std::vector<TransformRecord>& log, bool to_normalized_coords,
                             const TruncationSpec& t, int order, double tol) {
    CoordinateMap cm;
    for (int i = 0; i < t.n; ++i) {
        std::vector<int> a(t.n, 0);
        a[i] = 1;
        cm.dx.emplace_back(t);
        cm.y.push_back(monomial(t, {}, a, {}, {}, 1.0));
    }
    for (int j = 0; j < t.J; ++j) {
        std::vector<int> e(t.J, 0);
        e[j] = 1;
        cm.q.push_back(monomial(t, {}, {}, e, {}, 1.0));
        cm.qb.push_back(monomial(t, {}, {}, {}, e, 1.0));
    }
    auto apply = [&](const Poly& G) {
        auto L = [&](const Poly& W) { return lie_transform(W, G, t, order, tol).value; };
        for (int i = 0; i < t.n; ++i) {
            cm.dx[i] = poly_add(angle_shift(G, i, t, order, tol), L(cm.dx[i]));
            cm.y[i] = L(cm.y[i]);
        }
        for (int j = 0; j < t.J; ++j) {
            cm.q[j] = L(cm.q[j]);
            cm.qb[j] = L(cm.qb[j]);
        }
    };
    if (to_normalized_coords) {
        for (auto it = log.rbegin(); it != log.rend(); ++it) apply(poly_scale(it->F.retruncate(t), cplx(-1)));
    } else {
        for (const auto& rec : log) apply(rec.F.retruncate(t));
    }
    return cm;
}

PhasePoint CoordinateMap::operator()(const PhasePoint& p) const {
    PhasePoint r(p.n(), p.J());
    for (int i = 0; i < p.n(); ++i) {
        r.x[i] = p.x[i] + evaluate(dx[i], p).val;
        r.y[i] = evaluate(y[i], p).val;
    }
    for (int j = 0; j < p.J(); ++j) {
        r.q[j] = evaluate(q[j], p).val;
        r.qb[j] = evaluate(qb[j], p).val;
    }
    return r;
}

double displacement(const PhasePoint& a, const PhasePoint& b, const DomainSpec& d) {
    PhasePoint diff(a.n(), a.J());
    for (int i = 0; i < a.n(); ++i) {
        diff.x[i] = a.x[i] - b.x[i];
        diff.y[i] = a.y[i] - b.y[i];
    }
    for (int j = 0; j < a.J(); ++j) {
        diff.q[j] = a.q[j] - b.q[j];
        diff.qb[j] = a.qb[j] - b.qb[j];
    }
    return phase_point_norm(diff, d);
}

double symplectic_defect(const Poly& F, const PhasePoint& p, std::uint64_t seed, double h) {
    const int n = p.n(), J = p.J(), dim = 2 * n + 2 * J;
    auto to_real = [&](const PhasePoint& w) {
        std::vector<double> u(dim);
        for (int i = 0; i < n; ++i) {
            u[i] = w.x[i].real();
            u[n + i] = w.y[i].real();
        }
        for (int j = 0; j < J; ++j) {
            u[2 * n + j] = w.q[j].real();
            u[2 * n + J + j] = w.q[j].imag();
        }
        return u;
    };
    auto from_real = [&](const std::vector<double>& u) {
        PhasePoint w(n, J);
        for (int i = 0; i < n; ++i) {
            w.x[i] = u[i];
            w.y[i] = u[n + i];
        }
        for (int j = 0; j < J; ++j) {
            w.q[j] = cplx(u[2 * n + j], u[2 * n + J + j]);
            w.qb[j] = std::conj(w.q[j]);
        }
        return w;
    };
    const std::vector<double> u0 = to_real(p);
    std::vector<std::vector<double>> D(dim, std::vector<double>(dim));
    for (int c = 0; c < dim; ++c) {
        auto up = u0, um = u0;
        up[c] += h;
        um[c] -= h;
        const auto fp = to_real(flow(F, from_real(up), 1.0));
        const auto fm = to_real(flow(F, from_real(um), 1.0));
        for (int r = 0; r < dim; ++r) D[r][c] = (fp[r] - fm[r]) / (2 * h);
    }
    // dx^dy + 2 dIm q ^ dRe q
    auto omega = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0;
        for (int i = 0; i < n; ++i) s += a[i] * b[n + i] - a[n + i] * b[i];
        for (int j = 0; j < J; ++j) s += 2 * (a[2 * n + J + j] * b[2 * n + j] - a[2 * n + j] * b[2 * n + J + j]);
        return s;
    };
    auto mul = [&](const std::vector<double>& a) {
        std::vector<double> r(dim, 0.0);
        for (int i = 0; i < dim; ++i)
            for (int k = 0; k < dim; ++k) r[i] += D[i][k] * a[k];
        return r;
    };
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N01;
    double worst = 0;
    for (int trial = 0; trial < 4; ++trial) {
        std::vector<double> a(dim), b(dim);
        for (auto& v : a) v = N01(rng);
        for (auto& v : b) v = N01(rng);
        worst = std::max(worst, std::abs(omega(mul(a), mul(b)) - omega(a, b)));
    }
    return worst;
}

// ---- persistence --------------------------------------------------------

namespace {

using nlohmann::json;

json freq_json(const FrequencySet& f) {
    return json{{"omega", f.omega}, {"Omega", f.Omega}, {"domega", f.domega}, {"dOmega", f.dOmega},
                {"c1", f.c1},       {"c2", f.c2},       {"labels", f.labels}, {"twist_drift", f.twist_drift}};
}

FrequencySet freq_from(const json& j) {
    FrequencySet f;
    j.at("omega").get_to(f.omega);
    j.at("Omega").get_to(f.Omega);
    j.at("domega").get_to(f.domega);
    j.at("dOmega").get_to(f.dOmega);
    j.at("c1").get_to(f.c1);
    j.at("c2").get_to(f.c2);
    j.at("labels").get_to(f.labels);
    j.at("twist_drift").get_to(f.twist_drift);
    return f;
}

void save_poly(const std::filesystem::path& p, const Poly& W) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    write_poly(os, W);
}

Poly load_poly(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    return read_poly(is);
}

std::string gen_name(std::size_t i) {
    std::ostringstream os;
    os << "F_" << std::setw(3) << std::setfill('0') << i << ".ftp";
    return os.str();
}

}  // namespace

void NormalFormState::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    json j;
    j["format"] = "kamstab-state v1";
    j["trunc"] = {{"n", trunc.n}, {"J", trunc.J}, {"K", trunc.K}, {"D", trunc.D}, {"m", trunc.m}};
    j["freq"] = freq_json(freq);
    j["stage"] = stage;
    j["M"] = M;
    j["Ncut"] = Ncut;
    json logj = json::array();
    for (std::size_t i = 0; i < log.size(); ++i) {
        logj.push_back({{"stage", log[i].stage}, {"step", log[i].step}, {"s", log[i].s}, {"r", log[i].r},
                        {"file", gen_name(i)}});
        save_poly(dir / gen_name(i), log[i].F);
    }
    j["log"] = logj;
    json kr = json::array();
    for (const auto& r : kam_reports)
        kr.push_back({{"step", r.step}, {"eta", r.eta}, {"low_before", r.low_before}, {"low_after", r.low_after},
                      {"high_norm", r.high_norm}, {"residual", r.residual}, {"freq_drift", r.freq_drift},
                      {"truncation_mass", r.truncation_mass}, {"lie_terms", r.lie_terms},
                      {"contracted", r.contracted}});
    j["kam_reports"] = kr;
    json pr = json::array();
    for (const auto& r : pnf_reports)
        pr.push_back({{"j0", r.j0}, {"block_norm", r.block_norm}, {"generator_norm", r.generator_norm},
                      {"zhat_norm", r.zhat_norm}, {"p_weight_norms", r.p_weight_norms},
                      {"truncation_mass", r.truncation_mass}, {"min_gap_ratio", r.min_gap_ratio}});
    j["pnf_reports"] = pr;
    std::ofstream(dir / "state.json") << j.dump(2) << "\n";
    save_poly(dir / "N.ftp", N);
    save_poly(dir / "R.ftp", R);
    save_poly(dir / "Z.ftp", Z);
    save_poly(dir / "P.ftp", P);
    save_poly(dir / "Q.ftp", Q);
}

NormalFormState NormalFormState::load(const std::filesystem::path& dir) {
    std::ifstream is(dir / "state.json");
    if (!is) throw std::runtime_error("no state.json in " + dir.string());
    const json j = json::parse(is);
    NormalFormState st;
    const auto& t = j.at("trunc");
    st.trunc = {t.at("n"), t.at("J"), t.at("K"), t.at("D"), t.at("m")};
    st.freq = freq_from(j.at("freq"));
    st.stage = j.at("stage");
    st.M = j.at("M");
    st.Ncut = j.at("Ncut");
    for (const auto& e : j.at("log"))
        st.log.push_back({e.at("stage"), e.at("step"), e.at("s"), e.at("r"), load_poly(dir / e.at("file").get<std::string>())});
    for (const auto& e : j.at("kam_reports")) {
        KamStepReport r;
        r.step = e.at("step");
        r.eta = e.at("eta");
        r.low_before = e.at("low_before");
        r.low_after = e.at("low_after");
        r.high_norm = e.at("high_norm");
        r.residual = e.at("residual");
        r.freq_drift = e.at("freq_drift");
        r.truncation_mass = e.at("truncation_mass");
        r.lie_terms = e.at("lie_terms");
        r.contracted = e.at("contracted");
        st.kam_reports.push_back(r);
    }
    for (const auto& e : j.at("pnf_reports")) {
        PnfStepReport r;
        r.j0 = e.at("j0");
        r.block_norm = e.at("block_norm");
        r.generator_norm = e.at("generator_norm");
        r.zhat_norm = e.at("zhat_norm");
        e.at("p_weight_norms").get_to(r.p_weight_norms);
        r.truncation_mass = e.at("truncation_mass");
        r.min_gap_ratio = e.at("min_gap_ratio");
        st.pnf_reports.push_back(r);
    }
    st.N = load_poly(dir / "N.ftp");
    st.R = load_poly(dir / "R.ftp");
    st.Z = load_poly(dir / "Z.ftp");
    st.P = load_poly(dir / "P.ftp");
    st.Q = load_poly(dir / "Q.ftp");
    return st;
}

}  // namespace kamstab
