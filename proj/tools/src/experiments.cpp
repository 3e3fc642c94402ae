#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace kamstab::exp {

using nlohmann::json;

bool SuiteReport::ok() const {
    return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

void SuiteReport::add(std::string name, double value, double tol, std::string detail) {
    const bool pass = std::isfinite(value) && value <= tol;
    rows.push_back({std::move(name), value, tol, pass, std::move(detail)});
}

namespace {

// largest |value| or |jet| over all terms
template <class P>
double max_coef(const P& W) {
    double m = 0;
    for (std::size_t i = 0; i < W.size(); ++i) {
        m = std::max(m, std::abs(W.val(i)));
        for (int d = 0; d < W.m(); ++d) m = std::max(m, std::abs(W.jet(i)[d]));
    }
    return m;
}

// rounding allowance for comparisons between exactly defined floating-point sums
constexpr double kRound = 1e-15;

double rel_shortfall(double lhs, double rhs) { return rhs >= lhs ? 0.0 : (lhs - rhs) / std::max(std::abs(rhs), 1e-300); }

RandomPolyOptions rp(int terms, int maxw, int maxk, bool jets = true, int minw = 0) {
    RandomPolyOptions o;
    o.terms = terms;
    o.max_weight = maxw;
    o.min_weight = minw;
    o.max_k = maxk;
    o.jets = jets;
    return o;
}

}  // namespace

SuiteReport bracket_suite(const BracketSuiteOptions& opt) {
    SuiteReport rep;
    std::mt19937_64 rng(opt.seed);
    const TruncationSpec t{2, 2, 12, 14, 1};
    const auto br = [&](const Poly& a, const Poly& b) { return poisson_bracket(a, b, t, opt.variant); };
    double anti = 0, jac = 0, leib = 0, lost = 0;
    for (int i = 0; i < opt.triples; ++i) {
        const Poly U = random_poly(t, rp(5, 3, 2), rng);
        const Poly V = random_poly(t, rp(5, 3, 2), rng);
        const Poly W = random_poly(t, rp(5, 3, 2), rng);
        const Poly UV = br(U, V), VW = br(V, W), WU = br(W, U);
        anti = std::max(anti, max_coef(poly_add(UV, br(V, U))));
        const Poly jsum = poly_add(poly_add(br(U, VW), br(V, WU)), br(W, UV));
        jac = std::max(jac, max_coef(jsum));
        const Poly lhs = br(U, poly_mul(V, W, t));
        const Poly rhs = poly_add(poly_mul(UV, W, t), poly_mul(V, br(U, W), t));
        leib = std::max(leib, max_coef(poly_sub(lhs, rhs)));
        lost += jsum.truncation_mass() + lhs.truncation_mass() + rhs.truncation_mass();
    }
    rep.add("antisymmetry", anti, 1e-12, std::to_string(opt.triples) + " triples");
    rep.add("jacobi", jac, 1e-12, std::to_string(opt.triples) + " triples");
    rep.add("leibniz", leib, 1e-12, std::to_string(opt.triples) + " triples");
    rep.add("truncation_mass", lost, 0.0, "no term may be dropped");

    // exact rational mode: identities must hold with zero residual terms
    long bad_anti = 0, bad_jac = 0, bad_leib = 0;
    const TruncationSpec te{1, 2, 6, 10, 1};
    auto ebr = [&](const ExactPoly& a, const ExactPoly& b) { return poisson_bracket(a, b, te, opt.variant); };
    for (int i = 0; i < opt.exact_triples; ++i) {
        auto o = rp(4, 3, 2);
        o.integer_coefficients = true;
        const ExactPoly U = to_exact(random_poly(te, o, rng));
        const ExactPoly V = to_exact(random_poly(te, o, rng));
        const ExactPoly W = to_exact(random_poly(te, o, rng));
        const ExactPoly UV = ebr(U, V), VW = ebr(V, W), WU = ebr(W, U);
        bad_anti += static_cast<long>(poly_add(UV, ebr(V, U)).size());
        bad_jac += static_cast<long>(poly_add(poly_add(ebr(U, VW), ebr(V, WU)), ebr(W, UV)).size());
        const ExactPoly l = ebr(U, poly_mul(V, W, te));
        const ExactPoly r = poly_add(poly_mul(UV, W, te), poly_mul(V, ebr(U, W), te));
        bad_leib += static_cast<long>(poly_sub(l, r).size());
    }
    rep.add("exact_antisymmetry", double(bad_anti), 0.0, "nonzero terms");
    rep.add("exact_jacobi", double(bad_jac), 0.0, "nonzero terms");
    rep.add("exact_leibniz", double(bad_leib), 0.0, "nonzero terms");

    // d/dt G(X_F^t p) at t = 0 against {G,F}(p)
    const TruncationSpec tf{1, 1, 6, 8, 0};
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    double worst = 0;
    const double h = 1e-4;
    for (int i = 0; i < opt.flow_points; ++i) {
        const Poly G = random_poly(tf, rp(4, 3, 2, false), rng);
        const Poly F = random_poly(tf, rp(4, 3, 2, false), rng);
        PhasePoint p(1, 1);
        p.x[0] = 3 * u(rng);
        p.y[0] = u(rng);
        p.q[0] = cplx(u(rng), u(rng));
        p.qb[0] = std::conj(p.q[0]);
        const cplx fd = (evaluate(G, flow(F, p, h)).val - evaluate(G, flow(F, p, -h)).val) / (2 * h);
        const cplx ex = evaluate(poisson_bracket(G, F, tf, opt.variant), p).val;
        worst = std::max(worst, std::abs(fd - ex) / std::max(std::abs(ex), 1e-3));
    }
    rep.add("flow_consistency", worst, 1e-6, "central difference, h = 1e-4");
    return rep;
}

NormSuiteResult norm_suite(const NormSuiteOptions& opt) {
    NormSuiteResult res;
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    const TruncationSpec tx{2, 1, 8, 8, 1};
    const TruncationSpec tv{1, 2, 4, 4, 0};
    SamplingOptions so;
    so.samples = opt.samples;

    auto bracket_constant = [&](std::mt19937_64& r, NormRow* row) {
        const Poly U = random_poly(tv, rp(3, 3, 1, false), r);
        const Poly V = random_poly(tv, rp(3, 3, 1, false), r);
        DomainSpec d{0.5, 0.5, 1.5, {}};
        const double sigma = d.s / 4, sigma_p = d.r / 4;
        DomainSpec shrunk{d.s - sigma, d.r - sigma_p, d.p, {}};
        so.seed = r();
        const double lo = vf_tame_norm(poisson_bracket(U, V, tv), shrunk, so).lower;
        const double up = std::max(1 / sigma, d.r / sigma_p) * vf_tame_norm(U, d, so).upper * vf_tame_norm(V, d, so).upper;
        const double ratio = up > 0 ? lo / up : 0.0;
        if (row) row->bracket_ratio = ratio;
        return ratio;
    };

    double worst_sub = 0, worst_cauchy = 0, worst_gauge = 0, worst_sup = 0, worst_smooth = 0;
    for (int i = 0; i < opt.rows; ++i) {
        NormRow row;
        row.index = i;
        const double s = 0.1 + 0.9 * u(rng), r = 0.2 + 0.8 * u(rng);
        const auto xonly = [](const MultiIndex& m) { return m.weight() == 0; };
        const auto xy = [](const MultiIndex& m) { return m.z_degree() == 0; };
        {
            const Poly U = random_poly(tx, rp(4, 0, 2), rng).filter(xonly);
            const Poly V = random_poly(tx, rp(4, 0, 2), rng).filter(xonly);
            const double lhs = angle_norm(poly_mul(U, V, tx), s), rhs = angle_norm(U, s) * angle_norm(V, s);
            row.submult_angle = rhs - lhs;
            worst_sub = std::max(worst_sub, rel_shortfall(lhs, rhs));
        }
        {
            const Poly U = random_poly(tx, rp(6, 4, 2), rng).filter(xy);
            const Poly V = random_poly(tx, rp(6, 4, 2), rng).filter(xy);
            const double lhs = xy_norm(poly_mul(U, V, tx), s, r), rhs = xy_norm(U, s, r) * xy_norm(V, s, r);
            row.submult_xy = rhs - lhs;
            worst_sub = std::max(worst_sub, rel_shortfall(lhs, rhs));
        }
        {
            const Poly W = random_poly(tx, rp(6, 4, 3), rng);
            const CauchyReport c = check_cauchy(W, s, s * (0.05 + 0.9 * u(rng)), r, r * (0.05 + 0.9 * u(rng)));
            row.cauchy_x = c.slack_x();
            row.cauchy_y = c.slack_y();
            worst_cauchy = std::max({worst_cauchy, rel_shortfall(c.lhs_x, c.rhs_x), rel_shortfall(c.lhs_y, c.rhs_y)});
        }
        {
            const int m = 1 + static_cast<int>(u(rng) * 5) % 5;
            DomainSpec d{0.5, 1.0, 1.0 + 2 * u(rng), {}};
            std::vector<std::vector<double>> zs(m, std::vector<double>(6));
            for (auto& z : zs)
                for (auto& v : z) v = std::abs(g(rng));
            const double a = gauge_symmetrized(zs, d), b = gauge_p1(zs, d);
            row.gauge_identity = std::abs(a - b) / b;
            worst_gauge = std::max(worst_gauge, row.gauge_identity);
        }
        {
            const Poly W = random_poly(tv, rp(5, 3, 2, false), rng);
            DomainSpec d{0.5, 0.5, 1.5, {}};
            so.seed = rng();
            const double up = vf_tame_norm(W, d, so).upper;
            const double sup = weighted_sup_norm(vector_field(W), d, 200, rng());
            row.sup_vs_tame = up - sup;
            worst_sup = std::max(worst_sup, rel_shortfall(sup, up));
        }
        {
            bracket_constant(rng, &row);
            res.bracket_constant = std::max(res.bracket_constant, row.bracket_ratio);
        }
        {
            const int N = static_cast<int>(u(rng) * 5);
            DomainSpec d{0.5, 1.0, 1.0 + 2 * u(rng), {}};
            std::vector<double> z(12, 0.0);
            for (int j = 0; j < 6; ++j)
                if (j + 1 > N) z[j] = std::abs(g(rng)), z[6 + j] = std::abs(g(rng));
            row.smoothing = smoothing_gap(z, N, d);
            const double lhs = znorm(z, d, 1.0);
            worst_smooth = std::max(worst_smooth, rel_shortfall(lhs, lhs + row.smoothing));
        }
        res.rows.push_back(row);
    }
    std::mt19937_64 rng2(opt.second_seed);
    for (int i = 0; i < opt.rows; ++i) res.bracket_constant_second = std::max(res.bracket_constant_second, bracket_constant(rng2, nullptr));

    res.report.add("submultiplicativity", worst_sub, kRound, "relative shortfall");
    res.report.add("cauchy", worst_cauchy, kRound, "relative shortfall");
    res.report.add("gauge_identity", worst_gauge, 1e-12, "relative error");
    res.report.add("sup_below_tame", worst_sup, kRound, "relative shortfall");
    res.report.add("smoothing", worst_smooth, kRound, "relative shortfall");
    const double a = res.bracket_constant, b = res.bracket_constant_second;
    const double spread = (a > 0 && b > 0) ? std::max(a, b) / std::min(a, b) : INFINITY;
    res.report.add("bracket_constant_stability", spread, 2.0,
                   "seeds " + std::to_string(opt.seed) + "/" + std::to_string(opt.second_seed) + ": " + fmt_double(a) + " vs " +
                       fmt_double(b));
    return res;
}

namespace {

FrequencySet identity_twist(std::vector<double> omega, std::vector<double> Omega, std::vector<int> labels) {
    FrequencySet f;
    const int n = static_cast<int>(omega.size()), J = static_cast<int>(Omega.size());
    f.omega = std::move(omega);
    f.Omega = std::move(Omega);
    f.labels = std::move(labels);
    f.c1 = 0.5;
    f.c2 = 3.0;
    for (int i = 0; i < n; ++i) {
        std::vector<double> e(n + J, 0.0);
        e[i] = 1;
        f.domega.push_back(e);
    }
    for (int j = 0; j < J; ++j) {
        std::vector<double> e(n + J, 0.0);
        e[n + j] = 1;
        f.dOmega.push_back(e);
    }
    return f;
}

}  // namespace

ParameterFamily nls_box_family() {
    ParameterFamily fam;
    fam.lo = {1.0, 0.5, 1.0 / 3};
    fam.hi = {2.0, 1.0, 2.0 / 3};
    fam.at = [](const std::vector<double>& xi) {
        return identity_twist({1 + xi[0]}, {4 + xi[1], 9 + xi[2]}, {2, 3});
    };
    return fam;
}

ParameterFamily planted_strip_family() {
    ParameterFamily fam;
    fam.lo = {1.0};
    fam.hi = {2.0};
    fam.at = [](const std::vector<double>& xi) {
        FrequencySet f = identity_twist({xi[0]}, {1.5}, {1});
        f.dOmega = {{0.0}};
        return f;
    };
    return fam;
}

MeasureExperiment measure_experiment(const MeasureOptions& opt) {
    MeasureExperiment ex;
    if (opt.planted) {
        const ParameterFamily fam = planted_strip_family();
        ResonanceQuery q;
        q.k = {1};
        q.l = {-1};
        q.tau = 0;
        q.eta = 0.1;
        q.form = GapForm::Kam;
        MeasureRow row{0.1, q.str(), resonant_measure_mc(fam, q, opt.samples, opt.seed), strip_bound(fam, q)};
        ex.rows.push_back(row);
        ex.unions.push_back(row);
        const double se = std::sqrt(0.2 * 0.8 / double(opt.samples));
        ex.report.add("planted_strip", std::abs(row.mc.fraction - 0.2), 4 * se, "closed form 0.2");
        return ex;
    }
    const ParameterFamily fam = nls_box_family();
    std::uint64_t shard = opt.seed;
    for (double eta : opt.etas) {
        const auto cat = nonempty_catalog(fam, opt.Kmax, opt.Ncut, opt.M, opt.tau, eta, GapForm::Pnf);
        double ub = 0;
        for (const auto& q : cat) {
            const double b = strip_bound(fam, q);
            ub += b;
            ex.rows.push_back({eta, q.str(), resonant_measure_mc(fam, q, opt.samples / 10, ++shard), b});
        }
        ex.unions.push_back({eta, "union", union_measure_mc(fam, cat, opt.samples, opt.seed), ub});
    }
    double worst = 0;
    bool monotone = true;
    for (std::size_t i = 0; i < ex.unions.size(); ++i) {
        const auto& r = ex.unions[i];
        worst = std::max(worst, r.bound > 0 ? r.mc.fraction / r.bound : (r.mc.fraction > 0 ? INFINITY : 0.0));
        for (std::size_t j = 0; j < ex.unions.size(); ++j)
            if (ex.unions[j].eta < r.eta && ex.unions[j].mc.fraction > r.mc.fraction) monotone = false;
    }
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : ex.unions)
        if (r.mc.fraction > 0) pts.emplace_back(std::log(r.eta), std::log(r.mc.fraction));
    if (pts.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double m = double(pts.size());
        for (auto [x, y] : pts) sx += x, sy += y, sxx += x * x, sxy += x * y;
        ex.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
    ex.report.add("fraction_over_union_bound", worst, 3.0, "max over eta");
    ex.report.add("linearity_slope_error", std::abs(ex.slope - 1.0), 0.2, "slope " + fmt_double(ex.slope));
    ex.report.add("monotone_in_eta", monotone ? 0.0 : 1.0, 0.0);
    return ex;
}

NormalFormState nls_normal_form(const NlsConfig& cfg, const KamRunOptions& kam, const PnfOptions& pnf) {
    const NlsModel mdl = build_nls_hamiltonian(cfg);
    NormalFormState st = NormalFormState::from_hamiltonian(mdl.freq, mdl.R);
    st = kam_iterate(std::move(st), kam.schedule, kam.steps);
    return pnf_iterate(std::move(st), pnf);
}

std::size_t log_prefix_for_order(const NormalFormState& st, int M) {
    std::size_t kam = 0, pnf = 0;
    for (const auto& r : st.log) (r.stage == "kam" ? kam : pnf) += 1;
    if (M < 0 || static_cast<std::size_t>(M) > pnf)
        throw std::invalid_argument("order " + std::to_string(M) + " exceeds the stored partial normal form");
    return kam + static_cast<std::size_t>(M);
}

StabilityExperiment stability_experiment(const NlsConfig& cfg, const NormalFormState& st,
                                         const std::vector<int>& orders, const StabilityOptions& opt) {
    StabilityExperiment ex;
    ex.orders = orders;
    for (int M : orders) ex.results.push_back(stability_scan(cfg, st, log_prefix_for_order(st, M), opt));
    double drop = 0;
    for (std::size_t a = 0; a + 1 < orders.size(); ++a)
        for (std::size_t i = 0; i < opt.deltas.size(); ++i)
            drop = std::max(drop, ex.results[a].rows[i].escape_time - ex.results[a + 1].rows[i].escape_time);
    ex.report.add("escape_nondecreasing_in_M", drop, 0.0, "largest decrease");
    if (orders.size() >= 2) {
        const double gain = ex.results.back().slope - ex.results.front().slope;
        // pass iff gain >= 1
        ex.report.add("slope_gain", 1.0 - gain, 0.0,
                      "slope(M=" + std::to_string(orders.back()) + ") - slope(M=" + std::to_string(orders.front()) +
                          ") = " + fmt_double(gain));
    }
    return ex;
}

// ---- configuration ------------------------------------------------------

namespace {

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw std::invalid_argument(std::string("config: '") + section + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; }) == allowed.end())
            throw std::invalid_argument(std::string("config: unknown key '") + it.key() + "' in " + section);
}

template <class T>
void get(const json& j, const char* key, T& v) {
    if (j.contains(key)) v = j.at(key).get<T>();
}

}  // namespace

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    RunConfig c;
    c.raw = j;
    c.base_dir = base_dir;
    check_keys(j, "config",
               {"seed", "jobs", "source", "truncation", "frequencies", "hamiltonian_file", "perturbation", "domain", "nls",
                "kam", "pnf", "state_dir", "bracket_check", "norm_report", "simulate", "stability", "measure", "comment"});
    get(j, "seed", c.seed);
    get(j, "jobs", c.jobs);
    get(j, "source", c.source);
    get(j, "hamiltonian_file", c.hamiltonian_file);
    get(j, "perturbation", c.perturbation);
    get(j, "state_dir", c.state_dir);
    if (j.contains("truncation")) {
        const json& t = j["truncation"];
        check_keys(t, "truncation", {"n", "J", "K", "D", "m"});
        get(t, "n", c.trunc.n);
        get(t, "J", c.trunc.J);
        get(t, "K", c.trunc.K);
        get(t, "D", c.trunc.D);
        get(t, "m", c.trunc.m);
    }
    if (j.contains("frequencies")) {
        const json& f = j["frequencies"];
        check_keys(f, "frequencies", {"omega", "Omega", "domega", "dOmega", "c1", "c2", "labels"});
        get(f, "omega", c.freq.omega);
        get(f, "Omega", c.freq.Omega);
        get(f, "domega", c.freq.domega);
        get(f, "dOmega", c.freq.dOmega);
        get(f, "c1", c.freq.c1);
        get(f, "c2", c.freq.c2);
        get(f, "labels", c.freq.labels);
    }
    if (j.contains("domain")) {
        const json& d = j["domain"];
        check_keys(d, "domain", {"s", "r", "p", "labels"});
        get(d, "s", c.domain.s);
        get(d, "r", c.domain.r);
        get(d, "p", c.domain.p);
        get(d, "labels", c.domain.labels);
    }
    if (j.contains("nls")) {
        const json& n = j["nls"];
        check_keys(n, "nls", {"tangent", "J", "epsilon", "xi", "zeta", "p", "sqrt_taylor_order", "K", "D", "jets", "normalization"});
        get(n, "tangent", c.nls.tangent);
        get(n, "J", c.nls.J);
        get(n, "epsilon", c.nls.epsilon);
        get(n, "xi", c.nls.xi);
        get(n, "zeta", c.nls.zeta);
        get(n, "p", c.nls.p);
        get(n, "sqrt_taylor_order", c.nls.sqrt_taylor_order);
        get(n, "K", c.nls.K);
        get(n, "D", c.nls.D);
        get(n, "jets", c.nls.jets);
        std::string norm = "dynamic";
        get(n, "normalization", norm);
        if (norm == "dynamic") c.nls.normalization = NlsNormalization::Dynamic;
        else if (norm == "scaled") c.nls.normalization = NlsNormalization::Scaled;
        else throw std::invalid_argument("config: nls.normalization must be 'dynamic' or 'scaled'");
    }
    c.kam.schedule.epsilon = c.nls.epsilon;
    if (j.contains("kam")) {
        const json& k = j["kam"];
        check_keys(k, "kam", {"steps", "eta", "epsilon", "s0", "r0", "sigma", "tau", "floor_tol", "lie_order", "lie_tol", "prune_tol"});
        auto& s = c.kam.schedule;
        get(k, "steps", c.kam.steps);
        get(k, "eta", s.eta);
        get(k, "epsilon", s.epsilon);
        get(k, "s0", s.s0);
        get(k, "r0", s.r0);
        get(k, "sigma", s.sigma);
        get(k, "tau", s.tau);
        get(k, "floor_tol", s.floor_tol);
        get(k, "lie_order", s.lie_order);
        get(k, "lie_tol", s.lie_tol);
        get(k, "prune_tol", s.prune_tol);
    }
    if (j.contains("pnf")) {
        const json& p = j["pnf"];
        check_keys(p, "pnf", {"M", "Ncut", "eta_tilde", "tau", "lie_order", "lie_tol", "prune_tol"});
        get(p, "M", c.pnf.M);
        get(p, "Ncut", c.pnf.Ncut);
        get(p, "eta_tilde", c.pnf.eta_tilde);
        get(p, "tau", c.pnf.tau);
        get(p, "lie_order", c.pnf.lie_order);
        get(p, "lie_tol", c.pnf.lie_tol);
        get(p, "prune_tol", c.pnf.prune_tol);
    }
    c.bracket.seed = c.seed;
    if (j.contains("bracket_check")) {
        const json& b = j["bracket_check"];
        check_keys(b, "bracket_check", {"triples", "exact_triples", "flow_points", "variant"});
        get(b, "triples", c.bracket.triples);
        get(b, "exact_triples", c.bracket.exact_triples);
        get(b, "flow_points", c.bracket.flow_points);
        std::string v = "standard";
        get(b, "variant", v);
        if (v == "standard") c.bracket.variant = BracketVariant::Standard;
        else if (v == "flipped-angle") c.bracket.variant = BracketVariant::FlippedAngleTerm;
        else throw std::invalid_argument("config: bracket_check.variant must be 'standard' or 'flipped-angle'");
    }
    c.norms.seed = c.seed;
    c.norms.second_seed = c.seed + 1;
    if (j.contains("norm_report")) {
        const json& n = j["norm_report"];
        check_keys(n, "norm_report", {"rows", "samples", "second_seed"});
        get(n, "rows", c.norms.rows);
        get(n, "samples", c.norms.samples);
        get(n, "second_seed", c.norms.second_seed);
    }
    if (j.contains("simulate")) {
        const json& s = j["simulate"];
        check_keys(s, "simulate", {"T", "dt", "sample_dt", "initial_file", "initial_normal", "initial_mode"});
        get(s, "T", c.sim.T);
        get(s, "dt", c.sim.dt);
        get(s, "sample_dt", c.sim.sample_dt);
        get(s, "initial_file", c.initial_file);
        get(s, "initial_normal", c.initial_normal);
        get(s, "initial_mode", c.initial_mode);
    }
    c.stability.jobs = c.jobs;
    if (j.contains("stability")) {
        const json& s = j["stability"];
        check_keys(s, "stability", {"deltas", "T_max", "horizon_scale", "horizon_exponent", "dt", "sample_dt", "excite_label",
                                    "lie_order", "lie_tol", "orders"});
        auto& o = c.stability;
        get(s, "deltas", o.deltas);
        get(s, "T_max", o.T_max);
        get(s, "horizon_scale", o.horizon_scale);
        get(s, "horizon_exponent", o.horizon_exponent);
        get(s, "dt", o.dt);
        get(s, "sample_dt", o.sample_dt);
        get(s, "excite_label", o.excite_label);
        get(s, "lie_order", o.lie_order);
        get(s, "lie_tol", o.lie_tol);
        get(s, "orders", c.stability_orders);
    }
    if (c.stability.deltas.empty()) c.stability.deltas = {0.05, 0.1, 0.2, 0.4};
    c.measure.seed = c.seed;
    if (j.contains("measure")) {
        const json& m = j["measure"];
        check_keys(m, "measure", {"etas", "samples", "Kmax", "Ncut", "M", "tau", "planted"});
        get(m, "etas", c.measure.etas);
        get(m, "samples", c.measure.samples);
        get(m, "Kmax", c.measure.Kmax);
        get(m, "Ncut", c.measure.Ncut);
        get(m, "M", c.measure.M);
        get(m, "tau", c.measure.tau);
        get(m, "planted", c.measure.planted);
    }
    if (c.jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
    c.nls.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open config " + file.string());
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config " + file.string() + ": " + e.what());
    }
    return parse_config(j, file.parent_path());
}

std::uint64_t config_hash(const json& j) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

NormalFormState initial_state(const RunConfig& cfg) {
    if (cfg.source == "nls") {
        const NlsModel mdl = build_nls_hamiltonian(cfg.nls);
        return NormalFormState::from_hamiltonian(mdl.freq, mdl.R);
    }
    FrequencySet f = cfg.freq;
    if (f.n() == 0 && f.J() == 0) throw std::invalid_argument("config: source '" + cfg.source + "' needs frequencies");
    Poly R;
    if (cfg.source == "random") {
        const TruncationSpec& t = cfg.trunc;
        std::mt19937_64 rng(cfg.seed);
        const Poly lo = random_poly(t, rp(10, 2, 2), rng);
        const Poly hi = random_poly(t, rp(10, t.D, 2, true, 3), rng);
        R = poly_add(poly_scale(lo, cplx(cfg.perturbation)), hi);
    } else if (cfg.source == "file") {
        const auto path = cfg.base_dir / cfg.hamiltonian_file;
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open Hamiltonian " + path.string());
        R = read_poly(in);
    } else {
        throw std::invalid_argument("config: source must be nls, random or file");
    }
    const TruncationSpec& t = R.trunc();
    if (f.n() != t.n || f.J() != t.J) throw std::invalid_argument("config: frequencies do not match the truncation");
    if (f.domega.empty() && t.m) {
        if (t.m != t.n + t.J) throw std::invalid_argument("config: give frequency jets or use m = n + J");
        f = identity_twist(f.omega, f.Omega, f.labels);
        f.c1 = cfg.freq.c1;
        f.c2 = cfg.freq.c2;
    }
    if (f.domega.empty()) f.domega.assign(t.n, {});
    if (f.dOmega.empty()) f.dOmega.assign(t.J, {});
    return NormalFormState::from_hamiltonian(f, R);
}

std::vector<cplx> read_modes(const std::filesystem::path& file, int J) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open initial data " + file.string());
    std::vector<cplx> w(J);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        int j;
        double re, im;
        if (!(is >> j >> re >> im)) throw std::invalid_argument("initial data: bad line '" + line + "'");
        if (j < 1 || j > J) throw std::invalid_argument("initial data: mode " + std::to_string(j) + " out of range");
        w[j - 1] = cplx(re, im);
    }
    return w;
}

}  // namespace kamstab::exp
