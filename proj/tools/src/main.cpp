#include "experiments.hpp"

#include <CLI11.hpp>
#include <boost/version.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace kamstab;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kAssertion = 2;
constexpr int kDivisor = 3;

struct Common {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    bool svg = false;
};

class Csv {
public:
    Csv(const std::filesystem::path& path, const std::vector<std::string>& header) : os_(path) {
        if (!os_) throw std::runtime_error("cannot write " + path.string());
        row(header);
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
        os_ << '\n';
    }

private:
    std::ofstream os_;
};

std::string num(double v) { return fmt_double(v); }
std::string num(long v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }

class Run {
public:
    Run(std::string command, const Common& c) : command_(std::move(command)), out_(c.out), svg_(c.svg) {
        json raw = json::object();
        std::filesystem::path base;
        if (!c.config.empty()) {
            std::ifstream in(c.config);
            if (!in) throw std::invalid_argument("cannot open config " + c.config);
            raw = json::parse(in, nullptr, true, true);
            base = std::filesystem::path(c.config).parent_path();
        }
        if (c.seed) raw["seed"] = *c.seed;
        if (c.jobs) raw["jobs"] = *c.jobs;
        cfg = exp::parse_config(raw, base);
        std::filesystem::create_directories(out_);
    }

    exp::RunConfig cfg;

    std::filesystem::path path(const std::string& name) {
        outputs_.push_back(name);
        return out_ / name;
    }
    bool svg() const { return svg_; }

    void write_checks(const std::string& name, const exp::SuiteReport& rep) {
        Csv csv(path(name), {"check", "value", "tolerance", "pass", "detail"});
        for (const auto& r : rep.rows) csv.row({r.name, num(r.value), num(r.tolerance), r.pass ? "1" : "0", "\"" + r.detail + "\""});
        for (const auto& r : rep.rows)
            std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " value=" << num(r.value) << " tol=" << num(r.tolerance)
                      << (r.detail.empty() ? "" : " (" + r.detail + ")") << '\n';
    }

    int finish(int code, json extra = json::object()) {
        json m;
        m["command"] = command_;
        m["config_hash"] = [&] {
            std::ostringstream os;
            os << std::hex << exp::config_hash(cfg.raw);
            return os.str();
        }();
        m["config"] = cfg.raw;
        m["seed"] = cfg.seed;
        m["jobs"] = cfg.jobs;
        m["versions"] = {{"kamstab", KAMSTAB_VERSION},
                         {"compiler", __VERSION__},
                         {"boost", BOOST_LIB_VERSION},
                         {"fftw", fft_backend_version()},
                         {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                               std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                               std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
        m["outputs"] = outputs_;
        m["exit_code"] = code;
        for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
        std::ofstream(out_ / "manifest.json") << m.dump(2) << '\n';
        return code;
    }

private:
    std::string command_;
    std::filesystem::path out_;
    bool svg_;
    std::vector<std::string> outputs_;
};

int divisor_exit(Run& run, const SmallDivisorError& e) {
    std::cerr << "small divisor: " << e.what() << '\n';
    std::ofstream(run.path("small_divisor.txt")) << e.query.str() << " value=" << num(e.value) << " gap=" << num(e.gap) << '\n';
    return run.finish(kDivisor, {{"small_divisor", e.query.str()}});
}

int cmd_bracket_check(const Common& c) {
    Run run("bracket-check", c);
    const auto rep = exp::bracket_suite(run.cfg.bracket);
    run.write_checks("bracket_check.csv", rep);
    return run.finish(rep.ok() ? kOk : kAssertion);
}

int cmd_norm_report(const Common& c) {
    Run run("norm-report", c);
    const auto res = exp::norm_suite(run.cfg.norms);
    Csv csv(run.path("norm_report.csv"), {"row", "submult_angle_slack", "submult_xy_slack", "cauchy_x_slack", "cauchy_y_slack",
                                          "gauge_identity_relerr", "tame_minus_sup", "bracket_ratio", "smoothing_slack"});
    {
        // zero Hamiltonian reference row
        const Poly Z(TruncationSpec{1, 1, 2, 4, 0});
        const CauchyReport cr = check_cauchy(Z, 0.5, 0.25, 0.5, 0.25);
        DomainSpec d;
        csv.row({"zero", num(angle_norm(Z, 0.5) * angle_norm(Z, 0.5) - angle_norm(poly_mul(Z, Z, Z.trunc()), 0.5)),
                 num(xy_norm(Z, 0.5, 0.5) * xy_norm(Z, 0.5, 0.5) - xy_norm(poly_mul(Z, Z, Z.trunc()), 0.5, 0.5)),
                 num(cr.slack_x()), num(cr.slack_y()), "0", num(vf_tame_norm(Z, d).upper - weighted_sup_norm(vector_field(Z), d, 10, 1)),
                 "0", "0"});
    }
    for (const auto& r : res.rows)
        csv.row({num(r.index), num(r.submult_angle), num(r.submult_xy), num(r.cauchy_x), num(r.cauchy_y), num(r.gauge_identity),
                 num(r.sup_vs_tame), num(r.bracket_ratio), num(r.smoothing)});
    run.write_checks("norm_checks.csv", res.report);
    return run.finish(res.report.ok() ? kOk : kAssertion,
                      {{"bracket_constant", {res.bracket_constant, res.bracket_constant_second}}});
}

void write_kam_csv(Run& run, const NormalFormState& st) {
    Csv csv(run.path("kam_steps.csv"), {"step", "eta", "low_before", "low_after", "high_norm", "residual_rel", "freq_drift",
                                        "truncation_mass", "lie_terms", "contracted"});
    for (const auto& r : st.kam_reports)
        csv.row({num(r.step), num(r.eta), num(r.low_before), num(r.low_after), num(r.high_norm), num(r.residual), num(r.freq_drift),
                 num(r.truncation_mass), num(r.lie_terms), r.contracted ? "1" : "0"});
}

int cmd_kam(const Common& c) {
    Run run("kam", c);
    NormalFormState st = run.cfg.state_dir.empty() ? exp::initial_state(run.cfg)
                                                    : NormalFormState::load(run.cfg.base_dir / run.cfg.state_dir);
    try {
        st = kam_iterate(std::move(st), run.cfg.kam.schedule, run.cfg.kam.steps);
    } catch (const SmallDivisorError& e) {
        return divisor_exit(run, e);
    }
    st.save(run.path("state"));
    write_kam_csv(run, st);
    exp::SuiteReport rep;
    double worst = 0;
    for (const auto& r : st.kam_reports) worst = std::max(worst, r.residual);
    rep.add("homological_residual", worst, 1e-10, "relative, all steps");
    run.write_checks("kam_checks.csv", rep);
    std::cout << "kam: " << st.kam_reports.size() << " steps, " << st.log.size() << " generators\n";
    return run.finish(rep.ok() ? kOk : kAssertion);
}

int cmd_pnf(const Common& c) {
    Run run("pnf", c);
    NormalFormState st;
    try {
        if (run.cfg.state_dir.empty()) {
            st = kam_iterate(exp::initial_state(run.cfg), run.cfg.kam.schedule, run.cfg.kam.steps);
        } else {
            st = NormalFormState::load(run.cfg.base_dir / run.cfg.state_dir);
        }
        st = pnf_iterate(std::move(st), run.cfg.pnf);
    } catch (const SmallDivisorError& e) {
        return divisor_exit(run, e);
    }
    st.save(run.path("state"));
    write_kam_csv(run, st);
    {
        Csv csv(run.path("pnf_steps.csv"), {"j0", "block_norm", "generator_norm", "zhat_norm", "truncation_mass", "min_gap_ratio"});
        for (const auto& r : st.pnf_reports)
            csv.row({num(r.j0), num(r.block_norm), num(r.generator_norm), num(r.zhat_norm), num(r.truncation_mass), num(r.min_gap_ratio)});
    }
    const NonresonanceResult cert = check_nonresonant(st.freq, run.cfg.pnf.eta_tilde, run.cfg.pnf.Ncut, run.cfg.pnf.M,
                                                      run.cfg.pnf.tau, NonresonanceLimits{std::min(st.trunc.K, 4), 1 << 20});
    {
        std::ofstream os(run.path("certificate.txt"));
        os << "status " << (cert.status == CertStatus::Certified ? "certified" : cert.status == CertStatus::Violated ? "violated" : "inconclusive")
           << "\nmin_ratio " << num(cert.min_ratio) << "\nenumerated " << cert.enumerated << '\n';
        if (cert.argmin) os << "argmin " << cert.argmin->str() << '\n';
        if (cert.violation) os << "violation " << cert.violation->str() << '\n';
        if (!cert.message.empty()) os << "note " << cert.message << '\n';
    }
    exp::SuiteReport rep;
    const NormalFormCheck chk = verify_normalform(st, 1e-9);
    rep.add("non_normal_coefficients", chk.max_violation, 1e-9, chk.worst);
    rep.add("z_structure", chk.z_structural ? 0.0 : 1.0, 0.0, "k = 0 and b = c in Z");
    rep.add("z_integrable", integrability_defect(st.Z), 0.0, "{Z, I_j} and {Z, y_j}");
    run.write_checks("pnf_checks.csv", rep);
    return run.finish(rep.ok() ? kOk : kAssertion);
}

std::vector<cplx> default_initial(const exp::RunConfig& cfg) {
    const auto nm = cfg.nls.normal_modes();
    PhasePoint p(static_cast<int>(cfg.nls.tangent.size()), static_cast<int>(nm.size()));
    for (std::size_t s = 0; s < nm.size(); ++s)
        if (nm[s] == cfg.initial_mode) p.q[s] = p.qb[s] = cfg.initial_normal;
    return lift_to_modes(cfg.nls, p);
}

int cmd_simulate(const Common& c) {
    Run run("simulate", c);
    const auto& cfg = run.cfg;
    SimState s;
    s.w = cfg.initial_file.empty() ? default_initial(cfg) : exp::read_modes(cfg.base_dir / cfg.initial_file, cfg.nls.J);
    const auto nm = cfg.nls.normal_modes();
    DomainSpec dom;
    dom.p = cfg.nls.p;
    dom.labels = nm;
    const int n = static_cast<int>(cfg.nls.tangent.size());
    auto qnorm = [&](const PhasePoint& z) {
        double a = 0;
        for (int j = 0; j < z.J(); ++j) a += std::norm(z.q[j]) * std::pow(dom.label(j), 2 * dom.p);
        return std::sqrt(a);
    };
    const double delta = std::max(2 * qnorm(modes_to_lift(cfg.nls, s.w)), 1e-12);
    std::vector<std::string> header{"t", "l2", "q_norm_p"};
    for (int i = 0; i < n; ++i) header.push_back("y_" + std::to_string(cfg.nls.tangent[i]));
    header.push_back("distance");
    Csv csv(run.path("trajectory.csv"), header);
    std::vector<std::pair<double, double>> trace;
    auto observe = [&](const SimState& cur) {
        const PhasePoint z = modes_to_lift(cfg.nls, cur.w);
        double l2 = 0;
        for (const auto& v : cur.w) l2 += std::norm(v);
        const double d = torus_distance(z, delta, dom);
        std::vector<std::string> row{num(cur.t), num(std::sqrt(l2)), num(qnorm(z))};
        for (int i = 0; i < n; ++i) row.push_back(num(z.y[i].real()));
        row.push_back(num(d));
        csv.row(row);
        trace.emplace_back(cur.t, d);
        return true;
    };
    SimState fin;
    try {
        fin = simulate(cfg.nls, s, cfg.sim, observe);
    } catch (const std::runtime_error& e) {
        std::cerr << e.what() << '\n';
        return run.finish(kAssertion, {{"error", e.what()}});
    }
    if (run.svg())
        std::ofstream(run.path("distance.svg")) << svg_plot("distance to the unperturbed torus", "t", "d_p", {{"distance", trace}}, false, false);
    std::cout << "simulate: t=" << num(fin.t) << " steps=" << fin.steps << " l2_drift=" << num(fin.l2_drift) << '\n';
    return run.finish(kOk, {{"l2_drift", fin.l2_drift}, {"steps", fin.steps}});
}

int cmd_stability(const Common& c) {
    Run run("stability", c);
    const auto& cfg = run.cfg;
    PnfOptions pnf = cfg.pnf;
    pnf.M = 0;
    for (int M : cfg.stability_orders) pnf.M = std::max(pnf.M, M);
    NormalFormState st;
    try {
        st = exp::nls_normal_form(cfg.nls, cfg.kam, pnf);
    } catch (const SmallDivisorError& e) {
        return divisor_exit(run, e);
    }
    const auto ex = exp::stability_experiment(cfg.nls, st, cfg.stability_orders, cfg.stability);
    {
        Csv csv(run.path("stability.csv"), {"M", "delta", "budget", "escape_time", "escaped", "drift_N", "drift_Y", "max_distance", "l2_drift"});
        for (std::size_t a = 0; a < ex.orders.size(); ++a)
            for (const auto& r : ex.results[a].rows)
                csv.row({num(ex.orders[a]), num(r.delta), num(r.budget), num(r.escape_time), r.escaped ? "1" : "0", num(r.drift_N),
                         num(r.drift_Y), num(r.max_distance), num(r.l2_drift)});
    }
    {
        Csv csv(run.path("stability_fit.csv"), {"M", "slope", "intercept"});
        for (std::size_t a = 0; a < ex.orders.size(); ++a)
            csv.row({num(ex.orders[a]), num(ex.results[a].slope), num(ex.results[a].intercept)});
    }
    {
        Csv csv(run.path("stability_trace.csv"), {"M", "delta", "t", "distance"});
        for (std::size_t a = 0; a < ex.orders.size(); ++a)
            for (const auto& r : ex.results[a].rows)
                for (auto [t, d] : r.trace) csv.row({num(ex.orders[a]), num(r.delta), num(t), num(d)});
    }
    if (run.svg()) {
        std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> esc, dist;
        for (std::size_t a = 0; a < ex.orders.size(); ++a) {
            std::vector<std::pair<double, double>> pts;
            for (const auto& r : ex.results[a].rows) pts.emplace_back(r.delta, r.escape_time);
            esc.push_back({"M=" + std::to_string(ex.orders[a]), pts});
        }
        for (const auto& r : ex.results.back().rows) {
            std::vector<std::pair<double, double>> pts;
            for (auto [t, d] : r.trace) pts.emplace_back(t, d / r.delta);
            dist.push_back({"delta=" + num(r.delta), pts});
        }
        std::ofstream(run.path("escape_time.svg")) << svg_plot("escape time from the 2 delta tube", "delta", "escape time", esc, true, true);
        std::ofstream(run.path("distance.svg")) << svg_plot("distance / delta, highest order", "t", "d / delta", dist, false, false);
    }
    run.write_checks("stability_checks.csv", ex.report);
    return run.finish(ex.report.ok() ? kOk : kAssertion);
}

int cmd_measure(const Common& c) {
    Run run("measure", c);
    const auto& cfg = run.cfg;
    const auto ex = exp::measure_experiment(cfg.measure);
    {
        Csv csv(run.path("measure.csv"), {"eta_tilde", "query", "fraction", "ci_lo", "ci_hi", "hits", "samples", "bound"});
        auto emit = [&](const exp::MeasureRow& r) {
            csv.row({num(r.eta), "\"" + r.query + "\"", num(r.mc.fraction), num(r.mc.ci_lo), num(r.mc.ci_hi), num(r.mc.hits),
                     num(r.mc.samples), num(r.bound)});
        };
        for (const auto& r : ex.rows) emit(r);
        if (!cfg.measure.planted)
            for (const auto& r : ex.unions) emit(r);
    }
    if (!cfg.measure.planted) {
        const FrequencySet f = exp::nls_box_family().at(exp::nls_box_family().center());
        Csv csv(run.path("count_bound.csv"), {"k_abs", "ltilde_abs", "A", "union_bound"});
        for (int k = 0; k <= cfg.measure.Kmax; ++k)
            for (int l = 0; l <= cfg.measure.M + 2; ++l) {
                const CountBound b = count_bound(f, k, l, cfg.measure.Kmax, cfg.measure.Ncut, cfg.measure.M, cfg.measure.tau,
                                                 cfg.measure.etas.empty() ? 0.1 : cfg.measure.etas.front());
                csv.row({num(k), num(l), num(b.A), num(b.union_bound)});
            }
    }
    if (run.svg() && !cfg.measure.planted) {
        std::vector<std::pair<double, double>> frac, bound;
        for (const auto& r : ex.unions) {
            frac.emplace_back(r.eta, std::max(r.mc.fraction, 1e-12));
            bound.emplace_back(r.eta, r.bound);
        }
        std::ofstream(run.path("measure.svg")) << svg_plot("excised fraction", "eta~", "fraction", {{"Monte Carlo", frac}, {"union bound", bound}}, true, true);
    }
    run.write_checks("measure_checks.csv", ex.report);
    return run.finish(ex.report.ok() ? kOk : kAssertion, {{"slope", ex.slope}});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kamstab: normal forms, resonance measures and NLS torus stability"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "JSON run configuration");
        sub->add_option("--out", common.out, "output directory")->capture_default_str();
        sub->add_option("--seed", common.seed, "override the configured seed");
        sub->add_option("--jobs", common.jobs, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--svg", common.svg, "also write SVG plots");
    };
    struct Entry {
        const char* name;
        const char* help;
        int (*fn)(const Common&);
    };
    const Entry entries[] = {
        {"bracket-check", "Poisson bracket identity suite", cmd_bracket_check},
        {"norm-report", "norm estimates and inequality slacks", cmd_norm_report},
        {"kam", "KAM iteration to the order-2 normal form", cmd_kam},
        {"pnf", "partial normal form of order M+2", cmd_pnf},
        {"simulate", "spectral simulation of the truncated NLS", cmd_simulate},
        {"stability", "escape times from the 2 delta tube", cmd_stability},
        {"measure", "Monte-Carlo measure of resonant parameter sets", cmd_measure},
    };
    int (*chosen)(const Common&) = nullptr;
    for (const auto& e : entries) {
        CLI::App* sub = app.add_subcommand(e.name, e.help);
        add_common(sub);
        sub->callback([&chosen, fn = e.fn] { chosen = fn; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }
    try {
        return chosen(common);
    } catch (const SmallDivisorError& e) {
        std::cerr << "small divisor: " << e.what() << '\n';
        return kDivisor;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
}
