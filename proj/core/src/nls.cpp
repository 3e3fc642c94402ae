#include "kamstab/nls.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace kamstab {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// In-place DST-I (FFTW RODFT00) of length G; planning and destruction are serialized.
class Dst1 {
public:
    explicit Dst1(int G) : G_(G), buf_(static_cast<double*>(fftw_malloc(sizeof(double) * G))) {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan_ = fftw_plan_r2r_1d(G, buf_, buf_, FFTW_RODFT00, FFTW_ESTIMATE);
    }
    ~Dst1() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(buf_);
    }
    Dst1(const Dst1&) = delete;
    Dst1& operator=(const Dst1&) = delete;

    double* data() { return buf_; }
    void run() { fftw_execute(plan_); }
    int size() const { return G_; }

private:
    int G_;
    double* buf_;
    fftw_plan plan_;
};

int grid_size(int J) {
    int G = 1;
    while (G < 2 * J) G = 2 * G + 1;
    return G;
}

/// Galerkin cubic term proj_j(|u|^2 u) for j = 1..J, exact for G >= 2J.
class CubicTerm {
public:
    explicit CubicTerm(int J) : J_(J), G_(grid_size(J)), dst_(G_), ure_(G_), uim_(G_) {}

    void operator()(const std::vector<cplx>& w, std::vector<cplx>& out) {
        const double amp = std::sqrt(2.0 / kPi) * 0.5;
        synth(w, true, ure_);
        synth(w, false, uim_);
        for (int m = 0; m < G_; ++m) {
            const double a = amp * ure_[m], b = amp * uim_[m];
            const double mod2 = a * a + b * b;
            ure_[m] = mod2 * a;
            uim_[m] = mod2 * b;
        }
        const double proj = (kPi / (G_ + 1)) * std::sqrt(2.0 / kPi) * 0.5;
        out.assign(J_, cplx{});
        analyse(ure_, proj, out, true);
        analyse(uim_, proj, out, false);
    }

private:
    void synth(const std::vector<cplx>& w, bool real, std::vector<double>& u) {
        double* b = dst_.data();
        std::fill(b, b + G_, 0.0);
        for (int j = 0; j < J_; ++j) b[j] = real ? w[j].real() : w[j].imag();
        dst_.run();
        std::copy(b, b + G_, u.begin());
    }
    void analyse(const std::vector<double>& g, double scale, std::vector<cplx>& out, bool real) {
        double* b = dst_.data();
        std::copy(g.begin(), g.end(), b);
        dst_.run();
        for (int j = 0; j < J_; ++j) out[j] += real ? cplx(scale * b[j], 0) : cplx(0, scale * b[j]);
    }

    int J_, G_;
    Dst1 dst_;
    std::vector<double> ure_, uim_;
};

double lambda(const NlsConfig& cfg, int mode) { return double(mode) * mode + cfg.xi_of(mode); }

double lift_scale(const NlsConfig& cfg) { return cfg.normalization == NlsNormalization::Scaled ? 2.0 : 1.0; }

double gen_binom(double a, int k) {
    double r = 1;
    for (int i = 0; i < k; ++i) r *= (a - i) / (i + 1);
    return r;
}

}  // namespace

void NlsConfig::validate() const {
    if (J < 1) throw std::invalid_argument("NlsConfig: J must be >= 1");
    std::vector<int> seen;
    for (int j : tangent) {
        if (j < 1 || j > J) throw std::invalid_argument("NlsConfig: tangent mode out of range 1..J");
        if (std::find(seen.begin(), seen.end(), j) != seen.end())
            throw std::invalid_argument("NlsConfig: tangent modes must be distinct");
        seen.push_back(j);
    }
    if (!xi.empty() && static_cast<int>(xi.size()) != J) throw std::invalid_argument("NlsConfig: xi needs J entries");
    if (!zeta.empty() && zeta.size() != tangent.size())
        throw std::invalid_argument("NlsConfig: zeta needs one entry per tangent mode");
    for (double z : zeta)
        if (!(z > 0)) throw std::invalid_argument("NlsConfig: zeta must be positive");
    if (!(p >= 1)) throw std::invalid_argument("NlsConfig: p must be >= 1");
    if (sqrt_taylor_order < D / 2)
        throw std::invalid_argument("NlsConfig: sqrt_taylor_order must be >= " + std::to_string(D / 2) +
                                    " for weight truncation D = " + std::to_string(D));
}

double NlsConfig::xi_of(int mode) const { return xi.empty() ? 1.5 / mode : xi[mode - 1]; }
double NlsConfig::zeta_of(int i) const { return zeta.empty() ? 1.0 : zeta[i]; }

std::vector<int> NlsConfig::normal_modes() const {
    std::vector<int> out;
    for (int j = 1; j <= J; ++j)
        if (std::find(tangent.begin(), tangent.end(), j) == tangent.end()) out.push_back(j);
    return out;
}

int quartic_numerator(int i, int j, int k, int l) {
    if (i < 1 || j < 1 || k < 1 || l < 1) throw std::invalid_argument("quartic_coefficient: indices must be positive");
    auto eq = [](int a, int b) { return (a == b ? 1 : 0) + (a == -b ? 1 : 0); };
    return eq(i - j, k - l) - eq(i - j, k + l) - eq(i + j, k - l) + eq(i + j, k + l);
}

double quartic_coefficient(int i, int j, int k, int l) { return quartic_numerator(i, j, k, l) / (2 * kPi); }

NlsModel build_nls_hamiltonian(const NlsConfig& cfg, double r_ref) {
    cfg.validate();
    NlsModel mdl;
    const int n = static_cast<int>(cfg.tangent.size());
    mdl.normal_modes = cfg.normal_modes();
    const int Jn = static_cast<int>(mdl.normal_modes.size());
    mdl.trunc = TruncationSpec{n, Jn, cfg.K, cfg.D, cfg.jets ? cfg.J : 0};
    mdl.trunc.validate();
    const TruncationSpec& t = mdl.trunc;

    FrequencySet& f = mdl.freq;
    f.c1 = 0.5;
    f.c2 = 3.0;
    f.labels = mdl.normal_modes;
    for (int i = 0; i < n; ++i) {
        f.omega.push_back(lambda(cfg, cfg.tangent[i]));
        std::vector<double> jet(t.m, 0.0);
        if (t.m) jet[cfg.tangent[i] - 1] = 1.0;
        f.domega.push_back(jet);
    }
    for (int s = 0; s < Jn; ++s) {
        f.Omega.push_back(lambda(cfg, mdl.normal_modes[s]));
        std::vector<double> jet(t.m, 0.0);
        if (t.m) jet[mdl.normal_modes[s] - 1] = 1.0;
        f.dOmega.push_back(jet);
    }
    mdl.N = f.integrable_part(t);

    // slot of each physical mode: tangent index i >= 0, or normal slot encoded as -(s+1)
    std::vector<int> slot(cfg.J + 1, 0);
    for (int i = 0; i < n; ++i) slot[cfg.tangent[i]] = i;
    for (int s = 0; s < Jn; ++s) slot[mdl.normal_modes[s]] = -(s + 1);

    const double A = lift_scale(cfg);
    const double c0 = cfg.normalization == NlsNormalization::Scaled ? cfg.epsilon : -0.5 * cfg.epsilon;
    const int order = cfg.sqrt_taylor_order;
    PolyAccumulator<cplx> acc(t);
    std::vector<int> e(n), kv(n), b(Jn), c(Jn), kk(n);
    for (int i1 = 1; i1 <= cfg.J; ++i1)
        for (int j1 = 1; j1 <= cfg.J; ++j1)
            for (int k1 = 1; k1 <= cfg.J; ++k1)
                for (int l1 = 1; l1 <= cfg.J; ++l1) {
                    const int S = quartic_numerator(i1, j1, k1, l1);
                    if (!S) continue;
                    std::fill(e.begin(), e.end(), 0);
                    std::fill(kv.begin(), kv.end(), 0);
                    std::fill(b.begin(), b.end(), 0);
                    std::fill(c.begin(), c.end(), 0);
                    const int modes[4] = {i1, j1, k1, l1};
                    for (int pos = 0; pos < 4; ++pos) {
                        const bool bar = pos % 2 == 1;
                        const int sl = slot[modes[pos]];
                        if (sl >= 0) {
                            ++e[sl];
                            kv[sl] += bar ? -1 : 1;
                        } else {
                            (bar ? c : b)[-sl - 1] += 1;
                        }
                    }
                    double base = c0 * S / (2 * kPi);
                    for (int i = 0; i < n; ++i) base *= std::pow(A * cfg.zeta_of(i), 0.5 * e[i]);
                    // product over tangent modes of sum_k binom(e/2, k) (y/zeta)^k
                    std::fill(kk.begin(), kk.end(), 0);
                    while (true) {
                        double coef = base;
                        for (int i = 0; i < n; ++i)
                            coef *= gen_binom(0.5 * e[i], kk[i]) / std::pow(cfg.zeta_of(i), kk[i]);
                        if (coef != 0) {
                            MultiIndex key(t.n, t.J);
                            for (int i = 0; i < n; ++i) {
                                key.set_k(i, kv[i]);
                                key.set_a(i, kk[i]);
                            }
                            for (int s = 0; s < Jn; ++s) {
                                key.set_b(s, b[s]);
                                key.set_c(s, c[s]);
                            }
                            acc.add(key, coef, nullptr);
                        }
                        int pos = 0;
                        while (pos < n && ++kk[pos] > order) kk[pos++] = 0;
                        if (pos == n) break;
                    }
                }
    mdl.R = acc.finish();
    mdl.R.set_real_flag(true);
    double zmin = 1e300;
    for (int i = 0; i < n; ++i) zmin = std::min(zmin, cfg.zeta_of(i));
    mdl.taylor_relative_bound = n ? std::pow(r_ref * r_ref / zmin, order + 1) : 0.0;
    return mdl;
}

std::vector<cplx> lift_to_modes(const NlsConfig& cfg, const PhasePoint& p) {
    const double A = lift_scale(cfg);
    std::vector<cplx> w(cfg.J);
    for (std::size_t i = 0; i < cfg.tangent.size(); ++i)
        w[cfg.tangent[i] - 1] = std::sqrt(A * (cfg.zeta_of(static_cast<int>(i)) + p.y[i])) * std::exp(cplx(0, 1) * p.x[i]);
    const auto nm = cfg.normal_modes();
    for (std::size_t s = 0; s < nm.size(); ++s) w[nm[s] - 1] = p.q[s];
    return w;
}

PhasePoint modes_to_lift(const NlsConfig& cfg, const std::vector<cplx>& w) {
    const double A = lift_scale(cfg);
    const auto nm = cfg.normal_modes();
    PhasePoint p(static_cast<int>(cfg.tangent.size()), static_cast<int>(nm.size()));
    for (std::size_t i = 0; i < cfg.tangent.size(); ++i) {
        const cplx v = w[cfg.tangent[i] - 1];
        p.x[i] = std::arg(v);
        p.y[i] = std::norm(v) / A - cfg.zeta_of(static_cast<int>(i));
    }
    for (std::size_t s = 0; s < nm.size(); ++s) {
        p.q[s] = w[nm[s] - 1];
        p.qb[s] = std::conj(p.q[s]);
    }
    return p;
}

std::vector<cplx> nls_vector_field(const NlsConfig& cfg, const std::vector<cplx>& w) {
    CubicTerm cubic(cfg.J);
    std::vector<cplx> g;
    cubic(w, g);
    std::vector<cplx> out(cfg.J);
    const cplx I(0, 1);
    for (int j = 0; j < cfg.J; ++j) out[j] = I * lambda(cfg, j + 1) * w[j] - I * cfg.epsilon * g[j];
    return out;
}

SimState simulate(const NlsConfig& cfg, SimState s, const SimOptions& opt,
                  const std::function<bool(const SimState&)>& observer) {
    if (!(opt.dt > 0)) throw std::invalid_argument("simulate: dt must be positive");
    if (static_cast<int>(s.w.size()) != cfg.J) throw std::invalid_argument("simulate: state needs J amplitudes");
    const int J = cfg.J;
    const long nsteps = std::max<long>(1, static_cast<long>(std::ceil(opt.T / opt.dt - 1e-9)));
    const double dt = opt.T / nsteps;
    const long every = opt.sample_dt > 0 ? std::max<long>(1, std::lround(opt.sample_dt / dt)) : nsteps;

    auto l2 = [](const std::vector<cplx>& w) {
        double a = 0;
        for (const auto& v : w) a += std::norm(v);
        return std::sqrt(a);
    };
    if (s.l2_initial == 0) s.l2_initial = l2(s.w);

    std::vector<cplx> half(J);
    for (int j = 0; j < J; ++j) half[j] = std::exp(cplx(0, lambda(cfg, j + 1) * dt / 2));
    CubicTerm cubic(J);
    const cplx mI(0, -cfg.epsilon);
    std::vector<cplx> k1, k2, k3, k4, tmp(J);
    auto rhs = [&](const std::vector<cplx>& w, std::vector<cplx>& out) {
        cubic(w, out);
        for (auto& v : out) v *= mI;
    };
    if (observer && !observer(s)) return s;
    for (long step = 1; step <= nsteps; ++step) {
        for (int j = 0; j < J; ++j) s.w[j] *= half[j];
        if (cfg.epsilon != 0) {
            rhs(s.w, k1);
            for (int j = 0; j < J; ++j) tmp[j] = s.w[j] + 0.5 * dt * k1[j];
            rhs(tmp, k2);
            for (int j = 0; j < J; ++j) tmp[j] = s.w[j] + 0.5 * dt * k2[j];
            rhs(tmp, k3);
            for (int j = 0; j < J; ++j) tmp[j] = s.w[j] + dt * k3[j];
            rhs(tmp, k4);
            for (int j = 0; j < J; ++j) s.w[j] += dt / 6 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        for (int j = 0; j < J; ++j) s.w[j] *= half[j];
        s.t += dt;
        ++s.steps;
        const double nrm = l2(s.w);
        if (s.l2_initial > 0) {
            s.l2_drift = std::max(s.l2_drift, std::abs(nrm - s.l2_initial) / s.l2_initial);
            if (!std::isfinite(nrm) || nrm > 10 * s.l2_initial)
                throw std::runtime_error("simulate: norm blow-up at t = " + fmt_double(s.t));
        }
        if (observer && (step % every == 0 || step == nsteps) && !observer(s)) break;
    }
    return s;
}

double torus_distance(const PhasePoint& w, double delta, const DomainSpec& d, int grid) {
    const double two_pi = 2 * kPi;
    auto wrap = [&](double a) {
        a = std::fmod(a, two_pi);
        if (a < 0) a += two_pi;
        return std::min(a, two_pi - a);
    };
    double ang = 0;
    for (int i = 0; i < w.n(); ++i) {
        const double xr = w.x[i].real();
        double best = 1e300, arg = 0;
        for (int g = 0; g < grid; ++g) {
            const double th = two_pi * g / grid;
            const double v = wrap(xr - th);
            if (v < best) best = v, arg = th;
        }
        // golden-section refinement on the bracketing grid cell
        double lo = arg - two_pi / grid, hi = arg + two_pi / grid;
        const double gr = 0.6180339887498949;
        for (int it = 0; it < 80; ++it) {
            const double a = hi - gr * (hi - lo), b = lo + gr * (hi - lo);
            if (wrap(xr - a) < wrap(xr - b))
                hi = b;
            else
                lo = a;
        }
        best = std::min(best, wrap(xr - 0.5 * (lo + hi)));
        ang = std::max(ang, std::hypot(best, w.x[i].imag()));
    }
    double ny = 0, nq = 0, nqb = 0;
    for (const auto& v : w.y) ny += std::abs(v);
    for (int j = 0; j < w.J(); ++j) {
        const double wt = std::pow(d.label(j), 2 * d.p);
        nq += std::norm(w.q[j]) * wt;
        nqb += std::norm(w.qb[j]) * wt;
    }
    return 4 * delta * ang + ny / (4 * delta) + std::sqrt(nq) + std::sqrt(nqb);
}

StabilityResult stability_scan(const NlsConfig& cfg, const NormalFormState& st, std::size_t log_prefix,
                               const StabilityOptions& opt) {
    if (log_prefix > st.log.size()) throw std::invalid_argument("stability_scan: log prefix too long");
    const std::vector<TransformRecord> log(st.log.begin(), st.log.begin() + static_cast<long>(log_prefix));
    const CoordinateMap to_norm = coordinate_map(log, true, st.trunc, opt.lie_order, opt.lie_tol);
    const CoordinateMap to_orig = coordinate_map(log, false, st.trunc, opt.lie_order, opt.lie_tol);
    const auto nm = cfg.normal_modes();
    DomainSpec dom;
    dom.p = cfg.p;
    dom.labels = nm;
    const auto slot_it = std::find(nm.begin(), nm.end(), opt.excite_label);
    if (slot_it == nm.end()) throw std::invalid_argument("stability_scan: excite_label is not a normal mode");
    const int slot = static_cast<int>(slot_it - nm.begin());
    const int n = static_cast<int>(cfg.tangent.size()), Jn = static_cast<int>(nm.size());

    StabilityResult res;
    res.rows.resize(opt.deltas.size());
    auto run = [&](std::size_t idx) {
        const double delta = opt.deltas[idx];
        StabilityRow& row = res.rows[idx];
        row.delta = delta;
        row.budget = opt.T_max;
        if (opt.horizon_scale > 0) row.budget = std::min(opt.T_max, opt.horizon_scale * std::pow(delta, -opt.horizon_exponent));
        PhasePoint z(n, Jn);
        const double a = delta / (2 * std::pow(double(opt.excite_label), cfg.p));
        z.q[slot] = a;
        z.qb[slot] = a;
        SimState s;
        s.w = lift_to_modes(cfg, to_orig(z));
        double N0 = 0;
        std::vector<double> y0;
        bool first = true;
        const long stride = std::max<long>(1, static_cast<long>(row.budget / opt.sample_dt / 2000));
        long count = 0;
        auto observe = [&](const SimState& cur) {
            const PhasePoint zn = to_norm(modes_to_lift(cfg, cur.w));
            const double dist = torus_distance(zn, delta, dom);
            double Nt = 0;
            for (int j = 0; j < Jn; ++j) Nt += std::norm(zn.q[j]) * std::pow(dom.label(j), 2 * cfg.p);
            if (first) {
                N0 = Nt;
                for (int i = 0; i < n; ++i) y0.push_back(zn.y[i].real());
                first = false;
            }
            row.drift_N = std::max(row.drift_N, std::abs(Nt - N0));
            for (int i = 0; i < n; ++i) row.drift_Y = std::max(row.drift_Y, std::abs(zn.y[i].real() - y0[i]));
            row.max_distance = std::max(row.max_distance, dist);
            if (count++ % stride == 0) row.trace.emplace_back(cur.t, dist);
            if (dist > 2 * delta) {
                row.escaped = true;
                row.escape_time = cur.t;
                row.trace.emplace_back(cur.t, dist);
                return false;
            }
            return true;
        };
        const SimState fin = simulate(cfg, s, {row.budget, opt.dt, opt.sample_dt}, observe);
        if (!row.escaped) row.escape_time = row.budget;
        row.l2_drift = fin.l2_drift;
    };
    const int jobs = std::max(1, opt.jobs);
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex mu;
    auto worker = [&] {
        while (true) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= opt.deltas.size()) return;
                i = next++;
            }
            run(i);
        }
    };
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    // log escape time = slope log delta + intercept
    const std::size_t m = res.rows.size();
    if (m >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& r : res.rows) {
            const double x = std::log(r.delta), y = std::log(r.escape_time);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double den = m * sxx - sx * sx;
        if (den != 0) {
            res.slope = (m * sxy - sx * sy) / den;
            res.intercept = (sy - res.slope * sx) / m;
        }
    }
    return res;
}

std::string fft_backend_version() { return fftw_version; }

std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                     const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& series,
                     bool logx, bool logy) {
    const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
    auto tx = [&](double v) { return logx ? std::log10(std::max(v, 1e-300)) : v; };
    auto ty = [&](double v) { return logy ? std::log10(std::max(v, 1e-300)) : v; };
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& s : series)
        for (auto [x, y] : s.second) {
            x0 = std::min(x0, tx(x));
            x1 = std::max(x1, tx(x));
            y0 = std::min(y0, ty(y));
            y1 = std::max(y1, ty(y));
        }
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    auto px = [&](double x) { return L + (tx(x) - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    auto tick = [&](double v, bool lg) {
        std::ostringstream t;
        t.precision(3);
        t << (lg ? std::pow(10.0, v) : v);
        return t.str();
    };
    os << "<text x=\"" << L << "\" y=\"" << H - B + 18 << "\" font-size=\"11\">" << tick(x0, logx) << "</text>\n";
    os << "<text x=\"" << W - R << "\" y=\"" << H - B + 18 << "\" font-size=\"11\" text-anchor=\"end\">" << tick(x1, logx) << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << H - B << "\" font-size=\"11\" text-anchor=\"end\">" << tick(y0, logy) << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << T + 10 << "\" font-size=\"11\" text-anchor=\"end\">" << tick(y1, logy) << "</text>\n";
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << "</text>\n";
    os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" font-size=\"13\" transform=\"rotate(-90 16 " << (T + H - B) / 2
       << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* col = colors[k % 5];
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
        for (auto [x, y] : series[k].second) os << px(x) << "," << py(y) << " ";
        os << "\"/>\n";
        os << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 + 14 * k << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << col
           << "\">" << series[k].first << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace kamstab
