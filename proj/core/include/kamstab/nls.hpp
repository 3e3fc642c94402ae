#pragma once

#include "kamstab/normalform.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace kamstab {

/// Hamiltonian normalization of the lifted quartic.
///
/// Dynamic: w = sqrt(zeta+y) e^{ix}, R = -(eps/2) sum P_abcd w_a wb_b w_c wb_d. This generates the
/// simulated equation under qdot = i dH/dqbar and keeps omega_i = j_i^2 + xi_{j_i}.
/// Scaled: w = sqrt(2(zeta+y)) e^{ix}, R = eps sum P_abcd w_a wb_b w_c wb_d.
enum class NlsNormalization { Dynamic, Scaled };

struct NlsConfig {
    std::vector<int> tangent{1};  ///< physical tangent modes j_1..j_n
    int J = 8;                    ///< retained sine modes 1..J
    double epsilon = 1e-3;
    std::vector<double> xi;       ///< xi[j-1] for mode j; empty means the box centre 1.5/j
    std::vector<double> zeta;     ///< initial actions; empty means all 1
    double p = 1.0;
    int sqrt_taylor_order = 4;
    int K = 12;                   ///< Fourier truncation of the lifted Hamiltonian
    int D = 4;                    ///< weight truncation
    bool jets = true;             ///< carry d/dxi_j for j = 1..J
    NlsNormalization normalization = NlsNormalization::Dynamic;

    void validate() const;
    double xi_of(int mode) const;
    double zeta_of(int i) const;
    std::vector<int> normal_modes() const;
};

/// Exact numerator S with P_ijkl = S / (2 pi).
int quartic_numerator(int i, int j, int k, int l);
double quartic_coefficient(int i, int j, int k, int l);

struct NlsModel {
    TruncationSpec trunc;
    FrequencySet freq;
    Poly N, R;
    double taylor_relative_bound = 0;  ///< (r^2 / min zeta)^{order+1} at the reference r
    std::vector<int> normal_modes;     ///< physical label of normal slot j
};

/// Lifted Hamiltonian N + R with the square roots expanded to sqrt_taylor_order.
NlsModel build_nls_hamiltonian(const NlsConfig& cfg, double r_ref = 0.1);

/// Sine-mode amplitudes w_1..w_J from a lifted point, and back.
std::vector<cplx> lift_to_modes(const NlsConfig& cfg, const PhasePoint& p);
PhasePoint modes_to_lift(const NlsConfig& cfg, const std::vector<cplx>& w);

/// Right-hand side of the J-mode Galerkin system dw/dt = i lambda w - i eps proj(|u|^2 u).
std::vector<cplx> nls_vector_field(const NlsConfig& cfg, const std::vector<cplx>& w);

struct SimState {
    std::vector<cplx> w;
    double t = 0;
    long steps = 0;
    double l2_initial = 0;
    double l2_drift = 0;  ///< max relative change of the l2 norm so far
};

struct SimOptions {
    double T = 1.0;
    double dt = 1e-3;
    double sample_dt = 0;  ///< 0: call the observer only at the end
};

/// Strang splitting: exact linear rotation and an RK4 kick on the dealiased cubic term.
/// The observer returns false to stop early. Throws on dt <= 0 or norm growth above 10x.
SimState simulate(const NlsConfig& cfg, SimState s, const SimOptions& opt,
                  const std::function<bool(const SimState&)>& observer = {});

/// d = 4 delta min_theta |x - theta| + |y|_1 / (4 delta) + ||q||_p + ||qbar||_p, grid plus refinement.
double torus_distance(const PhasePoint& w, double delta, const DomainSpec& d, int grid = 32);

struct StabilityOptions {
    std::vector<double> deltas;
    double T_max = 1e4;
    double horizon_scale = 0;  ///< > 0: per-delta budget min(T_max, horizon_scale delta^-horizon_exponent)
    double horizon_exponent = 1;
    double dt = 0.02;
    double sample_dt = 0.5;
    int excite_label = 2;      ///< physical mode carrying the initial normal offset
    int lie_order = 12;
    double lie_tol = 1e-18;
    int jobs = 1;
};

struct StabilityRow {
    double delta = 0;
    double budget = 0;
    double escape_time = 0;  ///< first exit from the 2 delta tube, or the budget
    bool escaped = false;
    double drift_N = 0;      ///< max |N~(t) - N~(0)| with N~ = ||q||_p^2
    double drift_Y = 0;      ///< max |y(t) - y(0)|
    double max_distance = 0;
    double l2_drift = 0;
    std::vector<std::pair<double, double>> trace;  ///< (t, distance)
};

struct StabilityResult {
    std::vector<StabilityRow> rows;
    double slope = 0, intercept = 0;  ///< least squares of log escape time on log delta
};

/// Tube coordinates from the first `log_prefix` logged generators of st.
StabilityResult stability_scan(const NlsConfig& cfg, const NormalFormState& st, std::size_t log_prefix,
                               const StabilityOptions& opt);

/// Version string of the linked FFT backend.
std::string fft_backend_version();

/// Minimal static SVG line plot.
std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                     const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& series,
                     bool logx, bool logy);

}  // namespace kamstab
