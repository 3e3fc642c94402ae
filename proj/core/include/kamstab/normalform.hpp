#pragma once

#include "kamstab/ftalgebra.hpp"
#include "kamstab/norms.hpp"
#include "kamstab/resonance.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace kamstab {

/// Raised when a homological division meets a divisor below its gap.
struct SmallDivisorError : std::runtime_error {
    ResonanceQuery query;
    double value = 0;
    double gap = 0;
    SmallDivisorError(ResonanceQuery q, double v, double g);
};

/// Iteration constants: eta_m = eta 2^-m, eps_m = eta^12 eps^{(4/3)^m}, s_m = r_m = (1 - tau_m) sigma.
struct IterationSchedule {
    double eta = 0.5;
    double epsilon = 1e-3;
    double s0 = 0.5, r0 = 0.5;
    double sigma = 0;  ///< 0 means min(s0, r0)
    double tau = 2.0;
    double floor_tol = 1e-13;  ///< stop once the low-order remainder falls below this
    int lie_order = 24;
    double lie_tol = 1e-20;    ///< relative stopping tolerance of the Lie series
    double prune_tol = 1e-22;  ///< coefficients below this are dropped after each step

    double eta_m(int m) const;
    double eps_m(int m) const;
    double tau_m(int m) const;
    double s_m(int m) const;
    double r_m(int m) const;
};

struct HomologicalResult {
    Poly F;   ///< generator of weight <= 2
    Poly dN;  ///< k = 0 normal terms (constant, y_j, q_j qbar_j) moved into N
    FrequencySet f_plus;
    double residual = 0;    ///< l1 (values and jets) of {N,F} + R^low + {R^high,F}^low - dN
    double input_norm = 0;  ///< l1 (values and jets) of R
    double truncation_loss = 0;
    double min_gap_ratio = 0;
    int divisions = 0;
};

/// Staged solve of {N,F} + R^low + {R^high,F}^low = N_+ - N: F^x, then F^1, then F^y and F^2.
HomologicalResult solve_homological_order2(const Poly& N, const Poly& R, const FrequencySet& f, double eta,
                                           double tau);

/// Low part (weight <= 2) of a polynomial.
Poly low_part(const Poly& W);
Poly high_part(const Poly& W);

struct KamStepReport {
    int step = 0;
    double eta = 0;
    double low_before = 0, low_after = 0;  ///< l1 of the weight <= 2 remainder
    double high_norm = 0;
    double residual = 0;
    double freq_drift = 0;
    double truncation_mass = 0;
    int lie_terms = 0;
    bool contracted = true;
};

struct PnfStepReport {
    int j0 = 0;
    double block_norm = 0;  ///< l1 of the non-normal degree-(j0+1) block that was removed
    double generator_norm = 0;
    double zhat_norm = 0;
    std::vector<double> p_weight_norms;  ///< l1 of P by weight after the step
    double truncation_mass = 0;
    double min_gap_ratio = 0;
};

/// One logged generator with the domain parameters it was built for.
struct TransformRecord {
    std::string stage;  ///< "kam" or "pnf"
    int step = 0;
    double s = 0, r = 0;
    Poly F;
};

struct NormalFormState {
    TruncationSpec trunc;
    FrequencySet freq;
    Poly N;           ///< integrable part plus constant
    Poly R;           ///< remainder (before the partial normal form)
    Poly Z, P, Q;     ///< partial normal form parts; empty before pnf_iterate
    std::string stage = "input";
    int M = 0, Ncut = 0;
    std::vector<TransformRecord> log;
    std::vector<KamStepReport> kam_reports;
    std::vector<PnfStepReport> pnf_reports;

    static NormalFormState from_hamiltonian(const FrequencySet& f, const Poly& R);
    Poly hamiltonian() const;
    void save(const std::filesystem::path& dir) const;
    static NormalFormState load(const std::filesystem::path& dir);
};

struct KamStepOutcome {
    Poly N, R, F;
    FrequencySet f;
    KamStepReport report;
};

KamStepOutcome kam_step(const Poly& N, const Poly& R, const FrequencySet& f, const IterationSchedule& sch, int m);

/// Runs KAM steps until the low remainder drops below floor_tol or m_max steps are done.
/// Continues from st.kam_reports.size(), so a reloaded state resumes where it stopped.
NormalFormState kam_iterate(NormalFormState st, const IterationSchedule& sch, int m_max);

struct PnfSolveResult {
    Poly F;
    Poly Zhat;
    double min_gap_ratio = 0;
    int divisions = 0;
};

/// Kills the non-normal part of a degree-(j0+1) block with at most two tail factors.
PnfSolveResult pnf_solve(const Poly& block, const FrequencySet& f, double eta_tilde, int Ncut, int M, double tau);

struct PnfOptions {
    int M = 2;
    int Ncut = 1;
    double eta_tilde = 0.1;
    double tau = 2.0;
    int lie_order = 24;
    double lie_tol = 1e-20;
    double prune_tol = 1e-22;
};

/// Runs j0 = 2..M+1 on H = N + R and splits the result into Z, P, Q.
NormalFormState pnf_iterate(NormalFormState st, const PnfOptions& opt);

/// Splits H - N into Z (normal, weight in [3, maxw], tail <= 2), P (other tail <= 2) and Q (tail >= 3).
void split_zpq(const Poly& rest, int Ncut, int maxw, Poly& Z, Poly& P, Poly& Q);

struct NormalFormCheck {
    bool ok = true;
    double max_violation = 0;
    std::string worst;
    bool z_structural = true;  ///< Z has k = 0 and b = c everywhere
};
NormalFormCheck verify_normalform(const NormalFormState& st, double tol);

/// {Z, q_j qbar_j} and {Z, y_j} for all j; returns the largest coefficient found.
double integrability_defect(const Poly& Z);

// ---- transforms ---------------------------------------------------------

struct FlowOptions {
    double abs_tol = 1e-13;
    double rel_tol = 1e-13;
};

/// Time-t map of X_F from a point (complex state, q and qbar independent).
PhasePoint flow(const Poly& F, const PhasePoint& p, double t, const FlowOptions& opt = {});

/// Original point -> normalized point (inverse flows, first generator first).
PhasePoint to_normalized(const std::vector<TransformRecord>& log, const PhasePoint& p, const FlowOptions& opt = {});
/// Normalized point -> original point (forward flows, last generator first).
PhasePoint to_original(const std::vector<TransformRecord>& log, const PhasePoint& p, const FlowOptions& opt = {});

/// W o Phi_0 o ... o Phi_k: a function of the original coordinates rewritten in the normalized ones.
Poly pull_to_normalized(const std::vector<TransformRecord>& log, const Poly& W, int order, double tol);

/// Polynomial coordinate map: x-components are x + dx, the others plain polynomials.
struct CoordinateMap {
    std::vector<Poly> dx, y, q, qb;
    PhasePoint operator()(const PhasePoint& p) const;
};
/// Normalized coordinates as functions of the original ones (or the reverse).
CoordinateMap coordinate_map(const std::vector<TransformRecord>& log, bool to_normalized_coords,
                             const TruncationSpec& t, int order, double tol);

/// |dx| + r^-2 |dy| + r^-1 (||dq||_p + ||dqb||_p) between two points.
double displacement(const PhasePoint& a, const PhasePoint& b, const DomainSpec& d);

/// Omega(Da, Db) - Omega(a, b) for the time-1 map of F at a real point, by central differences.
double symplectic_defect(const Poly& F, const PhasePoint& p, std::uint64_t seed, double h = 1e-5);

}  // namespace kamstab
