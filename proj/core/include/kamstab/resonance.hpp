#pragma once

#include "kamstab/ftalgebra.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace kamstab {

/// Tangent frequencies omega (n) and normal frequencies Omega (J) with parameter jets.
struct FrequencySet {
    std::vector<double> omega, Omega;
    std::vector<std::vector<double>> domega, dOmega;  ///< [i][param]
    double c1 = 1.0, c2 = 1.0;
    std::vector<int> labels;   ///< physical index of each normal mode; empty means 1..J
    double twist_drift = 0.0;  ///< allowed deviation from the identity twist structure

    int n() const { return static_cast<int>(omega.size()); }
    int J() const { return static_cast<int>(Omega.size()); }
    int m() const;
    double label(int j) const { return labels.empty() ? j + 1.0 : static_cast<double>(labels[j]); }

    /// N = sum omega_i y_i + sum Omega_j q_j qbar_j.
    Poly integrable_part(const TruncationSpec& t) const;
};

struct AsymptoticsReport {
    bool ok = true;
    double best_c1 = 0;  ///< min |Omega_i - Omega_j| / (|i-j|(i+j))
    double best_c2 = 0;  ///< max |Omega_j| / j^2
};
/// Checks |Omega_i - Omega_j| >= c1|i-j|(i+j) and |Omega_j| <= c2 j^2 on the stored modes.
AsymptoticsReport check_frequency_asymptotics(const FrequencySet& f);

/// Largest deviation of the parameter jets from d omega_i = e_{tparam[i]}, d Omega_j = e_{nparam[j]}.
double twist_defect(const FrequencySet& f, const std::vector<int>& tparam, const std::vector<int>& nparam);

enum class GapForm { Kam, Pnf };

/// One small-divisor query <k,omega> + <l,Omega>; l covers all J normal modes,
/// the first Ncut of which are the low modes.
struct ResonanceQuery {
    std::vector<int> k;
    std::vector<int> l;
    double tau = 4.0;
    double eta = 0.1;
    int M = 0;
    int Ncut = 1;
    GapForm form = GapForm::Kam;

    int low_abs() const;
    int high_abs() const;
    /// eta/(|k|+1)^tau, or eta/(4^M (|k|+1)^tau Ncut^{(|l~|+4)^2}).
    double gap() const;
    std::string str() const;
};

struct DivisorValue {
    double value = 0;
    std::vector<double> dxi;
};
DivisorValue small_divisor(const ResonanceQuery& q, const FrequencySet& f);

struct NonresonanceLimits {
    int Kmax = 4;
    int max_tail_label = 1 << 20;  ///< tail modes above this label are not enumerated
};

enum class CertStatus { Certified, Violated, Inconclusive };

struct NonresonanceResult {
    CertStatus status = CertStatus::Certified;
    double min_ratio = 0;  ///< min |d|/gap over enumerated queries
    std::optional<ResonanceQuery> argmin;
    std::optional<ResonanceQuery> violation;
    long enumerated = 0;
    double tail_cutoff = 0;
    std::string message;
};

/// Exhaustive check of the (eta~, Ncut, M) non-resonance inequalities up to |k| <= Kmax.
NonresonanceResult check_nonresonant(const FrequencySet& f, double eta_tilde, int Ncut, int M, double tau,
                                     const NonresonanceLimits& limits);

/// Label above which tail combinations are provably non-resonant.
double tail_cutoff(const FrequencySet& f, int kabs, int Ncut, int j0);

/// A parameter box with a frequency map.
struct ParameterFamily {
    std::vector<double> lo, hi;
    std::function<FrequencySet(const std::vector<double>&)> at;

    double volume() const;
    std::vector<double> center() const;
};

struct MeasureResult {
    double fraction = 0;
    double ci_lo = 0, ci_hi = 0;
    long hits = 0;
    long samples = 0;
};

MeasureResult wilson_interval(long hits, long samples);

MeasureResult resonant_measure_mc(const ParameterFamily& fam, const ResonanceQuery& q, long samples,
                                  std::uint64_t seed);
/// Fraction of the box lying in at least one of the catalog's resonant sets.
MeasureResult union_measure_mc(const ParameterFamily& fam, const std::vector<ResonanceQuery>& qs, long samples,
                               std::uint64_t seed);

/// Strip bound 2 gap / max_i(|d_i divisor| width_i), capped at 1, from the jets at the box center.
double strip_bound(const ParameterFamily& fam, const ResonanceQuery& q);

/// Queries whose resonant set meets the box (checked on the affine model through the center jets).
std::vector<ResonanceQuery> nonempty_catalog(const ParameterFamily& fam, int Kmax, int Ncut, int M, double tau,
                                             double eta, GapForm form);

struct CountBound {
    double A = 0;             ///< count bound for the given |k| and |l~|
    std::uint64_t A_int = 0;  ///< ceil(A), saturating
    double union_bound = 0;   ///< sum over |k| <= K, |l~| <= M+2 of 4 eta~ A / (4^M (|k|+1)^tau C)
};
double count_A(int kabs, int ltilde_abs, int N, int j0, const FrequencySet& f);
CountBound count_bound(const FrequencySet& f, int kabs, int ltilde_abs, int K, int Ncut, int M, double tau,
                       double eta_tilde);

}  // namespace kamstab
