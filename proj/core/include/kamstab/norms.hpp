#pragma once

#include "kamstab/ftalgebra.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kamstab {

/// Domain D(s,r,r) with Sobolev exponent p.
///
/// labels[j] is the physical index of normal mode j (used in the weights j^p); empty means 1..J.
struct DomainSpec {
    double s = 0.5;
    double r = 1.0;
    double p = 1.0;
    std::vector<int> labels;

    void validate() const;
    double label(int j) const { return labels.empty() ? j + 1.0 : static_cast<double>(labels[j]); }
};

/// Certified upper bound and sampled lower bound of a sup-type norm.
struct NormEstimate {
    double upper = 0;
    double lower = 0;
    int samples = 0;
    std::uint64_t seed = 0;

    NormEstimate& operator+=(const NormEstimate& o) {
        upper += o.upper;
        lower += o.lower;
        samples += o.samples;
        return *this;
    }
    NormEstimate scaled(double f) const { return {upper * f, lower * f, samples, seed}; }
};

struct SamplingOptions {
    int samples = 1000;
    std::uint64_t seed = 1;
    int ascent_starts = 3;
    int ascent_iters = 150;
    int max_basis_tuples = 20000;
};

double angle_norm(const Poly& W, double s);
double xy_norm(const Poly& W, double s, double r);

/// Modulus: a z-polynomial whose z^{bc} coefficient is xy_norm of the (b,c) coefficient function.
Poly majorant(const Poly& W, double s, double r);

/// Weighted l2 norm of one half (q or qbar) of a 2J test vector.
double half_norm(const std::vector<double>& z, int half, const DomainSpec& d, double w);
/// ||z||_w = ||q||_w + ||qbar||_w.
double znorm(const std::vector<double>& z, const DomainSpec& d, double w);
/// Gauge ||(z^h)||_{p,1} = (1/h) sum_j ||z^(j)||_p prod_{i != j} ||z^(i)||_1.
double gauge_p1(const std::vector<std::vector<double>>& zs, const DomainSpec& d);
/// Permutation-averaged form of the gauge (the left side of the symmetrization identity).
double gauge_symmetrized(const std::vector<std::vector<double>>& zs, const DomainSpec& d);

NormEstimate ztame_norm(const Poly& W, const DomainSpec& d, const SamplingOptions& opt = {});
NormEstimate tangent_norm(const Poly& W, Var direction, const DomainSpec& d, const SamplingOptions& opt = {});
NormEstimate vf_tame_norm(const Poly& W, const DomainSpec& d, const SamplingOptions& opt = {});

/// Sampled sup over D(s,r,r) of |U_y| + r^{-2}|U_x| + r^{-1}||U_z||_p (sup norm on tangent vectors).
double weighted_sup_norm(const VectorField& X, const DomainSpec& d, int sample_count, std::uint64_t seed);

/// Phase-point norm |w_x| + r^{-2}|w_y| + r^{-1}(||w_q||_p + ||w_qb||_p).
double phase_point_norm(const PhasePoint& w, const DomainSpec& d);

struct CauchyReport {
    double lhs_x = 0, rhs_x = 0, lhs_y = 0, rhs_y = 0;
    double slack_x() const { return rhs_x - lhs_x; }
    double slack_y() const { return rhs_y - lhs_y; }
};
/// Cauchy estimates on the x-strip (shrink sigma) and the y-ball (shrink sigma_p < r).
CauchyReport check_cauchy(const Poly& W, double s, double sigma, double r, double sigma_p);

/// Sum over z-monomials of xy_norm of the coefficient functions.
double total_xy_norm(const Poly& W, double s, double r);

/// rhs - lhs of ||z||_1 <= ||z||_p / (N+1)^{p-1} for z supported on labels > N.
double smoothing_gap(const std::vector<double>& z, int N, const DomainSpec& d);

}  // namespace kamstab
