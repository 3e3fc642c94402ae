#pragma once

#include "kamstab/poly.hpp"

#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace kamstab {

using Poly = BasicPoly<cplx>;
using ExactPoly = BasicPoly<GaussRational>;

/// Point of T^n x C^n x C^J x C^J; q and qbar are independent.
struct PhasePoint {
    std::vector<cplx> x, y, q, qb;

    PhasePoint() = default;
    PhasePoint(int n, int J) : x(n), y(n), q(J), qb(J) {}
    int n() const { return static_cast<int>(x.size()); }
    int J() const { return static_cast<int>(q.size()); }
    /// Flattened (x, y, q, qb).
    std::vector<cplx> flat() const;
    static PhasePoint from_flat(const std::vector<cplx>& v, int n, int J);
};

/// Builds c * e^{i<k,x>} y^a q^b qbar^c.
Poly monomial(const TruncationSpec& t, const std::vector<int>& k, const std::vector<int>& a,
              const std::vector<int>& b, const std::vector<int>& c, cplx coef,
              const std::vector<cplx>& jet = {});
MultiIndex make_index(const TruncationSpec& t, const std::vector<int>& k, const std::vector<int>& a,
                      const std::vector<int>& b, const std::vector<int>& c);

/// Partial derivatives of W grouped as the Hamiltonian vector field needs them.
/// X_W = (W_y, -W_x, W_z) with W_z = (i W_qbar, -i W_q).
struct VectorField {
    std::vector<Poly> Wy, Wx;  ///< dW/dy_j, dW/dx_j
    std::vector<Poly> zq, zqb; ///< i dW/dqbar_j (q-dot), -i dW/dq_j (qbar-dot)
};
VectorField vector_field(const Poly& W);

LieSeriesResult<cplx> lie_transform(const Poly& H, const Poly& F, const TruncationSpec& t, int max_order,
                                    double rel_tol = 0);

/// Drops terms whose value and jets all have magnitude <= tol; the dropped l1 mass is added
/// to the truncation mass.
Poly prune(const Poly& W, double tol);

/// l1 norm counting values and jets.
double jet_l1(const Poly& W);

/// Value of W at a point with its first derivatives in the parameters.
struct JetValue {
    cplx val;
    std::vector<cplx> dxi;
};
JetValue evaluate(const Poly& W, const PhasePoint& p);

/// Symmetric h-linear form of a z-homogeneous polynomial at nonnegative test vectors.
///
/// Each z vector has 2J entries (q slots then qbar slots). Coefficient functions are
/// evaluated at (x, y), default zero.
cplx symmetric_apply(const Poly& W, const std::vector<std::vector<double>>& z,
                     const std::vector<cplx>& x = {}, const std::vector<cplx>& y = {});

/// Permanent of a small nonnegative square matrix (subset DP).
double permanent(const std::vector<std::vector<double>>& A);

enum class SplitRule { LowHigh, Kuksin, Tail };

/// Named disjoint parts. LowHigh: "low","high" at threshold. Kuksin: "x","y","1","2",
/// "(0)".."(4)". Tail: "P" (|mu|+|nu| <= 2 on modes with index >= tail_start) and "Q".
std::map<std::string, Poly> degree_split(const Poly& W, SplitRule rule, int threshold = 2, int tail_start = 0);

int tail_degree(const MultiIndex& m, int tail_start);

/// Line format: header lines starting with '#', then `k;a;b;c;re;im[;re_d;im_d...]`.
void write_poly(std::ostream& os, const Poly& W);
Poly read_poly(std::istream& is);
std::string to_text(const Poly& W);
Poly from_text(const std::string& s);

/// Shortest decimal string that round-trips to the same double.
std::string fmt_double(double v);

/// Random polynomial generator for tests and checks.
struct RandomPolyOptions {
    int terms = 6;
    int max_weight = 3;
    int min_weight = 0;
    int max_k = 1;
    double coef_scale = 1.0;
    bool jets = true;
    bool integer_coefficients = false; ///< small integers, convertible exactly
};
Poly random_poly(const TruncationSpec& t, const RandomPolyOptions& opt, std::mt19937_64& rng);
ExactPoly to_exact(const Poly& W);
Poly from_exact(const ExactPoly& W);

}  // namespace kamstab
