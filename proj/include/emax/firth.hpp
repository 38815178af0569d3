#pragma once

// Firth's modified-score machinery for the Emax model.
//
// The score U is shifted by a correction A with components
//
//   A1 =  (V11 M13 - Cov12 M12) / (theta1 D)
//   A2 =  (V11 M24 - Cov12 M23) / (theta1 D)
//   A3 = -(V11 M25 - Cov12 M24) / D
//
// where M_{l1,l2} are design moments of x^l1 / (theta2 + x)^l2, V and Cov
// their variances/covariance and D = V11 V12 - Cov12^2.  The same values
// are obtainable as (1/2) trace(I^-1 Q_t) from the expected information and
// the Q matrices; both routes are implemented and cross-checked in tests.
// The root of U + A, when admissible, is the Firth-modified estimate; it
// exists in situations where the MLE does not (convex data).

#include <array>
#include <optional>
#include <span>
#include <utility>

#include <Eigen/Dense>

#include "emax/mle.hpp"
#include "emax/model.hpp"
#include "emax/shape.hpp"

namespace emax {

// Design moments M_{l1,l2} = E_xi[ x^l1 / (theta2 + x)^l2 ] for l1 in {1,2}
// and l2 in 1..8, plus the derived variance terms.  D > 0 whenever at least
// two distinct support points carry positive weight.
struct DesignMoments {
    double m(int l1, int l2) const;  // bounds-checked accessor

    double moments[2][8];
    double v11;    // Var[x/(t2+x)]        = M22 - M11^2
    double v12;    // Var[x/(t2+x)^2]      = M24 - M12^2
    double cov12;  // Cov of the two above = M23 - M11 M12
    double d;      // V11 V12 - Cov12^2
};

// Moments under the design weights, or under the empirical weights n_i / n.
DesignMoments design_moments(const ThreePointDesign& design, double theta2);
DesignMoments design_moments(const SufficientStats& s, double theta2);

struct FirthCorrection {
    double a1;
    double a2;
    double a3;

    Eigen::Vector3d vec() const { return {a1, a2, a3}; }
};

// Closed-form correction from the design-moment algebra.  Free of sigma
// and of the total sample size.  Throws DomainError when the design is
// degenerate (D <= 0) or theta1 == 0.
FirthCorrection firth_correction(const DesignMoments& dm, double theta1);
FirthCorrection firth_correction(const ThreePointDesign& design, const EmaxParams& p);
FirthCorrection firth_correction(const SufficientStats& s, const EmaxParams& p);

// Independent route: A_t = (1/2) trace(I^-1 Q_t) assembled from the
// explicit expected-information and Q matrices.
FirthCorrection firth_correction_trace(const Eigen::Matrix3d& info,
                                       const std::array<Eigen::Matrix3d, 3>& q);

// Score vector U = (1/sigma^2) sum_i n_i (ybar_i - eta(x_i)) grad(x_i).
// The sufficient-statistic reduction is exact because the gradient is
// constant within a dose group.
Eigen::Vector3d score(const SufficientStats& s, const EmaxParams& p, const NoiseModel& noise);

// Raw-observation form, for callers that have not reduced their data.
Eigen::Vector3d score(std::span<const std::pair<double, double>> obs, const EmaxParams& p,
                      const NoiseModel& noise);

// Observed information O (depends on the data through the per-dose means).
Eigen::Matrix3d observed_information(const SufficientStats& s, const EmaxParams& p,
                                     const NoiseModel& noise);

// Expected information I = E(O) under the empirical design of s.
Eigen::Matrix3d expected_information(const SufficientStats& s, const EmaxParams& p,
                                     const NoiseModel& noise);

// Q_t = E(-O U_t): symmetric, zero except at (2,3),(3,2) and (3,3).
std::array<Eigen::Matrix3d, 3> q_matrices(const ThreePointDesign& design, const EmaxParams& p,
                                          const NoiseModel& noise, double n);
std::array<Eigen::Matrix3d, 3> q_matrices(const SufficientStats& s, const EmaxParams& p,
                                          const NoiseModel& noise);

// U* = U + A.
Eigen::Vector3d modified_score(const SufficientStats& s, const EmaxParams& p,
                               const NoiseModel& noise);

// All information-type matrices of a fit in one record.
struct InfoMatrices {
    Eigen::Matrix3d observed;
    Eigen::Matrix3d expected;
    std::array<Eigen::Matrix3d, 3> q;
};

InfoMatrices info_matrices(const SufficientStats& s, const EmaxParams& p,
                           const NoiseModel& noise);

struct SolverOpts {
    double tol = 1e-8;        // convergence: max-norm of U* below tol
    int max_iter = 200;       // Newton iterations per start
    double theta2_cap = 0.0;  // admissibility cap on |theta2|; 0 -> 1e6*(x3-x1)
    int grid_span = 6;        // theta2 starting grid (x3-x1)*2^k, k = -grid_span..grid_span
};

// Root search for U*(theta) = 0 by damped Newton with a numerical Jacobian
// and deterministic multi-start (unconstrained interpolant, theta2 grid with
// weighted-LS intercept/slope, optional user start).  Returns FirthEstimate
// for the first start converging to an admissible root (theta1 > 0,
// theta2 > -x1, |theta2| < cap), FirthFailure otherwise.  Failure is a
// value, not an exception.
FitResult firth_solve(const SufficientStats& s, const NoiseModel& noise,
                      std::optional<EmaxParams> init = std::nullopt,
                      const SolverOpts& opts = SolverOpts{});

}  // namespace emax
