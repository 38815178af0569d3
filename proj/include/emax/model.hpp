#pragma once

// Core domain types and the Emax mean model
//
//     eta(x, theta) = theta0 + theta1 * x / (x + theta2),
//
// together with the shifted parameterization used when the lowest dose a is
// positive, and the locally D-optimal three-point design machinery.

#include <array>
#include <Eigen/Dense>

#include "emax/errors.hpp"

namespace emax {

// Parameter vector of the three-parameter Emax model.
//   theta0 : baseline response (response units)
//   theta1 : asymptotic maximum effect (response units)
//   theta2 : half-effect dose offset (dose units)
struct EmaxParams {
    double theta0 = 0.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
};

// Parameters of the same curve in the shifted frame x~ = x - a.
//   t0 : mean response at the lowest dose a
//   t1 : maximum effect relative to the response at a
//   t2 : dose increment above a producing half of t1
struct TildeParams {
    double t0 = 0.0;
    double t1 = 0.0;
    double t2 = 0.0;
};

enum class Admissibility { Strict, Relaxed };

// Admissible parameters make the mean curve an increasing concave
// hyperbola branch on doses above a: theta1 > 0 and theta2 > -a.
bool is_admissible(const EmaxParams& p, double a);
bool is_admissible(const TildeParams& t);  // t1 > 0 && t2 > 0

// Checked construction.  Strict mode enforces admissibility; relaxed mode
// only requires finite values (solver iterates may transiently leave the
// admissible set) and leaves pole checks to the evaluation sites.
EmaxParams make_params(double theta0, double theta1, double theta2, double a,
                       Admissibility mode = Admissibility::Strict);

// Dose interval [a, b], 0 <= a < b.
struct DoseDomain {
    DoseDomain(double a, double b);
    double a;
    double b;
};

// Three-point design: support a < x2 < b with non-negative weights
// summing to one.
struct ThreePointDesign {
    ThreePointDesign(DoseDomain domain, double x2, std::array<double, 3> weights);
    DoseDomain domain;
    double x2;
    std::array<double, 3> weights;

    std::array<double, 3> doses() const { return {domain.a, x2, domain.b}; }
};

// Homoscedastic Gaussian error with standard deviation sigma > 0.
struct NoiseModel {
    explicit NoiseModel(double sigma);
    double sigma;
};

// Mean response.  Throws SingularityError at the vertical asymptote
// x = -theta2.
double eta(double x, const EmaxParams& p);

// Gradient of eta with respect to (theta0, theta1, theta2):
//   (1, x/(x+theta2), -theta1*x/(x+theta2)^2)
Eigen::Vector3d eta_gradient(double x, const EmaxParams& p);

// Reparameterization between the natural and the shifted frame.
// from_tilde(to_tilde(p, a), a) == p wherever both maps are defined.
TildeParams to_tilde(const EmaxParams& p, double a);
EmaxParams from_tilde(const TildeParams& t, double a);

double eta_tilde(double x, const TildeParams& t, double a);

// Central support point of the locally D-optimal design,
//   x*(theta2) = (b(a+theta2) + a(b+theta2)) / ((a+theta2) + (b+theta2)),
// which lies strictly inside (a, (a+b)/2) for theta2 > -a.
double d_optimal_x2(const DoseDomain& domain, double theta2);

// The full locally D-optimal design: {a, x*(theta2), b} with equal weights.
ThreePointDesign d_optimal_design(const DoseDomain& domain, double theta2);

// Expected Fisher information of n observations allocated according to the
// design weights: (n / sigma^2) * sum_i w_i grad(x_i) grad(x_i)^T.
// n need not be an integer (continuous design formalism).
Eigen::Matrix3d fisher_information(const ThreePointDesign& design, const EmaxParams& p,
                                   const NoiseModel& noise, double n);

}  // namespace emax
