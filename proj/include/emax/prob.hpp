#pragma once

// Probabilities of the shape classes under the Gaussian sampling model.
// The per-dose means are independent normals, so each class is a polyhedral
// (orthant-type) probability defined by the linear inequality systems of the
// classification.  Two evaluation methods:
//
//   MonteCarlo  - counter-based seeded draws, thread-partitionable, with
//                 binomial standard errors (default);
//   Quadrature  - conditioning reduces each three-row system to a 1-D
//                 integral of normal cdf factors, evaluated adaptively
//                 (the convex-shape probability is a single closed-form cdf).
//
// On top of the class probabilities sit the design tools: the power function
// beta(theta2; x2) of the concave-non-increasing rejection region, and its
// inversion alpha -> x2 used to place the central dose.

#include <array>
#include <cstdint>
#include <vector>

#include "emax/model.hpp"

namespace emax {

// A data-generating configuration: true parameters, design, noise and
// per-dose sample sizes.
struct Scenario {
    Scenario(EmaxParams truth, ThreePointDesign design, NoiseModel noise,
             std::array<std::int64_t, 3> n_per_point);

    EmaxParams truth;
    ThreePointDesign design;
    NoiseModel noise;
    std::array<std::int64_t, 3> n_per_point;
};

enum class ProbMethod { MonteCarlo, Quadrature };

struct ProbOpts {
    ProbMethod method = ProbMethod::MonteCarlo;
    std::int64_t draws = 1'000'000;  // Monte Carlo sample size
    std::uint64_t seed = 20240901;
    int threads = 0;          // 0 -> hardware concurrency
    double quad_tol = 1e-9;   // requested absolute tolerance (spec: <= 1e-6)
};

struct ShapeProbabilities {
    double p_exists;
    double p_case1a;
    double p_case1b;
    double p_case2;
    double se_exists;
    double se_case1a;
    double se_case1b;
    double se_case2;
    ProbMethod method;

    double p_case1() const { return p_case1a + p_case1b; }
};

ShapeProbabilities shape_probabilities(const Scenario& sc, const ProbOpts& opts = ProbOpts{});

// Power of the shape-based test at true half-effect parameter theta2 with
// central design point x2: the probability of observing Case 1.  theta0,
// theta1, sigma, the dose domain and the group sizes come from `base`.
// Evaluated by quadrature by default so it can be root-found.
double power_function(double theta2, double x2, const Scenario& base,
                      const ProbOpts& opts = ProbOpts{.method = ProbMethod::Quadrature});

// Solve alpha = beta(theta2_g; x2) for x2 by a 64-point log-grid bracket
// scan over (a, b) followed by bisection.  Throws DomainError when alpha is
// outside the attainable range on the grid.
double x2_for_alpha(double theta2_g, double alpha, const Scenario& base,
                    const ProbOpts& opts = ProbOpts{.method = ProbMethod::Quadrature});

// Augmentation dose for Case-1 data: x2_for_alpha(theta2_1, alpha), expected
// to land left of x2_for_alpha(theta2_g, alpha) when theta2_1 < theta2_g.
// The containment is a recommendation, not a guarantee; violations surface
// in the `contained` flag rather than as an error.
struct AugmentationPoint {
    double x2;
    double x2_upper;  // the theta2_g solution
    bool contained;   // x2 < x2_upper
};
AugmentationPoint augmentation_point(double theta2_g, double theta2_1, double alpha,
                                     const Scenario& base,
                                     const ProbOpts& opts = ProbOpts{.method = ProbMethod::Quadrature});

// One record of the x2 sweep used to tabulate the existence/failure
// probabilities as a function of the central design point.
struct SweepRow {
    double x2;
    double theta2_true;
    double p_exists;
    double p_case1a;
    double p_case1b;
    double p_case2;
    double se_exists;
    double se_case1a;
    double se_case1b;
    double se_case2;
};

// Evaluate shape probabilities over an x2 grid for each true theta2 in the
// list.  The default grid is `grid_points` log-spaced doses in (a, b) plus
// the D-optimal point x*(theta2_true) of each curve.
std::vector<SweepRow> sweep_existence(const Scenario& base, const std::vector<double>& theta2_list,
                                      int grid_points = 64,
                                      const ProbOpts& opts = ProbOpts{.method = ProbMethod::Quadrature});

// Log-spaced grid over the open interval (a, b), shared by the sweep and the
// alpha inversion.
std::vector<double> log_grid(const DoseDomain& domain, int points);

}  // namespace emax
