#pragma once

// Reduction of raw dose-response observations to per-dose sufficient
// statistics and the geometric classification of the resulting three-point
// shape.  The class decides which estimator applies:
//
//   IncreasingConcave          -> exact closed-form MLE
//   Case1a / Case1b            -> no MLE; concave but non-increasing means
//   Case2a / Case2b            -> no MLE; convex means
//
// For the non-existence classes the best-fitting limit of Emax curves is a
// step at the lowest dose, a constant, or a straight line.

#include <array>
#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "emax/errors.hpp"
#include "emax/model.hpp"

namespace emax {

// Per-dose counts and sample means at three distinct doses x1 < x2 < x3.
struct SufficientStats {
    SufficientStats(std::array<double, 3> doses, std::array<std::int64_t, 3> counts,
                    std::array<double, 3> means);

    std::array<double, 3> x;
    std::array<std::int64_t, 3> n;
    std::array<double, 3> ybar;

    std::int64_t total_n() const { return n[0] + n[1] + n[2]; }
};

// One dose group of raw observations.
struct DoseGroup {
    double dose;
    std::vector<double> responses;
};

// Reduce raw observations to sufficient statistics.  Requires exactly three
// distinct doses, each with at least one response; groups with equal doses
// are rejected, not merged.
SufficientStats reduce(const std::vector<DoseGroup>& groups);

// MLE of sigma^2 from within-dose replication: (1/n) sum_ij (y_ij - ybar_i)^2.
// Convenience for when sigma is not known externally.
double pooled_sigma2(const std::vector<DoseGroup>& groups);

// Secant slopes, weighted least-squares line and weighted means derived
// from the sufficient statistics:
//   m1 = (ybar2-ybar1)/(x2-x1),  m2 = (ybar3-ybar1)/(x3-x1)
//   m0, q0: weighted OLS slope/intercept with weights n_i
//   ybar23 = (n2 ybar2 + n3 ybar3)/(n2+n3),  ybar = grand weighted mean
struct ShapeStats {
    double m1;
    double m2;
    double m0;
    double q0;
    double ybar23;
    double ybar;
};

enum class ShapeCase {
    IncreasingConcave,  // ybar1 < ybar2 < ybar3 and m1 > m2
    Case1a,             // concave non-increasing, ybar1 <  ybar23
    Case1b,             // concave non-increasing, ybar1 >= ybar23
    Case2a,             // convex (m1 <= m2), OLS slope m0 >  0
    Case2b,             // convex (m1 <= m2), OLS slope m0 <= 0
};

// The classification plus a flag recording whether any of the defining
// inequalities held with exact equality.  Boundary is metadata, not a
// terminal class: ties are folded into the non-strict side of each paper
// condition (m1 = m2 -> Case2, ybar1 = ybar23 -> Case1b, m0 = 0 -> Case2b,
// order ties under concavity -> Case1).
struct ShapeClass {
    ShapeCase kind;
    bool boundary;
};

const char* to_string(ShapeCase c);

std::pair<ShapeClass, ShapeStats> classify(const SufficientStats& s);

// Best-fitting members of the closure of the Emax family when the MLE does
// not exist.
struct StepAtA {
    double low;   // value at x = x1
    double high;  // value on (x1, x3]
};
struct ConstantFit {
    double level;
};
struct LineFit {
    double slope;
    double intercept;
};
using LimitingFit = std::variant<StepAtA, ConstantFit, LineFit>;

// Case1a -> StepAtA{ybar1, ybar23}; Case1b, Case2b -> ConstantFit{ybar};
// Case2a -> LineFit{m0, q0}.  Throws ShapeError for IncreasingConcave.
LimitingFit limiting_fit(const SufficientStats& s, const ShapeClass& c);

// Weighted sums of squared residuals sum_i n_i (ybar_i - f(x_i))^2.
double weighted_sse(const SufficientStats& s, const LimitingFit& fit);
double weighted_sse(const SufficientStats& s, const EmaxParams& p);

}  // namespace emax
