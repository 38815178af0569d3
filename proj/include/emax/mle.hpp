#pragma once

// Exact maximum-likelihood estimation for increasing-concave data.  The MLE
// curve interpolates the three per-dose means, which yields closed forms in
// the shifted frame (x~ = x - x1):
//
//   t0 = ybar1
//   t1 = m1 m2 (x~3 - x~2) / (m1 - m2)
//   t2 = (ybar3 - ybar2) / (m1 - m2)
//
// and, mapped back, explicit formulas for the natural parameters.  For the
// other shapes the MLE does not exist and estimation falls back to the
// Firth-modified score (see firth.hpp).

#include <string>
#include <variant>

#include "emax/model.hpp"
#include "emax/shape.hpp"

namespace emax {

struct ExactMle {
    EmaxParams params;
    TildeParams tilde;
};

struct NoMle {
    ShapeClass shape;
    LimitingFit limit;
};

struct FirthEstimate {
    EmaxParams params;
    double score_norm;  // max-norm of the modified score at the root
    int iterations;     // Newton iterations of the winning start
};

enum class FirthFailureKind { Divergence, InadmissibleRoot, IterationCap };

struct FirthFailure {
    FirthFailureKind kind;
    std::string reason;
};

using FitResult = std::variant<ExactMle, NoMle, FirthEstimate, FirthFailure>;

const char* to_string(FirthFailureKind k);

// Closed-form MLE in the shifted frame.  Throws ShapeError unless the data
// classify as IncreasingConcave, and DomainError when m1 - m2 is too small
// relative to m1 for the formulas to be numerically meaningful (the data
// are then at the convex boundary and theta2 would blow up).
TildeParams mle_tilde(const SufficientStats& s);

// Closed-form MLE of the natural parameters (direct formulas, not the
// composition through mle_tilde; the two routes agree to rounding).
EmaxParams mle(const SufficientStats& s);

// max_i |ybar_i - eta(x_i, p)|.  Zero (to rounding) exactly when p is the
// exact MLE of s.
double interpolation_check(const SufficientStats& s, const EmaxParams& p);

}  // namespace emax
