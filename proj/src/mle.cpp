#include "emax/mle.hpp"

#include <cmath>

namespace emax {

const char* to_string(FirthFailureKind k) {
    switch (k) {
        case FirthFailureKind::Divergence: return "divergence";
        case FirthFailureKind::InadmissibleRoot: return "inadmissible_root";
        case FirthFailureKind::IterationCap: return "iteration_cap";
    }
    return "?";
}

namespace {

struct Slopes {
    double m1;
    double m2;
};

Slopes slopes_checked(const SufficientStats& s) {
    const auto [cls, st] = classify(s);
    if (cls.kind != ShapeCase::IncreasingConcave) {
        throw ShapeError(std::string("mle: data classify as ") + to_string(cls.kind) +
                         "; the MLE exists only for increasing concave data");
    }
    // Measure-zero guard: an almost-convex triple would push theta2 to
    // infinity, which is a limit curve, not an Emax member.
    if (st.m1 - st.m2 < 1e-12 * std::abs(st.m1)) {
        throw DomainError("mle: m1 - m2 is numerically zero; data sit at the convex boundary");
    }
    return {st.m1, st.m2};
}

}  // namespace

TildeParams mle_tilde(const SufficientStats& s) {
    const auto [m1, m2] = slopes_checked(s);
    const double dm = m1 - m2;
    return {
        s.ybar[0],
        m1 * m2 / dm * (s.x[2] - s.x[1]),
        (s.ybar[2] - s.ybar[1]) / dm,
    };
}

EmaxParams mle(const SufficientStats& s) {
    const auto [m1, m2] = slopes_checked(s);
    const double a = s.x[0];
    const double dm = m1 - m2;
    const double dy32 = s.ybar[2] - s.ybar[1];
    const double denom = dy32 - a * dm;  // = dm * (t2 - a)
    if (denom == 0.0) {
        throw SingularityError("mle: natural parameters are singular (theta2 = 0)");
    }
    const double shift = a * m1 * m2 * (s.x[2] - s.x[1]) / denom;
    return {
        s.ybar[0] - shift,
        m1 * m2 / dm * (s.x[2] - s.x[1]) + shift,
        dy32 / dm - a,
    };
}

double interpolation_check(const SufficientStats& s, const EmaxParams& p) {
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
        worst = std::max(worst, std::abs(s.ybar[i] - eta(s.x[i], p)));
    }
    return worst;
}

}  // namespace emax
