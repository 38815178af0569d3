#include "emax/shape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace emax {

SufficientStats::SufficientStats(std::array<double, 3> doses, std::array<std::int64_t, 3> counts,
                                 std::array<double, 3> means)
    : x(doses), n(counts), ybar(means) {
    for (int i = 0; i < 3; ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(ybar[i])) {
            throw ValidationError("sufficient stats: non-finite dose or mean");
        }
        if (n[i] < 1) throw ValidationError("sufficient stats: counts must be >= 1");
    }
    if (!(x[0] < x[1] && x[1] < x[2])) {
        throw ValidationError("sufficient stats: doses must satisfy x1 < x2 < x3");
    }
}

SufficientStats reduce(const std::vector<DoseGroup>& groups) {
    if (groups.size() != 3) {
        throw ValidationError("reduce: expected exactly 3 distinct doses, got " +
                              std::to_string(groups.size()));
    }
    std::array<int, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return groups[i].dose < groups[j].dose; });

    std::array<double, 3> x{};
    std::array<std::int64_t, 3> n{};
    std::array<double, 3> ybar{};
    for (int k = 0; k < 3; ++k) {
        const DoseGroup& g = groups[order[static_cast<std::size_t>(k)]];
        if (g.responses.empty()) {
            throw ValidationError("reduce: empty response group at dose " +
                                  std::to_string(g.dose));
        }
        x[k] = g.dose;
        n[k] = static_cast<std::int64_t>(g.responses.size());
        ybar[k] = std::accumulate(g.responses.begin(), g.responses.end(), 0.0) /
                  static_cast<double>(g.responses.size());
    }
    if (x[0] == x[1] || x[1] == x[2]) {
        throw ValidationError("reduce: doses must be distinct (coinciding doses are not merged)");
    }
    return SufficientStats(x, n, ybar);
}

double pooled_sigma2(const std::vector<DoseGroup>& groups) {
    double ss = 0.0;
    std::int64_t n = 0;
    for (const DoseGroup& g : groups) {
        if (g.responses.empty()) throw ValidationError("pooled_sigma2: empty response group");
        const double mean = std::accumulate(g.responses.begin(), g.responses.end(), 0.0) /
                            static_cast<double>(g.responses.size());
        for (double y : g.responses) ss += (y - mean) * (y - mean);
        n += static_cast<std::int64_t>(g.responses.size());
    }
    return ss / static_cast<double>(n);
}

const char* to_string(ShapeCase c) {
    switch (c) {
        case ShapeCase::IncreasingConcave: return "increasing_concave";
        case ShapeCase::Case1a: return "case1a";
        case ShapeCase::Case1b: return "case1b";
        case ShapeCase::Case2a: return "case2a";
        case ShapeCase::Case2b: return "case2b";
    }
    return "?";
}

namespace {

ShapeStats make_stats(const SufficientStats& s) {
    ShapeStats st{};
    st.m1 = (s.ybar[1] - s.ybar[0]) / (s.x[1] - s.x[0]);
    st.m2 = (s.ybar[2] - s.ybar[0]) / (s.x[2] - s.x[0]);
    st.ybar23 = (static_cast<double>(s.n[1]) * s.ybar[1] + static_cast<double>(s.n[2]) * s.ybar[2]) /
                static_cast<double>(s.n[1] + s.n[2]);

    const double nt = static_cast<double>(s.total_n());
    double xw = 0.0, yw = 0.0;
    for (int i = 0; i < 3; ++i) {
        xw += static_cast<double>(s.n[i]) * s.x[i];
        yw += static_cast<double>(s.n[i]) * s.ybar[i];
    }
    xw /= nt;
    yw /= nt;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double w = static_cast<double>(s.n[i]);
        sxx += w * (s.x[i] - xw) * (s.x[i] - xw);
        sxy += w * (s.x[i] - xw) * (s.ybar[i] - yw);
    }
    st.m0 = sxy / sxx;
    st.q0 = yw - st.m0 * xw;
    st.ybar = yw;
    return st;
}

}  // namespace

std::pair<ShapeClass, ShapeStats> classify(const SufficientStats& s) {
    const ShapeStats st = make_stats(s);
    bool boundary = false;

    if (st.m1 <= st.m2) {
        // Convex shape: no MLE.  Subcase by the sign of the weighted OLS slope.
        boundary = (st.m1 == st.m2) || (st.m0 == 0.0);
        const ShapeCase kind = st.m0 > 0.0 ? ShapeCase::Case2a : ShapeCase::Case2b;
        return {ShapeClass{kind, boundary}, st};
    }

    // Concave.  The MLE exists exactly when the means strictly increase.
    if (s.ybar[0] < s.ybar[1] && s.ybar[1] < s.ybar[2]) {
        return {ShapeClass{ShapeCase::IncreasingConcave, false}, st};
    }

    boundary = (s.ybar[0] == s.ybar[1]) || (s.ybar[1] == s.ybar[2]) || (s.ybar[0] == st.ybar23);
    const ShapeCase kind = s.ybar[0] < st.ybar23 ? ShapeCase::Case1a : ShapeCase::Case1b;
    return {ShapeClass{kind, boundary}, st};
}

LimitingFit limiting_fit(const SufficientStats& s, const ShapeClass& c) {
    const ShapeStats st = make_stats(s);
    switch (c.kind) {
        case ShapeCase::Case1a: return StepAtA{s.ybar[0], st.ybar23};
        case ShapeCase::Case1b: return ConstantFit{st.ybar};
        case ShapeCase::Case2a: return LineFit{st.m0, st.q0};
        case ShapeCase::Case2b: return ConstantFit{st.ybar};
        case ShapeCase::IncreasingConcave:
            throw ShapeError("limiting_fit: the MLE exists for increasing concave data");
    }
    throw ShapeError("limiting_fit: unknown shape class");
}

namespace {

double fit_value(const LimitingFit& fit, double x, double x1) {
    if (const auto* step = std::get_if<StepAtA>(&fit)) {
        return x == x1 ? step->low : step->high;
    }
    if (const auto* c = std::get_if<ConstantFit>(&fit)) {
        return c->level;
    }
    const auto& line = std::get<LineFit>(fit);
    return line.slope * x + line.intercept;
}

}  // namespace

double weighted_sse(const SufficientStats& s, const LimitingFit& fit) {
    double sse = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double r = s.ybar[i] - fit_value(fit, s.x[i], s.x[0]);
        sse += static_cast<double>(s.n[i]) * r * r;
    }
    return sse;
}

double weighted_sse(const SufficientStats& s, const EmaxParams& p) {
    double sse = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double r = s.ybar[i] - eta(s.x[i], p);
        sse += static_cast<double>(s.n[i]) * r * r;
    }
    return sse;
}

}  // namespace emax
