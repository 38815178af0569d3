#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <vector>

#include "emax/shape.hpp"
#include "testutil.hpp"

using namespace emax;

namespace {

SufficientStats random_triple(testutil::Gen& g) {
    const double x1 = g.range(0.0, 5.0);
    const double x2 = x1 + g.range(0.5, 50.0);
    const double x3 = x2 + g.range(0.5, 100.0);
    return SufficientStats({x1, x2, x3},
                           {g.integer(1, 9), g.integer(1, 9), g.integer(1, 9)},
                           {g.normal(), g.normal(), g.normal()});
}

EmaxParams random_admissible(testutil::Gen& g) {
    return {g.range(-3.0, 3.0), g.log_range(0.05, 5.0), g.log_range(0.05, 500.0)};
}

}  // namespace

TEST_CASE("reduce computes per-dose counts and means") {
    const std::vector<DoseGroup> groups = {
        {0.0, {1.0, 3.0}}, {1.0, {2.0}}, {2.0, {5.0, 5.0, 5.0}}};
    const SufficientStats s = reduce(groups);
    CHECK(s.x == std::array<double, 3>{0.0, 1.0, 2.0});
    CHECK(s.n == std::array<std::int64_t, 3>{2, 1, 3});
    CHECK(s.ybar == std::array<double, 3>{2.0, 2.0, 5.0});
    CHECK(s.total_n() == 6);
}

TEST_CASE("reduce passes single observations through and sorts by dose") {
    const SufficientStats s = reduce({{30.0, {2.2}}, {0.1, {2.0}}, {150.0, {2.35}}});
    CHECK(s.x == std::array<double, 3>{0.1, 30.0, 150.0});
    CHECK(s.ybar == std::array<double, 3>{2.0, 2.2, 2.35});
    CHECK(s.n == std::array<std::int64_t, 3>{1, 1, 1});
}

TEST_CASE("reduce is invariant to input order") {
    testutil::Gen g(21);
    const std::vector<DoseGroup> base = {
        {0.5, {1.0, 2.0, 0.5}}, {10.0, {4.0}}, {100.0, {3.0, 3.5}}};
    const SufficientStats ref = reduce(base);
    const std::array<std::array<int, 3>, 5> perms = {
        {{1, 0, 2}, {2, 1, 0}, {0, 2, 1}, {2, 0, 1}, {1, 2, 0}}};
    for (const auto& perm : perms) {
        std::vector<DoseGroup> shuffled;
        for (int idx : perm) shuffled.push_back(base[static_cast<std::size_t>(idx)]);
        const SufficientStats s = reduce(shuffled);
        CHECK(s.x == ref.x);
        CHECK(s.n == ref.n);
        CHECK(s.ybar == ref.ybar);
    }
}

TEST_CASE("reduce rejects malformed inputs") {
    CHECK_THROWS_AS(reduce({{0.0, {1.0}}, {1.0, {1.0}}}), ValidationError);
    CHECK_THROWS_AS(
        reduce({{0.0, {1.0}}, {1.0, {1.0}}, {2.0, {1.0}}, {3.0, {1.0}}}), ValidationError);
    CHECK_THROWS_AS(reduce({{0.0, {1.0}}, {1.0, {}}, {2.0, {1.0}}}), ValidationError);
    // coinciding doses are rejected, not merged
    CHECK_THROWS_AS(reduce({{0.0, {1.0}}, {0.0, {2.0}}, {2.0, {1.0}}}), ValidationError);
}

TEST_CASE("pooled sigma^2 from within-dose replication") {
    // groups: (1,3) around 2 -> ss 2; (2) -> 0; (5,5,5) -> 0; n = 6
    CHECK(pooled_sigma2({{0.0, {1.0, 3.0}}, {1.0, {2.0}}, {2.0, {5.0, 5.0, 5.0}}}) ==
          doctest::Approx(2.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("classify: worked examples") {
    SUBCASE("increasing concave") {
        const SufficientStats s({0, 1, 3}, {1, 1, 1}, {1.0, 2.0, 3.0});
        const auto [cls, st] = classify(s);
        CHECK(cls.kind == ShapeCase::IncreasingConcave);
        CHECK_FALSE(cls.boundary);
        CHECK(st.m1 == doctest::Approx(1.0));
        CHECK(st.m2 == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("convex") {
        const SufficientStats s({0, 1, 2}, {1, 1, 1}, {1.0, 1.1, 3.0});
        const auto [cls, st] = classify(s);
        CHECK((cls.kind == ShapeCase::Case2a || cls.kind == ShapeCase::Case2b));
        CHECK(st.m1 == doctest::Approx(0.1));
        CHECK(st.m2 == doctest::Approx(1.0));
        CHECK(cls.kind == ShapeCase::Case2a);  // clearly increasing trend
    }
    SUBCASE("concave non-increasing, ybar1 below the tail mean") {
        const SufficientStats s({0, 1, 2}, {1, 1, 1}, {1.0, 2.0, 1.5});
        const auto [cls, st] = classify(s);
        CHECK(cls.kind == ShapeCase::Case1a);
        CHECK(st.ybar23 == doctest::Approx(1.75));
    }
}

TEST_CASE("classify: tie-breaking follows the non-strict paper conditions") {
    SUBCASE("m1 == m2 goes to Case 2") {
        const SufficientStats s({0, 1, 2}, {1, 1, 1}, {0.0, 1.0, 2.0});
        const auto [cls, st] = classify(s);
        CHECK(st.m1 == st.m2);
        CHECK(cls.kind == ShapeCase::Case2a);
        CHECK(cls.boundary);
    }
    SUBCASE("m0 == 0 goes to Case 2b") {
        const SufficientStats s({0, 1, 2}, {1, 1, 1}, {1.0, -2.0, 1.0});
        const auto [cls, st] = classify(s);
        CHECK(st.m0 == 0.0);
        CHECK(cls.kind == ShapeCase::Case2b);
        CHECK(cls.boundary);
    }
    SUBCASE("order tie under concavity goes to Case 1") {
        const SufficientStats s({0, 1, 2}, {1, 1, 1}, {1.0, 2.0, 2.0});
        const auto [cls, st] = classify(s);
        CHECK((cls.kind == ShapeCase::Case1a || cls.kind == ShapeCase::Case1b));
        CHECK(cls.boundary);
    }
    SUBCASE("ybar1 == ybar23 goes to Case 1b") {
        const SufficientStats s({0, 1, 2}, {1, 1, 1}, {1.75, 2.0, 1.5});
        const auto [cls, st] = classify(s);
        CHECK(st.ybar23 == doctest::Approx(1.75));
        CHECK(cls.kind == ShapeCase::Case1b);
        CHECK(cls.boundary);
    }
}

TEST_CASE("classification partitions random Gaussian triples") {
    testutil::Gen g(22);
    int counts[5] = {0, 0, 0, 0, 0};
    int boundaries = 0;
    for (int rep = 0; rep < 100000; ++rep) {
        const SufficientStats s = random_triple(g);
        const auto [cls, st] = classify(s);
        ++counts[static_cast<int>(cls.kind)];
        boundaries += cls.boundary ? 1 : 0;

        // concavity without a strict increase forces ybar2 >= ybar3
        if (cls.kind == ShapeCase::Case1a || cls.kind == ShapeCase::Case1b) {
            CHECK(s.ybar[1] >= s.ybar[2]);
        }
    }
    int total = 0;
    for (int c : counts) total += c;
    CHECK(total == 100000);
    CHECK(boundaries == 0);  // exact ties have probability zero
    for (int c : counts) CHECK(c > 0);
}

TEST_CASE("matrix route equals the direct classification route") {
    testutil::Gen g(23);
    for (int rep = 0; rep < 100000; ++rep) {
        const SufficientStats s = random_triple(g);
        const auto [cls, st] = classify(s);

        const double d2 = s.x[1] - s.x[0];
        const double d3 = s.x[2] - s.x[0];
        const double n23 = static_cast<double>(s.n[1] + s.n[2]);
        const double w2 = static_cast<double>(s.n[1]) / n23;
        const double w3 = static_cast<double>(s.n[2]) / n23;
        const double conv = (1.0 / d2 - 1.0 / d3) * s.ybar[0] - s.ybar[1] / d2 + s.ybar[2] / d3;
        const double rel = s.ybar[0] - w2 * s.ybar[1] - w3 * s.ybar[2];

        const bool inc_concave =
            conv < 0.0 && s.ybar[0] - s.ybar[1] < 0.0 && s.ybar[1] - s.ybar[2] < 0.0;
        const bool case1a = conv < 0.0 && rel < 0.0 && -s.ybar[1] + s.ybar[2] < 0.0;
        const bool case1b = conv < 0.0 && -rel < 0.0 && -s.ybar[1] + s.ybar[2] < 0.0;
        const bool case2 = conv >= 0.0;

        switch (cls.kind) {
            case ShapeCase::IncreasingConcave: CHECK(inc_concave); break;
            case ShapeCase::Case1a: CHECK(case1a); break;
            case ShapeCase::Case1b: CHECK(case1b); break;
            case ShapeCase::Case2a:
            case ShapeCase::Case2b: CHECK(case2); break;
        }
        CHECK((inc_concave ? 1 : 0) + (case1a ? 1 : 0) + (case1b ? 1 : 0) + (case2 ? 1 : 0) == 1);
    }
}

TEST_CASE("limiting fits") {
    SUBCASE("Case 1a: step at the lowest dose") {
        const SufficientStats s({0, 1, 2}, {1, 1, 1}, {1.0, 2.0, 1.5});
        const auto [cls, st] = classify(s);
        const LimitingFit fit = limiting_fit(s, cls);
        const auto& step = std::get<StepAtA>(fit);
        CHECK(step.low == doctest::Approx(1.0));
        CHECK(step.high == doctest::Approx(1.75));
        CHECK(step.low <= step.high);
    }
    SUBCASE("Case 1b: grand weighted mean") {
        const SufficientStats s({0, 1, 2}, {1, 1, 1}, {3.0, 2.5, 1.0});
        const auto [cls, st] = classify(s);
        CHECK(st.m1 == doctest::Approx(-0.5));
        CHECK(st.m2 == doctest::Approx(-1.0));
        CHECK(cls.kind == ShapeCase::Case1b);  // concave, ybar1 = 3 >= ybar23 = 1.75
        const LimitingFit fit = limiting_fit(s, cls);
        CHECK(std::get<ConstantFit>(fit).level == doctest::Approx(6.5 / 3.0).epsilon(1e-15));
    }
    SUBCASE("decreasing means with rising secants are convex, not Case 1") {
        // m1 = -1 < m2 = -0.5, so this sits in Case 2b (m0 = -0.5); the
        // limiting fit is still the grand mean.
        const SufficientStats s({0, 1, 2}, {1, 1, 1}, {3.0, 2.0, 2.0});
        const auto [cls, st] = classify(s);
        CHECK(st.m1 == doctest::Approx(-1.0));
        CHECK(st.m2 == doctest::Approx(-0.5));
        CHECK(cls.kind == ShapeCase::Case2b);
        const LimitingFit fit = limiting_fit(s, cls);
        CHECK(std::get<ConstantFit>(fit).level == doctest::Approx(7.0 / 3.0).epsilon(1e-15));
    }
    SUBCASE("Case 2a: the weighted least-squares line") {
        const SufficientStats s({0, 1, 2}, {2, 1, 1}, {1.0, 1.1, 3.0});
        const auto [cls, st] = classify(s);
        CHECK(cls.kind == ShapeCase::Case2a);
        const LimitingFit fit = limiting_fit(s, cls);
        const auto& line = std::get<LineFit>(fit);
        CHECK(line.slope == doctest::Approx(st.m0));
        CHECK(line.intercept == doctest::Approx(st.q0));
        CHECK(line.slope > 0.0);

        // weighted normal equations, assembled independently
        const double W = 4.0, Sx = 0.0 * 2 + 1.0 + 2.0, Sy = 1.0 * 2 + 1.1 + 3.0;
        const double Sxx = 1.0 + 4.0, Sxy = 1.1 + 6.0;
        const double slope = (W * Sxy - Sx * Sy) / (W * Sxx - Sx * Sx);
        CHECK(line.slope == doctest::Approx(slope).epsilon(1e-14));
        CHECK(line.intercept == doctest::Approx((Sy - slope * Sx) / W).epsilon(1e-14));
    }
    SUBCASE("not defined for increasing concave data") {
        const SufficientStats s({0, 1, 3}, {1, 1, 1}, {1.0, 2.0, 3.0});
        const auto [cls, st] = classify(s);
        CHECK_THROWS_AS(limiting_fit(s, cls), ShapeError);
    }
}

TEST_CASE("limiting fit dominates every admissible Emax curve") {
    testutil::Gen g(24);
    int tested = 0;
    while (tested < 100) {
        const SufficientStats s = random_triple(g);
        const auto [cls, st] = classify(s);
        if (cls.kind == ShapeCase::IncreasingConcave) continue;
        ++tested;
        const LimitingFit fit = limiting_fit(s, cls);
        const double sse_limit = weighted_sse(s, fit);
        for (int rep = 0; rep < 100; ++rep) {
            const EmaxParams p = random_admissible(g);
            const double sse_emax = weighted_sse(s, p);
            CHECK(sse_limit <= sse_emax + 1e-9 * (1.0 + sse_emax));
        }
    }
}

// Auxiliary inequality: pulling two fitted values to their weighted mean
// strictly reduces the weighted two-point SSE when the data are ordered the
// opposite way.
TEST_CASE("two-point pooling inequality") {
    testutil::Gen g(25);
    for (int rep = 0; rep < 10000; ++rep) {
        const double ns = g.log_range(0.1, 20.0);
        const double nss = g.log_range(0.1, 20.0);
        const double yss = g.range(-5.0, 5.0);
        const double ys = yss + g.range(0.0, 5.0);          // y_* >= y^*
        const double zs = g.range(-5.0, 5.0);
        const double zss = zs + g.range(0.01, 10.0);        // z_* < z^*
        const double zbar = (ns * zs + nss * zss) / (ns + nss);
        const double lhs = ns * (ys - zs) * (ys - zs) + nss * (yss - zss) * (yss - zss);
        const double rhs = ns * (ys - zbar) * (ys - zbar) + nss * (yss - zbar) * (yss - zbar);
        CHECK(lhs > rhs);
        // exact gap
        const double gap = ns * nss * (zss - zs) / (ns + nss) * (2.0 * (ys - yss) + (zss - zs));
        CHECK(lhs - rhs == doctest::Approx(gap).epsilon(1e-9));
    }
}

// Auxiliary inequality: any line whose slope opposes the least-squares slope
// is beaten by some constant.
TEST_CASE("opposing-slope line is beaten by a constant") {
    testutil::Gen g(26);
    for (int rep = 0; rep < 10000; ++rep) {
        const int npts = static_cast<int>(g.integer(3, 8));
        std::vector<double> xs(static_cast<std::size_t>(npts)), ys(static_cast<std::size_t>(npts));
        for (int i = 0; i < npts; ++i) {
            xs[static_cast<std::size_t>(i)] = g.range(-10.0, 10.0);
            ys[static_cast<std::size_t>(i)] = g.range(-10.0, 10.0);
        }
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int i = 0; i < npts; ++i) {
            sx += xs[static_cast<std::size_t>(i)];
            sy += ys[static_cast<std::size_t>(i)];
            sxx += xs[static_cast<std::size_t>(i)] * xs[static_cast<std::size_t>(i)];
            sxy += xs[static_cast<std::size_t>(i)] * ys[static_cast<std::size_t>(i)];
        }
        const double det = npts * sxx - sx * sx;
        if (std::abs(det) < 1e-9) continue;
        const double m0 = (npts * sxy - sx * sy) / det;
        const double q0 = (sy - m0 * sx) / npts;

        // a line with m * m0 <= 0
        const double m = (rep % 10 == 0) ? 0.0 : -std::copysign(g.log_range(1e-3, 10.0), m0);
        const double q = g.range(-10.0, 10.0);

        const double tstar = (std::abs(m) + std::abs(m0)) == 0.0
                                 ? 0.0
                                 : std::abs(m0) / (std::abs(m) + std::abs(m0));
        const double c = tstar * q + (1.0 - tstar) * q0;

        double sse_line = 0.0, sse_const = 0.0;
        for (int i = 0; i < npts; ++i) {
            const double rl = ys[static_cast<std::size_t>(i)] -
                              (m * xs[static_cast<std::size_t>(i)] + q);
            const double rc = ys[static_cast<std::size_t>(i)] - c;
            sse_line += rl * rl;
            sse_const += rc * rc;
        }
        CHECK(sse_line >= sse_const - 1e-9 * (1.0 + sse_line));
    }
}
