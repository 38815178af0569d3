#include "emax/prob.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "emax/rng.hpp"

namespace emax {

Scenario::Scenario(EmaxParams truth_, ThreePointDesign design_, NoiseModel noise_,
                   std::array<std::int64_t, 3> n_per_point_)
    : truth(truth_), design(design_), noise(noise_), n_per_point(n_per_point_) {
    for (std::int64_t n : n_per_point) {
        if (n < 1) throw ValidationError("scenario: per-point sample sizes must be >= 1");
    }
    // The per-dose means must be evaluable at the truth.
    for (double x : design.doses()) {
        if (x + truth.theta2 == 0.0) {
            throw ValidationError("scenario: a design dose sits on the vertical asymptote");
        }
    }
}

namespace {

double normal_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0);
}

// Phi(hi) - Phi(lo), evaluated through whichever tail keeps the
// subtraction well conditioned.
double normal_cdf_diff(double lo, double hi) {
    if (hi <= lo) return 0.0;
    const double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
    if (lo + hi > 0.0) {
        return 0.5 * (std::erfc(lo * inv_sqrt2) - std::erfc(hi * inv_sqrt2));
    }
    return 0.5 * (std::erfc(-hi * inv_sqrt2) - std::erfc(-lo * inv_sqrt2));
}

// Joint law of the mean increments W1 = Ybar2 - Ybar1 and W2 = Ybar3 - Ybar2
// plus the classification geometry.  In these coordinates:
//   increasing       <=> W1 > 0 and W2 > 0
//   concave          <=> W2 < kappa * W1,  kappa = (d3 - d2)/d2
//   ybar1 < ybar23   <=> W1 + rho * W2 > 0, rho = n3/(n2+n3)
struct WReduction {
    double mw1, mw2;   // means of W1, W2
    double v1, v2;     // variances
    double c12;        // covariance (= -Var(Ybar2))
    double kappa, rho;

    double sd1() const { return std::sqrt(v1); }
    double sd2() const { return std::sqrt(v2); }
};

WReduction w_reduction(const Scenario& sc) {
    const auto x = sc.design.doses();
    const double s2 = sc.noise.sigma * sc.noise.sigma;
    std::array<double, 3> mu{}, var{};
    for (int i = 0; i < 3; ++i) {
        mu[i] = eta(x[i], sc.truth);
        var[i] = s2 / static_cast<double>(sc.n_per_point[i]);
    }
    const double d2 = x[1] - x[0];
    const double d3 = x[2] - x[0];
    WReduction w{};
    w.mw1 = mu[1] - mu[0];
    w.mw2 = mu[2] - mu[1];
    w.v1 = var[0] + var[1];
    w.v2 = var[1] + var[2];
    w.c12 = -var[1];
    w.kappa = (d3 - d2) / d2;
    w.rho = static_cast<double>(sc.n_per_point[2]) /
            static_cast<double>(sc.n_per_point[1] + sc.n_per_point[2]);
    return w;
}

struct QuadResult {
    double value;
    double error;
};

template <typename F>
QuadResult integrate_window(F&& f, double lo, double hi, double tol) {
    if (!(hi > lo)) return {0.0, 0.0};
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        std::forward<F>(f), lo, hi, 12, tol, &err);
    return {std::clamp(v, 0.0, 1.0), err};
}

constexpr double kWindowSds = 13.0;  // Gaussian tail mass beyond this ~ 1e-38

// P(W1 > 0, 0 < W2 < kappa W1): condition on W1, closed-form inner cdf.
QuadResult quad_exists(const WReduction& w, double tol) {
    const double tau = std::sqrt(w.v2 - w.c12 * w.c12 / w.v1);
    auto f = [&](double t) {
        const double mc = w.mw2 + (w.c12 / w.v1) * (t - w.mw1);
        return normal_pdf(t, w.mw1, w.sd1()) *
               normal_cdf_diff((0.0 - mc) / tau, (w.kappa * t - mc) / tau);
    };
    const double lo = std::max(0.0, w.mw1 - kWindowSds * w.sd1());
    const double hi = w.mw1 + kWindowSds * w.sd1();
    return integrate_window(f, lo, hi, tol);
}

// P(W2 < 0, W2 < kappa W1, W1 + rho W2 > 0): condition on W2 < 0; both
// constraints become lower bounds on W1.
QuadResult quad_case1a(const WReduction& w, double tol) {
    const double tau = std::sqrt(w.v1 - w.c12 * w.c12 / w.v2);
    auto f = [&](double t) {
        const double mc = w.mw1 + (w.c12 / w.v2) * (t - w.mw2);
        const double lower = std::max(t / w.kappa, -w.rho * t);
        return normal_pdf(t, w.mw2, w.sd2()) * normal_cdf(-(lower - mc) / tau);
    };
    const double lo = w.mw2 - kWindowSds * w.sd2();
    const double hi = std::min(0.0, w.mw2 + kWindowSds * w.sd2());
    return integrate_window(f, lo, hi, tol);
}

// P(W2 < 0, W2 < kappa W1, W1 + rho W2 <= 0): W1 in (t/kappa, -rho t].
QuadResult quad_case1b(const WReduction& w, double tol) {
    const double tau = std::sqrt(w.v1 - w.c12 * w.c12 / w.v2);
    auto f = [&](double t) {
        const double mc = w.mw1 + (w.c12 / w.v2) * (t - w.mw2);
        return normal_pdf(t, w.mw2, w.sd2()) *
               normal_cdf_diff((t / w.kappa - mc) / tau, (-w.rho * t - mc) / tau);
    };
    const double lo = w.mw2 - kWindowSds * w.sd2();
    const double hi = std::min(0.0, w.mw2 + kWindowSds * w.sd2());
    return integrate_window(f, lo, hi, tol);
}

// P(W2 >= kappa W1): a single Gaussian half-space, exact.
QuadResult quad_case2(const WReduction& w) {
    const double mean = w.mw2 - w.kappa * w.mw1;
    const double sd = std::sqrt(w.v2 + w.kappa * w.kappa * w.v1 - 2.0 * w.kappa * w.c12);
    return {normal_cdf(mean / sd), 0.0};
}

ShapeProbabilities quadrature_probabilities(const Scenario& sc, const ProbOpts& opts) {
    const WReduction w = w_reduction(sc);
    const QuadResult ex = quad_exists(w, opts.quad_tol);
    const QuadResult c1a = quad_case1a(w, opts.quad_tol);
    const QuadResult c1b = quad_case1b(w, opts.quad_tol);
    const QuadResult c2 = quad_case2(w);
    return {ex.value, c1a.value, c1b.value, c2.value,
            ex.error, c1a.error, c1b.error, c2.error, ProbMethod::Quadrature};
}

// Monte Carlo over the linear-inequality systems of the classification
// (the orthant route; the direct classifier is cross-checked against this
// in tests).  Draw i, component j uses the counter slot 3i + j.
struct McTally {
    std::int64_t exists = 0;
    std::int64_t case1a = 0;
    std::int64_t case1b = 0;
    std::int64_t case2 = 0;
};

ShapeProbabilities mc_probabilities(const Scenario& sc, const ProbOpts& opts) {
    if (opts.draws < 1) throw ValidationError("shape_probabilities: draws must be >= 1");
    const auto x = sc.design.doses();
    std::array<double, 3> mu{}, sd{};
    for (int i = 0; i < 3; ++i) {
        mu[i] = eta(x[i], sc.truth);
        sd[i] = sc.noise.sigma / std::sqrt(static_cast<double>(sc.n_per_point[i]));
    }
    const double d2 = x[1] - x[0];
    const double d3 = x[2] - x[0];
    const double n23 = static_cast<double>(sc.n_per_point[1] + sc.n_per_point[2]);
    // Row vectors of the inequality systems; each class is {rows . y < 0}.
    const std::array<double, 3> convexity_row = {1.0 / d2 - 1.0 / d3, -1.0 / d2, 1.0 / d3};
    const std::array<double, 3> below_w_mean_row = {
        1.0, -static_cast<double>(sc.n_per_point[1]) / n23,
        -static_cast<double>(sc.n_per_point[2]) / n23};

    const std::uint64_t key = rng::make_key({opts.seed, 0x70726f62ull});  // "prob" stream

    auto run = [&](std::int64_t lo, std::int64_t hi, McTally& t) {
        for (std::int64_t i = lo; i < hi; ++i) {
            double y[3];
            for (int j = 0; j < 3; ++j) {
                y[j] = mu[j] + sd[j] * rng::gaussian(key, static_cast<std::uint64_t>(3 * i + j));
            }
            const double conv = convexity_row[0] * y[0] + convexity_row[1] * y[1] +
                                convexity_row[2] * y[2];
            if (conv >= 0.0) {
                ++t.case2;
            } else if (y[0] - y[1] < 0.0 && y[1] - y[2] < 0.0) {
                ++t.exists;
            } else if (-y[1] + y[2] < 0.0) {
                const double rel = below_w_mean_row[0] * y[0] + below_w_mean_row[1] * y[1] +
                                   below_w_mean_row[2] * y[2];
                if (rel < 0.0) {
                    ++t.case1a;
                } else if (rel > 0.0) {
                    ++t.case1b;
                }
            }
            // Exact ties satisfy none of the strict systems and are dropped;
            // they have probability zero under the Gaussian model.
        }
    };

    unsigned hw = std::thread::hardware_concurrency();
    int n_threads = opts.threads > 0 ? opts.threads : static_cast<int>(hw ? hw : 1);
    n_threads = static_cast<int>(std::min<std::int64_t>(n_threads, opts.draws));

    std::vector<McTally> tallies(static_cast<std::size_t>(n_threads));
    if (n_threads == 1) {
        run(0, opts.draws, tallies[0]);
    } else {
        std::vector<std::thread> pool;
        const std::int64_t chunk = (opts.draws + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            const std::int64_t lo = t * chunk;
            const std::int64_t hi = std::min<std::int64_t>(lo + chunk, opts.draws);
            pool.emplace_back(run, lo, hi, std::ref(tallies[static_cast<std::size_t>(t)]));
        }
        for (auto& th : pool) th.join();
    }

    McTally total;
    for (const McTally& t : tallies) {
        total.exists += t.exists;
        total.case1a += t.case1a;
        total.case1b += t.case1b;
        total.case2 += t.case2;
    }

    const double n = static_cast<double>(opts.draws);
    auto est = [&](std::int64_t c) { return static_cast<double>(c) / n; };
    auto se = [&](double p) { return std::sqrt(p * (1.0 - p) / n); };
    ShapeProbabilities out{};
    out.p_exists = est(total.exists);
    out.p_case1a = est(total.case1a);
    out.p_case1b = est(total.case1b);
    out.p_case2 = est(total.case2);
    out.se_exists = se(out.p_exists);
    out.se_case1a = se(out.p_case1a);
    out.se_case1b = se(out.p_case1b);
    out.se_case2 = se(out.p_case2);
    out.method = ProbMethod::MonteCarlo;
    return out;
}

}  // namespace

ShapeProbabilities shape_probabilities(const Scenario& sc, const ProbOpts& opts) {
    return opts.method == ProbMethod::Quadrature ? quadrature_probabilities(sc, opts)
                                                 : mc_probabilities(sc, opts);
}

namespace {

Scenario with_truth_and_x2(const Scenario& base, double theta2, double x2) {
    EmaxParams truth = base.truth;
    truth.theta2 = theta2;
    ThreePointDesign design(base.design.domain, x2, base.design.weights);
    return Scenario(truth, design, base.noise, base.n_per_point);
}

}  // namespace

double power_function(double theta2, double x2, const Scenario& base, const ProbOpts& opts) {
    if (!(theta2 > -base.design.domain.a)) {
        throw DomainError("power_function: need theta2 > -a");
    }
    const ShapeProbabilities p = shape_probabilities(with_truth_and_x2(base, theta2, x2), opts);
    return p.p_case1();
}

std::vector<double> log_grid(const DoseDomain& domain, int points) {
    if (points < 2) throw DomainError("log_grid: need at least 2 points");
    const double lo = domain.a > 0.0 ? domain.a * (1.0 + 1e-6) : domain.b * 1e-7;
    const double hi = domain.b * (1.0 - 1e-6);
    std::vector<double> xs(static_cast<std::size_t>(points));
    const double ratio = std::log(hi / lo);
    for (int i = 0; i < points; ++i) {
        xs[static_cast<std::size_t>(i)] =
            lo * std::exp(ratio * static_cast<double>(i) / static_cast<double>(points - 1));
    }
    return xs;
}

double x2_for_alpha(double theta2_g, double alpha, const Scenario& base, const ProbOpts& opts) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("x2_for_alpha: alpha must lie in (0, 1)");
    }
    const DoseDomain& dom = base.design.domain;
    const std::vector<double> grid = log_grid(dom, 64);
    std::vector<double> beta(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        beta[i] = power_function(theta2_g, grid[i], base, opts);
    }

    std::size_t bracket = grid.size();
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        if ((beta[i] - alpha) * (beta[i + 1] - alpha) <= 0.0) {
            bracket = i;
            break;
        }
    }
    if (bracket == grid.size()) {
        const auto [lo_it, hi_it] = std::minmax_element(beta.begin(), beta.end());
        std::ostringstream msg;
        msg << "x2_for_alpha: alpha = " << alpha << " is not attainable; the scanned range is ["
            << *lo_it << ", " << *hi_it << "]";
        throw DomainError(msg.str());
    }

    double lo = grid[bracket];
    double hi = grid[bracket + 1];
    double flo = beta[bracket] - alpha;
    const double xtol = 1e-9 * (dom.b - dom.a);
    for (int it = 0; it < 200 && (hi - lo) > xtol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = power_function(theta2_g, mid, base, opts) - alpha;
        if (flo * fmid <= 0.0) {
            hi = mid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    return 0.5 * (lo + hi);
}

AugmentationPoint augmentation_point(double theta2_g, double theta2_1, double alpha,
                                     const Scenario& base, const ProbOpts& opts) {
    if (theta2_1 > theta2_g) {
        throw DomainError("augmentation_point: need theta2_1 <= theta2_g");
    }
    const double upper = x2_for_alpha(theta2_g, alpha, base, opts);
    if (theta2_1 == theta2_g) {
        return {upper, upper, true};
    }
    const double x2 = x2_for_alpha(theta2_1, alpha, base, opts);
    return {x2, upper, x2 < upper};
}

std::vector<SweepRow> sweep_existence(const Scenario& base, const std::vector<double>& theta2_list,
                                      int grid_points, const ProbOpts& opts) {
    std::vector<SweepRow> rows;
    for (double theta2 : theta2_list) {
        std::vector<double> grid = log_grid(base.design.domain, grid_points);
        // Figure-style sweeps mark the D-optimal point on each curve; include
        // it as a grid point so the dot is tabulated exactly.
        grid.push_back(d_optimal_x2(base.design.domain, theta2));
        std::sort(grid.begin(), grid.end());
        for (double x2 : grid) {
            const ShapeProbabilities p =
                shape_probabilities(with_truth_and_x2(base, theta2, x2), opts);
            rows.push_back({x2, theta2, p.p_exists, p.p_case1a, p.p_case1b, p.p_case2,
                            p.se_exists, p.se_case1a, p.se_case1b, p.se_case2});
        }
    }
    return rows;
}

}  // namespace emax
