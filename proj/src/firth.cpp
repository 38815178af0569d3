#include "emax/firth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace emax {

double DesignMoments::m(int l1, int l2) const {
    if (l1 < 1 || l1 > 2 || l2 < 1 || l2 > 8) {
        throw DomainError("design moments: index out of range");
    }
    return moments[l1 - 1][l2 - 1];
}

namespace {

DesignMoments moments_from(const std::array<double, 3>& x, const std::array<double, 3>& w,
                           double theta2) {
    DesignMoments dm{};
    for (int i = 0; i < 3; ++i) {
        const double denom = x[i] + theta2;
        if (denom == 0.0) {
            throw SingularityError("design_moments: theta2 = -x_i");
        }
        double num = x[i];
        for (int l1 = 1; l1 <= 2; ++l1, num *= x[i]) {
            double frac = num / denom;
            for (int l2 = 1; l2 <= 8; ++l2, frac /= denom) {
                dm.moments[l1 - 1][l2 - 1] += w[i] * frac;
            }
        }
    }
    dm.v11 = dm.m(2, 2) - dm.m(1, 1) * dm.m(1, 1);
    dm.v12 = dm.m(2, 4) - dm.m(1, 2) * dm.m(1, 2);
    dm.cov12 = dm.m(2, 3) - dm.m(1, 1) * dm.m(1, 2);
    dm.d = dm.v11 * dm.v12 - dm.cov12 * dm.cov12;
    return dm;
}

std::array<double, 3> empirical_weights(const SufficientStats& s) {
    const double nt = static_cast<double>(s.total_n());
    return {static_cast<double>(s.n[0]) / nt, static_cast<double>(s.n[1]) / nt,
            static_cast<double>(s.n[2]) / nt};
}

// D vanishes when fewer than two support points carry weight, and also at
// theta2 = 0 where x/(theta2+x) degenerates to a constant.
void require_nondegenerate(const DesignMoments& dm) {
    if (!(dm.d > 0.0) || dm.d <= 1e-14 * dm.v11 * dm.v12) {
        throw DomainError("firth_correction: degenerate design (D ~ 0)");
    }
}

}  // namespace

DesignMoments design_moments(const ThreePointDesign& design, double theta2) {
    return moments_from(design.doses(), design.weights, theta2);
}

DesignMoments design_moments(const SufficientStats& s, double theta2) {
    return moments_from(s.x, empirical_weights(s), theta2);
}

FirthCorrection firth_correction(const DesignMoments& dm, double theta1) {
    if (theta1 == 0.0) {
        throw DomainError("firth_correction: theta1 = 0");
    }
    require_nondegenerate(dm);
    return {
        (dm.v11 * dm.m(1, 3) - dm.cov12 * dm.m(1, 2)) / (theta1 * dm.d),
        (dm.v11 * dm.m(2, 4) - dm.cov12 * dm.m(2, 3)) / (theta1 * dm.d),
        -(dm.v11 * dm.m(2, 5) - dm.cov12 * dm.m(2, 4)) / dm.d,
    };
}

FirthCorrection firth_correction(const ThreePointDesign& design, const EmaxParams& p) {
    return firth_correction(design_moments(design, p.theta2), p.theta1);
}

FirthCorrection firth_correction(const SufficientStats& s, const EmaxParams& p) {
    return firth_correction(design_moments(s, p.theta2), p.theta1);
}

FirthCorrection firth_correction_trace(const Eigen::Matrix3d& info,
                                       const std::array<Eigen::Matrix3d, 3>& q) {
    const Eigen::Matrix3d inv = info.inverse();
    FirthCorrection a{};
    a.a1 = 0.5 * (inv * q[0]).trace();
    a.a2 = 0.5 * (inv * q[1]).trace();
    a.a3 = 0.5 * (inv * q[2]).trace();
    return a;
}

Eigen::Vector3d score(const SufficientStats& s, const EmaxParams& p, const NoiseModel& noise) {
    Eigen::Vector3d u = Eigen::Vector3d::Zero();
    for (int i = 0; i < 3; ++i) {
        u += static_cast<double>(s.n[i]) * (s.ybar[i] - eta(s.x[i], p)) * eta_gradient(s.x[i], p);
    }
    return u / (noise.sigma * noise.sigma);
}

Eigen::Vector3d score(std::span<const std::pair<double, double>> obs, const EmaxParams& p,
                      const NoiseModel& noise) {
    Eigen::Vector3d u = Eigen::Vector3d::Zero();
    for (const auto& [x, y] : obs) {
        u += (y - eta(x, p)) * eta_gradient(x, p);
    }
    return u / (noise.sigma * noise.sigma);
}

Eigen::Matrix3d observed_information(const SufficientStats& s, const EmaxParams& p,
                                     const NoiseModel& noise) {
    Eigen::Matrix3d o = Eigen::Matrix3d::Zero();
    for (int i = 0; i < 3; ++i) {
        const double x = s.x[i];
        const double denom = x + p.theta2;
        if (denom == 0.0) {
            throw SingularityError("observed_information: theta2 = -x_i");
        }
        const double g = x / denom;
        const double w = static_cast<double>(s.n[i]);
        o(0, 0) += w;
        o(0, 1) += w * g;
        o(0, 2) += w * (-p.theta1 * x / (denom * denom));
        o(1, 1) += w * g * g;
        o(1, 2) += w * (x / (denom * denom)) * (s.ybar[i] - p.theta0 - 2.0 * p.theta1 * g);
        o(2, 2) += w * (3.0 * p.theta1 * p.theta1 * x * x / std::pow(denom, 4) -
                        2.0 * p.theta1 * x * (s.ybar[i] - p.theta0) / std::pow(denom, 3));
    }
    o(1, 0) = o(0, 1);
    o(2, 0) = o(0, 2);
    o(2, 1) = o(1, 2);
    return o / (noise.sigma * noise.sigma);
}

Eigen::Matrix3d expected_information(const SufficientStats& s, const EmaxParams& p,
                                     const NoiseModel& noise) {
    Eigen::Matrix3d info = Eigen::Matrix3d::Zero();
    for (int i = 0; i < 3; ++i) {
        const Eigen::Vector3d g = eta_gradient(s.x[i], p);
        const double w = static_cast<double>(s.n[i]);
        for (int r = 0; r < 3; ++r) {
            for (int c = r; c < 3; ++c) {
                info(r, c) += w * g[r] * g[c];
            }
        }
    }
    info /= noise.sigma * noise.sigma;
    info(1, 0) = info(0, 1);
    info(2, 0) = info(0, 2);
    info(2, 1) = info(1, 2);
    return info;
}

namespace {

std::array<Eigen::Matrix3d, 3> q_from_moments(const DesignMoments& dm, double theta1,
                                              double sigma, double n) {
    const double c = n / (sigma * sigma);
    std::array<Eigen::Matrix3d, 3> q{Eigen::Matrix3d::Zero(), Eigen::Matrix3d::Zero(),
                                     Eigen::Matrix3d::Zero()};
    const double q23[3] = {-c * dm.m(1, 2), -c * dm.m(2, 3), c * theta1 * dm.m(2, 4)};
    const double q33[3] = {2.0 * c * theta1 * dm.m(1, 3), 2.0 * c * theta1 * dm.m(2, 4),
                           -2.0 * c * theta1 * theta1 * dm.m(2, 5)};
    for (int t = 0; t < 3; ++t) {
        q[t](1, 2) = q23[t];
        q[t](2, 1) = q23[t];
        q[t](2, 2) = q33[t];
    }
    return q;
}

}  // namespace

std::array<Eigen::Matrix3d, 3> q_matrices(const ThreePointDesign& design, const EmaxParams& p,
                                          const NoiseModel& noise, double n) {
    return q_from_moments(design_moments(design, p.theta2), p.theta1, noise.sigma, n);
}

std::array<Eigen::Matrix3d, 3> q_matrices(const SufficientStats& s, const EmaxParams& p,
                                          const NoiseModel& noise) {
    return q_from_moments(design_moments(s, p.theta2), p.theta1, noise.sigma,
                          static_cast<double>(s.total_n()));
}

Eigen::Vector3d modified_score(const SufficientStats& s, const EmaxParams& p,
                               const NoiseModel& noise) {
    return score(s, p, noise) + firth_correction(s, p).vec();
}

InfoMatrices info_matrices(const SufficientStats& s, const EmaxParams& p,
                           const NoiseModel& noise) {
    return {observed_information(s, p, noise), expected_information(s, p, noise),
            q_matrices(s, p, noise)};
}

// ---------------------------------------------------------------------------
// Root search for U* = 0
// ---------------------------------------------------------------------------

namespace {

enum class StartOutcome { Converged, Diverged, LineSearchStalled, HitIterationCap };

struct StartResult {
    StartOutcome outcome;
    Eigen::Vector3d theta;
    double score_norm;
    int iterations;
};

struct SolveContext {
    const SufficientStats& stats;
    const NoiseModel& noise;
    double cap;          // |theta2| admissibility cap
    double y_scale;      // magnitude guard for theta0/theta1
    double span;         // x3 - x1
    double tol;
    int max_iter;
};

bool pole_free(const SufficientStats& s, double theta2) {
    const double margin = 1e-13 * std::max(1.0, std::abs(s.x[2]));
    for (double x : s.x) {
        if (std::abs(x + theta2) <= margin) return false;
    }
    return true;
}

// U*(theta); empty when the point is not evaluable (pole, degenerate D).
std::optional<Eigen::Vector3d> eval_ustar(const SolveContext& ctx, const Eigen::Vector3d& t) {
    if (!t.allFinite() || !pole_free(ctx.stats, t[2])) return std::nullopt;
    try {
        const EmaxParams p{t[0], t[1], t[2]};
        const Eigen::Vector3d u = modified_score(ctx.stats, p, ctx.noise);
        if (!u.allFinite()) return std::nullopt;
        return u;
    } catch (const Error&) {
        return std::nullopt;
    }
}

// theta2 is optionally iterated as phi = log(theta2 + x1) once the wall
// theta2 = -x1 is approached; the admissible side stays reachable while the
// iterates cannot cross the pole at x1.
struct Chart {
    bool log_theta2 = false;
    double x1 = 0.0;

    Eigen::Vector3d to_native(const Eigen::Vector3d& v) const {
        if (!log_theta2) return v;
        return {v[0], v[1], std::exp(v[2]) - x1};
    }
    Eigen::Vector3d from_native(const Eigen::Vector3d& t) const {
        if (!log_theta2) return t;
        return {t[0], t[1], std::log(t[2] + x1)};
    }
};

StartResult newton_from(const SolveContext& ctx, Eigen::Vector3d theta) {
    Chart chart{false, ctx.stats.x[0]};
    const double wall_trigger = 1e-4 * ctx.span;
    const double step_scale[3] = {std::max(1.0, ctx.y_scale), std::max(1.0, ctx.y_scale),
                                  std::max(1.0, ctx.span)};
    const double fd_eps = 6e-6;  // ~cbrt(machine eps), central differences

    auto fail = [&](StartOutcome oc, const Eigen::Vector3d& t, double norm, int it) {
        return StartResult{oc, t, norm, it};
    };

    auto eval_chart = [&](const Eigen::Vector3d& v) { return eval_ustar(ctx, chart.to_native(v)); };

    Eigen::Vector3d v = theta;
    auto u_opt = eval_chart(v);
    if (!u_opt) return fail(StartOutcome::Diverged, theta, std::numeric_limits<double>::infinity(), 0);

    for (int iter = 0; iter < ctx.max_iter; ++iter) {
        const Eigen::Vector3d u = *u_opt;
        const double norm_inf = u.lpNorm<Eigen::Infinity>();
        if (norm_inf < ctx.tol) {
            return {StartOutcome::Converged, chart.to_native(v), norm_inf, iter};
        }

        Eigen::Matrix3d jac;
        bool jac_ok = true;
        for (int j = 0; j < 3 && jac_ok; ++j) {
            const double base = chart.log_theta2 && j == 2 ? 1.0 : step_scale[j];
            double h = fd_eps * std::max(std::abs(v[j]), base);
            bool col_ok = false;
            for (int attempt = 0; attempt < 3 && !col_ok; ++attempt, h *= 0.25) {
                Eigen::Vector3d vp = v, vm = v;
                vp[j] += h;
                vm[j] -= h;
                const auto up = eval_chart(vp);
                const auto um = eval_chart(vm);
                if (up && um) {
                    jac.col(j) = (*up - *um) / (2.0 * h);
                    col_ok = jac.col(j).allFinite();
                }
            }
            jac_ok = col_ok;
        }
        if (!jac_ok) return fail(StartOutcome::Diverged, chart.to_native(v), norm_inf, iter);

        const Eigen::Vector3d step = jac.partialPivLu().solve(-u);
        if (!step.allFinite()) {
            return fail(StartOutcome::Diverged, chart.to_native(v), norm_inf, iter);
        }

        // Backtracking line search on ||U*||^2.
        const double merit = u.squaredNorm();
        double lambda = 1.0;
        bool accepted = false;
        Eigen::Vector3d v_next;
        std::optional<Eigen::Vector3d> u_next;
        while (lambda > 1e-12) {
            v_next = v + lambda * step;
            u_next = eval_chart(v_next);
            if (u_next && u_next->squaredNorm() <= merit * (1.0 - 1e-4 * lambda)) {
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            return fail(StartOutcome::LineSearchStalled, chart.to_native(v), norm_inf, iter);
        }

        v = v_next;
        u_opt = u_next;

        Eigen::Vector3d native = chart.to_native(v);
        if (std::abs(native[2]) > 10.0 * ctx.cap || std::abs(native[0]) > 1e9 * ctx.y_scale ||
            std::abs(native[1]) > 1e9 * ctx.y_scale) {
            return fail(StartOutcome::Diverged, native, u_opt->lpNorm<Eigen::Infinity>(), iter);
        }
        if (!chart.log_theta2) {
            const double dist = native[2] + ctx.stats.x[0];
            if (dist > 0.0 && dist < wall_trigger) {
                chart.log_theta2 = true;
                v = chart.from_native(native);
            }
        } else if (v[2] < std::log(1e-12 * ctx.span)) {
            // theta2 + x1 -> 0: the step-function limit class, not an Emax member.
            return fail(StartOutcome::Diverged, chart.to_native(v),
                        u_opt->lpNorm<Eigen::Infinity>(), iter);
        }
    }
    return fail(StartOutcome::HitIterationCap, chart.to_native(v),
                u_opt->lpNorm<Eigen::Infinity>(), ctx.max_iter);
}

// Weighted least-squares (theta0, theta1) for a fixed theta2: linear
// regression of ybar on x/(x+theta2) with weights n_i.
std::optional<Eigen::Vector3d> ls_start(const SufficientStats& s, double theta2) {
    if (!pole_free(s, theta2)) return std::nullopt;
    double sw = 0, sg = 0, sy = 0, sgg = 0, sgy = 0;
    for (int i = 0; i < 3; ++i) {
        const double w = static_cast<double>(s.n[i]);
        const double g = s.x[i] / (s.x[i] + theta2);
        sw += w;
        sg += w * g;
        sy += w * s.ybar[i];
        sgg += w * g * g;
        sgy += w * g * s.ybar[i];
    }
    const double det = sw * sgg - sg * sg;
    if (det == 0.0 || !std::isfinite(det)) return std::nullopt;
    const double theta1 = (sw * sgy - sg * sy) / det;
    const double theta0 = (sy - theta1 * sg) / sw;
    return Eigen::Vector3d{theta0, theta1, theta2};
}

// Hyperbola through the three points, admissible or not.
std::optional<Eigen::Vector3d> interpolant_start(const SufficientStats& s) {
    const double m1 = (s.ybar[1] - s.ybar[0]) / (s.x[1] - s.x[0]);
    const double m2 = (s.ybar[2] - s.ybar[0]) / (s.x[2] - s.x[0]);
    const double dm = m1 - m2;
    if (std::abs(dm) <= 1e-12 * std::max(std::abs(m1), 1e-300)) return std::nullopt;
    const double t2 = (s.ybar[2] - s.ybar[1]) / dm;  // tilde frame
    const double theta2 = t2 - s.x[0];
    if (t2 == 0.0 || t2 == s.x[0] || !pole_free(s, theta2)) return std::nullopt;
    const double t1 = m1 * m2 / dm * (s.x[2] - s.x[1]);
    const double theta1 = t1 * t2 / (t2 - s.x[0]);
    const double theta0 = s.ybar[0] - s.x[0] * theta1 / (theta2 + s.x[0]);
    Eigen::Vector3d v{theta0, theta1, theta2};
    if (!v.allFinite()) return std::nullopt;
    return v;
}

}  // namespace

FitResult firth_solve(const SufficientStats& s, const NoiseModel& noise,
                      std::optional<EmaxParams> init, const SolverOpts& opts) {
    const double span = s.x[2] - s.x[0];
    SolveContext ctx{
        s,
        noise,
        opts.theta2_cap > 0.0 ? opts.theta2_cap : 1e6 * span,
        1.0 + std::max({std::abs(s.ybar[0]), std::abs(s.ybar[1]), std::abs(s.ybar[2])}),
        span,
        opts.tol,
        opts.max_iter,
    };

    std::vector<Eigen::Vector3d> starts;
    if (init) {
        starts.push_back(Eigen::Vector3d{init->theta0, init->theta1, init->theta2});
    }
    if (auto hyp = interpolant_start(s)) starts.push_back(*hyp);
    for (int k = -opts.grid_span; k <= opts.grid_span; ++k) {
        if (auto ls = ls_start(s, span * std::pow(2.0, k))) starts.push_back(*ls);
    }

    int n_inadmissible = 0, n_diverged = 0, n_capped = 0;
    for (const Eigen::Vector3d& start : starts) {
        const StartResult r = newton_from(ctx, start);
        switch (r.outcome) {
            case StartOutcome::Converged: {
                const EmaxParams p{r.theta[0], r.theta[1], r.theta[2]};
                if (std::abs(p.theta2) >= ctx.cap) {
                    ++n_diverged;  // an approximate limit curve, per the cap rule
                } else if (is_admissible(p, s.x[0])) {
                    return FirthEstimate{p, r.score_norm, r.iterations};
                } else {
                    ++n_inadmissible;
                }
                break;
            }
            case StartOutcome::Diverged:
            case StartOutcome::LineSearchStalled:
                ++n_diverged;
                break;
            case StartOutcome::HitIterationCap:
                ++n_capped;
                break;
        }
    }

    FirthFailureKind kind = FirthFailureKind::Divergence;
    if (n_inadmissible > 0) {
        kind = FirthFailureKind::InadmissibleRoot;
    } else if (n_diverged == 0 && n_capped > 0) {
        kind = FirthFailureKind::IterationCap;
    }
    std::ostringstream reason;
    reason << "no admissible root of the modified score: " << n_inadmissible
           << " inadmissible, " << n_diverged << " diverged, " << n_capped
           << " hit the iteration cap (of " << starts.size() << " starts)";
    return FirthFailure{kind, reason.str()};
}

}  // namespace emax
